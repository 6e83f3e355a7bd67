//! Query-style tokenization: lowercase, whitespace split, with leading and
//! trailing punctuation peeled off into separate tokens.

/// Splits `text` into lowercase tokens.
///
/// ```
/// use lambada_core::corpus::tokenize;
/// assert_eq!(tokenize("Book a flight, (Boston)!"), ["book", "a", "flight", ",", "(", "boston", ")", "!"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let chars: Vec<char> = word.chars().collect();
        let start = chars
            .iter()
            .position(|c| c.is_alphanumeric())
            .unwrap_or(chars.len());
        let end = chars
            .iter()
            .rposition(|c| c.is_alphanumeric())
            .map_or(start, |i| i + 1);
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
            out.extend(chars[end..].iter().map(|c| c.to_string()));
        }
    }
    out
}

/// Joins tokens with single spaces. `tokenize(&detokenize(t)) == t` for any
/// `t` produced by [`tokenize`].
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_ref());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn punctuation_is_split_from_words() {
        assert_eq!(tokenize("What's up?"), ["what's", "up", "?"]);
        assert_eq!(tokenize("..."), [".", ".", "."]);
        assert_eq!(tokenize("  \t\n "), Vec::<String>::new());
        assert_eq!(tokenize("$100"), ["$", "100"]);
    }

    #[test]
    fn reserved_surface_forms_cannot_survive() {
        for s in ["<SEP>", "<EOS>", "__label_3__"] {
            let t = tokenize(s);
            assert!(!t.iter().any(|x| x == s || x == &s.to_lowercase()), "{t:?}");
        }
    }

    proptest! {
        #[test]
        fn tokenization_is_a_fixed_point(s in "\\PC{0,60}") {
            let once = tokenize(&s);
            let twice = tokenize(&detokenize(&once));
            prop_assert_eq!(once, twice);
        }
    }
}
