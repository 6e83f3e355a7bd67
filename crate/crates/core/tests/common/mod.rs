//! Three-class slot grammar shared by the integration tests.
//!
//! A sentence is a head word followed by one or more keywords. Keywords
//! and carrier heads belong to one class; opener heads are shared, so a
//! classifier that has only seen a handful of keywords must guess on
//! opener sentences whose keywords are new to it.

#![allow(dead_code)]

use lambada_core::corpus::{Dataset, LabelMap, LabeledSentence};
use lambada_core::seed;
use rand::seq::SliceRandom;
use rand::Rng;

pub const CLASSES: [&str; 3] = ["weather", "music", "travel"];

const CARRIERS: [[&str; 2]; 3] = [["forecast", "weather"], ["play", "song"], ["flight", "trip"]];

const KEYWORDS: [[&str; 16]; 3] = [
    [
        "rain", "snow", "wind", "fog", "storm", "sunny", "cloudy", "humid", "frost", "hail",
        "thunder", "drizzle", "breeze", "sleet", "heat", "mist",
    ],
    [
        "jazz", "rock", "blues", "piano", "guitar", "violin", "opera", "reggae", "techno", "drums",
        "banjo", "cello", "flute", "harp", "disco", "choir",
    ],
    [
        "paris", "tokyo", "rome", "cairo", "lima", "oslo", "delhi", "seoul", "dubai", "miami",
        "quito", "accra", "berlin", "madrid", "lisbon", "vienna",
    ],
];

const OPENERS: [&str; 4] = ["tell", "about", "any", "show"];

/// Probability of the carrier form.
const CARRIER_RATE: f64 = 0.3;

/// Chance of one more keyword after each keyword.
const ANOTHER_KEYWORD: f64 = 0.5;

pub fn labels() -> LabelMap {
    LabelMap::from_names(CLASSES).unwrap()
}

pub fn vocabulary() -> Vec<&'static str> {
    let mut v: Vec<&str> = CARRIERS.iter().flatten().copied().collect();
    v.extend(KEYWORDS.iter().flatten());
    v.extend(OPENERS);
    v
}

/// `class` is the 1-based class id.
pub fn sentence<R: Rng + ?Sized>(class: u32, rng: &mut R) -> String {
    let class = class as usize - 1;
    let head = if rng.gen_bool(CARRIER_RATE) {
        CARRIERS[class].choose(rng).unwrap()
    } else {
        OPENERS.choose(rng).unwrap()
    };
    let mut kws = vec![*KEYWORDS[class].choose(rng).unwrap()];
    while rng.gen_bool(ANOTHER_KEYWORD) {
        kws.push(*KEYWORDS[class].choose(rng).unwrap());
    }
    format!("{head} {}", kws.join(" "))
}

/// `per_class` sentences for every class, grouped by class.
pub fn dataset(per_class: usize, seed: u64) -> Dataset {
    let mut rng = seed::rng(seed);
    let mut items = Vec::new();
    for class in 1..=CLASSES.len() as u32 {
        for _ in 0..per_class {
            items.push(LabeledSentence::new(sentence(class, &mut rng), class).unwrap());
        }
    }
    Dataset::new(labels(), items).unwrap()
}

/// Unlabeled token sequences from all classes, standing in for pretraining text.
pub fn prior(n: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            let class = rng.gen_range(1..=CLASSES.len() as u32);
            sentence(class, &mut rng).split(' ').map(str::to_owned).collect()
        })
        .collect()
}

/// Grammar-membership oracle: could `class` have produced these tokens?
pub fn member<S: AsRef<str>>(tokens: &[S], class: u32) -> bool {
    let class = class as usize - 1;
    let Some((head, kws)) = tokens.split_first() else {
        return false;
    };
    let head = head.as_ref();
    (CARRIERS[class].contains(&head) || OPENERS.contains(&head))
        && !kws.is_empty()
        && kws.iter().all(|k| KEYWORDS[class].contains(&k.as_ref()))
}

pub mod checks;

/// Sizes of the standard toy experiment.
pub const TRAIN_POOL_PER_CLASS: usize = 150;
pub const TEST_PER_CLASS: usize = 200;
pub const PRIOR_SENTENCES: usize = 600;

pub fn train_pool() -> Dataset {
    dataset(TRAIN_POOL_PER_CLASS, 1)
}

pub fn test_set() -> Dataset {
    dataset(TEST_PER_CLASS, 2)
}

pub fn generator() -> lambada_core::generator::GeneratorSpec {
    lambada_core::generator::GeneratorSpec::ngram(
        lambada_core::condlm::NGramParams::default(),
        prior(PRIOR_SENTENCES, 3),
    )
}
