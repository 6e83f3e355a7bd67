//! Language-model based data augmentation for text classification.
//!
//! The crate implements the full augmentation loop for small labeled corpora:
//!
//! 1. train a baseline classifier `h` on the labeled data ([`classify`]),
//! 2. adapt a class-conditional language model to the same data ([`condlm`]),
//! 3. oversample labeled sentences from the adapted model ([`lambada`]),
//! 4. keep only the candidates `h` agrees with, ranked by its confidence.
//!
//! The retained sentences are added to the training set and the classifier
//! is retrained. [`baselines`] holds the comparison arms (EDA and weak
//! labeling) and [`eval`] runs experiment grids with McNemar significance.
//!
//! ```
//! use lambada_core::corpus::{Dataset, LabelMap};
//! use lambada_core::classify::{ClassifierSpec, accuracy};
//!
//! let labels = LabelMap::from_names(["refund", "weather"]).unwrap();
//! let data = Dataset::from_pairs(labels, [
//!     ("i want my money back", 1),
//!     ("refund my ticket please", 1),
//!     ("is it raining today", 2),
//!     ("will it be sunny tomorrow", 2),
//! ]).unwrap();
//! let model = ClassifierSpec::default().train(&data).unwrap();
//! assert_eq!(accuracy(&model, &data).unwrap(), 1.0);
//! ```

pub mod baselines;
pub mod classify;
pub mod condlm;
pub mod corpus;
mod error;
pub mod eval;
pub mod extgen;
pub mod generator;
pub mod lambada;
pub mod seed;

pub use error::{Error, Result, Stage};
