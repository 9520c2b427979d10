//! Chinese word embeddings learned jointly from stroke n-grams and glyph images.
//!
//! A word vector is its own id embedding plus the average, over its Chinese
//! characters, of the summed stroke n-gram vectors multiplied item-wise with
//! a LeNet feature of the character's 28×28 glyph. Training maximizes the
//! skip-gram negative-sampling objective with mini-batch Adagrad.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod glyph_cnn;
pub mod model;
pub mod morphology;
pub mod real;
pub mod registry;
pub mod synthetic;
pub mod trainer;

pub use error::{DweError, Result};
