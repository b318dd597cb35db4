// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chaining;
pub mod empirical;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod orlicz;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct BookIntroduction;
    #[doc = include_str!("../../../book/src/measures.md")]
    pub struct BookMeasures;
    #[doc = include_str!("../../../book/src/orlicz.md")]
    pub struct BookOrlicz;
    #[doc = include_str!("../../../book/src/chaining.md")]
    pub struct BookChaining;
    #[doc = include_str!("../../../book/src/empirical.md")]
    pub struct BookEmpirical;
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub struct BookBounds;
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub struct BookGeometry;
    #[doc = include_str!("../../../book/src/harness.md")]
    pub struct BookHarness;
}
