//! Arbitrary-precision scalars and truncated germs at infinity.

mod complex;
mod germ;

pub use complex::{float_to_decimal, parse_real, BigComplex, MIN_PREC};
pub use germ::{GermAtInfinity, SeriesError};
