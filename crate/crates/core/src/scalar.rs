//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A real scalar the dataset, scaler and classifiers can be instantiated with.
///
/// Implemented for `f32` and `f64`. `NAME` is written into serialized models so
/// a file fitted with one width is never silently read back as the other.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    const NAME: &'static str;

    /// Lossy conversion from `f64`; exact for `f64` itself.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every float width")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to every float width")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float widens to f64")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}
