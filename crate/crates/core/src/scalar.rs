//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real field used for probabilities, rewards and values: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Display
    + LowerExp
    + Debug
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Allowed deviation of a transition row's mass from one.
    const ROW_TOLERANCE: f64;

    /// Converts an `f64` constant into this scalar. Panics only if the
    /// constant is not representable at all, which never happens for the
    /// finite literals used throughout the crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable as scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Shortest decimal that parses back to the identical value.
    fn to_canonical_string(self) -> String {
        let magnitude = self.abs();
        if self == Self::zero() {
            "0".to_string()
        } else if magnitude >= Self::lit(1e-5) && magnitude < Self::lit(1e16) {
            format!("{self}")
        } else {
            format!("{self:e}")
        }
    }
}

impl Scalar for f32 {
    const ROW_TOLERANCE: f64 = 1e-5;
}

impl Scalar for f64 {
    const ROW_TOLERANCE: f64 = 1e-9;
}
