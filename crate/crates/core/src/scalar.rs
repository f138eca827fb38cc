//! Scalar abstraction for the value and optimization math.
//!
//! Weightings, feature vectors, scenario-tree backups and the
//! cross-entropy optimizer are generic over [`Scalar`]. Domain
//! probabilities stay in `f64`; they are converted once when a tree is
//! built.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable for rewards, values and weightings.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`. Domain constants are finite and small
    /// enough that this never fails for `f32`/`f64`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_small_integers() {
        assert_eq!(<f32 as Scalar>::of(-250.0), -250.0f32);
        assert_eq!(<f64 as Scalar>::of(-4.0).to_f64_lossy(), -4.0);
    }
}
