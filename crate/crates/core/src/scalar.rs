use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Real scalar used throughout the estimation code.
///
/// Implemented for `f32` and `f64`. Tolerances inside the crate are
/// expressed in terms of [`Float::epsilon`] so both widths behave sensibly,
/// but the published accuracy targets assume `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Money-like quantity for the impact cascade.
///
/// Deliberately weaker than [`Scalar`]: only field operations and ordering
/// are needed, so exact rationals work as well as floats.
pub trait Amount: Clone + Num + PartialOrd + FromPrimitive + Debug {}

impl<T> Amount for T where T: Clone + Num + PartialOrd + FromPrimitive + Debug {}

/// Rounds half-to-even at `decimals` places.
///
/// Values within a few ulps of a tie are treated as ties, so `17.245`
/// (stored as `17.24500000000000099...`) rounds to `17.24`.
pub fn round_half_even<T: Scalar>(value: T, decimals: u32) -> T {
    let scale = T::lit(10f64.powi(decimals as i32));
    let scaled = value * scale;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let half = T::lit(0.5);
    let slack = T::epsilon() * scaled.abs().max(T::one()) * T::lit(8.0);
    let rounded = if (frac - half).abs() <= slack {
        if (floor / T::lit(2.0)).fract() == T::zero() {
            floor
        } else {
            floor + T::one()
        }
    } else {
        scaled.round()
    };
    rounded / scale
}
