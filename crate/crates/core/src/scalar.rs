//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the dyadic machinery is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `2^-k` in the scalar type; exact for every resolution this crate allows.
pub fn inv_pow2<T: Scalar>(k: u32) -> T {
    T::lit((-(k as f64)).exp2())
}

/// `2^k` in the scalar type.
pub fn pow2<T: Scalar>(k: u32) -> T {
    T::lit((k as f64).exp2())
}

/// Pairwise (tree) summation. For power-of-two lengths the association order
/// is exactly that of a bottom-up dyadic pyramid.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n => {
            let (lo, hi) = xs.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

/// `max(x, 0)`.
pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Hölder conjugate `p / (p - 1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_tree() {
        let xs: Vec<f64> = (0..8).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let level1: Vec<f64> = xs.chunks(2).map(|c| c[0] + c[1]).collect();
        let level2: Vec<f64> = level1.chunks(2).map(|c| c[0] + c[1]).collect();
        assert_eq!(pairwise_sum(&xs), level2[0] + level2[1]);
    }

    #[test]
    fn powers_of_two_exact() {
        assert_eq!(inv_pow2::<f64>(3), 0.125);
        assert_eq!(inv_pow2::<f32>(20), 1.0 / 1_048_576.0);
        assert_eq!(pow2::<f64>(10), 1024.0);
    }

    #[test]
    fn rel_diff_handles_zero() {
        assert_eq!(rel_diff(0.0f64, 0.0), 0.0);
        assert_eq!(rel_diff(1.0f64, 2.0), 0.5);
    }
}
