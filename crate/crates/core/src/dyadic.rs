//! The dyadic grid on `[0, 1)`: cubes, step functions and the integral,
//! average and norm primitives everything else is built from.
//!
//! A step function at resolution `L` is constant on each of the `2^L` cells of
//! level `L`, so every integral over a dyadic cube of level `<= L` is a finite
//! sum and carries no quadrature error. Sums are formed pairwise; because the
//! cell count of a cube is a power of two, the pairwise association coincides
//! with the bottom-up [`Pyramid`], so direct and pyramid integrals agree bit for
//! bit.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::{inv_pow2, pairwise_sum, pow2, Scalar};

pub const MAX_RESOLUTION: u32 = 20;
pub const DEFAULT_RESOLUTION: u32 = 10;

/// The dyadic interval `[index * 2^-level, (index + 1) * 2^-level)`.
///
/// Ordering is by `(level, index)`, which is also the order of the cube text
/// format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    level: u32,
    index: u64,
}

impl Cube {
    pub const ROOT: Cube = Cube { level: 0, index: 0 };

    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > MAX_RESOLUTION || index >= (1u64 << level) {
            return Err(Error::InvalidCube { level, index });
        }
        Ok(Cube { level, index })
    }

    pub fn level(self) -> u32 {
        self.level
    }

    pub fn index(self) -> u64 {
        self.index
    }

    /// `|Q| = 2^-level`.
    pub fn measure<T: Scalar>(self) -> T {
        inv_pow2(self.level)
    }

    /// Position in the heap layout `2^level - 1 + index` (root first).
    pub fn heap_index(self) -> usize {
        (1usize << self.level) - 1 + self.index as usize
    }

    /// Left endpoint as `f64`.
    pub fn start(self) -> f64 {
        self.index as f64 * (-(self.level as f64)).exp2()
    }

    pub fn end(self) -> f64 {
        (self.index + 1) as f64 * (-(self.level as f64)).exp2()
    }

    /// `self ⊆ other`.
    pub fn is_within(self, other: Cube) -> bool {
        self.level >= other.level && self.index >> (self.level - other.level) == other.index
    }

    /// `self ⊋ other`.
    pub fn strictly_contains(self, other: Cube) -> bool {
        other.level > self.level && other.is_within(self)
    }

    pub fn parent(self) -> Option<Cube> {
        (self.level > 0).then(|| Cube {
            level: self.level - 1,
            index: self.index >> 1,
        })
    }

    pub fn children(self) -> [Cube; 2] {
        let level = self.level + 1;
        [
            Cube {
                level,
                index: self.index << 1,
            },
            Cube {
                level,
                index: (self.index << 1) | 1,
            },
        ]
    }

    /// The ancestor of `self` at `level` (itself when `level == self.level`).
    pub fn ancestor_at(self, level: u32) -> Option<Cube> {
        (level <= self.level).then(|| Cube {
            level,
            index: self.index >> (self.level - level),
        })
    }

    /// `self`, its parent, ..., up to the root.
    pub fn self_and_ancestors(self) -> impl Iterator<Item = Cube> {
        (0..=self.level).rev().map(move |l| Cube {
            level: l,
            index: self.index >> (self.level - l),
        })
    }

    /// Range of level-`resolution` cells covered by the cube.
    pub fn cell_range(self, resolution: u32) -> Range<usize> {
        debug_assert!(self.level <= resolution);
        let shift = resolution - self.level;
        let lo = (self.index << shift) as usize;
        lo..lo + (1usize << shift)
    }

    /// Descendants of `self` at `level`.
    pub fn descendants_at(self, level: u32) -> impl Iterator<Item = Cube> {
        debug_assert!(level >= self.level);
        let shift = level - self.level;
        let lo = self.index << shift;
        (lo..lo + (1u64 << shift)).map(move |index| Cube { level, index })
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.level, self.index)
    }
}

/// All cubes of levels `0..=resolution`, in `(level, index)` order.
pub fn all_cubes(resolution: u32) -> impl Iterator<Item = Cube> {
    (0..=resolution).flat_map(|level| (0..1u64 << level).map(move |index| Cube { level, index }))
}

/// Number of cubes in levels `0..=resolution`.
pub fn cube_count(resolution: u32) -> usize {
    (1usize << (resolution + 1)) - 1
}

/// A nonnegative function constant on each level-`resolution` cell.
///
/// Used both for test functions and for weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T> {
    resolution: u32,
    cells: Vec<T>,
}

impl<T: Scalar> StepFunction<T> {
    pub fn new(resolution: u32, cells: Vec<T>) -> Result<Self> {
        if resolution > MAX_RESOLUTION {
            return Err(Error::ResolutionTooLarge(resolution));
        }
        let expected = 1usize << resolution;
        if cells.len() != expected {
            return Err(Error::CellCount {
                resolution,
                expected,
                found: cells.len(),
            });
        }
        if let Some((index, v)) = cells
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < T::zero())
        {
            return Err(Error::InvalidCell {
                index,
                value: v.to_f64_lossy(),
            });
        }
        Ok(StepFunction { resolution, cells })
    }

    pub fn constant(resolution: u32, value: T) -> Result<Self> {
        Self::from_fn(resolution, |_| value)
    }

    /// Builds a function from a per-cell closure.
    pub fn from_fn(resolution: u32, mut f: impl FnMut(usize) -> T) -> Result<Self> {
        if resolution > MAX_RESOLUTION {
            return Err(Error::ResolutionTooLarge(resolution));
        }
        Self::new(resolution, (0..1usize << resolution).map(&mut f).collect())
    }

    /// The indicator of a cube.
    pub fn indicator(resolution: u32, cube: Cube) -> Result<Self> {
        check_level(cube, resolution)?;
        let range = cube.cell_range(resolution);
        Self::from_fn(resolution, |c| {
            if range.contains(&c) {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<T> {
        self.cells
    }

    pub fn cell_measure(&self) -> T {
        inv_pow2(self.resolution)
    }

    /// Applies `f` cellwise; panics if the result is not a valid cell value.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(self.resolution, self.cells.iter().map(|&v| f(v)).collect())
            .expect("cellwise map produced an invalid cell value")
    }

    /// Cellwise power `f^e`; fails if a cell becomes infinite (`0^e`, `e < 0`).
    pub fn powf(&self, e: T) -> Result<Self> {
        if e == T::one() {
            return Ok(self.clone());
        }
        Self::new(
            self.resolution,
            self.cells.iter().map(|v| v.powf(e)).collect(),
        )
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        same_resolution(self, other)?;
        Ok(StepFunction {
            resolution: self.resolution,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }

    /// Index of the first zero cell, if any.
    pub fn first_zero(&self) -> Option<usize> {
        self.cells.iter().position(|&v| v == T::zero())
    }

    pub fn require_positive(&self) -> Result<()> {
        match self.first_zero() {
            Some(index) => Err(Error::ZeroCell { index }),
            None => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(|&v| v == T::zero())
    }

    pub fn pyramid(&self) -> Pyramid<T> {
        Pyramid::new(self)
    }
}

pub(crate) fn check_level(cube: Cube, resolution: u32) -> Result<()> {
    if cube.level() > resolution {
        Err(Error::CubeTooFine { cube, resolution })
    } else {
        Ok(())
    }
}

pub(crate) fn same_resolution<T>(a: &StepFunction<T>, b: &StepFunction<T>) -> Result<()> {
    if a.resolution != b.resolution {
        Err(Error::ResolutionMismatch {
            expected: a.resolution,
            found: b.resolution,
        })
    } else {
        Ok(())
    }
}

/// Integrals of one step function over every dyadic cube, built bottom-up.
///
/// `level(j)[i]` holds `∫_{(j, i)} f`.
#[derive(Debug, Clone)]
pub struct Pyramid<T> {
    levels: Vec<Vec<T>>,
}

impl<T: Scalar> Pyramid<T> {
    pub fn new(f: &StepFunction<T>) -> Self {
        let h = f.cell_measure();
        let mut levels = Vec::with_capacity(f.resolution as usize + 1);
        levels.push(f.cells.iter().map(|&v| v * h).collect::<Vec<T>>());
        for _ in 0..f.resolution {
            let next: Vec<T> = levels
                .last()
                .unwrap()
                .chunks_exact(2)
                .map(|c| c[0] + c[1])
                .collect();
            levels.push(next);
        }
        levels.reverse();
        Pyramid { levels }
    }

    pub fn resolution(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn level(&self, level: u32) -> &[T] {
        &self.levels[level as usize]
    }

    /// `∫_Q f`.
    pub fn integral(&self, q: Cube) -> T {
        self.levels[q.level() as usize][q.index() as usize]
    }

    /// `⟨f⟩_Q`.
    pub fn average(&self, q: Cube) -> T {
        self.integral(q) * pow2(q.level())
    }

    pub fn total(&self) -> T {
        self.levels[0][0]
    }
}

/// `|Q|`.
pub fn measure(q: Cube) -> f64 {
    q.measure()
}

/// `∫_Q f`, as a pairwise sum over the cells of `Q`.
pub fn integral<T: Scalar>(f: &StepFunction<T>, q: Cube) -> Result<T> {
    check_level(q, f.resolution)?;
    Ok(pairwise_sum(&f.cells[q.cell_range(f.resolution)]) * f.cell_measure())
}

/// The `p0`-average `(|Q|^-1 ∫_Q |f|^p0)^(1/p0)`; plain average for `p0 = 1`.
pub fn average<T: Scalar>(f: &StepFunction<T>, q: Cube, p0: T) -> Result<T> {
    check_level(q, f.resolution)?;
    let range = q.cell_range(f.resolution);
    let h = f.cell_measure();
    let scale = pow2::<T>(q.level());
    if p0 == T::one() {
        return Ok(pairwise_sum(&f.cells[range]) * h * scale);
    }
    let powered: Vec<T> = f.cells[range].iter().map(|v| v.abs().powf(p0)).collect();
    Ok((pairwise_sum(&powered) * h * scale).powf(p0.recip()))
}

/// `⟨f⟩_Q^σ = ∫_Q f σ / σ(Q)`, defined as `0` when `σ(Q) = 0`.
pub fn weighted_average<T: Scalar>(
    f: &StepFunction<T>,
    sigma: &StepFunction<T>,
    q: Cube,
) -> Result<T> {
    same_resolution(f, sigma)?;
    let mass = integral(sigma, q)?;
    if mass == T::zero() {
        return Ok(T::zero());
    }
    Ok(integral(&f.mul(sigma)?, q)? / mass)
}

/// `‖f‖_{L^p(w)} = (∑_c f_c^p w_c 2^-L)^(1/p)`.
pub fn lp_norm<T: Scalar>(f: &StepFunction<T>, w: &StepFunction<T>, p: T) -> Result<T> {
    same_resolution(f, w)?;
    let terms: Vec<T> = f
        .cells
        .iter()
        .zip(&w.cells)
        .map(|(&v, &wv)| v.powf(p) * wv)
        .collect();
    Ok((pairwise_sum(&terms) * f.cell_measure()).powf(p.recip()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(cells: &[f64]) -> StepFunction<f64> {
        let l = cells.len().trailing_zeros();
        StepFunction::new(l, cells.to_vec()).unwrap()
    }

    #[test]
    fn measure_examples() {
        assert_eq!(measure(Cube::ROOT), 1.0);
        assert_eq!(measure(Cube::new(3, 5).unwrap()), 0.125);
        assert_eq!(measure(Cube::new(1, 1).unwrap()), 0.5);
    }

    #[test]
    fn cube_validation_and_containment() {
        assert!(Cube::new(2, 4).is_err());
        let q = Cube::new(3, 5).unwrap();
        assert!(q.is_within(Cube::new(1, 1).unwrap()));
        assert!(!q.is_within(Cube::new(1, 0).unwrap()));
        assert!(Cube::ROOT.strictly_contains(q));
        assert!(!q.strictly_contains(q));
        assert_eq!(q.parent(), Some(Cube::new(2, 2).unwrap()));
        assert_eq!(q.self_and_ancestors().count(), 4);
        assert_eq!(q.cell_range(5), 20..24);
        assert_eq!(all_cubes(8).count(), 511);
        assert_eq!(cube_count(8), 511);
    }

    #[test]
    fn integral_examples() {
        let one = StepFunction::<f64>::constant(3, 1.0).unwrap();
        assert_eq!(integral(&one, Cube::ROOT).unwrap(), 1.0);
        let f = sf(&[1.0, 3.0]);
        assert_eq!(integral(&f, Cube::ROOT).unwrap(), 2.0);
        assert_eq!(integral(&f, Cube::new(1, 1).unwrap()).unwrap(), 1.5);
        assert!(matches!(
            integral(&f, Cube::new(2, 0).unwrap()),
            Err(Error::CubeTooFine { .. })
        ));
    }

    #[test]
    fn average_examples() {
        let c = StepFunction::<f64>::constant(4, 2.5).unwrap();
        for q in all_cubes(4) {
            for p0 in [1.0, 1.5, 3.0] {
                assert!((average(&c, q, p0).unwrap() - 2.5).abs() < 1e-14);
            }
        }
        let f = sf(&[1.0, 3.0]);
        assert_eq!(average(&f, Cube::ROOT, 1.0).unwrap(), 2.0);
        assert!((average(&f, Cube::ROOT, 2.0).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weighted_average_examples() {
        let f = sf(&[2.0, 4.0]);
        let one = sf(&[1.0, 1.0]);
        assert_eq!(
            weighted_average(&f, &one, Cube::ROOT).unwrap(),
            average(&f, Cube::ROOT, 1.0).unwrap()
        );
        let sigma = sf(&[1.0, 0.0]);
        assert_eq!(weighted_average(&f, &sigma, Cube::ROOT).unwrap(), 2.0);
        assert_eq!(
            weighted_average(&f, &sigma, Cube::new(1, 1).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn lp_norm_examples() {
        let one = StepFunction::<f64>::constant(2, 1.0).unwrap();
        for p in [0.5, 1.0, 2.0, 7.0] {
            assert!((lp_norm(&one, &one, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let f = sf(&[1.0, 3.0]);
        assert_eq!(lp_norm(&f, &sf(&[1.0, 1.0]), 1.0).unwrap(), 2.0);
        assert_eq!(lp_norm(&f, &sf(&[2.0, 0.0]), 2.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_cells() {
        assert!(matches!(
            StepFunction::new(1, vec![1.0, -1.0]),
            Err(Error::InvalidCell { index: 1, .. })
        ));
        assert!(StepFunction::new(1, vec![1.0, f64::NAN]).is_err());
        assert!(StepFunction::new(2, vec![1.0; 3]).is_err());
        assert!(StepFunction::<f64>::constant(21, 1.0).is_err());
        let a = sf(&[1.0, 1.0]);
        let b = sf(&[1.0; 4]);
        assert!(lp_norm(&a, &b, 2.0).is_err());
    }

    #[test]
    fn pyramid_agrees_with_direct_integral() {
        let f = StepFunction::from_fn(6, |c| ((c * 37) % 11) as f64 + 0.25).unwrap();
        let pyr = f.pyramid();
        for q in all_cubes(6) {
            assert_eq!(pyr.integral(q), integral(&f, q).unwrap());
        }
    }

    #[test]
    fn works_in_single_precision() {
        let f = StepFunction::new(1, vec![1.0f32, 3.0]).unwrap();
        assert_eq!(integral(&f, Cube::ROOT).unwrap(), 2.0f32);
        assert!((average(&f, Cube::ROOT, 2.0f32).unwrap() - 5f32.sqrt()).abs() < 1e-6);
    }
}
