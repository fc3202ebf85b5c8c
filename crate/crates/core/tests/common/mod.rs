//! Brute-force reference implementations and random instance generators.
//!
//! Everything here works on raw cell vectors with direct loops and never
//! calls the optimized evaluators.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_weights::sparse::{random_sparse, Branching};
use sparse_weights::{Cube, SparseFamily, StepFn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cells `[start, end)` of the level-`l` grid lying inside `(level, index)`.
pub fn span(level: u32, index: u64, l: u32) -> (usize, usize) {
    let width = 1usize << (l - level);
    let start = index as usize * width;
    (start, start + width)
}

pub fn every_cube(l: u32) -> Vec<(u32, u64)> {
    (0..=l)
        .flat_map(|j| (0..(1u64 << j)).map(move |i| (j, i)))
        .collect()
}

pub fn mean(f: &[f64], (a, b): (usize, usize)) -> f64 {
    f[a..b].iter().sum::<f64>() / (b - a) as f64
}

pub fn mass(f: &[f64], (a, b): (usize, usize)) -> f64 {
    f[a..b].iter().sum::<f64>() / f.len() as f64
}

pub fn p0_mean(f: &[f64], s: (usize, usize), p0: f64) -> f64 {
    let g: Vec<f64> = f.iter().map(|v| v.abs().powf(p0)).collect();
    mean(&g, s).powf(1.0 / p0)
}

pub fn sparse_op(cubes: &[(u32, u64)], fs: &[Vec<f64>], l: u32, p0: f64, gamma: f64) -> Vec<f64> {
    let n = 1usize << l;
    let mut out = vec![0.0; n];
    for (x, slot) in out.iter_mut().enumerate() {
        let mut total = 0.0;
        for &(j, i) in cubes {
            let s = span(j, i, l);
            if s.0 <= x && x < s.1 {
                let prod: f64 = fs.iter().map(|f| p0_mean(f, s, p0)).product();
                total += prod.powf(gamma);
            }
        }
        *slot = total.powf(1.0 / gamma);
    }
    out
}

/// `sup_Q ⟨w⟩_Q ∏ ⟨σ_i⟩_Q^{(p/p0)(p_i - p0)/p_i}`.
pub fn a_vec_p(w: &[f64], sigmas: &[Vec<f64>], l: u32, p: &[f64], p0: f64) -> f64 {
    let pp = 1.0 / p.iter().map(|x| 1.0 / x).sum::<f64>();
    let mut best = 0.0f64;
    for (j, i) in every_cube(l) {
        let s = span(j, i, l);
        let mut v = mean(w, s);
        for (sig, &pi) in sigmas.iter().zip(p) {
            v *= mean(sig, s).powf((pp / p0) * (pi - p0) / pi);
        }
        best = best.max(v);
    }
    best
}

/// Dyadic maximal function of `w 1_Q`, written out cell by cell.
pub fn local_maximal(w: &[f64], q: (u32, u64), l: u32) -> Vec<f64> {
    let (a, b) = span(q.0, q.1, l);
    (a..b)
        .map(|x| {
            let mut best = 0.0f64;
            for j in q.0..=l {
                let width = 1usize << (l - j);
                let start = x / width * width;
                best = best.max(mean(w, (start, start + width)));
            }
            best
        })
        .collect()
}

pub fn a_infty(w: &[f64], l: u32) -> f64 {
    let n = w.len() as f64;
    let mut best = 0.0f64;
    for q in every_cube(l) {
        let s = span(q.0, q.1, l);
        let wq = mass(w, s);
        if wq > 0.0 {
            let m: f64 = local_maximal(w, q, l).iter().sum::<f64>() / n;
            best = best.max(m / wq);
        }
    }
    best
}

pub fn multi_maximal(fs: &[Vec<f64>], sigmas: &[Vec<f64>], l: u32) -> Vec<f64> {
    let n = 1usize << l;
    let products: Vec<Vec<f64>> = fs
        .iter()
        .zip(sigmas)
        .map(|(f, s)| f.iter().zip(s).map(|(a, b)| a * b).collect())
        .collect();
    (0..n)
        .map(|x| {
            let mut best = 0.0f64;
            for j in 0..=l {
                let width = 1usize << (l - j);
                let start = x / width * width;
                let v: f64 = products
                    .iter()
                    .map(|g| mean(g, (start, start + width)))
                    .product();
                best = best.max(v);
            }
            best
        })
        .collect()
}

pub fn lp_norm(f: &[f64], w: &[f64], p: f64) -> f64 {
    let n = f.len() as f64;
    (f.iter()
        .zip(w)
        .map(|(a, b)| a.abs().powf(p) * b)
        .sum::<f64>()
        / n)
        .powf(1.0 / p)
}

pub fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| rel(x, y))
        .fold(0.0, f64::max)
}

/// Cells `e^u`, `u` uniform on `[-r, r]`.
pub fn log_uniform(rng: &mut ChaCha8Rng, l: u32, r: f64) -> Vec<f64> {
    (0..1usize << l)
        .map(|_| (rng.gen_range(-r..=r)).exp())
        .collect()
}

/// Nonnegative cells with some exact zeros.
pub fn with_zeros(rng: &mut ChaCha8Rng, l: u32, r: f64) -> Vec<f64> {
    (0..1usize << l)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(-r..=r).exp()
            }
        })
        .collect()
}

pub fn step(cells: &[f64]) -> StepFn {
    StepFn::new(cells.len().trailing_zeros(), cells.to_vec()).unwrap()
}

pub fn family(rng: &mut ChaCha8Rng, l: u32) -> SparseFamily {
    random_sparse(rng.gen(), l, &Branching::default()).unwrap()
}

pub fn pairs(f: &SparseFamily) -> Vec<(u32, u64)> {
    f.iter().map(|q: Cube| (q.level(), q.index())).collect()
}

/// Largest relative gaps `[sparse_op, a_vec_p, a_infty, multi_maximal]`
/// between the library and the loops above on one random instance.
pub fn oracle_trial(seed: u64) -> [f64; 4] {
    use sparse_weights::operators::{multi_maximal as mm, sparse_op as op, SparseOperatorSpec};
    use sparse_weights::weights::{a_infty as ainf, a_vec_p as avp};
    use sparse_weights::ExponentTuple;

    let mut r = rng(seed);
    let l = r.gen_range(1..=6u32);
    let m = r.gen_range(1..=3usize);
    let fam = family(&mut r, l);
    let fs: Vec<Vec<f64>> = (0..m).map(|_| with_zeros(&mut r, l, 2.0)).collect();
    let sigmas: Vec<Vec<f64>> = (0..m).map(|_| log_uniform(&mut r, l, 2.0)).collect();
    let w = with_zeros(&mut r, l, 2.0);
    let p0 = [1.0, 1.5, 2.0][r.gen_range(0..3)];
    let gamma = [0.5, 1.0, 2.0, 3.0][r.gen_range(0..4)];
    let p: Vec<f64> = (0..m).map(|_| p0 + r.gen_range(0.2..4.0)).collect();

    let step_fs: Vec<StepFn> = fs.iter().map(|f| step(f)).collect();
    let step_sig: Vec<StepFn> = sigmas.iter().map(|f| step(f)).collect();
    let step_w = step(&w);
    let spec = SparseOperatorSpec::new(fam.clone(), p0, gamma, m).unwrap();
    let fast = op(&spec, &step_fs).unwrap();
    let slow = sparse_op(&pairs(&fam), &fs, l, p0, gamma);
    let d_op = max_rel(fast.cells(), &slow);

    let e = ExponentTuple::new(p.clone(), p0, gamma).unwrap();
    let d_avp = rel(
        avp(&step_w, &step_sig, &e).unwrap().value,
        a_vec_p(&w, &sigmas, l, &p, p0),
    );

    let d_inf = if w.iter().any(|&v| v > 0.0) {
        rel(ainf(&step_w).unwrap().value, a_infty(&w, l))
    } else {
        0.0
    };
    let d_mm = max_rel(
        mm(&step_fs, &step_sig).unwrap().cells(),
        &multi_maximal(&fs, &sigmas, l),
    );
    [d_op, d_avp, d_inf, d_mm]
}
