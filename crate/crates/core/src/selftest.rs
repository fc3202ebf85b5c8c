//! Named smoke cases covering the small worked examples of every module.

use std::collections::{BTreeMap, BTreeSet};

use crate::dyadic::{all_cubes, average, integral, lp_norm, measure, weighted_average, Cube};
use crate::operators::{multi_maximal, rescale_identity_check, sparse_op, SparseOperatorSpec};
use crate::sparse::{
    carleson_sum, exceptional_sets, random_sparse, verify_sparse, Branching, SparseFamily,
};
use crate::stopping::{
    bucket_index, carleson_embedding_bound, carleson_embedding_check, level_sets, ls_bound_check,
    pi_map, principal_cubes,
};
use crate::verify::constants::{PilotConstants, EMBEDDED_PILOT};
use crate::verify::eval::{evaluate, Objective};
use crate::verify::experiment::{run_experiment, Check, ExperimentConfig, RatioCheck};
use crate::verify::params::{FamilySpec, FunctionSpec, InstanceParams};
use crate::verify::report::to_csv;
use crate::verify::search::{search, Coupling, SearchConfig, SearchSpace};
use crate::verify::theorem::{
    evaluate_maximal, theorem_ratio, theorem_ratio_sigma_form, theorem_rhs, TheoremInstance,
};
use crate::weights::{
    a_infty, a_p_constant, a_vec_p, dual_weights, power_weight, two_weight_a_p, ExponentTuple,
};
use crate::StepFn;

pub type CaseResult = std::result::Result<(), String>;

pub struct Case {
    pub name: &'static str,
    pub run: fn() -> CaseResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn cube(level: u32, index: u64) -> Cube {
    Cube::new(level, index).expect("valid cube")
}

fn sf(cells: &[f64]) -> StepFn {
    StepFn::new(cells.len().trailing_zeros(), cells.to_vec()).expect("valid cells")
}

fn ones(l: u32) -> StepFn {
    StepFn::constant(l, 1.0).expect("valid")
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> CaseResult {
    let scale = want.abs().max(1.0);
    if (got - want).abs() <= tol * scale {
        Ok(())
    } else {
        Err(format!("{name}: got {got:e}, expected {want:e}"))
    }
}

fn ensure(cond: bool, what: &str) -> CaseResult {
    if cond {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn e2(p: &[f64], p0: f64, gamma: f64) -> Result<ExponentTuple, String> {
    ExponentTuple::new(p.to_vec(), p0, gamma).map_err(|e| e.to_string())
}

macro_rules! t {
    ($e:expr) => {
        $e.map_err(|e| e.to_string())?
    };
}

fn dyadic_measure() -> CaseResult {
    close("root", measure(Cube::ROOT), 1.0, 0.0)?;
    close("(3,5)", measure(cube(3, 5)), 0.125, 0.0)?;
    close("(1,1)", measure(cube(1, 1)), 0.5, 0.0)
}

fn dyadic_integral() -> CaseResult {
    close("f=1", t!(integral(&ones(4), Cube::ROOT)), 1.0, 0.0)?;
    let f = sf(&[1.0, 3.0]);
    close("(1,3) root", t!(integral(&f, Cube::ROOT)), 2.0, 0.0)?;
    close("(1,3) right", t!(integral(&f, cube(1, 1))), 1.5, 0.0)
}

fn dyadic_average() -> CaseResult {
    let c = t!(StepFn::constant(3, 2.5));
    for p0 in [1.0, 2.0, 3.5] {
        close("constant", t!(average(&c, cube(2, 1), p0)), 2.5, 1e-15)?;
    }
    let f = sf(&[1.0, 3.0]);
    close("p0=1", t!(average(&f, Cube::ROOT, 1.0)), 2.0, 0.0)?;
    close("p0=2", t!(average(&f, Cube::ROOT, 2.0)), 5f64.sqrt(), 1e-15)
}

fn dyadic_weighted_average() -> CaseResult {
    let f = sf(&[1.0, 3.0]);
    close(
        "sigma=1",
        t!(weighted_average(&f, &ones(1), Cube::ROOT)),
        2.0,
        0.0,
    )?;
    close(
        "(2,4),(1,0)",
        t!(weighted_average(
            &sf(&[2.0, 4.0]),
            &sf(&[1.0, 0.0]),
            Cube::ROOT
        )),
        2.0,
        0.0,
    )?;
    close(
        "zero mass",
        t!(weighted_average(&f, &sf(&[1.0, 0.0]), cube(1, 1))),
        0.0,
        0.0,
    )
}

fn dyadic_lp_norm() -> CaseResult {
    for p in [1.0, 2.0, 7.0] {
        close("ones", t!(lp_norm(&ones(3), &ones(3), p)), 1.0, 1e-15)?;
    }
    close(
        "(1,3) p=1",
        t!(lp_norm(&sf(&[1.0, 3.0]), &ones(1), 1.0)),
        2.0,
        0.0,
    )?;
    close(
        "(1,3),(2,0) p=2",
        t!(lp_norm(&sf(&[1.0, 3.0]), &sf(&[2.0, 0.0]), 2.0)),
        1.0,
        1e-15,
    )
}

fn sparse_verify() -> CaseResult {
    let r = verify_sparse(&[Cube::ROOT, cube(1, 0)]);
    ensure(
        r.is_sparse && r.worst_fraction == 0.5,
        "{root,[0,1/2)} sparse with fraction 1/2",
    )?;
    let r = verify_sparse(&[Cube::ROOT, cube(1, 0), cube(1, 1)]);
    ensure(
        !r.is_sparse && r.worst_fraction == 1.0,
        "both halves not sparse",
    )?;
    let r = verify_sparse(&[Cube::ROOT, cube(2, 0), cube(2, 2)]);
    ensure(
        r.is_sparse && r.worst_fraction == 0.5,
        "two quarters sparse",
    )
}

fn sparse_exceptional() -> CaseResult {
    let e = exceptional_sets(&SparseFamily::root_only(3));
    ensure(e == BTreeMap::from([(Cube::ROOT, 1.0)]), "root alone")?;
    let e = exceptional_sets(&t!(SparseFamily::new(3, [Cube::ROOT, cube(1, 0)])));
    ensure(
        e == BTreeMap::from([(Cube::ROOT, 0.5), (cube(1, 0), 0.5)]),
        "root and left half",
    )?;
    let e = exceptional_sets(&t!(SparseFamily::new(
        3,
        [Cube::ROOT, cube(2, 0), cube(2, 2)]
    )));
    ensure(
        e == BTreeMap::from([(Cube::ROOT, 0.5), (cube(2, 0), 0.25), (cube(2, 2), 0.25)]),
        "root and two quarters",
    )
}

fn sparse_carleson_sum() -> CaseResult {
    let sigma = sf(&[1.0, 3.0]);
    close(
        "single",
        t!(carleson_sum(
            &SparseFamily::root_only(1),
            &sigma,
            Cube::ROOT
        )),
        2.0,
        0.0,
    )?;
    let k = 6;
    let chain = t!(SparseFamily::chain(8, k));
    let s = t!(carleson_sum(&chain, &ones(8), Cube::ROOT));
    close("chain", s, 2.0 - (-(k as f64)).exp2(), 1e-15)?;
    ensure(s <= 2.0 * t!(a_infty(&ones(8))).value, "chain within 2[1]")?;
    let fam = t!(SparseFamily::new(1, [Cube::ROOT, cube(1, 0)]));
    close(
        "two cubes",
        t!(carleson_sum(&fam, &sigma, Cube::ROOT)),
        2.5,
        0.0,
    )
}

fn sparse_generator() -> CaseResult {
    let none = Branching {
        min_count: 0,
        max_count: 0,
        ..Branching::default()
    };
    ensure(
        t!(random_sparse(3, 8, &none)) == SparseFamily::root_only(8),
        "zero count gives the root",
    )?;
    let chain = t!(random_sparse(5, 7, &Branching::fixed(1, 1)));
    ensure(
        chain.len() == 8,
        "gap 1 count 1 gives a chain of length L+1",
    )?;
    for seed in 0..20 {
        let f = t!(random_sparse(seed, 10, &Branching::default()));
        let cubes: Vec<Cube> = f.iter().collect();
        ensure(
            verify_sparse(&cubes).is_sparse,
            "generated family is sparse",
        )?;
    }
    Ok(())
}

fn weights_power() -> CaseResult {
    ensure(
        t!(power_weight(0.0, 6)).cells().iter().all(|&v| v == 1.0),
        "alpha 0",
    )?;
    let w = t!(power_weight(1.0, 1));
    close("alpha 1 left", w.cells()[0], 0.25, 1e-15)?;
    close("alpha 1 right", w.cells()[1], 0.75, 1e-15)?;
    close(
        "alpha -1/2 left",
        t!(power_weight(-0.5, 1)).cells()[0],
        2.0 * 2f64.sqrt(),
        1e-14,
    )
}

fn weights_a_p() -> CaseResult {
    close("ones", t!(a_p_constant(&ones(4), 2.0)).value, 1.0, 1e-15)?;
    close(
        "constant",
        t!(a_p_constant(&t!(StepFn::constant(4, 7.0)), 3.0)).value,
        1.0,
        1e-14,
    )?;
    let w = t!(power_weight(1.0, 8));
    let c = t!(a_p_constant(&w, 2.0));
    let pyr = w.pyramid();
    let inv = t!(w.powf(-1.0)).pyramid();
    let brute = all_cubes(8)
        .map(|q| pyr.average(q) * inv.average(q))
        .fold(0.0, f64::max);
    close("x at L=8", c.value, brute, 1e-12)?;
    ensure(
        c.cube.is_some_and(|q| q.index() == 0),
        "attained on a cube [0, 2^-j)",
    )
}

fn weights_a_infty() -> CaseResult {
    close("ones", t!(a_infty(&ones(5))).value, 1.0, 1e-15)?;
    close("(1,0)", t!(a_infty(&sf(&[1.0, 0.0]))).value, 1.5, 1e-15)?;
    close("(1,3)", t!(a_infty(&sf(&[1.0, 3.0]))).value, 1.25, 1e-15)
}

fn weights_a_vec_p() -> CaseResult {
    let e = t!(e2(&[2.0, 2.0], 1.0, 1.0));
    close(
        "ones",
        t!(a_vec_p(&ones(3), &[ones(3), ones(3)], &e)).value,
        1.0,
        1e-15,
    )?;
    let w = sf(&[1.0, 3.0]);
    close(
        "(1,3) L=1",
        t!(a_vec_p(&w, &[ones(1), ones(1)], &e)).value,
        3.0,
        1e-15,
    )?;
    let w = t!(power_weight(0.7, 6));
    let s = t!(power_weight(-0.4, 6));
    let e1 = t!(e2(&[3.0], 1.0, 1.0));
    close(
        "m=1 reduces to two-weight",
        t!(a_vec_p(&w, std::slice::from_ref(&s), &e1)).value,
        t!(two_weight_a_p(&w, &s, 3.0)).value,
        1e-12,
    )
}

fn weights_dual() -> CaseResult {
    let e = t!(e2(&[2.0, 2.0], 1.0, 1.0));
    let (d, w) = t!(dual_weights(&[ones(2), ones(2)], &e));
    ensure(
        d.iter().all(|x| x.cells().iter().all(|&v| v == 1.0)),
        "unit duals",
    )?;
    ensure(w.cells().iter().all(|&v| v == 1.0), "unit w")?;
    let s = sf(&[4.0, 1.0]);
    let (d, _) = t!(dual_weights(
        std::slice::from_ref(&s),
        &t!(e2(&[2.0], 1.0, 1.0))
    ));
    ensure(d[0].cells() == [0.25, 1.0], "m=1 dual")?;
    let (d, w) = t!(dual_weights(&[s.clone(), s], &e));
    ensure(
        d[0].cells() == [0.25, 1.0] && d[1].cells() == [0.25, 1.0],
        "m=2 duals",
    )?;
    close("w left", w.cells()[0], 0.25, 1e-15)?;
    close("w right", w.cells()[1], 1.0, 1e-15)
}

fn operators_sparse_op() -> CaseResult {
    for (p0, gamma) in [(1.0, 1.0), (2.0, 0.5), (3.0, 3.0)] {
        let spec = t!(SparseOperatorSpec::new(
            SparseFamily::root_only(3),
            p0,
            gamma,
            2
        ));
        let out = t!(sparse_op(&spec, &[ones(3), ones(3)]));
        ensure(
            out.cells().iter().all(|&v| (v - 1.0).abs() < 1e-15),
            "root family gives 1",
        )?;
    }
    let fam = t!(SparseFamily::new(1, [Cube::ROOT, cube(1, 0)]));
    let spec = t!(SparseOperatorSpec::new(fam, 1.0, 1.0, 2));
    ensure(
        t!(sparse_op(&spec, &[ones(1), ones(1)])).cells() == [2.0, 1.0],
        "gamma 1",
    )?;
    let spec = t!(spec.with_exponents(1.0, 2.0));
    let out = t!(sparse_op(&spec, &[ones(1), ones(1)]));
    close("gamma 2 left", out.cells()[0], 2f64.sqrt(), 1e-15)?;
    close("gamma 2 right", out.cells()[1], 1.0, 1e-15)
}

fn operators_rescale() -> CaseResult {
    let fam = t!(random_sparse(11, 8, &Branching::default()));
    let f = t!(FunctionSpec::Random {
        seed: 1,
        logrange: 2.0
    }
    .build(8));
    let g = t!(FunctionSpec::Random {
        seed: 2,
        logrange: 2.0
    }
    .build(8));
    let spec = t!(SparseOperatorSpec::new(fam.clone(), 1.0, 1.7, 2));
    ensure(
        t!(rescale_identity_check(&spec, &[f.clone(), g.clone()])) == 0.0,
        "p0 = 1 exact",
    )?;
    let c = t!(StepFn::constant(8, 1.3));
    let spec = t!(SparseOperatorSpec::new(
        SparseFamily::root_only(8),
        2.0,
        2.0,
        2
    ));
    let out = t!(sparse_op(&spec, &[c.clone(), c.clone()]));
    close("constants", out.cells()[0], 1.69, 1e-15)?;
    ensure(
        t!(rescale_identity_check(&spec, &[c.clone(), c])) <= 1e-15,
        "constant deviation",
    )?;
    let spec = t!(SparseOperatorSpec::new(fam, 2.0, 4.0, 2));
    ensure(
        t!(rescale_identity_check(&spec, &[f, g])) <= 1e-9,
        "random L=8 within 1e-9",
    )
}

fn operators_maximal() -> CaseResult {
    let a = t!(StepFn::constant(3, 2.0));
    let b = t!(StepFn::constant(3, 0.5));
    ensure(
        t!(multi_maximal(&[a, b], &[ones(3), ones(3)]))
            .cells()
            .iter()
            .all(|&v| v == 1.0),
        "constants",
    )?;
    ensure(
        t!(multi_maximal(&[sf(&[1.0, 3.0])], &[ones(1)])).cells() == [2.0, 3.0],
        "m=1",
    )?;
    ensure(
        t!(multi_maximal(
            &[sf(&[1.0, 3.0]), sf(&[3.0, 1.0])],
            &[ones(1), ones(1)]
        ))
        .cells()
            == [4.0, 4.0],
        "m=2",
    )
}

fn stopping_level_sets() -> CaseResult {
    let e = t!(e2(&[2.0, 2.0], 1.0, 1.0));
    let fam = t!(random_sparse(4, 6, &Branching::default()));
    let ls = t!(level_sets(&fam, &ones(6), &[ones(6), ones(6)], &e));
    ensure(
        ls.buckets.len() == 1 && ls.buckets.get(&-1).is_some_and(|b| b.len() == fam.len()),
        "unit weights all in bucket -1",
    )?;
    ensure(
        bucket_index(3.0) == 1 && bucket_index(1.0) == -1 && bucket_index(4.0) == 1,
        "bucket indices",
    )?;
    let s = sf(&[1.0, 0.0]);
    let fam = t!(SparseFamily::new(1, [Cube::ROOT, cube(1, 1)]));
    let ls = t!(level_sets(&fam, &ones(1), &[s, ones(1)], &e));
    ensure(
        ls.null.contains(cube(1, 1)),
        "vanishing sigma goes to the null bucket",
    )
}

fn stopping_principal() -> CaseResult {
    let base: BTreeSet<Cube> = all_cubes(4).collect();
    let f = ones(4).scale(3.0);
    let forest = t!(principal_cubes(&base, &f, &ones(4)));
    ensure(
        forest.len() == 1 && forest.roots() == [Cube::ROOT],
        "constant f gives F_0 only",
    )?;
    let base = BTreeSet::from([Cube::ROOT, cube(1, 0), cube(2, 0)]);
    let forest = t!(principal_cubes(
        &base,
        &sf(&[16.0, 1.0, 1.0, 1.0]),
        &ones(2)
    ));
    ensure(
        forest.cubes().collect::<Vec<_>>() == [Cube::ROOT, cube(2, 0)],
        "(16,1,1,1)",
    )?;
    let single = BTreeSet::from([cube(2, 1)]);
    let forest = t!(principal_cubes(
        &single,
        &sf(&[1.0, 5.0, 2.0, 1.0]),
        &ones(2)
    ));
    ensure(
        forest.cubes().collect::<Vec<_>>() == [cube(2, 1)],
        "single cube",
    )
}

fn stopping_projection() -> CaseResult {
    let base: BTreeSet<Cube> = all_cubes(3).collect();
    let forest = t!(principal_cubes(
        &base,
        &sf(&[64.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        &ones(3)
    ));
    for q in forest.cubes() {
        ensure(
            forest.project(q) == Some(q),
            "stopping cubes project to themselves",
        )?;
    }
    let flat = t!(principal_cubes(&base, &ones(3), &ones(3)));
    for q in all_cubes(3) {
        ensure(t!(pi_map(&[&flat], q)) == [Cube::ROOT], "root forest")?;
    }
    let base = BTreeSet::from([Cube::ROOT, cube(1, 0), cube(2, 0)]);
    let forest = t!(principal_cubes(
        &base,
        &sf(&[16.0, 1.0, 1.0, 1.0]),
        &ones(2)
    ));
    ensure(
        forest.project(cube(3, 0)) == Some(cube(2, 0)),
        "[0,1/8) projects to [0,1/4)",
    )
}

fn stopping_carleson_embedding() -> CaseResult {
    let base: BTreeSet<Cube> = all_cubes(4).collect();
    let forest = t!(principal_cubes(&base, &ones(4), &ones(4)));
    let r = t!(carleson_embedding_check(&forest, &ones(4), &ones(4), 2.0));
    close("unit", r, 1.0, 1e-15)?;
    close("bound at 2", carleson_embedding_bound(2.0), 8.0, 1e-15)?;
    let root = BTreeSet::from([Cube::ROOT]);
    let f = t!(FunctionSpec::Random {
        seed: 3,
        logrange: 2.0
    }
    .build(6));
    let s: StepFn = t!(power_weight(0.5, 6));
    let forest = t!(principal_cubes(&root, &f, &s));
    ensure(
        t!(carleson_embedding_check(&forest, &f, &s, 3.0)) <= 1.0 + 1e-12,
        "root-only forest <= 1",
    )?;
    let base: BTreeSet<Cube> = all_cubes(10).collect();
    for (seed, p) in [(1u64, 1.5), (2, 2.0), (3, 4.0)] {
        let f = t!(FunctionSpec::Random {
            seed,
            logrange: 3.0
        }
        .build(10));
        let s = t!(power_weight(-0.6, 10));
        let forest = t!(principal_cubes(&base, &f, &s));
        let r = t!(carleson_embedding_check(&forest, &f, &s, p));
        ensure(
            r <= carleson_embedding_bound(p),
            "random ratio within 2(p')^p",
        )?;
    }
    Ok(())
}

fn stopping_ls() -> CaseResult {
    let e = t!(e2(&[2.0, 3.0], 1.0, 1.0));
    let w = t!(power_weight(0.8, 5));
    let s1 = t!(power_weight(-0.3, 5));
    let s2 = t!(power_weight(0.4, 5));
    let q = cube(2, 1);
    let fam = t!(SparseFamily::new(5, [q]));
    let ls = t!(level_sets(&fam, &w, &[s1.clone(), s2.clone()], &e));
    let (&a, bucket) = ls.buckets.iter().next().ok_or("one bucket")?;
    let f1 = t!(principal_cubes(bucket.cubes(), &ones(5), &s1));
    let f2 = t!(principal_cubes(bucket.cubes(), &ones(5), &s2));
    let r = t!(ls_bound_check(bucket, &[&f1, &f2], &w, &[s1, s2], &e, a));
    let psi = ls.psi[&q];
    close(
        "single cube",
        r.max_ratio,
        (psi / (a as f64).exp2()).powf(1.0 / e.p()),
        1e-12,
    )?;
    ensure(
        r.max_ratio > 1.0 && r.max_ratio <= 2f64.powf(1.0 / e.p()) * (1.0 + 1e-12),
        "within (1, 2^(1/p)]",
    )?;

    let fam = t!(random_sparse(2, 6, &Branching::default()));
    let e = t!(e2(&[2.0, 2.0], 1.0, 1.0));
    let ls = t!(level_sets(&fam, &ones(6), &[ones(6), ones(6)], &e));
    let bucket = &ls.buckets[&-1];
    let f = t!(principal_cubes(bucket.cubes(), &ones(6), &ones(6)));
    let r = t!(ls_bound_check(
        bucket,
        &[&f, &f],
        &ones(6),
        &[ones(6), ones(6)],
        &e,
        -1
    ));
    ensure(
        r.max_ratio.is_finite() && r.fibers > 0,
        "unit weights give a finite ratio",
    )?;
    let empty = fam.subfamily(|_| false);
    let r = t!(ls_bound_check(
        &empty,
        &[&f, &f],
        &ones(6),
        &[ones(6), ones(6)],
        &e,
        -1
    ));
    ensure(r.fibers == 0, "empty bucket has no fibers")
}

fn unit_instance(l: u32, scale: f64) -> Result<TheoremInstance<f64>, String> {
    let e = e2(&[2.0, 2.0], 1.0, 1.0)?;
    let f = ones(l).scale(scale);
    TheoremInstance::new(
        SparseFamily::root_only(l),
        vec![f.clone(), f],
        vec![ones(l), ones(l)],
        ones(l),
        e,
    )
    .map_err(|e| e.to_string())
}

fn theorem_rhs_cases() -> CaseResult {
    close(
        "unit rhs",
        t!(theorem_rhs(&unit_instance(4, 1.0)?)),
        3.0,
        0.0,
    )?;
    let e = t!(e2(&[3.0, 3.0], 1.0, 2.0));
    let w = t!(power_weight(1.5, 5));
    let sig = vec![ones(5), ones(5)];
    let inst = t!(TheoremInstance::new(
        SparseFamily::root_only(5),
        sig.clone(),
        sig.clone(),
        w.clone(),
        e.clone()
    ));
    let a = t!(a_vec_p(&w, &sig, &e)).value;
    close(
        "p <= gamma drops [w]",
        t!(theorem_rhs(&inst)),
        a.powf(1.0 / e.p()) * 3.0,
        1e-12,
    )?;

    let e = t!(e2(&[2.0, 2.0], 1.0, 1.0));
    let s: StepFn = t!(power_weight(0.5, 6));
    let sig = vec![s.clone(), s.clone()];
    let inst = t!(TheoremInstance::with_dual_w(
        SparseFamily::root_only(6),
        sig.clone(),
        sig.clone(),
        e
    ));
    let w = s.map(|x| 1.0 / x);
    let pw = w.pyramid();
    let ps = s.pyramid();
    let avp = all_cubes(6)
        .map(|q| pw.average(q) * ps.average(q).powf(0.5) * ps.average(q).powf(0.5))
        .fold(0.0, f64::max);
    let ai = t!(a_infty(&s)).value;
    let aw = t!(a_infty(&w)).value;
    let straight = avp.powf(1.0) * (ai.sqrt() * ai.sqrt() + aw.powf(0.0) * 2.0 * ai.sqrt());
    close(
        "dual power weights",
        t!(theorem_rhs(&inst)),
        straight,
        1e-12,
    )
}

fn theorem_ratio_cases() -> CaseResult {
    close(
        "unit ratio",
        t!(theorem_ratio(&unit_instance(4, 1.0)?)),
        1.0 / 3.0,
        1e-15,
    )?;
    close(
        "scaled inputs",
        t!(theorem_ratio(&unit_instance(4, 3.7)?)),
        1.0 / 3.0,
        1e-14,
    )?;
    let e = t!(e2(&[2.0, 3.0], 1.0, 1.0));
    let fam = t!(random_sparse(8, 7, &Branching::default()));
    let s1 = t!(power_weight(-0.5, 7));
    let s2 = t!(power_weight(1.2, 7));
    let phi1 = t!(FunctionSpec::Random {
        seed: 5,
        logrange: 1.0
    }
    .build(7));
    let phi2 = t!(FunctionSpec::Indicator { k: 3 }.build(7));
    let (_, w) = t!(dual_weights(&[s1.clone(), s2.clone()], &e));
    let sigma_form = t!(theorem_ratio_sigma_form(
        fam.clone(),
        &[phi1.clone(), phi2.clone()],
        &[s1.clone(), s2.clone()],
        &w,
        &e
    ));
    let fs = vec![t!(phi1.mul(&s1)), t!(phi2.mul(&s2))];
    let inst = t!(TheoremInstance::new(fam, fs, vec![s1, s2], w, e));
    close("sigma form", sigma_form, t!(theorem_ratio(&inst)), 1e-9)
}

fn maximal_cases() -> CaseResult {
    let e = t!(e2(&[2.0, 2.0], 1.0, 1.0));
    let ev = t!(evaluate_maximal(
        &[ones(4), ones(4)],
        &[ones(4), ones(4)],
        &ones(4),
        &e
    ));
    close("unit lhs", ev.lhs, 1.0, 1e-15)?;
    close("unit rhs", ev.rhs, 1.0, 1e-15)?;
    let s = t!(power_weight(0.3, 6));
    let f = t!(FunctionSpec::Random {
        seed: 4,
        logrange: 1.0
    }
    .build(6));
    let (_, w) = t!(dual_weights(&[s.clone(), s.clone()], &e));
    let a = t!(evaluate_maximal(
        &[f.clone(), ones(6)],
        &[s.clone(), s.clone()],
        &w,
        &e
    ))
    .ratio;
    let b = t!(evaluate_maximal(
        &[f.scale(5.0), ones(6).scale(0.2)],
        &[s.clone(), s],
        &w,
        &e
    ))
    .ratio;
    close("scaling", a, b, 1e-12)
}

fn point_search_config() -> SearchConfig {
    SearchConfig {
        space: SearchSpace {
            resolution: 4,
            m: 2,
            p_grid: vec![2.0],
            p0_grid: vec![1.0],
            gamma_grid: vec![1.0],
            alpha_range: [0.0, 0.0],
            coupling: Coupling::Dual,
            beta_range: [0.0, 0.0],
            indicator_max_k: 0,
            indicator_probability: 0.0,
            branching: Branching::default(),
            family_seeds: 0,
        },
        restarts: 2,
        steps: 6,
        seed: 7,
        objective: Objective::Theorem,
        regime: None,
        step_size: 0.1,
    }
}

fn search_cases() -> CaseResult {
    let cfg = point_search_config();
    let r = t!(search(&cfg));
    let best = r.best.as_ref().ok_or("no best instance")?;
    close("single point", best.ratio, 1.0 / 3.0, 1e-15)?;
    ensure(t!(search(&cfg)) == r, "same seed, same result")?;
    let mut cfg = cfg;
    cfg.space.alpha_range = [-0.5, 1.0];
    cfg.space.family_seeds = 3;
    ensure(
        t!(search(&cfg)) == t!(search(&cfg)),
        "determinism with moving coordinates",
    )
}

fn trivial_suite() -> Vec<InstanceParams> {
    let one = FunctionSpec::Power { alpha: 0.0 };
    let unit = InstanceParams {
        family: FamilySpec::Root,
        functions: vec![one.clone(), one.clone()],
        sigmas: vec![one.clone(), one.clone()],
        w: one.clone(),
        exponents: ExponentTuple::new(vec![2.0, 2.0], 1.0, 1.0).expect("valid"),
    };
    let scaled = InstanceParams {
        functions: vec![
            FunctionSpec::Cells {
                values: vec![2.5; 16],
            },
            FunctionSpec::Cells {
                values: vec![0.5; 16],
            },
        ],
        ..unit.clone()
    };
    let dual = InstanceParams {
        w: FunctionSpec::Dual,
        ..unit.clone()
    };
    vec![unit, scaled, dual]
}

fn experiment_cases() -> CaseResult {
    let empty = t!(run_experiment(&ExperimentConfig {
        seed: 0,
        constants: None,
        suite: vec![],
    }));
    let csv = t!(to_csv(&empty));
    ensure(
        csv.lines().count() == 1 && csv.starts_with("trial,check,"),
        "empty suite gives header only",
    )?;
    let suite = vec![Check::TheoremRatio(RatioCheck {
        resolution: Some(4),
        instances: trivial_suite(),
        ..RatioCheck::default()
    })];
    let r = t!(run_experiment(&ExperimentConfig {
        seed: 0,
        constants: None,
        suite,
    }));
    ensure(r.rows.len() == 3, "three rows")?;
    for row in &r.rows {
        close("trivial ratio", row.ratio, 1.0 / 3.0, 1e-14)?;
    }
    ensure(r.all_pass(), "trivial rows pass")
}

fn cli_constants() -> CaseResult {
    let w = t!(power_weight(0.0, 6));
    close("A_2", t!(a_p_constant(&w, 2.0)).value, 1.0, 0.0)?;
    close("A_inf", t!(a_infty(&w)).value, 1.0, 0.0)?;
    close(
        "A_inf (1,3)",
        t!(a_infty(&sf(&[1.0, 3.0]))).value,
        1.25,
        1e-15,
    )
}

fn pilot_reproduction() -> CaseResult {
    let pilot: PilotConstants = t!(serde_json::from_str(EMBEDDED_PILOT));
    for (key, entry) in &pilot.theorem {
        let ev = t!(evaluate(
            &entry.instance,
            entry.resolution,
            Objective::Theorem
        ));
        close(key, ev.ratio, entry.ratio, 1e-12)?;
    }
    for (key, entry) in &pilot.maximal {
        let ev = t!(evaluate(
            &entry.instance,
            entry.resolution,
            Objective::Maximal
        ));
        close(key, ev.ratio, entry.ratio, 1e-12)?;
    }
    Ok(())
}

pub const CASES: &[Case] = &[
    Case {
        name: "dyadic/measure",
        run: dyadic_measure,
    },
    Case {
        name: "dyadic/integral",
        run: dyadic_integral,
    },
    Case {
        name: "dyadic/average",
        run: dyadic_average,
    },
    Case {
        name: "dyadic/weighted_average",
        run: dyadic_weighted_average,
    },
    Case {
        name: "dyadic/lp_norm",
        run: dyadic_lp_norm,
    },
    Case {
        name: "sparse/verify_sparse",
        run: sparse_verify,
    },
    Case {
        name: "sparse/exceptional_sets",
        run: sparse_exceptional,
    },
    Case {
        name: "sparse/carleson_sum",
        run: sparse_carleson_sum,
    },
    Case {
        name: "sparse/random_sparse",
        run: sparse_generator,
    },
    Case {
        name: "weights/power_weight",
        run: weights_power,
    },
    Case {
        name: "weights/a_p_constant",
        run: weights_a_p,
    },
    Case {
        name: "weights/a_infty",
        run: weights_a_infty,
    },
    Case {
        name: "weights/a_vec_p",
        run: weights_a_vec_p,
    },
    Case {
        name: "weights/dual_weights",
        run: weights_dual,
    },
    Case {
        name: "operators/sparse_op",
        run: operators_sparse_op,
    },
    Case {
        name: "operators/rescale_identity",
        run: operators_rescale,
    },
    Case {
        name: "operators/multi_maximal",
        run: operators_maximal,
    },
    Case {
        name: "stopping/level_sets",
        run: stopping_level_sets,
    },
    Case {
        name: "stopping/principal_cubes",
        run: stopping_principal,
    },
    Case {
        name: "stopping/projection",
        run: stopping_projection,
    },
    Case {
        name: "stopping/carleson_embedding",
        run: stopping_carleson_embedding,
    },
    Case {
        name: "stopping/ls_bound",
        run: stopping_ls,
    },
    Case {
        name: "verify/theorem_rhs",
        run: theorem_rhs_cases,
    },
    Case {
        name: "verify/theorem_ratio",
        run: theorem_ratio_cases,
    },
    Case {
        name: "verify/maximal_ratio",
        run: maximal_cases,
    },
    Case {
        name: "verify/extremizer_search",
        run: search_cases,
    },
    Case {
        name: "verify/run_experiment",
        run: experiment_cases,
    },
    Case {
        name: "verify/pilot_reproduction",
        run: pilot_reproduction,
    },
    Case {
        name: "cli/constants",
        run: cli_constants,
    },
];

pub fn run_cases(cases: &[Case]) -> Vec<Outcome> {
    cases
        .iter()
        .map(|c| {
            let res =
                std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".to_string()));
            Outcome {
                name: c.name,
                pass: res.is_ok(),
                detail: res.err().unwrap_or_default(),
            }
        })
        .collect()
}

pub fn run_all() -> Vec<Outcome> {
    run_cases(CASES)
}

/// Plain-text pass/fail table.
pub fn table(results: &[Outcome]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in results {
        let status = if r.pass { "pass" } else { "FAIL" };
        s.push_str(&format!("{:<width$}  {status}", r.name));
        if !r.pass {
            s.push_str(&format!("  {}", r.detail));
        }
        s.push('\n');
    }
    let passed = results.iter().filter(|r| r.pass).count();
    s.push_str(&format!("{passed}/{} passed\n", results.len()));
    s
}
