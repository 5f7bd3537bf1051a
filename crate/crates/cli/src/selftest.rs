//! Fast invariant checks shipped with the binary.

use std::f64::consts::PI;

use rand::Rng;

use mvsao_core::combinatorics::{constant_c, enumerate_matchings, uniform_matching};
use mvsao_core::estimators::{poisson_product_identity, smooth_trace_moment};
use mvsao_core::jumps::BoundaryWeights;
use mvsao_core::oracle::{discretize, trace_semigroup};
use mvsao_core::paths::PathSample;
use mvsao_core::rng::stream;
use mvsao_core::*;

type Check = fn(usize) -> std::result::Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn embedding(_: usize) -> std::result::Result<(), String> {
    let mut rng = stream(1, 0);
    for _ in 0..1000 {
        let mut q = || FieldElement::quaternion(rng.random(), rng.random(), rng.random(), rng.random());
        let (x, y) = (q(), q());
        let lhs = (x * y).embed();
        let rhs = x.embed() * y.embed();
        for h in 0..2 {
            for l in 0..2 {
                ensure((lhs.entry(h, l) - rhs.entry(h, l)).norm() < 1e-12, || format!("{x} * {y}"))?;
            }
        }
    }
    Ok(())
}

fn jumps(list: &[(usize, usize)]) -> Vec<Jump> {
    list.iter().map(|&(a, b)| Jump::new(a - 1, b - 1)).collect()
}

fn pairing_constants(_: usize) -> std::result::Result<(), String> {
    for (n, count) in [(0, 1), (4, 3), (8, 105)] {
        let got = enumerate_matchings(n, 12).map_err(|e| e.to_string())?.len();
        ensure(got == count, || format!("{n} points: {got} matchings"))?;
    }
    let w1 = jumps(&[(1, 2), (2, 3), (3, 1), (1, 2), (2, 3), (3, 1)]);
    let p1 = Matching::from_one_based(6, &[(1, 4), (2, 5), (3, 6)]).map_err(|e| e.to_string())?;
    let w2 = jumps(&[(1, 2), (2, 1), (1, 3), (3, 1), (1, 2), (2, 1)]);
    let p2 = Matching::from_one_based(6, &[(1, 6), (2, 5), (3, 4)]).map_err(|e| e.to_string())?;
    let got = [
        constant_c(FieldKind::Real, &w1, &p1),
        constant_c(FieldKind::Complex, &w1, &p1),
        constant_c(FieldKind::Quaternion, &w1, &p1),
        constant_c(FieldKind::Real, &w2, &p2),
        constant_c(FieldKind::Complex, &w2, &p2),
    ];
    ensure(got == [1.0, 0.0, -0.5, 1.0, 1.0], || format!("figure constants {got:?}"))?;
    let mut rng = stream(2, 0);
    for _ in 0..2000 {
        let n = 2 * rng.random_range(1..=5);
        let j: Vec<Jump> = (0..n)
            .map(|_| {
                let a = rng.random_range(0..3);
                Jump::new(a, (a + rng.random_range(1..3)) % 3)
            })
            .collect();
        let p = uniform_matching(n, &mut rng);
        let c = constant_c(FieldKind::Quaternion, &j, &p);
        ensure(c.abs() <= 1.0, || format!("|C| = {c} for {j:?}"))?;
    }
    Ok(())
}

fn dirichlet_pi() -> Model {
    Model {
        domain: Domain::Interval { theta: PI },
        colors: 1,
        kind: FieldKind::Real,
        potential: Potential::Zero,
        boundary: BoundaryWeights::dirichlet(1),
        sigma2: 0.0,
        upsilon2: 0.0,
    }
}

fn series() -> f64 {
    (1..100).map(|k| (-((k * k) as f64) / 2.0).exp()).sum()
}

fn oracle_spectrum(_: usize) -> std::result::Result<(), String> {
    let eig = discretize(&dirichlet_pi(), (0.0, PI), None, 1000)
        .and_then(|op| op.eigenvalues())
        .map_err(|e| e.to_string())?;
    ensure((eig[0] - 0.5).abs() < 1e-4, || format!("lowest eigenvalue {}", eig[0]))?;
    let tr = trace_semigroup(&eig, 1.0);
    ensure((tr / series() - 1.0).abs() < 5e-3, || format!("trace {tr}"))
}

fn deterministic_trace(workers: usize) -> std::result::Result<(), String> {
    let spec = ExperimentSpec::new(dirichlet_pi(), vec![1.0], 5000);
    let a = smooth_trace_moment(&spec, Execution::new(3).with_workers(workers)).map_err(|e| e.to_string())?;
    let s = series();
    ensure((a.value - s).abs() < 3.0 * a.stderr + 0.02 * s, || format!("{} vs {s}", a.value))?;
    let b = smooth_trace_moment(&spec, Execution::new(3).with_workers(workers + 1)).map_err(|e| e.to_string())?;
    ensure(a == b, || "estimate depends on the worker count".into())
}

fn poisson_identity(workers: usize) -> std::result::Result<(), String> {
    let mut rng = stream(4, 0);
    let path = PathSample::bridge(Domain::interval(1.0).unwrap(), 0.2, 0.7, 1.0, 1e-3, &mut rng)
        .map_err(|e| e.to_string())?;
    let eta = |x: f64| 0.5 + x * x;
    let (est, exact) = poisson_product_identity(&path, 3, &eta, 50_000, Execution::new(5).with_workers(workers))
        .map_err(|e| e.to_string())?;
    ensure((est.value - exact).abs() < 4.0 * est.stderr, || format!("{} ± {} vs {exact}", est.value, est.stderr))
}

/// Runs every check, printing one line each; returns whether all passed.
pub fn selftest(workers: usize) -> bool {
    let checks: [(&str, Check); 5] = [
        ("quaternion embedding", embedding),
        ("pairing constants", pairing_constants),
        ("oracle spectrum", oracle_spectrum),
        ("deterministic trace", deterministic_trace),
        ("poisson identity", poisson_identity),
    ];
    let mut all = true;
    for (name, check) in checks {
        match check(workers) {
            Ok(()) => println!("selftest {name}: PASS"),
            Err(msg) => {
                all = false;
                println!("selftest {name}: FAIL ({msg})");
            }
        }
    }
    all
}
