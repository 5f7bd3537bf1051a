//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use mvsao_core::combinatorics::{
    constant_c, count_flips, enumerate_matchings, respects, uniform_matching, weighted_matching_sum,
};
use mvsao_core::estimators::{
    extrapolate_to_zero, fk_kernel_regular, poisson_product_identity, rigidity_covariance,
    smooth_trace_moment, whitenoise_trace_moment, CovarianceMethod,
};
use mvsao_core::jumps::BoundaryWeights;
use mvsao_core::noise::{covariance_table, NoiseField, NoiseGrid};
use mvsao_core::oracle::{discretize, oracle_draw, oracle_noise_grid, trace_semigroup, NoiseInput};
use mvsao_core::paths::PathSample;
use mvsao_core::rng::stream;
use mvsao_core::stats::Accumulator;
use mvsao_core::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn exec(seed: u64) -> Execution {
    Execution::new(seed).with_workers(workers())
}

fn combined(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs() / (a.1 * a.1 + b.1 * b.1).sqrt()
}

fn laplacian_series(theta: f64, t: f64) -> f64 {
    // Dirichlet eigenvalues k²π² / (2θ²)
    (1..200)
        .map(|k| (-t * (k * k) as f64 * PI * PI / (2.0 * theta * theta)).exp())
        .sum()
}

fn interval_model(theta: f64, r: usize, sigma2: f64, upsilon2: f64, bc: BoundaryWeights) -> Model {
    Model {
        domain: Domain::interval(theta).unwrap(),
        colors: r,
        kind: FieldKind::Real,
        potential: Potential::Zero,
        boundary: bc,
        sigma2,
        upsilon2,
    }
}

fn criterion_1() -> Outcome {
    let series = laplacian_series(PI, 1.0);
    let model = interval_model(PI, 1, 0.0, 0.0, BoundaryWeights::dirichlet(1));
    let spec = ExperimentSpec::new(model.clone(), vec![1.0], 100_000);
    let mc = smooth_trace_moment(&spec, exec(101)).unwrap();
    let eig = discretize(&model, (0.0, PI), None, 2000).unwrap().eigenvalues().unwrap();
    let oracle = trace_semigroup(&eig, 1.0);
    let rel_mc = (mc.value / series - 1.0).abs();
    let rel_or = (oracle / series - 1.0).abs();
    Outcome {
        pass: rel_mc < 0.02 && rel_or < 0.02,
        detail: format!(
            "series {series:.6}, path estimate {:.5} ± {:.5} (rel {rel_mc:.4}), oracle {oracle:.6} (rel {rel_or:.2e})",
            mc.value, mc.stderr
        ),
    }
}

fn criterion_2() -> Outcome {
    let exact = 1.0 / (2.0 * PI).sqrt();
    let mut pass = true;
    let mut detail = Vec::new();
    for r in [1, 2] {
        let model = Model {
            domain: Domain::Line,
            colors: r,
            kind: FieldKind::Real,
            potential: Potential::Zero,
            boundary: BoundaryWeights::neumann(r),
            sigma2: 0.0,
            upsilon2: 0.0,
        };
        let k = fk_kernel_regular(&model, None, 1.0, (0, 0.0), (0, 0.0), 100_000, 1e-3, exec(202)).unwrap();
        let v = k.value.real_part();
        let se = k.stderr[0];
        let ok = (v - exact).abs() <= 3.0 * se + 1e-12;
        pass &= ok;
        detail.push(format!("r={r}: {v:.5} ± {se:.5}"));
    }
    Outcome {
        pass,
        detail: format!("target {exact:.5}; {}", detail.join(", ")),
    }
}

type PairCase = (FieldKind, Jump, Jump, ((u8, u8), (u8, u8)));

/// Empirical means and standard errors of the real part of products of two
/// mollified noise entries at `x` and `x + d`, one shared set of draws per
/// field kind.
fn empirical_pairs(kind: FieldKind, cases: &[PairCase], zeta: f64, eta: f64, d: f64, samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let x = 0.0;
    let grid = NoiseGrid::covering(-0.15, 0.2, zeta.min(eta) / 8.0).unwrap();
    let mut rng = stream(seed, 0);
    let mut acc = vec![Accumulator::default(); cases.len()];
    for _ in 0..samples {
        let f = NoiseField::sample(kind, 3, 1.0, 1.0, grid, &mut rng).unwrap();
        for (c, &(_, a, b, ((h1, l1), (h2, l2)))) in acc.iter_mut().zip(cases) {
            let u = f.mollified_eval(zeta, a.from, a.to, x).unwrap();
            let v = f.mollified_eval(eta, b.from, b.to, x + d).unwrap();
            let y = if kind == FieldKind::Quaternion {
                (u.embed().entry(h1 as usize, l1 as usize) * v.embed().entry(h2 as usize, l2 as usize)).re
            } else {
                (u * v).real_part()
            };
            c.push(y);
        }
    }
    acc.iter().map(|a| (a.mean, a.stderr())).collect()
}

fn criterion_3() -> Outcome {
    let (zeta, eta, d) = (0.1, 0.05, 0.03);
    let j = Jump::new(0, 1);
    let other = Jump::new(0, 2);
    let bits = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)];
    let samples = 100_000;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut total = 0;
    for (seed, kind) in [FieldKind::Real, FieldKind::Complex, FieldKind::Quaternion].into_iter().enumerate() {
        let mut cases: Vec<PairCase> = Vec::new();
        if kind == FieldKind::Quaternion {
            for b in [j, j.reversed(), other] {
                for s1 in bits {
                    for s2 in bits {
                        cases.push((kind, j, b, (s1, s2)));
                    }
                }
            }
        } else {
            for b in [j, j.reversed(), other] {
                cases.push((kind, j, b, ((0, 0), (0, 0))));
            }
        }
        let got = empirical_pairs(kind, &cases, zeta, eta, d, samples, 300 + seed as u64);
        for (&(kind, a, b, steps), &(m, se)) in cases.iter().zip(&got) {
            let expected = covariance_table(kind, a, b, steps, zeta, eta, d, 1.0);
            let z = (m - expected).abs() / se;
            worst = worst.max(z);
            total += 1;
            if z > 4.0 {
                pass = false;
                println!("  mismatch {kind:?} {a:?} {b:?} {steps:?}: {m:.4} ± {se:.4} vs {expected:.4}");
            }
        }
    }
    Outcome {
        pass,
        detail: format!("{total} entry pairs, {samples} noise draws per field, worst z {worst:.2}"),
    }
}

/// The quaternion constant straight from its definition: enumerate every
/// 0/1 sequence starting and ending at 0 and test each pair.
fn brute_force_d(jumps: &[Jump], pairs: &[(usize, usize)]) -> f64 {
    let n = jumps.len();
    let mut total = 0.0;
    for bits in 0..(1u32 << n.saturating_sub(1)) {
        let mut m = vec![0u8; n + 1];
        for k in 1..n {
            m[k] = ((bits >> (k - 1)) & 1) as u8;
        }
        let mut ok = true;
        let mut flips = 0;
        for &(a, b) in pairs {
            let s1 = (m[a], m[a + 1]);
            let s2 = (m[b], m[b + 1]);
            let same = jumps[a] == jumps[b];
            let rev = jumps[a] == jumps[b].reversed();
            let allowed = if same {
                matches!((s1, s2), ((0, 0), (1, 1)) | ((1, 1), (0, 0)) | ((0, 1), (1, 0)) | ((1, 0), (0, 1)))
            } else if rev {
                matches!((s1, s2), ((0, 0), (0, 0)) | ((1, 1), (1, 1)) | ((0, 1), (1, 0)) | ((1, 0), (0, 1)))
            } else {
                false
            };
            if !allowed {
                ok = false;
                break;
            }
            if same && s1.0 != s1.1 {
                flips += 1;
            }
        }
        if ok {
            total += if flips % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    total * 2f64.powi(-(n as i32) / 2)
}

fn brute_force_c(kind: FieldKind, jumps: &[Jump], pairs: &[(usize, usize)]) -> f64 {
    let related = |a: usize, b: usize, allow_same: bool| {
        (allow_same && jumps[a] == jumps[b]) || jumps[a] == jumps[b].reversed()
    };
    match kind {
        FieldKind::Real => pairs.iter().all(|&(a, b)| related(a, b, true)) as u8 as f64,
        FieldKind::Complex => pairs.iter().all(|&(a, b)| related(a, b, false)) as u8 as f64,
        FieldKind::Quaternion => {
            if pairs.iter().all(|&(a, b)| related(a, b, true)) {
                brute_force_d(jumps, pairs)
            } else {
                0.0
            }
        }
    }
}

fn one_based(list: &[(usize, usize)]) -> Vec<Jump> {
    list.iter().map(|&(a, b)| Jump::new(a, b)).collect()
}

fn random_walk_jumps<R: Rng>(n: usize, r: usize, rng: &mut R) -> Vec<Jump> {
    let mut c = rng.random_range(0..r);
    (0..n)
        .map(|_| {
            let mut next = rng.random_range(0..r - 1);
            if next >= c {
                next += 1;
            }
            let j = Jump::new(c, next);
            c = next;
            j
        })
        .collect()
}

fn gaussian_entry<R: Rng>(kind: FieldKind, rng: &mut R) -> FieldElement {
    let s = kind.component_scale();
    let mut c = [0.0; 4];
    for v in c.iter_mut().take(kind.dim()) {
        *v = s * rng.sample::<f64, _>(StandardNormal);
    }
    FieldElement::from_components(kind, c)
}

/// Monte Carlo value of the real part of the top-left entry of the
/// (embedded) product of unit-variance Gaussian entries along the jumps.
fn product_moment(kind: FieldKind, jumps: &[Jump], r: usize, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, 0);
    let mut acc = Accumulator::default();
    for _ in 0..samples {
        let mut upper = vec![vec![FieldElement::zero(kind); r]; r];
        for i in 0..r {
            for j in i + 1..r {
                upper[i][j] = gaussian_entry(kind, &mut rng);
            }
        }
        let entry = |j: &Jump| {
            if j.from < j.to {
                upper[j.from][j.to]
            } else {
                upper[j.to][j.from].conj()
            }
        };
        let mut prod = FieldElement::one(kind);
        for j in jumps {
            prod = prod * entry(j);
        }
        let y = match kind {
            FieldKind::Quaternion => prod.embed().entry(0, 0).re,
            _ => prod.real_part(),
        };
        acc.push(y);
    }
    (acc.mean, acc.stderr())
}

fn criterion_4() -> Outcome {
    let kinds = [FieldKind::Real, FieldKind::Complex, FieldKind::Quaternion];
    let mut notes = Vec::new();
    let mut pass = true;

    // figures
    let walk14 = one_based(&[(1, 2), (2, 3), (3, 1), (1, 2), (2, 3), (3, 1)]);
    let p14 = Matching::from_one_based(6, &[(1, 4), (2, 5), (3, 6)]).unwrap();
    let walk2 = one_based(&[(1, 2), (2, 1), (1, 3), (3, 1), (1, 2), (2, 1)]);
    let p2 = Matching::from_one_based(6, &[(1, 6), (2, 5), (3, 4)]).unwrap();
    let mut figures_ok = true;
    for (jumps, p) in [(&walk14, &p14), (&walk2, &p2)] {
        for kind in kinds {
            let c = constant_c(kind, jumps, p);
            let b = brute_force_c(kind, jumps, p.pairs());
            figures_ok &= (c - b).abs() < 1e-12;
        }
    }
    figures_ok &= constant_c(FieldKind::Real, &walk14, &p14) == 1.0;
    figures_ok &= constant_c(FieldKind::Complex, &walk14, &p14) == 0.0;
    figures_ok &= constant_c(FieldKind::Quaternion, &walk14, &p14) != 0.0;
    figures_ok &= constant_c(FieldKind::Complex, &walk2, &p2) == 1.0;

    let non = one_based(&[(1, 2), (2, 1), (1, 2), (2, 3), (3, 2), (2, 1)]);
    let pn = Matching::from_one_based(6, &[(1, 6), (2, 3), (4, 5)]).unwrap();
    figures_ok &= !respects(&BinarySequence(vec![0, 1, 1, 0, 0, 1, 0]), &pn, &non);
    let b1 = one_based(&[(1, 2), (2, 3), (3, 2), (1, 3), (3, 1), (1, 2)]);
    let m1 = BinarySequence(vec![0, 1, 1, 1, 1, 1, 0]);
    figures_ok &= respects(&m1, &pn, &b1) && count_flips(&m1, &pn, &b1) == 1;
    let b2 = one_based(&[(1, 2), (2, 3), (3, 1), (1, 3), (1, 2), (2, 3), (3, 1), (3, 1)]);
    let p8 = Matching::from_one_based(8, &[(1, 5), (2, 6), (3, 7), (4, 8)]).unwrap();
    let m2 = BinarySequence(vec![0, 1, 0, 0, 1, 0, 1, 1, 0]);
    figures_ok &= respects(&m2, &p8, &b2) && count_flips(&m2, &p8, &b2) == 2;
    pass &= figures_ok;
    notes.push(format!("figures {}", if figures_ok { "ok" } else { "MISMATCH" }));

    // bound and agreement with the definition over random instances
    let mut rng = stream(404, 0);
    let mut bound_ok = true;
    let mut agree_ok = true;
    for _ in 0..10_000 {
        let n = 2 * rng.random_range(1..=5);
        let r = rng.random_range(2..=3);
        let jumps = random_walk_jumps(n, r, &mut rng);
        let p = uniform_matching(n, &mut rng);
        for kind in kinds {
            let c = constant_c(kind, &jumps, &p);
            bound_ok &= c.abs() <= 1.0 + 1e-12;
            if n <= 6 {
                agree_ok &= (c - brute_force_c(kind, &jumps, p.pairs())).abs() < 1e-12;
            }
        }
    }
    pass &= bound_ok && agree_ok;
    notes.push(format!("|C| <= 1 {}, definition {}", ok(bound_ok), ok(agree_ok)));

    // tensorization over block matchings
    let mut tensor_ok = true;
    for _ in 0..1000 {
        let n1 = 2 * rng.random_range(1..=3);
        let n2 = 2 * rng.random_range(1..=3);
        let r = rng.random_range(2..=3);
        let j1 = random_walk_jumps(n1, r, &mut rng);
        let j2 = random_walk_jumps(n2, r, &mut rng);
        let p1 = uniform_matching(n1, &mut rng);
        let p2 = uniform_matching(n2, &mut rng);
        let mut jj = j1.clone();
        jj.extend_from_slice(&j2);
        let pp = p1.concat(&p2);
        for kind in kinds {
            let lhs = constant_c(kind, &jj, &pp);
            let rhs = constant_c(kind, &j1, &p1) * constant_c(kind, &j2, &p2);
            tensor_ok &= (lhs - rhs).abs() < 1e-12;
        }
    }
    pass &= tensor_ok;
    notes.push(format!("tensorization {}", ok(tensor_ok)));

    // Gaussian product moments against the matching sum
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [2, 4, 6] {
        for r in [2, 3] {
            for _ in 0..3 {
                let jumps = random_walk_jumps(n, r, &mut rng);
                for kind in kinds {
                    let exact = weighted_matching_sum(kind, &jumps, &mut |_, _| 1.0);
                    let check: f64 = enumerate_matchings(n, 12)
                        .unwrap()
                        .iter()
                        .map(|p| constant_c(kind, &jumps, p))
                        .sum();
                    let (m, se) = product_moment(kind, &jumps, r, 20_000, rng.random());
                    let z = if se > 0.0 { (m - exact).abs() / se } else { (m - exact).abs() * 1e12 };
                    worst = worst.max(z);
                    count += 1;
                    if z > 4.0 || (check - exact).abs() > 1e-12 {
                        pass = false;
                        println!("  moment mismatch {kind:?} {jumps:?}: {m:.4} ± {se:.4} vs {exact:.4}");
                    }
                }
            }
        }
    }
    notes.push(format!("{count} Gaussian moment checks, worst z {worst:.2}"));
    Outcome {
        pass,
        detail: notes.join("; "),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

/// Mean and standard error of `E[Tr]` and `E[Tr²]` over oracle draws.
fn oracle_moments(spec: &ExperimentSpec, n: usize, draws: usize, seed: u64) -> [(f64, f64); 2] {
    let mut rng = stream(seed, 0);
    let mut acc = [Accumulator::default(), Accumulator::default()];
    for _ in 0..draws {
        let (_, eig) = oracle_draw(spec, n, &mut rng).unwrap();
        let tr = trace_semigroup(&eig, spec.times[0]);
        acc[0].push(tr);
        acc[1].push(tr * tr);
    }
    [(acc[0].mean, acc[0].stderr()), (acc[1].mean, acc[1].stderr())]
}

fn criterion_5() -> Outcome {
    let model = interval_model(1.0, 2, 0.5, 0.5, BoundaryWeights::neumann(2));
    let spec = ExperimentSpec::new(model, vec![0.5], 100_000).with_scales(0.1, 0.1);
    let mc = smooth_trace_moment(&spec, exec(505)).unwrap();
    let [or, _] = oracle_moments(&spec, 201, 200, 506);
    let z = combined((mc.value, mc.stderr), or);
    Outcome {
        pass: z <= 3.0,
        detail: format!(
            "path estimate {:.4} ± {:.4}, oracle {:.4} ± {:.4} (200 draws), z {z:.2}",
            mc.value, mc.stderr, or.0, or.1
        ),
    }
}

fn criterion_6() -> Outcome {
    let model = interval_model(1.0, 2, 0.5, 0.5, BoundaryWeights::neumann(2));
    let one = ExperimentSpec::new(model.clone(), vec![0.5], 100_000);
    let two = ExperimentSpec::new(model.clone(), vec![0.5, 0.5], 20_000);
    let w1 = whitenoise_trace_moment(&one, exec(601)).unwrap();
    let w2 = whitenoise_trace_moment(&two, exec(602)).unwrap();
    let [o1, o2] = oracle_moments(&one, 201, 200, 603);
    let z1 = combined((w1.value, w1.stderr), o1);
    let z2 = combined((w2.value, w2.stderr), o2);
    let mut pts = Vec::new();
    for (k, zeta) in [0.1, 0.05, 0.025].into_iter().enumerate() {
        let s = one.clone().with_scales(0.0, zeta);
        let e = smooth_trace_moment(&s, exec(610 + k as u64)).unwrap();
        pts.push((zeta, e.value, e.stderr));
    }
    let (lim, lim_se) = extrapolate_to_zero(&pts).unwrap();
    let z3 = combined((w1.value, w1.stderr), (lim, lim_se));
    Outcome {
        pass: z1 <= 3.0 && z2 <= 3.0 && z3 <= 3.0,
        detail: format!(
            "n=1 {:.4} ± {:.4} vs oracle {:.4} ± {:.4} (z {z1:.2}); n=2 {:.3} ± {:.3} vs {:.3} ± {:.3} (z {z2:.2}); \
             zeta sweep {} -> {lim:.4} ± {lim_se:.4} (z {z3:.2})",
            w1.value,
            w1.stderr,
            o1.0,
            o1.1,
            w2.value,
            w2.stderr,
            o2.0,
            o2.1,
            pts.iter().map(|p| format!("{:.4}", p.1)).collect::<Vec<_>>().join("/"),
        ),
    }
}

fn criterion_7() -> Outcome {
    let model = interval_model(1.0, 2, 0.5, 0.5, BoundaryWeights::neumann(2));
    let t2s = [0.4, 0.2, 0.1, 0.05];
    let mut covs = Vec::new();
    for (k, &t2) in t2s.iter().enumerate() {
        let mut spec = ExperimentSpec::new(model.clone(), vec![0.5, t2], 60_000);
        spec.disc.dt = Some(2.5e-4);
        let c = rigidity_covariance(&spec, CovarianceMethod::Coupled, exec(700 + k as u64)).unwrap();
        covs.push((c.value, c.stderr));
    }
    let decreasing = covs.windows(2).all(|w| w[1].0.abs() < w[0].0.abs());
    // least-squares slope of log|Cov| against log t₂
    let xs: Vec<f64> = t2s.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = covs.iter().map(|c| c.0.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    Outcome {
        pass: decreasing && slope >= 0.15,
        detail: format!(
            "Cov(0.5, t2) for t2 = 0.4/0.2/0.1/0.05: {}; slope {slope:.3}",
            covs.iter().map(|c| format!("{:.4} ± {:.4}", c.0, c.1)).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn criterion_8() -> Outcome {
    let theta = 4.0;
    let n = 1601;
    let zeta = 0.1;
    let eps = [0.2, 0.1, 0.05, 0.025];
    let model = interval_model(theta, 2, 0.5, 0.5, BoundaryWeights::neumann(2));
    let grid = oracle_noise_grid((0.0, theta), n, &[0.2, 0.025]).unwrap();
    let mut rng = stream(4, 0);
    let field = NoiseField::sample(FieldKind::Real, 2, 0.5, 0.5, grid, &mut rng).unwrap();
    let bare = discretize(&model, (0.0, theta), None, n).unwrap().eigenvalues().unwrap();
    let mut spectra = Vec::new();
    for &e in &eps {
        let input = NoiseInput {
            field: &field,
            eps_diag: e,
            eps_off: zeta,
        };
        let ev = discretize(&model, (0.0, theta), Some(input), n).unwrap().eigenvalues().unwrap();
        spectra.push(ev[..20].to_vec());
    }
    let gaps: Vec<f64> = spectra
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let cauchy = gaps.windows(2).all(|g| g[1] <= g[0] / 2.0);

    // shift needed for (1 ± κ) λ_k(H) ± ν with κ = 1/2
    let kappa = 0.5;
    let shift = |ev: &[f64]| {
        ev.iter()
            .zip(&bare)
            .map(|(&l, &l0)| ((1.0 - kappa) * l0 - l).max(l - (1.0 + kappa) * l0))
            .fold(0.0, f64::max)
    };
    let coarse = shift(&spectra[0]).max(shift(&spectra[1]));
    let fine = shift(&spectra[2]).max(shift(&spectra[3]));
    let sandwich = fine <= 1.25 * coarse.max(1e-9);
    Outcome {
        pass: cauchy && sandwich,
        detail: format!(
            "sup gaps over k<=20: {}; shift nu coarse {coarse:.3}, fine {fine:.3}",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(" -> ")
        ),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = stream(909, 0);
    let path = PathSample::bridge(Domain::interval(1.0).unwrap(), 0.3, 0.6, 1.0, 1e-3, &mut rng).unwrap();
    let eta = |x: f64| 0.5 + x * x;
    let mut pass = true;
    let mut notes = Vec::new();
    for r in [2, 4] {
        let (est, exact) = poisson_product_identity(&path, r, &eta, 200_000, exec(910 + r as u64)).unwrap();
        let z = (est.value - exact).abs() / est.stderr;
        pass &= z <= 4.0;
        notes.push(format!("r={r}: {:.5} ± {:.5} vs {exact:.5} (z {z:.2})", est.value, est.stderr));
    }
    Outcome {
        pass,
        detail: notes.join(", "),
    }
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "deterministic trace anchor", criterion_1),
        (2, "heat kernel anchor", criterion_2),
        (3, "noise pair covariances", criterion_3),
        (4, "pairing constants", criterion_4),
        (5, "smooth noise cross-validation", criterion_5),
        (6, "white noise cross-validation", criterion_6),
        (7, "trace covariance decay", criterion_7),
        (8, "eigenvalue convergence and bounds", criterion_8),
        (9, "Poisson conditioning identity", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let status = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{status}] {name}: {} ({:.1}s)",
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
