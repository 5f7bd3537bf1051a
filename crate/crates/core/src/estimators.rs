//! Monte Carlo estimators built on the colored path representation: the
//! regular-noise kernel, smooth and white-noise trace moments, and trace
//! covariances.

use rand::Rng;

use crate::algebra::FieldElement;
use crate::combinatorics::{constant_c, uniform_matching, weighted_matching_sum, Matching};
use crate::error::{invalid, Result};
use crate::jumps::{
    boundary_term, colored_local_time, for_each_colored_piece, poisson, sample_hat_u, sort_matched_times,
    JumpPath, SelfIntersectionSampler,
};
use crate::model::{ExperimentSpec, Model};
use crate::noise::{bump_scaled, rho, SmoothNoise};
use crate::paths::{LocalTimeField, PathSample, Segment};
use crate::stats::{run_chunked, Accumulator, Execution, MomentEstimate};

/// Stratified starting points: sample `s` lands in cell `s mod G^n` of the
/// product grid, uniformly within the cell.
#[derive(Clone, Copy, Debug)]
pub struct StartGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub dim: usize,
}

impl StartGrid {
    pub fn new(range: (f64, f64), points: usize, dim: usize) -> Self {
        StartGrid {
            lo: range.0,
            hi: range.1,
            points: points.max(1),
            dim,
        }
    }

    /// Volume of the full box.
    pub fn volume(&self) -> f64 {
        (self.hi - self.lo).powi(self.dim as i32)
    }

    pub fn point<R: Rng + ?Sized>(&self, s: usize, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        let width = (self.hi - self.lo) / self.points as f64;
        let mut idx = s;
        for _ in 0..self.dim {
            let c = idx % self.points;
            idx /= self.points;
            let x = self.lo + (c as f64 + rng.random::<f64>()) * width;
            out.push(x.clamp(self.lo, self.hi));
        }
    }
}

/// All color tuples in `{0, .., r-1}^n`, first coordinate fastest.
pub fn color_tuples(r: usize, n: usize) -> Vec<Vec<usize>> {
    let total = r.pow(n as u32);
    (0..total)
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let c = k % r;
                    k /= r;
                    c
                })
                .collect()
        })
        .collect()
}

/// `∫ V(U(s), Z(s)) ds` with left-point path values.
pub fn potential_integral(model: &Model, u: &JumpPath, path: &PathSample) -> f64 {
    if model.potential.is_zero() {
        return 0.0;
    }
    let r = model.colors;
    if model.potential.color_blind() {
        return path.steps().map(|s| model.potential.value(0, r, s.z) * s.dt).sum();
    }
    let mut total = 0.0;
    for_each_colored_piece(u, path, |_, step, overlap, color| {
        total += model.potential.value(color, r, step.z) * overlap;
    });
    total
}

/// Colored local times, one group per segment or a single group.
fn colored_fields(u: &JumpPath, path: &PathSample, h: f64, per_segment: bool) -> Vec<Vec<LocalTimeField>> {
    if !per_segment {
        return vec![colored_local_time(u, path, h)];
    }
    let mut out = vec![vec![LocalTimeField::empty(h); u.colors]; path.segments.len()];
    for_each_colored_piece(u, path, |_, step, overlap, color| {
        let f = &mut out[step.segment][color];
        f.add_time(f.bin_of(step.z), overlap);
    });
    out
}

/// `∫∫ f(x) g(y) K(x - y) dx dy` with `K = ρ̄_{e1} ⋆ ρ̄_{e2}`; a zero scale
/// stands for a Dirac mass.
pub fn smoothed_inner(f: &LocalTimeField, g: &LocalTimeField, e1: f64, e2: f64) -> Result<f64> {
    if e1 == 0.0 && e2 == 0.0 {
        return f.inner_product(g);
    }
    let h = f.bin_width();
    if (h - g.bin_width()).abs() > 1e-15 * h {
        return f.inner_product(g);
    }
    let (kernel, support): (Box<dyn Fn(f64) -> f64>, f64) = if e1 > 0.0 && e2 > 0.0 {
        (Box::new(move |d| rho(e1, e2, d)), e1 + e2)
    } else {
        let e = e1.max(e2);
        (Box::new(move |d| bump_scaled(e, d)), e)
    };
    let reach = (support / h).ceil() as i64;
    let kv: Vec<f64> = (0..=reach).map(|k| kernel(k as f64 * h)).collect();
    let mut s = 0.0;
    for (b, fb) in f.bins() {
        for d in -reach..=reach {
            let gb = g.mass(b + d);
            if gb != 0.0 {
                s += fb * gb * kv[d.unsigned_abs() as usize];
            }
        }
    }
    Ok(s * h * h)
}

/// `σ²/2 Σ_i ‖Σ_k L_k^{(i)} ⋆ ρ̄_{ε_k}‖²`.
fn diagonal_exponent(sigma2: f64, groups: &[Vec<LocalTimeField>], eps: &[f64]) -> Result<f64> {
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let colors = groups[0].len();
    let mut total = 0.0;
    for i in 0..colors {
        for (k, gk) in groups.iter().enumerate() {
            for (l, gl) in groups.iter().enumerate().skip(k) {
                let v = smoothed_inner(&gk[i], &gl[i], eps[k], eps[l])?;
                total += if k == l { v } else { 2.0 * v };
            }
        }
    }
    Ok(sigma2 / 2.0 * total)
}

/// Bin width for mollified self-intersection terms: fine enough to resolve
/// the smallest positive scale.
fn smooth_bin_width(h: f64, eps: &[f64]) -> f64 {
    eps.iter()
        .copied()
        .filter(|&e| e > 0.0)
        .fold(h, |acc, e| acc.min(e / 8.0))
}

/// Path position just before time `s` on the step grid (left-point value).
fn left_value(path: &PathSample, s: f64) -> f64 {
    let seg = &path.segments[path.segment_at(s)];
    let j = (((s - seg.start) / seg.dt).floor().max(0.0) as usize).min(seg.steps() - 1);
    seg.values[j]
}

/// Pieces `(x_k, x_k, t_k)` of a concatenated loop.
fn loops(xs: &[f64], times: &[f64]) -> Vec<(f64, f64, f64)> {
    xs.iter().zip(times).map(|(&x, &t)| (x, x, t)).collect()
}

/// `Π_Z(t; x, x)` over all factors.
fn loop_density(path: &PathSample, xs: &[f64], times: &[f64]) -> f64 {
    xs.iter()
        .zip(times)
        .map(|(&x, &t)| path.domain.kernel(t, x, x))
        .product()
}

/// A kernel value with its componentwise standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelEstimate {
    pub value: FieldElement,
    pub stderr: [f64; 4],
    pub n_paths: u64,
    pub seed: u64,
}

impl KernelEstimate {
    /// Euclidean norm of the componentwise standard errors.
    pub fn stderr_norm(&self) -> f64 {
        self.stderr.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Feynman-Kac estimate of the semigroup kernel `K(t; (i,x), (j,y))` for
/// regular (mollified) noise, or for the deterministic operator when
/// `noise` is `None`.
pub fn fk_kernel_regular(
    model: &Model,
    noise: Option<&SmoothNoise>,
    t: f64,
    a: (usize, f64),
    b: (usize, f64),
    n_paths: usize,
    dt: f64,
    exec: Execution,
) -> Result<KernelEstimate> {
    model.validate()?;
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let r = model.colors;
    if a.0 >= r || b.0 >= r {
        return Err(invalid("color", "color index out of range"));
    }
    if let Some(nz) = noise {
        if nz.r != r || nz.kind != model.kind {
            return Err(invalid("noise", "noise shape does not match the model"));
        }
    }
    let kind = model.kind;
    let pi_z = model.domain.transition_density(t, a.1, b.1)?;
    let growth = ((r - 1) as f64 * t).exp();
    let accs = run_chunked_components(n_paths, exec, |rng, range, accs| {
        let mut path = PathSample {
            domain: model.domain,
            segments: Vec::new(),
        };
        let mut u = JumpPath::default();
        for _ in range {
            path.resample_bridges(&[(a.1, b.1, t)], dt, rng)?;
            u.resample(r, &[(t, a.0)], rng);
            let value = if u.endpoint_indicator(&[b.0]) {
                let bt = boundary_term(&u, &path, &model.boundary, 1.0);
                if bt.is_killed() {
                    FieldElement::zero(kind)
                } else {
                    let mut s_int = potential_integral(model, &u, &path);
                    let mut prod = FieldElement::one(kind);
                    if let Some(nz) = noise {
                        for_each_colored_piece(&u, &path, |_, step, overlap, color| {
                            s_int += nz.diag(color, step.z) * overlap;
                        });
                        for (k, j) in u.jumps.iter().enumerate() {
                            let z = path.value_at(u.times[k]);
                            prod = prod * nz.eval(j.from, j.to, z).scale(-1.0);
                        }
                    } else if u.jump_count() > 0 {
                        prod = FieldElement::zero(kind);
                    }
                    prod.scale(pi_z * growth * (-s_int).exp() * bt.weight())
                }
            } else {
                FieldElement::zero(kind)
            };
            let c = value.components();
            for (acc, v) in accs.iter_mut().zip(c) {
                acc.push(v);
            }
        }
        Ok(())
    })?;
    let mut comps = [0.0; 4];
    let mut se = [0.0; 4];
    for k in 0..4 {
        comps[k] = accs[k].mean;
        se[k] = accs[k].stderr();
    }
    Ok(KernelEstimate {
        value: FieldElement::from_components(kind, comps),
        stderr: se,
        n_paths: accs[0].n,
        seed: exec.seed,
    })
}

fn run_chunked_components<F>(n: usize, exec: Execution, body: F) -> Result<[Accumulator; 4]>
where
    F: Fn(&mut crate::rng::SimRng, std::ops::Range<usize>, &mut [Accumulator; 4]) -> Result<()> + Sync,
{
    // reuses the scalar driver for chunking and random streams
    let parts = std::sync::Mutex::new(Vec::<(usize, [Accumulator; 4])>::new());
    run_chunked(n, exec, |rng, range, _| {
        let start = range.start;
        let mut accs: [Accumulator; 4] = Default::default();
        body(rng, range, &mut accs)?;
        parts.lock().expect("poisoned").push((start, accs));
        Ok(())
    })?;
    let mut parts = parts.into_inner().expect("poisoned");
    parts.sort_by_key(|p| p.0);
    let mut total: [Accumulator; 4] = Default::default();
    for (_, accs) in &parts {
        for k in 0..4 {
            total[k].merge(&accs[k]);
        }
    }
    Ok(total)
}

/// Trace moment `E[∏_k Tr e^{-t_k Ĥ^{ε_k,ζ_k}}]` for mollified off-diagonal
/// noise (every `ζ_k > 0`); the diagonal noise is integrated out exactly.
pub fn smooth_trace_moment(spec: &ExperimentSpec, exec: Execution) -> Result<MomentEstimate> {
    spec.validate()?;
    let m = &spec.model;
    let noisy_off = m.upsilon2 > 0.0 && m.colors > 1;
    if noisy_off && spec.zeta.iter().any(|&z| !(z > 0.0)) {
        return Err(invalid("zeta", "off-diagonal scales must be positive"));
    }
    let n = spec.times.len();
    let r = m.colors;
    let dt = spec.dt();
    let h_s = smooth_bin_width(spec.h(), &spec.eps);
    let grid = StartGrid::new(spec.x_range()?, spec.quadrature_points(), n);
    let vol = grid.volume();
    let tuples = color_tuples(r, n);
    let growth = ((r - 1) as f64 * spec.total_time()).exp();
    let per_segment = spec.eps.windows(2).any(|w| w[0] != w[1]);
    let n_max = spec.disc.n_max;
    let window = spec.disc.boundary_window;

    let acc = run_chunked(spec.n_paths, exec, |rng, range, acc| {
        let mut xs = Vec::with_capacity(n);
        let mut path = PathSample {
            domain: m.domain,
            segments: Vec::new(),
        };
        let mut u = JumpPath::default();
        for s in range {
            grid.point(s, rng, &mut xs);
            path.resample_bridges(&loops(&xs, &spec.times), dt, rng)?;
            let pi_z = loop_density(&path, &xs, &spec.times);
            let mut total = 0.0;
            let mut discarded = false;
            for colors in &tuples {
                let seg: Vec<(f64, usize)> = spec.times.iter().copied().zip(colors.iter().copied()).collect();
                u.resample(r, &seg, rng);
                if !u.endpoint_indicator(colors) {
                    continue;
                }
                let nj = u.jump_count();
                if nj % 2 == 1 {
                    continue;
                }
                if nj > n_max {
                    discarded = true;
                    continue;
                }
                let matched = if nj == 0 {
                    1.0
                } else if !noisy_off {
                    0.0
                } else {
                    let zs: Vec<f64> = u.times.iter().map(|&t| path.value_at(t)).collect();
                    let zeta: Vec<f64> = u.segment_of.iter().map(|&k| spec.zeta[k]).collect();
                    let mut w = |p: usize, q: usize| m.upsilon2 * rho(zeta[p], zeta[q], zs[p] - zs[q]);
                    weighted_matching_sum(m.kind, &u.jumps, &mut w)
                };
                if matched == 0.0 {
                    continue;
                }
                let bt = boundary_term(&u, &path, &m.boundary, window);
                if bt.is_killed() {
                    continue;
                }
                let groups = colored_fields(&u, &path, h_s, per_segment);
                let eps: Vec<f64> = if per_segment { spec.eps.clone() } else { vec![spec.eps[0]] };
                let s_eps = diagonal_exponent(m.sigma2, &groups, &eps)?;
                let v_int = potential_integral(m, &u, &path);
                total += growth * matched * (s_eps - v_int).exp() * bt.weight();
            }
            acc.push(vol * pi_z * total);
            if discarded {
                acc.discarded += 1;
            }
        }
        Ok(())
    })?;
    Ok(finish_moment(&acc, exec.seed, n, m))
}

fn finish_moment(acc: &Accumulator, seed: u64, n: usize, m: &Model) -> MomentEstimate {
    let mut est = acc.finish(seed);
    if n == 1 && m.kind == crate::algebra::FieldKind::Real && est.value < 0.0 {
        est.warnings.push("negative single-trace estimate".into());
    }
    est
}

/// Weight `𝔐 e^{ℌ}` of one singular walk over a frozen path. `norm_sq` is
/// `‖L(Z)‖²` of the whole path.
fn white_weight(
    m: &Model,
    path: &PathSample,
    norm_sq: f64,
    u: &JumpPath,
    p: &Matching,
    h: f64,
    window: f64,
) -> Result<f64> {
    let n = u.jump_count();
    let c = if n == 0 { 1.0 } else { constant_c(m.kind, &u.jumps, p) };
    if c == 0.0 {
        return Ok(0.0);
    }
    let bt = boundary_term(u, path, &m.boundary, window);
    if bt.is_killed() {
        return Ok(0.0);
    }
    let r1 = (m.colors - 1) as f64;
    let col = colored_local_time(u, path, h);
    let col_sq: f64 = col.iter().map(LocalTimeField::norm_sq).sum();
    let exponent = r1 * r1 * norm_sq / 2.0 + m.sigma2 / 2.0 * col_sq - potential_integral(m, u, path);
    Ok(m.upsilon2.powf(n as f64 / 2.0) * c * exponent.exp() * bt.weight())
}

/// Trace moment `E[∏_k Tr e^{-t_k Ĥ}]` for white noise, through the
/// self-intersection driven walk.
pub fn whitenoise_trace_moment(spec: &ExperimentSpec, exec: Execution) -> Result<MomentEstimate> {
    spec.validate()?;
    let m = &spec.model;
    let n = spec.times.len();
    let r = m.colors;
    let dt = spec.dt();
    let h = spec.h();
    let grid = StartGrid::new(spec.x_range()?, spec.quadrature_points(), n);
    let vol = grid.volume();
    let tuples = color_tuples(r, n);
    let n_max = spec.disc.n_max;
    let window = spec.disc.boundary_window;

    let acc = run_chunked(spec.n_paths, exec, |rng, range, acc| {
        let mut xs = Vec::with_capacity(n);
        let mut path = PathSample {
            domain: m.domain,
            segments: Vec::new(),
        };
        for s in range {
            grid.point(s, rng, &mut xs);
            path.resample_bridges(&loops(&xs, &spec.times), dt, rng)?;
            let pi_z = loop_density(&path, &xs, &spec.times);
            let si = SelfIntersectionSampler::new(&path, h)?;
            let norm_sq = si.norm_sq();
            let mut total = 0.0;
            let mut discarded = false;
            for colors in &tuples {
                let seg: Vec<(f64, usize)> = spec.times.iter().copied().zip(colors.iter().copied()).collect();
                let sj = match sample_hat_u(r, &si, &seg, n_max, rng)? {
                    Ok(sj) => sj,
                    Err(_) => {
                        discarded = true;
                        continue;
                    }
                };
                if !sj.path.endpoint_indicator(colors) {
                    continue;
                }
                total += white_weight(m, &path, norm_sq, &sj.path, &sj.matching, h, window)?;
            }
            acc.push(vol * pi_z * total);
            if discarded {
                acc.discarded += 1;
            }
        }
        Ok(())
    })?;
    Ok(finish_moment(&acc, exec.seed, n, m))
}

/// How the covariance of two traces is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CovarianceMethod {
    /// One coupled estimator of `M₂ - M₁ M₁` sharing paths and pair draws.
    #[default]
    Coupled,
    /// Three independent estimates combined by the delta method.
    Independent,
}

/// `Cov[Tr e^{-t₁Ĥ}, Tr e^{-t₂Ĥ}]` for white noise. `spec.times` must hold
/// exactly `[t₁, t₂]`.
pub fn rigidity_covariance(
    spec: &ExperimentSpec,
    method: CovarianceMethod,
    exec: Execution,
) -> Result<MomentEstimate> {
    spec.validate()?;
    if spec.times.len() != 2 {
        return Err(invalid("t", "the covariance needs exactly two times"));
    }
    match method {
        CovarianceMethod::Coupled => coupled_covariance(spec, exec),
        CovarianceMethod::Independent => {
            let seeds = [
                crate::rng::derive_seed(exec.seed, 1),
                crate::rng::derive_seed(exec.seed, 2),
                crate::rng::derive_seed(exec.seed, 3),
            ];
            let m2 = whitenoise_trace_moment(spec, Execution { seed: seeds[0], ..exec })?;
            let single = |t: f64, seed: u64| {
                let mut s = spec.clone();
                s.times = vec![t];
                s.eps = vec![spec.eps[0]];
                s.zeta = vec![spec.zeta[0]];
                whitenoise_trace_moment(&s, Execution { seed, ..exec })
            };
            let a = single(spec.times[0], seeds[1])?;
            let b = single(spec.times[1], seeds[2])?;
            let mut warnings = m2.warnings.clone();
            warnings.extend(a.warnings.iter().cloned());
            warnings.extend(b.warnings.iter().cloned());
            Ok(MomentEstimate {
                value: m2.value - a.value * b.value,
                stderr: (m2.stderr.powi(2) + (b.value * a.stderr).powi(2) + (a.value * b.stderr).powi(2)).sqrt(),
                n_paths: m2.n_paths,
                n_discarded: m2.n_discarded + a.n_discarded + b.n_discarded,
                max_weight_share: m2.max_weight_share,
                seed: exec.seed,
                config_hash: None,
                warnings,
            })
        }
    }
}

/// Segment `k` of a concatenated path as a path of its own starting at 0.
fn sub_path(path: &PathSample, k: usize) -> PathSample {
    let seg = &path.segments[k];
    PathSample {
        domain: path.domain,
        segments: vec![Segment {
            start: 0.0,
            ..seg.clone()
        }],
    }
}

/// Pairs of self-intersection times drawn separately for each segment and
/// across the two segments.
struct PairDraw {
    /// Within-segment pairs of each segment, in local time.
    within: [Vec<(f64, f64)>; 2],
    /// Cross pairs `(s₁, s₂)` in local times of segments 1 and 2.
    cross: Vec<(f64, f64)>,
}

/// Builds the walk of one piece from its pairs.
fn walk_from_pairs<R: Rng + ?Sized>(
    r: usize,
    seg: &[(f64, usize)],
    pairs: &[(f64, f64)],
    rng: &mut R,
) -> (JumpPath, Matching) {
    let n = 2 * pairs.len();
    let q = uniform_matching(n, rng);
    let mut times = vec![0.0; n];
    for (&(a, b), &(s1, s2)) in q.pairs().iter().zip(pairs) {
        times[a] = s1;
        times[b] = s2;
    }
    let (sorted, p, _) = sort_matched_times(&times, &q);
    (JumpPath::with_times(r, seg, sorted, rng), p)
}

fn coupled_covariance(spec: &ExperimentSpec, exec: Execution) -> Result<MomentEstimate> {
    let m = &spec.model;
    let r = m.colors;
    let r1 = (r - 1) as f64;
    let (t1, t2) = (spec.times[0], spec.times[1]);
    let dt = spec.dt();
    let h = spec.h();
    let grid = StartGrid::new(spec.x_range()?, spec.quadrature_points(), 2);
    let vol = grid.volume();
    let n_max = spec.disc.n_max;
    let window = spec.disc.boundary_window;

    let acc = run_chunked(spec.n_paths, exec, |rng, range, acc| {
        let mut xs = Vec::with_capacity(2);
        let mut path = PathSample {
            domain: m.domain,
            segments: Vec::new(),
        };
        for s in range {
            grid.point(s, rng, &mut xs);
            path.resample_bridges(&loops(&xs, &spec.times), dt, rng)?;
            let pi_z = loop_density(&path, &xs, &spec.times);
            let parts = [sub_path(&path, 0), sub_path(&path, 1)];
            let si = [
                SelfIntersectionSampler::new(&parts[0], h)?,
                SelfIntersectionSampler::new(&parts[1], h)?,
            ];
            let n1 = si[0].norm_sq();
            let n2 = si[1].norm_sq();
            let cross_ip = si[0].field().inner_product(si[1].field())?;

            let half = [poisson(r1 * r1 * n1 / 2.0, rng), poisson(r1 * r1 * n2 / 2.0, rng)];
            let nc = poisson(r1 * r1 * cross_ip, rng);
            if 2 * (half[0] + half[1] + nc) > n_max {
                acc.push_discarded();
                continue;
            }
            let mut draw = PairDraw {
                within: [Vec::new(), Vec::new()],
                cross: Vec::new(),
            };
            for k in 0..2 {
                for _ in 0..half[k] {
                    draw.within[k].push(si[k].sample_pair(rng)?);
                }
            }
            for _ in 0..nc {
                draw.cross.push(cross_pair(&si[0], &si[1], cross_ip, rng)?);
            }

            let mut total = 0.0;
            for i1 in 0..r {
                for i2 in 0..r {
                    let mut f = [0.0; 2];
                    let mut walks = Vec::with_capacity(2);
                    for (k, (&t, &i)) in [t1, t2].iter().zip([i1, i2].iter()).enumerate() {
                        let (u, p) = walk_from_pairs(r, &[(t, i)], &draw.within[k], rng);
                        f[k] = if u.endpoint_indicator(&[i]) {
                            white_weight(m, &parts[k], [n1, n2][k], &u, &p, h, window)?
                        } else {
                            0.0
                        };
                        walks.push(u);
                    }
                    let product = f[0] * f[1];
                    let joint = if draw.cross.is_empty() {
                        if product == 0.0 {
                            0.0
                        } else {
                            let c1 = colored_local_time(&walks[0], &parts[0], h);
                            let c2 = colored_local_time(&walks[1], &parts[1], h);
                            let mut col = 0.0;
                            for (a, b) in c1.iter().zip(&c2) {
                                col += a.inner_product(b)?;
                            }
                            product * (r1 * r1 * cross_ip + m.sigma2 * col).exp()
                        }
                    } else {
                        let mut pairs: Vec<(f64, f64)> = draw.within[0].clone();
                        pairs.extend(draw.within[1].iter().map(|&(a, b)| (a + t1, b + t1)));
                        pairs.extend(draw.cross.iter().map(|&(a, b)| (a, b + t1)));
                        let (u, p) = walk_from_pairs(r, &[(t1, i1), (t2, i2)], &pairs, rng);
                        if u.endpoint_indicator(&[i1, i2]) {
                            white_weight(m, &path, n1 + n2 + 2.0 * cross_ip, &u, &p, h, window)?
                        } else {
                            0.0
                        }
                    };
                    total += joint - product;
                }
            }
            acc.push(vol * pi_z * total);
        }
        Ok(())
    })?;
    Ok(acc.finish(exec.seed))
}

/// A pair of times, one in each piece, at a common level: the bin is drawn
/// with probability proportional to `L₁(b) L₂(b)`.
fn cross_pair<R: Rng + ?Sized>(
    a: &SelfIntersectionSampler,
    b: &SelfIntersectionSampler,
    total: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let fa = a.field();
    let fb = b.field();
    let h = fa.bin_width();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (bin, ma) in fa.bins() {
        let mb = fb.mass(bin);
        if mb == 0.0 {
            continue;
        }
        last = Some(bin);
        let w = ma * mb * h;
        if u < w {
            break;
        }
        u -= w;
    }
    let bin = last.ok_or_else(|| invalid("local time", "pieces do not intersect"))?;
    let sa = a.time_in_bin((bin - fa.offset()) as usize, rng);
    let sb = b.time_in_bin((bin - fb.offset()) as usize, rng);
    Ok((sa, sb))
}

/// Empirical mean of `∏_{k ≤ N(t)} η(Z(τ_k))` over the jump times of the
/// color walk, against its closed form `exp((r-1)(∫η(Z) - t))`, on a frozen
/// path with left-point values.
pub fn poisson_product_identity(
    path: &PathSample,
    r: usize,
    eta: &(dyn Fn(f64) -> f64 + Sync),
    samples: usize,
    exec: Execution,
) -> Result<(MomentEstimate, f64)> {
    if r < 1 {
        return Err(invalid("r", "need at least one color"));
    }
    let t = path.total_time();
    let integral: f64 = path.steps().map(|s| eta(s.z) * s.dt).sum();
    let exact = ((r - 1) as f64 * (integral - t)).exp();
    let acc = run_chunked(samples, exec, |rng, range, acc| {
        let mut u = JumpPath::default();
        for _ in range {
            u.resample(r, &[(t, 0)], rng);
            let y: f64 = u.times.iter().map(|&s| eta(left_value(path, s))).product();
            acc.push(y);
        }
        Ok(())
    })?;
    Ok((acc.finish(exec.seed), exact))
}

/// Weighted least-squares line through `(ζ, estimate)` points, evaluated
/// at `ζ = 0`. Returns the intercept and its standard error.
pub fn extrapolate_to_zero(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(invalid("points", "need at least two scales"));
    }
    if points.iter().any(|p| !(p.2 > 0.0)) {
        return Err(invalid("points", "standard errors must be positive"));
    }
    let (mut s0, mut s1, mut s2, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, se) in points {
        let w = 1.0 / (se * se);
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det.abs() > 0.0) {
        return Err(invalid("points", "scales must differ"));
    }
    let intercept = (s2 * sy - s1 * sxy) / det;
    let var = s2 / det;
    Ok((intercept, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::Domain;

    #[test]
    fn tuples_enumerate_all() {
        let t = color_tuples(3, 2);
        assert_eq!(t.len(), 9);
        assert_eq!(t[1], vec![1, 0]);
    }

    #[test]
    fn start_grid_stays_inside_cells() {
        let g = StartGrid::new((0.0, 2.0), 4, 2);
        let mut rng = crate::rng::stream(3, 0);
        let mut xs = Vec::new();
        g.point(5, &mut rng, &mut xs);
        assert!(xs[0] >= 0.5 && xs[0] <= 1.0);
        assert!(xs[1] >= 0.5 && xs[1] <= 1.0);
        assert_eq!(g.volume(), 4.0);
    }

    #[test]
    fn exact_line_through_two_points() {
        let (a, se) = extrapolate_to_zero(&[(1.0, 3.0, 0.1), (2.0, 5.0, 0.1)]).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        assert!(se > 0.0);
    }

    #[test]
    fn dirac_form_is_inner_product() {
        let mut f = LocalTimeField::empty(0.1);
        f.add_time(3, 0.2);
        f.add_time(4, 0.1);
        let v = smoothed_inner(&f, &f, 0.0, 0.0).unwrap();
        assert!((v - f.norm_sq()).abs() < 1e-14);
        // a wide kernel sees the total mass squared times its central value
        let wide = smoothed_inner(&f, &f, 50.0, 50.0).unwrap();
        assert!((wide / (0.3f64.powi(2) * rho(50.0, 50.0, 0.0)) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_path_identity_is_exact() {
        let p = PathSample::constant(Domain::Line, 0.0, 1.0, 0.01);
        let (est, exact) = poisson_product_identity(&p, 3, &|_| 1.0, 10, Execution::new(1)).unwrap();
        assert_eq!(est.value, 1.0);
        assert!((exact - 1.0).abs() < 1e-12);
    }
}
