//! The color process: a uniform continuous-time walk on `{0, .., r-1}`,
//! colored local times and boundary terms of the combined process, and the
//! self-intersection driven sampler used by the white-noise formula.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::combinatorics::{uniform_matching, Jump, Matching};
use crate::error::{Error, Result};
use crate::paths::{Killing, LocalTimeField, PathSample};

/// Time span and starting color of one piece of a concatenated walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorSegment {
    pub start: f64,
    pub duration: f64,
    pub initial: usize,
}

/// A realization of the color walk over a concatenation of segments. Each
/// segment restarts at its own initial color.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JumpPath {
    pub colors: usize,
    pub segments: Vec<ColorSegment>,
    /// Jump times, sorted, in `[0, T)`.
    pub times: Vec<f64>,
    pub jumps: Vec<Jump>,
    /// Segment index of each jump.
    pub segment_of: Vec<usize>,
}

fn segments_from(spec: &[(f64, usize)]) -> Vec<ColorSegment> {
    let mut start = 0.0;
    spec.iter()
        .map(|&(duration, initial)| {
            let s = ColorSegment {
                start,
                duration,
                initial,
            };
            start += duration;
            s
        })
        .collect()
}

fn other_color<R: Rng + ?Sized>(r: usize, from: usize, rng: &mut R) -> usize {
    let k = rng.random_range(0..r - 1);
    if k >= from {
        k + 1
    } else {
        k
    }
}

/// Draws a Poisson variate; a zero mean gives zero.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
}

impl JumpPath {
    /// Samples the walk. `spec` lists `(t_k, i_k)`: duration and initial
    /// color of each segment.
    pub fn sample<R: Rng + ?Sized>(r: usize, spec: &[(f64, usize)], rng: &mut R) -> Self {
        let mut p = JumpPath::default();
        p.resample(r, spec, rng);
        p
    }

    /// Redraws in place, reusing buffers.
    pub fn resample<R: Rng + ?Sized>(&mut self, r: usize, spec: &[(f64, usize)], rng: &mut R) {
        assert!(r >= 1, "need at least one color");
        self.colors = r;
        self.segments = segments_from(spec);
        self.times.clear();
        self.segment_of.clear();
        for (k, seg) in self.segments.iter().enumerate() {
            let n = poisson((r - 1) as f64 * seg.duration, rng);
            let first = self.times.len();
            for _ in 0..n {
                self.times.push(seg.start + rng.random::<f64>() * seg.duration);
                self.segment_of.push(k);
            }
            self.times[first..].sort_unstable_by(f64::total_cmp);
        }
        self.assign_jumps(rng);
    }

    /// Builds a walk with the given (sorted) jump times and fresh uniform
    /// jump targets.
    pub fn with_times<R: Rng + ?Sized>(
        r: usize,
        spec: &[(f64, usize)],
        times: Vec<f64>,
        rng: &mut R,
    ) -> Self {
        let segments = segments_from(spec);
        let segment_of = times
            .iter()
            .map(|&t| {
                segments
                    .iter()
                    .rposition(|s| s.start <= t)
                    .unwrap_or(0)
            })
            .collect();
        let mut p = JumpPath {
            colors: r,
            segments,
            times,
            jumps: Vec::new(),
            segment_of,
        };
        p.assign_jumps(rng);
        p
    }

    fn assign_jumps<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.jumps.clear();
        let r = self.colors;
        let mut seg = usize::MAX;
        let mut color = 0;
        for &k in &self.segment_of {
            if k != seg {
                seg = k;
                color = self.segments[k].initial;
            }
            let to = other_color(r, color, rng);
            self.jumps.push(Jump::new(color, to));
            color = to;
        }
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    pub fn horizon(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.start + s.duration)
    }

    /// Color at the end (left limit) of each segment.
    pub fn final_colors(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.segments.iter().map(|s| s.initial).collect();
        for (j, &k) in self.jumps.iter().zip(&self.segment_of) {
            out[k] = j.to;
        }
        out
    }

    /// Whether each segment ends at its prescribed color.
    pub fn endpoint_indicator(&self, targets: &[usize]) -> bool {
        self.final_colors() == targets
    }

    /// Constant-color pieces `(from, to, color)` covering the horizon.
    pub fn color_intervals(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.segments.len() + self.times.len());
        let mut j = 0;
        for (k, seg) in self.segments.iter().enumerate() {
            let mut t = seg.start;
            let mut color = seg.initial;
            while j < self.times.len() && self.segment_of[j] == k {
                out.push((t, self.times[j], color));
                t = self.times[j];
                color = self.jumps[j].to;
                j += 1;
            }
            out.push((t, seg.start + seg.duration, color));
        }
        out
    }
}

/// Walks the steps of `path` alongside the color pieces of `u`, calling
/// `f(step_index, z, overlap, color)` for each nonempty overlap.
pub(crate) fn for_each_colored_piece(
    u: &JumpPath,
    path: &PathSample,
    mut f: impl FnMut(usize, &crate::paths::Step, f64, usize),
) {
    let pieces = u.color_intervals();
    let mut p = 0;
    for (idx, step) in path.steps().enumerate() {
        let (a, b) = (step.t0, step.t0 + step.dt);
        while p + 1 < pieces.len() && pieces[p].1 <= a {
            p += 1;
        }
        let mut q = p;
        loop {
            let (lo, hi, color) = pieces[q];
            let overlap = b.min(hi) - a.max(lo);
            if overlap > 0.0 {
                f(idx, &step, overlap, color);
            }
            if hi >= b || q + 1 >= pieces.len() {
                break;
            }
            q += 1;
        }
    }
}

/// Occupation local time of the path split by the color active at each
/// time. Summing the returned fields gives the uncolored local time.
pub fn colored_local_time(u: &JumpPath, path: &PathSample, h: f64) -> Vec<LocalTimeField> {
    let mut out = vec![LocalTimeField::empty(h); u.colors];
    for_each_colored_piece(u, path, |_, step, overlap, color| {
        let f = &mut out[color];
        f.add_time(f.bin_of(step.z), overlap);
    });
    out
}

/// Boundary weights per color: finite Robin weights, or `-∞` for Dirichlet.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryWeights {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundaryWeights {
    pub fn neumann(r: usize) -> Self {
        BoundaryWeights {
            lower: vec![0.0; r],
            upper: vec![0.0; r],
        }
    }

    pub fn dirichlet(r: usize) -> Self {
        BoundaryWeights {
            lower: vec![f64::NEG_INFINITY; r],
            upper: vec![f64::NEG_INFINITY; r],
        }
    }

    pub fn killing(&self, color: usize) -> Killing {
        Killing {
            lower: self.lower[color] == f64::NEG_INFINITY,
            upper: self.upper[color] == f64::NEG_INFINITY,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|&a| a == 0.0)
    }

    /// Whether every color carries the same weights.
    pub fn color_blind(&self) -> bool {
        self.lower.windows(2).all(|w| w[0] == w[1]) && self.upper.windows(2).all(|w| w[0] == w[1])
    }
}

/// The boundary functional of one path: the finite Robin part and the
/// probability that the path avoided every absorbing wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryTerm {
    pub robin: f64,
    pub survival: f64,
}

impl BoundaryTerm {
    pub const NONE: BoundaryTerm = BoundaryTerm {
        robin: 0.0,
        survival: 1.0,
    };

    /// The value on the extended real line; `-∞` when the path is absorbed.
    pub fn value(&self) -> f64 {
        if self.survival <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.robin + self.survival.ln()
        }
    }

    /// `exp(value)`, zero when absorbed.
    pub fn weight(&self) -> f64 {
        if self.survival <= 0.0 {
            0.0
        } else {
            self.survival * self.robin.exp()
        }
    }

    pub fn is_killed(&self) -> bool {
        self.survival <= 0.0
    }
}

/// Colored boundary functional `Σ_i ᾱ_i 𝔏^{(i,0)} + Σ_i β̄_i 𝔏^{(i,θ)}`.
///
/// Finite weights multiply the window estimate of boundary local time with
/// half-width `w √dt`. Dirichlet colors contribute the bridge survival
/// probability of each step spent (even partly) in that color.
pub fn boundary_term(
    u: &JumpPath,
    path: &PathSample,
    weights: &BoundaryWeights,
    w: f64,
) -> BoundaryTerm {
    let domain = path.domain;
    let lower = domain.wall_position(crate::paths::Wall::Lower);
    let upper = domain.wall_position(crate::paths::Wall::Upper);
    if lower.is_none() && upper.is_none() {
        return BoundaryTerm::NONE;
    }
    let mut robin = 0.0;
    let mut survival = 1.0;
    let mut last_step = usize::MAX;
    let mut kill = Killing::default();
    let mut pending: Option<crate::paths::Step> = None;
    let flush = |step: &crate::paths::Step, kill: Killing, survival: &mut f64| {
        if kill.any() && *survival > 0.0 {
            *survival *= domain.step_survival(step.free_start, step.free_end, step.dt, kill);
        }
    };
    for_each_colored_piece(u, path, |idx, step, overlap, color| {
        if idx != last_step {
            if let Some(prev) = pending.take() {
                flush(&prev, kill, &mut survival);
            }
            last_step = idx;
            kill = Killing::default();
            pending = Some(*step);
        }
        let k = weights.killing(color);
        kill.lower |= k.lower;
        kill.upper |= k.upper;
        let eps = w * step.dt.sqrt();
        if let Some(c) = lower {
            let a = weights.lower[color];
            if a.is_finite() && a != 0.0 && (step.z - c).abs() < eps {
                robin += a * overlap / (2.0 * eps);
            }
        }
        if let Some(c) = upper {
            let b = weights.upper[color];
            if b.is_finite() && b != 0.0 && (step.z - c).abs() < eps {
                robin += b * overlap / (2.0 * eps);
            }
        }
    });
    if let Some(prev) = pending {
        flush(&prev, kill, &mut survival);
    }
    BoundaryTerm { robin, survival }
}

/// Samples time pairs from the binned self-intersection measure of a
/// frozen path: a bin is chosen with probability `L(b)² h / ‖L‖²`, then two
/// times are drawn independently from the time the path spends in that bin.
#[derive(Clone, Debug)]
pub struct SelfIntersectionSampler {
    field: LocalTimeField,
    /// Cumulative `L(b)²` over stored bins.
    cdf: Vec<f64>,
    /// Step indices grouped by bin (indexed like the stored bins).
    bin_steps: Vec<Vec<u32>>,
    step_t0: Vec<f64>,
    step_dt: Vec<f64>,
    step_z: Vec<f64>,
    max_dt: f64,
}

impl SelfIntersectionSampler {
    pub fn new(path: &PathSample, h: f64) -> Result<Self> {
        let field = crate::paths::local_time(path, (0.0, path.total_time()), h)?;
        let n = field.masses().len();
        let mut bin_steps = vec![Vec::new(); n];
        let mut step_t0 = Vec::with_capacity(path.step_count());
        let mut step_dt = Vec::with_capacity(path.step_count());
        let mut step_z = Vec::with_capacity(path.step_count());
        let mut max_dt: f64 = 0.0;
        for (i, step) in path.steps().enumerate() {
            let b = (field.bin_of(step.z) - field.offset()) as usize;
            bin_steps[b].push(i as u32);
            step_t0.push(step.t0);
            step_dt.push(step.dt);
            step_z.push(step.z);
            max_dt = max_dt.max(step.dt);
        }
        let mut acc = 0.0;
        let cdf = field
            .masses()
            .iter()
            .map(|m| {
                acc += m * m;
                acc
            })
            .collect();
        Ok(SelfIntersectionSampler {
            field,
            cdf,
            bin_steps,
            step_t0,
            step_dt,
            step_z,
            max_dt,
        })
    }

    pub fn field(&self) -> &LocalTimeField {
        &self.field
    }

    pub fn norm_sq(&self) -> f64 {
        self.field.norm_sq()
    }

    /// Picks a bin (as a stored index) with probability proportional to
    /// `L(b)²`.
    pub fn sample_bin<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let total = *self.cdf.last().unwrap_or(&0.0);
        if !(total > 0.0) {
            return Err(Error::InvalidParameter {
                name: "local time",
                reason: "self-intersection measure of an empty field".into(),
            });
        }
        let u = rng.random::<f64>() * total;
        Ok(self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1))
    }

    /// A time spent in stored bin `b`, uniform with respect to occupation.
    pub fn time_in_bin<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> f64 {
        let steps = &self.bin_steps[b];
        loop {
            let s = steps[rng.random_range(0..steps.len())] as usize;
            let dt = self.step_dt[s];
            if dt >= self.max_dt || rng.random::<f64>() * self.max_dt < dt {
                return self.step_t0[s] + rng.random::<f64>() * dt;
            }
        }
    }

    /// Position (left grid value) of the step containing an occupation time
    /// returned by this sampler; used for structural checks.
    pub fn steps_in_bin(&self, b: usize) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.bin_steps[b]
            .iter()
            .map(|&s| (self.step_t0[s as usize], self.step_dt[s as usize], self.step_z[s as usize]))
    }

    /// Number of stored bins.
    pub fn bin_count(&self) -> usize {
        self.cdf.len()
    }

    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let b = self.sample_bin(rng)?;
        Ok((self.time_in_bin(b, rng), self.time_in_bin(b, rng)))
    }

    /// A time tuple whose pairs under `q` are drawn independently.
    pub fn sample_times<R: Rng + ?Sized>(&self, q: &Matching, rng: &mut R) -> Result<Vec<f64>> {
        let mut t = vec![0.0; q.n()];
        for &(a, b) in q.pairs() {
            let (s1, s2) = self.sample_pair(rng)?;
            t[a] = s1;
            t[b] = s2;
        }
        Ok(t)
    }
}

/// A walk driven by self-intersection times, together with the matching of
/// its sorted jump indices.
#[derive(Clone, Debug)]
pub struct SingularJumpPath {
    pub path: JumpPath,
    /// Matching of sorted jump indices.
    pub matching: Matching,
    /// Matching of the pre-sort tuple.
    pub pre_sort: Matching,
    /// `perm[i]` is the sorted position of pre-sort index `i`.
    pub perm: Vec<usize>,
}

/// Returned when the drawn jump count exceeds the matching cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Overflow {
    pub n: usize,
}

/// Sorts a time tuple and transports its matching to the sorted indices.
pub fn sort_matched_times(times: &[f64], q: &Matching) -> (Vec<f64>, Matching, Vec<usize>) {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut perm = vec![0; times.len()];
    for (pos, &i) in order.iter().enumerate() {
        perm[i] = pos;
    }
    let sorted = order.iter().map(|&i| times[i]).collect();
    (sorted, q.relabel(&perm), perm)
}

/// Draws the singular walk over the concatenated path whose binned
/// self-intersection sampler is `si`: `N̂/2 ~ Poisson((r-1)² ‖L‖² / 2)`.
pub fn sample_hat_u<R: Rng + ?Sized>(
    r: usize,
    si: &SelfIntersectionSampler,
    spec: &[(f64, usize)],
    n_max: usize,
    rng: &mut R,
) -> Result<std::result::Result<SingularJumpPath, Overflow>> {
    let rate = ((r - 1) * (r - 1)) as f64 * si.norm_sq() / 2.0;
    let half = poisson(rate, rng);
    let n = 2 * half;
    if n > n_max {
        return Ok(Err(Overflow { n }));
    }
    let q = uniform_matching(n, rng);
    let times = si.sample_times(&q, rng)?;
    let (sorted, p, perm) = sort_matched_times(&times, &q);
    let path = JumpPath::with_times(r, spec, sorted, rng);
    Ok(Ok(SingularJumpPath {
        path,
        matching: p,
        pre_sort: q,
        perm,
    }))
}
