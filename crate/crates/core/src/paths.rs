//! The spatial process: Brownian motion on the line, reflected on the half
//! line, or reflected on an interval. Bridges, concatenations, heat kernels,
//! occupation local times and boundary local times.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// Where the spatial process lives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    /// The whole real line.
    Line,
    /// `(0, ∞)` with reflection at 0.
    HalfLine,
    /// `(0, θ)` with reflection at both ends.
    Interval { theta: f64 },
}

/// One of the two possible boundary points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wall {
    Lower,
    Upper,
}

impl Domain {
    pub fn interval(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid("theta", format!("must be positive, got {theta}")));
        }
        Ok(Domain::Interval { theta })
    }

    /// The numeric case label: 1 line, 2 half line, 3 interval.
    pub fn case(&self) -> u8 {
        match self {
            Domain::Line => 1,
            Domain::HalfLine => 2,
            Domain::Interval { .. } => 3,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Domain::Line => x.is_finite(),
            Domain::HalfLine => x >= 0.0 && x.is_finite(),
            Domain::Interval { theta } => (0.0..=theta).contains(&x),
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x })
        }
    }

    /// The boundary point of a wall, if the domain has it.
    pub fn wall_position(&self, wall: Wall) -> Option<f64> {
        match (*self, wall) {
            (Domain::Line, _) => None,
            (Domain::HalfLine, Wall::Lower) => Some(0.0),
            (Domain::HalfLine, Wall::Upper) => None,
            (Domain::Interval { .. }, Wall::Lower) => Some(0.0),
            (Domain::Interval { theta }, Wall::Upper) => Some(theta),
        }
    }

    /// Maps a point of the free (unreflected) motion to the domain.
    #[inline]
    pub fn fold(&self, u: f64) -> f64 {
        match *self {
            Domain::Line => u,
            Domain::HalfLine => u.abs(),
            Domain::Interval { theta } => {
                let period = 2.0 * theta;
                let v = u.rem_euclid(period);
                if v > theta {
                    period - v
                } else {
                    v
                }
            }
        }
    }

    /// Transition density of the (reflected) motion.
    pub fn transition_density(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid("t", format!("must be positive, got {t}")));
        }
        Ok(self.kernel(t, x, y))
    }

    pub(crate) fn kernel(&self, t: f64, x: f64, y: f64) -> f64 {
        match *self {
            Domain::Line => gaussian(t, x - y),
            Domain::HalfLine => gaussian(t, x - y) + gaussian(t, x + y),
            Domain::Interval { theta } => {
                let k_max = image_count(t, theta);
                let mut s = 0.0;
                for k in -k_max..=k_max {
                    let shift = 2.0 * k as f64 * theta;
                    s += gaussian(t, x - y + shift) + gaussian(t, x + y + shift);
                }
                s
            }
        }
    }

    /// Candidate endpoints of the free motion that fold onto `y`, each
    /// weighted by the free kernel from `x`.
    fn preimages(&self, t: f64, x: f64, y: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        match *self {
            Domain::Line => out.push((y, 1.0)),
            Domain::HalfLine => {
                out.push((y, gauss_weight(t, x - y)));
                if y > 0.0 {
                    out.push((-y, gauss_weight(t, x + y)));
                }
            }
            Domain::Interval { theta } => {
                let k_max = image_count(t, theta);
                for k in -k_max..=k_max {
                    let shift = 2.0 * k as f64 * theta;
                    for cand in [shift + y, shift - y] {
                        let w = gauss_weight(t, x - cand);
                        if w > 0.0 {
                            out.push((cand, w));
                        }
                    }
                }
            }
        }
    }

    /// Probability that a Brownian bridge of the free motion between `a` and
    /// `b` over time `dt` avoids every image of the killing walls.
    pub fn step_survival(&self, a: f64, b: f64, dt: f64, kill: Killing) -> f64 {
        let (offset, period) = match (*self, kill.lower, kill.upper) {
            (_, false, false) | (Domain::Line, _, _) => return 1.0,
            (Domain::HalfLine, true, _) => (0.0, f64::INFINITY),
            (Domain::HalfLine, false, true) => return 1.0,
            (Domain::Interval { theta }, true, true) => (0.0, theta),
            (Domain::Interval { theta }, true, false) => (0.0, 2.0 * theta),
            (Domain::Interval { theta }, false, true) => (theta, 2.0 * theta),
        };
        let (lo_end, hi_end) = if a < b { (a, b) } else { (b, a) };
        let (below, above) = if period.is_infinite() {
            if lo_end <= offset && offset <= hi_end {
                return 0.0;
            }
            if hi_end < offset {
                (f64::NEG_INFINITY, offset)
            } else {
                (offset, f64::INFINITY)
            }
        } else {
            let below = offset + ((lo_end - offset) / period).floor() * period;
            let above = below + period;
            if below >= lo_end || above <= hi_end {
                return 0.0;
            }
            (below, above)
        };
        let mut s = 1.0;
        if below.is_finite() {
            s *= 1.0 - hit_probability(a - below, b - below, dt);
        }
        if above.is_finite() {
            s *= 1.0 - hit_probability(above - a, above - b, dt);
        }
        s
    }
}

/// Which walls absorb the path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Killing {
    pub lower: bool,
    pub upper: bool,
}

impl Killing {
    pub fn any(&self) -> bool {
        self.lower || self.upper
    }
}

#[inline]
fn hit_probability(d1: f64, d2: f64, dt: f64) -> f64 {
    let e = 2.0 * d1 * d2 / dt;
    if e > 50.0 {
        0.0
    } else {
        (-e).exp()
    }
}

#[inline]
pub(crate) fn gaussian(t: f64, d: f64) -> f64 {
    (-d * d / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
}

#[inline]
fn gauss_weight(t: f64, d: f64) -> f64 {
    (-d * d / (2.0 * t)).exp()
}

/// Number of image shifts on each side so that omitted terms are below
/// 1e-14 of the kernel peak.
fn image_count(t: f64, theta: f64) -> i64 {
    (8.0 * t.sqrt() / (2.0 * theta)).ceil() as i64 + 1
}

/// One bridge (or free) piece of a path with a uniform step.
#[derive(Clone, Debug)]
pub struct Segment {
    pub start: f64,
    pub duration: f64,
    pub dt: f64,
    /// Free-motion positions at the grid times, before folding.
    pub free: Vec<f64>,
    /// Positions in the domain.
    pub values: Vec<f64>,
}

impl Segment {
    pub fn steps(&self) -> usize {
        self.free.len() - 1
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// A time-gridded path, possibly a concatenation of independent segments.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub domain: Domain,
    pub segments: Vec<Segment>,
}

/// One time step of a path: `[t0, t0 + dt)` spent at `z`.
#[derive(Clone, Copy, Debug)]
pub struct Step {
    pub segment: usize,
    pub t0: f64,
    pub dt: f64,
    pub z: f64,
    pub free_start: f64,
    pub free_end: f64,
}

/// Number of grid steps and actual step size for a segment of length `t`.
pub fn step_count(t: f64, dt: f64) -> (usize, f64) {
    let n = ((t / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, t / n as f64)
}

fn fill_free_bridge<R: Rng + ?Sized>(
    out: &mut Vec<f64>,
    x: f64,
    y: f64,
    n: usize,
    dt: f64,
    rng: &mut R,
) {
    out.clear();
    out.reserve(n + 1);
    let sd = dt.sqrt();
    let mut w = 0.0;
    out.push(0.0);
    for _ in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        w += sd * g;
        out.push(w);
    }
    let drift = w - (y - x);
    let inv = 1.0 / n as f64;
    for (j, v) in out.iter_mut().enumerate() {
        *v = x + *v - (j as f64 * inv) * drift;
    }
    out[n] = y;
}

fn fill_free_motion<R: Rng + ?Sized>(out: &mut Vec<f64>, x: f64, n: usize, dt: f64, rng: &mut R) {
    out.clear();
    out.reserve(n + 1);
    let sd = dt.sqrt();
    let mut w = x;
    out.push(w);
    for _ in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        w += sd * g;
        out.push(w);
    }
}

fn pick_weighted<R: Rng + ?Sized>(cands: &[(f64, f64)], rng: &mut R) -> f64 {
    let total: f64 = cands.iter().map(|c| c.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(v, w) in cands {
        if u < w {
            return v;
        }
        u -= w;
    }
    cands.last().expect("at least one preimage").0
}

impl PathSample {
    /// A bridge from `x` to `y` over time `t`, conditioned on the folded
    /// endpoint. The free endpoint is drawn among the preimages of `y` with
    /// their kernel weights, which makes the folded bridge exact at the grid
    /// times.
    pub fn bridge<R: Rng + ?Sized>(
        domain: Domain,
        x: f64,
        y: f64,
        t: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::concatenated_bridges(domain, &[(x, y, t)], dt, rng)
    }

    /// Independent bridges `(x_k -> y_k, t_k)` laid end to end in time.
    pub fn concatenated_bridges<R: Rng + ?Sized>(
        domain: Domain,
        pieces: &[(f64, f64, f64)],
        dt: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut path = PathSample {
            domain,
            segments: Vec::with_capacity(pieces.len()),
        };
        path.resample_bridges(pieces, dt, rng)?;
        Ok(path)
    }

    /// Redraws the path in place, reusing its buffers.
    pub fn resample_bridges<R: Rng + ?Sized>(
        &mut self,
        pieces: &[(f64, f64, f64)],
        dt: f64,
        rng: &mut R,
    ) -> Result<()> {
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let domain = self.domain;
        self.segments.truncate(pieces.len());
        let mut start = 0.0;
        let mut cands = Vec::new();
        for (k, &(x, y, t)) in pieces.iter().enumerate() {
            domain.check(x)?;
            domain.check(y)?;
            if !(t > 0.0) || dt > t * (1.0 + 1e-12) {
                return Err(invalid("t", format!("need 0 < dt <= t, got dt={dt}, t={t}")));
            }
            let (n, step) = step_count(t, dt);
            domain.preimages(t, x, y, &mut cands);
            let target = pick_weighted(&cands, rng);
            if self.segments.len() <= k {
                self.segments.push(Segment {
                    start,
                    duration: t,
                    dt: step,
                    free: Vec::new(),
                    values: Vec::new(),
                });
            }
            let seg = &mut self.segments[k];
            seg.start = start;
            seg.duration = t;
            seg.dt = step;
            fill_free_bridge(&mut seg.free, x, target, n, step, rng);
            seg.values.clear();
            seg.values.extend(seg.free.iter().map(|&u| domain.fold(u)));
            let last = seg.values.len() - 1;
            seg.values[last] = y;
            start += t;
        }
        Ok(())
    }

    /// An unconditioned path started at `x`.
    pub fn free_motion<R: Rng + ?Sized>(
        domain: Domain,
        x: f64,
        t: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<Self> {
        domain.check(x)?;
        if !(t > 0.0 && dt > 0.0 && dt <= t * (1.0 + 1e-12)) {
            return Err(invalid("t", format!("need 0 < dt <= t, got dt={dt}, t={t}")));
        }
        let (n, step) = step_count(t, dt);
        let mut free = Vec::new();
        fill_free_motion(&mut free, x, n, step, rng);
        let values = free.iter().map(|&u| domain.fold(u)).collect();
        Ok(PathSample {
            domain,
            segments: vec![Segment {
                start: 0.0,
                duration: t,
                dt: step,
                free,
                values,
            }],
        })
    }

    /// A path that stays at `x` (useful for tests and degenerate checks).
    pub fn constant(domain: Domain, x: f64, t: f64, dt: f64) -> Self {
        let (n, step) = step_count(t, dt);
        PathSample {
            domain,
            segments: vec![Segment {
                start: 0.0,
                duration: t,
                dt: step,
                free: vec![x; n + 1],
                values: vec![x; n + 1],
            }],
        }
    }

    pub fn total_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end())
    }

    pub fn step_count(&self) -> usize {
        self.segments.iter().map(Segment::steps).sum()
    }

    /// Iterates over all time steps in order.
    pub fn steps(&self) -> impl Iterator<Item = Step> + '_ {
        self.segments.iter().enumerate().flat_map(|(k, seg)| {
            (0..seg.steps()).map(move |j| Step {
                segment: k,
                t0: seg.start + j as f64 * seg.dt,
                dt: seg.dt,
                z: seg.values[j],
                free_start: seg.free[j],
                free_end: seg.free[j + 1],
            })
        })
    }

    /// Index of the segment containing time `s` (right-continuous at
    /// segment boundaries).
    pub fn segment_at(&self, s: f64) -> usize {
        let mut k = 0;
        while k + 1 < self.segments.len() && self.segments[k + 1].start <= s {
            k += 1;
        }
        k
    }

    /// The path position at time `s`, interpolating the free motion linearly
    /// between grid times.
    pub fn value_at(&self, s: f64) -> f64 {
        let seg = &self.segments[self.segment_at(s)];
        let local = ((s - seg.start) / seg.dt).max(0.0);
        let n = seg.steps();
        let j = (local.floor() as usize).min(n - 1);
        let frac = (local - j as f64).min(1.0);
        let u = seg.free[j] + frac * (seg.free[j + 1] - seg.free[j]);
        self.domain.fold(u)
    }
}

/// Occupation density of a path on a grid of bins `[b h, (b+1) h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeField {
    h: f64,
    offset: i64,
    mass: Vec<f64>,
}

impl LocalTimeField {
    pub fn empty(h: f64) -> Self {
        LocalTimeField {
            h,
            offset: 0,
            mass: Vec::new(),
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn bin_of(&self, x: f64) -> i64 {
        (x / self.h).floor() as i64
    }

    pub fn bin_center(&self, b: i64) -> f64 {
        (b as f64 + 0.5) * self.h
    }

    pub fn is_empty(&self) -> bool {
        self.mass.iter().all(|&m| m == 0.0)
    }

    /// First stored bin index.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Stored masses, starting at bin [`offset`](Self::offset).
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass(&self, b: i64) -> f64 {
        let i = b - self.offset;
        if i < 0 {
            0.0
        } else {
            self.mass.get(i as usize).copied().unwrap_or(0.0)
        }
    }

    /// Nonzero bins as `(index, mass)`.
    pub fn bins(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(move |(i, &m)| (i as i64 + self.offset, m))
    }

    /// Makes room for bins `lo..=hi`.
    pub fn reserve_range(&mut self, lo: i64, hi: i64) {
        if self.mass.is_empty() {
            self.offset = lo;
            self.mass = vec![0.0; (hi - lo + 1) as usize];
            return;
        }
        let cur_hi = self.offset + self.mass.len() as i64 - 1;
        if lo < self.offset {
            let extra = (self.offset - lo) as usize;
            let mut m = vec![0.0; extra];
            m.extend_from_slice(&self.mass);
            self.mass = m;
            self.offset = lo;
        }
        if hi > cur_hi {
            self.mass.resize((hi - self.offset + 1) as usize, 0.0);
        }
    }

    /// Adds occupation `time` to bin `b`.
    #[inline]
    pub fn add_time(&mut self, b: i64, time: f64) {
        if b < self.offset || b >= self.offset + self.mass.len() as i64 {
            self.reserve_range(b, b);
        }
        self.mass[(b - self.offset) as usize] += time / self.h;
    }

    pub fn clear(&mut self) {
        self.mass.iter_mut().for_each(|m| *m = 0.0);
    }

    /// `∫ L dx`, the occupied time.
    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() * self.h
    }

    pub fn norm_sq(&self) -> f64 {
        self.mass.iter().map(|m| m * m).sum::<f64>() * self.h
    }

    fn check_aligned(&self, other: &Self) -> Result<()> {
        if (self.h - other.h).abs() > 1e-15 * self.h.abs().max(other.h.abs()) {
            return Err(Error::GridMismatch {
                left: self.h,
                right: other.h,
            });
        }
        Ok(())
    }

    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.check_aligned(other)?;
        let lo = self.offset.max(other.offset);
        let hi = (self.offset + self.mass.len() as i64).min(other.offset + other.mass.len() as i64);
        let mut s = 0.0;
        for b in lo..hi {
            s += self.mass[(b - self.offset) as usize] * other.mass[(b - other.offset) as usize];
        }
        Ok(s * self.h)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_aligned(other)?;
        if other.mass.is_empty() {
            return Ok(());
        }
        self.reserve_range(other.offset, other.offset + other.mass.len() as i64 - 1);
        for (i, &m) in other.mass.iter().enumerate() {
            self.mass[(other.offset - self.offset) as usize + i] += m;
        }
        Ok(())
    }
}

/// Occupation local time of `path` over the time window `[s, t)` with bins of
/// width `h`. Each step contributes its overlap with the window to the bin of
/// its left grid value, so `∫ L dx` equals the window length exactly.
pub fn local_time(path: &PathSample, window: (f64, f64), h: f64) -> Result<LocalTimeField> {
    if !(h > 0.0) {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    let (s, t) = window;
    let mut field = LocalTimeField::empty(h);
    if !(t > s) {
        return Ok(field);
    }
    for step in path.steps() {
        let overlap = (step.t0 + step.dt).min(t) - step.t0.max(s);
        if overlap > 0.0 {
            field.add_time(field.bin_of(step.z), overlap);
        }
    }
    Ok(field)
}

/// Rescaled time spent within `w √dt` of the boundary point `c` during
/// `[s, t)`: `(1 / 2ε) · time`.
pub fn boundary_local_time(path: &PathSample, c: f64, window: (f64, f64), w: f64) -> Result<f64> {
    let on_boundary = match path.domain {
        Domain::Line => false,
        Domain::HalfLine => c == 0.0,
        Domain::Interval { theta } => c == 0.0 || c == theta,
    };
    if !on_boundary {
        return Err(invalid("c", format!("{c} is not a boundary point")));
    }
    let (s, t) = window;
    let mut total = 0.0;
    for seg in &path.segments {
        let eps = w * seg.dt.sqrt();
        for j in 0..seg.steps() {
            let t0 = seg.start + j as f64 * seg.dt;
            let overlap = (t0 + seg.dt).min(t) - t0.max(s);
            if overlap > 0.0 && (seg.values[j] - c).abs() < eps {
                total += overlap / (2.0 * eps);
            }
        }
    }
    Ok(total)
}
