//! Matrix noise: Brownian increments per entry and component, their
//! mollifications, the mollifier family and the exact pair covariances.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::algebra::{FieldElement, FieldKind};
use crate::combinatorics::{relation, Jump, PairRelation};
use crate::error::{invalid, Error, Result};

/// Magic prefix of every binary archive written by this crate.
pub const ARCHIVE_MAGIC: &[u8; 6] = b"MVSAO1";
/// Record tag of a serialized noise field.
pub const NOISE_RECORD: u8 = 1;

const BUMP_NORM: f64 = 15.0 / 16.0;

/// The base mollifier `15/16 (1 - x²)²` on `[-1, 1]`.
#[inline]
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - x * x;
        BUMP_NORM * s * s
    }
}

/// The rescaled mollifier `bump(x / ε) / ε`.
#[inline]
pub fn bump_scaled(eps: f64, x: f64) -> f64 {
    bump(x / eps) / eps
}

// 8-point Gauss-Legendre rule; exact for the degree-8 integrands below.
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `∫ bump_ζ(u) bump_η(x - u) du`, computed on the overlap of the supports
/// where the integrand is a polynomial.
pub fn rho_exact(zeta: f64, eta: f64, x: f64) -> f64 {
    let lo = (-zeta).max(x - eta);
    let hi = zeta.min(x + eta);
    if hi <= lo {
        return 0.0;
    }
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(&n, w)| {
            let u = mid + half * n;
            w * bump_scaled(zeta, u) * bump_scaled(eta, x - u)
        })
        .sum::<f64>()
        * half
}

/// Points of the lookup grid for `ρ_{ζ,η}` on `[0, ζ + η]`.
pub const RHO_TABLE_POINTS: usize = 4096;

/// Tabulated `ρ_{ζ,η}` with linear interpolation.
#[derive(Clone, Debug)]
pub struct RhoTable {
    zeta: f64,
    eta: f64,
    width: f64,
    step: f64,
    values: Vec<f64>,
}

impl RhoTable {
    pub fn new(zeta: f64, eta: f64) -> Self {
        let width = zeta + eta;
        let step = width / (RHO_TABLE_POINTS - 1) as f64;
        let values = (0..RHO_TABLE_POINTS)
            .map(|k| rho_exact(zeta, eta, k as f64 * step))
            .collect();
        RhoTable {
            zeta,
            eta,
            width,
            step,
            values,
        }
    }

    pub fn scales(&self) -> (f64, f64) {
        (self.zeta, self.eta)
    }

    pub fn support(&self) -> f64 {
        self.width
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.width {
            return 0.0;
        }
        let s = a / self.step;
        let k = s as usize;
        if k + 1 >= self.values.len() {
            return self.values[self.values.len() - 1];
        }
        let f = s - k as f64;
        self.values[k] * (1.0 - f) + self.values[k + 1] * f
    }
}

/// Process-wide cache of `ρ_{ζ,η}` tables.
#[derive(Debug, Default)]
pub struct MollifierSpec {
    cache: Mutex<HashMap<(u64, u64), Arc<RhoTable>>>,
}

impl MollifierSpec {
    pub fn global() -> &'static MollifierSpec {
        static SPEC: OnceLock<MollifierSpec> = OnceLock::new();
        SPEC.get_or_init(MollifierSpec::default)
    }

    /// The (cached) table for `(ζ, η)`; symmetric in its arguments.
    pub fn table(&self, zeta: f64, eta: f64) -> Arc<RhoTable> {
        let (a, b) = if zeta <= eta { (zeta, eta) } else { (eta, zeta) };
        let key = (a.to_bits(), b.to_bits());
        let mut cache = self.cache.lock().expect("mollifier cache poisoned");
        cache
            .entry(key)
            .or_insert_with(|| Arc::new(RhoTable::new(a, b)))
            .clone()
    }

    pub fn rho(&self, zeta: f64, eta: f64, x: f64) -> f64 {
        self.table(zeta, eta).eval(x)
    }
}

/// `ρ_{ζ,η}(x)` from the global cache.
pub fn rho(zeta: f64, eta: f64, x: f64) -> f64 {
    MollifierSpec::global().rho(zeta, eta, x)
}

/// A uniform grid of cells `[x0 + c·dx, x0 + (c+1)·dx)`, `c < cells`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseGrid {
    pub x0: f64,
    pub dx: f64,
    pub cells: usize,
}

impl NoiseGrid {
    /// A grid covering `[a, b]` with cells no wider than `dx`.
    pub fn covering(a: f64, b: f64, dx: f64) -> Result<Self> {
        if !(b > a && dx > 0.0) {
            return Err(invalid("grid", format!("bad range [{a}, {b}] or step {dx}")));
        }
        let cells = ((b - a) / dx - 1e-9).ceil().max(1.0) as usize;
        Ok(NoiseGrid {
            x0: a,
            dx: (b - a) / cells as f64,
            cells,
        })
    }

    pub fn end(&self) -> f64 {
        self.x0 + self.dx * self.cells as f64
    }

    pub fn center(&self, c: usize) -> f64 {
        self.x0 + (c as f64 + 0.5) * self.dx
    }
}

/// Number of stored entries `(i, j)` with `i <= j`.
fn entry_count(r: usize) -> usize {
    r * (r + 1) / 2
}

fn entry_offsets(kind: FieldKind, r: usize) -> Vec<(usize, usize)> {
    // (first component slot, component count) per stored entry
    let mut out = Vec::with_capacity(entry_count(r));
    let mut slot = 0;
    for i in 0..r {
        for j in i..r {
            let comps = if i == j { 1 } else { kind.dim() };
            out.push((slot, comps));
            slot += comps;
        }
    }
    out
}

/// One realization of the matrix of Brownian motions, stored as unit
/// variance increments per cell; the variances are applied on evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseField {
    pub kind: FieldKind,
    pub r: usize,
    pub sigma2: f64,
    pub upsilon2: f64,
    pub grid: NoiseGrid,
    /// Component slots, each holding `grid.cells` increments.
    increments: Vec<f64>,
    offsets: Vec<(usize, usize)>,
}

impl NoiseField {
    pub fn sample<R: Rng + ?Sized>(
        kind: FieldKind,
        r: usize,
        sigma2: f64,
        upsilon2: f64,
        grid: NoiseGrid,
        rng: &mut R,
    ) -> Result<Self> {
        if r == 0 {
            return Err(invalid("r", "need at least one color"));
        }
        if !(sigma2 >= 0.0 && upsilon2 >= 0.0) {
            return Err(invalid("variance", "variances must be nonnegative"));
        }
        let offsets = entry_offsets(kind, r);
        let slots = offsets.last().map_or(0, |&(s, c)| s + c);
        let sd = grid.dx.sqrt();
        let increments = (0..slots * grid.cells)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(NoiseField {
            kind,
            r,
            sigma2,
            upsilon2,
            grid,
            increments,
            offsets,
        })
    }

    fn slot(&self, i: usize, j: usize) -> (usize, usize) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let mut idx = 0;
        for row in 0..a {
            idx += self.r - row;
        }
        idx += b - a;
        self.offsets[idx]
    }

    /// Increments of component `comp` of the stored entry `(min, max)`.
    pub fn component(&self, i: usize, j: usize, comp: usize) -> &[f64] {
        let (slot, comps) = self.slot(i, j);
        assert!(comp < comps, "component {comp} out of range");
        let n = self.grid.cells;
        &self.increments[(slot + comp) * n..(slot + comp + 1) * n]
    }

    /// Scale applied to each unit component of entry `(i, j)`.
    pub fn entry_scale(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.sigma2.sqrt()
        } else {
            self.upsilon2.sqrt() * self.kind.component_scale()
        }
    }

    /// Assembles component values into the entry `(i, j)`, conjugating
    /// below the diagonal.
    fn assemble(&self, i: usize, j: usize, comps: [f64; 4]) -> FieldElement {
        let s = self.entry_scale(i, j);
        let e = if i == j {
            FieldElement::from_components(self.kind, [s * comps[0], 0.0, 0.0, 0.0])
        } else {
            FieldElement::from_components(self.kind, comps.map(|c| s * c))
        };
        if i > j {
            e.conj()
        } else {
            e
        }
    }

    /// `W_{i,j}(x) - W_{i,j}(x0)`, summing whole cells left of `x`.
    pub fn brownian_value(&self, i: usize, j: usize, x: f64) -> FieldElement {
        let (_, comps) = self.slot(i, j);
        let upto = (((x - self.grid.x0) / self.grid.dx).floor().max(0.0) as usize).min(self.grid.cells);
        let mut out = [0.0; 4];
        for (c, o) in out.iter_mut().enumerate().take(comps) {
            *o = self.component(i, j, c)[..upto].iter().sum();
        }
        self.assemble(i, j, out)
    }

    /// Sum of increments of entry `(i, j)` over cells whose centers lie in
    /// `[a, b)`.
    pub fn cell_sum(&self, i: usize, j: usize, a: f64, b: f64) -> FieldElement {
        let (_, comps) = self.slot(i, j);
        let g = self.grid;
        let first = ((a - g.x0) / g.dx - 0.5).ceil().max(0.0) as usize;
        let last = (((b - g.x0) / g.dx - 0.5).ceil().max(0.0) as usize).min(g.cells);
        let mut out = [0.0; 4];
        if first < last {
            for (c, o) in out.iter_mut().enumerate().take(comps) {
                *o = self.component(i, j, c)[first..last].iter().sum();
            }
        }
        self.assemble(i, j, out)
    }

    /// `ξ^ε_{i,j}(x) = Σ_cells bump_ε(x - center) ΔW(cell)`.
    pub fn mollified_eval(&self, eps: f64, i: usize, j: usize, x: f64) -> Result<FieldElement> {
        if !(eps > 0.0) {
            return Err(invalid("eps", "mollified evaluation needs eps > 0"));
        }
        let g = self.grid;
        if x - eps < g.x0 - 1e-12 || x + eps > g.end() + 1e-12 {
            return Err(Error::OutsideDomain { x });
        }
        let (_, comps) = self.slot(i, j);
        let first = ((x - eps - g.x0) / g.dx - 0.5).floor().max(0.0) as usize;
        let last = (((x + eps - g.x0) / g.dx + 0.5).ceil() as usize).min(g.cells);
        let mut out = [0.0; 4];
        for (comp, o) in out.iter_mut().enumerate().take(comps) {
            let inc = self.component(i, j, comp);
            *o = (first..last)
                .map(|c| bump_scaled(eps, x - g.center(c)) * inc[c])
                .sum();
        }
        Ok(self.assemble(i, j, out))
    }

    /// Precomputes mollified values of every entry on the cell edges.
    /// Diagonal entries use `eps_diag`, off-diagonal ones `eps_off`.
    pub fn mollify(&self, eps_diag: f64, eps_off: f64) -> Result<SmoothNoise> {
        if !(eps_diag > 0.0 && eps_off > 0.0) {
            return Err(invalid("eps", "mollification scales must be positive"));
        }
        let g = self.grid;
        let n_nodes = g.cells + 1;
        let mut values = Vec::with_capacity(self.increments.len() / g.cells * n_nodes);
        for i in 0..self.r {
            for j in i..self.r {
                let eps = if i == j { eps_diag } else { eps_off };
                let (_, comps) = self.slot(i, j);
                let m = (eps / g.dx).ceil() as i64 + 1;
                let weights: Vec<f64> = (-m..m)
                    .map(|k| bump_scaled(eps, -(k as f64 + 0.5) * g.dx))
                    .collect();
                let scale = self.entry_scale(i, j);
                for comp in 0..comps {
                    let inc = self.component(i, j, comp);
                    for node in 0..n_nodes as i64 {
                        let mut s = 0.0;
                        for (w, k) in weights.iter().zip(-m..m) {
                            let c = node + k;
                            if c >= 0 && (c as usize) < g.cells {
                                s += w * inc[c as usize];
                            }
                        }
                        values.push(scale * s);
                    }
                }
            }
        }
        let margin = eps_diag.max(eps_off);
        Ok(SmoothNoise {
            kind: self.kind,
            r: self.r,
            eps_diag,
            eps_off,
            x0: g.x0,
            dx: g.dx,
            nodes: n_nodes,
            lo: g.x0 + margin,
            hi: g.end() - margin,
            values,
            offsets: self.offsets.clone(),
        })
    }

    /// Writes the field as a binary record.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(ARCHIVE_MAGIC)?;
        w.write_all(&[NOISE_RECORD])?;
        let kind = match self.kind {
            FieldKind::Real => 1u8,
            FieldKind::Complex => 2,
            FieldKind::Quaternion => 4,
        };
        w.write_all(&[kind])?;
        w.write_all(&(self.r as u32).to_le_bytes())?;
        for v in [self.sigma2, self.upsilon2, self.grid.x0, self.grid.dx] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.grid.cells as u64).to_le_bytes())?;
        w.write_all(&(self.increments.len() as u64).to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a record written by [`NoiseField::write_to`].
    pub fn read_from<R: Read>(mut rd: R) -> Result<Self> {
        let mut magic = [0u8; 6];
        rd.read_exact(&mut magic)?;
        if &magic != ARCHIVE_MAGIC {
            return Err(Error::Format("missing MVSAO1 header".into()));
        }
        let mut tag = [0u8; 2];
        rd.read_exact(&mut tag)?;
        if tag[0] != NOISE_RECORD {
            return Err(Error::Format(format!("record tag {} is not a noise field", tag[0])));
        }
        let kind = match tag[1] {
            1 => FieldKind::Real,
            2 => FieldKind::Complex,
            4 => FieldKind::Quaternion,
            k => return Err(Error::Format(format!("unknown field kind {k}"))),
        };
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        rd.read_exact(&mut b4)?;
        let r = u32::from_le_bytes(b4) as usize;
        let mut f = [0.0; 4];
        for v in f.iter_mut() {
            rd.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        rd.read_exact(&mut b8)?;
        let cells = u64::from_le_bytes(b8) as usize;
        rd.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let offsets = entry_offsets(kind, r);
        let slots = offsets.last().map_or(0, |&(s, c)| s + c);
        if len != slots * cells {
            return Err(Error::Format(format!(
                "expected {} increments, header says {len}",
                slots * cells
            )));
        }
        let mut increments = Vec::with_capacity(len);
        for _ in 0..len {
            rd.read_exact(&mut b8)?;
            increments.push(f64::from_le_bytes(b8));
        }
        Ok(NoiseField {
            kind,
            r,
            sigma2: f[0],
            upsilon2: f[1],
            grid: NoiseGrid {
                x0: f[2],
                dx: f[3],
                cells,
            },
            increments,
            offsets,
        })
    }
}

/// Mollified noise tabulated on the cell edges of its source grid, with
/// linear interpolation in between.
#[derive(Clone, Debug)]
pub struct SmoothNoise {
    pub kind: FieldKind,
    pub r: usize,
    pub eps_diag: f64,
    pub eps_off: f64,
    x0: f64,
    dx: f64,
    nodes: usize,
    lo: f64,
    hi: f64,
    values: Vec<f64>,
    offsets: Vec<(usize, usize)>,
}

impl SmoothNoise {
    /// Range on which the tabulated values are exact convolutions.
    pub fn usable_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    #[inline]
    fn interp(&self, slot: usize, x: f64) -> f64 {
        let s = ((x - self.x0) / self.dx).clamp(0.0, (self.nodes - 1) as f64);
        let k = (s as usize).min(self.nodes - 2);
        let f = s - k as f64;
        let base = slot * self.nodes;
        self.values[base + k] * (1.0 - f) + self.values[base + k + 1] * f
    }

    fn slot(&self, i: usize, j: usize) -> (usize, usize) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let mut idx = 0;
        for row in 0..a {
            idx += self.r - row;
        }
        self.offsets[idx + b - a]
    }

    /// Diagonal value `ξ^ε_{i,i}(x)`.
    #[inline]
    pub fn diag(&self, i: usize, x: f64) -> f64 {
        let (slot, _) = self.slot(i, i);
        self.interp(slot, x)
    }

    /// Entry `ξ_{i,j}(x)`; entries below the diagonal are conjugates.
    pub fn eval(&self, i: usize, j: usize, x: f64) -> FieldElement {
        let (slot, comps) = self.slot(i, j);
        let mut c = [0.0; 4];
        for (k, v) in c.iter_mut().enumerate().take(comps) {
            *v = self.interp(slot + k, x);
        }
        let e = FieldElement::from_components(self.kind, c);
        if i > j {
            e.conj()
        } else {
            e
        }
    }
}

/// Expected product of the entries of two mollified noise values attached to
/// paired jumps `a` and `b`, at displacement `d`.
///
/// For quaternions `steps` selects the entries `(h, l)` of the 2x2 complex
/// representation of each factor; the commutative fields ignore it.
pub fn covariance_table(
    kind: FieldKind,
    a: Jump,
    b: Jump,
    steps: ((u8, u8), (u8, u8)),
    zeta: f64,
    eta: f64,
    d: f64,
    upsilon2: f64,
) -> f64 {
    let base = upsilon2 * rho(zeta, eta, d);
    let rel = relation(a, b);
    pair_factor(kind, rel, steps) * base
}

/// The sign/size factor multiplying `υ² ρ_{ζ,η}(d)` for a pair relation.
pub fn pair_factor(kind: FieldKind, rel: PairRelation, steps: ((u8, u8), (u8, u8))) -> f64 {
    match (kind, rel) {
        (_, PairRelation::Unrelated) => 0.0,
        (FieldKind::Real, _) => 1.0,
        (FieldKind::Complex, PairRelation::Same) => 0.0,
        (FieldKind::Complex, PairRelation::Reversed) => 1.0,
        (FieldKind::Quaternion, PairRelation::Same) => match steps {
            ((0, 0), (1, 1)) | ((1, 1), (0, 0)) => 0.5,
            ((0, 1), (1, 0)) | ((1, 0), (0, 1)) => -0.5,
            _ => 0.0,
        },
        (FieldKind::Quaternion, PairRelation::Reversed) => match steps {
            ((0, 0), (0, 0)) | ((1, 1), (1, 1)) | ((0, 1), (1, 0)) | ((1, 0), (0, 1)) => 0.5,
            _ => 0.0,
        },
    }
}
