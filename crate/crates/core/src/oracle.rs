//! Finite-difference discretization of the random operator, dense
//! eigensolves and ensemble averages of spectral traces.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{FieldElement, FieldKind};
use crate::error::{invalid, Error, Result};
use crate::model::{ExperimentSpec, Model};
use crate::noise::{NoiseField, NoiseGrid, ARCHIVE_MAGIC};
use crate::paths::Domain;
use crate::stats::{run_chunked, Execution, MomentEstimate};

/// Record tag of a serialized spectrum.
pub const SPECTRUM_RECORD: u8 = 2;

/// Noise entering a discretization. A scale of zero selects lattice white
/// noise for that part of the matrix.
#[derive(Clone, Copy, Debug)]
pub struct NoiseInput<'a> {
    pub field: &'a NoiseField,
    pub eps_diag: f64,
    pub eps_off: f64,
}

#[derive(Clone, Debug)]
enum Storage {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// A self-adjoint matrix approximating the operator on a vertex grid.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub kind: FieldKind,
    pub colors: usize,
    /// Grid nodes, endpoints included.
    pub nodes: Vec<f64>,
    pub h: f64,
    /// Matrix row of `(color, node)`, absent for eliminated Dirichlet nodes.
    index: Vec<Vec<Option<usize>>>,
    /// Quaternionic dimension (number of active `(color, node)` pairs).
    pub dim: usize,
    storage: Storage,
}

/// Boundary handling of one end of the grid for one color.
#[derive(Clone, Copy, Debug, PartialEq)]
enum End {
    Dirichlet,
    Robin(f64),
}

fn end_condition(weight: f64) -> End {
    if weight == f64::NEG_INFINITY {
        End::Dirichlet
    } else {
        End::Robin(weight)
    }
}

/// Per-color end conditions; truncation ends are always Dirichlet.
fn ends(model: &Model, color: usize) -> (End, End) {
    let lower = end_condition(model.boundary.lower[color]);
    let upper = end_condition(model.boundary.upper[color]);
    match model.domain {
        Domain::Line => (End::Dirichlet, End::Dirichlet),
        Domain::HalfLine => (lower, End::Dirichlet),
        Domain::Interval { .. } => (lower, upper),
    }
}

/// Builds the matrix of `-½Δ + V + ξ` on `n` equally spaced nodes spanning
/// `range` (endpoints included).
///
/// Robin ends use a ghost node and the half-cell weight at the boundary,
/// followed by the diagonal similarity that makes the matrix symmetric.
pub fn discretize(
    model: &Model,
    range: (f64, f64),
    noise: Option<NoiseInput<'_>>,
    n: usize,
) -> Result<DiscreteOperator> {
    model.validate()?;
    if n < 16 {
        return Err(invalid("n", format!("need at least 16 grid points, got {n}")));
    }
    let (a, b) = range;
    let h = (b - a) / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|g| a + g as f64 * h).collect();
    let r = model.colors;
    let kind = model.kind;

    let smooth = match noise {
        Some(inp) if inp.eps_diag > 0.0 || inp.eps_off > 0.0 => {
            for eps in [inp.eps_diag, inp.eps_off] {
                if eps > 0.0 && eps < 2.0 * h {
                    return Err(Error::GridTooCoarse { eps, h });
                }
            }
            let ed = if inp.eps_diag > 0.0 { inp.eps_diag } else { inp.eps_off };
            let eo = if inp.eps_off > 0.0 { inp.eps_off } else { inp.eps_diag };
            let s = inp.field.mollify(ed, eo)?;
            let (lo, hi) = s.usable_range();
            if a < lo - 1e-12 || b > hi + 1e-12 {
                return Err(invalid("noise", "noise grid does not cover the operator grid"));
            }
            Some(s)
        }
        _ => None,
    };

    let mut index = vec![vec![None; n]; r];
    let mut weight = vec![vec![h; n]; r];
    let mut end_diag = vec![vec![0.0; n]; r];
    let mut dim = 0;
    for g in 0..n {
        for c in 0..r {
            let (lo, hi) = ends(model, c);
            let active = !((g == 0 && lo == End::Dirichlet) || (g == n - 1 && hi == End::Dirichlet));
            if active {
                index[c][g] = Some(dim);
                dim += 1;
            }
            if g == 0 {
                if let End::Robin(al) = lo {
                    weight[c][g] = h / 2.0;
                    end_diag[c][g] = -al / h;
                }
            }
            if g == n - 1 {
                if let End::Robin(be) = hi {
                    weight[c][g] = h / 2.0;
                    end_diag[c][g] = -be / h;
                }
            }
        }
    }

    let qdim = if kind == FieldKind::Quaternion { 2 * dim } else { dim };
    let mut entries: Vec<(usize, usize, FieldElement)> = Vec::new();
    let inv_h2 = 1.0 / (h * h);
    for c in 0..r {
        for g in 0..n {
            let Some(p) = index[c][g] else { continue };
            let x = nodes[g];
            let boundary_row = (g == 0 || g == n - 1) && weight[c][g] < h;
            let mut d = if boundary_row { inv_h2 + end_diag[c][g] } else { inv_h2 };
            d += model.potential.value(c, r, x);
            if let Some(inp) = noise {
                if inp.eps_diag > 0.0 {
                    d += smooth.as_ref().expect("smooth noise").diag(c, x);
                } else {
                    let (lo, hi) = cell(&nodes, g, h);
                    d += inp.field.cell_sum(c, c, lo, hi).real_part() / weight[c][g];
                }
            }
            entries.push((p, p, FieldElement::from_components(kind, [d, 0.0, 0.0, 0.0])));
            if g + 1 < n {
                if let Some(q) = index[c][g + 1] {
                    // stencil coefficient of the unsymmetrized rows, then the
                    // similarity sqrt(w_g / w_{g+1})
                    let a_pq = if boundary_row { -inv_h2 } else { -0.5 * inv_h2 };
                    let next_boundary = g + 1 == n - 1 && weight[c][g + 1] < h;
                    let a_qp = if next_boundary { -inv_h2 } else { -0.5 * inv_h2 };
                    let sym = (a_pq * a_qp).sqrt() * -1.0;
                    entries.push((p, q, FieldElement::from_components(kind, [sym, 0.0, 0.0, 0.0])));
                }
            }
        }
    }
    if let Some(inp) = noise {
        for g in 0..n {
            for i in 0..r {
                for j in i + 1..r {
                    let (Some(p), Some(q)) = (index[i][g], index[j][g]) else {
                        continue;
                    };
                    let x = nodes[g];
                    let v = if inp.eps_off > 0.0 {
                        smooth.as_ref().expect("smooth noise").eval(i, j, x)
                    } else {
                        let (lo, hi) = cell(&nodes, g, h);
                        let w = weight[i][g].min(weight[j][g]);
                        inp.field.cell_sum(i, j, lo, hi).scale(1.0 / w)
                    };
                    entries.push((p, q, v));
                }
            }
        }
    }

    let storage = match kind {
        FieldKind::Real => {
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for (p, q, v) in entries {
                m[(p, q)] += v.real_part();
                if p != q {
                    m[(q, p)] += v.real_part();
                }
            }
            Storage::Real(m)
        }
        FieldKind::Complex => {
            let mut m = DMatrix::<Complex64>::zeros(dim, dim);
            for (p, q, v) in entries {
                let [re, im, _, _] = v.components();
                m[(p, q)] += Complex64::new(re, im);
                if p != q {
                    m[(q, p)] += Complex64::new(re, -im);
                }
            }
            Storage::Complex(m)
        }
        FieldKind::Quaternion => {
            let mut m = DMatrix::<Complex64>::zeros(qdim, qdim);
            for (p, q, v) in entries {
                let e = v.embed();
                let ec = v.conj().embed();
                for hh in 0..2 {
                    for ll in 0..2 {
                        m[(2 * p + hh, 2 * q + ll)] += e.entry(hh, ll);
                        if p != q {
                            m[(2 * q + hh, 2 * p + ll)] += ec.entry(hh, ll);
                        }
                    }
                }
            }
            Storage::Complex(m)
        }
    };
    Ok(DiscreteOperator {
        kind,
        colors: r,
        nodes,
        h,
        index,
        dim,
        storage,
    })
}

/// The control cell `[x_g - h/2, x_g + h/2)` clipped to the grid.
fn cell(nodes: &[f64], g: usize, h: f64) -> (f64, f64) {
    let lo = if g == 0 { nodes[0] } else { nodes[g] - h / 2.0 };
    let hi = if g + 1 == nodes.len() {
        nodes[g] + 1e-9 * h
    } else {
        nodes[g] + h / 2.0
    };
    (lo, hi)
}

impl DiscreteOperator {
    /// Dimension of the stored matrix (doubled for quaternions).
    pub fn storage_dim(&self) -> usize {
        match &self.storage {
            Storage::Real(m) => m.nrows(),
            Storage::Complex(m) => m.nrows(),
        }
    }

    /// Row of `(color, node)`, if the node is not eliminated.
    pub fn row(&self, color: usize, node: usize) -> Option<usize> {
        self.index[color][node]
    }

    /// Largest entry of `A - A^*`.
    pub fn asymmetry(&self) -> f64 {
        match &self.storage {
            Storage::Real(m) => (m - m.transpose()).amax(),
            Storage::Complex(m) => {
                let d = m - m.adjoint();
                d.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// All eigenvalues of the stored matrix, ascending, without removing
    /// the quaternionic doubling.
    pub fn storage_eigenvalues(&self) -> Result<Vec<f64>> {
        let dim = self.storage_dim();
        let mut eig: Vec<f64> = match &self.storage {
            Storage::Real(m) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
            Storage::Complex(m) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
        };
        if eig.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen {
                dim,
                reason: format!("non-finite eigenvalue (asymmetry {:.3e})", self.asymmetry()),
            });
        }
        eig.sort_by(f64::total_cmp);
        Ok(eig)
    }

    /// Eigenvalues, ascending; quaternionic multiplicities are halved.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = self.storage_eigenvalues()?;
        Ok(match self.kind {
            FieldKind::Quaternion => eig.iter().step_by(2).copied().collect(),
            _ => eig,
        })
    }

    /// Eigenvalues of the real form of the stored matrix
    /// `[[Re A, -Im A], [Im A, Re A]]`, which doubles every complex
    /// eigenvalue once more.
    pub fn real_embedding_eigenvalues(&self) -> Result<Vec<f64>> {
        let m = match &self.storage {
            Storage::Real(m) => m.clone(),
            Storage::Complex(c) => {
                let d = c.nrows();
                let mut m = DMatrix::<f64>::zeros(2 * d, 2 * d);
                for p in 0..d {
                    for q in 0..d {
                        let z = c[(p, q)];
                        m[(p, q)] = z.re;
                        m[(p + d, q + d)] = z.re;
                        m[(p, q + d)] = -z.im;
                        m[(p + d, q)] = z.im;
                    }
                }
                m
            }
        };
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        Ok(eig)
    }
}

/// `Tr e^{-tH} = Σ_k e^{-t λ_k}`.
pub fn trace_semigroup(eigs: &[f64], t: f64) -> f64 {
    eigs.iter().map(|&l| (-t * l).exp()).sum()
}

/// Noise grid for an oracle draw: covers the operator range plus the
/// mollifier margin, and is aligned with the half cells of the operator
/// grid so lattice white noise is an exact sum of noise increments.
pub fn oracle_noise_grid(range: (f64, f64), n: usize, eps: &[f64]) -> Result<NoiseGrid> {
    let (a, b) = range;
    let h = (b - a) / (n - 1) as f64;
    let eps_min = eps.iter().copied().filter(|&e| e > 0.0).fold(f64::INFINITY, f64::min);
    let eps_max = eps.iter().copied().fold(0.0, f64::max);
    let refine = if eps_min.is_finite() {
        (8.0 * h / eps_min).ceil().max(1.0)
    } else {
        1.0
    };
    let dx = h / (2.0 * refine);
    let margin = ((eps_max + h) / dx).ceil() * dx;
    let cells = ((b - a + 2.0 * margin) / dx).round() as usize;
    Ok(NoiseGrid {
        x0: a - margin,
        dx,
        cells,
    })
}

/// Operator scales of a spec; the oracle needs one operator, so every
/// factor must share them.
fn operator_scales(spec: &ExperimentSpec) -> Result<(f64, f64)> {
    let e = spec.eps[0];
    let z = spec.zeta[0];
    if spec.eps.iter().any(|&x| x != e) || spec.zeta.iter().any(|&x| x != z) {
        return Err(invalid("eps", "the matrix oracle needs the same scales for every factor"));
    }
    Ok((e, z))
}

/// One ensemble member: a noise field and the spectrum of its operator.
pub fn oracle_draw<R: Rng + ?Sized>(
    spec: &ExperimentSpec,
    n: usize,
    rng: &mut R,
) -> Result<(NoiseField, Vec<f64>)> {
    let (eps, zeta) = operator_scales(spec)?;
    let range = spec.x_range()?;
    let m = &spec.model;
    let grid = oracle_noise_grid(range, n, &[eps, zeta])?;
    let field = NoiseField::sample(m.kind, m.colors, m.sigma2, m.upsilon2, grid, rng)?;
    let eig = spectrum_of(spec, &field, n)?;
    Ok((field, eig))
}

/// Spectrum of the operator built on a given noise field.
pub fn spectrum_of(spec: &ExperimentSpec, field: &NoiseField, n: usize) -> Result<Vec<f64>> {
    let (eps, zeta) = operator_scales(spec)?;
    let range = spec.x_range()?;
    let noisy = spec.model.sigma2 > 0.0 || spec.model.upsilon2 > 0.0;
    let input = noisy.then_some(NoiseInput {
        field,
        eps_diag: eps,
        eps_off: zeta,
    });
    discretize(&spec.model, range, input, n)?.eigenvalues()
}

/// Ensemble mean of `∏_k Tr e^{-t_k H}` over `draws` noise realizations.
/// Draw `d` uses random stream `d`, so results do not depend on the worker
/// count.
pub fn oracle_moment(
    spec: &ExperimentSpec,
    n: usize,
    draws: usize,
    exec: Execution,
) -> Result<MomentEstimate> {
    if draws < 2 {
        return Err(invalid("draws", "need at least two ensemble members"));
    }
    spec.validate()?;
    let acc = run_chunked(draws, exec, |_, range, acc| {
        for d in range {
            let (_, eig) = ensemble_member(spec, n, exec.seed, d as u64)?;
            acc.push(spec.times.iter().map(|&t| trace_semigroup(&eig, t)).product());
        }
        Ok(())
    })?;
    Ok(acc.finish(exec.seed))
}

/// Draw `d` of the ensemble averaged by [`oracle_moment`] under `seed`.
pub fn ensemble_member(spec: &ExperimentSpec, n: usize, seed: u64, d: u64) -> Result<(NoiseField, Vec<f64>)> {
    let mut rng = crate::rng::stream(crate::rng::derive_seed(seed, 0x0_5AC1E), d);
    oracle_draw(spec, n, &mut rng)
}

/// Writes a spectrum as a binary record.
pub fn write_spectrum<W: Write>(mut w: W, draw: u64, eig: &[f64]) -> Result<()> {
    w.write_all(ARCHIVE_MAGIC)?;
    w.write_all(&[SPECTRUM_RECORD])?;
    w.write_all(&draw.to_le_bytes())?;
    w.write_all(&(eig.len() as u64).to_le_bytes())?;
    for v in eig {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a record written by [`write_spectrum`].
pub fn read_spectrum<R: Read>(mut rd: R) -> Result<(u64, Vec<f64>)> {
    let mut magic = [0u8; 7];
    rd.read_exact(&mut magic)?;
    if &magic[..6] != ARCHIVE_MAGIC || magic[6] != SPECTRUM_RECORD {
        return Err(Error::Format("not a spectrum record".into()));
    }
    let mut b8 = [0u8; 8];
    rd.read_exact(&mut b8)?;
    let draw = u64::from_le_bytes(b8);
    rd.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let mut eig = Vec::with_capacity(len);
    for _ in 0..len {
        rd.read_exact(&mut b8)?;
        eig.push(f64::from_le_bytes(b8));
    }
    Ok((draw, eig))
}
