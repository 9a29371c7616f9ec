//! Exponential dichotomy: monodromy and Floquet multipliers, Moore–Penrose left
//! inverses, contour-integral spectral projections, and verification of the
//! dichotomy estimates for a projection family.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, identity, min_singular_value, projection_rank, range_basis, spectral_norm, spectral_radius, CMatrix,
    PivotedQr,
};
use crate::propagator::EvolutionFamily;
use crate::semigroup::BlockShiftOperator;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-8;
/// Default and maximal node counts of the contour quadrature.
pub const DEFAULT_NODES: usize = 256;
pub const MAX_NODES: usize = 4096;
/// Idempotency target of the adaptive quadrature.
pub const IDEMPOTENCY_TARGET: f64 = 1e-8;

/// Margins at or below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-9;
/// Margins strictly between `ZERO_TOL` and this are flagged degenerate.
pub const DEGENERATE_TOL: f64 = 1e-6;

const NODE_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monodromy {
    #[serde(with = "crate::serde_util::complex_matrix")]
    pub matrix: CMatrix,
    #[serde(with = "crate::serde_util::complex_vec")]
    pub multipliers: Vec<Complex64>,
}

/// `U(x_p, x_0)` over `p = period_steps` cells, with its eigenvalues.
pub fn monodromy(fam: &EvolutionFamily, period_steps: usize) -> Result<Monodromy> {
    if period_steps == 0 || period_steps > fam.len() {
        return Err(Error::Precondition(format!(
            "period of {period_steps} steps does not fit a grid of {} cells",
            fam.len()
        )));
    }
    let window = period_steps as f64 * fam.step();
    if !fam.periodicity().admits_window(window) {
        return Err(Error::NotPeriodic(window));
    }
    let matrix = fam.propagator(0, period_steps);
    let multipliers = eigenvalues(&matrix)?;
    Ok(Monodromy { matrix, multipliers })
}

/// `T† = (T*T)^{-1} T*` through a column-pivoted QR factorization `T P = Q R`.
///
/// Rank is decided by `|R_kk| <= 1e-8 |R_00|`.
pub fn moore_penrose_left_inverse(t: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = t.shape();
    if cols == 0 {
        return Ok(CMatrix::zeros(0, rows));
    }
    if rows < cols {
        return Err(Error::RankDeficient { pivot: 0.0, tol: 0.0 });
    }
    let qr = PivotedQr::new(t);
    let pivots = qr.pivots();
    let tol = RANK_TOL * pivots[0];
    let smallest = pivots[cols - 1];
    if smallest.is_nan() || smallest <= tol {
        return Err(Error::RankDeficient { pivot: smallest, tol });
    }
    let x =
        qr.r.solve_upper_triangular(&qr.q.adjoint())
            .ok_or(Error::RankDeficient { pivot: smallest, tol })?;
    let mut out = CMatrix::zeros(cols, rows);
    for (k, &col) in qr.perm.iter().enumerate() {
        out.row_mut(col).copy_from(&x.row(k));
    }
    Ok(out)
}

fn node(q: usize, nodes: usize) -> Complex64 {
    Complex64::from_polar(1.0, TAU * q as f64 / nodes as f64)
}

/// `Σ z (zI - T)†` over the given node indices, summed in a fixed order.
fn node_sum(t: &CMatrix, indices: &[usize], nodes: usize) -> Result<CMatrix> {
    let n = t.nrows();
    let chunks: Vec<Result<CMatrix>> = indices
        .par_chunks(NODE_CHUNK)
        .map(|chunk| {
            let mut acc = CMatrix::zeros(n, n);
            for &q in chunk {
                let z = node(q, nodes);
                let shifted = identity(n) * z - t;
                let inv = moore_penrose_left_inverse(&shifted).map_err(|_| Error::SingularNode { z })?;
                acc += inv * z;
            }
            Ok(acc)
        })
        .collect();
    let mut total = CMatrix::zeros(n, n);
    for part in chunks {
        total += part?;
    }
    Ok(total)
}

/// Trapezoid rule for `(1/2πi) ∮_𝕋 (zI - T)† dz` on `nodes` equispaced points.
pub fn riesz_projection(t: &CMatrix, nodes: usize) -> Result<CMatrix> {
    if t.nrows() != t.ncols() {
        return Err(Error::Dimension {
            expected: t.nrows(),
            found: t.ncols(),
        });
    }
    if nodes == 0 {
        return Err(Error::Precondition("need at least one quadrature node".into()));
    }
    let indices: Vec<usize> = (0..nodes).collect();
    Ok(node_sum(t, &indices, nodes)? / Complex64::new(nodes as f64, 0.0))
}

#[derive(Debug, Clone)]
pub struct RieszOutcome {
    pub projection: CMatrix,
    pub nodes: usize,
    pub idempotency: f64,
    /// Spectral norm of the change made by the last doubling (infinite if none was made).
    pub last_change: f64,
}

/// Starts at `start` nodes and doubles, reusing earlier nodes, until
/// `||𝒫² - 𝒫|| <= target` or `max_nodes` is reached.
pub fn riesz_projection_adaptive(t: &CMatrix, start: usize, max_nodes: usize, target: f64) -> Result<RieszOutcome> {
    if start == 0 || max_nodes < start {
        return Err(Error::Precondition(format!("invalid node range {start}..{max_nodes}")));
    }
    let mut nodes = start;
    let mut sum = node_sum(t, &(0..nodes).collect::<Vec<_>>(), nodes)?;
    let mut projection = &sum / Complex64::new(nodes as f64, 0.0);
    let mut last_change = f64::INFINITY;
    loop {
        let idempotency = spectral_norm(&(&projection * &projection - &projection));
        if idempotency <= target || nodes * 2 > max_nodes {
            return Ok(RieszOutcome {
                projection,
                nodes,
                idempotency,
                last_change,
            });
        }
        let doubled = nodes * 2;
        let odd: Vec<usize> = (0..nodes).map(|q| 2 * q + 1).collect();
        sum += node_sum(t, &odd, doubled)?;
        nodes = doubled;
        let next = &sum / Complex64::new(nodes as f64, 0.0);
        last_change = spectral_norm(&(&next - &projection));
        projection = next;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Riesz,
    Floquet,
    UserSupplied,
}

/// Projections `P_j = P(x_j)` on the grid `x_0..x_N`.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionFamily {
    pub x0: f64,
    pub step: f64,
    #[serde(with = "crate::serde_util::complex_matrix_vec")]
    pub blocks: Vec<CMatrix>,
    pub idempotency_residual: f64,
    pub max_norm: f64,
    pub ranks: Vec<usize>,
    /// `max_j ||P_{j+1} - P_j||`.
    pub continuity_modulus: f64,
    pub provenance: Provenance,
}

impl ProjectionFamily {
    pub fn new(x0: f64, step: f64, blocks: Vec<CMatrix>, provenance: Provenance) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Precondition("empty projection family".into()));
        }
        let d = blocks[0].nrows();
        if let Some(bad) = blocks.iter().find(|b| b.nrows() != d || b.ncols() != d) {
            return Err(Error::Dimension {
                expected: d,
                found: bad.nrows().max(bad.ncols()),
            });
        }
        let idempotency_residual = blocks.iter().map(|p| spectral_norm(&(p * p - p))).fold(0.0, f64::max);
        let max_norm = blocks.iter().map(spectral_norm).fold(0.0, f64::max);
        let ranks = blocks.iter().map(projection_rank).collect();
        let continuity_modulus = blocks
            .windows(2)
            .map(|w| spectral_norm(&(&w[1] - &w[0])))
            .fold(0.0, f64::max);
        Ok(ProjectionFamily {
            x0,
            step,
            blocks,
            idempotency_residual,
            max_norm,
            ranks,
            continuity_modulus,
            provenance,
        })
    }

    pub fn constant(x0: f64, step: f64, n: usize, p: CMatrix) -> Result<Self> {
        Self::new(x0, step, vec![p; n + 1], Provenance::UserSupplied)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.blocks[0].nrows()
    }
}

/// Diagonal `d x d` blocks of an `Nd x Nd` projection as a family on `x_0..x_N`.
///
/// Cell `j` of the cyclic operator sits at `x_{j+1}`, so `P(x_0)` is the block
/// of cell `N-1`. Also returns `||𝒫 - blockdiag(P_j)||_F`.
pub fn extract_pointwise_projections(
    proj: &CMatrix,
    n: usize,
    d: usize,
    x0: f64,
    h: f64,
) -> Result<(ProjectionFamily, f64)> {
    if proj.nrows() != n * d || proj.ncols() != n * d {
        return Err(Error::Dimension {
            expected: n * d,
            found: proj.nrows().max(proj.ncols()),
        });
    }
    let cell = |j: usize| proj.view((j * d, j * d), (d, d)).into_owned();
    let mut off = proj.clone();
    for j in 0..n {
        off.view_mut((j * d, j * d), (d, d)).fill(crate::linalg::ZERO);
    }
    let mut blocks = Vec::with_capacity(n + 1);
    blocks.push(cell(n - 1));
    blocks.extend((0..n).map(cell));
    Ok((ProjectionFamily::new(x0, h, blocks, Provenance::Riesz)?, off.norm()))
}

/// Riesz projection of the cyclic operator followed by pointwise extraction.
pub fn riesz_family(op: &BlockShiftOperator, x0: f64) -> Result<(ProjectionFamily, RieszOutcome, f64)> {
    let outcome = riesz_projection_adaptive(&op.to_dense()?, DEFAULT_NODES, MAX_NODES, IDEMPOTENCY_TARGET)?;
    let (family, mass) = extract_pointwise_projections(&outcome.projection, op.cells(), op.block_dim(), x0, op.step())?;
    Ok((family, outcome, mass))
}

/// Spectral projections of the monodromies `U(x_j, x_0) U(x_N, x_j)` onto
/// multipliers inside the unit disc. Requires a window-periodic family.
pub fn floquet_projections(fam: &EvolutionFamily) -> Result<ProjectionFamily> {
    if !fam.is_window_periodic() {
        return Err(Error::NotPeriodic(fam.window()));
    }
    let n = fam.len();
    let blocks = (0..=n)
        .into_par_iter()
        .map(|j| {
            let mono = fam.propagator(0, j) * fam.propagator(j, n);
            riesz_projection_adaptive(&mono, DEFAULT_NODES, MAX_NODES, IDEMPOTENCY_TARGET).map(|o| o.projection)
        })
        .collect::<Result<Vec<_>>>()?;
    ProjectionFamily::new(fam.x0(), fam.step(), blocks, Provenance::Floquet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    UniformlyStable,
    Hyperbolic,
    SpectrallyHyperbolic,
    None,
}

impl Verdict {
    /// Any of the dichotomy classes.
    pub fn is_hyperbolic(self) -> bool {
        self != Verdict::None
    }

    /// Stronger of hyperbolic and spectrally hyperbolic; uniform stability is
    /// both in finite dimensions.
    pub fn is_spectrally_hyperbolic(self) -> bool {
        matches!(self, Verdict::SpectrallyHyperbolic | Verdict::UniformlyStable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `max ||P_j U(x_j, x_i) - U(x_j, x_i) P_i|| / ((1 + ||U||) max ||P||)`.
    pub commutation: f64,
    pub idempotency: f64,
    /// Fitted decay rate on `Im P` (infinite when `Im P = {0}`).
    pub decay_margin: f64,
    /// Fitted growth rate on `Ker P` (infinite when `Ker P = {0}`).
    pub growth_margin: f64,
    /// `min σ_min(K_j* U(x_j, x_i) K_i) / ||U(x_j, x_i)||` over `Ker P` bases (1 when `Ker P = {0}`).
    pub invertibility_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub verdict: Verdict,
    #[serde(rename = "M")]
    pub m: f64,
    pub lambda: f64,
    pub residuals: Residuals,
    pub rank: usize,
    pub provenance: Provenance,
    pub growth_rate: f64,
    pub decay_rate: f64,
    /// Smallest of the margins that decide the verdict; near zero means degenerate.
    pub margin: f64,
}

/// Least-squares slope of `ys` against `ts`.
fn slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let var: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let cov: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    if var > 0.0 {
        cov / var
    } else {
        0.0
    }
}

/// Checks the dichotomy conditions for `P` along `fam`: commutation with the
/// propagator, exponential decay on `Im P` and growth on `Ker P` with fitted
/// `(M, λ)`, and invertibility of the propagator between kernels.
///
/// `tol` bounds the commutation and idempotency residuals.
pub fn verify_dichotomy(fam: &EvolutionFamily, pf: &ProjectionFamily, tol: f64) -> Result<DichotomyReport> {
    let n = fam.len();
    let d = fam.dimension();
    if pf.len() != n + 1 || pf.dimension() != d {
        return Err(Error::GridMismatch(format!(
            "{} projections of size {} for {} grid points of dimension {d}",
            pf.len(),
            pf.dimension(),
            n + 1
        )));
    }
    let scale = fam.step().max(pf.step.abs()).max(1.0);
    if (pf.step - fam.step()).abs() > 1e-12 * scale || (pf.x0 - fam.x0()).abs() > 1e-12 * scale.max(fam.x0().abs()) {
        return Err(Error::GridMismatch(format!(
            "projection grid ({}, {}) differs from family grid ({}, {})",
            pf.x0,
            pf.step,
            fam.x0(),
            fam.step()
        )));
    }
    let rank = pf.ranks[0];
    if let Some(&other) = pf.ranks.iter().find(|&&r| r != rank) {
        return Err(Error::RankJump { first: rank, other });
    }

    let image: Vec<CMatrix> = pf.blocks.iter().map(|p| range_basis(p, 0.5)).collect();
    let kernel: Vec<CMatrix> = pf.blocks.iter().map(|p| range_basis(&(identity(d) - p), 0.5)).collect();

    struct Row {
        commutation: f64,
        stable: Vec<(f64, f64)>,
        unstable: Vec<(f64, f64)>,
        invertibility: f64,
    }
    let rows: Vec<Row> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let mut row = Row {
                commutation: 0.0,
                stable: Vec::new(),
                unstable: Vec::new(),
                invertibility: f64::INFINITY,
            };
            for (offset, u) in fam.propagators_from(i).iter().enumerate() {
                let j = i + offset;
                let tau = offset as f64 * fam.step();
                let unorm = spectral_norm(u);
                let defect = &pf.blocks[j] * u - u * &pf.blocks[i];
                row.commutation = row
                    .commutation
                    .max(spectral_norm(&defect) / ((1.0 + unorm) * pf.max_norm.max(1.0)));
                if rank > 0 {
                    let g = spectral_norm(&(u * &image[i])).max(f64::MIN_POSITIVE);
                    row.stable.push((tau, g.ln()));
                }
                if rank < d {
                    let g = min_singular_value(&(u * &kernel[i])).max(f64::MIN_POSITIVE);
                    row.unstable.push((tau, g.ln()));
                    let restricted = kernel[j].adjoint() * u * &kernel[i];
                    row.invertibility = row
                        .invertibility
                        .min(min_singular_value(&restricted) / unorm.max(f64::MIN_POSITIVE));
                }
            }
            row
        })
        .collect();

    let commutation = rows.iter().map(|r| r.commutation).fold(0.0, f64::max);
    let stable: Vec<(f64, f64)> = rows.iter().flat_map(|r| r.stable.iter().copied()).collect();
    let unstable: Vec<(f64, f64)> = rows.iter().flat_map(|r| r.unstable.iter().copied()).collect();

    let (decay_rate, m_stable) = if stable.is_empty() {
        (f64::INFINITY, 1.0)
    } else {
        let rate = -slope(&stable);
        let log_m = stable.iter().map(|&(t, y)| y + rate * t).fold(0.0, f64::max);
        (rate, log_m.exp())
    };
    let (growth_rate, m_unstable) = if unstable.is_empty() {
        (f64::INFINITY, 1.0)
    } else {
        let rate = slope(&unstable);
        let log_m = unstable.iter().map(|&(t, y)| rate * t - y).fold(0.0, f64::max);
        (rate, log_m.exp())
    };
    let lambda = decay_rate.min(growth_rate);
    let invertibility_margin = if rank < d {
        rows.iter().map(|r| r.invertibility).fold(f64::INFINITY, f64::min)
    } else {
        1.0
    };

    let residuals = Residuals {
        commutation,
        idempotency: pf.idempotency_residual,
        decay_margin: decay_rate,
        growth_margin: growth_rate,
        invertibility_margin,
    };
    let consistent = commutation <= tol && pf.idempotency_residual <= tol;
    let margin = if consistent { lambda } else { 0.0 };
    let verdict = if !consistent || lambda <= ZERO_TOL {
        Verdict::None
    } else if rank == d {
        Verdict::UniformlyStable
    } else if invertibility_margin > ZERO_TOL {
        Verdict::SpectrallyHyperbolic
    } else {
        Verdict::Hyperbolic
    };
    Ok(DichotomyReport {
        verdict,
        m: m_stable.max(m_unstable),
        lambda,
        residuals,
        rank,
        provenance: pf.provenance,
        growth_rate,
        decay_rate,
        margin: if verdict == Verdict::Hyperbolic {
            margin.min(invertibility_margin)
        } else {
            margin
        },
    })
}

/// One condition of the operator-level projection characterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// Distance from failing; non-positive when the condition fails.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionConditions {
    /// `||T𝒫 - 𝒫T||`.
    pub commutation: f64,
    /// Spectral radius of `T` on `Im 𝒫`.
    pub image_radius: f64,
    /// `σ_min(T|Ker 𝒫) / ||T||` (1 when `Ker 𝒫 = {0}`).
    pub left_invertibility: f64,
    /// Spectral radius of `(T|Ker 𝒫)†` (0 when `Ker 𝒫 = {0}`).
    pub kernel_dagger_radius: f64,
    /// Ranks of `Im(T^n|Ker 𝒫)`, `n = 0, 1, …` until two agree.
    pub intersection_ranks: Vec<usize>,
    pub intersection_stable: bool,
    /// Largest leakage of `Ker 𝒫 ⊖ ⋂ Im` under single-cell multiplications.
    pub leakage: f64,
    pub conditions: [ConditionCheck; 4],
}

impl ProjectionConditions {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }
}

/// Evaluates, for `T = e^{tD}` with `t = t_steps · h`, the four conditions
/// characterizing a dichotomy projection `𝒫`: commutation, `σ(T|Im 𝒫) ⊂ 𝔻`,
/// left invertibility of `T|Ker 𝒫` with `σ((T|Ker 𝒫)†) ⊂ 𝔻`, and invariance of
/// `Ker 𝒫 ⊖ ⋂_n Im(T^n|Ker 𝒫)` under multiplication by cell indicators.
pub fn check_theorem6_conditions(
    op: &BlockShiftOperator,
    proj: &CMatrix,
    t_steps: usize,
    tol: f64,
) -> Result<ProjectionConditions> {
    let t = op.power(t_steps)?.to_dense()?;
    let size = t.nrows();
    if proj.nrows() != size || proj.ncols() != size {
        return Err(Error::Dimension {
            expected: size,
            found: proj.nrows().max(proj.ncols()),
        });
    }
    let pnorm = spectral_norm(proj);
    let idem = spectral_norm(&(proj * proj - proj));
    if idem > tol * pnorm.max(1.0) {
        return Err(Error::Precondition(format!("not a projection: ||P^2 - P|| = {idem:e}")));
    }
    let tnorm = spectral_norm(&t);
    let rank_tol = RANK_TOL * tnorm.max(f64::MIN_POSITIVE);

    let commutation = spectral_norm(&(&t * proj - proj * &t));
    let c1 = ConditionCheck {
        holds: commutation <= tol * (tnorm * pnorm).max(1.0),
        margin: tol - commutation / (tnorm * pnorm).max(1.0),
    };

    let image = range_basis(proj, 0.5);
    let image_radius = if image.ncols() == 0 {
        0.0
    } else {
        spectral_radius(&(image.adjoint() * &t * &image))?
    };
    let c2 = ConditionCheck {
        holds: image_radius < 1.0,
        margin: 1.0 - image_radius,
    };

    let kernel = range_basis(&(identity(size) - proj), 0.5);
    let (left_invertibility, kernel_dagger_radius) = if kernel.ncols() == 0 {
        (1.0, 0.0)
    } else {
        let tk = &t * &kernel;
        let smin = min_singular_value(&tk);
        if smin <= rank_tol {
            (smin / tnorm.max(f64::MIN_POSITIVE), f64::INFINITY)
        } else {
            let restricted = kernel.adjoint() * &tk;
            let ev = eigenvalues(&restricted)?;
            let min_mod = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
            (smin / tnorm, 1.0 / min_mod)
        }
    };
    let c3 = ConditionCheck {
        holds: left_invertibility * tnorm > rank_tol && kernel_dagger_radius < 1.0,
        margin: if left_invertibility * tnorm > rank_tol {
            (1.0 - kernel_dagger_radius).min(left_invertibility)
        } else {
            0.0
        },
    };

    // ⋂ Im(T^n|Ker 𝒫): ranks are non-increasing, stop when two agree.
    let cap = 2 * op.cells();
    let mut ranks = vec![kernel.ncols()];
    let mut current = kernel.clone();
    let mut stable = kernel.ncols() == 0;
    while !stable && ranks.len() <= cap {
        let next = range_basis(&(&t * &current), rank_tol);
        stable = next.ncols() == current.ncols();
        ranks.push(next.ncols());
        current = next;
    }
    let intersection = current;
    // Orthogonal complement of the intersection inside Ker 𝒫.
    let complement = if kernel.ncols() == intersection.ncols() {
        CMatrix::zeros(size, 0)
    } else {
        let residual = &kernel - &intersection * (intersection.adjoint() * &kernel);
        range_basis(&residual, 1e-6)
    };
    let leakage = if complement.ncols() == 0 {
        0.0
    } else {
        let d = op.block_dim();
        let outside = identity(size) - &complement * complement.adjoint();
        (0..op.cells())
            .map(|j| {
                let mut restricted = CMatrix::zeros(size, complement.ncols());
                restricted
                    .view_mut((j * d, 0), (d, complement.ncols()))
                    .copy_from(&complement.view((j * d, 0), (d, complement.ncols())));
                spectral_norm(&(&outside * restricted))
            })
            .fold(0.0, f64::max)
    };
    let c4 = ConditionCheck {
        holds: stable && leakage <= tol,
        margin: if stable { tol - leakage } else { 0.0 },
    };

    Ok(ProjectionConditions {
        commutation,
        image_radius,
        left_invertibility,
        kernel_dagger_radius,
        intersection_ranks: ranks,
        intersection_stable: stable,
        leakage,
        conditions: [c1, c2, c3, c4],
    })
}
