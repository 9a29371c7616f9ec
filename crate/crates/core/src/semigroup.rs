//! Discretized evolution semigroups `(e^{tD} f)(x) = U(x, x - t) f(x - t)` as
//! block weighted shifts, and the constructive pieces of the spectral
//! mapping argument.
//!
//! The time step of the semigroup is tied to the grid step, so `e^{hD}` is an
//! exact block shift and larger times are exact powers.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, eigenvalues, expm, identity, spectral_norm, CMatrix, CVector};
use crate::matching::pairing_distance;
use crate::propagator::EvolutionFamily;
use crate::spectrum::{unit_circle_gap, SpectrumReport};

/// Largest `N·d` handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Cell `N` is identified with cell `0`: functions on a circle.
    Cyclic,
    /// Values shifted in from outside the window are zero.
    Zero,
}

/// `(Tf)_j = W_j f_{j - stride}` on `N` cells of `d`-vectors.
///
/// Cell `j` (0-based) sits at grid point `x_{j+1}` and `W_j = U(x_{j+1}, x_{j+1-stride})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockShiftOperator {
    weights: Vec<CMatrix>,
    boundary: Boundary,
    step: f64,
    stride: usize,
    periodized: bool,
}

impl BlockShiftOperator {
    pub fn new(weights: Vec<CMatrix>, boundary: Boundary, step: f64) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Precondition(format!(
                "need at least 2 cells, got {}",
                weights.len()
            )));
        }
        let d = weights[0].nrows();
        for w in &weights {
            if w.nrows() != d || w.ncols() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: w.nrows().max(w.ncols()),
                });
            }
        }
        Ok(BlockShiftOperator {
            weights,
            boundary,
            step,
            stride: 1,
            periodized: false,
        })
    }

    pub fn cells(&self) -> usize {
        self.weights.len()
    }

    pub fn block_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn size(&self) -> usize {
        self.cells() * self.block_dim()
    }

    pub fn weights(&self) -> &[CMatrix] {
        &self.weights
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Grid step `h`; the operator realizes the semigroup at time `stride · h`.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// The circle closes a window that is not a period of the coefficients.
    pub fn is_periodized(&self) -> bool {
        self.periodized
    }

    fn source(&self, j: usize, back: usize) -> Option<usize> {
        let n = self.cells();
        match self.boundary {
            Boundary::Cyclic => Some((j + n * back.div_ceil(n).max(1) - back) % n),
            Boundary::Zero => j.checked_sub(back),
        }
    }

    pub fn apply(&self, f: &[CVector]) -> Result<Vec<CVector>> {
        if f.len() != self.cells() {
            return Err(Error::GridMismatch(format!(
                "{} cells, operator has {}",
                f.len(),
                self.cells()
            )));
        }
        let d = self.block_dim();
        Ok((0..self.cells())
            .map(|j| match self.source(j, self.stride) {
                Some(src) => &self.weights[j] * &f[src],
                None => CVector::zeros(d),
            })
            .collect())
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        let size = self.size();
        if size > DENSE_LIMIT {
            return Err(Error::SizeLimit {
                size,
                limit: DENSE_LIMIT,
            });
        }
        let d = self.block_dim();
        let mut m = CMatrix::zeros(size, size);
        for j in 0..self.cells() {
            if let Some(src) = self.source(j, self.stride) {
                m.view_mut((j * d, src * d), (d, d)).copy_from(&self.weights[j]);
            }
        }
        Ok(m)
    }

    /// `T^k`, with weights composed `k` at a time.
    pub fn power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("power must be at least 1".into()));
        }
        let d = self.block_dim();
        let weights = (0..self.cells())
            .map(|j| {
                let mut w = identity(d);
                let mut cell = Some(j);
                for _ in 0..k {
                    match cell {
                        Some(cj) => {
                            w *= &self.weights[cj];
                            cell = self.source(cj, self.stride);
                        }
                        None => return CMatrix::zeros(d, d),
                    }
                }
                w
            })
            .collect();
        Ok(BlockShiftOperator {
            weights,
            boundary: self.boundary,
            step: self.step,
            stride: self.stride * k,
            periodized: self.periodized,
        })
    }

    /// `W_{N-1} ⋯ W_0`: one trip around the circle starting after cell `N-1`.
    pub fn monodromy(&self) -> CMatrix {
        self.cyclic_product(self.cells() - 1)
    }

    /// `Π_j = W_j W_{j-1} ⋯ W_{j+1}`: the `j`-th diagonal block of `T^N` (stride 1, cyclic).
    pub fn cyclic_product(&self, j: usize) -> CMatrix {
        let n = self.cells();
        let mut p = identity(self.block_dim());
        for step in 0..n {
            p *= &self.weights[(j + n - step) % n];
        }
        p
    }
}

/// Autonomous weights on the circle `[0, 2π)`: `W_j = e^{hA}`, `h = 2π/N`.
pub fn assemble_periodic(a: &CMatrix, n: usize) -> Result<BlockShiftOperator> {
    if n < 2 {
        return Err(Error::Precondition(format!("need N >= 2, got {n}")));
    }
    let h = TAU / n as f64;
    let w = expm(a, h)?;
    BlockShiftOperator::new(vec![w; n], Boundary::Cyclic, h)
}

/// `W_j = U(x_{j+1}, x_j)` from an evolution family.
pub fn assemble_line(fam: &EvolutionFamily, boundary: Boundary) -> Result<BlockShiftOperator> {
    if boundary == Boundary::Cyclic && !fam.is_window_periodic() {
        return Err(Error::NotPeriodic(fam.window()));
    }
    BlockShiftOperator::new(fam.slices().to_vec(), boundary, fam.step())
}

/// Cyclic closure of any window; flags the result when the window is not a
/// period of the coefficients.
pub fn assemble_periodized(fam: &EvolutionFamily) -> Result<BlockShiftOperator> {
    let mut op = BlockShiftOperator::new(fam.slices().to_vec(), Boundary::Cyclic, fam.step())?;
    op.periodized = !fam.is_window_periodic();
    Ok(op)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupSpectrum {
    /// `axis_gap` here is `min |ln|λ|| / t`, the generator-level distance to the axis.
    #[serde(flatten)]
    pub report: SpectrumReport,
    /// Pairing distance between `σ(T)` and `e^{2πi/N} σ(T)`.
    pub rotation_pairing: f64,
    pub periodized: bool,
}

pub fn semigroup_spectrum(t: &BlockShiftOperator) -> Result<SemigroupSpectrum> {
    if t.boundary() != Boundary::Cyclic {
        return Err(Error::Precondition(
            "spectral verdicts need the cyclic boundary; the zero boundary is nilpotent".into(),
        ));
    }
    let eigs = eigenvalues(&t.to_dense()?)?;
    let time = t.step() * t.stride() as f64;
    let rot = Complex64::from_polar(1.0, TAU / t.cells() as f64);
    let rotated: Vec<Complex64> = eigs.iter().map(|z| z * rot).collect();
    let rotation_pairing = pairing_distance(&eigs, &rotated);
    let axis = eigs
        .iter()
        .map(|z| {
            if z.norm() == 0.0 {
                f64::INFINITY
            } else {
                z.norm().ln().abs() / time
            }
        })
        .fold(f64::INFINITY, f64::min);
    Ok(SemigroupSpectrum {
        report: SpectrumReport {
            unit_circle_gap: unit_circle_gap(&eigs),
            axis_gap: axis,
            pairing_distance: Some(rotation_pairing),
            eigenvalues: eigs,
        },
        rotation_pairing,
        periodized: t.is_periodized(),
    })
}

/// Samples of a vector-valued function on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<CVector>,
    pub step: f64,
    pub p: f64,
}

impl GridFunction {
    /// `(h Σ ||f_j||^p)^{1/p}`.
    pub fn norm(&self) -> f64 {
        lp_norm(&self.values, self.step, self.p)
    }
}

pub fn lp_norm(values: &[CVector], step: f64, p: f64) -> f64 {
    (step * values.iter().map(|v| v.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Piecewise-linear cutoff: 0 on `[0, 2π/3)`, rising linearly to 1 at `4π/3`, then 1.
pub fn cutoff(x: f64) -> f64 {
    let lo = TAU / 3.0;
    let hi = 2.0 * TAU / 3.0;
    if x < lo {
        0.0
    } else if x < hi {
        3.0 / TAU * x - 1.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct EigenfunctionWitness {
    pub f: GridFunction,
    pub norm_f: f64,
    pub residual_bf: f64,
    /// `ε = ||e^{2πA} y - y||` for the normalized `y`.
    pub defect: f64,
    /// `max_j ||e^{x_j A}||` over the grid.
    pub growth_max: f64,
}

/// Near-eigenfunction of `B = -d/dx + A` at 0 on the circle built from a near
/// fixed vector `y` of `e^{2πA}`:
/// `f(x) = (1 - ρ(x)) e^{(2π + x)A} y + ρ(x) e^{xA} y`.
///
/// `B` is discretized with periodic central differences.
pub fn approximate_eigenfunction(a: &CMatrix, y: &CVector, n: usize, p: f64) -> Result<EigenfunctionWitness> {
    if n < 3 {
        return Err(Error::Precondition(format!("need N >= 3, got {n}")));
    }
    if y.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            found: y.len(),
        });
    }
    let ynorm = y.norm();
    if ynorm == 0.0 {
        return Err(Error::Precondition("y must be nonzero".into()));
    }
    let y = y / c(ynorm, 0.0);
    let h = TAU / n as f64;
    let period = expm(a, TAU)?;
    let shifted_y = &period * &y;
    let defect = (&shifted_y - &y).norm();

    let mut growth_max: f64 = 0.0;
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let x = j as f64 * h;
        let ex = expm(a, x)?;
        growth_max = growth_max.max(spectral_norm(&ex));
        let rho = cutoff(x);
        let v = &ex * (&shifted_y * c(1.0 - rho, 0.0) + &y * c(rho, 0.0));
        values.push(v);
    }
    let bf: Vec<CVector> = (0..n)
        .map(|j| {
            let next = &values[(j + 1) % n];
            let prev = &values[(j + n - 1) % n];
            let derivative = (next - prev) / c(2.0 * h, 0.0);
            a * &values[j] - derivative
        })
        .collect();
    let f = GridFunction { values, step: h, p };
    Ok(EigenfunctionWitness {
        norm_f: f.norm(),
        residual_bf: lp_norm(&bf, h, p),
        f,
        defect,
        growth_max,
    })
}

/// Checks `J e^{tB} = (I ⊗ e^{tD}) J` on a doubly periodic sample `h(s_i, x_j)`,
/// where `(e^{tB}h)(s, x) = U(x, x - t) h(s - t, x - t)` and `(Jh)(s, x) = h(s + x, x)`.
///
/// `sample[i][j]` is the value at `(s_i, x_{j+1})`, both grids share the step
/// `h`, and `t = steps · h`. The shear wraps consistently only when the `s`
/// period divides the `x` period, so `M` must divide `N`.
pub fn change_of_variables_check(fam: &EvolutionFamily, sample: &[Vec<CVector>], steps: usize) -> Result<f64> {
    let n = fam.len();
    let m = sample.len();
    let d = fam.dimension();
    if steps == 0 {
        return Err(Error::Precondition(
            "t must be a positive multiple of the grid step".into(),
        ));
    }
    if m == 0
        || sample
            .iter()
            .any(|row| row.len() != n || row.iter().any(|v| v.len() != d))
    {
        return Err(Error::GridMismatch(format!(
            "sample must be M x {n} cells of {d}-vectors"
        )));
    }
    if !n.is_multiple_of(m) {
        return Err(Error::GridMismatch(format!(
            "s-grid size {m} must divide x-grid size {n}"
        )));
    }
    let shift = assemble_line(fam, Boundary::Cyclic)?.power(steps)?;
    let weight = |j: usize| &shift.weights()[j];
    let back = |j: usize, k: usize, len: usize| (j + len * k.div_ceil(len).max(1) - k) % len;

    // e^{tB} first, then J.
    let evolved: Vec<Vec<CVector>> = (0..m)
        .map(|i| {
            (0..n)
                .map(|j| weight(j) * &sample[back(i, steps, m)][back(j, steps, n)])
                .collect()
        })
        .collect();
    let lhs = |i: usize, j: usize| &evolved[(i + j) % m][j];

    // J first, then I ⊗ e^{tD}.
    let sheared: Vec<Vec<CVector>> = (0..m)
        .map(|i| (0..n).map(|j| sample[(i + j) % m][j].clone()).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for (i, row) in sheared.iter().enumerate() {
        for j in 0..n {
            let rhs = weight(j) * &row[back(j, steps, n)];
            worst = worst.max((lhs(i, j) - rhs).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, real_matrix};
    use crate::propagator::{build_family, SystemSpec};
    use std::f64::consts::PI;

    fn sorted_moduli(ev: &[Complex64]) -> Vec<f64> {
        let mut m: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
        m.sort_by(|a, b| a.total_cmp(b));
        m
    }

    #[test]
    fn zero_generator_is_plain_cyclic_shift() {
        let t = assemble_periodic(&CMatrix::zeros(2, 2), 4).unwrap();
        let ev = eigenvalues(&t.to_dense().unwrap()).unwrap();
        let roots: Vec<Complex64> = (0..4)
            .flat_map(|k| {
                let z = Complex64::from_polar(1.0, TAU * k as f64 / 4.0);
                [z, z]
            })
            .collect();
        assert!(pairing_distance(&ev, &roots) < 1e-12);
        let spec = semigroup_spectrum(&t).unwrap();
        assert!(spec.report.unit_circle_gap < 1e-12);
    }

    #[test]
    fn two_cell_saddle_spectrum() {
        let t = assemble_periodic(&diag(&[-1.0, 2.0]), 2).unwrap();
        let ev = eigenvalues(&t.to_dense().unwrap()).unwrap();
        let a = (-PI).exp();
        let b = (2.0 * PI).exp();
        let want = [c(a, 0.0), c(-a, 0.0), c(b, 0.0), c(-b, 0.0)];
        assert!(pairing_distance(&ev, &want) < 1e-9 * b);
        // λ² ∈ σ(e^{2πA}) by direct check.
        let mono = eigenvalues(&expm(&diag(&[-1.0, 2.0]), TAU).unwrap()).unwrap();
        for z in ev {
            let sq = z * z;
            assert!(mono.iter().any(|m| (m - sq).norm() < 1e-8 * m.norm().max(1.0)));
        }
    }

    #[test]
    fn nth_power_is_block_diagonal_period_map() {
        let a = real_matrix(&[&[0.1, -0.8], &[0.6, -0.3]]);
        let t = assemble_periodic(&a, 6).unwrap();
        let tn = t.power(6).unwrap();
        let period = expm(&a, TAU).unwrap();
        let dense = tn.to_dense().unwrap();
        for j in 0..6 {
            for k in 0..6 {
                let block = dense.view((2 * j, 2 * k), (2, 2)).into_owned();
                let want = if j == k { period.clone() } else { CMatrix::zeros(2, 2) };
                assert!((block - want).norm() < 1e-12);
            }
        }
        let dense_pow = t.to_dense().unwrap().pow(6);
        assert!((dense_pow - dense).norm() < 1e-12);
    }

    #[test]
    fn saddle_gap_on_eight_cells() {
        let t = assemble_periodic(&diag(&[-1.0, 2.0]), 8).unwrap();
        let s = semigroup_spectrum(&t).unwrap();
        let want = 1.0 - (-PI / 4.0).exp();
        assert!((s.report.unit_circle_gap - want).abs() < 1e-10);
        let moduli = sorted_moduli(&s.report.eigenvalues);
        for (k, m) in moduli.iter().enumerate() {
            let target = if k < 8 { (-PI / 4.0).exp() } else { (PI / 2.0).exp() };
            assert!((m - target).abs() < 1e-10);
        }
        assert!(s.rotation_pairing < 1e-8);
        assert!((s.report.axis_gap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rotation_generator_sits_on_circle() {
        let t = assemble_periodic(&real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]]), 8).unwrap();
        assert!(semigroup_spectrum(&t).unwrap().report.unit_circle_gap <= 1e-8);
    }

    #[test]
    fn zero_boundary_is_nilpotent() {
        let spec = SystemSpec::constant(diag(&[-1.0, 2.0])).unwrap();
        let fam = build_family(&spec, 0.0, 0.25, 6, 1e-10).unwrap();
        let t = assemble_line(&fam, Boundary::Zero).unwrap();
        let dense = t.to_dense().unwrap();
        assert!(dense.pow(6).norm() == 0.0);
        assert!(dense.pow(5).norm() > 0.0);
        assert!(semigroup_spectrum(&t).is_err());
    }

    #[test]
    fn constant_line_assembly_matches_periodic() {
        let a = diag(&[-1.0, 2.0]);
        let spec = SystemSpec::constant(a.clone()).unwrap();
        let fam = build_family(&spec, 0.0, TAU / 8.0, 8, 1e-10).unwrap();
        let line = assemble_line(&fam, Boundary::Cyclic).unwrap();
        let per = assemble_periodic(&a, 8).unwrap();
        assert!((line.to_dense().unwrap() - per.to_dense().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn cyclic_requires_periodic_window() {
        let spec = crate::gallery::vinograd(1.5);
        let fam = build_family(&spec, 0.0, 0.5, 5, 1e-10).unwrap();
        assert!(matches!(
            assemble_line(&fam, Boundary::Cyclic),
            Err(Error::NotPeriodic(_))
        ));
        let op = assemble_periodized(&fam).unwrap();
        assert!(op.is_periodized());
    }

    #[test]
    fn size_cap() {
        let t = BlockShiftOperator::new(vec![identity(2); 2001], Boundary::Cyclic, 0.1).unwrap();
        assert!(matches!(t.to_dense(), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn cyclic_blocks_are_similar() {
        let ws: Vec<CMatrix> = (0..4)
            .map(|k| real_matrix(&[&[1.0 + k as f64 * 0.1, 0.3], &[-0.2, 0.7 - 0.05 * k as f64]]))
            .collect();
        let t = BlockShiftOperator::new(ws.clone(), Boundary::Cyclic, 0.1).unwrap();
        let tn = t.to_dense().unwrap().pow(4);
        for j in 0..4 {
            let block = tn.view((2 * j, 2 * j), (2, 2)).into_owned();
            assert!((block - t.cyclic_product(j)).norm() < 1e-12);
        }
        // Π_0 = W_0 Π_3 W_0^{-1}.
        let w0 = &ws[0];
        let conj = w0 * t.cyclic_product(3) * w0.clone().try_inverse().unwrap();
        assert!((conj - t.cyclic_product(0)).norm() < 1e-12);
    }

    #[test]
    fn cutoff_breakpoints() {
        assert_eq!(cutoff(0.0), 0.0);
        assert_eq!(cutoff(TAU / 3.0 - 1e-9), 0.0);
        assert!((cutoff(TAU / 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(cutoff(2.0 * TAU / 3.0), 1.0);
    }

    #[test]
    fn exact_fixed_vector_gives_second_order_residual() {
        let j = real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let y = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let r1 = approximate_eigenfunction(&j, &y, 128, 2.0).unwrap();
        let r2 = approximate_eigenfunction(&j, &y, 256, 2.0).unwrap();
        assert!(r1.defect < 1e-12);
        let order = (r1.residual_bf / r2.residual_bf).log2();
        assert!((order - 2.0).abs() < 0.05, "observed order {order}");
    }

    #[test]
    fn change_of_variables_is_exact_for_zero_generator() {
        let spec = SystemSpec::constant(CMatrix::zeros(2, 2)).unwrap();
        let fam = build_family(&spec, 0.0, 0.5, 6, 1e-10).unwrap();
        let sample: Vec<Vec<CVector>> = (0..3)
            .map(|i| {
                (0..6)
                    .map(|j| CVector::from_vec(vec![c(i as f64, j as f64), c(1.0, -1.0)]))
                    .collect()
            })
            .collect();
        assert_eq!(change_of_variables_check(&fam, &sample, 2).unwrap(), 0.0);
        let zeros = vec![vec![CVector::zeros(2); 6]; 6];
        assert_eq!(change_of_variables_check(&fam, &zeros, 1).unwrap(), 0.0);
        assert!(change_of_variables_check(
            &fam,
            &sample[..1].iter().map(|r| r[..3].to_vec()).collect::<Vec<_>>(),
            1
        )
        .is_err());
        let five = vec![vec![CVector::zeros(2); 6]; 5];
        assert!(matches!(
            change_of_variables_check(&fam, &five, 1),
            Err(Error::GridMismatch(_))
        ));
    }
}
