//! Spectra of a generator `A` and of `e^{tA}`: the spectral mapping identity,
//! resolvent norms along the imaginary axis and the Fourier-multiplier bound
//! for periodic `L_p` functions.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, eigenvalues, expm, identity, min_singular_value, spectral_norm, CMatrix, CVector, I};
use crate::matching::pairing_distance;
use crate::serde_util;

/// On-axis threshold, relative to `||A||`.
pub const AXIS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    #[serde(with = "serde_util::complex_vec")]
    pub eigenvalues: Vec<Complex64>,
    pub unit_circle_gap: f64,
    pub axis_gap: f64,
    pub pairing_distance: Option<f64>,
}

/// `min |1 - |λ||`; zero exactly when some eigenvalue lies on the unit circle.
pub fn unit_circle_gap(eigs: &[Complex64]) -> f64 {
    eigs.iter()
        .map(|z| (1.0 - z.norm()).abs())
        .fold(f64::INFINITY, f64::min)
}

/// `min |Re λ|`; zero exactly when some eigenvalue lies on the imaginary axis.
pub fn axis_gap(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min)
}

/// Compares `σ(e^{tA})` with `exp(t σ(A))` as multisets.
pub fn spectral_mapping_check(a: &CMatrix, t: f64) -> Result<SpectrumReport> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Precondition(format!(
            "spectral mapping needs finite t != 0, got {t}"
        )));
    }
    let gen = eigenvalues(a)?;
    let semigroup = eigenvalues(&expm(a, t)?)?;
    let mapped: Vec<Complex64> = gen.iter().map(|z| (z * t).exp()).collect();
    Ok(SpectrumReport {
        unit_circle_gap: unit_circle_gap(&semigroup),
        axis_gap: axis_gap(&gen),
        pairing_distance: Some(pairing_distance(&semigroup, &mapped)),
        eigenvalues: semigroup,
    })
}

fn shifted(a: &CMatrix, xi: f64) -> CMatrix {
    a - identity(a.nrows()) * (I * xi)
}

/// `||(A - iξ)^{-1}||` for each `ξ`; entries where `iξ` meets the spectrum are errors.
pub fn resolvent_norm_on_axis(a: &CMatrix, xi_values: &[f64]) -> Vec<Result<f64>> {
    let scale = spectral_norm(a).max(1.0);
    xi_values
        .iter()
        .map(|&xi| {
            let smin = min_singular_value(&shifted(a, xi));
            if smin <= 1e-14 * (scale + xi.abs()) {
                Err(Error::Precondition(format!("i·{xi} lies in the spectrum")))
            } else {
                Ok(1.0 / smin)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreinerConfig {
    pub trials: usize,
    /// Frequencies `|k| <= k_max`.
    pub k_max: usize,
    pub p: f64,
    /// Quadrature nodes on `[0, 2π)`.
    pub grid: usize,
}

impl Default for GreinerConfig {
    fn default() -> Self {
        GreinerConfig {
            trials: 100,
            k_max: 8,
            p: 2.0,
            grid: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreinerEstimate {
    /// Largest observed ratio: a lower estimate of the best constant.
    pub constant: f64,
    /// `max_k ||(A - ik)^{-1}||`, attained by the single-mode probes.
    pub single_mode_max: f64,
    /// `Σ_k ||(A - ik)^{-1}||`, a rigorous upper bound for every `p`.
    pub triangle_bound: f64,
    pub evaluations: usize,
}

/// `L_p([0, 2π); C^d)` norm of `x ↦ Σ_k y_k e^{-ikx}` by the trapezoid rule.
pub fn trig_poly_lp_norm(coeffs: &[(i64, CVector)], p: f64, grid: usize) -> f64 {
    let dx = std::f64::consts::TAU / grid as f64;
    let d = coeffs.first().map_or(0, |(_, y)| y.len());
    let mut acc = 0.0;
    for j in 0..grid {
        let x = j as f64 * dx;
        let mut v = CVector::zeros(d);
        for (k, y) in coeffs {
            v += y * Complex64::from_polar(1.0, -(*k as f64) * x);
        }
        acc += v.norm().powf(p);
    }
    (dx * acc).powf(1.0 / p)
}

/// Monte-Carlo lower estimate of the constant `C` in
/// `||Σ (A - ik)^{-1} y_k e^{-ikx}||_p <= C ||Σ y_k e^{-ikx}||_p`.
///
/// The trials start with one single-mode probe per frequency along the top
/// singular direction of the resolvent, so the estimate is never below
/// `max_k ||(A - ik)^{-1}||`.
pub fn greiner_inequality_check<R: Rng + ?Sized>(
    a: &CMatrix,
    cfg: &GreinerConfig,
    rng: &mut R,
) -> Result<GreinerEstimate> {
    if !(cfg.p >= 1.0 && cfg.p.is_finite()) || cfg.grid < 2 * cfg.k_max + 2 {
        return Err(Error::Precondition(format!(
            "need 1 <= p < ∞ and grid > 2K+1, got p = {}, grid = {}",
            cfg.p, cfg.grid
        )));
    }
    let d = a.nrows();
    let kk = cfg.k_max as i64;
    let scale = spectral_norm(a).max(1.0);
    let mut resolvents = Vec::new();
    for k in -kk..=kk {
        let m = shifted(a, k as f64);
        if min_singular_value(&m) <= 1e-12 * (scale + k.unsigned_abs() as f64) {
            return Err(Error::Precondition(format!("i·{k} lies in the spectrum of A")));
        }
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Precondition(format!("A - i·{k} is singular")))?;
        resolvents.push((k, inv));
    }
    let norms: Vec<f64> = resolvents.iter().map(|(_, r)| spectral_norm(r)).collect();
    let single_mode_max = norms.iter().copied().fold(0.0, f64::max);
    let triangle_bound = norms.iter().sum();

    let ratio = |ys: &[(i64, CVector)]| -> f64 {
        let mapped: Vec<(i64, CVector)> = ys
            .iter()
            .map(|(k, y)| (*k, &resolvents[(*k + kk) as usize].1 * y))
            .collect();
        let den = trig_poly_lp_norm(ys, cfg.p, cfg.grid);
        if den == 0.0 {
            0.0
        } else {
            trig_poly_lp_norm(&mapped, cfg.p, cfg.grid) / den
        }
    };

    let mut best: f64 = 0.0;
    let mut evaluations = 0;
    for (k, r) in &resolvents {
        let y: CVector = crate::linalg::Svd::new(r)?.v.column(0).into_owned();
        best = best.max(ratio(&[(*k, y)]));
        evaluations += 1;
    }
    for _ in 0..cfg.trials {
        let ys: Vec<(i64, CVector)> = (-kk..=kk)
            .map(|k| {
                let y = CVector::from_fn(d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                (k, y)
            })
            .collect();
        best = best.max(ratio(&ys));
        evaluations += 1;
    }
    Ok(GreinerEstimate {
        constant: best,
        single_mode_max,
        triangle_bound,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisVerdict {
    Stable,
    Hyperbolic,
    OnAxis,
}

/// Classifies `σ(A)` against the imaginary axis; returns the verdict and `min |Re λ|`.
pub fn hyperbolicity_verdict(a: &CMatrix) -> Result<(AxisVerdict, f64)> {
    let eigs = eigenvalues(a)?;
    let gap = axis_gap(&eigs);
    let threshold = AXIS_TOL * spectral_norm(a);
    let verdict = if gap <= threshold {
        AxisVerdict::OnAxis
    } else if eigs.iter().all(|z| z.re < 0.0) {
        AxisVerdict::Stable
    } else {
        AxisVerdict::Hyperbolic
    };
    Ok((verdict, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, real_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn spectral_mapping_examples() {
        let r = spectral_mapping_check(&diag(&[-1.0, 2.0]), 1.0).unwrap();
        assert!(r.pairing_distance.unwrap() < 1e-12);
        assert!((r.axis_gap - 1.0).abs() < 1e-14);

        let j = real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let r = spectral_mapping_check(&j, PI).unwrap();
        for z in &r.eigenvalues {
            assert!((z - c(-1.0, 0.0)).norm() < 1e-7);
        }
        assert!(r.pairing_distance.unwrap() < 1e-7);
        assert!(r.unit_circle_gap < 1e-12);
        assert!(spectral_mapping_check(&j, 0.0).is_err());
    }

    #[test]
    fn resolvent_norms() {
        let a = diag(&[-1.0, 2.0]);
        let r = resolvent_norm_on_axis(&a, &[0.0, 10.0, 100.0]);
        assert!((r[0].as_ref().unwrap() - 1.0).abs() < 1e-14);
        assert!((r[1].as_ref().unwrap() - 1.0 / 101f64.sqrt()).abs() < 1e-14);
        assert!(*r[2].as_ref().unwrap() <= 1.0 / (100.0 - 2.0));
    }

    #[test]
    fn resolvent_flags_spectral_points_individually() {
        let j = real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let r = resolvent_norm_on_axis(&j, &[1.0, 0.5, -1.0]);
        assert!(r[0].is_err());
        assert!((r[1].as_ref().unwrap() - 2.0).abs() < 1e-12);
        assert!(r[2].is_err());
    }

    #[test]
    fn verdicts() {
        assert_eq!(
            hyperbolicity_verdict(&diag(&[-1.0, 2.0])).unwrap(),
            (AxisVerdict::Hyperbolic, 1.0)
        );
        let (v, g) = hyperbolicity_verdict(&real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(v, AxisVerdict::OnAxis);
        assert!(g < 1e-15);
        let (v, g) = hyperbolicity_verdict(&diag(&[-3.0, -1.0])).unwrap();
        assert_eq!(v, AxisVerdict::Stable);
        assert!((g - 1.0).abs() < 1e-14);
        assert_eq!(
            hyperbolicity_verdict(&CMatrix::zeros(2, 2)).unwrap().0,
            AxisVerdict::OnAxis
        );
    }

    #[test]
    fn greiner_single_frequency() {
        let a = real_matrix(&[&[-1.0, 0.5], &[0.2, 2.0]]);
        let cfg = GreinerConfig {
            trials: 0,
            k_max: 0,
            p: 1.5,
            grid: 64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = greiner_inequality_check(&a, &cfg, &mut rng).unwrap();
        let inv_norm = spectral_norm(&a.clone().try_inverse().unwrap());
        assert!((est.constant - inv_norm).abs() < 1e-12);
    }

    #[test]
    fn greiner_parseval_case() {
        let a = diag(&[-1.0, 2.0]);
        let cfg = GreinerConfig {
            trials: 50,
            k_max: 8,
            p: 2.0,
            grid: 256,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = greiner_inequality_check(&a, &cfg, &mut rng).unwrap();
        assert!((est.single_mode_max - 1.0).abs() < 1e-14);
        assert!((est.constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greiner_rejects_integer_eigenvalues() {
        let a = real_matrix(&[&[0.0, -3.0], &[3.0, 0.0]]);
        let cfg = GreinerConfig {
            trials: 1,
            k_max: 4,
            p: 2.0,
            grid: 64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = greiner_inequality_check(&a, &cfg, &mut rng).unwrap_err();
        assert!(err.to_string().contains("3"), "{err}");
    }
}
