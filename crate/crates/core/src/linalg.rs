//! Dense complex linear algebra shared by every analysis module.
//!
//! All matrices are `DMatrix<Complex64>`; real inputs are embedded. Norms are
//! spectral (operator 2-) norms unless a function says otherwise. Singular
//! value and eigenvalue decompositions are delegated to `faer`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a complex matrix from real rows.
pub fn real_matrix(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

pub fn diag(entries: &[f64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c(entries[i], 0.0) } else { ZERO })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn to_faer(m: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin singular value decomposition `M = U diag(s) V*`, `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let (rows, cols) = m.shape();
        let k = rows.min(cols);
        if k == 0 {
            return Ok(Svd {
                u: CMatrix::zeros(rows, 0),
                s: Vec::new(),
                v: CMatrix::zeros(cols, 0),
            });
        }
        if !is_finite(m) {
            return Err(Error::Precondition("matrix has non-finite entries".into()));
        }
        let svd = to_faer(m)
            .thin_svd()
            .map_err(|_| Error::NoConvergence("singular value decomposition"))?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re));
        Ok(Svd {
            u: CMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]),
            s: order.iter().map(|&j| s[j].re).collect(),
            v: CMatrix::from_fn(cols, k, |i, j| v[(i, order[j])]),
        })
    }
}

/// Singular values in descending order; empty for non-finite input.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    match to_faer(m).singular_values() {
        Ok(mut s) if is_finite(m) => {
            s.sort_by(|a, b| b.total_cmp(a));
            s
        }
        _ => vec![f64::NAN],
    }
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value of an `m x n` matrix with `m >= n`; this is the
/// left-invertibility margin `inf ||Mv|| / ||v||`.
pub fn min_singular_value(m: &CMatrix) -> f64 {
    if m.ncols() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// All eigenvalues, with multiplicity.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if !is_finite(m) {
        return Err(Error::Precondition("matrix has non-finite entries".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    to_faer(m)
        .eigenvalues()
        .map_err(|_| Error::NoConvergence("eigenvalue decomposition"))
}

pub fn spectral_radius(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// 1-norm thresholds below which the degree-m diagonal approximant is accurate
// to unit roundoff (Higham 2005, Table 10.2).
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

/// `e^{tM}` by scaling and squaring with a diagonal Padé approximant.
pub fn expm(m: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension {
            expected: n,
            found: m.ncols(),
        });
    }
    let a = m * c(t, 0.0);
    if !is_finite(&a) {
        return Err(Error::Range { norm: f64::INFINITY });
    }
    let norm = one_norm(&a);
    if norm > 1e6 {
        return Err(Error::Range { norm });
    }
    for &(deg, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(&a, coeffs);
        }
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = &a * c(2f64.powi(-s), 0.0);
    let mut x = pade13(&scaled)?;
    for _ in 0..s {
        x = &x * &x;
    }
    if !is_finite(&x) {
        return Err(Error::Range { norm });
    }
    Ok(x)
}

fn solve_pade(u: CMatrix, v: CMatrix) -> Result<CMatrix> {
    let lhs = &v - &u;
    let rhs = &v + &u;
    lhs.lu().solve(&rhs).ok_or(Error::Range { norm: f64::INFINITY })
}

fn pade_low(a: &CMatrix, b: &[f64]) -> Result<CMatrix> {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = identity(n) * c(b[0], 0.0);
    let mut odd = identity(n) * c(b[1], 0.0);
    let mut pow = identity(n);
    let mut k = 2;
    while k < b.len() {
        pow = &pow * &a2;
        even += &pow * c(b[k], 0.0);
        if k + 1 < b.len() {
            odd += &pow * c(b[k + 1], 0.0);
        }
        k += 2;
    }
    let u = a * odd;
    solve_pade(u, even)
}

fn pade13(a: &CMatrix) -> Result<CMatrix> {
    let b = |k: usize| c(PADE13[k], 0.0);
    let n = a.nrows();
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = a * (inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let inner_v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    solve_pade(u, v)
}

/// Householder QR with column-norm pivoting, `M P = Q R`.
///
/// The diagonal of `R` is non-increasing in modulus, which makes its trailing
/// entries a usable rank indicator.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Thin `m x k` factor with orthonormal columns, `k = min(m, n)`.
    pub q: CMatrix,
    /// `k x n` upper-trapezoidal factor.
    pub r: CMatrix,
    /// `perm[j]` is the original column stored in position `j`.
    pub perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let k = rows.min(cols);
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm_squared()).collect();
        let mut reflectors: Vec<CVector> = Vec::with_capacity(k);

        for step in 0..k {
            let (best, _) =
                norms
                    .iter()
                    .enumerate()
                    .skip(step)
                    .fold((step, -1.0), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
            if best != step {
                a.swap_columns(step, best);
                perm.swap(step, best);
                norms.swap(step, best);
            }
            let x = a.view((step, step), (rows - step, 1)).column(0).into_owned();
            let alpha = x.norm();
            let mut v = x.clone();
            if alpha > 0.0 {
                let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
                v[0] += phase * alpha;
                let vn = v.norm();
                v /= c(vn, 0.0);
                let mut block = a.view_mut((step, step), (rows - step, cols - step));
                let w = v.adjoint() * &block;
                block -= (&v * w) * c(2.0, 0.0);
            } else {
                v.fill(ZERO);
            }
            reflectors.push(v);
            for (j, norm) in norms.iter_mut().enumerate().skip(step + 1) {
                *norm = a.view((step + 1, j), (rows - step - 1, 1)).norm_squared();
            }
        }

        let r = CMatrix::from_fn(k, cols, |i, j| if i <= j { a[(i, j)] } else { ZERO });
        let mut q = CMatrix::from_fn(rows, k, |i, j| if i == j { ONE } else { ZERO });
        for (step, v) in reflectors.iter().enumerate().rev() {
            let mut block = q.view_mut((step, 0), (rows - step, k));
            let w = v.adjoint() * &block;
            block -= (v * w) * c(2.0, 0.0);
        }
        PivotedQr { q, r, perm }
    }

    /// Moduli of the diagonal of `R`, non-increasing.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.r.nrows()).map(|i| self.r[(i, i)].norm()).collect()
    }
}

/// Orthonormal basis of the column space, keeping singular directions above `abs_tol`.
pub fn range_basis(m: &CMatrix, abs_tol: f64) -> CMatrix {
    let rows = m.nrows();
    let Ok(svd) = Svd::new(m) else {
        return CMatrix::zeros(rows, 0);
    };
    let keep = svd.s.iter().take_while(|&&s| s > abs_tol).count();
    svd.u.columns(0, keep).into_owned()
}

/// Orthonormal basis of the orthogonal complement of span(`basis`) in C^n.
/// `basis` must have orthonormal columns.
pub fn complement_basis(basis: &CMatrix, n: usize) -> CMatrix {
    if basis.ncols() == 0 {
        return identity(n);
    }
    let proj = identity(n) - basis * basis.adjoint();
    range_basis(&proj, 0.5)
}

/// Rank of a (possibly oblique) projection: its nonzero singular values are all >= 1.
pub fn projection_rank(p: &CMatrix) -> usize {
    singular_values(p).iter().filter(|&&s| s > 0.5).count()
}

pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&CMatrix::zeros(2, 2), 5.0).unwrap();
        assert_eq!(e, identity(2));
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&diag(&[-1.0, 2.0]), 1.0).unwrap();
        let want = diag(&[(-1f64).exp(), 2f64.exp()]);
        assert!(max_abs_diff(&e, &want) <= 1e-12 * 2f64.exp());
    }

    #[test]
    fn expm_rotation_by_pi() {
        let j = real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let e = expm(&j, PI).unwrap();
        assert!(max_abs_diff(&e, &(-identity(2))) < 1e-14);
    }

    #[test]
    fn expm_large_norm_relative_accuracy() {
        // ||tM|| = 50: diagonal similarity keeps the exact answer available.
        let d = diag(&[-50.0, 20.0, 3.5]);
        let e = expm(&d, 1.0).unwrap();
        for (i, v) in [-50.0f64, 20.0, 3.5].iter().enumerate() {
            assert!((e[(i, i)].re - v.exp()).abs() <= 1e-12 * v.exp());
        }
        let j = real_matrix(&[&[0.0, -50.0], &[50.0, 0.0]]);
        let e = expm(&j, 1.0).unwrap();
        let want = real_matrix(&[&[50f64.cos(), -50f64.sin()], &[50f64.sin(), 50f64.cos()]]);
        assert!(max_abs_diff(&e, &want) < 1e-12);
    }

    #[test]
    fn expm_overflow_is_range_error() {
        let err = expm(&diag(&[1.0]), 1e8).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
        let err = expm(&diag(&[800.0]), 1.0).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
    }

    #[test]
    fn expm_semigroup_law() {
        let a = real_matrix(&[&[0.3, -1.2, 0.4], &[0.9, -0.7, 0.1], &[-0.5, 0.2, 0.05]]);
        let ab = expm(&a, 1.7).unwrap();
        let prod = expm(&a, 0.6).unwrap() * expm(&a, 1.1).unwrap();
        assert!(max_abs_diff(&ab, &prod) < 1e-13);
    }

    #[test]
    fn eigenvalues_of_simple_matrices() {
        let mut ev = eigenvalues(&diag(&[-1.0, 2.0])).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((ev[1] - c(2.0, 0.0)).norm() < 1e-14);

        let mut ev = eigenvalues(&real_matrix(&[&[0.0, -1.0], &[1.0, 0.0]])).unwrap();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_reject_nonfinite() {
        let m = diag(&[f64::NAN, 1.0]);
        assert!(eigenvalues(&m).is_err());
    }

    #[test]
    fn pivoted_qr_reconstructs_and_orders_pivots() {
        let m = CMatrix::from_fn(6, 4, |i, j| {
            c((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0)
        });
        let qr = PivotedQr::new(&m);
        let qhq = qr.q.adjoint() * &qr.q;
        assert!(max_abs_diff(&qhq, &identity(4)) < 1e-13);
        let mut mp = CMatrix::zeros(6, 4);
        for (pos, &orig) in qr.perm.iter().enumerate() {
            mp.set_column(pos, &m.column(orig));
        }
        assert!(max_abs_diff(&(&qr.q * &qr.r), &mp) < 1e-12);
        let piv = qr.pivots();
        assert!(piv.windows(2).all(|w| w[0] + 1e-12 >= w[1]));
    }

    #[test]
    fn projection_rank_counts_unit_singular_values() {
        let p = real_matrix(&[&[1.0, 5.0], &[0.0, 0.0]]);
        assert_eq!(projection_rank(&p), 1);
        assert_eq!(projection_rank(&identity(3)), 3);
        assert_eq!(projection_rank(&CMatrix::zeros(3, 3)), 0);
    }

    #[test]
    fn complement_basis_is_orthogonal() {
        let b = range_basis(&real_matrix(&[&[1.0], &[1.0], &[0.0]]), 1e-12);
        let comp = complement_basis(&b, 3);
        assert_eq!(comp.ncols(), 2);
        assert!((b.adjoint() * &comp).norm() < 1e-14);
    }
}
