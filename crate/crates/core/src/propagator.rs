//! Evolution families `U(t, s)` for `y' = A(t) y`.
//!
//! Autonomous systems go through the matrix exponential. Everything else is
//! integrated as the matrix ODE `U' = A(τ) U`, `U(s, s) = I`, with an
//! embedded Dormand–Prince 5(4) pair.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, expm, identity, spectral_norm, CMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_STEPS: usize = 2_000_000;

/// Linearly interpolated matrix samples on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    times: Vec<f64>,
    matrices: Vec<CMatrix>,
}

impl SampleTable {
    pub fn new(times: Vec<f64>, matrices: Vec<CMatrix>) -> Result<Self> {
        if times.is_empty() || times.len() != matrices.len() {
            return Err(Error::InvalidSpec(format!(
                "{} sample times for {} matrices",
                times.len(),
                matrices.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(
                "sample times must be finite and strictly increasing".into(),
            ));
        }
        Ok(SampleTable { times, matrices })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    fn lerp(t: f64, t0: f64, t1: f64, m0: &CMatrix, m1: &CMatrix) -> CMatrix {
        let w = (t - t0) / (t1 - t0);
        m0 * c(1.0 - w, 0.0) + m1 * c(w, 0.0)
    }

    /// Interpolation on `[t_0, t_last]`; `None` outside.
    fn eval_inside(&self, t: f64) -> Option<CMatrix> {
        let first = self.times[0];
        let last = *self.times.last().unwrap();
        if t < first || t > last {
            return None;
        }
        if self.times.len() == 1 {
            return Some(self.matrices[0].clone());
        }
        let k = self.times.partition_point(|&x| x <= t).clamp(1, self.times.len() - 1);
        Some(Self::lerp(
            t,
            self.times[k - 1],
            self.times[k],
            &self.matrices[k - 1],
            &self.matrices[k],
        ))
    }

    /// Interpolation of the periodic extension; `tau` must lie in `[0, period)`.
    fn eval_wrapped(&self, tau: f64, period: f64) -> CMatrix {
        if let Some(m) = self.eval_inside(tau) {
            return m;
        }
        let n = self.times.len();
        let (t_last, m_last) = (self.times[n - 1], &self.matrices[n - 1]);
        let (t_first, m_first) = (self.times[0], &self.matrices[0]);
        if tau > t_last {
            Self::lerp(tau, t_last, t_first + period, m_last, m_first)
        } else {
            Self::lerp(tau, t_last - period, t_first, m_last, m_first)
        }
    }
}

/// One harmonic of a real-period Fourier series:
/// `cos · cos(2πk t / T) + sin · sin(2πk t / T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm {
    pub harmonic: u32,
    pub cos: CMatrix,
    pub sin: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PeriodicTable {
    Fourier(Vec<FourierTerm>),
    /// Samples on `[0, period)`, interpolated linearly across the wrap.
    Samples(SampleTable),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Constant(CMatrix),
    Periodic { period: f64, table: PeriodicTable },
    Sampled(SampleTable),
}

/// Declarative description of `t ↦ A(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    dimension: usize,
    kind: SystemKind,
}

fn check_square(m: &CMatrix, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::InvalidSpec(format!(
            "expected a {d}x{d} matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !crate::linalg::is_finite(m) {
        return Err(Error::InvalidSpec("matrix has non-finite entries".into()));
    }
    Ok(())
}

impl SystemSpec {
    pub fn constant(a: CMatrix) -> Result<Self> {
        let d = a.nrows();
        if d == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        check_square(&a, d)?;
        Ok(SystemSpec {
            dimension: d,
            kind: SystemKind::Constant(a),
        })
    }

    pub fn periodic_fourier(period: f64, terms: Vec<FourierTerm>) -> Result<Self> {
        let d = terms
            .first()
            .map(|t| t.cos.nrows())
            .ok_or_else(|| Error::InvalidSpec("empty Fourier series".into()))?;
        Self::check_period(period)?;
        if d == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        for term in &terms {
            check_square(&term.cos, d)?;
            check_square(&term.sin, d)?;
        }
        Ok(SystemSpec {
            dimension: d,
            kind: SystemKind::Periodic {
                period,
                table: PeriodicTable::Fourier(terms),
            },
        })
    }

    pub fn periodic_samples(period: f64, table: SampleTable) -> Result<Self> {
        Self::check_period(period)?;
        let d = table.matrices[0].nrows();
        if d == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        for m in &table.matrices {
            check_square(m, d)?;
        }
        if table.times[0] < 0.0 || *table.times.last().unwrap() >= period {
            return Err(Error::InvalidSpec(
                "periodic sample times must lie in [0, period)".into(),
            ));
        }
        Ok(SystemSpec {
            dimension: d,
            kind: SystemKind::Periodic {
                period,
                table: PeriodicTable::Samples(table),
            },
        })
    }

    pub fn sampled(table: SampleTable) -> Result<Self> {
        let d = table.matrices[0].nrows();
        if d == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        for m in &table.matrices {
            check_square(m, d)?;
        }
        if table.times.len() < 2 {
            return Err(Error::InvalidSpec("a sampled system needs at least two samples".into()));
        }
        Ok(SystemSpec {
            dimension: d,
            kind: SystemKind::Sampled(table),
        })
    }

    fn check_period(period: f64) -> Result<()> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidSpec(format!("period must be positive, got {period}")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    /// Period of the coefficients; `None` for constant and sampled systems.
    pub fn period(&self) -> Option<f64> {
        match &self.kind {
            SystemKind::Periodic { period, .. } => Some(*period),
            _ => None,
        }
    }

    pub fn periodicity(&self) -> Periodicity {
        match &self.kind {
            SystemKind::Constant(_) => Periodicity::Any,
            SystemKind::Periodic { period, .. } => Periodicity::Period(*period),
            SystemKind::Sampled(_) => Periodicity::Aperiodic,
        }
    }

    /// Closed interval on which `A(t)` is defined.
    pub fn span(&self) -> (f64, f64) {
        match &self.kind {
            SystemKind::Sampled(tab) => (tab.times[0], *tab.times.last().unwrap()),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn eval(&self, t: f64) -> Result<CMatrix> {
        match &self.kind {
            SystemKind::Constant(a) => Ok(a.clone()),
            SystemKind::Periodic { period, table } => {
                let tau = t.rem_euclid(*period);
                Ok(match table {
                    PeriodicTable::Fourier(terms) => {
                        let omega = std::f64::consts::TAU / period;
                        let mut acc = CMatrix::zeros(self.dimension, self.dimension);
                        for term in terms {
                            let phase = omega * term.harmonic as f64 * tau;
                            acc += &term.cos * c(phase.cos(), 0.0);
                            acc += &term.sin * c(phase.sin(), 0.0);
                        }
                        acc
                    }
                    PeriodicTable::Samples(tab) => tab.eval_wrapped(tau, *period),
                })
            }
            SystemKind::Sampled(tab) => {
                let (start, end) = self.span();
                tab.eval_inside(t).ok_or(Error::OutOfSpan { t, start, end })
            }
        }
    }

    /// Times in the open interval `(s, t)` where `A` has a kink.
    fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.kind {
            SystemKind::Sampled(tab) => {
                out.extend(tab.times.iter().copied().filter(|&x| x > s && x < t));
            }
            SystemKind::Periodic {
                period,
                table: PeriodicTable::Samples(tab),
            } => {
                let mut cycle = (s / period).floor();
                loop {
                    let base = cycle * period;
                    if base >= t {
                        break;
                    }
                    out.extend(tab.times.iter().map(|x| base + x).filter(|&x| x > s && x < t));
                    cycle += 1.0;
                }
            }
            _ => {}
        }
        out
    }
}

/// Which grid windows may be closed into a circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Periodicity {
    /// Constant coefficients: every window is a period.
    Any,
    Period(f64),
    Aperiodic,
}

impl Periodicity {
    pub fn admits_window(&self, window: f64) -> bool {
        match *self {
            Periodicity::Any => true,
            Periodicity::Period(p) => {
                let k = window / p;
                k >= 0.5 && (k - k.round()).abs() <= 1e-9 * k.max(1.0)
            }
            Periodicity::Aperiodic => false,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(acc: &CMatrix, terms: &[(f64, &CMatrix)]) -> CMatrix {
    let mut out = acc.clone();
    for (w, m) in terms {
        if *w != 0.0 {
            out += *m * c(*w, 0.0);
        }
    }
    out
}

/// Integrates `U' = A(τ) U` from `s` to `t` over an interval where `A` is smooth.
fn integrate_smooth(spec: &SystemSpec, s: f64, t: f64, start: CMatrix, tol: f64) -> Result<CMatrix> {
    let span = t - s;
    if span <= 0.0 {
        return Ok(start);
    }
    let rhs = |tau: f64, y: &CMatrix| -> Result<CMatrix> { Ok(spec.eval(tau)? * y) };
    let mut y = start;
    let mut tau = s;
    let a0 = spec.eval(s)?;
    let scale = a0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut h = (0.05 / (1.0 + scale)).min(span);
    let mut k1 = rhs(tau, &y)?;
    let mut steps = 0usize;

    while tau < t {
        steps += 1;
        let min_step = 1e-14 * tau.abs().max(1.0);
        if h < min_step || steps > MAX_STEPS {
            return Err(Error::StepUnderflow { t: tau, step: h });
        }
        let last = tau + h >= t;
        if last {
            h = t - tau;
        }
        let k2 = rhs(tau + C2 * h, &axpy(&y, &[(h * A21, &k1)]))?;
        let k3 = rhs(tau + C3 * h, &axpy(&y, &[(h * A31, &k1), (h * A32, &k2)]))?;
        let k4 = rhs(
            tau + C4 * h,
            &axpy(&y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]),
        )?;
        let k5 = rhs(
            tau + C5 * h,
            &axpy(&y, &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]),
        )?;
        let k6 = rhs(
            tau + h,
            &axpy(
                &y,
                &[
                    (h * A61, &k1),
                    (h * A62, &k2),
                    (h * A63, &k3),
                    (h * A64, &k4),
                    (h * A65, &k5),
                ],
            ),
        )?;
        let y_new = axpy(
            &y,
            &[
                (h * B1, &k1),
                (h * B3, &k3),
                (h * B4, &k4),
                (h * B5, &k5),
                (h * B6, &k6),
            ],
        );
        let t_new = if last { t } else { tau + h };
        let k7 = rhs(t_new, &y_new)?;
        let err_vec = axpy(
            &CMatrix::zeros(y.nrows(), y.ncols()),
            &[
                (h * E1, &k1),
                (h * E3, &k3),
                (h * E4, &k4),
                (h * E5, &k5),
                (h * E6, &k6),
                (h * E7, &k7),
            ],
        );
        let mut err: f64 = 0.0;
        for ((e, a), b) in err_vec.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = tol * (1.0 + a.norm().max(b.norm()));
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            tau = t_new;
            y = y_new;
            k1 = k7;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(y)
}

/// `U(t, s)` for `t >= s`.
pub fn evolve(spec: &SystemSpec, s: f64, t: f64, tol: f64) -> Result<CMatrix> {
    if !(s.is_finite() && t.is_finite()) || s > t {
        return Err(Error::InvalidSpan { s, t });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let (start, end) = spec.span();
    for x in [s, t] {
        if x < start || x > end {
            return Err(Error::OutOfSpan { t: x, start, end });
        }
    }
    let d = spec.dimension();
    if s == t {
        return Ok(identity(d));
    }
    if let SystemKind::Constant(a) = spec.kind() {
        return expm(a, t - s);
    }
    let mut knots = vec![s];
    knots.extend(spec.breakpoints(s, t));
    knots.push(t);
    let mut u = identity(d);
    for w in knots.windows(2) {
        u = integrate_smooth(spec, w[0], w[1], u, tol)?;
    }
    Ok(u)
}

/// Growth constants with `||U(t, s)|| <= C e^{β (t - s)}` on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub c: f64,
    pub beta: f64,
}

/// Propagator slices on a uniform grid `x_j = x_0 + j h`, `j = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionFamily {
    x0: f64,
    step: f64,
    slices: Vec<CMatrix>,
    growth: GrowthBound,
    tol: f64,
    periodicity: Periodicity,
}

impl EvolutionFamily {
    /// Assembles a family from precomputed slices; `slices[j-1] = U(x_j, x_{j-1})`.
    pub fn from_slices(x0: f64, step: f64, slices: Vec<CMatrix>, tol: f64, periodicity: Periodicity) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::Precondition("a family needs at least one slice".into()));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Precondition(format!("grid step must be positive, got {step}")));
        }
        let d = slices[0].nrows();
        for s in &slices {
            if s.nrows() != d || s.ncols() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: s.nrows().max(s.ncols()),
                });
            }
            if !crate::linalg::is_finite(s) {
                return Err(Error::Precondition("slice has non-finite entries".into()));
            }
        }
        let mut fam = EvolutionFamily {
            x0,
            step,
            slices,
            growth: GrowthBound { c: 1.0, beta: 0.0 },
            tol,
            periodicity,
        };
        fam.growth = fam.fit_growth();
        Ok(fam)
    }

    pub fn dimension(&self) -> usize {
        self.slices[0].nrows()
    }

    /// Number of cells `N`.
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn point(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.step
    }

    pub fn window(&self) -> f64 {
        self.len() as f64 * self.step
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn growth(&self) -> GrowthBound {
        self.growth
    }

    pub fn periodicity(&self) -> Periodicity {
        self.periodicity
    }

    /// Whether the grid window closes up into a period of the coefficients.
    pub fn is_window_periodic(&self) -> bool {
        self.periodicity.admits_window(self.window())
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    /// `S_j = U(x_j, x_{j-1})` for `j` in `1..=N`.
    pub fn slice(&self, j: usize) -> &CMatrix {
        &self.slices[j - 1]
    }

    /// `U(x_j, x_i) = S_j ⋯ S_{i+1}` for `i <= j`.
    pub fn propagator(&self, i: usize, j: usize) -> CMatrix {
        assert!(i <= j && j <= self.len(), "propagator({i}, {j}) outside grid");
        let mut u = identity(self.dimension());
        for k in i + 1..=j {
            u = &self.slices[k - 1] * u;
        }
        u
    }

    /// `[U(x_i, x_i), U(x_{i+1}, x_i), …, U(x_N, x_i)]`.
    pub fn propagators_from(&self, i: usize) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(self.len() + 1 - i);
        let mut u = identity(self.dimension());
        out.push(u.clone());
        for k in i + 1..=self.len() {
            u = &self.slices[k - 1] * u;
            out.push(u.clone());
        }
        out
    }

    fn fit_growth(&self) -> GrowthBound {
        let n = self.len();
        let mut points = Vec::with_capacity((n + 1) * (n + 2) / 2);
        for i in 0..=n {
            for (offset, u) in self.propagators_from(i).iter().enumerate() {
                let norm = spectral_norm(u).max(f64::MIN_POSITIVE);
                points.push((offset as f64 * self.step, norm.ln()));
            }
        }
        let m = points.len() as f64;
        let mean_t = points.iter().map(|p| p.0).sum::<f64>() / m;
        let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
        let var = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum::<f64>();
        let cov = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum::<f64>();
        let beta = if var > 0.0 { cov / var } else { 0.0 };
        let log_c = points.iter().map(|&(t, y)| y - beta * t).fold(0.0, f64::max);
        GrowthBound { c: log_c.exp(), beta }
    }
}

/// Slices `U(x_j, x_{j-1})` on `x_j = x0 + j h`, `j = 1..=n`, built in parallel.
pub fn build_family(spec: &SystemSpec, x0: f64, h: f64, n: usize, tol: f64) -> Result<EvolutionFamily> {
    if n == 0 {
        return Err(Error::Precondition("need at least one grid cell".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Precondition(format!("grid step must be positive, got {h}")));
    }
    let point = |j: usize| x0 + j as f64 * h;
    let slices = (1..=n)
        .into_par_iter()
        .map(|j| evolve(spec, point(j - 1), point(j), tol))
        .collect::<Result<Vec<_>>>()?;
    EvolutionFamily::from_slices(x0, h, slices, tol, spec.periodicity())
}
