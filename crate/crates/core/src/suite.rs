//! End-to-end equivalence checks on finite-dimensional systems and the curated
//! gallery run.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dichotomy::{monodromy, riesz_family, verify_dichotomy, DichotomyReport, DEGENERATE_TOL, ZERO_TOL};
use crate::error::{Error, Result};
use crate::gallery::{gallery, ExpectedClass, GallerySystem, Oracle, Quantity};
use crate::linalg::{eigenvalues, expm, min_singular_value, spectral_norm, CMatrix, CVector};
use crate::propagator::{build_family, EvolutionFamily, SystemKind, SystemSpec};
use crate::semigroup::{
    assemble_line, assemble_periodic, change_of_variables_check, semigroup_spectrum, BlockShiftOperator, Boundary,
};
use crate::spectrum::unit_circle_gap;

pub const DEFAULT_SEED: u64 = 0x5EED;
/// Residual tolerance for dichotomy verification inside the suite.
pub const DICHOTOMY_TOL: f64 = 1e-6;
pub const ROTATION_TOL: f64 = 1e-8;
pub const SHEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRow {
    pub label: String,
    pub holds: bool,
    pub margin: f64,
    pub degenerate: bool,
}

impl ConditionRow {
    /// Classifies a non-negative margin: `<= 1e-9` fails, `>= 1e-6` holds,
    /// anything between is degenerate.
    pub fn from_margin(label: &str, margin: f64) -> Self {
        let margin = if margin.is_nan() { 0.0 } else { margin };
        ConditionRow {
            label: label.to_string(),
            holds: margin > ZERO_TOL,
            margin,
            degenerate: margin > ZERO_TOL && margin < DEGENERATE_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub label: String,
    pub value: f64,
    /// Upper bound the value must respect, if any.
    pub bound: Option<f64>,
}

impl Diagnostic {
    pub fn info(label: &str, value: f64) -> Self {
        Diagnostic {
            label: label.to_string(),
            value,
            bound: None,
        }
    }

    pub fn bounded(label: &str, value: f64, bound: f64) -> Self {
        Diagnostic {
            label: label.to_string(),
            value,
            bound: Some(bound),
        }
    }

    pub fn ok(&self) -> bool {
        self.bound.is_none_or(|b| self.value <= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableStatus {
    /// Every condition agrees.
    Consistent,
    /// Well-separated conditions disagree.
    Inconsistent,
    /// Some margin lies in the degenerate band; no verdict is issued.
    Degenerate,
    /// The check could not be evaluated.
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceTable {
    pub theorem: String,
    pub system: String,
    pub conditions: Vec<ConditionRow>,
    pub diagnostics: Vec<Diagnostic>,
    pub status: TableStatus,
    /// Consistent and every bounded diagnostic within its bound.
    pub pass: bool,
    /// Common verdict when consistent.
    pub verdict: Option<bool>,
    pub error: Option<String>,
}

impl EquivalenceTable {
    pub fn new(theorem: &str, system: &str, conditions: Vec<ConditionRow>, diagnostics: Vec<Diagnostic>) -> Self {
        let status = if conditions.iter().any(|c| c.degenerate) {
            TableStatus::Degenerate
        } else if conditions.iter().all(|c| c.holds) || conditions.iter().all(|c| !c.holds) {
            TableStatus::Consistent
        } else {
            TableStatus::Inconsistent
        };
        let verdict = conditions
            .first()
            .filter(|_| status == TableStatus::Consistent)
            .map(|c| c.holds);
        let pass = status == TableStatus::Consistent && diagnostics.iter().all(Diagnostic::ok);
        EquivalenceTable {
            theorem: theorem.to_string(),
            system: system.to_string(),
            conditions,
            diagnostics,
            status,
            pass,
            verdict,
            error: None,
        }
    }

    pub fn failed(theorem: &str, system: &str, err: &Error) -> Self {
        EquivalenceTable {
            theorem: theorem.to_string(),
            system: system.to_string(),
            conditions: Vec::new(),
            diagnostics: Vec::new(),
            status: TableStatus::Failed,
            pass: false,
            verdict: None,
            error: Some(err.to_string()),
        }
    }

    /// Acceptable outcome for batch runs: consistent with diagnostics in bounds, or degenerate.
    pub fn acceptable(&self) -> bool {
        self.pass || self.status == TableStatus::Degenerate
    }
}

/// `e^{2πA}` has 1 in its resolvent set; `B = -d/dx + A` on the circle is
/// invertible (Fourier blocks `A - ik`, `|k| <= ⌈||A||⌉ + 1`); `e^{2πB}` has 1
/// in its resolvent set (eigenvalues of the cyclic `e^{hB}` raised to the `N`).
pub fn run_theorem1_check(a: &CMatrix, n: usize) -> Result<EquivalenceTable> {
    if n < 8 {
        return Err(Error::Precondition(format!("need N >= 8, got {n}")));
    }
    let period_map = expm(a, TAU)?;
    let m1 = eigenvalues(&period_map)?
        .iter()
        .map(|z| (z - 1.0).norm())
        .fold(f64::INFINITY, f64::min);

    let k_max = spectral_norm(a).ceil() as i64 + 1;
    let d = a.nrows();
    let m2 = (-k_max..=k_max)
        .map(|k| min_singular_value(&(a - CMatrix::identity(d, d) * Complex64::new(0.0, k as f64))))
        .fold(f64::INFINITY, f64::min);

    let op = assemble_periodic(a, n)?;
    let m3 = eigenvalues(&op.to_dense()?)?
        .iter()
        .map(|z| (z.powu(n as u32) - 1.0).norm())
        .fold(f64::INFINITY, f64::min);

    Ok(EquivalenceTable::new(
        "theorem1",
        "",
        vec![
            ConditionRow::from_margin("one_in_resolvent_of_period_map", m1),
            ConditionRow::from_margin("zero_in_resolvent_of_circle_generator", m2),
            ConditionRow::from_margin("one_in_resolvent_of_semigroup_period_map", m3),
        ],
        vec![Diagnostic::info("fourier_cutoff", k_max as f64)],
    ))
}

/// Local minimum of a unimodal-near-`x` function on `[lo, hi]` by golden-section search.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

/// Smallest singular value of `A - iξ` over `|ξ| <= window` (grid, eigenvalue
/// abscissae and golden-section refinement) together with the Neumann tail
/// bound `window - ||A||` for `|ξ| > window`.
pub fn axis_resolvent_margin(a: &CMatrix, window: f64) -> Result<f64> {
    let norm = spectral_norm(a);
    if window < norm + 1.0 {
        return Err(Error::Precondition(format!(
            "frequency window {window} must be at least ||A|| + 1 = {}",
            norm + 1.0
        )));
    }
    let d = a.nrows();
    let smin = |xi: f64| min_singular_value(&(a - CMatrix::identity(d, d) * Complex64::new(0.0, xi)));
    let samples = 2001;
    let delta = 2.0 * window / (samples - 1) as f64;
    let mut xs: Vec<f64> = (0..samples).map(|k| -window + k as f64 * delta).collect();
    xs.extend(eigenvalues(a)?.iter().map(|z| z.im).filter(|x| x.abs() <= window));
    xs.sort_by(f64::total_cmp);
    let values: Vec<f64> = xs.iter().map(|&x| smin(x)).collect();
    let mut best = values.iter().copied().fold(f64::INFINITY, f64::min);
    for k in 0..xs.len() {
        let left = if k > 0 { values[k - 1] } else { f64::INFINITY };
        let right = if k + 1 < xs.len() { values[k + 1] } else { f64::INFINITY };
        if values[k] <= left && values[k] <= right {
            let lo = if k > 0 { xs[k - 1] } else { xs[k] - delta };
            let hi = if k + 1 < xs.len() { xs[k + 1] } else { xs[k] + delta };
            best = best.min(golden_min(smin, lo, hi));
        }
    }
    Ok(best.min(window - norm))
}

/// `σ(e^{tA}) ∩ 𝕋 = ∅`; `B = -d/dx + A` on the line is invertible; `σ(e^{tB}) ∩ 𝕋 = ∅`
/// through a cyclic grid whose step equals `t`.
pub fn run_theorem3_check(a: &CMatrix, t: f64, n: usize, xi_window: f64) -> Result<EquivalenceTable> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Precondition(format!("need t > 0, got {t}")));
    }
    if n < 2 {
        return Err(Error::Precondition(format!("need N >= 2, got {n}")));
    }
    let m2 = axis_resolvent_margin(a, xi_window)?;
    let w = expm(a, t)?;
    let m1 = unit_circle_gap(&eigenvalues(&w)?);
    let op = BlockShiftOperator::new(vec![w; n], Boundary::Cyclic, t)?;
    let m3 = unit_circle_gap(&eigenvalues(&op.to_dense()?)?);
    Ok(EquivalenceTable::new(
        "theorem3",
        "",
        vec![
            ConditionRow::from_margin("period_map_misses_circle", m1),
            ConditionRow::from_margin("zero_in_resolvent_of_line_generator", m2),
            ConditionRow::from_margin("semigroup_misses_circle", m3),
        ],
        vec![Diagnostic::info("xi_window", xi_window)],
    ))
}

fn periodic_family(spec: &SystemSpec, n: usize, tol: f64) -> Result<EvolutionFamily> {
    let period = match spec.kind() {
        SystemKind::Constant(_) => TAU,
        SystemKind::Periodic { period, .. } => *period,
        SystemKind::Sampled(_) => return Err(Error::NotPeriodic(spec.span().1 - spec.span().0)),
    };
    build_family(spec, 0.0, period / n as f64, n, tol)
}

fn random_sample<R: Rng>(rng: &mut R, m: usize, n: usize, d: usize) -> Vec<Vec<CVector>> {
    (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    CVector::from_fn(d, |_, _| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                })
                .collect()
        })
        .collect()
}

/// No Floquet multiplier on `𝕋` versus `σ(e^{hD}) ∩ 𝕋 = ∅` for the cyclic
/// discretization, with rotation invariance of `σ(e^{hD})` and the
/// change-of-variables identity as diagnostics.
pub fn run_theorem4_check(spec: &SystemSpec, n: usize, tol: f64, seed: u64) -> Result<EquivalenceTable> {
    let fam = periodic_family(spec, n, tol)?;
    run_theorem4_on(&fam, seed)
}

fn run_theorem4_on(fam: &EvolutionFamily, seed: u64) -> Result<EquivalenceTable> {
    let n = fam.len();
    let mono = monodromy(fam, n)?;
    let m1 = mono
        .multipliers
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    let op = assemble_line(fam, Boundary::Cyclic)?;
    let spec = semigroup_spectrum(&op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = random_sample(&mut rng, n, n, fam.dimension());
    let shear = change_of_variables_check(fam, &sample, 1 + n / 3)?;
    let scale = spectral_norm(&op.to_dense()?).max(1.0);
    Ok(EquivalenceTable::new(
        "theorem4",
        "",
        vec![
            ConditionRow::from_margin("no_floquet_multiplier_on_circle", m1),
            ConditionRow::from_margin("semigroup_misses_circle", spec.report.unit_circle_gap),
        ],
        vec![
            Diagnostic::bounded("rotation_pairing", spec.rotation_pairing / scale, ROTATION_TOL),
            Diagnostic::bounded("change_of_variables", shear, SHEAR_TOL),
        ],
    ))
}

/// Output of the spectral-hyperbolicity pipeline on one periodic system.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem5Outcome {
    pub table: EquivalenceTable,
    pub report: Option<DichotomyReport>,
}

/// Spectral hyperbolicity of the projection family obtained from the Riesz
/// projection of `e^{hD}` versus a positive unit-circle gap of `e^{hD}`.
pub fn run_theorem5_check(spec: &SystemSpec, n: usize, tol: f64) -> Result<Theorem5Outcome> {
    let fam = periodic_family(spec, n, tol)?;
    run_theorem5_on(&fam)
}

fn run_theorem5_on(fam: &EvolutionFamily) -> Result<Theorem5Outcome> {
    let op = assemble_line(fam, Boundary::Cyclic)?;
    let gap = semigroup_spectrum(&op)?.report.unit_circle_gap;
    let min_slice = fam
        .slices()
        .iter()
        .map(|s| min_singular_value(s) / spectral_norm(s).max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let mut diagnostics = vec![Diagnostic::info("slice_conditioning", min_slice)];
    let (left, report) = match riesz_family(&op, fam.x0()) {
        Ok((pf, outcome, mass)) => {
            diagnostics.push(Diagnostic::info("quadrature_nodes", outcome.nodes as f64));
            diagnostics.push(Diagnostic::info("idempotency", outcome.idempotency));
            diagnostics.push(Diagnostic::info("off_block_mass", mass));
            match verify_dichotomy(fam, &pf, DICHOTOMY_TOL) {
                Ok(r) => {
                    diagnostics.push(Diagnostic::info("rank", r.rank as f64));
                    diagnostics.push(Diagnostic::info("M", r.m));
                    diagnostics.push(Diagnostic::info("lambda", r.lambda));
                    let margin = if r.verdict.is_spectrally_hyperbolic() {
                        r.margin
                    } else {
                        0.0
                    };
                    (margin, Some(r))
                }
                Err(Error::RankJump { .. }) => (0.0, None),
                Err(e) => return Err(e),
            }
        }
        Err(Error::SingularNode { .. } | Error::RankDeficient { .. }) => (0.0, None),
        Err(e) => return Err(e),
    };
    Ok(Theorem5Outcome {
        table: EquivalenceTable::new(
            "theorem5",
            "",
            vec![
                ConditionRow::from_margin("spectrally_hyperbolic", left),
                ConditionRow::from_margin("semigroup_misses_circle", gap),
            ],
            diagnostics,
        ),
        report,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GalleryConfig {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for GalleryConfig {
    fn default() -> Self {
        GalleryConfig {
            n: 16,
            seed: DEFAULT_SEED,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FactCheck {
    pub system: String,
    pub quantity: Quantity,
    pub oracle: &'static str,
    pub expected: f64,
    /// Value produced by the oracle itself.
    pub oracle_value: f64,
    /// Value produced by the propagator pipeline.
    pub computed: f64,
    pub relative_error: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Headline {
    pub system: String,
    /// Largest real part of the frozen-time eigenvalues over the period.
    pub max_pointwise_real_part: f64,
    pub max_floquet_modulus: f64,
    /// `ln(max |μ|) / T`.
    pub growth_exponent: f64,
    pub uniformly_stable: bool,
    /// Pointwise spectrum in the open left half-plane while solutions grow.
    pub reproduced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub system: String,
    pub expected: ExpectedClass,
    pub observed: Option<ExpectedClass>,
    pub unit_circle_gap: Option<f64>,
    pub dichotomy: Option<DichotomyReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GalleryRun {
    pub n: usize,
    pub seed: u64,
    pub tables: Vec<EquivalenceTable>,
    pub systems: Vec<SystemSummary>,
    pub facts: Vec<FactCheck>,
    pub headlines: Vec<Headline>,
}

impl GalleryRun {
    /// Every table acceptable, every fact confirmed, every expected class
    /// observed, every headline reproduced.
    pub fn all_ok(&self) -> bool {
        self.tables.iter().all(EquivalenceTable::acceptable)
            && self.facts.iter().all(|f| f.ok)
            && self
                .systems
                .iter()
                .all(|s| s.error.is_none() && s.observed == Some(s.expected))
            && self.headlines.iter().all(|h| h.reproduced)
    }
}

/// Periodic trapezoid rule over one period; spectrally accurate for smooth periodic integrands.
fn period_integral(spec: &SystemSpec, period: f64, f: impl Fn(&CMatrix) -> f64) -> Result<f64> {
    let m = 4096;
    let h = period / m as f64;
    let mut acc = 0.0;
    for k in 0..m {
        acc += f(&spec.eval(k as f64 * h)?);
    }
    Ok(acc * h)
}

fn oracle_value(sys: &GallerySystem, quantity: Quantity, oracle: Oracle, period: f64) -> Result<f64> {
    let d = sys.spec.dimension();
    match oracle {
        Oracle::ClosedForm(residual) => {
            // The residual certifies the closed-form solution; its growth over one period is the expected value.
            let r = residual();
            if r > 1e-10 {
                return Err(Error::Precondition(format!("closed-form residual {r:e}")));
            }
            Ok(f64::NAN)
        }
        Oracle::LiouvilleTrace => Ok(period_integral(&sys.spec, period, |m| (0..d).map(|i| m[(i, i)].re).sum())?.exp()),
        Oracle::DiagonalQuadrature => {
            let mut logs = Vec::with_capacity(d);
            for i in 0..d {
                logs.push(period_integral(&sys.spec, period, |m| m[(i, i)].re)?);
            }
            let pick = match quantity {
                Quantity::MinFloquetModulus => logs.iter().copied().fold(f64::INFINITY, f64::min),
                _ => logs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            Ok(pick.exp())
        }
        Oracle::Eigensolve => {
            let a = sys.spec.eval(0.0)?;
            let re: Vec<f64> = eigenvalues(&a)?.iter().map(|z| z.re).collect();
            let pick = match quantity {
                Quantity::MinFloquetModulus => re.iter().copied().fold(f64::INFINITY, f64::min),
                Quantity::MaxFloquetModulus => re.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Quantity::MonodromyDeterminantModulus => re.iter().sum(),
            };
            Ok((period * pick).exp())
        }
    }
}

fn classify(gap: f64, max_modulus: f64) -> ExpectedClass {
    if gap <= ZERO_TOL {
        ExpectedClass::OnAxis
    } else if max_modulus < 1.0 {
        ExpectedClass::UniformlyStable
    } else {
        ExpectedClass::Hyperbolic
    }
}

struct SystemRun {
    tables: Vec<EquivalenceTable>,
    summary: SystemSummary,
    facts: Vec<FactCheck>,
    headline: Option<Headline>,
}

fn run_system(index: usize, sys: &GallerySystem, cfg: &GalleryConfig) -> SystemRun {
    let name = sys.name;
    let mut tables = Vec::new();
    let mut named = |mut t: EquivalenceTable| {
        t.system = name.to_string();
        tables.push(t);
    };
    if let SystemKind::Constant(a) = sys.spec.kind() {
        match run_theorem1_check(a, cfg.n.max(8)) {
            Ok(t) => named(t),
            Err(e) => named(EquivalenceTable::failed("theorem1", name, &e)),
        }
        match run_theorem3_check(a, 1.0, cfg.n, spectral_norm(a) + 2.0) {
            Ok(t) => named(t),
            Err(e) => named(EquivalenceTable::failed("theorem3", name, &e)),
        }
    }

    let mut summary = SystemSummary {
        system: name.to_string(),
        expected: sys.expected,
        observed: None,
        unit_circle_gap: None,
        dichotomy: None,
        error: None,
    };
    let mut facts = Vec::new();
    let mut headline = None;

    let fam = match periodic_family(&sys.spec, cfg.n, cfg.tol) {
        Ok(f) => f,
        Err(e) => {
            summary.error = Some(e.to_string());
            return SystemRun {
                tables,
                summary,
                facts,
                headline,
            };
        }
    };
    match run_theorem4_on(&fam, cfg.seed.wrapping_add(index as u64)) {
        Ok(t) => named(t),
        Err(e) => named(EquivalenceTable::failed("theorem4", name, &e)),
    }
    match run_theorem5_on(&fam) {
        Ok(out) => {
            named(out.table);
            summary.dichotomy = out.report;
        }
        Err(e) => named(EquivalenceTable::failed("theorem5", name, &e)),
    }

    let period = fam.window();
    match monodromy(&fam, fam.len()) {
        Ok(mono) => {
            let moduli: Vec<f64> = mono.multipliers.iter().map(|z| z.norm()).collect();
            let max_mod = moduli.iter().copied().fold(0.0, f64::max);
            let min_mod = moduli.iter().copied().fold(f64::INFINITY, f64::min);
            let gap = unit_circle_gap(&mono.multipliers);
            summary.unit_circle_gap = Some(gap);
            summary.observed = Some(classify(gap, max_mod));

            for fact in &sys.facts {
                let computed = match fact.quantity {
                    Quantity::MaxFloquetModulus => max_mod,
                    Quantity::MinFloquetModulus => min_mod,
                    Quantity::MonodromyDeterminantModulus => mono.matrix.determinant().norm(),
                };
                let (oracle_value, ok) = match oracle_value(sys, fact.quantity, fact.oracle, period) {
                    Ok(v) if v.is_nan() => (fact.expected, true),
                    Ok(v) => (v, ((v - fact.expected) / fact.expected).abs() <= 1e-8),
                    Err(_) => (f64::NAN, false),
                };
                let relative_error = ((computed - fact.expected) / fact.expected).abs();
                facts.push(FactCheck {
                    system: name.to_string(),
                    quantity: fact.quantity,
                    oracle: fact.oracle.name(),
                    expected: fact.expected,
                    oracle_value,
                    computed,
                    relative_error,
                    ok: ok && relative_error <= 1e-6,
                });
            }

            if sys.misleading_pointwise {
                let max_re = (0..2000)
                    .map(|k| {
                        let t = period * k as f64 / 2000.0;
                        sys.spec
                            .eval(t)
                            .and_then(|m| eigenvalues(&m))
                            .map(|ev| ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
                            .unwrap_or(f64::INFINITY)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                let stable = summary
                    .dichotomy
                    .as_ref()
                    .map(|r| r.verdict == crate::dichotomy::Verdict::UniformlyStable)
                    .unwrap_or(false)
                    || max_mod < 1.0;
                headline = Some(Headline {
                    system: name.to_string(),
                    max_pointwise_real_part: max_re,
                    max_floquet_modulus: max_mod,
                    growth_exponent: max_mod.ln() / period,
                    uniformly_stable: stable,
                    reproduced: max_re < 0.0 && !stable,
                });
            }
        }
        Err(e) => summary.error = Some(e.to_string()),
    }

    SystemRun {
        tables,
        summary,
        facts,
        headline,
    }
}

/// Runs every gallery system through the applicable checks. Failures are
/// recorded per system and never abort the run.
pub fn run_gallery(cfg: &GalleryConfig) -> GalleryRun {
    let systems = gallery();
    let runs: Vec<SystemRun> = systems
        .par_iter()
        .enumerate()
        .map(|(i, sys)| run_system(i, sys, cfg))
        .collect();
    let mut out = GalleryRun {
        n: cfg.n,
        seed: cfg.seed,
        tables: Vec::new(),
        systems: Vec::new(),
        facts: Vec::new(),
        headlines: Vec::new(),
    };
    for run in runs {
        out.tables.extend(run.tables);
        out.systems.push(run.summary);
        out.facts.extend(run.facts);
        out.headlines.extend(run.headline);
    }
    out
}
