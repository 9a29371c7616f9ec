use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use evodich::dichotomy::{riesz_family, verify_dichotomy, DichotomyReport, DEGENERATE_TOL, ZERO_TOL};
use evodich::io::{eigenvalues_csv, parse_spec, projection_family_csv, summary_csv};
use evodich::linalg::{expm, identity, spectral_norm, Svd};
use evodich::propagator::{build_family, EvolutionFamily, SystemKind, SystemSpec};
use evodich::semigroup::{
    approximate_eigenfunction, assemble_line, assemble_periodized, semigroup_spectrum, BlockShiftOperator, Boundary,
    SemigroupSpectrum, DENSE_LIMIT,
};
use evodich::serde_util::to_json;
use evodich::suite::{
    run_gallery, run_theorem1_check, run_theorem3_check, run_theorem4_check, run_theorem5_check, Diagnostic,
    EquivalenceTable, GalleryConfig, DICHOTOMY_TOL,
};
use evodich::Error;

use crate::{Format, RunArgs};

const ON_AXIS_EXIT: u8 = 2;

fn validate(args: &RunArgs) -> Result<()> {
    ensure!(args.n >= 2, "-N must be at least 2, got {}", args.n);
    ensure!(
        args.tol > 0.0 && args.tol.is_finite(),
        "--tol must be positive, got {}",
        args.tol
    );
    ensure!(
        args.p >= 1.0 && args.p.is_finite(),
        "-p must lie in [1, inf), got {}",
        args.p
    );
    if let Some(h) = args.step {
        ensure!(h > 0.0 && h.is_finite(), "--step must be positive, got {h}");
    }
    Ok(())
}

fn load(args: &RunArgs) -> Result<SystemSpec> {
    let path = args.input.as_deref().context("--input is required for this command")?;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    // The parse error already embeds its source; keep only the message so it is not repeated.
    parse_spec(&text).map_err(|e| anyhow::anyhow!("in {}: {e}", path.display()))
}

fn prepare_out(args: &RunArgs) -> Result<PathBuf> {
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    Ok(args.out.clone())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Grid origin, step and cell count covering one period (or the sampled span).
#[derive(Debug, Clone, Copy, Serialize)]
struct Grid {
    x0: f64,
    step: f64,
    cells: usize,
}

fn grid_for(spec: &SystemSpec, args: &RunArgs) -> Result<Grid> {
    let (x0, window) = match spec.kind() {
        SystemKind::Constant(_) => (0.0, TAU),
        SystemKind::Periodic { period, .. } => (0.0, *period),
        SystemKind::Sampled(_) => {
            let (a, b) = spec.span();
            (a, b - a)
        }
    };
    let cells = match args.step {
        Some(h) => {
            let n = (window / h).round();
            ensure!(
                n >= 2.0 && (n * h - window).abs() <= 1e-9 * window,
                "--step {h} does not divide the window {window} into at least 2 cells"
            );
            n as usize
        }
        None => args.n,
    };
    Ok(Grid {
        x0,
        step: window / cells as f64,
        cells,
    })
}

fn family(spec: &SystemSpec, grid: Grid, args: &RunArgs) -> Result<EvolutionFamily> {
    let size = grid.cells * spec.dimension();
    if size > DENSE_LIMIT {
        bail!(Error::SizeLimit {
            size,
            limit: DENSE_LIMIT
        });
    }
    Ok(build_family(spec, grid.x0, grid.step, grid.cells, args.tol)?)
}

fn cyclic_operator(fam: &EvolutionFamily) -> Result<BlockShiftOperator> {
    Ok(if fam.is_window_periodic() {
        assemble_line(fam, Boundary::Cyclic)?
    } else {
        assemble_periodized(fam)?
    })
}

fn kind_name(spec: &SystemSpec) -> &'static str {
    match spec.kind() {
        SystemKind::Constant(_) => "constant",
        SystemKind::Periodic { .. } => "periodic",
        SystemKind::Sampled(_) => "sampled",
    }
}

#[derive(Serialize)]
struct SystemInfo {
    dimension: usize,
    kind: &'static str,
    grid: Grid,
    /// The circle closes a window that is not a period of the coefficients.
    periodized: bool,
}

#[derive(Serialize)]
struct SpectrumFile<'a> {
    system: &'a SystemInfo,
    #[serde(flatten)]
    spectrum: &'a SemigroupSpectrum,
}

#[derive(Serialize)]
struct ProjectionSummary {
    quadrature_nodes: usize,
    idempotency: f64,
    off_block_mass: f64,
    continuity_modulus: f64,
    max_norm: f64,
}

/// Near-eigenfunction of `-d/dx + A` at 0 built from the best near-fixed vector of `e^{2πA}`.
#[derive(Serialize)]
struct Witness {
    p: f64,
    defect: f64,
    norm_f: f64,
    residual_bf: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct AnalysisFile<'a> {
    system: &'a SystemInfo,
    classification: &'static str,
    /// Some solution grows exponentially.
    expansion: bool,
    unit_circle_gap: f64,
    dichotomy: Option<DichotomyReport>,
    projection: Option<ProjectionSummary>,
    witness: Option<Witness>,
    note: Option<String>,
}

fn classify(gap: f64, spectral_radius: f64) -> &'static str {
    if gap <= ZERO_TOL {
        "on_axis"
    } else if gap < DEGENERATE_TOL {
        "degenerate"
    } else if spectral_radius < 1.0 {
        "uniformly_stable"
    } else {
        "hyperbolic"
    }
}

fn witness(a: &evodich::linalg::CMatrix, p: f64) -> Result<Witness> {
    let shifted = expm(a, TAU)? - identity(a.nrows());
    let svd = Svd::new(&shifted)?;
    let y = svd.v.column(svd.v.ncols() - 1).into_owned();
    let w = approximate_eigenfunction(a, &y, 1024, p)?;
    Ok(Witness {
        p,
        defect: w.defect,
        norm_f: w.norm_f,
        residual_bf: w.residual_bf,
        ratio: w.residual_bf / w.norm_f,
    })
}

pub fn analyze(args: &RunArgs) -> Result<u8> {
    validate(args)?;
    let spec = load(args)?;
    let grid = grid_for(&spec, args)?;
    let out = prepare_out(args)?;

    let fam = family(&spec, grid, args)?;
    let op = cyclic_operator(&fam)?;
    let spectrum = semigroup_spectrum(&op)?;
    let info = SystemInfo {
        dimension: spec.dimension(),
        kind: kind_name(&spec),
        grid,
        periodized: op.is_periodized(),
    };
    let gap = spectrum.report.unit_circle_gap;
    let radius = spectrum.report.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let classification = classify(gap, radius);

    let mut note = None;
    let mut projection = None;
    let mut projections_csv = None;
    let dichotomy = match riesz_family(&op, grid.x0) {
        Ok((pf, outcome, mass)) => {
            projection = Some(ProjectionSummary {
                quadrature_nodes: outcome.nodes,
                idempotency: outcome.idempotency,
                off_block_mass: mass,
                continuity_modulus: pf.continuity_modulus,
                max_norm: pf.max_norm,
            });
            projections_csv = Some(projection_family_csv(&pf));
            match verify_dichotomy(&fam, &pf, DICHOTOMY_TOL) {
                Ok(r) => Some(r),
                Err(e @ Error::RankJump { .. }) => {
                    note = Some(e.to_string());
                    None
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(e @ (Error::SingularNode { .. } | Error::RankDeficient { .. })) => {
            note = Some(format!("no dichotomy projection: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    if op.is_periodized() {
        note = Some(match note {
            Some(n) => format!("{n}; window is periodized, verdict is a finite-window approximation"),
            None => "window is periodized, verdict is a finite-window approximation".into(),
        });
    }
    let witness = match spec.kind() {
        SystemKind::Constant(a) => Some(witness(a, args.p)?),
        _ => None,
    };

    match args.format {
        Format::Json => write(
            &out,
            "spectrum.json",
            &to_json(&SpectrumFile {
                system: &info,
                spectrum: &spectrum,
            })?,
        )?,
        Format::Csv => write(&out, "eigenvalues.csv", &eigenvalues_csv(&spectrum.report.eigenvalues))?,
    }
    if let Some(csv) = projections_csv {
        write(&out, "projections.csv", &csv)?;
    }
    let verdict = dichotomy.as_ref().map(|r| r.verdict);
    write(
        &out,
        "dichotomy.json",
        &to_json(&AnalysisFile {
            system: &info,
            classification,
            expansion: radius > 1.0 && gap > ZERO_TOL,
            unit_circle_gap: gap,
            dichotomy,
            projection,
            witness,
            note,
        })?,
    )?;
    println!(
        "classification: {classification}  unit_circle_gap: {gap:.6e}  dichotomy: {}",
        verdict.map_or("none".to_string(), |v| serde_json::to_string(&v).unwrap_or_default())
    );
    Ok(if matches!(classification, "on_axis" | "degenerate") {
        ON_AXIS_EXIT
    } else {
        0
    })
}

fn name_tables(tables: &mut [EquivalenceTable], name: &str) {
    for t in tables {
        t.system = name.to_string();
    }
}

fn system_tables(spec: &SystemSpec, args: &RunArgs) -> Result<Vec<EquivalenceTable>> {
    let grid = grid_for(spec, args)?;
    let mut tables = Vec::new();
    match spec.kind() {
        SystemKind::Constant(a) => {
            tables.push(run_theorem1_check(a, grid.cells.max(8))?);
            tables.push(run_theorem3_check(a, grid.step, grid.cells, spectral_norm(a) + 2.0)?);
        }
        SystemKind::Periodic { .. } => {}
        SystemKind::Sampled(_) => {
            // No verdicts off the circle: report how the periodized gap moves with the grid.
            let mut diagnostics = Vec::new();
            for k in 0..3 {
                let cells = grid.cells << k;
                let fam = family(
                    spec,
                    Grid {
                        cells,
                        step: grid.step / (1 << k) as f64,
                        ..grid
                    },
                    args,
                )?;
                let gap = semigroup_spectrum(&assemble_periodized(&fam)?)?.report.unit_circle_gap;
                diagnostics.push(Diagnostic::info(
                    &format!("periodized_gap_N{cells}"),
                    gap * cells as f64,
                ));
            }
            tables.push(EquivalenceTable::new("window_trend", "", Vec::new(), diagnostics));
            return Ok(tables);
        }
    }
    let size = grid.cells * spec.dimension();
    ensure!(
        size <= DENSE_LIMIT,
        Error::SizeLimit {
            size,
            limit: DENSE_LIMIT
        }
    );
    tables.push(run_theorem4_check(spec, grid.cells, args.tol, args.seed)?);
    tables.push(run_theorem5_check(spec, grid.cells, args.tol)?.table);
    Ok(tables)
}

fn write_tables(out: &Path, tables: &[EquivalenceTable], format: Format) -> Result<()> {
    match format {
        Format::Json => write(out, "tables.json", &to_json(tables)?),
        Format::Csv => write(out, "summary.csv", &summary_csv(tables)),
    }
}

pub fn verify(args: &RunArgs) -> Result<u8> {
    validate(args)?;
    if args.input.is_none() {
        let out = prepare_out(args)?;
        let run = run_gallery(&gallery_config(args));
        write_tables(&out, &run.tables, args.format)?;
        report_tables(&run.tables);
        return Ok(if run.all_ok() { 0 } else { 1 });
    }
    let spec = load(args)?;
    let out = prepare_out(args)?;
    let name = args
        .input
        .as_deref()
        .and_then(Path::file_stem)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut tables = system_tables(&spec, args)?;
    name_tables(&mut tables, &name);
    write_tables(&out, &tables, args.format)?;
    report_tables(&tables);
    Ok(if tables.iter().all(EquivalenceTable::acceptable) {
        0
    } else {
        1
    })
}

fn report_tables(tables: &[EquivalenceTable]) {
    for t in tables {
        let status = serde_json::to_string(&t.status).unwrap_or_default();
        println!("{:<26} {:<13} {}", t.system, t.theorem, status.trim_matches('"'));
    }
}

fn gallery_config(args: &RunArgs) -> GalleryConfig {
    GalleryConfig {
        n: args.n,
        seed: args.seed,
        tol: args.tol,
    }
}

pub fn gallery(args: &RunArgs) -> Result<u8> {
    validate(args)?;
    ensure!(args.input.is_none(), "gallery takes no --input");
    ensure!(args.step.is_none(), "gallery grids are set with -N, not --step");
    let out = prepare_out(args)?;
    let run = run_gallery(&gallery_config(args));
    match args.format {
        Format::Json => write(&out, "gallery.json", &to_json(&run)?)?,
        Format::Csv => write(&out, "summary.csv", &summary_csv(&run.tables))?,
    }
    report_tables(&run.tables);
    for h in &run.headlines {
        println!(
            "{}: max pointwise Re = {:.6}, Floquet growth exponent = {:.6}, uniformly stable = {}",
            h.system, h.max_pointwise_real_part, h.growth_exponent, h.uniformly_stable
        );
    }
    Ok(if run.all_ok() { 0 } else { 1 })
}

#[derive(Serialize)]
struct SpectrumMeta<'a> {
    system: &'a SystemInfo,
    eigenvalue_count: usize,
    unit_circle_gap: f64,
    axis_gap: f64,
    rotation_pairing: f64,
}

pub fn spectrum(args: &RunArgs) -> Result<u8> {
    validate(args)?;
    let spec = load(args)?;
    let grid = grid_for(&spec, args)?;
    let out = prepare_out(args)?;
    let fam = family(&spec, grid, args)?;
    let op = cyclic_operator(&fam)?;
    let s = semigroup_spectrum(&op)?;
    let info = SystemInfo {
        dimension: spec.dimension(),
        kind: kind_name(&spec),
        grid,
        periodized: op.is_periodized(),
    };
    write(&out, "eigenvalues.csv", &eigenvalues_csv(&s.report.eigenvalues))?;
    write(
        &out,
        "spectrum_meta.json",
        &to_json(&SpectrumMeta {
            system: &info,
            eigenvalue_count: s.report.eigenvalues.len(),
            unit_circle_gap: s.report.unit_circle_gap,
            axis_gap: s.report.axis_gap,
            rotation_pairing: s.rotation_pairing,
        })?,
    )?;
    println!(
        "{} eigenvalues, unit_circle_gap: {:.6e}",
        s.report.eigenvalues.len(),
        s.report.unit_circle_gap
    );
    Ok(0)
}
