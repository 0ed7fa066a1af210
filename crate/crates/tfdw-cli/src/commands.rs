//! The six subcommands. Each returns the process exit code: 0 on
//! success, 3 when a solve finished without converging (artifacts are
//! still written), and any error bubbles up to exit code 2.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tfdw::curves::{
    binding_check, compute_curve, compute_curve_cold, curve_csv, export_curve, import_curve,
    BindingResidual, CurveSample, EnergyCurve, ExportFormat,
};
use tfdw::diagnostics::localization_report;
use tfdw::functional::{energy, EnergyBreakdown, PotentialSpec};
use tfdw::io::{atomic_write, load_state, save_state};
use tfdw::minimize::{gn_quotient_optimize, minimize_from, minimize_mass_constrained};
use tfdw::{Error, Result};

use crate::config::{self, RunConfig};

const POINT_FORMAT: &str = "tfdw-curve-point-v1";

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNCONVERGED: u8 = 3;

fn ensure_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = config::out_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn require_solve<'a>(cfg: &'a RunConfig, command: &str) -> Result<&'a tfdw::minimize::SolveConfig> {
    cfg.solve
        .as_ref()
        .ok_or_else(|| Error::Config(format!("the {command} command needs a solve section")))
}

fn print_breakdown(b: &EnergyBreakdown) {
    println!("weizsacker    {:+.12e}", b.weizsacker);
    println!("thomas_fermi  {:+.12e}", b.thomas_fermi);
    println!("dirac         {:+.12e}", -b.dirac);
    println!("external      {:+.12e}", b.external);
    println!("hartree       {:+.12e}", b.hartree);
    println!("total         {:+.12e}", b.total);
}

// ===========================================================================
// energy
// ===========================================================================

#[derive(Serialize)]
struct EnergyArtifact<'a> {
    format: &'static str,
    config_hash: &'a str,
    /// Hash stored in the state file when it was written.
    state_hash: &'a str,
    state_file: &'a Path,
    breakdown: &'a EnergyBreakdown,
}

/// Evaluates the configured functional on a saved state and prints the
/// five-term breakdown.
pub fn energy_cmd(cfg: &RunConfig, state_path: &Path) -> Result<u8> {
    let (state, state_hash) = load_state(state_path)?;
    let breakdown = energy(&state, &cfg.potential, &cfg.constants)?;
    print_breakdown(&breakdown);
    let hash = config::physics_hash(cfg)?;
    let out = ensure_out(cfg)?;
    let path = out.join(format!("energy_{hash}.json"));
    write_json(
        &path,
        &EnergyArtifact {
            format: "tfdw-energy-v1",
            config_hash: &hash,
            state_hash: &state_hash,
            state_file: state_path,
            breakdown: &breakdown,
        },
    )?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

// ===========================================================================
// minimize
// ===========================================================================

#[derive(Serialize)]
struct SummaryArtifact<'a> {
    format: &'static str,
    config_hash: &'a str,
    mass_target: f64,
    breakdown: EnergyBreakdown,
    residual: f64,
    iterations: usize,
    converged: bool,
    multiplier: f64,
    boundary_mass: f64,
    tolerance: f64,
    domain_extent: f64,
}

/// Runs the constrained minimization and writes the state, a summary,
/// and the accepted-energy trace.
pub fn minimize_cmd(cfg: &RunConfig) -> Result<u8> {
    let solve = require_solve(cfg, "minimize")?;
    let hash = config::physics_hash(cfg)?;
    let result = minimize_mass_constrained(&cfg.potential, solve, &cfg.constants)?;
    let out = ensure_out(cfg)?;

    let state_path = out.join(format!("state_{hash}.json"));
    save_state(&result.u, &hash, &state_path)?;

    let summary_path = out.join(format!("summary_{hash}.json"));
    write_json(
        &summary_path,
        &SummaryArtifact {
            format: "tfdw-summary-v1",
            config_hash: &hash,
            mass_target: result.mass_target,
            breakdown: result.breakdown,
            residual: result.residual,
            iterations: result.iterations,
            converged: result.converged,
            multiplier: result.multiplier,
            boundary_mass: result.boundary_mass,
            tolerance: result.tolerance,
            domain_extent: result.domain_extent(),
        },
    )?;

    let trace_path = out.join(format!("trace_{hash}.dat"));
    let trace: String = result
        .energy_trace
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{i} {e}\n"))
        .collect();
    atomic_write(&trace_path, trace.as_bytes())?;

    print_breakdown(&result.breakdown);
    println!(
        "mass {} residual {:.3e} iterations {} multiplier {:+.6e} boundary mass {:.3e}",
        result.mass_target,
        result.residual,
        result.iterations,
        result.multiplier,
        result.boundary_mass
    );
    println!("converged {}", result.converged);
    for p in [&state_path, &summary_path, &trace_path] {
        println!("wrote {}", p.display());
    }
    Ok(if result.converged { EXIT_OK } else { EXIT_UNCONVERGED })
}

// ===========================================================================
// curve
// ===========================================================================

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointArtifact {
    format: String,
    config_hash: String,
    sample: CurveSample,
}

fn point_path(dir: &Path, hash: &str, m: f64) -> PathBuf {
    dir.join(format!("point_{hash}_m{m}.json"))
}

/// Loads a resume checkpoint if present, refusing files from another
/// configuration.
fn load_point(path: &Path, hash: &str, m: f64) -> Result<Option<CurveSample>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let point: PointArtifact = serde_json::from_str(&text)?;
    if point.format != POINT_FORMAT || point.config_hash != hash || point.sample.m != m {
        return Err(Error::Config(format!(
            "checkpoint {} does not belong to this configuration; refusing to mix artifacts",
            path.display()
        )));
    }
    Ok(Some(point.sample))
}

/// Sweeps the energy curve over the configured masses, optionally in
/// parallel (cold starts only) and optionally resuming from per-point
/// checkpoint files. A resumed warm sweep re-chains only the missing
/// masses, so its seeding path differs from an uninterrupted run; the
/// samples still converge to the same tolerance.
pub fn curve_cmd(cfg: &RunConfig, jobs: usize, resume: bool) -> Result<u8> {
    let solve = require_solve(cfg, "curve")?;
    let params = cfg
        .curve
        .as_ref()
        .ok_or_else(|| Error::Config("the curve command needs a curve section".into()))?;
    if jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    if jobs > 1 && !params.cold {
        return Err(Error::Config(
            "--jobs above 1 needs curve.cold = true; warm-started sweeps are sequential".into(),
        ));
    }

    let meta = config::family_meta(solve);
    let file_hash = config::point_hash(&cfg.constants, &cfg.potential, &meta, params.cold)?;
    let out = ensure_out(cfg)?;
    let points_dir = out.join("points");
    std::fs::create_dir_all(&points_dir).map_err(|e| Error::Io {
        path: points_dir.clone(),
        source: e,
    })?;

    let mut cached: Vec<CurveSample> = Vec::new();
    let mut todo: Vec<f64> = Vec::new();
    for &m in &params.masses {
        match resume
            .then(|| load_point(&point_path(&points_dir, &file_hash, m), &file_hash, m))
            .transpose()?
            .flatten()
        {
            Some(sample) => cached.push(sample),
            None => todo.push(m),
        }
    }

    let solved: Vec<CurveSample> = if todo.is_empty() {
        Vec::new()
    } else if params.cold {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a {jobs}-thread pool: {e}")))?;
        pool.install(|| compute_curve_cold(&cfg.potential, &todo, solve, &cfg.constants))?
            .samples
    } else {
        compute_curve(&cfg.potential, &todo, solve, &cfg.constants)?.samples
    };
    for sample in &solved {
        write_json(
            &point_path(&points_dir, &file_hash, sample.m),
            &PointArtifact {
                format: POINT_FORMAT.to_string(),
                config_hash: file_hash.clone(),
                sample: *sample,
            },
        )?;
    }

    let mut samples = cached;
    samples.extend(solved);
    samples.sort_by(|a, b| a.m.partial_cmp(&b.m).expect("finite masses"));
    let curve = EnergyCurve {
        potential: cfg.potential.clone(),
        constants: cfg.constants,
        samples,
        meta,
    };
    curve.validate()?;

    let json_path = out.join(format!("curve_{file_hash}.json"));
    export_curve(&curve, &json_path, ExportFormat::Json)?;
    let csv_path = out.join(format!("curve_{file_hash}.csv"));
    export_curve(&curve, &csv_path, ExportFormat::Csv)?;
    let dat_path = out.join(format!("curve_{file_hash}.dat"));
    let dat: String = curve
        .samples
        .iter()
        .map(|s| format!("{} {}\n", s.m, s.energy))
        .collect();
    atomic_write(&dat_path, dat.as_bytes())?;

    print!("{}", curve_csv(&curve));
    for p in [&json_path, &csv_path, &dat_path] {
        println!("wrote {}", p.display());
    }
    let all_converged = curve.samples.iter().all(|s| s.converged);
    Ok(if all_converged { EXIT_OK } else { EXIT_UNCONVERGED })
}

// ===========================================================================
// binding
// ===========================================================================

#[derive(Serialize)]
struct BindingArtifact<'a> {
    format: &'static str,
    config_hash: &'a str,
    residuals: &'a [BindingResidual],
}

/// All splits m = m' + (m - m') whose parts are sampled: m' runs over
/// the potential curve (plus zero) and the remainder must sit on the
/// free curve (or be zero).
fn derive_pairs(curve_v: &EnergyCurve, curve_0: &EnergyCurve) -> Vec<(f64, f64)> {
    let v_masses: Vec<f64> = curve_v.samples.iter().map(|s| s.m).collect();
    let free_has = |x: f64| x == 0.0 || curve_0.samples.iter().any(|s| s.m == x);
    let mut pairs = Vec::new();
    for &m in &v_masses {
        for mp in std::iter::once(0.0).chain(v_masses.iter().copied()) {
            if mp <= m && free_has(m - mp) {
                pairs.push((m, mp));
            }
        }
    }
    pairs
}

/// Evaluates binding residuals between a saved potential curve and a
/// saved free curve.
pub fn binding_cmd(cfg: &RunConfig) -> Result<u8> {
    let params = cfg
        .binding
        .as_ref()
        .ok_or_else(|| Error::Config("the binding command needs a binding section".into()))?;
    let curve_v = import_curve(&params.curve_v)?;
    let curve_0 = import_curve(&params.curve_0)?;
    let hash_v = config::family_hash(&curve_v.constants, &curve_v.meta)?;
    let hash_0 = config::family_hash(&curve_0.constants, &curve_0.meta)?;
    if hash_v != hash_0 {
        return Err(Error::Config(format!(
            "curve artifacts come from different configurations ({hash_v} vs {hash_0}); \
             refusing to mix them"
        )));
    }
    let pairs = match &params.pairs {
        Some(p) => p.clone(),
        None => derive_pairs(&curve_v, &curve_0),
    };
    let residuals = binding_check(&curve_v, &curve_0, &pairs)?;

    let out = ensure_out(cfg)?;
    let json_path = out.join(format!("binding_{hash_v}.json"));
    write_json(
        &json_path,
        &BindingArtifact {
            format: "tfdw-binding-v1",
            config_hash: &hash_v,
            residuals: &residuals,
        },
    )?;
    let csv_path = out.join(format!("binding_{hash_v}.csv"));
    let csv: String = std::iter::once("m,m_prime,residual\n".to_string())
        .chain(
            residuals
                .iter()
                .map(|r| format!("{},{},{}\n", r.m, r.m_prime, r.residual)),
        )
        .collect();
    atomic_write(&csv_path, csv.as_bytes())?;
    let dat_path = out.join(format!("binding_{hash_v}.dat"));
    let dat: String = residuals
        .iter()
        .map(|r| format!("{} {}\n", r.m_prime, r.residual))
        .collect();
    atomic_write(&dat_path, dat.as_bytes())?;

    println!("m,m_prime,residual");
    for r in &residuals {
        println!("{},{},{}", r.m, r.m_prime, r.residual);
    }
    let worst = residuals
        .iter()
        .map(|r| r.residual)
        .fold(f64::INFINITY, f64::min);
    println!("minimum residual {worst:+.6e}");
    for p in [&json_path, &csv_path, &dat_path] {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

// ===========================================================================
// diagnose
// ===========================================================================

#[derive(Serialize)]
struct DiagnoseArtifact<'a> {
    format: &'static str,
    config_hash: &'a str,
    converged: bool,
    report: &'a tfdw::diagnostics::LocalizationReport,
}

/// Reloads a minimizer, polishes it under the same configuration, and
/// writes the full localization picture.
pub fn diagnose_cmd(cfg: &RunConfig) -> Result<u8> {
    let params = cfg
        .diagnose
        .as_ref()
        .ok_or_else(|| Error::Config("the diagnose command needs a diagnose section".into()))?;
    let solve = require_solve(cfg, "diagnose")?;
    let hash = config::physics_hash(cfg)?;
    let (state, stored_hash) = load_state(&params.state)?;
    if stored_hash != hash {
        return Err(Error::Config(format!(
            "state file {} was written under configuration {stored_hash}, the current \
             configuration hashes to {hash}; refusing to mix artifacts",
            params.state.display()
        )));
    }
    let result = minimize_from(&state, &cfg.potential, solve, &cfg.constants)?;
    let report = localization_report(&result, &params.gap_radii, &params.concentration_radii)?;

    let out = ensure_out(cfg)?;
    let json_path = out.join(format!("diagnose_{hash}.json"));
    write_json(
        &json_path,
        &DiagnoseArtifact {
            format: "tfdw-diagnose-v1",
            config_hash: &hash,
            converged: result.converged,
            report: &report,
        },
    )?;
    let gap_path = out.join(format!("localization_gap_{hash}.dat"));
    let gaps: String = report
        .localization_gaps
        .iter()
        .map(|row| format!("{} {}\n", row.r, row.value))
        .collect();
    atomic_write(&gap_path, gaps.as_bytes())?;
    let annulus_path = out.join(format!("annulus_residual_{hash}.dat"));
    let annuli: String = report
        .annulus_residuals
        .iter()
        .map(|row| format!("{} {}\n", row.r, row.value))
        .collect();
    atomic_write(&annulus_path, annuli.as_bytes())?;
    let conc_path = out.join(format!("concentration_{hash}.csv"));
    atomic_write(&conc_path, report.concentration.to_csv().as_bytes())?;

    println!("mass {}", report.mass);
    println!("system radius {:.6}", report.system_radius);
    match &report.split {
        Some(s) => println!(
            "split radius {:.6} cutoff mass {:.6} annulus mass {:.3e}",
            s.radius, s.cutoff_mass, s.annulus_mass
        ),
        None => println!("split: domain too small for the candidate annuli"),
    }
    println!("boundary mass {:.3e}", report.boundary_mass);
    for row in &report.localization_gaps {
        println!("gap R = {:<6} {:+.6e}", row.r, row.value);
    }
    for p in [&json_path, &gap_path, &annulus_path, &conc_path] {
        println!("wrote {}", p.display());
    }
    Ok(if result.converged { EXIT_OK } else { EXIT_UNCONVERGED })
}

// ===========================================================================
// asymptotics
// ===========================================================================

#[derive(Serialize)]
struct AsymptoticsArtifact<'a> {
    format: &'static str,
    config_hash: &'a str,
    /// Best quotient value found by the optimizer.
    supremum: f64,
    gn_converged: bool,
    gn_iterations: usize,
    rows: &'a [tfdw::curves::SlopeRow],
}

/// Optimizes the quotient constant, sweeps the free curve over the small
/// masses, and compares the slopes against the predicted limit.
pub fn asymptotics_cmd(cfg: &RunConfig) -> Result<u8> {
    let params = cfg.asymptotics.as_ref().ok_or_else(|| {
        Error::Config("the asymptotics command needs an asymptotics section".into())
    })?;
    if cfg.potential != PotentialSpec::None {
        return Err(Error::Config(
            "asymptotics studies the free problem; set potential to {\"type\": \"none\"}".into(),
        ));
    }
    let solve = require_solve(cfg, "asymptotics")?;
    let gn = gn_quotient_optimize(&params.gn)?;
    let curve = compute_curve(&PotentialSpec::None, &params.masses, solve, &cfg.constants)?;
    let rows = tfdw::curves::small_m_slope(&curve, gn.supremum, &cfg.constants);
    let hash = config::physics_hash(cfg)?;

    let out = ensure_out(cfg)?;
    let json_path = out.join(format!("asymptotics_{hash}.json"));
    write_json(
        &json_path,
        &AsymptoticsArtifact {
            format: "tfdw-asymptotics-v1",
            config_hash: &hash,
            supremum: gn.supremum,
            gn_converged: gn.converged,
            gn_iterations: gn.iterations,
            rows: &rows,
        },
    )?;
    let csv_path = out.join(format!("asymptotics_{hash}.csv"));
    let csv: String = std::iter::once("m,ratio,limit,deviation,linear_ratio\n".to_string())
        .chain(rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}\n",
                r.m, r.ratio, r.limit, r.deviation, r.linear_ratio
            )
        }))
        .collect();
    atomic_write(&csv_path, csv.as_bytes())?;
    let ratio_path = out.join(format!("slope_ratio_{hash}.dat"));
    let ratio_dat: String = rows
        .iter()
        .map(|r| format!("{} {}\n", r.m, r.ratio))
        .collect();
    atomic_write(&ratio_path, ratio_dat.as_bytes())?;
    let dev_path = out.join(format!("slope_deviation_{hash}.dat"));
    let dev_dat: String = rows
        .iter()
        .map(|r| format!("{} {}\n", r.m, r.deviation))
        .collect();
    atomic_write(&dev_path, dev_dat.as_bytes())?;

    println!(
        "quotient supremum {:.8} (converged {}, {} iterations)",
        gn.supremum, gn.converged, gn.iterations
    );
    println!("m,ratio,limit,deviation");
    for r in &rows {
        println!("{},{},{},{}", r.m, r.ratio, r.limit, r.deviation);
    }
    for p in [&json_path, &csv_path, &ratio_path, &dev_path] {
        println!("wrote {}", p.display());
    }
    let ok = gn.converged && curve.samples.iter().all(|s| s.converged);
    Ok(if ok { EXIT_OK } else { EXIT_UNCONVERGED })
}
