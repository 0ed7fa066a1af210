//! The run configuration: one strict JSON document, dotted-path
//! overrides, and the hashes that tie every artifact to the
//! configuration that produced it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tfdw::curves::CurveMeta;
use tfdw::functional::{Constants, PotentialSpec};
use tfdw::io::config_hash;
use tfdw::minimize::{GnConfig, SolveConfig};
use tfdw::{Error, Result};

/// Everything a command needs, parsed strictly: unknown keys are
/// rejected so a typo cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "Constants::unit")]
    pub constants: Constants,
    #[serde(default = "default_potential")]
    pub potential: PotentialSpec,
    /// Solver settings; required by minimize, curve, diagnose, and
    /// asymptotics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<BindingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose: Option<DiagnoseParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticsParams>,
    /// Where artifacts land; the TFDW_OUT environment variable
    /// overrides it.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_potential() -> PotentialSpec {
    PotentialSpec::None
}

fn default_out_dir() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveParams {
    /// Masses of the sweep, strictly increasing.
    pub masses: Vec<f64>,
    /// Solve every point independently from a cold start instead of
    /// warm-starting along the curve; required for --jobs > 1.
    #[serde(default)]
    pub cold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingParams {
    /// Curve artifact for the potential under study.
    pub curve_v: PathBuf,
    /// Free-problem curve artifact (potential none).
    pub curve_0: PathBuf,
    /// Splits (m, m') to evaluate; omit to derive every split whose
    /// parts are sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseParams {
    /// State file written by the minimize command under this same
    /// configuration.
    pub state: PathBuf,
    /// Window radii for the localization gap (annulus rows skip
    /// radii below 1).
    #[serde(default = "default_gap_radii")]
    pub gap_radii: Vec<f64>,
    /// Ball radii for the concentration table.
    #[serde(default = "default_concentration_radii")]
    pub concentration_radii: Vec<f64>,
}

fn default_gap_radii() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

fn default_concentration_radii() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsParams {
    /// Small masses to compare against the quotient limit, strictly
    /// increasing.
    pub masses: Vec<f64>,
    /// Settings of the quotient optimizer.
    #[serde(default)]
    pub gn: GnConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.potential.validate()?;
        if let Some(solve) = &self.solve {
            solve.validate()?;
        }
        if let Some(curve) = &self.curve {
            validate_mass_list("curve.masses", &curve.masses)?;
        }
        if let Some(asym) = &self.asymptotics {
            validate_mass_list("asymptotics.masses", &asym.masses)?;
        }
        Ok(())
    }
}

fn validate_mass_list(what: &str, masses: &[f64]) -> Result<()> {
    if masses.is_empty() {
        return Err(Error::Config(format!("{what} must list at least one mass")));
    }
    if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::Config(format!(
            "{what} must be positive and finite"
        )));
    }
    if masses.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!(
            "{what} must be strictly increasing"
        )));
    }
    Ok(())
}

/// Loads the configuration document, applies the dotted-path overrides
/// in order, and parses strictly. A missing --config starts from the
/// empty document, so every field takes its default.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text)?
        }
        None => Value::Object(Default::default()),
    };
    for spec in overrides {
        apply_override(&mut doc, spec)?;
    }
    let cfg: RunConfig = serde_json::from_value(doc)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies one `path=value` override to the raw document. The value is
/// parsed as JSON, falling back to a bare string; path segments descend
/// into objects (created on demand) and numeric segments index arrays.
fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form path=value")))?;
    if path.is_empty() {
        return Err(Error::Config(format!(
            "override '{spec}' has an empty path"
        )));
    }
    let mut pending = Some(
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())),
    );
    let segments: Vec<&str> = path.split('.').collect();
    let mut cur = doc;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = cur.as_array_mut().ok_or_else(|| {
                Error::Config(format!(
                    "override path '{path}': segment '{seg}' indexes a non-array"
                ))
            })?;
            let len = arr.len();
            let slot = arr.get_mut(idx).ok_or_else(|| {
                Error::Config(format!(
                    "override path '{path}': index {idx} is out of bounds (array length {len})"
                ))
            })?;
            if last {
                *slot = pending.take().expect("override value set once");
                return Ok(());
            }
            cur = slot;
        } else {
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            }
            let map = cur.as_object_mut().ok_or_else(|| {
                Error::Config(format!(
                    "override path '{path}': segment '{seg}' descends into a non-object"
                ))
            })?;
            if last {
                map.insert(seg.to_string(), pending.take().expect("override value set once"));
                return Ok(());
            }
            cur = map.entry(seg.to_string()).or_insert(Value::Null);
        }
    }
    unreachable!("split('.') yields at least one segment");
}

/// Output directory, with the TFDW_OUT environment variable taking
/// precedence over the configured one.
pub fn out_dir(cfg: &RunConfig) -> PathBuf {
    std::env::var_os("TFDW_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.out_dir.clone())
}

#[derive(Serialize)]
struct PhysicsKey<'a> {
    constants: &'a Constants,
    potential: &'a PotentialSpec,
    solve: Option<&'a SolveConfig>,
}

/// Hash of the physics of a run: constants, potential, and solver
/// settings. Stamped on states, summaries, and diagnostics so artifacts
/// from different runs cannot be mixed unnoticed.
pub fn physics_hash(cfg: &RunConfig) -> Result<String> {
    config_hash(&PhysicsKey {
        constants: &cfg.constants,
        potential: &cfg.potential,
        solve: cfg.solve.as_ref(),
    })
}

/// The per-point solver settings shared by a whole sweep.
pub fn family_meta(solve: &SolveConfig) -> CurveMeta {
    CurveMeta {
        radial_grid: solve.radial_grid.clone(),
        box_grid: solve.box_grid,
        tol: solve.tol,
        max_iter: solve.max_iter,
        restarts: solve.restarts,
        seed: solve.seed,
        step_rule: solve.step_rule,
        profile: solve.profile,
    }
}

#[derive(Serialize)]
struct FamilyKey<'a> {
    constants: &'a Constants,
    meta: &'a CurveMeta,
}

/// Hash of what two curves must share to be comparable: constants and
/// sweep settings, but not the potential. Binding refuses curve pairs
/// whose family hashes differ.
pub fn family_hash(constants: &Constants, meta: &CurveMeta) -> Result<String> {
    config_hash(&FamilyKey { constants, meta })
}

#[derive(Serialize)]
struct PointKey<'a> {
    constants: &'a Constants,
    potential: &'a PotentialSpec,
    meta: &'a CurveMeta,
    cold: bool,
}

/// Hash identifying one sweep's points completely: potential and sweep
/// mode included, since warm chains and cold starts land on minimizers
/// that agree only within tolerance. Used in curve artifact filenames
/// and resume checkpoints.
pub fn point_hash(
    constants: &Constants,
    potential: &PotentialSpec,
    meta: &CurveMeta,
    cold: bool,
) -> Result<String> {
    config_hash(&PointKey {
        constants,
        potential,
        meta,
        cold,
    })
}
