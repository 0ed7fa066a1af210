//! Energy-curve experiments: mass sweeps of the constrained minimum,
//! binding-inequality checks, the charge-normalized gap, and the
//! small-mass slope comparison.
//!
//! A curve computed with `V = None` is the radial-ansatz upper bound for
//! the free problem (the translation-invariant infimum cannot be reached
//! by a fixed-center discretization); the binding and gap checks are
//! stated so that replacing the true free curve by this upper bound only
//! strengthens the predicted inequality signs.

use crate::cartesian::{BoxGridSpec, Field3};
use crate::error::{Error, Result};
use crate::functional::{energy, Constants, PotentialSpec};
use crate::io::atomic_write;
use crate::minimize::{
    minimize_from, minimize_mass_constrained, MinimizeResult, SeedProfile, SolveConfig, StepRule,
};
use crate::radial::RadialGridSpec;
use crate::State;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One solved point of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSample {
    pub m: f64,
    pub energy: f64,
    pub residual: f64,
    pub converged: bool,
    /// Raw kinetic integral int |grad u|^2 of this point's minimizer
    /// (no coupling factor), kept for the Hardy-normalized gap.
    pub kinetic: f64,
}

/// Solver settings shared by every point of a sweep; the per-point mass
/// lives in the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveMeta {
    pub radial_grid: RadialGridSpec,
    pub box_grid: BoxGridSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub step_rule: StepRule,
    pub profile: SeedProfile,
}

impl CurveMeta {
    fn of(cfg: &SolveConfig) -> Self {
        CurveMeta {
            radial_grid: cfg.radial_grid.clone(),
            box_grid: cfg.box_grid,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            restarts: cfg.restarts,
            seed: cfg.seed,
            step_rule: cfg.step_rule,
            profile: cfg.profile,
        }
    }

    /// Rebuilds the per-point solver configuration at mass `m`.
    pub fn config_for(&self, m: f64) -> SolveConfig {
        SolveConfig {
            m,
            max_iter: self.max_iter,
            tol: self.tol,
            step_rule: self.step_rule,
            restarts: self.restarts,
            seed: self.seed,
            profile: self.profile,
            radial_grid: self.radial_grid.clone(),
            box_grid: self.box_grid,
        }
    }
}

/// A sampled energy curve m -> I_V(m) with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCurve {
    pub potential: PotentialSpec,
    pub constants: Constants,
    /// Samples in strictly increasing m.
    pub samples: Vec<CurveSample>,
    pub meta: CurveMeta,
}

impl EnergyCurve {
    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        self.constants.validate()?;
        for pair in self.samples.windows(2) {
            if !(pair[1].m > pair[0].m) {
                return Err(Error::Config(format!(
                    "curve samples must be strictly increasing in mass, got {} then {}",
                    pair[0].m, pair[1].m
                )));
            }
        }
        if self
            .samples
            .iter()
            .any(|s| !s.m.is_finite() || !s.energy.is_finite() || !(s.m > 0.0))
        {
            return Err(Error::Config(
                "curve samples must have positive finite masses and finite energies".into(),
            ));
        }
        Ok(())
    }

    fn energy_at(&self, m: f64) -> Result<f64> {
        self.samples
            .iter()
            .find(|s| s.m == m)
            .map(|s| s.energy)
            .ok_or(Error::MissingSample { m })
    }

    fn kinetic_at(&self, m: f64) -> Result<f64> {
        self.samples
            .iter()
            .find(|s| s.m == m)
            .map(|s| s.kinetic)
            .ok_or(Error::MissingSample { m })
    }
}

fn check_masses(m_values: &[f64]) -> Result<()> {
    if m_values.is_empty() {
        return Err(Error::Config("a curve needs at least one mass".into()));
    }
    if m_values.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::Config(
            "curve masses must be positive and finite".into(),
        ));
    }
    if m_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "curve masses must be sorted strictly increasing".into(),
        ));
    }
    Ok(())
}

fn sample_of(r: &MinimizeResult, m: f64, k: &Constants) -> CurveSample {
    CurveSample {
        m,
        energy: r.breakdown.total,
        residual: r.residual,
        converged: r.converged,
        kinetic: r.breakdown.weizsacker / k.c_w,
    }
}

/// Rescales the previous minimizer to the next mass and, for radial
/// Coulomb-type problems, applies the closed-form best dilation of the
/// rescaled state. A poor seed only costs iterations, so any failure
/// falls back to plain rescaling.
fn warm_seed(prev: &State, m: f64, v: &PotentialSpec, k: &Constants) -> State {
    match prev {
        State::Radial(u) => {
            let w = u.normalized_to(m);
            if matches!(v, PotentialSpec::None | PotentialSpec::Atomic { .. }) {
                if let Ok(b) = energy(&State::Radial(w.clone()), v, k) {
                    let a = b.weizsacker + b.thomas_fermi;
                    let bb = b.dirac - b.hartree - b.external;
                    if a > 0.0 && bb > 0.0 {
                        let l = (bb / (2.0 * a)).clamp(0.25, 4.0);
                        if (l - 1.0).abs() > 1e-3 {
                            if let Ok(d) = w.dilate(l) {
                                return State::Radial(d);
                            }
                        }
                    }
                }
            }
            State::Radial(w)
        }
        State::Box3(f) => {
            let mass = f.mass();
            if mass > 0.0 {
                let s = (m / mass).sqrt();
                let vals = f.values().iter().map(|&x| x * s).collect();
                if let Ok(g) = Field3::new(f.grid().clone(), vals) {
                    return State::Box3(g);
                }
            }
            State::Box3(f.clone())
        }
    }
}

/// Sweeps the constrained minimum over the given masses, warm-starting
/// each point from the previous minimizer. Non-convergence is recorded in
/// the sample; solver failures abort the sweep with the offending mass
/// attached.
pub fn compute_curve(
    v: &PotentialSpec,
    m_values: &[f64],
    cfg: &SolveConfig,
    k: &Constants,
) -> Result<EnergyCurve> {
    check_masses(m_values)?;
    let mut samples = Vec::with_capacity(m_values.len());
    let mut prev: Option<State> = None;
    for &m in m_values {
        let point_cfg = SolveConfig {
            m,
            ..cfg.clone()
        };
        let result = match &prev {
            None => minimize_mass_constrained(v, &point_cfg, k),
            Some(u) => minimize_from(&warm_seed(u, m, v, k), v, &point_cfg, k),
        }
        .map_err(|e| Error::CurvePoint {
            m,
            source: Box::new(e),
        })?;
        samples.push(sample_of(&result, m, k));
        prev = Some(result.u);
    }
    Ok(EnergyCurve {
        potential: v.clone(),
        constants: *k,
        samples,
        meta: CurveMeta::of(cfg),
    })
}

/// Same sweep with every point solved independently from a cold start, in
/// parallel. Each point derives its own seed from the base seed and its
/// index, so results do not depend on thread scheduling.
pub fn compute_curve_cold(
    v: &PotentialSpec,
    m_values: &[f64],
    cfg: &SolveConfig,
    k: &Constants,
) -> Result<EnergyCurve> {
    check_masses(m_values)?;
    let samples: Result<Vec<CurveSample>> = m_values
        .par_iter()
        .enumerate()
        .map(|(i, &m)| {
            let point_cfg = SolveConfig {
                m,
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            minimize_mass_constrained(v, &point_cfg, k)
                .map(|r| sample_of(&r, m, k))
                .map_err(|e| Error::CurvePoint {
                    m,
                    source: Box::new(e),
                })
        })
        .collect();
    Ok(EnergyCurve {
        potential: v.clone(),
        constants: *k,
        samples: samples?,
        meta: CurveMeta::of(cfg),
    })
}

/// One evaluated split of the binding inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BindingResidual {
    pub m: f64,
    pub m_prime: f64,
    /// [I_V(m') + I0(m - m')] - I_V(m); nonnegative when binding holds.
    pub residual: f64,
}

/// Evaluates the binding residual on exact curve samples (interpolation
/// is deliberately unsupported: it could fabricate violations of the
/// inequality). The conventions I_V(0) = I0(0) = 0 make degenerate
/// splits well-defined.
pub fn binding_check(
    curve_v: &EnergyCurve,
    curve_0: &EnergyCurve,
    pairs: &[(f64, f64)],
) -> Result<Vec<BindingResidual>> {
    curve_v.validate()?;
    curve_0.validate()?;
    if curve_v.constants != curve_0.constants {
        return Err(Error::Config(
            "binding check needs both curves at the same constants".into(),
        ));
    }
    if curve_0.potential != PotentialSpec::None {
        return Err(Error::Config(
            "the reference curve must be the free problem".into(),
        ));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for &(m, m_prime) in pairs {
        if !(m >= 0.0) || !(m_prime >= 0.0) || m_prime > m {
            return Err(Error::Domain(format!(
                "binding split needs 0 <= m' <= m, got m = {m}, m' = {m_prime}"
            )));
        }
        let i_v_m = if m == 0.0 { 0.0 } else { curve_v.energy_at(m)? };
        let i_v_mp = if m_prime == 0.0 {
            0.0
        } else {
            curve_v.energy_at(m_prime)?
        };
        let rest = m - m_prime;
        let i_0_rest = if rest == 0.0 {
            0.0
        } else {
            curve_0.energy_at(rest)?
        };
        out.push(BindingResidual {
            m,
            m_prime,
            residual: (i_v_mp + i_0_rest) - i_v_m,
        });
    }
    Ok(out)
}

/// One row of the gap table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub m: f64,
    /// I0(m) - I_V(m), positive whenever the potential helps binding.
    pub gap: f64,
    /// gap / (Z * 2 sqrt(m T_V(m))), the Hardy-chain normalization that
    /// is predicted to stay at or below 1 up to vanishing corrections.
    pub normalized_gap: f64,
}

/// Tabulates the attraction gap and its charge-normalized form at every
/// mass of the V-curve. A conventional (0, 0, 0) row leads the table.
pub fn gap_curve(curve_v: &EnergyCurve, curve_0: &EnergyCurve) -> Result<Vec<GapRow>> {
    curve_v.validate()?;
    curve_0.validate()?;
    if curve_0.potential != PotentialSpec::None {
        return Err(Error::Config(
            "the reference curve must be the free problem".into(),
        ));
    }
    let z = curve_v.potential.total_charge();
    if !(z > 0.0) {
        return Err(Error::Domain(
            "the gap curve needs a potential with positive total charge".into(),
        ));
    }
    let mut rows = vec![GapRow {
        m: 0.0,
        gap: 0.0,
        normalized_gap: 0.0,
    }];
    for s in &curve_v.samples {
        let i_0 = curve_0.energy_at(s.m)?;
        let gap = i_0 - s.energy;
        let t = curve_v.kinetic_at(s.m)?;
        if !(t > 0.0) {
            return Err(Error::Degenerate(format!(
                "curve sample at m = {} has no kinetic energy to normalize against",
                s.m
            )));
        }
        rows.push(GapRow {
            m: s.m,
            gap,
            normalized_gap: gap / (z * 2.0 * (s.m * t).sqrt()),
        });
    }
    Ok(rows)
}

/// One row of the small-mass comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeRow {
    pub m: f64,
    /// I0(m) / m^(5/3).
    pub ratio: f64,
    /// The predicted small-mass limit -(c_D^2 / (4 c_W)) S.
    pub limit: f64,
    /// |ratio - limit| / |limit|.
    pub deviation: f64,
    /// I0(m) / m, whose decay to zero is the classical small-mass fact.
    pub linear_ratio: f64,
}

/// Compares a free-problem curve against the small-mass law
/// I0(m) / m^(5/3) -> -(c_D^2/(4 c_W)) S, where S is the quotient
/// supremum estimate. Meaningful for curves computed with V = None.
pub fn small_m_slope(curve_0: &EnergyCurve, s: f64, k: &Constants) -> Vec<SlopeRow> {
    let limit = -(k.c_d * k.c_d / (4.0 * k.c_w)) * s;
    curve_0
        .samples
        .iter()
        .map(|sample| {
            let ratio = sample.energy / sample.m.powf(5.0 / 3.0);
            SlopeRow {
                m: sample.m,
                ratio,
                limit,
                deviation: (ratio - limit).abs() / limit.abs(),
                linear_ratio: sample.energy / sample.m,
            }
        })
        .collect()
}

/// Serialization formats for curve artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Renders the sample table as CSV with the fixed header
/// `m,energy,residual,converged`.
pub fn curve_csv(curve: &EnergyCurve) -> String {
    let mut out = String::from("m,energy,residual,converged\n");
    for s in &curve.samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.m, s.energy, s.residual, s.converged
        ));
    }
    out
}

/// Writes a curve to disk atomically (temp file + rename). CSV keeps the
/// four tabular columns; JSON mirrors the full type and round-trips
/// bit-for-bit.
pub fn export_curve(curve: &EnergyCurve, path: &Path, format: ExportFormat) -> Result<()> {
    let payload = match format {
        ExportFormat::Csv => curve_csv(curve),
        ExportFormat::Json => {
            let mut s = serde_json::to_string_pretty(curve)?;
            s.push('\n');
            s
        }
    };
    atomic_write(path, payload.as_bytes())
}

/// Reads a JSON curve back, validating the sample ordering.
pub fn import_curve(path: &Path) -> Result<EnergyCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let curve: EnergyCurve = serde_json::from_str(&text)?;
    curve.validate()?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartesian::Nucleus;

    fn quick_cfg(n: usize) -> SolveConfig {
        SolveConfig {
            tol: 1e-7,
            max_iter: 4000,
            radial_grid: RadialGridSpec::logarithmic(1e-4, 40.0, n),
            ..SolveConfig::new(1.0)
        }
    }

    fn synthetic_curve(v: PotentialSpec, points: &[(f64, f64, f64)]) -> EnergyCurve {
        EnergyCurve {
            potential: v,
            constants: Constants::unit(),
            samples: points
                .iter()
                .map(|&(m, energy, kinetic)| CurveSample {
                    m,
                    energy,
                    residual: 1e-9,
                    converged: true,
                    kinetic,
                })
                .collect(),
            meta: CurveMeta::of(&quick_cfg(700)),
        }
    }

    #[test]
    fn single_mass_reduces_to_one_minimize_call() {
        let cfg = quick_cfg(600);
        let k = Constants::unit();
        let curve = compute_curve(&PotentialSpec::None, &[1.0], &cfg, &k).unwrap();
        assert_eq!(curve.samples.len(), 1);
        let direct = minimize_mass_constrained(&PotentialSpec::None, &cfg, &k).unwrap();
        assert_eq!(curve.samples[0].energy, direct.breakdown.total);
        assert!(curve.samples[0].energy < 0.0);
        assert!(curve.samples[0].converged);
    }

    #[test]
    fn curve_energies_are_negative_and_strictly_decreasing() {
        let cfg = quick_cfg(700);
        let k = Constants::unit();
        let v = PotentialSpec::Atomic { z: 1.0 };
        let curve = compute_curve(&v, &[0.25, 0.5, 1.0], &cfg, &k).unwrap();
        for s in &curve.samples {
            assert!(s.converged, "m = {} residual {}", s.m, s.residual);
            assert!(s.energy < 0.0, "m = {} energy {}", s.m, s.energy);
            assert!(s.kinetic > 0.0);
        }
        for w in curve.samples.windows(2) {
            assert!(
                w[1].energy < w[0].energy - 2.0 * cfg.tol,
                "curve not strictly decreasing: {} then {}",
                w[0].energy,
                w[1].energy
            );
        }
        curve.validate().unwrap();
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let cfg = quick_cfg(700);
        let k = Constants::unit();
        let v = PotentialSpec::Atomic { z: 1.0 };
        let masses = [0.5, 1.0];
        let warm = compute_curve(&v, &masses, &cfg, &k).unwrap();
        let cold = compute_curve_cold(&v, &masses, &cfg, &k).unwrap();
        for (a, b) in warm.samples.iter().zip(&cold.samples) {
            assert!(
                (a.energy - b.energy).abs() <= 3.0 * cfg.tol,
                "m = {}: warm {} vs cold {}",
                a.m,
                a.energy,
                b.energy
            );
        }
    }

    #[test]
    fn solver_failures_carry_the_offending_mass() {
        // a nucleus outside the box fails the solve at the first point
        let v = PotentialSpec::Molecular {
            nuclei: vec![Nucleus {
                z: 1.0,
                position: [20.0, 0.0, 0.0],
            }],
            smearing: None,
        };
        let cfg = SolveConfig {
            box_grid: BoxGridSpec { l: 16.0, n: 16 },
            ..SolveConfig::new(1.0)
        };
        let err = compute_curve(&v, &[0.5, 1.0], &cfg, &Constants::unit()).unwrap_err();
        match err {
            Error::CurvePoint { m, .. } => assert_eq!(m, 0.5),
            other => panic!("expected a curve-point error, got {other}"),
        }
    }

    #[test]
    fn rejects_unsorted_or_empty_mass_lists() {
        let cfg = quick_cfg(400);
        let k = Constants::unit();
        assert!(compute_curve(&PotentialSpec::None, &[], &cfg, &k).is_err());
        assert!(compute_curve(&PotentialSpec::None, &[1.0, 0.5], &cfg, &k).is_err());
        assert!(compute_curve(&PotentialSpec::None, &[0.5, 0.5], &cfg, &k).is_err());
        assert!(compute_curve(&PotentialSpec::None, &[-1.0], &cfg, &k).is_err());
    }

    #[test]
    fn binding_residuals_cover_the_stated_splits() {
        let curve_v = synthetic_curve(
            PotentialSpec::Atomic { z: 1.0 },
            &[(0.25, -0.073, 0.1), (0.5, -0.135, 0.2), (1.0, -0.217, 0.4)],
        );
        let curve_0 = synthetic_curve(
            PotentialSpec::None,
            &[
                (0.25, -0.000875, 0.01),
                (0.5, -0.001258, 0.02),
                (0.75, -0.001143, 0.03),
                (1.0, -0.000946, 0.04),
            ],
        );
        let rows = binding_check(
            &curve_v,
            &curve_0,
            &[(1.0, 1.0), (1.0, 0.0), (1.0, 0.5), (1.0, 0.25)],
        )
        .unwrap();
        // degenerate split: I_V(m) + I0(0) - I_V(m)
        assert_eq!(rows[0].residual, 0.0);
        // pure-detachment split: I0(m) - I_V(m)
        assert!((rows[1].residual - (-0.000946 + 0.217)).abs() < 1e-15);
        assert!(rows[2].residual > 0.0);
        assert!(rows[3].residual > 0.0);
    }

    #[test]
    fn binding_check_rejects_gaps_and_mismatches() {
        let curve_v = synthetic_curve(PotentialSpec::Atomic { z: 1.0 }, &[(1.0, -0.2, 0.4)]);
        let curve_0 = synthetic_curve(PotentialSpec::None, &[(1.0, -0.001, 0.04)]);
        match binding_check(&curve_v, &curve_0, &[(1.0, 0.25)]) {
            Err(Error::MissingSample { m }) => assert_eq!(m, 0.25),
            other => panic!("expected a missing-sample error, got {other:?}"),
        }
        assert!(binding_check(&curve_v, &curve_0, &[(0.5, 1.0)]).is_err());
        let mut wrong_k = curve_0.clone();
        wrong_k.constants.c_d = 2.0;
        assert!(binding_check(&curve_v, &wrong_k, &[(1.0, 1.0)]).is_err());
        let not_free = synthetic_curve(PotentialSpec::Atomic { z: 2.0 }, &[(1.0, -0.5, 0.4)]);
        assert!(binding_check(&curve_v, &not_free, &[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn gap_rows_lead_with_the_zero_convention_and_normalize() {
        let curve_v = synthetic_curve(
            PotentialSpec::Atomic { z: 1.0 },
            &[(0.25, -0.073, 0.05), (1.0, -0.217, 0.4)],
        );
        let curve_0 = synthetic_curve(
            PotentialSpec::None,
            &[(0.25, -0.000875, 0.01), (1.0, -0.000946, 0.04)],
        );
        let rows = gap_curve(&curve_v, &curve_0).unwrap();
        assert_eq!(rows[0].m, 0.0);
        assert_eq!(rows[0].gap, 0.0);
        assert_eq!(rows[0].normalized_gap, 0.0);
        for row in &rows[1..] {
            assert!(row.gap > 0.0);
        }
        let expected = (-0.000875 - (-0.073)) / (2.0 * (0.25f64 * 0.05).sqrt());
        assert!((rows[1].normalized_gap - expected).abs() < 1e-15);
    }

    #[test]
    fn gap_curve_requires_positive_charge() {
        let curve_v = synthetic_curve(PotentialSpec::None, &[(1.0, -0.001, 0.04)]);
        let curve_0 = synthetic_curve(PotentialSpec::None, &[(1.0, -0.001, 0.04)]);
        assert!(matches!(
            gap_curve(&curve_v, &curve_0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn small_m_slope_compares_against_the_quotient_limit() {
        let s = 0.0911;
        let k = Constants::unit();
        let points: Vec<(f64, f64, f64)> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&m: &f64| (m, -(s / 4.0) * m.powf(5.0 / 3.0) * (1.0 + m), 0.01))
            .collect();
        let curve = synthetic_curve(PotentialSpec::None, &points);
        let rows = small_m_slope(&curve, s, &k);
        for row in &rows {
            assert_eq!(row.limit, -s / 4.0);
            assert!(
                (row.deviation - row.m).abs() < 1e-10,
                "constructed deviation should be m itself, got {} at m = {}",
                row.deviation,
                row.m
            );
        }
        // the linear ratio decays toward zero as the mass shrinks
        assert!(rows[0].linear_ratio.abs() < rows[1].linear_ratio.abs());
        assert!(rows[1].linear_ratio.abs() < rows[2].linear_ratio.abs());
    }

    #[test]
    fn csv_uses_the_exact_header_and_survives_empty_curves() {
        let mut curve = synthetic_curve(PotentialSpec::None, &[(1.0, -0.5, 0.1)]);
        let csv = curve_csv(&curve);
        assert!(csv.starts_with("m,energy,residual,converged\n"));
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().ends_with(",true"));
        curve.samples.clear();
        assert_eq!(curve_csv(&curve), "m,energy,residual,converged\n");
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.json");
        let curve = synthetic_curve(
            PotentialSpec::Atomic { z: 1.0 },
            &[(0.1, -0.03125, 0.7), (0.3, -0.0625, 1.9)],
        );
        export_curve(&curve, &path, ExportFormat::Json).unwrap();
        let back = import_curve(&path).unwrap();
        assert_eq!(curve, back);
    }

    #[test]
    fn export_failures_carry_the_path() {
        let curve = synthetic_curve(PotentialSpec::None, &[(1.0, -0.5, 0.1)]);
        let bad = Path::new("/nonexistent-root/curve.json");
        match export_curve(&curve, bad, ExportFormat::Json) {
            Err(Error::Io { path, .. }) => {
                assert!(path.to_string_lossy().contains("nonexistent-root"))
            }
            other => panic!("expected an io error, got {other:?}"),
        }
    }
}
