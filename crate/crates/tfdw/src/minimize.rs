//! Mass-constrained minimization of the energy, the dilation reduction of
//! the free problem, the h(s) concavity diagnostic, and the
//! Gagliardo-Nirenberg quotient optimizer.
//!
//! The descent scheme is projected gradient on the mass sphere with a
//! Sobolev preconditioner: search directions solve (alpha W + c_W K) d =
//! W g_t, where W is the quadrature weight matrix and K the stiffness
//! form, so the direction stays well scaled across widely separated
//! length scales. Steps use a two-point secant (Barzilai-Borwein) guess
//! with energy backtracking; every trial renormalizes to the sphere, so
//! accepted energies are non-increasing and the constraint is exact.

use crate::banded::{BandedChol, BandedSym};
use crate::cartesian::{BoxGrid, BoxGridSpec, Field3};
use crate::error::{Error, Result};
use crate::functional::{energy, lower_bound_c1, Constants, EnergyBreakdown, PotentialSpec};
use crate::radial::{hartree_radial, RadialFunction, RadialGrid, RadialGridSpec};
use crate::State;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const ARMIJO: f64 = 1e-4;
const TAU_MIN: f64 = 1e-6;
const TAU_MAX: f64 = 1e4;
const MAX_BACKTRACKS: usize = 60;
const DILATION_PERIOD: usize = 40;

fn default_max_iter() -> usize {
    6000
}

fn default_tol() -> f64 {
    1e-8
}

/// How the trial step length is chosen each iteration. Both rules pass
/// through the same backtracking acceptance test, so the monotone-descent
/// guarantee is independent of the rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed { step: f64 },
    Adaptive,
}

/// Shape of the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedProfile {
    /// Gaussian whose width solves the closed-form dilation problem for
    /// the target mass (falls back to width 1 when nothing binds).
    Auto,
    Gaussian { width: f64 },
    Shell { radius: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Target mass of the constraint sphere.
    pub m: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Relative projected-gradient tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "SolveConfig::default_step_rule")]
    pub step_rule: StepRule,
    /// Extra solves from jittered seeds; lowest energy wins, ties within
    /// tolerance go to the smaller residual.
    #[serde(default)]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "SolveConfig::default_profile")]
    pub profile: SeedProfile,
    /// Grid for radially represented problems.
    #[serde(default)]
    pub radial_grid: RadialGridSpec,
    /// Grid for box-represented (molecular) problems.
    #[serde(default)]
    pub box_grid: BoxGridSpec,
}

impl SolveConfig {
    pub fn new(m: f64) -> Self {
        SolveConfig {
            m,
            max_iter: default_max_iter(),
            tol: default_tol(),
            step_rule: Self::default_step_rule(),
            restarts: 0,
            seed: 0,
            profile: Self::default_profile(),
            radial_grid: RadialGridSpec::default(),
            box_grid: BoxGridSpec::default(),
        }
    }

    fn default_step_rule() -> StepRule {
        StepRule::Adaptive
    }

    fn default_profile() -> SeedProfile {
        SeedProfile::Auto
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::Config(format!(
                "target mass must be positive, got {}",
                self.m
            )));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if let StepRule::Fixed { step } = self.step_rule {
            if !(step > 0.0) || !step.is_finite() {
                return Err(Error::Config(format!(
                    "fixed step must be positive, got {step}"
                )));
            }
        }
        match self.profile {
            SeedProfile::Auto => {}
            SeedProfile::Gaussian { width } => {
                if !(width > 0.0) || !width.is_finite() {
                    return Err(Error::Config(format!(
                        "seed width must be positive, got {width}"
                    )));
                }
            }
            SeedProfile::Shell { radius, width } => {
                if !(radius > 0.0 && width > 0.0) || !(radius + width).is_finite() {
                    return Err(Error::Config(format!(
                        "shell seed needs positive radius and width, got {radius} and {width}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of a constrained solve. The mass of `u` equals the target
/// within 1e-10 relative; `converged` implies `residual <= tolerance`.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub u: State,
    pub breakdown: EnergyBreakdown,
    /// Final relative projected-gradient norm.
    pub residual: f64,
    pub iterations: usize,
    /// Mass in the outermost 5 percent of the domain, an escape tell.
    pub boundary_mass: f64,
    pub converged: bool,
    /// Lagrange multiplier estimate <g, u> / (2m).
    pub multiplier: f64,
    /// Accepted-step energies in order; non-increasing by construction.
    pub energy_trace: Vec<f64>,
    pub potential: PotentialSpec,
    pub constants: Constants,
    pub mass_target: f64,
    pub tolerance: f64,
}

impl MinimizeResult {
    /// Outer radius of the computational domain (r_max, or half the box
    /// edge for 3D states).
    pub fn domain_extent(&self) -> f64 {
        match &self.u {
            State::Radial(u) => u.grid().r_max(),
            State::Box3(u) => 0.5 * u.grid().edge(),
        }
    }
}

/// One representation-specific problem: energy, gradient, metric, and
/// preconditioner over raw coefficient vectors.
trait Problem {
    /// Total energy; anything non-finite maps to +infinity so the line
    /// search rejects it.
    fn energy(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>>;
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
    fn set_alpha(&mut self, alpha: f64) -> Result<()>;
    /// Applies the inverse preconditioner to the projected gradient.
    fn precondition(&mut self, g_t: &[f64]) -> Result<Vec<f64>>;
    /// Optional closed-form dilation move (radial Coulomb problems only).
    fn dilation_candidate(&self, u: &[f64], m: f64) -> Option<Vec<f64>>;
    /// Divergence floor: energies below it indicate numerical blowup.
    fn floor(&self) -> Option<f64>;
}

struct RadialProblem {
    grid: Arc<RadialGrid>,
    pot: Vec<f64>,
    k: Constants,
    floor: Option<f64>,
    coulomb_like: bool,
    alpha: f64,
    chol: Option<BandedChol>,
}

impl RadialProblem {
    fn new(grid: Arc<RadialGrid>, v: &PotentialSpec, cfg: &SolveConfig, k: &Constants) -> Result<Self> {
        let pot = v.eval_radial(&grid)?;
        let floor = lower_bound_c1(v, k).ok().map(|c1| -10.0 * c1 * cfg.m);
        let coulomb_like = !matches!(v, PotentialSpec::RadialTable { .. });
        Ok(RadialProblem {
            grid,
            pot,
            k: *k,
            floor,
            coulomb_like,
            alpha: 0.0,
            chol: None,
        })
    }

    fn try_energy(&self, u: &[f64]) -> Result<f64> {
        let k = &self.k;
        let mut e = k.c_w * self.grid.kinetic_of(u);
        let w = self.grid.weights();
        for (i, &x) in u.iter().enumerate() {
            let a = x.abs();
            if k.with_tf {
                e += w[i] * k.c_tf * a.powf(10.0 / 3.0);
            }
            if k.with_dirac {
                e -= w[i] * k.c_d * a.powf(8.0 / 3.0);
            }
            if k.with_external {
                e += w[i] * self.pot[i] * x * x;
            }
        }
        if k.with_hartree {
            let rho = RadialFunction::new(self.grid.clone(), u.iter().map(|&x| x * x).collect())?;
            e += hartree_radial(&rho)?.1;
        }
        Ok(e)
    }

    /// Dilation response of the current state: energies along the
    /// mass-preserving family u_l obey e(l) = l^2 a - l b for Coulomb
    /// externals, with a the kinetic block and b the electrostatic one.
    fn dilation_terms(&self, u: &[f64]) -> Result<(f64, f64)> {
        let k = &self.k;
        let w = self.grid.weights();
        let mut tf = 0.0;
        let mut dirac = 0.0;
        let mut ext = 0.0;
        for (i, &x) in u.iter().enumerate() {
            let a = x.abs();
            if k.with_tf {
                tf += w[i] * a.powf(10.0 / 3.0);
            }
            if k.with_dirac {
                dirac += w[i] * a.powf(8.0 / 3.0);
            }
            if k.with_external {
                ext += w[i] * self.pot[i] * x * x;
            }
        }
        let mut hart = 0.0;
        if k.with_hartree {
            let rho = RadialFunction::new(self.grid.clone(), u.iter().map(|&x| x * x).collect())?;
            hart = hartree_radial(&rho)?.1;
        }
        let a = k.c_w * self.grid.kinetic_of(u) + k.c_tf * tf;
        let b = k.c_d * dirac - hart - ext;
        Ok((a, b))
    }
}

impl Problem for RadialProblem {
    fn energy(&self, u: &[f64]) -> f64 {
        match self.try_energy(u) {
            Ok(e) if e.is_finite() => e,
            _ => f64::INFINITY,
        }
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let k = &self.k;
        let n = self.grid.n();
        let mut neg_lap = vec![0.0; n];
        self.grid.neg_laplacian_of(u, &mut neg_lap);
        let phi = if k.with_hartree {
            let rho = RadialFunction::new(self.grid.clone(), u.iter().map(|&x| x * x).collect())?;
            Some(hartree_radial(&rho)?.0)
        } else {
            None
        };
        let mut g = vec![0.0; n];
        for (i, &x) in u.iter().enumerate() {
            let a = x.abs();
            let mut s = k.c_w * neg_lap[i];
            if k.with_tf {
                s += (5.0 / 3.0) * k.c_tf * a.powf(4.0 / 3.0) * x;
            }
            if k.with_dirac {
                s -= (4.0 / 3.0) * k.c_d * a.powf(2.0 / 3.0) * x;
            }
            if k.with_external {
                s += self.pot[i] * x;
            }
            if let Some(phi) = &phi {
                s += phi.values()[i] * x;
            }
            g[i] = 2.0 * s;
        }
        Ok(g)
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.inner(a, b)
    }

    fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        if self.chol.is_some() && alpha == self.alpha {
            return Ok(());
        }
        let mut m_op = BandedSym::zeros(self.grid.n(), self.grid.stiffness().bw);
        m_op.axpy(self.k.c_w, self.grid.stiffness());
        m_op.add_diag(alpha, self.grid.weights());
        self.chol = Some(m_op.cholesky().ok_or_else(|| {
            Error::Config(format!(
                "preconditioner factorization failed at alpha = {alpha}"
            ))
        })?);
        self.alpha = alpha;
        Ok(())
    }

    fn precondition(&mut self, g_t: &[f64]) -> Result<Vec<f64>> {
        let chol = self
            .chol
            .as_ref()
            .expect("set_alpha runs before the first preconditioned step");
        let w = self.grid.weights();
        let rhs: Vec<f64> = g_t.iter().zip(w).map(|(&g, &wi)| wi * g).collect();
        let mut d = vec![0.0; rhs.len()];
        chol.solve(&rhs, &mut d);
        Ok(d)
    }

    fn dilation_candidate(&self, u: &[f64], m: f64) -> Option<Vec<f64>> {
        if !self.coulomb_like {
            return None;
        }
        let (a, b) = self.dilation_terms(u).ok()?;
        if !(a > 0.0) || b <= 0.0 {
            return None;
        }
        let l = b / (2.0 * a);
        if !(l.is_finite() && l > 0.0) || (l - 1.0).abs() < 1e-3 {
            return None;
        }
        let scale = l.powf(1.5);
        let cand: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .map(|&r| scale * self.grid.interp(u, l * r))
            .collect();
        let mass = self.grid.mass_of(&cand);
        if !(mass > 0.0) {
            return None;
        }
        let fix = (m / mass).sqrt();
        Some(cand.into_iter().map(|x| x * fix).collect())
    }

    fn floor(&self) -> Option<f64> {
        self.floor
    }
}

struct BoxProblem {
    grid: Arc<BoxGrid>,
    pot: Field3,
    k: Constants,
    floor: Option<f64>,
    alpha: f64,
}

impl BoxProblem {
    fn new(grid: Arc<BoxGrid>, v: &PotentialSpec, cfg: &SolveConfig, k: &Constants) -> Result<Self> {
        let pot = v.eval_box(&grid)?;
        let floor = lower_bound_c1(v, k).ok().map(|c1| -10.0 * c1 * cfg.m);
        Ok(BoxProblem {
            grid,
            pot,
            k: *k,
            floor,
            alpha: 1.0,
        })
    }

    fn try_energy(&self, u: &[f64]) -> Result<f64> {
        let k = &self.k;
        let h3 = self.grid.spacing().powi(3);
        let mut e = k.c_w * self.grid.kinetic_of(u);
        for (i, &x) in u.iter().enumerate() {
            let a = x.abs();
            if k.with_tf {
                e += h3 * k.c_tf * a.powf(10.0 / 3.0);
            }
            if k.with_dirac {
                e -= h3 * k.c_d * a.powf(8.0 / 3.0);
            }
            if k.with_external {
                e += h3 * self.pot.values()[i] * x * x;
            }
        }
        if k.with_hartree {
            let rho = Field3::new(self.grid.clone(), u.iter().map(|&x| x * x).collect())?;
            e += crate::cartesian::hartree_free_space(&rho)?.1;
        }
        Ok(e)
    }
}

impl Problem for BoxProblem {
    fn energy(&self, u: &[f64]) -> f64 {
        match self.try_energy(u) {
            Ok(e) if e.is_finite() => e,
            _ => f64::INFINITY,
        }
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let k = &self.k;
        let neg_lap = self.grid.neg_laplacian_of(u);
        let phi = if k.with_hartree {
            let rho = Field3::new(self.grid.clone(), u.iter().map(|&x| x * x).collect())?;
            Some(crate::cartesian::hartree_free_space(&rho)?.0)
        } else {
            None
        };
        let mut g = vec![0.0; u.len()];
        for (i, &x) in u.iter().enumerate() {
            let a = x.abs();
            let mut s = k.c_w * neg_lap[i];
            if k.with_tf {
                s += (5.0 / 3.0) * k.c_tf * a.powf(4.0 / 3.0) * x;
            }
            if k.with_dirac {
                s -= (4.0 / 3.0) * k.c_d * a.powf(2.0 / 3.0) * x;
            }
            if k.with_external {
                s += self.pot.values()[i] * x;
            }
            if let Some(phi) = &phi {
                s += phi.values()[i] * x;
            }
            g[i] = 2.0 * s;
        }
        Ok(g)
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.inner(a, b)
    }

    fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        self.alpha = alpha;
        Ok(())
    }

    fn precondition(&mut self, g_t: &[f64]) -> Result<Vec<f64>> {
        let (alpha, c_w) = (self.alpha, self.k.c_w);
        Ok(self.grid.spectral_filter(g_t, |k2| 1.0 / (alpha + c_w * k2)))
    }

    fn dilation_candidate(&self, _u: &[f64], _m: f64) -> Option<Vec<f64>> {
        None
    }

    fn floor(&self) -> Option<f64> {
        self.floor
    }
}

struct DescentOutcome {
    u: Vec<f64>,
    iterations: usize,
    trace: Vec<f64>,
    residual: f64,
    multiplier: f64,
    converged: bool,
}

fn normalize_mass<P: Problem>(p: &P, u: &[f64], m: f64) -> Option<Vec<f64>> {
    let mass = p.inner(u, u);
    if !(mass > 0.0) || !mass.is_finite() {
        return None;
    }
    let s = (m / mass).sqrt();
    Some(u.iter().map(|&x| x * s).collect())
}

fn descent<P: Problem>(p: &mut P, seed: Vec<f64>, cfg: &SolveConfig) -> Result<DescentOutcome> {
    let m = cfg.m;
    let mut u = normalize_mass(p, &seed, m).ok_or_else(|| {
        Error::Degenerate("initial state has zero mass and cannot be normalized".into())
    })?;
    let mut e = p.energy(&u);
    if !e.is_finite() {
        return Err(Error::NonFinite {
            what: "energy of the initial state",
        });
    }
    let mut trace = vec![e];
    let mut alpha = f64::NAN;
    let mut tau = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut line_search_failed = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut multiplier = 0.0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        let g = p.gradient(&u)?;
        let gu = p.inner(&g, &u);
        multiplier = gu / (2.0 * m);
        let g_t: Vec<f64> = g
            .iter()
            .zip(u.iter())
            .map(|(&gi, &ui)| gi - gu / m * ui)
            .collect();
        let g_norm = p.inner(&g, &g).sqrt();
        let gt_norm = p.inner(&g_t, &g_t).sqrt();
        residual = gt_norm / (1.0 + g_norm);
        if residual <= cfg.tol {
            converged = true;
            break;
        }

        let alpha_target = (2.0 * multiplier.abs()).clamp(1e-4, 1e4);
        if !alpha.is_finite() || alpha_target > 3.0 * alpha || alpha_target < alpha / 3.0 {
            alpha = alpha_target;
            p.set_alpha(alpha)?;
            prev = None;
        }

        let d = p.precondition(&g_t)?;
        let du = p.inner(&d, &u);
        let mut d_t: Vec<f64> = d
            .iter()
            .zip(u.iter())
            .map(|(&di, &ui)| di - du / m * ui)
            .collect();
        let mut slope = p.inner(&g_t, &d);
        if !(slope > 0.0) || !slope.is_finite() {
            // fall back to plain projected steepest descent
            d_t = g_t.clone();
            slope = gt_norm * gt_norm;
            prev = None;
        }

        tau = match cfg.step_rule {
            StepRule::Fixed { step } => step,
            StepRule::Adaptive => match &prev {
                Some((pu, pd)) => {
                    let s: Vec<f64> = u.iter().zip(pu).map(|(&a, &b)| a - b).collect();
                    let y: Vec<f64> = d_t.iter().zip(pd).map(|(&a, &b)| a - b).collect();
                    let sy = p.inner(&s, &y);
                    if sy > 1e-300 {
                        (p.inner(&s, &s) / sy).clamp(TAU_MIN, TAU_MAX)
                    } else {
                        tau
                    }
                }
                None => tau.clamp(TAU_MIN, TAU_MAX),
            },
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let raw: Vec<f64> = u
                .iter()
                .zip(d_t.iter())
                .map(|(&ui, &di)| ui - tau * di)
                .collect();
            if let Some(cand) = normalize_mass(p, &raw, m) {
                let e_c = p.energy(&cand);
                if e_c <= e - ARMIJO * tau * slope + 1e-15 * e.abs().max(1.0) {
                    accepted = Some((cand, e_c));
                    break;
                }
            }
            tau *= 0.5;
        }

        let Some((cand, e_c)) = accepted else {
            if line_search_failed {
                break;
            }
            // one fresh attempt from steepest descent scaling
            line_search_failed = true;
            prev = None;
            tau = 1.0;
            continue;
        };
        line_search_failed = false;
        prev = Some((std::mem::take(&mut u), d_t));
        u = cand;
        e = e_c;
        trace.push(e);
        if let Some(floor) = p.floor() {
            if e < floor {
                return Err(Error::SolverDiverged { energy: e, floor });
            }
        }

        if iterations % DILATION_PERIOD == 0 {
            if let Some(cand) = p.dilation_candidate(&u, m) {
                let e_c = p.energy(&cand);
                if e_c < e - 1e-15 * e.abs().max(1.0) {
                    u = cand;
                    e = e_c;
                    trace.push(e);
                    prev = None;
                }
            }
        }
    }

    if !converged {
        // report the stationarity of the state actually returned
        let g = p.gradient(&u)?;
        let gu = p.inner(&g, &u);
        multiplier = gu / (2.0 * m);
        let g_t: Vec<f64> = g
            .iter()
            .zip(u.iter())
            .map(|(&gi, &ui)| gi - gu / m * ui)
            .collect();
        residual = p.inner(&g_t, &g_t).sqrt() / (1.0 + p.inner(&g, &g).sqrt());
        converged = residual <= cfg.tol;
    }

    Ok(DescentOutcome {
        u,
        iterations,
        trace,
        residual,
        multiplier,
        converged,
    })
}

/// Width of the Gaussian that minimizes the closed-form dilation energy
/// a / s^2 - b / s of a mass-m trial family; width 1 when nothing binds.
fn auto_width(m: f64, z: f64, k: &Constants) -> f64 {
    let pi = std::f64::consts::PI;
    let i_tf = 0.6f64.powf(1.5) / pi;
    let i_d = 0.75f64.powf(1.5) / pi.sqrt();
    let i_h = 1.0 / (2.0 * pi).sqrt();
    let i_v = (2.0 / pi).sqrt();
    let mut a = 1.5 * k.c_w * m;
    if k.with_tf {
        a += k.c_tf * m.powf(5.0 / 3.0) * i_tf;
    }
    let mut b = 0.0;
    if k.with_dirac {
        b += k.c_d * m.powf(4.0 / 3.0) * i_d;
    }
    if k.with_hartree {
        b -= m * m * i_h;
    }
    if k.with_external {
        b += z * m * i_v;
    }
    if b > 1e-12 * a {
        2.0 * a / b
    } else {
        1.0
    }
}

fn radial_seed(
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    v: &PotentialSpec,
    k: &Constants,
    jitter: f64,
) -> RadialFunction {
    let clamp_width = |w: f64| w.clamp(4.0 * grid.r_min().max(1e-3), grid.r_max() / 8.0);
    match cfg.profile {
        SeedProfile::Auto => {
            let w = clamp_width(auto_width(cfg.m, v.total_charge(), k) * jitter);
            RadialFunction::gaussian(grid.clone(), cfg.m, w)
        }
        SeedProfile::Gaussian { width } => {
            RadialFunction::gaussian(grid.clone(), cfg.m, clamp_width(width * jitter))
        }
        SeedProfile::Shell { radius, width } => RadialFunction::gaussian_shell(
            grid.clone(),
            cfg.m,
            (radius * jitter).min(0.8 * grid.r_max()),
            clamp_width(width),
        ),
    }
}

fn box_seed(
    grid: &Arc<BoxGrid>,
    cfg: &SolveConfig,
    v: &PotentialSpec,
    k: &Constants,
    jitter: f64,
) -> Result<Field3> {
    let clamp_width = |w: f64| w.clamp(2.0 * grid.spacing(), grid.edge() / 6.0);
    let (center, width, radius) = match cfg.profile {
        SeedProfile::Auto => {
            let z = v.total_charge();
            let c = match v {
                PotentialSpec::Molecular { nuclei, .. } if z > 0.0 => {
                    let mut c = [0.0; 3];
                    for nuc in nuclei {
                        for (ci, pi) in c.iter_mut().zip(nuc.position) {
                            *ci += nuc.z * pi / z;
                        }
                    }
                    c
                }
                _ => [0.0; 3],
            };
            (c, clamp_width(auto_width(cfg.m, z, k) * jitter), 0.0)
        }
        SeedProfile::Gaussian { width } => ([0.0; 3], clamp_width(width * jitter), 0.0),
        SeedProfile::Shell { radius, width } => {
            ([0.0; 3], clamp_width(width), (radius * jitter).min(0.4 * grid.edge()))
        }
    };
    let u = Field3::from_fn(grid.clone(), |x, y, z| {
        let r = ((x - center[0]).powi(2) + (y - center[1]).powi(2) + (z - center[2]).powi(2))
            .sqrt();
        (-(r - radius) * (r - radius) / (2.0 * width * width)).exp()
    })?;
    let mass = u.mass();
    if !(mass > 0.0) {
        return Err(Error::Degenerate("box seed has zero mass".into()));
    }
    let s = (cfg.m / mass).sqrt();
    Field3::new(grid.clone(), u.values().iter().map(|&x| x * s).collect())
}

fn finish(
    u: State,
    out: DescentOutcome,
    cfg: &SolveConfig,
    v: &PotentialSpec,
    k: &Constants,
) -> Result<MinimizeResult> {
    let breakdown = energy(&u, v, k)?;
    let boundary_mass = match &u {
        State::Radial(f) => f.grid().boundary_mass_of(f.values()),
        State::Box3(f) => f.grid().boundary_mass_of(f.values()),
    };
    Ok(MinimizeResult {
        u,
        breakdown,
        residual: out.residual,
        iterations: out.iterations,
        boundary_mass,
        converged: out.converged,
        multiplier: out.multiplier,
        energy_trace: out.trace,
        potential: v.clone(),
        constants: *k,
        mass_target: cfg.m,
        tolerance: cfg.tol,
    })
}

fn better(a: &MinimizeResult, b: &MinimizeResult, tol: f64) -> bool {
    // does b beat a
    let ea = a.breakdown.total;
    let eb = b.breakdown.total;
    if (ea - eb).abs() <= tol * ea.abs().max(1.0) {
        b.residual < a.residual
    } else {
        eb < ea
    }
}

/// Minimizes the energy over the sphere of mass cfg.m, choosing the
/// representation from the potential: molecular problems run on the box
/// grid, everything else on the radial grid. Restarts re-seed with
/// jittered widths and keep the lowest energy found.
pub fn minimize_mass_constrained(
    v: &PotentialSpec,
    cfg: &SolveConfig,
    k: &Constants,
) -> Result<MinimizeResult> {
    cfg.validate()?;
    k.validate()?;
    v.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut best: Option<MinimizeResult> = None;
    for attempt in 0..=cfg.restarts {
        let jitter = if attempt == 0 {
            1.0
        } else {
            rng.gen_range(0.6..1.7)
        };
        let result = match v {
            PotentialSpec::Molecular { .. } => {
                let grid = cfg.box_grid.build()?;
                let seed = box_seed(&grid, cfg, v, k, jitter)?;
                let mut p = BoxProblem::new(grid.clone(), v, cfg, k)?;
                let out = descent(&mut p, seed.values().to_vec(), cfg)?;
                let u = State::Box3(Field3::new(grid, out.u.clone())?);
                finish(u, out, cfg, v, k)?
            }
            _ => {
                let grid = cfg.radial_grid.build()?;
                let seed = radial_seed(&grid, cfg, v, k, jitter);
                let mut p = RadialProblem::new(grid.clone(), v, cfg, k)?;
                let out = descent(&mut p, seed.values().to_vec(), cfg)?;
                let u = State::Radial(RadialFunction::new(grid, out.u.clone())?);
                finish(u, out, cfg, v, k)?
            }
        };
        best = match best {
            None => Some(result),
            Some(prev) if better(&prev, &result, cfg.tol) => Some(result),
            Some(prev) => Some(prev),
        };
    }
    Ok(best.expect("at least one attempt always runs"))
}

/// Same solve, but starting from a caller-supplied state (renormalized to
/// the target mass). Used for warm-started curve sweeps and robustness
/// checks; the representation follows the initial state.
pub fn minimize_from(
    initial: &State,
    v: &PotentialSpec,
    cfg: &SolveConfig,
    k: &Constants,
) -> Result<MinimizeResult> {
    cfg.validate()?;
    k.validate()?;
    v.validate()?;
    match initial {
        State::Radial(f) => {
            let grid = f.grid().clone();
            let mut p = RadialProblem::new(grid.clone(), v, cfg, k)?;
            let out = descent(&mut p, f.values().to_vec(), cfg)?;
            let u = State::Radial(RadialFunction::new(grid, out.u.clone())?);
            finish(u, out, cfg, v, k)
        }
        State::Box3(f) => {
            let grid = f.grid().clone();
            let mut p = BoxProblem::new(grid.clone(), v, cfg, k)?;
            let out = descent(&mut p, f.values().to_vec(), cfg)?;
            let u = State::Box3(Field3::new(grid, out.u.clone())?);
            finish(u, out, cfg, v, k)
        }
    }
}

/// Best dilation of the mass-m trial family built from a unit-mass state:
/// minimizing l^2 a - l b over l >= 0 with a the kinetic block and b the
/// electrostatic one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalDilation {
    /// Minimizing dilation l*, zero when the infimum sits at l = 0.
    pub scale: f64,
    /// Minimal value, always nonpositive.
    pub value: f64,
    /// Whether the infimum is attained at a strictly positive dilation.
    pub attained: bool,
}

pub(crate) fn dilation_from_terms(a: f64, b: f64) -> OptimalDilation {
    if b > 0.0 {
        OptimalDilation {
            scale: b / (2.0 * a),
            value: -b * b / (4.0 * a),
            attained: true,
        }
    } else {
        OptimalDilation {
            scale: 0.0,
            value: 0.0,
            attained: false,
        }
    }
}

/// Evaluates the dilation reduction for target mass m on a unit-mass
/// state u: a = m^3 A + m^(11/3) B and b = m^(7/3) C - m^3 D from the
/// free-energy breakdown of u.
pub fn optimal_dilation(u: &State, m: f64, k: &Constants) -> Result<OptimalDilation> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Domain(format!("target mass must be positive, got {m}")));
    }
    let mass = u.mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "dilation reduction needs a unit-mass state, got mass {mass}"
        )));
    }
    let b = energy(u, &PotentialSpec::None, k)?;
    let a_coef = m.powi(3) * b.weizsacker + m.powf(11.0 / 3.0) * b.thomas_fermi;
    let b_coef = m.powf(7.0 / 3.0) * b.dirac - m.powi(3) * b.hartree;
    assert!(
        a_coef > 0.0,
        "kinetic terms vanish on a state of unit mass; the dilation parabola is degenerate"
    );
    Ok(dilation_from_terms(a_coef, b_coef))
}

/// One sample of the dilation response curve h(s) and its closed-form
/// derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HSample {
    pub s: f64,
    pub h: f64,
    pub dh: f64,
}

/// Evaluates h(s) = s (C - s D)_+^2 / (A + s B) on a unit-mass state,
/// together with d h / d s. Where C - s D <= 0 both vanish.
pub fn h_curve(u: &State, s_values: &[f64], k: &Constants) -> Result<Vec<HSample>> {
    let mass = u.mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "h-curve needs a unit-mass state, got mass {mass}"
        )));
    }
    if s_values.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain("h-curve samples must be positive".into()));
    }
    let b = energy(u, &PotentialSpec::None, k)?;
    let (a, bb, c, d) = (b.weizsacker, b.thomas_fermi, b.dirac, b.hartree);
    Ok(s_values
        .iter()
        .map(|&s| {
            let num = c - s * d;
            let den = a + s * bb;
            if num > 0.0 {
                HSample {
                    s,
                    h: s * num * num / den,
                    dh: num * (a * c - 3.0 * s * a * d - 2.0 * s * s * bb * d) / (den * den),
                }
            } else {
                HSample { s, h: 0.0, dh: 0.0 }
            }
        })
        .collect())
}

fn gn_default_max_iter() -> usize {
    4000
}

fn gn_default_tol() -> f64 {
    1e-8
}

/// Configuration for the quotient optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnConfig {
    #[serde(default)]
    pub grid: RadialGridSpec,
    #[serde(default = "gn_default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "gn_default_tol")]
    pub tol: f64,
}

impl Default for GnConfig {
    fn default() -> Self {
        GnConfig {
            grid: RadialGridSpec::default(),
            max_iter: gn_default_max_iter(),
            tol: gn_default_tol(),
        }
    }
}

/// Result of maximizing the quotient (int |u|^(8/3))^2 / int |grad u|^2
/// over unit-mass radial states.
#[derive(Debug, Clone)]
pub struct GnResult {
    /// Best quotient value found, a lower bound for the supremum.
    pub supremum: f64,
    /// Maximizer, rescaled by dilation to kinetic energy 1.
    pub maximizer: RadialFunction,
    pub converged: bool,
    pub iterations: usize,
}

/// Computes the quotient of a radial state directly.
pub fn gn_quotient(u: &RadialFunction) -> f64 {
    let grid = u.grid();
    let n: f64 = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| grid.weights()[i] * x.abs().powf(8.0 / 3.0))
        .sum();
    let t = u.kinetic_density();
    if t > 0.0 {
        n * n / t
    } else {
        0.0
    }
}

/// Gradient ascent on the quotient over the unit-mass sphere, with the
/// same Sobolev preconditioner as the energy solver. The quotient is
/// dilation invariant, so the reported maximizer is normalized to unit
/// kinetic energy.
pub fn gn_quotient_optimize(cfg: &GnConfig) -> Result<GnResult> {
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::Config(
            "quotient optimizer needs a positive tolerance and at least one iteration".into(),
        ));
    }
    let grid = cfg.grid.build()?;
    let n = grid.n();
    let mut m_op = BandedSym::zeros(n, grid.stiffness().bw);
    m_op.axpy(1.0, grid.stiffness());
    m_op.add_diag(1.0, grid.weights());
    let chol = m_op
        .cholesky()
        .ok_or_else(|| Error::Config("quotient preconditioner factorization failed".into()))?;

    let mut u = RadialFunction::gaussian(grid.clone(), 1.0, 1.0)
        .normalized_to(1.0)
        .values()
        .to_vec();
    let quotient = |x: &[f64]| -> (f64, f64, f64) {
        let nn: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &v)| grid.weights()[i] * v.abs().powf(8.0 / 3.0))
            .sum();
        let t = grid.kinetic_of(x);
        (nn * nn / t, nn, t)
    };
    let (mut q, mut nn, mut t) = quotient(&u);
    let mut tau = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut neg_lap = vec![0.0; n];

    while iterations < cfg.max_iter {
        iterations += 1;
        grid.neg_laplacian_of(&u, &mut neg_lap);
        let mut g = vec![0.0; n];
        for (i, &x) in u.iter().enumerate() {
            let dn = (8.0 / 3.0) * x.abs().powf(2.0 / 3.0) * x;
            g[i] = 2.0 * nn / t * dn - (nn * nn) / (t * t) * 2.0 * neg_lap[i];
        }
        let gu = grid.inner(&g, &u);
        let g_t: Vec<f64> = g
            .iter()
            .zip(u.iter())
            .map(|(&gi, &ui)| gi - gu * ui)
            .collect();
        let residual = grid.inner(&g_t, &g_t).sqrt() / (1.0 + grid.inner(&g, &g).sqrt());
        if residual <= cfg.tol {
            converged = true;
            break;
        }
        let w = grid.weights();
        let rhs: Vec<f64> = g_t.iter().zip(w).map(|(&gi, &wi)| wi * gi).collect();
        let mut d = vec![0.0; n];
        chol.solve(&rhs, &mut d);
        let du = grid.inner(&d, &u);
        let d_t: Vec<f64> = d
            .iter()
            .zip(u.iter())
            .map(|(&di, &ui)| di - du * ui)
            .collect();
        let mut stepped = false;
        for _ in 0..50 {
            let raw: Vec<f64> = u
                .iter()
                .zip(d_t.iter())
                .map(|(&ui, &di)| ui + tau * di)
                .collect();
            let mass = grid.mass_of(&raw);
            if mass > 0.0 {
                let s = (1.0 / mass).sqrt();
                let cand: Vec<f64> = raw.into_iter().map(|x| x * s).collect();
                let (q_c, n_c, t_c) = quotient(&cand);
                if q_c > q {
                    u = cand;
                    q = q_c;
                    nn = n_c;
                    t = t_c;
                    tau *= 1.3;
                    stepped = true;
                    break;
                }
            }
            tau *= 0.4;
            if tau < 1e-14 {
                break;
            }
        }
        if !stepped {
            break;
        }
    }

    let u = RadialFunction::new(grid, u)?;
    let kinetic = u.kinetic_density();
    let maximizer = u.dilate(1.0 / kinetic.sqrt())?.normalized_to(1.0);
    Ok(GnResult {
        supremum: q,
        maximizer,
        converged,
        iterations,
    })
}
