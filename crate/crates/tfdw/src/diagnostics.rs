//! Localization diagnostics: cutoff pairs, the IMS defect, the two
//! localization inequalities, the system radius, the split point, the
//! concentration function, and escape detection across nested domains.
//!
//! Inequality checks return signed residuals (claimed RHS minus LHS)
//! rather than asserting, because they hold for exact minimizers while
//! the solver delivers approximate ones; callers compare against a
//! multiple of the solver tolerance.

use crate::cartesian::Field3;
use crate::error::{Error, Result};
use crate::functional::{Constants, PotentialSpec};
use crate::minimize::MinimizeResult;
use crate::radial::RadialFunction;
use crate::State;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn smoothstep_deriv(t: f64) -> f64 {
    6.0 * t * (1.0 - t)
}

/// Radial partition of unity at cut radius R: chi = 1 inside R, 0 beyond
/// R + 1, with chi^2 + eta^2 = 1 exactly.
///
/// The transition runs the smoothstep polynomial through a quarter turn
/// (chi = cos, eta = sin of the same angle), which keeps the partition
/// identity at machine precision while both slopes stay just below 2
/// (about 1.943 at the steepest point). A plain polynomial for chi would
/// force eta = sqrt(1 - chi^2), whose slope blows past 2 near the ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPair {
    r: f64,
}

/// Builds the cutoff pair at cut radius `r >= 0`.
pub fn make_cutoff(r: f64) -> Result<CutoffPair> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "cut radius must be nonnegative and finite, got {r}"
        )));
    }
    Ok(CutoffPair { r })
}

impl CutoffPair {
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Inner window at distance `x` from the center.
    pub fn chi(&self, x: f64) -> f64 {
        let t = x - self.r;
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            (FRAC_PI_2 * smoothstep(t)).cos()
        }
    }

    /// Outer window at distance `x`; chi^2 + eta^2 = 1.
    pub fn eta(&self, x: f64) -> f64 {
        let t = x - self.r;
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            (FRAC_PI_2 * smoothstep(t)).sin()
        }
    }

    /// |chi'|^2 + |eta'|^2 at distance `x`; collapses to the single term
    /// (pi/2 smoothstep')^2 because the pair shares one angle.
    pub fn slopes_sq(&self, x: f64) -> f64 {
        let t = x - self.r;
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            let d = FRAC_PI_2 * smoothstep_deriv(t);
            d * d
        }
    }
}

/// Node geometry of either representation: distance from the origin and
/// quadrature weight per sample.
struct Nodes {
    radii: Vec<f64>,
    weights: Vec<f64>,
}

fn nodes_of(u: &State) -> Nodes {
    match u {
        State::Radial(g) => {
            let grid = g.grid();
            Nodes {
                radii: grid.nodes().to_vec(),
                weights: grid.weights().to_vec(),
            }
        }
        State::Box3(g) => {
            let grid = g.grid();
            let n = grid.n();
            let h3 = grid.spacing().powi(3);
            let mut radii = vec![0.0; grid.len()];
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..n {
                        let (x, y, z) = (grid.coord(ix), grid.coord(iy), grid.coord(iz));
                        radii[grid.idx(ix, iy, iz)] = (x * x + y * y + z * z).sqrt();
                    }
                }
            }
            Nodes {
                radii,
                weights: vec![h3; grid.len()],
            }
        }
    }
}

fn values_of(u: &State) -> &[f64] {
    match u {
        State::Radial(g) => g.values(),
        State::Box3(g) => g.values(),
    }
}

fn domain_radius(u: &State) -> f64 {
    match u {
        State::Radial(g) => g.grid().r_max(),
        State::Box3(g) => 0.5 * g.grid().edge() * 3f64.sqrt(),
    }
}

fn cutoff_mass(nodes: &Nodes, values: &[f64], pair: &CutoffPair) -> f64 {
    nodes
        .radii
        .iter()
        .zip(&nodes.weights)
        .zip(values)
        .map(|((&r, &w), &v)| {
            let c = pair.chi(r);
            w * c * c * v * v
        })
        .sum()
}

fn window_mass(nodes: &Nodes, values: &[f64], lo: f64, hi: f64) -> f64 {
    nodes
        .radii
        .iter()
        .zip(&nodes.weights)
        .zip(values)
        .map(|((&r, &w), &v)| if r >= lo && r <= hi { w * v * v } else { 0.0 })
        .sum()
}

/// Multiplies a state by the inner (chi) or outer (eta) window.
fn apply_window(u: &State, pair: &CutoffPair, inner: bool) -> Result<State> {
    match u {
        State::Radial(g) => {
            let grid = g.grid();
            let vals = grid
                .nodes()
                .iter()
                .zip(g.values())
                .map(|(&r, &v)| v * if inner { pair.chi(r) } else { pair.eta(r) })
                .collect();
            Ok(State::Radial(RadialFunction::new(grid.clone(), vals)?))
        }
        State::Box3(g) => {
            let grid = g.grid();
            let n = grid.n();
            let mut vals = g.values().to_vec();
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..n {
                        let (x, y, z) = (grid.coord(ix), grid.coord(iy), grid.coord(iz));
                        let r = (x * x + y * y + z * z).sqrt();
                        let w = if inner { pair.chi(r) } else { pair.eta(r) };
                        vals[grid.idx(ix, iy, iz)] *= w;
                    }
                }
            }
            Ok(State::Box3(Field3::new(grid.clone(), vals)?))
        }
    }
}

fn potential_values(u: &State, v: &PotentialSpec) -> Result<Vec<f64>> {
    match u {
        State::Radial(g) => v.eval_radial(g.grid()),
        State::Box3(g) => Ok(v.eval_box(g.grid())?.values().to_vec()),
    }
}

/// Discretization error of the localization identity at cut radius `r`:
/// [int |grad u|^2 - int |grad(chi u)|^2 - int |grad(eta u)|^2]
/// + int (|grad chi|^2 + |grad eta|^2) |u|^2.
///
/// The continuum value is exactly zero, so the return value measures how
/// faithfully the grid transports kinetic energy through the splitting;
/// it shrinks like h^2 under refinement.
pub fn ims_defect(u: &State, r: f64) -> Result<f64> {
    let pair = make_cutoff(r)?;
    let chi_u = apply_window(u, &pair, true)?;
    let eta_u = apply_window(u, &pair, false)?;
    let nodes = nodes_of(u);
    let cross: f64 = nodes
        .radii
        .iter()
        .zip(&nodes.weights)
        .zip(values_of(u))
        .map(|((&rad, &w), &v)| w * pair.slopes_sq(rad) * v * v)
        .sum();
    Ok(u.kinetic_density() - chi_u.kinetic_density() - eta_u.kinetic_density() + cross)
}

/// The constant in the basic localization estimate, evaluated with the
/// slope bound 2 on both windows: c_D^2/(4 c_TF) + 8 c_W. With unit
/// couplings this is 8.25.
pub fn localization_constant(k: &Constants) -> f64 {
    k.c_d * k.c_d / (4.0 * k.c_tf) + 8.0 * k.c_w
}

/// The constant in the annulus estimate, 8 c_W + c_D^2/(4 c_TF); equal in
/// value to [`localization_constant`] but quoted separately because the
/// two inequalities are independent claims.
pub fn annulus_constant(k: &Constants) -> f64 {
    8.0 * k.c_w + k.c_d * k.c_d / (4.0 * k.c_tf)
}

/// Signed residual of the basic localization estimate at cut radius `r`:
/// [-int V |eta u|^2 + C2 int_{0 < chi < 1} |u|^2] - 2 D(|chi u|^2,
/// |eta u|^2), with C2 = [`localization_constant`].
///
/// Nonnegative for exact minimizers; negative values are reported, not
/// raised, since they indicate non-minimality or discretization error.
pub fn localization_gap(u: &State, v: &PotentialSpec, r: f64, k: &Constants) -> Result<f64> {
    k.validate()?;
    v.validate()?;
    let pair = make_cutoff(r)?;
    let chi_u = apply_window(u, &pair, true)?;
    let eta_u = apply_window(u, &pair, false)?;
    let lhs = match (&chi_u, &eta_u) {
        (State::Radial(a), State::Radial(b)) => {
            let grid = a.grid();
            let rho_a =
                RadialFunction::new(grid.clone(), a.values().iter().map(|&x| x * x).collect())?;
            let rho_b =
                RadialFunction::new(grid.clone(), b.values().iter().map(|&x| x * x).collect())?;
            2.0 * crate::radial::hartree_cross(&rho_a, &rho_b)?
        }
        (State::Box3(a), State::Box3(b)) => {
            let grid = a.grid();
            let rho_b =
                Field3::new(grid.clone(), b.values().iter().map(|&x| x * x).collect())?;
            let (phi, _) = crate::cartesian::hartree_free_space(&rho_b)?;
            let h3 = grid.spacing().powi(3);
            h3 * a
                .values()
                .iter()
                .zip(phi.values())
                .map(|(&x, &p)| x * x * p)
                .sum::<f64>()
        }
        _ => unreachable!("apply_window preserves the representation"),
    };
    let pot = potential_values(u, v)?;
    let nodes = nodes_of(u);
    let vals = values_of(u);
    let mut external = 0.0;
    let mut transition = 0.0;
    for (((&rad, &w), &x), &p) in nodes
        .radii
        .iter()
        .zip(&nodes.weights)
        .zip(vals)
        .zip(&pot)
    {
        let e = pair.eta(rad);
        external += w * p * e * e * x * x;
        let c = pair.chi(rad);
        if c > 0.0 && c < 1.0 {
            transition += w * x * x;
        }
    }
    let rhs = -external + localization_constant(k) * transition;
    Ok(rhs - lhs)
}

/// Signed residual of the annulus estimate at radius `r >= 1`:
/// 12 int_{|x| >= r} (C3 + |x V(x)|) |u|^2 - (int_{|x| <= r} |u|^2)
/// (int_{|x| >= 2r} |u|^2), with C3 = [`annulus_constant`].
pub fn annulus_residual(u: &State, v: &PotentialSpec, r: f64, k: &Constants) -> Result<f64> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "the annulus estimate needs a radius of at least 1, got {r}"
        )));
    }
    k.validate()?;
    v.validate()?;
    let pot = potential_values(u, v)?;
    let nodes = nodes_of(u);
    let vals = values_of(u);
    let c3 = annulus_constant(k);
    let mut outer = 0.0;
    let mut inner_mass = 0.0;
    let mut far_mass = 0.0;
    for (((&rad, &w), &x), &p) in nodes
        .radii
        .iter()
        .zip(&nodes.weights)
        .zip(vals)
        .zip(&pot)
    {
        let q = w * x * x;
        if rad >= r {
            outer += (c3 + rad * p.abs()) * q;
        }
        if rad <= r {
            inner_mass += q;
        }
        if rad >= 2.0 * r {
            far_mass += q;
        }
    }
    Ok(12.0 * outer - inner_mass * far_mass)
}

/// Radius of the system: the R at which the windowed masses balance,
/// int |chi_R u|^2 = mass / 2, found by bisection on the increasing map
/// R -> int |chi_R u|^2 to within 1e-8 times the domain radius.
///
/// States concentrated so tightly that the window at R = 0 already holds
/// half the mass get radius 0.
pub fn radius_rm(u: &State) -> Result<f64> {
    let m = u.mass();
    if !(m > 0.0) {
        return Err(Error::Domain(
            "the zero state has no system radius".into(),
        ));
    }
    let nodes = nodes_of(u);
    let vals = values_of(u);
    let target = 0.5 * m;
    let value = |r: f64| cutoff_mass(&nodes, vals, &CutoffPair { r });
    if value(0.0) >= target {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = domain_radius(u);
    let tol = 1e-8 * hi;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if value(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Split point of a state: the annulus with the least mass inside the
/// scaled window around the system radius, and the mass captured inside
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitPoint {
    /// Chosen split radius r_m in [R_m / sqrt(m), 2 R_m / sqrt(m)].
    pub radius: f64,
    /// Mass inside the window at the split, int |chi_{r_m} u|^2.
    pub cutoff_mass: f64,
    /// Mass of the unit annulus [r_m, r_m + 1], the minimized quantity.
    pub annulus_mass: f64,
    /// sup of |x||V(x)| over nodes beyond the split radius, the potential
    /// tail entering the mass bound at the split (reported, not asserted).
    pub outer_potential_sup: f64,
}

/// Scans candidate radii in [R_m m^(-1/2), 2 R_m m^(-1/2)] for the unit
/// annulus [r, r+1] of least mass; ties within 1e-12 go to the smallest
/// radius so the choice is deterministic. The averaging argument behind
/// the estimate guarantees a small annulus exists in this window for any
/// positive mass, so any mass > 0 is accepted.
pub fn split_point(u: &State, v: &PotentialSpec) -> Result<SplitPoint> {
    let m = u.mass();
    if !(m > 0.0) {
        return Err(Error::Domain(
            "the split point needs a state of positive mass".into(),
        ));
    }
    let rm = radius_rm(u)?;
    let scale = 1.0 / m.sqrt();
    let lo = rm * scale;
    let hi = 2.0 * rm * scale;
    let extent = domain_radius(u);
    if hi + 1.0 > extent {
        return Err(Error::Domain(format!(
            "the candidate annuli reach out to {:.3} but the domain ends at {extent:.3}",
            hi + 1.0
        )));
    }
    let nodes = nodes_of(u);
    let vals = values_of(u);
    let count = 257;
    let candidates: Vec<f64> = if hi > lo {
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()
    } else {
        vec![lo]
    };
    let masses: Vec<f64> = candidates
        .iter()
        .map(|&r| window_mass(&nodes, vals, r, r + 1.0))
        .collect();
    let least = masses.iter().cloned().fold(f64::INFINITY, f64::min);
    let pick = masses
        .iter()
        .position(|&w| w <= least + 1e-12)
        .expect("a minimum always exists over a nonempty candidate list");
    let radius = candidates[pick];
    let pot = potential_values(u, v)?;
    let outer_potential_sup = nodes
        .radii
        .iter()
        .zip(&pot)
        .filter(|(&rad, _)| rad >= radius)
        .map(|(&rad, &p)| rad * p.abs())
        .fold(0.0f64, f64::max);
    Ok(SplitPoint {
        radius,
        cutoff_mass: cutoff_mass(&nodes, vals, &CutoffPair { r: radius }),
        annulus_mass: masses[pick],
        outer_potential_sup,
    })
}

/// One row of the concentration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub r: f64,
    pub m_r: f64,
}

/// Concentration function M_R = sup over centers of the mass a ball of
/// radius R captures, tabulated over the requested radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationTable {
    /// Rows in increasing R.
    pub rows: Vec<ConcentrationRow>,
    /// Smallest requested R whose ball captures more than mass^(2/3),
    /// the threshold behind the compactness argument; None when no
    /// requested radius clears it.
    pub threshold_radius: Option<f64>,
}

impl ConcentrationTable {
    /// Two-column CSV with header `R,M_R`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,M_R\n");
        for row in &self.rows {
            out.push_str(&format!("{},{}\n", row.r, row.m_r));
        }
        out
    }
}

/// Fraction of the sphere of radius `s` (centered at the origin) lying
/// inside the ball of radius `rr` centered at distance `d` along a ray.
fn cap_fraction(s: f64, d: f64, rr: f64) -> f64 {
    if d + s <= rr {
        1.0
    } else if (s - d).abs() >= rr {
        0.0
    } else {
        (0.5 * (1.0 - (d * d + s * s - rr * rr) / (2.0 * s * d))).clamp(0.0, 1.0)
    }
}

fn radial_ball_max(g: &RadialFunction, radius: f64) -> f64 {
    let grid = g.grid();
    let vals = g.values();
    let w = grid.weights();
    let r = grid.nodes();
    let mass_at = |d: f64| -> f64 {
        r.iter()
            .zip(w)
            .zip(vals)
            .map(|((&s, &wi), &v)| wi * v * v * cap_fraction(s, d, radius))
            .sum()
    };
    // coarse sweep of center offsets along a ray, then one refinement pass
    // around the best; radial symmetry makes the ray exhaustive
    let coarse = 256;
    let rmax = grid.r_max();
    let mut best = (0usize, f64::NEG_INFINITY);
    let offsets: Vec<f64> = (0..=coarse)
        .map(|i| rmax * i as f64 / coarse as f64)
        .collect();
    for (i, &d) in offsets.iter().enumerate() {
        let v = mass_at(d);
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = offsets[best.0.saturating_sub(1)];
    let hi = offsets[(best.0 + 1).min(coarse)];
    let mut peak = best.1;
    for i in 0..=64 {
        let d = lo + (hi - lo) * i as f64 / 64.0;
        peak = peak.max(mass_at(d));
    }
    peak
}

/// Tabulates the concentration function at the given radii. Radial states
/// scan ball centers along a ray through the origin; box states slide the
/// ball window over every cell by zero-padded convolution.
pub fn concentration(u: &State, radii: &[f64]) -> Result<ConcentrationTable> {
    if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(
            "concentration radii must be positive and finite".into(),
        ));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("radii validated finite"));
    let density: Option<Vec<f64>> = match u {
        State::Box3(g) => Some(g.values().iter().map(|&v| v * v).collect()),
        State::Radial(_) => None,
    };
    let mut rows = Vec::with_capacity(sorted.len());
    for &r in &sorted {
        let m_r = match u {
            State::Radial(g) => radial_ball_max(g, r),
            State::Box3(g) => g
                .grid()
                .ball_window_max(density.as_deref().expect("built for box states"), r),
        };
        rows.push(ConcentrationRow { r, m_r });
    }
    let threshold = u.mass().powf(2.0 / 3.0);
    let threshold_radius = rows
        .iter()
        .find(|row| row.m_r > threshold)
        .map(|row| row.r);
    Ok(ConcentrationTable {
        rows,
        threshold_radius,
    })
}

/// One domain size in an escape scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeRow {
    pub r_max: f64,
    pub energy: f64,
    pub boundary_mass: f64,
}

/// Outcome of comparing constrained minima across nested domains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeReport {
    pub rows: Vec<EscapeRow>,
    /// Set when the energy keeps dropping beyond three solver tolerances
    /// at every enlargement while at least 1 percent of the mass sits at
    /// the edge of the largest domain: the signature of mass escaping to
    /// infinity rather than a minimizer existing.
    pub escape_suspected: bool,
}

/// Inspects solves of the same physics on increasing domains for the
/// no-minimizer signature. Requires at least two results with identical
/// potential, constants, and target mass, ordered by strictly increasing
/// domain radius.
pub fn escape_indicator(results: &[MinimizeResult]) -> Result<EscapeReport> {
    if results.len() < 2 {
        return Err(Error::Config(
            "escape detection compares at least two nested solves".into(),
        ));
    }
    let first = &results[0];
    for r in &results[1..] {
        if r.potential != first.potential
            || r.constants != first.constants
            || r.mass_target != first.mass_target
        {
            return Err(Error::Config(
                "escape detection needs identical physics across all solves".into(),
            ));
        }
    }
    let extents: Vec<f64> = results.iter().map(|r| r.domain_extent()).collect();
    if extents.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "escape detection needs strictly increasing domain radii".into(),
        ));
    }
    let tol = results
        .iter()
        .map(|r| r.tolerance)
        .fold(0.0f64, f64::max);
    let rows: Vec<EscapeRow> = results
        .iter()
        .zip(&extents)
        .map(|(r, &r_max)| EscapeRow {
            r_max,
            energy: r.breakdown.total,
            boundary_mass: r.boundary_mass,
        })
        .collect();
    let keeps_dropping = rows.windows(2).all(|w| {
        w[1].energy < w[0].energy - 3.0 * tol * w[0].energy.abs().max(1.0)
    });
    let mass_at_edge = rows
        .last()
        .map(|row| row.boundary_mass >= 0.01 * first.mass_target)
        .unwrap_or(false);
    Ok(EscapeReport {
        rows,
        escape_suspected: keeps_dropping && mass_at_edge,
    })
}

/// One evaluated inequality residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRow {
    pub r: f64,
    pub value: f64,
}

/// Full localization picture of one solve, ready for JSON export.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub mass: f64,
    pub system_radius: f64,
    /// None when the domain is too small to host the candidate annuli.
    pub split: Option<SplitPoint>,
    pub localization_gaps: Vec<ResidualRow>,
    pub annulus_residuals: Vec<ResidualRow>,
    pub boundary_mass: f64,
    pub concentration: ConcentrationTable,
}

/// Evaluates every diagnostic against one minimization result. Gap rows
/// follow `gap_radii`; annulus rows skip radii below 1 (outside the
/// estimate's hypothesis) rather than failing the whole report.
pub fn localization_report(
    result: &MinimizeResult,
    gap_radii: &[f64],
    conc_radii: &[f64],
) -> Result<LocalizationReport> {
    let u = &result.u;
    let v = &result.potential;
    let k = &result.constants;
    let mut localization_gaps = Vec::with_capacity(gap_radii.len());
    for &r in gap_radii {
        localization_gaps.push(ResidualRow {
            r,
            value: localization_gap(u, v, r, k)?,
        });
    }
    let mut annulus_residuals = Vec::new();
    for &r in gap_radii.iter().filter(|&&r| r >= 1.0) {
        annulus_residuals.push(ResidualRow {
            r,
            value: annulus_residual(u, v, r, k)?,
        });
    }
    let split = match split_point(u, v) {
        Ok(s) => Some(s),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(LocalizationReport {
        mass: u.mass(),
        system_radius: radius_rm(u)?,
        split,
        localization_gaps,
        annulus_residuals,
        boundary_mass: result.boundary_mass,
        concentration: concentration(u, conc_radii)?,
    })
}
