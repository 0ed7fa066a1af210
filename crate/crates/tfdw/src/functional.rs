//! The TFDW energy functional: coupling constants, external potentials,
//! term-by-term energy breakdown, the Euler-Lagrange gradient, and the
//! explicit constants entering the energy lower bounds.

use crate::cartesian::{molecular_potential, BoxGrid, Field3, Nucleus};
use crate::error::{Error, Result};
use crate::radial::{hartree_radial, RadialFunction, RadialGrid};
use crate::State;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

fn default_coupling() -> f64 {
    1.0
}

fn default_toggle() -> bool {
    true
}

/// Coupling constants of the functional plus per-term toggles. The
/// toggles exist for oracle runs (for example the pure-Weizsacker
/// hydrogen check); production paths keep every term enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default = "default_coupling")]
    pub c_tf: f64,
    #[serde(default = "default_coupling")]
    pub c_d: f64,
    #[serde(default = "default_coupling")]
    pub c_w: f64,
    #[serde(default = "default_toggle")]
    pub with_tf: bool,
    #[serde(default = "default_toggle")]
    pub with_dirac: bool,
    #[serde(default = "default_toggle")]
    pub with_hartree: bool,
    #[serde(default = "default_toggle")]
    pub with_external: bool,
}

impl Default for Constants {
    fn default() -> Self {
        Constants::unit()
    }
}

impl Constants {
    /// All couplings 1, all terms enabled.
    pub fn unit() -> Self {
        Constants {
            c_tf: 1.0,
            c_d: 1.0,
            c_w: 1.0,
            with_tf: true,
            with_dirac: true,
            with_hartree: true,
            with_external: true,
        }
    }

    /// Hartree atomic units with the full von Weizsacker coefficient:
    /// c_TF = (3/10)(3 pi^2)^(2/3), c_D = (3/4)(3/pi)^(1/3), c_W = 1/2.
    pub fn physical() -> Self {
        let pi = std::f64::consts::PI;
        Constants {
            c_tf: 0.3 * (3.0 * pi * pi).powf(2.0 / 3.0),
            c_d: 0.75 * (3.0 / pi).powf(1.0 / 3.0),
            c_w: 0.5,
            with_tf: true,
            with_dirac: true,
            with_hartree: true,
            with_external: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_tf", self.c_tf), ("c_d", self.c_d), ("c_w", self.c_w)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "coupling {name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// External potential of the model. Every variant is attractive
/// (nonpositive) where defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// V = 0, the free problem.
    None,
    /// V(x) = -z/|x|.
    Atomic { z: f64 },
    /// V(x) = -sum_j z_j/|x - r_j|, evaluated on a box grid with
    /// Gaussian smearing (width `smearing`, default two grid spacings).
    Molecular {
        nuclei: Vec<Nucleus>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smearing: Option<f64>,
    },
    /// Tabulated nonpositive radial potential with r V(r) -> 0; values
    /// interpolate linearly between samples, clamp below the first
    /// sample, and vanish beyond the last.
    RadialTable { rs: Vec<f64>, vs: Vec<f64> },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::None => Ok(()),
            PotentialSpec::Atomic { z } => {
                if *z < 0.0 || !z.is_finite() {
                    return Err(Error::Domain(format!(
                        "atomic charge must be nonnegative, got {z}"
                    )));
                }
                Ok(())
            }
            PotentialSpec::Molecular { nuclei, smearing } => {
                for nuc in nuclei {
                    if nuc.z < 0.0 || !nuc.z.is_finite() {
                        return Err(Error::Domain(format!(
                            "nuclear charge must be nonnegative, got {}",
                            nuc.z
                        )));
                    }
                    if nuc.position.iter().any(|c| !c.is_finite()) {
                        return Err(Error::NonFinite {
                            what: "nuclear position",
                        });
                    }
                }
                if let Some(s) = smearing {
                    if !(*s > 0.0) || !s.is_finite() {
                        return Err(Error::Domain(format!(
                            "smearing width must be positive, got {s}"
                        )));
                    }
                }
                Ok(())
            }
            PotentialSpec::RadialTable { rs, vs } => {
                if rs.len() != vs.len() || rs.len() < 2 {
                    return Err(Error::Config(format!(
                        "radial table needs matching sample arrays of length at least 2, \
                         got {} radii and {} values",
                        rs.len(),
                        vs.len()
                    )));
                }
                if rs.iter().any(|r| !r.is_finite()) || vs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "radial table samples",
                    });
                }
                if rs[0] < 0.0 || rs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain(
                        "radial table radii must be nonnegative and strictly increasing".into(),
                    ));
                }
                if vs.iter().any(|&v| v > 0.0) {
                    return Err(Error::Domain(
                        "radial table potentials must be nonpositive".into(),
                    ));
                }
                // decay hypothesis r V(r) -> 0, checked on the sampled
                // tail: the last |r V| may not dominate the table
                let rv: Vec<f64> = rs.iter().zip(vs).map(|(r, v)| (r * v).abs()).collect();
                let peak = rv.iter().fold(0.0f64, |a, &b| a.max(b));
                let last = *rv.last().unwrap();
                if peak > 0.0 && last > 0.5 * peak {
                    return Err(Error::Domain(format!(
                        "radial table tail does not decay: |r V| ends at {last:.3e} \
                         against a peak of {peak:.3e}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Total nuclear charge; zero for the free problem and for tables.
    pub fn total_charge(&self) -> f64 {
        match self {
            PotentialSpec::None | PotentialSpec::RadialTable { .. } => 0.0,
            PotentialSpec::Atomic { z } => *z,
            PotentialSpec::Molecular { nuclei, .. } => nuclei.iter().map(|n| n.z).sum(),
        }
    }

    /// Samples the potential at the nodes of a radial grid. Molecular
    /// potentials reduce to atomic form when every nucleus sits at the
    /// origin and are a configuration error otherwise.
    pub(crate) fn eval_radial(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            PotentialSpec::None => Ok(vec![0.0; grid.n()]),
            PotentialSpec::Atomic { z } => {
                Ok(grid.nodes().iter().map(|&r| -z / r.max(1e-300)).collect())
            }
            PotentialSpec::Molecular { nuclei, .. } => {
                if nuclei.iter().all(|n| n.position.iter().all(|&c| c == 0.0)) {
                    let z: f64 = nuclei.iter().map(|n| n.z).sum();
                    PotentialSpec::Atomic { z }.eval_radial(grid)
                } else {
                    Err(Error::Config(
                        "off-center molecular potentials need the box representation".into(),
                    ))
                }
            }
            PotentialSpec::RadialTable { rs, vs } => Ok(grid
                .nodes()
                .iter()
                .map(|&r| table_interp(rs, vs, r))
                .collect()),
        }
    }

    /// Samples the potential on a box grid; atomic charges become a
    /// single smeared nucleus at the origin.
    pub(crate) fn eval_box(&self, grid: &Arc<BoxGrid>) -> Result<Field3> {
        self.validate()?;
        match self {
            PotentialSpec::None => Ok(Field3::zeros(grid.clone())),
            PotentialSpec::Atomic { z } => molecular_potential(
                grid.clone(),
                &[Nucleus {
                    z: *z,
                    position: [0.0; 3],
                }],
                2.0 * grid.spacing(),
            ),
            PotentialSpec::Molecular { nuclei, smearing } => molecular_potential(
                grid.clone(),
                nuclei,
                smearing.unwrap_or(2.0 * grid.spacing()),
            ),
            PotentialSpec::RadialTable { rs, vs } => {
                let (rs, vs) = (rs.clone(), vs.clone());
                Field3::from_fn(grid.clone(), move |x, y, z| {
                    table_interp(&rs, &vs, (x * x + y * y + z * z).sqrt())
                })
            }
        }
    }
}

fn table_interp(rs: &[f64], vs: &[f64], r: f64) -> f64 {
    if r <= rs[0] {
        return vs[0];
    }
    if r >= *rs.last().unwrap() {
        return 0.0;
    }
    let j = rs.partition_point(|&s| s <= r).min(rs.len() - 1);
    let (r0, r1) = (rs[j - 1], rs[j]);
    let t = (r - r0) / (r1 - r0);
    vs[j - 1] + t * (vs[j] - vs[j - 1])
}

/// The five terms of the energy and their total. The stored `dirac`
/// value is the magnitude of the attractive exchange term; the total
/// subtracts it. The summation order of `total` is fixed so repeated
/// evaluations of the same state are bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// c_W int |grad u|^2.
    pub weizsacker: f64,
    /// c_TF int |u|^(10/3).
    pub thomas_fermi: f64,
    /// c_D int |u|^(8/3), entering the total with a minus sign.
    pub dirac: f64,
    /// int V |u|^2.
    pub external: f64,
    /// D(|u|^2, |u|^2), half the Coulomb self-interaction.
    pub hartree: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub(crate) fn compose(
        weizsacker: f64,
        thomas_fermi: f64,
        dirac: f64,
        external: f64,
        hartree: f64,
    ) -> Self {
        EnergyBreakdown {
            weizsacker,
            thomas_fermi,
            dirac,
            external,
            hartree,
            total: weizsacker + thomas_fermi - dirac + external + hartree,
        }
    }
}

struct TermIntegrals {
    tf: f64,
    dirac: f64,
    external: f64,
    hartree: f64,
}

fn pointwise_terms(
    values: &[f64],
    weights: impl Fn(usize) -> f64,
    potential: &[f64],
    k: &Constants,
) -> TermIntegrals {
    let mut tf = 0.0;
    let mut dirac = 0.0;
    let mut external = 0.0;
    for (i, &u) in values.iter().enumerate() {
        let w = weights(i);
        let a = u.abs();
        if k.with_tf {
            tf += w * a.powf(10.0 / 3.0);
        }
        if k.with_dirac {
            dirac += w * a.powf(8.0 / 3.0);
        }
        if k.with_external {
            external += w * potential[i] * u * u;
        }
    }
    TermIntegrals {
        tf: k.c_tf * tf,
        dirac: k.c_d * dirac,
        external,
        hartree: 0.0,
    }
}

/// Evaluates the full energy of a state under the given potential and
/// couplings, returning every term separately.
pub fn energy(u: &State, v: &PotentialSpec, k: &Constants) -> Result<EnergyBreakdown> {
    k.validate()?;
    match u {
        State::Radial(u) => {
            let grid = u.grid();
            let pot = v.eval_radial(grid)?;
            let w = grid.weights();
            let mut t = pointwise_terms(u.values(), |i| w[i], &pot, k);
            if k.with_hartree {
                let rho = density_of(u.values());
                let rho = RadialFunction::new(grid.clone(), rho)?;
                t.hartree = hartree_radial(&rho)?.1;
            }
            Ok(EnergyBreakdown::compose(
                k.c_w * u.kinetic_density(),
                t.tf,
                t.dirac,
                t.external,
                t.hartree,
            ))
        }
        State::Box3(u) => {
            let grid = u.grid().clone();
            let pot = v.eval_box(&grid)?;
            let h3 = grid.spacing().powi(3);
            let mut t = pointwise_terms(u.values(), |_| h3, pot.values(), k);
            if k.with_hartree {
                let rho = Field3::new(grid, density_of(u.values()))?;
                t.hartree = crate::cartesian::hartree_free_space(&rho)?.1;
            }
            Ok(EnergyBreakdown::compose(
                k.c_w * u.kinetic_density(),
                t.tf,
                t.dirac,
                t.external,
                t.hartree,
            ))
        }
    }
}

fn density_of(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| v * v).collect()
}

fn gradient_values(
    values: &[f64],
    neg_lap: &[f64],
    potential: &[f64],
    phi: Option<&[f64]>,
    k: &Constants,
) -> Vec<f64> {
    let mut g = vec![0.0; values.len()];
    for (i, &u) in values.iter().enumerate() {
        let a = u.abs();
        let mut s = k.c_w * neg_lap[i];
        if k.with_tf {
            s += (5.0 / 3.0) * k.c_tf * a.powf(4.0 / 3.0) * u;
        }
        if k.with_dirac {
            s -= (4.0 / 3.0) * k.c_d * a.powf(2.0 / 3.0) * u;
        }
        if k.with_external {
            s += potential[i] * u;
        }
        if let Some(phi) = phi {
            s += phi[i] * u;
        }
        g[i] = 2.0 * s;
    }
    g
}

/// First variation of the energy: returns g in the same representation
/// as u with <g, phi> = d/de E_V(u + e phi) at e = 0 for the natural
/// integration pairing of that representation.
pub fn el_gradient(u: &State, v: &PotentialSpec, k: &Constants) -> Result<State> {
    k.validate()?;
    match u {
        State::Radial(u) => {
            let grid = u.grid();
            let pot = v.eval_radial(grid)?;
            let mut neg_lap = vec![0.0; grid.n()];
            grid.neg_laplacian_of(u.values(), &mut neg_lap);
            let phi = if k.with_hartree {
                let rho = RadialFunction::new(grid.clone(), density_of(u.values()))?;
                Some(hartree_radial(&rho)?.0)
            } else {
                None
            };
            let g = gradient_values(
                u.values(),
                &neg_lap,
                &pot,
                phi.as_ref().map(|p| p.values()),
                k,
            );
            Ok(State::Radial(RadialFunction::new(grid.clone(), g)?))
        }
        State::Box3(u) => {
            let grid = u.grid().clone();
            let pot = v.eval_box(&grid)?;
            let neg_lap = grid.neg_laplacian_of(u.values());
            let phi = if k.with_hartree {
                let rho = Field3::new(grid.clone(), density_of(u.values()))?;
                Some(crate::cartesian::hartree_free_space(&rho)?.0)
            } else {
                None
            };
            let g = gradient_values(
                u.values(),
                &neg_lap,
                pot.values(),
                phi.as_ref().map(|p| p.values()),
                k,
            );
            Ok(State::Box3(Field3::new(grid, g)?))
        }
    }
}

/// The explicit constant C1 with E_V(u) >= -C1 m for every state of mass
/// m: c_D^2/(2 c_TF) for the free problem, plus 2 (sum Z_j)^2 / c_W for
/// atomic and molecular potentials.
pub fn lower_bound_c1(v: &PotentialSpec, k: &Constants) -> Result<f64> {
    k.validate()?;
    v.validate()?;
    let base = k.c_d * k.c_d / (2.0 * k.c_tf);
    match v {
        PotentialSpec::None => Ok(base),
        PotentialSpec::Atomic { .. } | PotentialSpec::Molecular { .. } => {
            let z = v.total_charge();
            Ok(base + 2.0 * z * z / k.c_w)
        }
        PotentialSpec::RadialTable { .. } => Err(Error::Unsupported(
            "the energy floor for tabulated potentials needs the bottom of a Schrodinger \
             spectrum, which this crate does not compute"
                .into(),
        )),
    }
}

/// Ratio (int |u|^2 / |x - center|^2) / (4 int |grad u|^2). Hardy's
/// inequality bounds it by 1. The 0/0 case returns 0; a state with zero
/// kinetic energy but positive numerator is a degenerate input.
pub fn hardy_quotient(u: &State, center: [f64; 3]) -> Result<f64> {
    let (num, den) = match u {
        State::Radial(u) => {
            if center.iter().any(|&c| c.abs() > 1e-12) {
                return Err(Error::Unsupported(
                    "off-center Hardy quotients need the box representation".into(),
                ));
            }
            let grid = u.grid();
            let num: f64 = u
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| grid.weights()[i] * v * v / (grid.nodes()[i] * grid.nodes()[i]))
                .sum();
            (num, 4.0 * u.kinetic_density())
        }
        State::Box3(u) => {
            let grid = u.grid();
            let half = 0.5 * grid.edge();
            if center.iter().any(|&c| !(c.abs() < half)) {
                return Err(Error::Domain(format!(
                    "center {center:?} lies outside the open box of half-edge {half}"
                )));
            }
            let n = grid.n();
            let h3 = grid.spacing().powi(3);
            // the cell containing the center sees an effective distance
            // of half a spacing, keeping the quadrature finite
            let floor = 0.25 * grid.spacing() * grid.spacing();
            let mut num = 0.0;
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..n {
                        let dx = grid.coord(ix) - center[0];
                        let dy = grid.coord(iy) - center[1];
                        let dz = grid.coord(iz) - center[2];
                        let d2 = (dx * dx + dy * dy + dz * dz).max(floor);
                        let v = u.values()[grid.idx(ix, iy, iz)];
                        num += h3 * v * v / d2;
                    }
                }
            }
            (num, 4.0 * u.kinetic_density())
        }
    };
    if den <= 0.0 {
        if num <= 1e-300 {
            return Ok(0.0);
        }
        return Err(Error::Degenerate(format!(
            "state has zero kinetic energy but a positive Hardy numerator {num:.3e}"
        )));
    }
    Ok(num / den)
}
