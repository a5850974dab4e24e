//! Spatial pairs and their reduction to a coplanar pair with periapsides in
//! opposition.
//!
//! Rotating each orbit rigidly about the center preserves its energy,
//! eccentricity and `|L_i|`. Laying both in one plane with opposed periapsides
//! and the same orientation gives a planar pair with energy `E` and angular
//! momentum `L~ = mu1 |L1| + mu2 |L2| >= |mu1 L1 + mu2 L2|`. Since `E < 0`,
//! `E L~^2 <= E |L|^2`, so the planar bound for `E L~^2` also covers the
//! spatial pair.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PairState;
use crate::kepler::{MassSplit, OrbitElements, TOL_CLASS};
use crate::regions::{potential_margin, sigma, RegionParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl SpatialState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Result<Self> {
        if !(position.norm() > 0.0) {
            return Err(Error::Origin);
        }
        Ok(Self { position, velocity })
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.velocity.norm_squared() - 1.0 / self.position.norm()
    }

    /// Vector angular momentum `x ∧ v`.
    pub fn ang_mom(&self) -> Vector3<f64> {
        self.position.cross(&self.velocity)
    }
}

/// Coplanar pair equivalent to a spatial pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPair {
    /// Orbit 1 with periapsis at angle `pi`, orbit 2 at angle `0`.
    pub orbits: [OrbitElements; 2],
    pub masses: MassSplit,
    /// `L~ = mu1 |L1| + mu2 |L2|`.
    pub tilde_l: f64,
    /// `E~ = mu1 E1 + mu2 E2`.
    pub tilde_e: f64,
    /// Total vector angular momentum `mu1 L1 + mu2 L2`.
    pub total_ang_mom: Vector3<f64>,
    /// Normal of the common plane: the direction of the total angular
    /// momentum, or `z` when it vanishes.
    pub plane_normal: Vector3<f64>,
}

impl ReducedPair {
    pub fn pair_state(&self) -> PairState {
        PairState::from_orbits(self.masses, &self.orbits[0], &self.orbits[1])
    }

    /// Periapsis directions of the two reduced orbits in space.
    pub fn periapsis_directions(&self) -> [Vector3<f64>; 2] {
        let n = self.plane_normal;
        let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let ex = (seed - n * n.dot(&seed)).normalize();
        [-ex, ex]
    }
}

pub fn reduce_to_planar(s1: &SpatialState, s2: &SpatialState, masses: &MassSplit) -> Result<ReducedPair> {
    let (l1, l2) = (s1.ang_mom(), s2.ang_mom());
    let (a1, a2) = (l1.norm(), l2.norm());
    if a1 <= TOL_CLASS || a2 <= TOL_CLASS {
        return Err(Error::DegenerateAngularMomentum);
    }
    let (e1, e2) = (s1.energy(), s2.energy());
    let (mu1, mu2) = (masses.mu1(), masses.mu2());
    let total = l1 * mu1 + l2 * mu2;
    let plane_normal = if total.norm() > TOL_CLASS {
        total.normalize()
    } else {
        Vector3::z()
    };
    Ok(ReducedPair {
        orbits: [
            OrbitElements::new(e1, a1, std::f64::consts::PI),
            OrbitElements::new(e2, a2, 0.0),
        ],
        masses: *masses,
        tilde_l: mu1 * a1 + mu2 * a2,
        tilde_e: mu1 * e1 + mu2 * e2,
        total_ang_mom: total,
        plane_normal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment3d {
    pub energy: f64,
    /// `|mu1 L1 + mu2 L2|`.
    pub abs_ang_mom: f64,
    pub tilde_l: f64,
    /// `E |L|^2`.
    pub el2: f64,
    /// `E L~^2`.
    pub tilde_el2: f64,
    /// `(E + U/M) L~^2`.
    pub shifted_el2: f64,
    pub sigma: f64,
    pub bounded: bool,
}

/// Verdict of the spatial invariance check with full diagnostics.
pub fn assess_3d(
    s1: &SpatialState,
    s2: &SpatialState,
    masses: &MassSplit,
    u: f64,
    total_mass: f64,
    d: f64,
) -> Result<Assessment3d> {
    let r = reduce_to_planar(s1, s2, masses)?;
    let energy = r.tilde_e;
    if !(energy < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "total energy must be negative, got {energy}"
        )));
    }
    let abs_l = r.total_ang_mom.norm();
    let el2 = energy * abs_l * abs_l;
    let tilde_el2 = energy * r.tilde_l * r.tilde_l;
    debug_assert!(tilde_el2 <= el2 + 1e-12 * el2.abs());
    let rp = RegionParams::new(*masses, energy, r.tilde_l)?;
    Ok(Assessment3d {
        energy,
        abs_ang_mom: abs_l,
        tilde_l: r.tilde_l,
        el2,
        tilde_el2,
        shifted_el2: (energy + u / total_mass) * r.tilde_l * r.tilde_l,
        sigma: sigma(masses).sigma,
        bounded: potential_margin(&rp, u, total_mass, d),
    })
}

/// `(E + U/M) L~^2 < sigma` with enough clearance for range `d`.
pub fn invariant_check_3d(
    s1: &SpatialState,
    s2: &SpatialState,
    masses: &MassSplit,
    u: f64,
    total_mass: f64,
    d: f64,
) -> Result<bool> {
    assess_3d(s1, s2, masses, u, total_mass, d).map(|a| a.bounded)
}
