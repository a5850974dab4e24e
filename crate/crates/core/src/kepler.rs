//! Planar orbital-element algebra around a fixed center with unit
//! gravitational parameter.
//!
//! An orbit is described by its specific energy `E`, signed specific angular
//! momentum `L` (positive counterclockwise) and periapsis angle `omega`. The
//! position at true anomaly `theta` is
//!
//! ```text
//! x = L^2 / (1 + e cos theta) * (cos(theta + omega), sin(theta + omega))
//! ```
//!
//! with `e = sqrt(1 + 2 E L^2)`. Only `L^2` enters the geometry, so the sign of
//! `L` only selects the sense of motion.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for conic classification and admissibility.
pub const TOL_CLASS: f64 = 1e-12;

const MASS_SUM_TOL: f64 = 1e-15;

/// Mass fractions `mu_i = m_i / M` of the two bodies, with `mu1 <= mu2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSplit {
    mu1: f64,
    mu2: f64,
}

impl MassSplit {
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite())
            || mu1 <= 0.0
            || mu2 <= 0.0
            || (mu1 + mu2 - 1.0).abs() > MASS_SUM_TOL
        {
            return Err(Error::InvalidMassSplit { mu1, mu2 });
        }
        if mu1 > mu2 {
            return Err(Error::MassOrder { mu1, mu2 });
        }
        Ok(Self { mu1, mu2 })
    }

    /// Builds the split from the lighter fraction, `mu2 = 1 - mu1`.
    pub fn from_mu1(mu1: f64) -> Result<Self> {
        Self::new(mu1, 1.0 - mu1)
    }

    /// Builds the split from absolute masses; `m1` must be the lighter body.
    pub fn from_masses(m1: f64, m2: f64) -> Result<Self> {
        let total = m1 + m2;
        if !(m1 > 0.0 && m2 > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMassSplit { mu1: m1, mu2: m2 });
        }
        let mu1 = m1 / total;
        Self::new(mu1, 1.0 - mu1)
    }

    pub fn equal() -> Self {
        Self { mu1: 0.5, mu2: 0.5 }
    }

    #[inline]
    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    #[inline]
    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    /// Absolute masses `(m1, m2)` for total mass `total`.
    pub fn masses(&self, total: f64) -> (f64, f64) {
        (self.mu1 * total, self.mu2 * total)
    }
}

/// Elements of one planar Keplerian orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitElements {
    /// Specific energy `E = v^2/2 - 1/r`.
    pub energy: f64,
    /// Signed specific angular momentum `L = x ∧ v`.
    pub ang_mom: f64,
    /// Angle of the periapsis from the x axis.
    pub periapsis_angle: f64,
}

impl OrbitElements {
    pub fn new(energy: f64, ang_mom: f64, periapsis_angle: f64) -> Self {
        Self {
            energy,
            ang_mom,
            periapsis_angle,
        }
    }

    pub fn eccentricity(&self) -> Result<f64> {
        eccentricity(self.energy, self.ang_mom)
    }

    /// Eccentricity with the admissibility defect clamped away.
    #[inline]
    pub fn eccentricity_clamped(&self) -> f64 {
        (1.0 + 2.0 * self.energy * self.ang_mom * self.ang_mom)
            .max(0.0)
            .sqrt()
    }

    pub fn classify(&self) -> ConicClass {
        classify(self)
    }

    pub fn periapsis_distance(&self) -> f64 {
        let l2 = self.ang_mom * self.ang_mom;
        l2 / (1.0 + self.eccentricity_clamped())
    }

    /// Apoapsis distance `(1 + e) / (2|E|)`, defined for bound orbits only.
    pub fn apoapsis_distance(&self) -> Option<f64> {
        (self.energy < 0.0).then(|| (1.0 + self.eccentricity_clamped()) / (-2.0 * self.energy))
    }

    /// Position on the orbit at true anomaly `theta`, without validity checks.
    #[inline]
    pub(crate) fn position_unchecked(&self, ecc: f64, theta: f64) -> Vector2<f64> {
        let r = self.ang_mom * self.ang_mom / (1.0 + ecc * theta.cos());
        let phi = theta + self.periapsis_angle;
        Vector2::new(r * phi.cos(), r * phi.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
}

impl PlanarState {
    pub fn new(position: Vector2<f64>, velocity: Vector2<f64>) -> Self {
        Self { position, velocity }
    }

    /// Specific energy `|v|^2/2 - 1/|x|`.
    pub fn energy(&self) -> f64 {
        0.5 * self.velocity.norm_squared() - 1.0 / self.position.norm()
    }

    /// Planar cross product `x ∧ v`.
    pub fn ang_mom(&self) -> f64 {
        cross2(&self.position, &self.velocity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConicClass {
    Elliptic,
    Parabolic,
    Hyperbolic,
    /// Zero angular momentum (radial motion).
    Degenerate,
}

impl ConicClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConicClass::Elliptic => "elliptic",
            ConicClass::Parabolic => "parabolic",
            ConicClass::Hyperbolic => "hyperbolic",
            ConicClass::Degenerate => "degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "elliptic" => Some(ConicClass::Elliptic),
            "parabolic" => Some(ConicClass::Parabolic),
            "hyperbolic" => Some(ConicClass::Hyperbolic),
            "degenerate" => Some(ConicClass::Degenerate),
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Eccentricity `sqrt(1 + 2 E L^2)`; small negative defects down to
/// `-TOL_CLASS` are clamped to a circular orbit.
pub fn eccentricity(energy: f64, ang_mom: f64) -> Result<f64> {
    let q = 1.0 + 2.0 * energy * ang_mom * ang_mom;
    if q < -TOL_CLASS || q.is_nan() {
        return Err(Error::Admissibility { value: q });
    }
    Ok(q.max(0.0).sqrt())
}

/// The scale-free combination `E L^2 / k^2` for gravitational parameter `k`.
///
/// Every region and threshold in this crate depends on the energy and the
/// angular momentum only through this product.
pub fn dimensionless_el2(energy: f64, ang_mom: f64, k: f64) -> f64 {
    energy * ang_mom * ang_mom / (k * k)
}

/// Position and velocity on `orbit` at true anomaly `theta`.
pub fn state_at_anomaly(orbit: &OrbitElements, theta: f64) -> Result<PlanarState> {
    let l = orbit.ang_mom;
    if l.abs() <= TOL_CLASS {
        return Err(Error::DegenerateOrbit);
    }
    let e = orbit.eccentricity()?;
    let (s, c) = theta.sin_cos();
    let denom = 1.0 + e * c;
    if denom <= TOL_CLASS {
        return Err(Error::RadiusDiverges { theta, denom });
    }
    let r = l * l / denom;
    let (sp, cp) = (theta + orbit.periapsis_angle).sin_cos();
    let radial = Vector2::new(cp, sp);
    let transverse = Vector2::new(-sp, cp);
    // r' = e sin(theta) / L, r theta' = L / r
    let velocity = radial * (e * s / l) + transverse * (l / r);
    Ok(PlanarState::new(radial * r, velocity))
}

/// Recovers the elements of the osculating orbit through `s`.
///
/// The periapsis direction comes from the Laplace-Runge-Lenz vector; for
/// orbits with `e < TOL_CLASS` the periapsis angle is set to zero.
pub fn elements_from_state(s: &PlanarState) -> Result<OrbitElements> {
    let x = &s.position;
    let v = &s.velocity;
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::Origin);
    }
    let v2 = v.norm_squared();
    let energy = 0.5 * v2 - 1.0 / r;
    let ang_mom = cross2(x, v);
    let lrl = x * (v2 - 1.0 / r) - v * x.dot(v);
    let periapsis_angle = if lrl.norm() < TOL_CLASS {
        0.0
    } else {
        lrl.y.atan2(lrl.x)
    };
    Ok(OrbitElements::new(energy, ang_mom, periapsis_angle))
}

/// True anomaly of the state relative to the periapsis of `orbit`.
pub fn anomaly_of(s: &PlanarState, orbit: &OrbitElements) -> f64 {
    wrap_angle(s.position.y.atan2(s.position.x) - orbit.periapsis_angle)
}

pub fn classify(orbit: &OrbitElements) -> ConicClass {
    classify_with(orbit, TOL_CLASS)
}

pub fn classify_with(orbit: &OrbitElements, tol: f64) -> ConicClass {
    if orbit.ang_mom.abs() <= tol {
        ConicClass::Degenerate
    } else if orbit.energy < -tol {
        ConicClass::Elliptic
    } else if orbit.energy <= tol {
        ConicClass::Parabolic
    } else {
        ConicClass::Hyperbolic
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
