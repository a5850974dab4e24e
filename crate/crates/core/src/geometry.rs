//! Intersection geometry of two co-focal planar orbits.
//!
//! A pair of orbits is carried in reduced coordinates: the conserved specific
//! energy and angular momentum `(E, L)` together with the differences
//! `dL = L1 - L2`, `dE = E1 - E2` and the periapsis offset
//! `domega = omega1 - omega2`. Every predicate here is evaluated from the
//! recovered per-orbit elements, never from expanded polynomials in `(dL, dE)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kepler::{wrap_angle, MassSplit, OrbitElements, TOL_CLASS};

/// Relative width of the tangency band of the trigonometric reduction.
pub const TOL_TANGENT: f64 = 1e-9;

const COINCIDENT_TOL: f64 = 1e-12;

/// One of the two bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Body {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub dl: f64,
    pub de: f64,
    pub domega: f64,
    /// Conserved specific energy `E = mu1 E1 + mu2 E2`.
    pub energy: f64,
    /// Conserved specific angular momentum `L = mu1 L1 + mu2 L2`.
    pub ang_mom: f64,
    pub masses: MassSplit,
}

impl PairState {
    pub fn new(masses: MassSplit, energy: f64, ang_mom: f64, dl: f64, de: f64, domega: f64) -> Self {
        Self {
            dl,
            de,
            domega,
            energy,
            ang_mom,
            masses,
        }
    }

    /// Reduced coordinates of two explicit orbits.
    pub fn from_orbits(masses: MassSplit, o1: &OrbitElements, o2: &OrbitElements) -> Self {
        let (mu1, mu2) = (masses.mu1(), masses.mu2());
        Self {
            dl: o1.ang_mom - o2.ang_mom,
            de: o1.energy - o2.energy,
            domega: wrap_angle(o1.periapsis_angle - o2.periapsis_angle),
            energy: mu1 * o1.energy + mu2 * o2.energy,
            ang_mom: mu1 * o1.ang_mom + mu2 * o2.ang_mom,
            masses,
        }
    }

    pub fn with_domega(mut self, domega: f64) -> Self {
        self.domega = domega;
        self
    }

    #[inline]
    pub fn energy1(&self) -> f64 {
        self.energy + self.masses.mu2() * self.de
    }

    #[inline]
    pub fn energy2(&self) -> f64 {
        self.energy - self.masses.mu1() * self.de
    }

    #[inline]
    pub fn ang_mom1(&self) -> f64 {
        self.ang_mom + self.masses.mu2() * self.dl
    }

    #[inline]
    pub fn ang_mom2(&self) -> f64 {
        self.ang_mom - self.masses.mu1() * self.dl
    }

    /// Scale-free invariant `E L^2`.
    pub fn el2(&self) -> f64 {
        self.energy * self.ang_mom * self.ang_mom
    }

    /// `1 + 2 E_i L_i^2` for both orbits.
    pub fn ecc_squared(&self) -> (f64, f64) {
        let (l1, l2) = (self.ang_mom1(), self.ang_mom2());
        (
            1.0 + 2.0 * self.energy1() * l1 * l1,
            1.0 + 2.0 * self.energy2() * l2 * l2,
        )
    }

    pub fn eccentricities(&self) -> Result<(f64, f64)> {
        let (q1, q2) = self.ecc_squared();
        for q in [q1, q2] {
            if q < -TOL_CLASS || q.is_nan() {
                return Err(Error::Admissibility { value: q });
            }
        }
        Ok((q1.max(0.0).sqrt(), q2.max(0.0).sqrt()))
    }

    /// Both orbits exist: `1 + 2 E_i L_i^2 >= 0` up to `TOL_CLASS`.
    pub fn is_admissible(&self) -> bool {
        self.eccentricities().is_ok()
    }

    /// Explicit orbits with `omega1 = domega` and `omega2 = 0`.
    pub fn orbits(&self) -> (OrbitElements, OrbitElements) {
        (
            OrbitElements::new(self.energy1(), self.ang_mom1(), self.domega),
            OrbitElements::new(self.energy2(), self.ang_mom2(), 0.0),
        )
    }

    /// `1 + L2^2 E1 + L1^2 E2`, the right-hand side of the intersection test.
    pub fn intersection_margin(&self) -> f64 {
        let (l1, l2) = (self.ang_mom1(), self.ang_mom2());
        1.0 + l2 * l2 * self.energy1() + l1 * l1 * self.energy2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionSolution {
    pub theta1: f64,
    pub theta2: f64,
    pub tangent: bool,
}

/// Roots of `a cos t + b sin t = c` on the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrigRoots {
    None,
    Tangent(f64),
    Two(f64, f64),
    /// `a = b = c = 0`: every angle solves the equation.
    Identity,
}

/// Closed-form solution of `a cos t + b sin t = c`.
///
/// With `R^2 = a^2 + b^2` and `phi = atan2(b, a)` the roots are
/// `phi ± atan2(sqrt(R^2 - c^2), c)`. When `-tol_rel R^2 <= R^2 - c^2 <= 0`
/// the single tangent root (`phi` or `phi + pi`) is returned. `scale` sets the
/// magnitude below which all three coefficients count as zero.
pub fn solve_cos_sin(a: f64, b: f64, c: f64, tol_rel: f64, scale: f64) -> TrigRoots {
    let r2 = a * a + b * b;
    let zero = COINCIDENT_TOL * scale;
    if a.abs() <= zero && b.abs() <= zero && c.abs() <= zero {
        return TrigRoots::Identity;
    }
    if r2 == 0.0 {
        return TrigRoots::None;
    }
    let disc = r2 - c * c;
    let phi = b.atan2(a);
    if disc > 0.0 {
        // kept as two roots inside the band too: each one has a residual at
        // rounding level, while the collapsed root is off by ~disc / R
        let half = disc.sqrt().atan2(c);
        TrigRoots::Two(wrap_angle(phi - half), wrap_angle(phi + half))
    } else if -disc <= tol_rel * r2 {
        let half = if c >= 0.0 { 0.0 } else { std::f64::consts::PI };
        TrigRoots::Tangent(wrap_angle(phi + half))
    } else {
        TrigRoots::None
    }
}

fn require_admissible(p: &PairState) -> Result<(f64, f64)> {
    p.eccentricities()
}

/// Two orbits with periapsis offset `domega` intersect iff
/// `e1 e2 cos(domega) <= 1 + L2^2 E1 + L1^2 E2`.
pub fn intersects(p: &PairState) -> Result<bool> {
    let (e1, e2) = require_admissible(p)?;
    Ok(e1 * e2 * p.domega.cos() <= p.intersection_margin())
}

/// Coefficients `(a, b, c)` of the reduction
/// `L1^2 (1 + e2 cos(theta1 + domega)) = L2^2 (1 + e1 cos theta1)`.
pub fn intersection_coefficients(p: &PairState) -> Result<(f64, f64, f64)> {
    let (e1, e2) = require_admissible(p)?;
    let (l1, l2) = (p.ang_mom1(), p.ang_mom2());
    let (l1s, l2s) = (l1 * l1, l2 * l2);
    let (s, c) = p.domega.sin_cos();
    Ok((l1s * e2 * c - l2s * e1, -l1s * e2 * s, l2s - l1s))
}

/// Normalized tangency diagnostic `(a^2 + b^2 - c^2) / (a^2 + b^2)`; zero at
/// tangent pairs, negative when the orbits are disjoint.
pub fn tangency_diagnostic(p: &PairState) -> Result<f64> {
    let (a, b, c) = intersection_coefficients(p)?;
    let r2 = a * a + b * b;
    Ok(if r2 > 0.0 { (r2 - c * c) / r2 } else { f64::NAN })
}

/// True anomalies of the (at most two) intersection points.
///
/// Roots landing on the unphysical branch of a hyperbola (`1 + e cos theta <= 0`
/// on either orbit) are discarded.
pub fn intersection_anomalies(p: &PairState) -> Result<Vec<IntersectionSolution>> {
    let (e1, e2) = require_admissible(p)?;
    let (a, b, c) = intersection_coefficients(p)?;
    let (l1, l2) = (p.ang_mom1(), p.ang_mom2());
    let scale = l1 * l1 + l2 * l2;
    let physical = |t1: f64| {
        let t2 = t1 + p.domega;
        1.0 + e1 * t1.cos() > TOL_CLASS && 1.0 + e2 * t2.cos() > TOL_CLASS
    };
    let make = |t1: f64, tangent: bool| IntersectionSolution {
        theta1: t1,
        theta2: wrap_angle(t1 + p.domega),
        tangent,
    };
    let sols = match solve_cos_sin(a, b, c, TOL_TANGENT, scale) {
        TrigRoots::Identity => return Err(Error::DegenerateCoincident),
        TrigRoots::None => Vec::new(),
        TrigRoots::Tangent(t) => vec![make(t, true)],
        TrigRoots::Two(t1, t2) => {
            let near = a * a + b * b - c * c <= TOL_TANGENT * (a * a + b * b);
            vec![make(t1, near), make(t2, near)]
        }
    };
    Ok(sols.into_iter().filter(|s| physical(s.theta1)).collect())
}

/// Signed gap between the outer orbit's periapsis and the inner orbit's
/// apoapsis with periapsides in opposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dbar {
    pub value: f64,
    /// Index playing the outer orbit (the minuend's periapsis).
    pub outer: Body,
}

/// Gap `peri(outer) - apo(inner)` for a fixed index assignment.
pub fn dbar_with(p: &PairState, outer: Body) -> Result<f64> {
    require_admissible(p)?;
    let (o1, o2) = p.orbits();
    let (out, inn) = match outer {
        Body::One => (o1, o2),
        Body::Two => (o2, o1),
    };
    let apo = inn.apoapsis_distance().ok_or(Error::ApoapsisUndefined)?;
    Ok(out.periapsis_distance() - apo)
}

/// `dbar = L1^2/(1+e1) - L2^2/(1-e2)` with the index assignment that makes
/// the subtrahend the inner orbit's apoapsis.
///
/// The two candidates sum to `(peri1 - apo1) + (peri2 - apo2) <= 0`, so at
/// most one of them is positive; the larger one is selected. When only one
/// orbit is bound, it is necessarily the inner one.
pub fn dbar(p: &PairState) -> Result<Dbar> {
    let d12 = dbar_with(p, Body::One);
    let d21 = dbar_with(p, Body::Two);
    match (d12, d21) {
        (Ok(a), Ok(b)) => Ok(if b > a {
            Dbar {
                value: b,
                outer: Body::Two,
            }
        } else {
            Dbar {
                value: a,
                outer: Body::One,
            }
        }),
        (Ok(a), Err(_)) => Ok(Dbar {
            value: a,
            outer: Body::One,
        }),
        (Err(_), Ok(b)) => Ok(Dbar {
            value: b,
            outer: Body::Two,
        }),
        (Err(e), Err(_)) => Err(e),
    }
}

/// `d/d(dL)` of `dbar_with(p, Body::One)` at fixed `dE`:
/// `mu2 L1 / e1 - mu1 L2 / e2`.
pub fn dbar_partial_dl(p: &PairState) -> Result<f64> {
    let (e1, e2) = require_admissible(p)?;
    if e1 <= TOL_CLASS || e2 <= TOL_CLASS {
        return Err(Error::CircularSingularity { e1, e2 });
    }
    Ok(p.masses.mu2() * p.ang_mom1() / e1 - p.masses.mu1() * p.ang_mom2() / e2)
}
