//! Invariant regions of the pair dynamics in the `(dL, dE)` plane.
//!
//! For fixed conserved `(E, L)` the reachable pairs lie in
//!
//! * `A`: both orbits exist, `1 + 2 E_i L_i^2 >= 0`;
//! * `I_eta`: pairs whose orbits intersect when the periapsides subtend
//!   `eta`, `e1 e2 cos(eta) <= 1 + L2^2 E1 + L1^2 E2`.
//!
//! `I_pi` is the largest of the `I_eta` and is preserved by collisions. When
//! `E L^2` lies below the threshold [`sigma`] it sits strictly inside the
//! strip where both orbits are bound. For bodies of summed radius `D` the
//! invariant set grows to `{dbar <= D}`, whose clearance from the critical
//! lines `E1 = 0`, `E2 = 0` is measured by [`critical_d_numeric`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dbar_partial_dl, dbar_with, Body, PairState};
use crate::kepler::MassSplit;
use crate::search::grid_then_golden;

/// Conserved parameters of the pair: `E < 0`, `L >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    pub masses: MassSplit,
    pub energy: f64,
    pub ang_mom: f64,
}

impl RegionParams {
    pub fn new(masses: MassSplit, energy: f64, ang_mom: f64) -> Result<Self> {
        if !(energy < 0.0 && energy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "energy must be negative, got {energy}"
            )));
        }
        if !(ang_mom >= 0.0 && ang_mom.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "angular momentum must be non-negative, got {ang_mom}"
            )));
        }
        Ok(Self {
            masses,
            energy,
            ang_mom,
        })
    }

    /// Parameters with the given `E L^2` at angular momentum `l > 0`.
    pub fn from_el2(masses: MassSplit, el2: f64, l: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "angular momentum must be positive, got {l}"
            )));
        }
        Self::new(masses, el2 / (l * l), l)
    }

    pub fn el2(&self) -> f64 {
        self.energy * self.ang_mom * self.ang_mom
    }

    pub fn pair(&self, dl: f64, de: f64, domega: f64) -> PairState {
        PairState::new(self.masses, self.energy, self.ang_mom, dl, de, domega)
    }

    /// `dE` of the critical line `E1 = 0`.
    pub fn de_on_e1_zero(&self) -> f64 {
        -self.energy / self.masses.mu2()
    }

    /// `dE` of the critical line `E2 = 0`.
    pub fn de_on_e2_zero(&self) -> f64 {
        self.energy / self.masses.mu1()
    }
}

/// Critical configuration of the point-particle threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub masses: MassSplit,
    /// Threshold on `E L^2`.
    pub sigma: f64,
    /// Eccentricity of orbit 2 at the tangency with `E1 = 0`.
    pub e_crit: f64,
    /// Angular momenta of the tangent configuration at `L = 1`.
    pub l1_crit: f64,
    pub l2_crit: f64,
}

impl CriticalValues {
    /// The tangent pair at `E = sigma / L^2` for angular momentum `l`.
    pub fn critical_pair(&self, l: f64) -> PairState {
        let energy = self.sigma / (l * l);
        let dl = (self.l1_crit - self.l2_crit) * l;
        let de = -energy / self.masses.mu2();
        PairState::new(self.masses, energy, l, dl, de, std::f64::consts::PI)
    }
}

pub fn admissible(p: &PairState) -> bool {
    p.is_admissible()
}

pub fn in_i_eta(p: &PairState, eta: f64) -> Result<bool> {
    let (e1, e2) = p.eccentricities()?;
    Ok(e1 * e2 * eta.cos() <= p.intersection_margin())
}

/// `e1 e2 >= -(1 + L2^2 E1 + L1^2 E2)`.
pub fn in_i_pi(p: &PairState) -> Result<bool> {
    in_i_eta(p, std::f64::consts::PI)
}

/// `1 + L2^2 E1 + L1^2 E2 >= 0`.
pub fn in_i_half_pi(p: &PairState) -> Result<bool> {
    p.eccentricities()?;
    Ok(p.intersection_margin() >= 0.0)
}

/// The two `dE` values where the quadratic boundary of `I_pi` crosses the
/// vertical line at `dl`:
///
/// ```text
/// dE = (L1^2 - L2^2) / S^2 * (1 + E S ± sqrt(1 + 2 E S)),  S = mu1 L1^2 + mu2 L2^2
/// ```
///
/// Returned as `(minus_root, plus_root)`.
pub fn i_pi_boundary(dl: f64, rp: &RegionParams) -> Result<(f64, f64)> {
    let (mu1, mu2) = (rp.masses.mu1(), rp.masses.mu2());
    let l1 = rp.ang_mom + mu2 * dl;
    let l2 = rp.ang_mom - mu1 * dl;
    let diff = l1 * l1 - l2 * l2;
    let s = mu1 * l1 * l1 + mu2 * l2 * l2;
    if diff.abs() <= 1e-14 * s {
        return Err(Error::Degenerate);
    }
    let disc = 1.0 + 2.0 * rp.energy * s;
    if disc < 0.0 {
        return Err(Error::NoBoundary { disc });
    }
    let k = diff / (s * s);
    let base = 1.0 + rp.energy * s;
    let root = disc.sqrt();
    Ok((k * (base - root), k * (base + root)))
}

/// `sqrt((1 - 2|E| L^2) / (2 |E| mu1 mu2))`, the largest `|dL|` in `I_pi`.
pub fn delta_l_bound(rp: &RegionParams) -> Result<f64> {
    let a = -rp.energy;
    let value = 1.0 - 2.0 * a * rp.ang_mom * rp.ang_mom;
    if value < 0.0 {
        return Err(Error::VoidRegion { value });
    }
    Ok((value / (2.0 * a * rp.masses.mu1() * rp.masses.mu2())).sqrt())
}

/// Critical eccentricity: the root in `(0, 1)` of `2 mu2^2 e^2 = mu1^2 (1 - e)`.
pub fn critical_eccentricity(masses: &MassSplit) -> f64 {
    let r = masses.mu1() / masses.mu2();
    let r2 = r * r;
    ((r2 * r2 + 8.0 * r2).sqrt() - r2) / 4.0
}

/// Threshold `sigma = -(1 - e^2)(mu1^2 + mu2^2 e)^2 / (2 mu2 e^2)` below which
/// `I_pi` only contains pairs of bound orbits.
pub fn sigma(masses: &MassSplit) -> CriticalValues {
    let (mu1, mu2) = (masses.mu1(), masses.mu2());
    let e = critical_eccentricity(masses);
    let w = mu1 * mu1 + mu2 * mu2 * e;
    CriticalValues {
        masses: *masses,
        sigma: -(1.0 - e * e) * w * w / (2.0 * mu2 * e * e),
        e_crit: e,
        l1_crit: mu1 / w,
        l2_crit: mu2 * e / w,
    }
}

/// Eccentricity of the orbit with energy `E` and angular momentum `L`
/// (the "mean orbit" of the pair), `sqrt(1 + 2 E L^2)`.
pub fn mean_orbit_eccentricity(el2: f64) -> Result<f64> {
    crate::kepler::eccentricity(el2, 1.0)
}

/// Apoapsis to periapsis distance ratio `(1 + e) / (1 - e)`.
pub fn apsis_ratio(e: f64) -> f64 {
    (1.0 + e) / (1.0 - e)
}

/// Major to minor semi-axis ratio `1 / sqrt(1 - e^2)`.
pub fn axis_ratio(e: f64) -> f64 {
    1.0 / (1.0 - e * e).sqrt()
}

/// Critical eccentricity of the equal-mass disk case, `gamma - sqrt(gamma^2 - gamma + 1)`.
pub fn equal_mass_critical_eccentricity(gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::GammaRange { gamma });
    }
    // rationalized to avoid cancellation at large gamma
    Ok((gamma - 1.0) / (gamma + (gamma * gamma - gamma + 1.0).sqrt()))
}

/// Equal-mass threshold on `E L^2` for disks of summed radius
/// `D = 2 L^2 / gamma`: `-(1 - e^2)(1 + e)^2 / (16 e^2)`.
pub fn critical_el2_equal_mass(gamma: f64) -> Result<f64> {
    let e = equal_mass_critical_eccentricity(gamma)?;
    Ok(-(1.0 - e * e) * (1.0 + e).powi(2) / (16.0 * e * e))
}

/// Inverse of [`critical_el2_equal_mass`]: the critical `D / L^2` for equal
/// masses at the given `E L^2 < -27/64`.
pub fn equal_mass_critical_d(el2: f64) -> Result<f64> {
    let f = |e: f64| -(1.0 - e * e) * (1.0 + e).powi(2) / (16.0 * e * e);
    if !(el2 < f(0.5)) {
        return Err(Error::NoMargin { gap: 0.0 });
    }
    // f increases on (0, 1/2]
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < el2 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 {
            break;
        }
    }
    let e = 0.5 * (lo + hi);
    Ok(2.0 * (1.0 - 2.0 * e) / (1.0 - e * e))
}

/// Result of the clearance search between `{dbar <= D}` and the critical lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalDistance {
    /// Critical `D / L^2`.
    pub d: f64,
    /// Critical line that binds: `One` for `E1 = 0`, `Two` for `E2 = 0`.
    pub binding: Body,
    /// `dL / L` of the tangency point.
    pub dl: f64,
    /// Clearance along the other critical line, `D / L^2`.
    pub other: f64,
    /// `d(dbar)/d(dL)` at the tangency point (zero for an interior minimum).
    pub slope: f64,
}

const CRITICAL_D_GRID: usize = 64;

/// Clearance of `dbar` along one critical line (`E_k = 0`), in units of `L^2`
/// at `L = 1`. Returns the minimizing `dL` and the value.
fn line_clearance(masses: &MassSplit, el2: f64, line: Body, grid: usize) -> Option<(f64, f64)> {
    let rp = RegionParams::from_el2(*masses, el2, 1.0).ok()?;
    let (mu1, mu2) = (masses.mu1(), masses.mu2());
    // On E_k = 0 the other orbit has energy E / mu_j; it exists for
    // |L_j| <= sqrt(mu_j / (2|E|)).
    let (de, lo, hi) = match line {
        Body::One => {
            let lmax = (mu2 / (-2.0 * rp.energy)).sqrt();
            (rp.de_on_e1_zero(), (1.0 - lmax) / mu1, (1.0 + lmax) / mu1)
        }
        Body::Two => {
            let lmax = (mu1 / (-2.0 * rp.energy)).sqrt();
            (rp.de_on_e2_zero(), (-lmax - 1.0) / mu2, (lmax - 1.0) / mu2)
        }
    };
    let f = |dl: f64| -> f64 {
        let p = rp.pair(dl, de, std::f64::consts::PI);
        dbar_with(&p, line).unwrap_or(f64::INFINITY)
    };
    // shrink off the admissibility edge where e_j may round below zero
    let pad = (hi - lo) * 1e-12;
    let m = grid_then_golden(f, lo + pad, hi - pad, grid, 1e-13 * (hi - lo))?;
    Some((m.x, m.f))
}

/// Largest summed radius `D` (in units of `L^2`) such that `{dbar <= D}`,
/// and with it `I_pi`, stays clear of `{E1 >= 0}` and `{E2 >= 0}`.
///
/// The clearance along each horizontal critical line is minimized over `dL`
/// with a 64-point grid followed by golden-section refinement; the smaller
/// of the two is returned. On `E_k = 0` orbit `k` is parabolic, so it plays
/// the outer orbit in `dbar`.
pub fn critical_d_numeric(masses: &MassSplit, el2: f64) -> Result<CriticalDistance> {
    critical_d_numeric_with(masses, el2, CRITICAL_D_GRID)
}

pub fn critical_d_numeric_with(
    masses: &MassSplit,
    el2: f64,
    grid: usize,
) -> Result<CriticalDistance> {
    if !(el2 < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "E L^2 must be negative, got {el2}"
        )));
    }
    let one = line_clearance(masses, el2, Body::One, grid);
    let two = line_clearance(masses, el2, Body::Two, grid);
    let (binding, (dl, d), other) = match (one, two) {
        (Some(a), Some(b)) if a.1 <= b.1 => (Body::One, a, b.1),
        (Some(a), Some(b)) => (Body::Two, b, a.1),
        (Some(a), None) => (Body::One, a, f64::INFINITY),
        (None, Some(b)) => (Body::Two, b, f64::INFINITY),
        (None, None) => return Err(Error::NoMargin { gap: f64::NAN }),
    };
    if !(d > 0.0) {
        return Err(Error::NoMargin { gap: d });
    }
    let rp = RegionParams::from_el2(*masses, el2, 1.0)?;
    let de = match binding {
        Body::One => rp.de_on_e1_zero(),
        Body::Two => rp.de_on_e2_zero(),
    };
    let p = rp.pair(dl, de, std::f64::consts::PI);
    let slope = match binding {
        Body::One => dbar_partial_dl(&p).unwrap_or(f64::NAN),
        // dbar_with(Two) is the mirror image: d/d(dL) of peri2 - apo1
        Body::Two => {
            let (e1, e2) = p.eccentricities().unwrap_or((f64::NAN, f64::NAN));
            -masses.mu1() * p.ang_mom2() / e2 + masses.mu2() * p.ang_mom1() / e1
        }
    };
    Ok(CriticalDistance {
        d,
        binding,
        dl,
        other,
        slope,
    })
}

/// Bounded-orbit check for point particles interacting through a potential
/// with depth `u >= 0` and range `d`: the osculating energy may rise up to
/// `E + U/M`, so the shifted `(E + U/M) L^2` must stay below `sigma` with at
/// least `d` of clearance.
pub fn potential_margin(rp: &RegionParams, u: f64, total_mass: f64, d: f64) -> bool {
    if !(u >= 0.0) || !(total_mass > 0.0) || !(d >= 0.0) {
        return false;
    }
    let l2 = rp.ang_mom * rp.ang_mom;
    let shifted = (rp.energy + u / total_mass) * l2;
    if !(shifted < sigma(&rp.masses).sigma) {
        return false;
    }
    if d == 0.0 {
        return true;
    }
    match critical_d_numeric(&rp.masses, shifted) {
        Ok(c) => c.d * l2 >= d,
        Err(_) => false,
    }
}

/// Extent of `I_pi` in energy, computed from its exact boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IPiExtent {
    /// Largest `E1` over `I_pi` and the `dL` where it is attained.
    pub max_energy1: f64,
    pub dl_at_max1: f64,
    /// Largest `E2` over `I_pi`.
    pub max_energy2: f64,
    pub dl_at_max2: f64,
}

const MEMBERSHIP_SLACK: f64 = 1e-12;

fn in_i_pi_tolerant(p: &PairState) -> bool {
    let (q1, q2) = p.ecc_squared();
    if q1 < -MEMBERSHIP_SLACK || q2 < -MEMBERSHIP_SLACK {
        return false;
    }
    (q1.max(0.0) * q2.max(0.0)).sqrt() + p.intersection_margin() >= -MEMBERSHIP_SLACK
}

/// Extreme `dE` values of `I_pi` on the vertical line at `dl`.
///
/// The section is a union of intervals whose end points are among the
/// quadratic boundary roots, the edges of `A` and the `I_{pi/2}` line; the
/// extremes are the outermost candidates that belong to `I_pi`.
fn i_pi_section(rp: &RegionParams, dl: f64) -> Option<(f64, f64)> {
    let (mu1, mu2) = (rp.masses.mu1(), rp.masses.mu2());
    let e = rp.energy;
    let l1 = rp.ang_mom + mu2 * dl;
    let l2 = rp.ang_mom - mu1 * dl;
    let mut cands = Vec::with_capacity(5);
    if let Ok((a, b)) = i_pi_boundary(dl, rp) {
        cands.push(a);
        cands.push(b);
    }
    if l1 != 0.0 {
        cands.push((-1.0 / (2.0 * l1 * l1) - e) / mu2);
    }
    if l2 != 0.0 {
        cands.push((e + 1.0 / (2.0 * l2 * l2)) / mu1);
    }
    let slope = mu2 * l2 * l2 - mu1 * l1 * l1;
    if slope != 0.0 {
        cands.push((-1.0 - e * (l1 * l1 + l2 * l2)) / slope);
    }
    let members: Vec<f64> = cands
        .into_iter()
        .filter(|&de| de.is_finite() && in_i_pi_tolerant(&rp.pair(dl, de, 0.0)))
        .collect();
    let lo = members.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = members.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo <= hi).then_some((lo, hi))
}

/// Supremum of `E1` and `E2` over `I_pi`.
pub fn i_pi_energy_extent(rp: &RegionParams) -> Result<IPiExtent> {
    let bound = delta_l_bound(rp)?;
    let (mu1, mu2) = (rp.masses.mu1(), rp.masses.mu2());
    let upper = |dl: f64| i_pi_section(rp, dl).map_or(f64::INFINITY, |(_, hi)| -hi);
    let lower = |dl: f64| i_pi_section(rp, dl).map_or(f64::INFINITY, |(lo, _)| lo);
    let pad = bound * 1e-14;
    let span = (2.0 * bound).max(f64::MIN_POSITIVE);
    let m1 = grid_then_golden(upper, -bound + pad, bound - pad, 2048, 1e-15 * span)
        .ok_or(Error::VoidRegion { value: 0.0 })?;
    let m2 = grid_then_golden(lower, -bound + pad, bound - pad, 2048, 1e-15 * span)
        .ok_or(Error::VoidRegion { value: 0.0 })?;
    Ok(IPiExtent {
        max_energy1: rp.energy + mu2 * (-m1.f),
        dl_at_max1: m1.x,
        max_energy2: rp.energy - mu1 * m2.f,
        dl_at_max2: m2.x,
    })
}

/// `E L^2` at which the clearance along line `E_k = 0` vanishes, found by
/// bisection on the sign of the line clearance in `[lo, hi]`.
pub fn tangency_el2(masses: &MassSplit, line: Body, lo: f64, hi: f64) -> Option<f64> {
    let g = |el2: f64| line_clearance(masses, el2, line, CRITICAL_D_GRID).map(|(_, d)| d);
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a)?, g(b)?);
    if ga.signum() == gb.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let gm = g(mid)?;
        if gm.signum() == ga.signum() {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a).abs() <= 1e-15 * a.abs() {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// Residuals of the four tangency conditions at the critical pair
/// (`E1 = 0`, `e1 = 1`, `dbar = 0`, `d dbar / d dL = 0`).
pub fn tangency_residuals(cv: &CriticalValues) -> [f64; 4] {
    let p = cv.critical_pair(1.0);
    let e1 = p.eccentricities().map(|e| e.0).unwrap_or(f64::NAN);
    let d = dbar_with(&p, Body::One).unwrap_or(f64::NAN);
    let slope = dbar_partial_dl(&p).unwrap_or(f64::NAN);
    [p.energy1(), e1 - 1.0, d, slope]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rp(mu1: f64, el2: f64) -> RegionParams {
        RegionParams::from_el2(MassSplit::from_mu1(mu1).unwrap(), el2, 1.0).unwrap()
    }

    #[test]
    fn equal_mass_threshold() {
        let cv = sigma(&MassSplit::equal());
        assert!((cv.sigma + 27.0 / 64.0).abs() < 1e-15);
        assert!((cv.e_crit - 0.5).abs() < 1e-15);
    }

    #[test]
    fn threshold_for_unequal_masses() {
        let cv = sigma(&MassSplit::from_mu1(0.45).unwrap());
        assert!(cv.sigma > -0.445 && cv.sigma < -0.41);
        assert!((cv.sigma + 0.4349).abs() < 1e-4);
        let tiny = sigma(&MassSplit::from_mu1(1e-4).unwrap());
        assert!((tiny.sigma + 0.5).abs() < 1e-3);
    }

    #[test]
    fn critical_values_are_tangent() {
        for mu1 in [0.05, 0.2, 0.45, 0.5] {
            let cv = sigma(&MassSplit::from_mu1(mu1).unwrap());
            let (mu1, mu2) = (cv.masses.mu1(), cv.masses.mu2());
            let e = cv.e_crit;
            assert!((2.0 * mu2 * mu2 * e * e - mu1 * mu1 * (1.0 - e)).abs() < 1e-12);
            for r in tangency_residuals(&cv) {
                assert!(r.abs() < 1e-10, "{mu1}: {r}");
            }
            assert!((mu1 * cv.l1_crit + mu2 * cv.l2_crit - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn admissibility_of_mean_orbit() {
        assert!(admissible(&rp(0.45, -0.4).pair(0.0, 0.0, 0.0)));
        assert!(!admissible(&rp(0.45, -0.6).pair(0.0, 0.0, 0.0)));
        // on the e1 = 0 edge
        let r = rp(0.45, -0.4);
        let dl = 0.3;
        let l1 = 1.0 + 0.55 * dl;
        let de = (-1.0 / (2.0 * l1 * l1) - r.energy) / 0.55;
        let p = r.pair(dl, de, 0.0);
        assert!(admissible(&p));
        assert!(p.ecc_squared().0.abs() < 1e-14);
    }

    #[test]
    fn boundary_examples() {
        let r = rp(0.45, -0.445);
        assert_eq!(i_pi_boundary(0.0, &r), Err(Error::Degenerate));
        let b = delta_l_bound(&r).unwrap();
        let (lo, hi) = i_pi_boundary(b, &r).unwrap();
        assert!((lo - hi).abs() < 1e-6 * hi.abs());
        assert!(matches!(
            i_pi_boundary(1.01 * b, &r),
            Err(Error::NoBoundary { .. })
        ));
        // both roots share the sign of L1^2 - L2^2
        for dl in [-0.5, -0.1, 0.1, 0.5] {
            let (lo, hi) = i_pi_boundary(dl, &r).unwrap();
            assert_eq!(lo.signum(), dl.signum());
            assert_eq!(hi.signum(), dl.signum());
        }
    }

    #[test]
    fn boundary_roots_satisfy_squared_condition() {
        let r = rp(0.45, -0.445);
        for dl in [-0.6, -0.3, 0.2, 0.65] {
            let roots = i_pi_boundary(dl, &r).unwrap();
            for de in [roots.0, roots.1] {
                let p = r.pair(dl, de, 0.0);
                let (q1, q2) = p.ecc_squared();
                let m = p.intersection_margin();
                assert!((q1 * q2 - m * m).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn delta_l_bound_examples() {
        assert_eq!(delta_l_bound(&rp(0.45, -0.5)).unwrap(), 0.0);
        let b = delta_l_bound(&rp(0.45, -0.445)).unwrap();
        let expected = ((1.0f64 - 0.89) / (2.0 * 0.445 * 0.45 * 0.55)).sqrt();
        assert!((b - expected).abs() < 1e-14);
        assert!(matches!(
            delta_l_bound(&rp(0.45, -0.52)),
            Err(Error::VoidRegion { .. })
        ));
    }

    #[test]
    fn equal_mass_disk_threshold() {
        let el2 = critical_el2_equal_mass(10.0).unwrap();
        let e = equal_mass_critical_eccentricity(10.0).unwrap();
        assert!((e - (10.0 - 91f64.sqrt())).abs() < 1e-14);
        assert!((e - 0.460607).abs() < 1e-6);
        assert!((el2 + 0.495133).abs() < 1e-5);
        assert!((critical_el2_equal_mass(1e9).unwrap() + 27.0 / 64.0).abs() < 1e-8);
        assert!(matches!(
            critical_el2_equal_mass(1.0),
            Err(Error::GammaRange { .. })
        ));
        // monotone decreasing in D / L^2 = 2 / gamma
        let mut prev = f64::INFINITY;
        for gamma in [1000.0, 100.0, 20.0, 10.0, 5.0, 2.0, 1.2] {
            let v = critical_el2_equal_mass(gamma).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let d = equal_mass_critical_d(el2).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn critical_d_reference_values() {
        let m = MassSplit::from_mu1(0.45).unwrap();
        let a = critical_d_numeric(&m, -0.445).unwrap();
        assert!((a.d - 0.034).abs() < 0.0034, "{a:?}");
        assert_eq!(a.binding, Body::One);
        assert!(a.slope.abs() < 1e-5);
        let b = critical_d_numeric(&m, -0.52).unwrap();
        assert!((b.d - 0.25).abs() < 0.025, "{b:?}");
        assert!(matches!(
            critical_d_numeric(&m, -0.41),
            Err(Error::NoMargin { .. })
        ));
    }

    #[test]
    fn critical_d_grid_stable() {
        let m = MassSplit::from_mu1(0.3).unwrap();
        let a = critical_d_numeric_with(&m, -0.48, 64).unwrap();
        let b = critical_d_numeric_with(&m, -0.48, 512).unwrap();
        assert!((a.d - b.d).abs() < 1e-6);
    }

    #[test]
    fn potential_margin_limits() {
        let r = rp(0.45, -0.445);
        let s = sigma(&r.masses).sigma;
        assert_eq!(potential_margin(&r, 0.0, 2.0, 0.0), r.el2() < s);
        assert!(potential_margin(&r, 0.0, 2.0, 0.03));
        assert!(!potential_margin(&r, 0.0, 2.0, 0.04));
        // (E + U/M) L^2 = -0.43 lies above sigma(0.45)
        let u = (-0.43 + 0.445) * 2.0;
        assert!(!potential_margin(&r, u, 2.0, 0.0));
        assert!(potential_margin(&r, 0.2 * u, 2.0, 0.0));
    }

    #[test]
    fn extent_brackets_threshold() {
        let m = MassSplit::from_mu1(0.45).unwrap();
        let s = sigma(&m).sigma;
        let below = i_pi_energy_extent(&RegionParams::from_el2(m, s * (1.0 + 1e-6), 1.0).unwrap())
            .unwrap();
        let above = i_pi_energy_extent(&RegionParams::from_el2(m, s * (1.0 - 1e-6), 1.0).unwrap())
            .unwrap();
        assert!(below.max_energy1 < 0.0, "{below:?}");
        assert!(above.max_energy1 > 0.0, "{above:?}");
        assert!(below.max_energy2 < 0.0);
    }

    #[test]
    fn second_tangency_binds_later() {
        for mu1 in [0.2, 0.35, 0.45] {
            let m = MassSplit::from_mu1(mu1).unwrap();
            let s = sigma(&m).sigma;
            let t1 = tangency_el2(&m, Body::One, -0.499, -0.01).unwrap();
            let t2 = tangency_el2(&m, Body::Two, -0.499, -0.01).unwrap();
            assert!((t1 - s).abs() < 1e-9 * s.abs(), "{mu1}: {t1} vs {s}");
            assert!(t2 >= s, "{mu1}: {t2} < {s}");
            // line E2 = 0 is the mirror problem with the masses exchanged
            let (a, b) = (1.0 - mu1, mu1);
            let r2 = (a / b).powi(2);
            let e = ((r2 * r2 + 8.0 * r2).sqrt() - r2) / 4.0;
            let mirror = -(1.0 - e * e) * (a * a + b * b * e).powi(2) / (2.0 * b * e * e);
            assert!((t2 - mirror).abs() < 1e-9, "{mu1}: {t2} vs {mirror}");
        }
    }

    #[test]
    fn half_pi_margin_expansion() {
        // 1 + L2^2 E1 + L1^2 E2 = 1 + E (L1^2 + L2^2) + dE (mu2 L2^2 - mu1 L1^2)
        let r = rp(0.3, -0.47);
        for (dl, de) in [(0.1, 0.2), (-0.4, 0.05), (0.7, -0.3)] {
            let p = r.pair(dl, de, 0.0);
            let (l1, l2) = (1.0 + 0.7 * dl, 1.0 - 0.3 * dl);
            let expanded = 1.0 - 0.47 * (l1 * l1 + l2 * l2) + de * (0.7 * l2 * l2 - 0.3 * l1 * l1);
            assert!((p.intersection_margin() - expanded).abs() < 1e-14);
        }
    }
}
