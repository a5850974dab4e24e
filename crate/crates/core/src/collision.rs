//! Hard-sphere collision operator with a normal restitution coefficient
//! `1 - 2 eps`, generic over the space dimension.

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::kepler::MassSplit;

const UNIT_TOL: f64 = 1e-12;

/// Impact normal `n` and inelasticity parameter `eps` in `[0, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactConfig<const D: usize> {
    normal: SVector<f64, D>,
    epsilon: f64,
}

impl<const D: usize> ImpactConfig<D> {
    pub fn new(normal: SVector<f64, D>, epsilon: f64) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidImpact(format!(
                "normal has length {}",
                normal.norm()
            )));
        }
        if !(0.0..=0.5).contains(&epsilon) {
            return Err(Error::InvalidImpact(format!(
                "epsilon {epsilon} outside [0, 0.5]"
            )));
        }
        Ok(Self { normal, epsilon })
    }

    /// Normalizes `direction` before building the configuration.
    pub fn from_direction(direction: SVector<f64, D>, epsilon: f64) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidImpact("zero impact direction".into()));
        }
        Self::new(direction / n, epsilon)
    }

    pub fn normal(&self) -> &SVector<f64, D> {
        &self.normal
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Coefficient of restitution `1 - 2 eps`.
    pub fn restitution(&self) -> f64 {
        1.0 - 2.0 * self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionOutcome<const D: usize> {
    pub v1_out: SVector<f64, D>,
    pub v2_out: SVector<f64, D>,
    /// Kinetic energy lost per unit total mass, `2 mu1 mu2 eps (1 - eps) (w.n)^2`.
    pub energy_loss: f64,
}

/// `w' = (I - n n) w - (1 - 2 eps) (n n) w`.
pub fn post_collision_relative_velocity<const D: usize>(
    w: &SVector<f64, D>,
    cfg: &ImpactConfig<D>,
) -> Result<SVector<f64, D>> {
    let wn = w.dot(&cfg.normal);
    if wn >= 0.0 || wn.is_nan() {
        return Err(Error::NotIncoming { wn });
    }
    Ok(w - cfg.normal * ((2.0 - 2.0 * cfg.epsilon) * wn))
}

/// Outgoing velocities from the relative-velocity update and conservation of
/// the center-of-mass velocity `v = mu1 v1 + mu2 v2`.
pub fn collide<const D: usize>(
    v1: &SVector<f64, D>,
    v2: &SVector<f64, D>,
    masses: &MassSplit,
    cfg: &ImpactConfig<D>,
) -> Result<CollisionOutcome<D>> {
    let (mu1, mu2) = (masses.mu1(), masses.mu2());
    let w = v1 - v2;
    let w_out = post_collision_relative_velocity(&w, cfg)?;
    // v_i' = v_i + (w' - w) mu_j, which rounds relative to the velocity change
    let dw = w_out - w;
    let wn = w.dot(&cfg.normal);
    let eps = cfg.epsilon;
    Ok(CollisionOutcome {
        v1_out: v1 + dw * mu2,
        v2_out: v2 - dw * mu1,
        energy_loss: 2.0 * mu1 * mu2 * eps * (1.0 - eps) * wn * wn,
    })
}

/// Relative speed below which both outgoing orbits are guaranteed bound,
/// for bodies at `x1`, `x2` whose center-of-mass velocity is `v`.
///
/// Outgoing velocities are `v + mu2 w'` and `v - mu1 w'` with `|w'| <= |w|`,
/// and an orbit through `x` is bound iff its speed is below `sqrt(2/|x|)`.
/// Negative bounds are clamped to zero.
pub fn single_collision_safe_bound<const D: usize>(
    x1: &SVector<f64, D>,
    x2: &SVector<f64, D>,
    v: &SVector<f64, D>,
    masses: &MassSplit,
) -> f64 {
    let escape1 = (2.0 / x1.norm()).sqrt();
    let escape2 = (2.0 / x2.norm()).sqrt();
    let speed = v.norm();
    let b1 = (escape1 - speed) / masses.mu2();
    let b2 = (escape2 - speed) / masses.mu1();
    b1.min(b2).max(0.0)
}

/// Kinetic energy `m1 |v1|^2/2 + m2 |v2|^2/2` per unit total mass.
pub fn specific_kinetic_energy<const D: usize>(
    v1: &SVector<f64, D>,
    v2: &SVector<f64, D>,
    masses: &MassSplit,
) -> f64 {
    0.5 * (masses.mu1() * v1.norm_squared() + masses.mu2() * v2.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector2, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg2(n: Vector2<f64>, eps: f64) -> ImpactConfig<2> {
        ImpactConfig::new(n, eps).unwrap()
    }

    #[test]
    fn relative_velocity_examples() {
        let n = Vector2::new(1.0, 0.0);
        let w = Vector2::new(-2.0, 0.0);
        assert_eq!(
            post_collision_relative_velocity(&w, &cfg2(n, 0.0)).unwrap(),
            Vector2::new(2.0, 0.0)
        );
        assert_eq!(
            post_collision_relative_velocity(&w, &cfg2(n, 0.25)).unwrap(),
            Vector2::new(1.0, 0.0)
        );
        assert_eq!(
            post_collision_relative_velocity(&Vector2::new(-1.0, 3.0), &cfg2(n, 0.0)).unwrap(),
            Vector2::new(1.0, 3.0)
        );
    }

    #[test]
    fn grazing_and_outgoing_are_rejected() {
        let c = cfg2(Vector2::new(1.0, 0.0), 0.1);
        assert!(matches!(
            post_collision_relative_velocity(&Vector2::new(0.0, 1.0), &c),
            Err(Error::NotIncoming { .. })
        ));
        assert!(matches!(
            post_collision_relative_velocity(&Vector2::new(1.0, 1.0), &c),
            Err(Error::NotIncoming { .. })
        ));
    }

    #[test]
    fn impact_config_validation() {
        assert!(ImpactConfig::new(Vector2::new(1.0, 1.0), 0.0).is_err());
        assert!(ImpactConfig::new(Vector2::new(1.0, 0.0), 0.6).is_err());
        assert!(ImpactConfig::new(Vector2::new(1.0, 0.0), -0.1).is_err());
        let c = ImpactConfig::from_direction(Vector3::new(0.0, 3.0, 4.0), 0.5).unwrap();
        assert!((c.normal().norm() - 1.0).abs() < 1e-15);
        assert_eq!(c.restitution(), 0.0);
    }

    #[test]
    fn equal_mass_exchange() {
        let m = MassSplit::equal();
        let out = collide(
            &Vector2::new(0.0, 1.0),
            &Vector2::new(2.0, 1.0),
            &m,
            &cfg2(Vector2::new(1.0, 0.0), 0.0),
        )
        .unwrap();
        assert_eq!(out.v1_out, Vector2::new(2.0, 1.0));
        assert_eq!(out.v2_out, Vector2::new(0.0, 1.0));
        assert_eq!(out.energy_loss, 0.0);
    }

    #[test]
    fn inelastic_loss_matches_kinetic_difference() {
        let m = MassSplit::equal();
        let v1 = Vector2::new(0.0, 1.0);
        let v2 = Vector2::new(2.0, 1.0);
        let out = collide(&v1, &v2, &m, &cfg2(Vector2::new(1.0, 0.0), 0.25)).unwrap();
        assert!((out.v1_out - Vector2::new(1.5, 1.0)).norm() < 1e-15);
        assert!((out.v2_out - Vector2::new(0.5, 1.0)).norm() < 1e-15);
        // direct difference with m1 = m2 = 1
        let t = 0.5 * (v1.norm_squared() + v2.norm_squared());
        let t_out = 0.5 * (out.v1_out.norm_squared() + out.v2_out.norm_squared());
        assert!((t - t_out - 0.75).abs() < 1e-14);
        assert!((out.energy_loss - 0.375).abs() < 1e-15);
    }

    #[test]
    fn safe_bound_examples() {
        let m = MassSplit::equal();
        let x = Vector2::new(1.0, 0.0);
        let b = single_collision_safe_bound(&x, &x, &Vector2::zeros(), &m);
        assert!((b - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let fast = Vector2::new(0.0, 2f64.sqrt());
        assert_eq!(single_collision_safe_bound(&x, &x, &fast, &m), 0.0);
    }

    #[test]
    fn safe_bound_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = MassSplit::from_mu1(0.3).unwrap();
        for _ in 0..20 {
            let x1 = Vector2::new(rng.random_range(0.3..3.0), rng.random_range(-1.0..1.0));
            let x2 = x1 + Vector2::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            let v = Vector2::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
            let bound = single_collision_safe_bound(&x1, &x2, &v, &m);
            for _ in 0..1000 {
                let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let mag = rng.random_range(0.0..1.0) * bound;
                let w = Vector2::new(ang.cos(), ang.sin()) * mag;
                let v1 = v + w * m.mu2();
                let v2 = v - w * m.mu1();
                let nang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let mut n = Vector2::new(nang.cos(), nang.sin());
                if w.dot(&n) > 0.0 {
                    n = -n;
                }
                let Ok(out) = collide(&v1, &v2, &m, &cfg2(n, rng.random_range(0.0..0.5))) else {
                    continue;
                };
                assert!(0.5 * out.v1_out.norm_squared() - 1.0 / x1.norm() < 0.0);
                assert!(0.5 * out.v2_out.norm_squared() - 1.0 / x2.norm() < 0.0);
            }
        }
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b, c)| Vector3::new(a, b, c))
    }

    proptest! {
        #[test]
        fn conservation_and_restitution(
            v1 in vec3(),
            v2 in vec3(),
            dir in vec3(),
            eps in 0.0f64..=0.5,
            mu1 in 0.01f64..=0.5,
        ) {
            let m = MassSplit::from_mu1(mu1).unwrap();
            let w = v1 - v2;
            prop_assume!(dir.norm() > 1e-3);
            let mut n = dir.normalize();
            if w.dot(&n) > 0.0 { n = -n; }
            prop_assume!(w.dot(&n) < -1e-9);
            let c = ImpactConfig::new(n, eps).unwrap();
            let out = collide(&v1, &v2, &m, &c).unwrap();
            let p_in = v1 * m.mu1() + v2 * m.mu2();
            let p_out = out.v1_out * m.mu1() + out.v2_out * m.mu2();
            prop_assert!((p_in - p_out).norm() <= 1e-14 * (v1.norm() + v2.norm()));
            let w_out = out.v1_out - out.v2_out;
            prop_assert!((w_out.dot(&n) / w.dot(&n) + (1.0 - 2.0 * eps)).abs() < 1e-12);
            let t = specific_kinetic_energy(&v1, &v2, &m);
            let t_out = specific_kinetic_energy(&out.v1_out, &out.v2_out, &m);
            prop_assert!(t_out <= t + 1e-12);
            prop_assert!(w_out.norm() <= w.norm() * (1.0 + 1e-14));
        }
    }
}
