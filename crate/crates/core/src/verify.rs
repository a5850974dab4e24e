//! Self-check suite over the crate's main invariants.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{collide, ImpactConfig};
use crate::dynamics::{run, EpsilonPolicy, SimConfig};
use crate::geometry::{intersection_anomalies, intersects, tangency_diagnostic, PairState};
use crate::kepler::{state_at_anomaly, MassSplit};
use crate::regions::{critical_d_numeric, sigma, tangency_residuals};
use crate::spatial::{reduce_to_planar, SpatialState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Runs every check; `scale` multiplies the sample counts (1 is a few seconds).
pub fn verify_all(seed: u64, scale: usize) -> VerifyReport {
    let scale = scale.max(1);
    let checks = vec![
        check_threshold(),
        check_tangency(),
        check_critical_d(),
        check_collisions(seed, 10_000 * scale),
        check_intersections(seed, 2_000 * scale),
        check_spatial(seed, 10_000 * scale),
        check_dynamics(seed, 2_000 * scale),
    ];
    VerifyReport { checks }
}

fn check_threshold() -> Check {
    let cv = sigma(&MassSplit::equal());
    let err = (cv.sigma + 27.0 / 64.0).abs().max((cv.e_crit - 0.5).abs());
    check("equal_mass_threshold", err < 1e-12, format!("error {err:.3e}"))
}

fn check_tangency() -> Check {
    let mut worst = 0.0f64;
    for k in 1..=50 {
        let m = MassSplit::from_mu1(0.01 * k as f64).unwrap();
        for r in tangency_residuals(&sigma(&m)) {
            worst = worst.max(r.abs());
        }
    }
    check("critical_tangency", worst < 1e-9, format!("max residual {worst:.3e}"))
}

fn check_critical_d() -> Check {
    let m = MassSplit::from_mu1(0.45).unwrap();
    let a = critical_d_numeric(&m, -0.445).map(|c| c.d).unwrap_or(f64::NAN);
    let b = critical_d_numeric(&m, -0.52).map(|c| c.d).unwrap_or(f64::NAN);
    let ok = (a / 0.034 - 1.0).abs() < 0.1 && (b / 0.25 - 1.0).abs() < 0.1;
    check("critical_distance", ok, format!("D(-0.445)={a:.5} D(-0.52)={b:.5}"))
}

fn check_collisions(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_p = 0.0f64;
    let mut worst_r = 0.0f64;
    for _ in 0..n {
        let m = MassSplit::from_mu1(rng.random_range(0.01..=0.5)).unwrap();
        let v1 = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let v2 = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut nrm = Vector2::new(a.cos(), a.sin());
        let w = v1 - v2;
        if w.dot(&nrm) > 0.0 {
            nrm = -nrm;
        }
        if w.dot(&nrm).abs() < 1e-6 {
            continue;
        }
        let eps = rng.random_range(0.0..=0.5);
        let out = collide(&v1, &v2, &m, &ImpactConfig::new(nrm, eps).unwrap()).unwrap();
        let dp = (v1 * m.mu1() + v2 * m.mu2() - out.v1_out * m.mu1() - out.v2_out * m.mu2()).norm();
        worst_p = worst_p.max(dp);
        let ratio = (out.v1_out - out.v2_out).dot(&nrm) / w.dot(&nrm);
        worst_r = worst_r.max((ratio + 1.0 - 2.0 * eps).abs());
    }
    check(
        "collision_operator",
        worst_p < 1e-14 && worst_r < 1e-12,
        format!("momentum {worst_p:.3e}, restitution {worst_r:.3e}"),
    )
}

fn random_pair(rng: &mut ChaCha8Rng) -> PairState {
    loop {
        let m = MassSplit::from_mu1(rng.random_range(0.05..=0.5)).unwrap();
        let e1: f64 = rng.random_range(0.0..0.95);
        let e2: f64 = rng.random_range(0.0..0.95);
        let l1: f64 = rng.random_range(0.5..1.5);
        let l2: f64 = rng.random_range(0.5..1.5);
        let o1 = crate::kepler::OrbitElements::new(
            (e1 * e1 - 1.0) / (2.0 * l1 * l1),
            l1,
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let o2 = crate::kepler::OrbitElements::new((e2 * e2 - 1.0) / (2.0 * l2 * l2), l2, 0.0);
        let p = PairState::from_orbits(m, &o1, &o2);
        if p.is_admissible() {
            return p;
        }
    }
}

fn check_intersections(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut disagreements = 0;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let p = random_pair(&mut rng);
        let pred = intersects(&p).unwrap();
        let sols = intersection_anomalies(&p).unwrap_or_default();
        let near_tangent = tangency_diagnostic(&p).map(|t| t.abs() < 1e-6).unwrap_or(true);
        if pred != !sols.is_empty() && !near_tangent {
            disagreements += 1;
        }
        let (o1, o2) = p.orbits();
        for s in sols {
            let x1 = state_at_anomaly(&o1, s.theta1).unwrap().position;
            let x2 = state_at_anomaly(&o2, s.theta2).unwrap().position;
            worst = worst.max((x1 - x2).norm());
        }
    }
    check(
        "intersection_consistency",
        disagreements == 0 && worst < 1e-9,
        format!("{disagreements} disagreements, residual {worst:.3e}"),
    )
}

fn check_spatial(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let m = MassSplit::from_mu1(0.3).unwrap();
    let mut violations = 0;
    for _ in 0..n {
        let mut state = || {
            let x = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            SpatialState::new(x + Vector3::new(0.3, 0.0, 0.0), v)
        };
        let (Ok(s1), Ok(s2)) = (state(), state()) else {
            continue;
        };
        let Ok(r) = reduce_to_planar(&s1, &s2, &m) else {
            continue;
        };
        if r.total_ang_mom.norm() > r.tilde_l {
            violations += 1;
        }
    }
    check("spatial_triangle", violations == 0, format!("{violations} violations"))
}

fn check_dynamics(seed: u64, steps: usize) -> Check {
    let cases: Vec<(f64, EpsilonPolicy)> = vec![
        (0.5, EpsilonPolicy::Fixed(0.0)),
        (0.45, EpsilonPolicy::Fixed(0.1)),
        (0.3, EpsilonPolicy::Uniform),
    ];
    let results: Vec<Option<String>> = cases
        .par_iter()
        .map(|&(mu1, eps)| {
            let m = MassSplit::from_mu1(mu1).unwrap();
            let s = sigma(&m).sigma;
            let mut cfg = SimConfig::from_el2(m, 1.001 * s, 1.0, steps, seed);
            cfg.epsilon = eps;
            let (_, r) = match run(&cfg) {
                Ok(x) => x,
                Err(e) => return Some(format!("mu1={mu1}: {e}")),
            };
            let bound_ok = r.max_dl_excess.is_none_or(|x| x <= 1e-9);
            let elastic = matches!(eps, EpsilonPolicy::Fixed(e) if e == 0.0);
            let energy_ok = if elastic { r.energy_drift < 1e-10 } else { r.energy_monotone };
            let ok = r.all_elliptic && bound_ok && r.ang_mom_drift < 1e-10 && energy_ok && r.i_pi_violations == 0;
            (!ok).then(|| format!("mu1={mu1}: {r:?}"))
        })
        .collect();
    let failures: Vec<String> = results.into_iter().flatten().collect();
    let detail = if failures.is_empty() {
        format!("{} runs of {steps} steps", cases.len())
    } else {
        failures.join("; ")
    };
    check("dynamics_invariance", failures.is_empty(), detail)
}
