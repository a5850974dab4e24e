//! Stochastic collision map on pairs of orbits.
//!
//! Each step picks a contact configuration of the two current orbits, builds
//! the two velocities there, applies the impact operator and replaces the
//! orbits by the osculating orbits of the outgoing states. Time between
//! impacts is not modelled. Runs are reproducible from the seed and stream
//! of a [`ChaCha8Rng`].

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::Vector2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{collide, ImpactConfig};
use crate::error::{Error, Result};
use crate::geometry::{dbar, intersection_anomalies, tangency_diagnostic, PairState};
use crate::kepler::{
    elements_from_state, state_at_anomaly, wrap_angle, ConicClass, MassSplit, OrbitElements,
    PlanarState, TOL_CLASS,
};
use crate::regions::{delta_l_bound, RegionParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EpsilonPolicy {
    Fixed(f64),
    /// A fresh `eps ~ U[0, 0.5]` per event.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimMode {
    /// Point particles, colliding where the orbits cross.
    Points,
    /// Disks of summed radius `d`, colliding at center distance `d`.
    Disks { d: f64 },
}

/// How the contact configuration is selected among the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointChoice {
    Uniform,
    /// Always the first candidate, for reproducible worst-case probing.
    First,
}

/// Distribution of the impact normal in points mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImpactLaw {
    /// Uniform on the half-circle `{n : w.n < 0}`.
    HalfCircle,
    /// Impact parameter `b ~ U(-1, 1)`, `n` at angle `asin(b)` from `-w/|w|`.
    DiskLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance of the conservation checks.
    pub conservation: f64,
    /// Slack of the `I_pi` membership test.
    pub membership: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            conservation: 1e-12,
            membership: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub masses: MassSplit,
    pub energy: f64,
    pub ang_mom: f64,
    pub dl: f64,
    pub de: f64,
    pub domega: f64,
    pub epsilon: EpsilonPolicy,
    pub mode: SimMode,
    pub n_steps: usize,
    pub seed: u64,
    /// ChaCha stream; independent runs of one campaign use streams 0, 1, ...
    pub stream: u64,
    pub point_choice: PointChoice,
    pub impact_law: ImpactLaw,
    /// Redraw `domega` before each event among the offsets where the orbits
    /// intersect (points mode). By default the offset is carried.
    pub resample_domega: bool,
    /// End the run at the first non-elliptic outgoing orbit.
    pub stop_at_escape: bool,
    pub tolerances: Tolerances,
}

impl SimConfig {
    /// Elastic points-mode run of `n_steps` from the pair `(dl, de, domega)`.
    pub fn new(masses: MassSplit, energy: f64, ang_mom: f64, n_steps: usize, seed: u64) -> Self {
        Self {
            masses,
            energy,
            ang_mom,
            dl: 0.0,
            de: 0.0,
            domega: FRAC_PI_2,
            epsilon: EpsilonPolicy::Fixed(0.0),
            mode: SimMode::Points,
            n_steps,
            seed,
            stream: 0,
            point_choice: PointChoice::Uniform,
            impact_law: ImpactLaw::HalfCircle,
            resample_domega: false,
            stop_at_escape: true,
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_el2(masses: MassSplit, el2: f64, ang_mom: f64, n_steps: usize, seed: u64) -> Self {
        Self::new(masses, el2 / (ang_mom * ang_mom), ang_mom, n_steps, seed)
    }

    pub fn with_initial(mut self, dl: f64, de: f64, domega: f64) -> Self {
        self.dl = dl;
        self.de = de;
        self.domega = domega;
        self
    }

    pub fn initial_pair(&self) -> PairState {
        PairState::new(
            self.masses,
            self.energy,
            self.ang_mom,
            self.dl,
            self.de,
            self.domega,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.energy.is_finite() || !self.ang_mom.is_finite() {
            return Err(Error::InvalidParameter("non-finite invariants".into()));
        }
        if let EpsilonPolicy::Fixed(eps) = self.epsilon {
            if !(0.0..=0.5).contains(&eps) {
                return Err(Error::InvalidParameter(format!(
                    "epsilon {eps} outside [0, 0.5]"
                )));
            }
        }
        if let SimMode::Disks { d } = self.mode {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "disk diameter must be positive, got {d}"
                )));
            }
        }
        self.initial_pair().eccentricities()?;
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    fn header_lines(&self) -> Vec<(&'static str, String)> {
        let eps = match self.epsilon {
            EpsilonPolicy::Fixed(e) => format!("{e:.16e}"),
            EpsilonPolicy::Uniform => "uniform".into(),
        };
        let mode = match self.mode {
            SimMode::Points => "points".to_string(),
            SimMode::Disks { d } => format!("disks:{d:.16e}"),
        };
        vec![
            ("mu1", format!("{:.16e}", self.masses.mu1())),
            ("mu2", format!("{:.16e}", self.masses.mu2())),
            ("energy", format!("{:.16e}", self.energy)),
            ("ang_mom", format!("{:.16e}", self.ang_mom)),
            ("dl", format!("{:.16e}", self.dl)),
            ("de", format!("{:.16e}", self.de)),
            ("domega", format!("{:.16e}", self.domega)),
            ("epsilon", eps),
            ("mode", mode),
            ("n_steps", self.n_steps.to_string()),
            ("seed", self.seed.to_string()),
            ("stream", self.stream.to_string()),
            ("point_choice", format!("{:?}", self.point_choice)),
            ("impact_law", format!("{:?}", self.impact_law)),
            ("resample_domega", self.resample_domega.to_string()),
            ("stop_at_escape", self.stop_at_escape.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub step: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub normal: [f64; 2],
    pub epsilon: f64,
    /// Pair the impact was applied to (its offset is the resampled one when
    /// resampling is enabled).
    pub pre: PairState,
    pub post: PairState,
    pub pre_orbits: [OrbitElements; 2],
    pub post_orbits: [OrbitElements; 2],
    pub eccentricities: [f64; 2],
    pub classes: [ConicClass; 2],
    /// Kinetic energy lost per unit total mass.
    pub energy_loss: f64,
    /// Tangency diagnostic of the pre-collision pair (NaN when undefined).
    pub tangency: f64,
}

impl CollisionEvent {
    pub fn is_escape(&self) -> bool {
        self.classes.iter().any(|c| *c != ConicClass::Elliptic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    Escaped { step: usize },
    /// No admissible contact configuration; the state is absorbing.
    Absorbed { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: SimConfig,
    pub initial: PairState,
    pub events: Vec<CollisionEvent>,
    pub termination: Termination,
}

pub const CSV_COLUMNS: [&str; 18] = [
    "step",
    "theta1",
    "theta2",
    "nx",
    "ny",
    "eps",
    "E1",
    "L1",
    "e1",
    "E2",
    "L2",
    "e2",
    "dL",
    "dE",
    "dOmega",
    "energy_loss",
    "class1",
    "class2",
];

impl Trajectory {
    /// One row per event with the outgoing elements, preceded by the config
    /// as `# key=value` comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.config.header_lines() {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "# termination={:?}", self.termination);
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for ev in &self.events {
            let [o1, o2] = ev.post_orbits;
            let _ = write!(out, "{}", ev.step);
            for v in [
                ev.theta1,
                ev.theta2,
                ev.normal[0],
                ev.normal[1],
                ev.epsilon,
                o1.energy,
                o1.ang_mom,
                ev.eccentricities[0],
                o2.energy,
                o2.ang_mom,
                ev.eccentricities[1],
                ev.post.dl,
                ev.post.de,
                ev.post.domega,
                ev.energy_loss,
            ] {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(out, ",{},{}", ev.classes[0].as_str(), ev.classes[1].as_str());
        }
        out
    }

    pub fn first_escape(&self) -> Option<&CollisionEvent> {
        self.events.iter().find(|e| e.is_escape())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub n_events: usize,
    pub all_elliptic: bool,
    pub max_e1: f64,
    pub max_e2: f64,
    pub max_abs_l1: f64,
    pub max_abs_l2: f64,
    pub max_abs_dl: f64,
    /// Largest `|dL| - bound(E)` over events, points mode only.
    pub max_dl_excess: Option<f64>,
    pub first_escape: Option<usize>,
    /// Largest `|L_n - L_0| / |L_0|`.
    pub ang_mom_drift: f64,
    /// Largest `|E_n - E_0| / |E_0|`.
    pub energy_drift: f64,
    /// `E_n <= E_{n-1}` and `E_n L^2 <= E_{n-1} L^2` at every event.
    pub energy_monotone: bool,
    /// Largest mismatch between the recomputed `E` and `E_prev - loss`.
    pub loss_bookkeeping: f64,
    /// Post-collision pairs outside `I_pi` (points mode).
    pub i_pi_violations: usize,
    /// Largest `dbar - d` after an event (disks mode).
    pub max_dbar_excess: Option<f64>,
    /// Smallest `-max(E1, E2)` over the outgoing orbits.
    pub min_binding: f64,
    pub termination: Termination,
}

impl InvarianceReport {
    fn new(cfg: &SimConfig) -> Self {
        Self {
            n_events: 0,
            all_elliptic: true,
            max_e1: 0.0,
            max_e2: 0.0,
            max_abs_l1: 0.0,
            max_abs_l2: 0.0,
            max_abs_dl: cfg.dl.abs(),
            max_dl_excess: matches!(cfg.mode, SimMode::Points).then_some(f64::NEG_INFINITY),
            first_escape: None,
            ang_mom_drift: 0.0,
            energy_drift: 0.0,
            energy_monotone: true,
            loss_bookkeeping: 0.0,
            i_pi_violations: 0,
            max_dbar_excess: matches!(cfg.mode, SimMode::Disks { .. }).then_some(f64::NEG_INFINITY),
            min_binding: f64::INFINITY,
            termination: Termination::Completed,
        }
    }

    fn record(&mut self, cfg: &SimConfig, ev: &CollisionEvent, prev_energy: f64) {
        self.n_events += 1;
        let post = &ev.post;
        let [o1, o2] = ev.post_orbits;
        if ev.is_escape() {
            self.all_elliptic = false;
            self.first_escape.get_or_insert(ev.step);
        }
        self.max_e1 = self.max_e1.max(ev.eccentricities[0]);
        self.max_e2 = self.max_e2.max(ev.eccentricities[1]);
        self.max_abs_l1 = self.max_abs_l1.max(o1.ang_mom.abs());
        self.max_abs_l2 = self.max_abs_l2.max(o2.ang_mom.abs());
        self.max_abs_dl = self.max_abs_dl.max(post.dl.abs());
        self.min_binding = self.min_binding.min(-o1.energy.max(o2.energy));
        let l0 = cfg.ang_mom.abs().max(f64::MIN_POSITIVE);
        self.ang_mom_drift = self
            .ang_mom_drift
            .max((post.ang_mom - cfg.ang_mom).abs() / l0);
        let e0 = cfg.energy.abs().max(f64::MIN_POSITIVE);
        self.energy_drift = self.energy_drift.max((post.energy - cfg.energy).abs() / e0);
        let slack = cfg.tolerances.conservation * prev_energy.abs();
        let l2 = post.ang_mom * post.ang_mom;
        let prev_l2 = ev.pre.ang_mom * ev.pre.ang_mom;
        if post.energy > prev_energy + slack || post.energy * l2 > prev_energy * prev_l2 + slack * prev_l2 {
            self.energy_monotone = false;
        }
        self.loss_bookkeeping = self
            .loss_bookkeeping
            .max((post.energy - (prev_energy - ev.energy_loss)).abs());
        match cfg.mode {
            SimMode::Points => {
                if let Ok(rp) = RegionParams::new(post.masses, post.energy, post.ang_mom.abs()) {
                    let bound = delta_l_bound(&rp).unwrap_or(0.0);
                    let excess = post.dl.abs() - bound;
                    self.max_dl_excess = self.max_dl_excess.map(|m| m.max(excess));
                }
                if !in_i_pi_with_slack(post, cfg.tolerances.membership) {
                    self.i_pi_violations += 1;
                }
            }
            SimMode::Disks { d } => {
                if let Ok(db) = dbar(post) {
                    self.max_dbar_excess = self.max_dbar_excess.map(|m| m.max(db.value - d));
                }
            }
        }
    }
}

fn in_i_pi_with_slack(p: &PairState, slack: f64) -> bool {
    let (q1, q2) = p.ecc_squared();
    let scale = 1.0 + p.el2().abs();
    (q1.max(0.0) * q2.max(0.0)).sqrt() + p.intersection_margin() >= -slack * scale
}

/// Contact configurations of the current pair.
enum Candidates {
    Discrete(Vec<(f64, f64)>),
    /// The orbits coincide: every anomaly is a contact.
    Coincident,
}

const DISK_THETA1_GRID: usize = 512;
const DISK_THETA2_SAMPLES: usize = 64;
const CONTACT_DEDUP: f64 = 1e-6;

fn point_candidates(p: &PairState) -> Result<Candidates> {
    match intersection_anomalies(p) {
        Ok(sols) => Ok(Candidates::Discrete(
            sols.into_iter().map(|s| (s.theta1, s.theta2)).collect(),
        )),
        Err(Error::DegenerateCoincident) => Ok(Candidates::Coincident),
        Err(e) => Err(e),
    }
}

/// Physical anomaly range `|theta| < limit` of an orbit.
fn anomaly_limit(e: f64) -> f64 {
    if e < 1.0 {
        PI
    } else {
        (-1.0 / e).acos() * (1.0 - 1e-9)
    }
}

/// Configurations with `|x1(theta1) - x2(theta2)| = d`.
///
/// `theta1` runs over a uniform grid; for each, every root in `theta2` is
/// bracketed on a window of polar angles within `asin(d / r1)` of `x1` and
/// refined by bisection.
pub fn disk_contacts(p: &PairState, d: f64) -> Result<Vec<(f64, f64)>> {
    let (e1, e2) = p.eccentricities()?;
    let (o1, o2) = p.orbits();
    if o1.ang_mom.abs() <= TOL_CLASS || o2.ang_mom.abs() <= TOL_CLASS {
        return Err(Error::DegenerateOrbit);
    }
    let lim1 = anomaly_limit(e1);
    let lim2 = anomaly_limit(e2);
    let pos2 = |t: f64| -> Option<Vector2<f64>> {
        let t = wrap_angle(t);
        (t.abs() < lim2 && 1.0 + e2 * t.cos() > TOL_CLASS).then(|| o2.position_unchecked(e2, t))
    };
    let d2 = d * d;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..DISK_THETA1_GRID {
        let t1 = -PI + (i as f64 + 0.5) * (2.0 * PI / DISK_THETA1_GRID as f64);
        if t1.abs() >= lim1 || 1.0 + e1 * t1.cos() <= TOL_CLASS {
            continue;
        }
        let x1 = o1.position_unchecked(e1, t1);
        let r1 = x1.norm();
        let half = if d < r1 { (d / r1).asin() * 1.05 + 1e-9 } else { PI };
        // orbit 2 has omega2 = 0, so its anomaly is the polar angle
        let phi1 = x1.y.atan2(x1.x);
        let g = |t2: f64| pos2(t2).map(|x2| (x1 - x2).norm_squared() - d2);
        let n = DISK_THETA2_SAMPLES;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=n {
            let t2 = phi1 - half + 2.0 * half * k as f64 / n as f64;
            let cur = g(t2).map(|v| (t2, v));
            if let (Some((ta, ga)), Some((tb, gb))) = (prev, cur) {
                if ga == 0.0 {
                    push_dedup(&mut out, (t1, wrap_angle(ta)));
                } else if ga.signum() != gb.signum() && gb != 0.0 {
                    if let Some(root) = bisect(&g, ta, tb, ga) {
                        push_dedup(&mut out, (t1, wrap_angle(root)));
                    }
                }
            }
            prev = cur;
        }
    }
    Ok(out)
}

fn bisect<G: Fn(f64) -> Option<f64>>(g: &G, mut a: f64, mut b: f64, ga: f64) -> Option<f64> {
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm == 0.0 {
            return Some(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    Some(0.5 * (a + b))
}

fn push_dedup(out: &mut Vec<(f64, f64)>, c: (f64, f64)) {
    let close = |a: &(f64, f64)| {
        wrap_angle(a.0 - c.0).abs() < CONTACT_DEDUP && wrap_angle(a.1 - c.1).abs() < CONTACT_DEDUP
    };
    if !out.iter().any(close) {
        out.push(c);
    }
}

/// Outcome of one impact applied at a fixed configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impact {
    pub post: PairState,
    pub post_orbits: [OrbitElements; 2],
    pub energy_loss: f64,
}

/// Deterministic part of a step: collide the bodies at anomalies
/// `(theta1, theta2)` of the orbits of `p` with normal `n` and `eps`.
///
/// With `shared_point` both outgoing states start from body 1's position,
/// so the impulse exerts no torque even though the two computed copies of
/// an intersection point differ by rounding.
pub fn apply_impact(
    p: &PairState,
    theta1: f64,
    theta2: f64,
    normal: [f64; 2],
    eps: f64,
    shared_point: bool,
) -> Result<Impact> {
    let (o1, o2) = p.orbits();
    let s1 = state_at_anomaly(&o1, theta1)?;
    let s2 = state_at_anomaly(&o2, theta2)?;
    let cfg = ImpactConfig::new(Vector2::new(normal[0], normal[1]), eps)?;
    let out = collide(&s1.velocity, &s2.velocity, &p.masses, &cfg)?;
    let x2 = if shared_point { s1.position } else { s2.position };
    let n1 = elements_from_state(&PlanarState::new(s1.position, out.v1_out))?;
    let n2 = elements_from_state(&PlanarState::new(x2, out.v2_out))?;
    Ok(Impact {
        post: PairState::from_orbits(p.masses, &n1, &n2),
        post_orbits: [n1, n2],
        energy_loss: out.energy_loss,
    })
}

fn relative_velocity(p: &PairState, theta1: f64, theta2: f64) -> Option<(Vector2<f64>, Vector2<f64>, Vector2<f64>)> {
    let (o1, o2) = p.orbits();
    let s1 = state_at_anomaly(&o1, theta1).ok()?;
    let s2 = state_at_anomaly(&o2, theta2).ok()?;
    Some((s1.velocity - s2.velocity, s1.position, s2.position))
}

/// Point contacts whose relative speed is below this fraction of the orbital
/// speed are treated as the two bodies moving together. Rebuilding orbits
/// from such a contact only reshuffles rounding noise.
pub const TOL_MERGE: f64 = 1e-9;

fn separating_speed(w: &Vector2<f64>, x1: &Vector2<f64>) -> bool {
    w.norm() > TOL_CLASS.max(TOL_MERGE * (2.0 / x1.norm()).sqrt())
}

fn sample_normal<R: Rng>(w: &Vector2<f64>, law: ImpactLaw, rng: &mut R) -> Vector2<f64> {
    let back = -w / w.norm();
    let angle = match law {
        ImpactLaw::HalfCircle => loop {
            let a: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            if a > -FRAC_PI_2 {
                break a;
            }
        },
        ImpactLaw::DiskLimit => loop {
            let b: f64 = rng.random_range(-1.0..1.0);
            if b > -1.0 {
                break b.asin();
            }
        },
    };
    let (s, c) = angle.sin_cos();
    Vector2::new(c * back.x - s * back.y, s * back.x + c * back.y)
}

fn resampled_offset<R: Rng>(p: &PairState, rng: &mut R) -> Option<f64> {
    let (e1, e2) = p.eccentricities().ok()?;
    let prod = e1 * e2;
    let m = p.intersection_margin();
    if prod <= 0.0 || m >= prod {
        return Some(rng.random_range(-PI..PI));
    }
    if m < -prod {
        return None;
    }
    let lo = (m / prod).acos();
    let mag = rng.random_range(lo..=PI);
    Some(if rng.random_bool(0.5) { mag } else { -mag })
}

/// One event of the collision map.
///
/// Returns `Err(NoCollisionPossible)` when the pair has no usable contact
/// configuration; that state is absorbing.
pub fn step<R: Rng>(p: &PairState, cfg: &SimConfig, index: usize, rng: &mut R) -> Result<CollisionEvent> {
    let mut pre = *p;
    if cfg.resample_domega && cfg.mode == SimMode::Points {
        pre.domega = resampled_offset(&pre, rng).ok_or(Error::NoCollisionPossible)?;
    }
    let cands = match cfg.mode {
        SimMode::Points => point_candidates(&pre)?,
        SimMode::Disks { d } => Candidates::Discrete(disk_contacts(&pre, d)?),
    };
    // (theta1, theta2, w, x1 - x2)
    let usable: Vec<(f64, f64, Vector2<f64>, Vector2<f64>)> = match cands {
        Candidates::Coincident => {
            let (e1, _) = pre.eccentricities()?;
            let lim = anomaly_limit(e1);
            let t1 = rng.random_range(-lim..lim);
            let t2 = wrap_angle(t1 + pre.domega);
            match relative_velocity(&pre, t1, t2) {
                Some((w, x1, x2)) if separating_speed(&w, &x1) => vec![(t1, t2, w, x1 - x2)],
                _ => Vec::new(),
            }
        }
        Candidates::Discrete(list) => list
            .into_iter()
            .filter_map(|(t1, t2)| {
                let (w, x1, x2) = relative_velocity(&pre, t1, t2)?;
                let sep = x1 - x2;
                let ok = match cfg.mode {
                    SimMode::Points => separating_speed(&w, &x1),
                    SimMode::Disks { .. } => w.dot(&sep) < 0.0,
                };
                ok.then_some((t1, t2, w, sep))
            })
            .collect(),
    };
    if usable.is_empty() {
        return Err(Error::NoCollisionPossible);
    }
    let pick = match cfg.point_choice {
        PointChoice::First => 0,
        PointChoice::Uniform => rng.random_range(0..usable.len()),
    };
    let (theta1, theta2, w, sep) = usable[pick];
    let n = match cfg.mode {
        SimMode::Points => sample_normal(&w, cfg.impact_law, rng),
        SimMode::Disks { .. } => sep / sep.norm(),
    };
    let eps = match cfg.epsilon {
        EpsilonPolicy::Fixed(e) => e,
        EpsilonPolicy::Uniform => rng.random_range(0.0..=0.5),
    };
    let normal = [n.x, n.y];
    let impact = apply_impact(&pre, theta1, theta2, normal, eps, cfg.mode == SimMode::Points)?;
    let (o1, o2) = pre.orbits();
    let [n1, n2] = impact.post_orbits;
    Ok(CollisionEvent {
        step: index,
        theta1,
        theta2,
        normal,
        epsilon: eps,
        pre,
        post: impact.post,
        pre_orbits: [o1, o2],
        post_orbits: impact.post_orbits,
        eccentricities: [n1.eccentricity_clamped(), n2.eccentricity_clamped()],
        classes: [n1.classify(), n2.classify()],
        energy_loss: impact.energy_loss,
        tangency: tangency_diagnostic(&pre).unwrap_or(f64::NAN),
    })
}

/// Iterates [`step`] up to `n_steps` times.
pub fn run(cfg: &SimConfig) -> Result<(Trajectory, InvarianceReport)> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let mut p = cfg.initial_pair();
    let mut report = InvarianceReport::new(cfg);
    let mut events = Vec::with_capacity(cfg.n_steps);
    let mut termination = Termination::Completed;
    for k in 0..cfg.n_steps {
        let ev = match step(&p, cfg, k, &mut rng) {
            Ok(ev) => ev,
            Err(Error::NoCollisionPossible) => {
                termination = Termination::Absorbed { step: k };
                break;
            }
            Err(e) => return Err(e),
        };
        report.record(cfg, &ev, p.energy);
        p = ev.post;
        let escaped = ev.is_escape();
        events.push(ev);
        if escaped && cfg.stop_at_escape {
            termination = Termination::Escaped { step: k };
            break;
        }
    }
    report.termination = termination;
    Ok((
        Trajectory {
            config: *cfg,
            initial: cfg.initial_pair(),
            events,
            termination,
        },
        report,
    ))
}

/// Runs `trials` independent runs on streams `0..trials` and returns the
/// first (lowest stream) trajectory containing a non-elliptic orbit.
pub fn escape_search(cfg: &SimConfig, trials: u64) -> Result<Option<(Trajectory, InvarianceReport)>> {
    cfg.validate()?;
    let found = (0..trials).into_par_iter().find_map_first(|k| {
        let mut c = *cfg;
        c.stream = k;
        c.stop_at_escape = true;
        match run(&c) {
            Ok((t, r)) if !r.all_elliptic => Some(Ok((t, r))),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        }
    });
    found.transpose()
}

/// Re-applies the recorded choices of every event to the initial pair and
/// checks that each outgoing pair is reproduced bit for bit.
pub fn replay(t: &Trajectory) -> Result<bool> {
    let mut p = t.initial;
    for ev in &t.events {
        let mut pre = p;
        pre.domega = ev.pre.domega;
        if pre != ev.pre {
            return Ok(false);
        }
        let imp = apply_impact(
            &pre,
            ev.theta1,
            ev.theta2,
            ev.normal,
            ev.epsilon,
            t.config.mode == SimMode::Points,
        )?;
        if imp.post != ev.post || imp.post_orbits != ev.post_orbits {
            return Ok(false);
        }
        p = imp.post;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::sigma;

    fn cfg(mu1: f64, el2: f64, steps: usize, seed: u64) -> SimConfig {
        SimConfig::from_el2(MassSplit::from_mu1(mu1).unwrap(), el2, 1.0, steps, seed)
    }

    #[test]
    fn elastic_event_conserves_invariants() {
        let c = cfg(0.45, -0.445, 1, 3);
        let mut rng = c.rng();
        let ev = step(&c.initial_pair(), &c, 0, &mut rng).unwrap();
        assert!((ev.post.energy - ev.pre.energy).abs() < 1e-12 * ev.pre.energy.abs());
        assert!((ev.post.ang_mom - ev.pre.ang_mom).abs() < 1e-12);
        assert_eq!(ev.energy_loss, 0.0);
    }

    #[test]
    fn inelastic_event_loses_reported_energy() {
        let mut c = cfg(0.3, -0.45, 200, 5);
        c.epsilon = EpsilonPolicy::Fixed(0.2);
        let (t, r) = run(&c).unwrap();
        // inelastic pairs merge onto one orbit, where w = 0 is absorbing
        assert!(t.events.len() > 50);
        if t.events.len() < 200 {
            let last = t.events.last().unwrap().post;
            assert!(last.dl.abs() < 1e-6 && last.de.abs() < 1e-6);
        }
        assert!(r.energy_monotone);
        assert!(r.loss_bookkeeping < 1e-12);
        assert!(t.events.iter().any(|e| e.energy_loss > 0.0));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let c = cfg(0.45, -0.445, 1000, 42);
        let (a, _) = run(&c).unwrap();
        let (b, _) = run(&c).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let mut other = c;
        other.stream = 1;
        assert_ne!(run(&other).unwrap().0.to_csv(), a.to_csv());
    }

    #[test]
    fn replay_reproduces_events() {
        let mut c = cfg(0.45, -0.445, 300, 9);
        c.epsilon = EpsilonPolicy::Uniform;
        let (t, _) = run(&c).unwrap();
        assert!(replay(&t).unwrap());
        let mut bad = t.clone();
        bad.events[10].normal[0] *= -1.0;
        assert!(!replay(&bad).unwrap_or(false));
    }

    #[test]
    fn bound_regime_stays_elliptic() {
        let m = MassSplit::from_mu1(0.45).unwrap();
        let s = sigma(&m).sigma;
        let (t, r) = run(&SimConfig::from_el2(m, 1.01 * s, 1.0, 5000, 1)).unwrap();
        assert_eq!(t.termination, Termination::Completed);
        assert!(r.all_elliptic);
        assert!(r.max_dl_excess.unwrap() <= 1e-9);
        assert_eq!(r.i_pi_violations, 0);
        assert!(r.energy_drift < 1e-10);
    }

    #[test]
    fn coincident_circles_are_absorbing() {
        // dl = de = 0 at E L^2 = -1/2: two identical circles, w = 0
        let c = cfg(0.5, -0.5, 10, 1);
        let (t, _) = run(&c).unwrap();
        assert_eq!(t.termination, Termination::Absorbed { step: 0 });
    }

    #[test]
    fn disjoint_orbits_are_absorbing_in_points_mode() {
        let c = cfg(0.45, -0.445, 5, 1).with_initial(0.3, 0.2, 0.0);
        assert!(!crate::geometry::intersects(&c.initial_pair()).unwrap());
        let (t, _) = run(&c).unwrap();
        assert_eq!(t.termination, Termination::Absorbed { step: 0 });
    }

    #[test]
    fn normals_are_incoming() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = Vector2::new(0.3, -1.1);
        for law in [ImpactLaw::HalfCircle, ImpactLaw::DiskLimit] {
            for _ in 0..1000 {
                let n = sample_normal(&w, law, &mut rng);
                assert!((n.norm() - 1.0).abs() < 1e-14);
                assert!(n.dot(&w) < 0.0);
            }
        }
    }

    #[test]
    fn disk_contacts_lie_at_distance() {
        let c = cfg(0.5, -0.45, 1, 0);
        let p = c.initial_pair();
        let d = 0.05;
        let contacts = disk_contacts(&p, d).unwrap();
        assert!(!contacts.is_empty());
        let (o1, o2) = p.orbits();
        for (t1, t2) in contacts {
            let x1 = state_at_anomaly(&o1, t1).unwrap().position;
            let x2 = state_at_anomaly(&o2, t2).unwrap().position;
            assert!(((x1 - x2).norm() - d).abs() < 1e-10);
        }
    }

    #[test]
    fn disks_run_keeps_gap_below_diameter() {
        let m = MassSplit::equal();
        let mut c = SimConfig::from_el2(m, -0.47, 1.0, 40, 4);
        c.mode = SimMode::Disks { d: 0.05 };
        let (t, r) = run(&c).unwrap();
        assert!(!t.events.is_empty());
        assert!(r.all_elliptic);
        assert!(r.max_dbar_excess.unwrap() <= 1e-9);
        assert!(r.ang_mom_drift < 1e-12);
        assert!(replay(&t).unwrap());
    }

    #[test]
    fn resampled_offsets_intersect() {
        let mut c = cfg(0.45, -0.445, 500, 2);
        c.resample_domega = true;
        let (t, r) = run(&c).unwrap();
        assert_eq!(t.events.len(), 500);
        assert!(r.all_elliptic);
        for ev in &t.events {
            assert!(crate::geometry::intersects(&ev.pre).unwrap());
        }
    }

    #[test]
    fn csv_layout() {
        let (t, _) = run(&cfg(0.45, -0.445, 3, 1)).unwrap();
        let csv = t.to_csv();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], CSV_COLUMNS.join(","));
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].split(',').count(), CSV_COLUMNS.len());
        assert!(csv.contains("# seed=1"));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = cfg(0.45, -0.445, 1, 1);
        c.epsilon = EpsilonPolicy::Fixed(0.7);
        assert!(run(&c).is_err());
        let mut c = cfg(0.45, -0.445, 1, 1);
        c.mode = SimMode::Disks { d: 0.0 };
        assert!(run(&c).is_err());
        assert!(run(&cfg(0.45, -0.6, 1, 1)).is_err());
    }
}
