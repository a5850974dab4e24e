//! `kepcoll` command-line front end.
//!
//! Exit codes: 0 on success, 1 when `verify` finds a violation or a run
//! fails at runtime, 2 on invalid flags or parameters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use kepcoll::dynamics::{escape_search, replay, run, EpsilonPolicy, ImpactLaw, PointChoice, SimConfig, SimMode};
use kepcoll::regions::{critical_d_numeric, equal_mass_critical_d, sigma, RegionParams};
use kepcoll::scan::{dbar_scan, default_file_stem, region_scan, write_grid, GridFormat, ScanKind, ScanWindow};
use kepcoll::verify::verify_all;
use kepcoll::MassSplit;

#[derive(Parser, Debug)]
#[command(name = "kepcoll", version, about = "Collisions of two bodies on co-focal Kepler orbits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Scale shared by every subcommand: `E = el2 / L^2`.
#[derive(clap::Args, Debug, Clone, Copy)]
struct Scale {
    /// Smaller mass fraction, in (0, 0.5].
    #[arg(long)]
    mu1: f64,
    /// Dimensionless product E L^2 (negative).
    #[arg(long, allow_hyphen_values = true)]
    el2: f64,
    /// Total angular momentum L.
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical threshold sigma and the tangent configuration, as JSON.
    Sigma {
        #[arg(long)]
        mu1: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
    },
    /// Region or dbar grid over the (dL, dE) plane.
    Scan {
        #[command(flatten)]
        scale: Scale,
        #[arg(long, value_enum, default_value_t = KindArg::Region)]
        kind: KindArg,
        /// Output file (`.csv` or `.pgm`) or directory for both formats.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        nx: usize,
        #[arg(long, default_value_t = 400)]
        ny: usize,
        /// dbar values mapped to gray 0 and 255, in units of L^2.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        floor: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        ceil: f64,
    },
    /// One collision sequence; writes the trajectory CSV and report JSON.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Output prefix; `<prefix>.csv` and `<prefix>.report.json` are written.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent runs on streams 0..trials until one reaches a non-elliptic orbit.
    EscapeSearch {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Output prefix for the certificate, written only when one is found.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical summed radius D; adds the closed form when mu1 = 0.5.
    CriticalD {
        #[command(flatten)]
        scale: Scale,
    },
    /// Runs the invariant suite; exits 1 on any violation.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Multiplier on the sample counts.
        #[arg(long, default_value_t = 1)]
        scale: usize,
    },
}

#[derive(clap::Args, Debug, Clone)]
struct SimArgs {
    #[command(flatten)]
    scale: Scale,
    /// Restitution parameter in [0, 0.5], or `uniform` for a fresh draw per event.
    #[arg(long, default_value = "0")]
    eps: String,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Points)]
    mode: ModeArg,
    /// Summed radius in disks mode, in units of L^2.
    #[arg(long)]
    d: Option<f64>,
    /// Initial dL, in units of L.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    dl: f64,
    /// Initial dE, in units of 1/L^2.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    de: f64,
    /// Initial periapsis offset.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2, allow_hyphen_values = true)]
    domega: f64,
    /// Redraw the periapsis offset before every event.
    #[arg(long)]
    resample_domega: bool,
    /// Keep iterating after a non-elliptic event.
    #[arg(long)]
    continue_after_escape: bool,
    #[arg(long, value_enum, default_value_t = ChoiceArg::Uniform)]
    point_choice: ChoiceArg,
    #[arg(long, value_enum, default_value_t = LawArg::HalfCircle)]
    impact_law: LawArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum KindArg {
    Region,
    Dbar,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModeArg {
    Points,
    Disks,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ChoiceArg {
    Uniform,
    First,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum LawArg {
    HalfCircle,
    DiskLimit,
}

enum Failure {
    Usage(anyhow::Error),
    Violation(String),
    Runtime(anyhow::Error),
}

type Outcome = std::result::Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Err(f) = configure_threads() {
        return report(f);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Usage(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Failure::Violation(msg) => {
            eprintln!("violation: {msg}");
            ExitCode::from(1)
        }
        Failure::Runtime(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// `KC_THREADS` bounds the rayon pool.
fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var("KC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(anyhow!("KC_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(runtime)
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Sigma { mu1, l } => cmd_sigma(mu1, l),
        Command::Scan {
            scale,
            kind,
            out,
            nx,
            ny,
            floor,
            ceil,
        } => cmd_scan(scale, kind, &out, nx, ny, floor, ceil),
        Command::Simulate { sim, out } => cmd_simulate(&sim, out),
        Command::EscapeSearch { sim, trials, out } => cmd_escape_search(&sim, trials, out),
        Command::CriticalD { scale } => cmd_critical_d(scale),
        Command::Verify { seed, scale } => cmd_verify(seed, scale),
    }
}

fn masses(mu1: f64) -> std::result::Result<MassSplit, Failure> {
    MassSplit::from_mu1(mu1).map_err(usage)
}

fn check_scale(l: f64) -> Outcome {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(usage(anyhow!("--L must be positive and finite, got {l}")))
    }
}

fn region_params(s: &Scale) -> std::result::Result<RegionParams, Failure> {
    check_scale(s.l)?;
    RegionParams::from_el2(masses(s.mu1)?, s.el2, s.l).map_err(usage)
}

fn print_json(v: &Value) -> Outcome {
    let text = serde_json::to_string_pretty(v).map_err(runtime)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed downstream pipe is not a failure of the run
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(runtime(e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn cmd_sigma(mu1: f64, l: f64) -> Outcome {
    check_scale(l)?;
    let m = masses(mu1)?;
    let cv = sigma(&m);
    print_json(&json!({
        "mu1": m.mu1(),
        "mu2": m.mu2(),
        "L": l,
        "sigma": cv.sigma,
        "e_crit": cv.e_crit,
        "L1_crit": cv.l1_crit * l,
        "L2_crit": cv.l2_crit * l,
        "energy_crit": cv.sigma / (l * l),
    }))
}

fn cmd_scan(scale: Scale, kind: KindArg, out: &Path, nx: usize, ny: usize, floor: f64, ceil: f64) -> Outcome {
    let rp = region_params(&scale)?;
    if nx == 0 || ny == 0 {
        return Err(usage(anyhow!("--nx and --ny must be positive")));
    }
    let l2 = scale.l * scale.l;
    if !(floor < ceil) {
        return Err(usage(anyhow!("--floor must be below --ceil")));
    }
    let targets: Vec<(GridFormat, PathBuf)> = match out.extension().and_then(|e| e.to_str()) {
        Some("csv") => vec![(GridFormat::Csv, out.to_path_buf())],
        Some("pgm") => vec![(GridFormat::Pgm, out.to_path_buf())],
        _ => {
            let kind = match kind {
                KindArg::Region => ScanKind::Region,
                KindArg::Dbar => ScanKind::Dbar,
            };
            let stem = default_file_stem(kind, scale.mu1, scale.el2);
            std::fs::create_dir_all(out)
                .with_context(|| format!("creating {}", out.display()))
                .map_err(runtime)?;
            vec![
                (GridFormat::Csv, out.join(format!("{stem}.csv"))),
                (GridFormat::Pgm, out.join(format!("{stem}.pgm"))),
            ]
        }
    };
    let window = ScanWindow::default_for(&rp);
    let grid = match kind {
        KindArg::Region => region_scan(&rp, &window, nx, ny),
        KindArg::Dbar => dbar_scan(&rp, &window, nx, ny, floor * l2, ceil * l2),
    }
    .map_err(runtime)?;
    let mut written = Vec::new();
    for (format, path) in targets {
        write_grid(&grid, format, &path).map_err(runtime)?;
        written.push(path.display().to_string());
    }
    print_json(&json!({ "written": written, "nx": nx, "ny": ny, "window": { "dl": window.dl, "de": window.de } }))
}

fn sim_config(a: &SimArgs) -> std::result::Result<SimConfig, Failure> {
    check_scale(a.scale.l)?;
    let m = masses(a.scale.mu1)?;
    let l = a.scale.l;
    let mut cfg = SimConfig::from_el2(m, a.scale.el2, l, a.steps, a.seed).with_initial(a.dl * l, a.de / (l * l), a.domega);
    cfg.epsilon = match a.eps.as_str() {
        "uniform" => EpsilonPolicy::Uniform,
        s => EpsilonPolicy::Fixed(
            s.parse()
                .map_err(|_| usage(anyhow!("--eps must be a number or `uniform`, got {s:?}")))?,
        ),
    };
    cfg.mode = match (a.mode, a.d) {
        (ModeArg::Points, None) => SimMode::Points,
        (ModeArg::Points, Some(_)) => return Err(usage(anyhow!("--d requires --mode disks"))),
        (ModeArg::Disks, Some(d)) => SimMode::Disks { d: d * l * l },
        (ModeArg::Disks, None) => return Err(usage(anyhow!("--mode disks requires --d"))),
    };
    cfg.stream = a.stream;
    cfg.resample_domega = a.resample_domega;
    cfg.stop_at_escape = !a.continue_after_escape;
    cfg.point_choice = match a.point_choice {
        ChoiceArg::Uniform => PointChoice::Uniform,
        ChoiceArg::First => PointChoice::First,
    };
    cfg.impact_law = match a.impact_law {
        LawArg::HalfCircle => ImpactLaw::HalfCircle,
        LawArg::DiskLimit => ImpactLaw::DiskLimit,
    };
    cfg.validate().map_err(usage)?;
    if !(a.scale.el2 < 0.0) {
        return Err(usage(anyhow!("--el2 must be negative, got {}", a.scale.el2)));
    }
    if !cfg.initial_pair().is_admissible() {
        return Err(usage(anyhow!(
            "initial pair (dl={}, de={}) has an orbit with 1 + 2 E_i L_i^2 < 0",
            a.dl,
            a.de
        )));
    }
    Ok(cfg)
}

fn default_prefix(tag: &str, a: &SimArgs) -> PathBuf {
    PathBuf::from(format!("{tag}_mu{}_EL2{}_seed{}", a.scale.mu1, a.scale.el2, a.seed))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(a: &SimArgs, out: Option<PathBuf>) -> Outcome {
    let cfg = sim_config(a)?;
    let prefix = out.unwrap_or_else(|| default_prefix("sim", a));
    let (traj, rep) = run(&cfg).map_err(runtime)?;
    let csv = with_suffix(&prefix, ".csv");
    let json_path = with_suffix(&prefix, ".report.json");
    write_file(&csv, traj.to_csv().as_bytes())?;
    let doc = json!({ "config": cfg, "report": rep });
    write_file(&json_path, serde_json::to_string_pretty(&doc).map_err(runtime)?.as_bytes())?;
    print_json(&json!({
        "trajectory": csv.display().to_string(),
        "report": json_path.display().to_string(),
        "n_events": rep.n_events,
        "all_elliptic": rep.all_elliptic,
        "termination": rep.termination,
    }))
}

fn cmd_escape_search(a: &SimArgs, trials: u64, out: Option<PathBuf>) -> Outcome {
    let cfg = sim_config(a)?;
    if trials == 0 {
        return Err(usage(anyhow!("--trials must be positive")));
    }
    let found = escape_search(&cfg, trials).map_err(runtime)?;
    let Some((traj, rep)) = found else {
        return print_json(&json!({ "config": cfg, "trials": trials, "found": false }));
    };
    let replays = replay(&traj).map_err(runtime)?;
    let prefix = out.unwrap_or_else(|| default_prefix("escape", a));
    let csv = with_suffix(&prefix, ".csv");
    let json_path = with_suffix(&prefix, ".report.json");
    write_file(&csv, traj.to_csv().as_bytes())?;
    let summary = json!({
        "config": traj.config,
        "trials": trials,
        "found": true,
        "stream": traj.config.stream,
        "escape_step": rep.first_escape,
        "replays_exactly": replays,
        "report": rep,
    });
    write_file(&json_path, serde_json::to_string_pretty(&summary).map_err(runtime)?.as_bytes())?;
    print_json(&summary)
}

fn cmd_critical_d(s: Scale) -> Outcome {
    check_scale(s.l)?;
    let m = masses(s.mu1)?;
    if !(s.el2 < 0.0) {
        return Err(usage(anyhow!("--el2 must be negative, got {}", s.el2)));
    }
    let l2 = s.l * s.l;
    let num = critical_d_numeric(&m, s.el2).map_err(runtime)?;
    let mut doc = json!({
        "mu1": m.mu1(),
        "el2": s.el2,
        "L": s.l,
        "d": num.d * l2,
        "binding": num.binding,
        "dl": num.dl * s.l,
        "other": num.other * l2,
    });
    if m.mu1() == 0.5 {
        doc["d_closed_form"] = match equal_mass_critical_d(s.el2) {
            Ok(d) => json!(d * l2),
            Err(_) => Value::Null,
        };
    }
    print_json(&doc)
}

fn cmd_verify(seed: u64, scale: usize) -> Outcome {
    let r = verify_all(seed, scale);
    print_json(&serde_json::to_value(&r).map_err(runtime)?)?;
    if r.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Violation(failed.join(", ")))
    }
}
