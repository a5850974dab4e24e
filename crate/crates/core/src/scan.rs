//! Rasterization of the `(dL, dE)` plane: region classification, `dbar`
//! level sets, and their CSV / PGM serialization.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dbar, PairState};
use crate::kepler::MassSplit;
use crate::regions::{in_i_half_pi, in_i_pi, RegionParams};

/// Cell codes of a region scan.
pub mod code {
    pub const OUTSIDE: u8 = 0;
    pub const I_HALF_PI: u8 = 1;
    pub const I_PI_ONLY: u8 = 2;
    pub const ELLIPTIC_OTHER: u8 = 3;
    pub const HYPERBOLIC_1: u8 = 4;
    pub const HYPERBOLIC_2: u8 = 5;
    pub const MAX: u8 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanKind {
    Region,
    Dbar,
}

impl ScanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanKind::Region => "region",
            ScanKind::Dbar => "dbar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "region" => Some(ScanKind::Region),
            "dbar" => Some(ScanKind::Dbar),
            _ => None,
        }
    }
}

/// `n` cells of equal width covering `[min, max]`, sampled at the centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "axis range [{min}, {max}] is not increasing"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "axis resolution {n} below 2"
            )));
        }
        Ok(Self { min, max, n })
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanWindow {
    pub dl: (f64, f64),
    pub de: (f64, f64),
}

impl ScanWindow {
    /// The prograde strip `dL in [-L/mu2, L/mu1]` widened by 10% and the
    /// strip of bound pairs `dE in [E/mu1, -E/mu2]` widened by 50%.
    pub fn default_for(rp: &RegionParams) -> Self {
        let (mu1, mu2) = (rp.masses.mu1(), rp.masses.mu2());
        let l = rp.ang_mom;
        let widen = |lo: f64, hi: f64, f: f64| {
            let c = 0.5 * (lo + hi);
            let h = 0.5 * (hi - lo) * f;
            (c - h, c + h)
        };
        Self {
            dl: widen(-l / mu2, l / mu1, 1.1),
            de: widen(rp.de_on_e2_zero(), rp.de_on_e1_zero(), 1.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub kind: ScanKind,
    pub mu1: f64,
    pub mu2: f64,
    pub el2: f64,
    pub ang_mom: f64,
    /// Values mapped to gray 0 and 255 when rendering.
    pub floor: f64,
    pub ceil: f64,
    pub version: String,
}

/// Row-major grid: `cells[j * nx + i]` holds the cell at `dl.center(i)`,
/// `de.center(j)`. Region scans store codes, `dbar` scans store raw values
/// with `NaN` outside the domain of `dbar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub dl: Axis,
    pub de: Axis,
    pub cells: Vec<f64>,
    pub meta: GridMeta,
}

impl RegionGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[j * self.dl.n + i]
    }

    pub fn code(&self, i: usize, j: usize) -> u8 {
        self.get(i, j) as u8
    }
}

/// Code of a single pair; see [`code`].
pub fn classify_pair(p: &PairState) -> u8 {
    let Ok(half) = in_i_half_pi(p) else {
        return code::OUTSIDE;
    };
    if half {
        return code::I_HALF_PI;
    }
    if in_i_pi(p).unwrap_or(false) {
        return code::I_PI_ONLY;
    }
    if p.energy1() >= 0.0 {
        code::HYPERBOLIC_1
    } else if p.energy2() >= 0.0 {
        code::HYPERBOLIC_2
    } else {
        code::ELLIPTIC_OTHER
    }
}

fn meta(rp: &RegionParams, kind: ScanKind, floor: f64, ceil: f64) -> GridMeta {
    GridMeta {
        kind,
        mu1: rp.masses.mu1(),
        mu2: rp.masses.mu2(),
        el2: rp.el2(),
        ang_mom: rp.ang_mom,
        floor,
        ceil,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn scan_cells<F: Fn(&PairState) -> f64 + Sync>(rp: &RegionParams, dl: &Axis, de: &Axis, f: F) -> Vec<f64> {
    let xs = dl.centers();
    let mut cells = vec![0.0; dl.n * de.n];
    cells
        .par_chunks_mut(dl.n)
        .enumerate()
        .for_each(|(j, row)| {
            let y = de.center(j);
            for (cell, &x) in row.iter_mut().zip(&xs) {
                *cell = f(&rp.pair(x, y, std::f64::consts::PI));
            }
        });
    cells
}

/// Classifies every cell center of the window.
pub fn region_scan(rp: &RegionParams, window: &ScanWindow, nx: usize, ny: usize) -> Result<RegionGrid> {
    let dl = Axis::new(window.dl.0, window.dl.1, nx)?;
    let de = Axis::new(window.de.0, window.de.1, ny)?;
    let cells = scan_cells(rp, &dl, &de, |p| classify_pair(p) as f64);
    Ok(RegionGrid {
        dl,
        de,
        cells,
        meta: meta(rp, ScanKind::Region, 0.0, code::MAX as f64),
    })
}

/// `dbar` at every cell center; `floor` and `ceil` only affect rendering.
pub fn dbar_scan(
    rp: &RegionParams,
    window: &ScanWindow,
    nx: usize,
    ny: usize,
    floor: f64,
    ceil: f64,
) -> Result<RegionGrid> {
    if !(floor < ceil) {
        return Err(Error::InvalidParameter(format!(
            "render range [{floor}, {ceil}] is empty"
        )));
    }
    let dl = Axis::new(window.dl.0, window.dl.1, nx)?;
    let de = Axis::new(window.de.0, window.de.1, ny)?;
    let cells = scan_cells(rp, &dl, &de, |p| dbar(p).map_or(f64::NAN, |d| d.value));
    Ok(RegionGrid {
        dl,
        de,
        cells,
        meta: meta(rp, ScanKind::Dbar, floor, ceil),
    })
}

/// Smallest `dbar` over the cell centers at the `dE` of a horizontal line.
pub fn dbar_min_on_line(rp: &RegionParams, de: f64, dl: &Axis) -> Option<(f64, f64)> {
    dl.centers()
        .into_iter()
        .filter_map(|x| {
            let v = dbar(&rp.pair(x, de, std::f64::consts::PI)).ok()?.value;
            v.is_finite().then_some((x, v))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Number of 4-connected components of the cells satisfying `pred`.
pub fn connected_components<P: Fn(f64) -> bool>(g: &RegionGrid, pred: P) -> usize {
    let (nx, ny) = (g.dl.n, g.de.n);
    let member: Vec<bool> = g.cells.iter().map(|&v| pred(v)).collect();
    let mut seen = vec![false; nx * ny];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..nx * ny {
        if !member[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % nx, k / nx);
            let mut visit = |n: usize| {
                if member[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - nx);
            }
            if j + 1 < ny {
                visit(k + nx);
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridFormat {
    Csv,
    Pgm,
}

/// `<kind>_mu<mu1>_EL2<value>`.
pub fn default_file_stem(kind: ScanKind, mu1: f64, el2: f64) -> String {
    format!("{}_mu{}_EL2{}", kind.as_str(), mu1, el2)
}

pub fn grid_to_csv(g: &RegionGrid) -> String {
    let m = &g.meta;
    let mut out = String::new();
    for (k, v) in [
        ("kind", m.kind.as_str().to_string()),
        ("mu1", format!("{:.16e}", m.mu1)),
        ("mu2", format!("{:.16e}", m.mu2)),
        ("el2", format!("{:.16e}", m.el2)),
        ("ang_mom", format!("{:.16e}", m.ang_mom)),
        ("floor", format!("{:.16e}", m.floor)),
        ("ceil", format!("{:.16e}", m.ceil)),
        ("version", m.version.clone()),
        ("nx", g.dl.n.to_string()),
        ("ny", g.de.n.to_string()),
        ("dl_min", format!("{:.16e}", g.dl.min)),
        ("dl_max", format!("{:.16e}", g.dl.max)),
        ("de_min", format!("{:.16e}", g.de.min)),
        ("de_max", format!("{:.16e}", g.de.max)),
    ] {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str("dl,de,value\n");
    for j in 0..g.de.n {
        let y = g.de.center(j);
        for i in 0..g.dl.n {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", g.dl.center(i), y, g.get(i, j));
        }
    }
    out
}

/// Gray level `round(255 * clamp((v - floor) / (ceil - floor), 0, 1))`,
/// with `NaN` mapped to 0.
pub fn gray_level(v: f64, floor: f64, ceil: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (255.0 * ((v - floor) / (ceil - floor)).clamp(0.0, 1.0)).round() as u8
}

/// Binary P5 image, first row at the largest `dE`.
pub fn grid_to_pgm(g: &RegionGrid) -> Vec<u8> {
    let m = &g.meta;
    let mut out = format!(
        "P5\n# kind={} mu1={} el2={} ang_mom={} version={}\n# dl=[{}, {}] de=[{}, {}]\n# gray=round(255*clamp((v-{})/({}-{}),0,1)), NaN=0, top row = max dE\n{} {}\n255\n",
        m.kind.as_str(),
        m.mu1,
        m.el2,
        m.ang_mom,
        m.version,
        g.dl.min,
        g.dl.max,
        g.de.min,
        g.de.max,
        m.floor,
        m.ceil,
        m.floor,
        g.dl.n,
        g.de.n
    )
    .into_bytes();
    for j in (0..g.de.n).rev() {
        for i in 0..g.dl.n {
            out.push(gray_level(g.get(i, j), m.floor, m.ceil));
        }
    }
    out
}

pub fn write_grid(g: &RegionGrid, format: GridFormat, path: &Path) -> Result<()> {
    let bytes = match format {
        GridFormat::Csv => grid_to_csv(g).into_bytes(),
        GridFormat::Pgm => grid_to_pgm(g),
    };
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Inverse of [`grid_to_csv`].
pub fn parse_grid_csv(text: &str) -> Result<RegionGrid> {
    let mut kv = std::collections::HashMap::new();
    let mut cells = Vec::new();
    let mut header_seen = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| parse_err(lineno, "metadata line without '='"))?;
            kv.insert(k.to_string(), v.to_string());
        } else if !header_seen {
            if line != "dl,de,value" {
                return Err(parse_err(lineno, format!("unexpected header {line:?}")));
            }
            header_seen = true;
        } else if !line.is_empty() {
            let v = line
                .rsplit(',')
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| parse_err(lineno, "bad value"))?;
            cells.push(v);
        }
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| parse_err(0, format!("missing {k}")));
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse::<f64>()
            .map_err(|e| parse_err(0, format!("{k}: {e}")))
    };
    let int = |k: &str| -> Result<usize> {
        get(k)?
            .parse::<usize>()
            .map_err(|e| parse_err(0, format!("{k}: {e}")))
    };
    let kind = ScanKind::parse(get("kind")?).ok_or_else(|| parse_err(0, "unknown kind"))?;
    let dl = Axis::new(num("dl_min")?, num("dl_max")?, int("nx")?)?;
    let de = Axis::new(num("de_min")?, num("de_max")?, int("ny")?)?;
    if cells.len() != dl.n * de.n {
        return Err(parse_err(0, format!("expected {} cells, found {}", dl.n * de.n, cells.len())));
    }
    Ok(RegionGrid {
        dl,
        de,
        cells,
        meta: GridMeta {
            kind,
            mu1: num("mu1")?,
            mu2: num("mu2")?,
            el2: num("el2")?,
            ang_mom: num("ang_mom")?,
            floor: num("floor")?,
            ceil: num("ceil")?,
            version: get("version")?.clone(),
        },
    })
}

pub fn read_grid_csv(path: &Path) -> Result<RegionGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_grid_csv(&text)
}

/// Region parameters recorded in a grid's metadata.
pub fn grid_params(g: &RegionGrid) -> Result<RegionParams> {
    RegionParams::from_el2(MassSplit::new(g.meta.mu1, g.meta.mu2)?, g.meta.el2, g.meta.ang_mom)
}
