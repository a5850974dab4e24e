//! One-dimensional minimization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub f: f64,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `xtol` or after `max_iter`
/// iterations. The best evaluated point is returned, so the result is never
/// worse than the bracket's interior probes.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Minimum {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= xtol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        Minimum { x: c, f: fc }
    } else {
        Minimum { x: d, f: fd }
    }
}

/// Global minimum of `f` on `[lo, hi]`: sample a uniform grid of `grid`
/// points, then refine every interior local minimum of the samples with a
/// golden-section search over its two neighbouring cells.
///
/// Non-finite samples are treated as `+inf`.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    grid: usize,
    xtol: f64,
) -> Option<Minimum> {
    let n = grid.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    let fs: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut best: Option<Minimum> = None;
    let mut consider = |m: Minimum| {
        if m.f.is_finite() && best.is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
    };
    for i in 0..n {
        let left = if i == 0 { f64::INFINITY } else { fs[i - 1] };
        let right = if i + 1 == n { f64::INFINITY } else { fs[i + 1] };
        if fs[i] <= left && fs[i] <= right && fs[i].is_finite() {
            consider(Minimum { x: xs[i], f: fs[i] });
            let a = xs[i.saturating_sub(1)];
            let b = xs[(i + 1).min(n - 1)];
            let m = golden_section(
                |x| {
                    let v = f(x);
                    if v.is_finite() {
                        v
                    } else {
                        f64::INFINITY
                    }
                },
                a,
                b,
                xtol,
                200,
            );
            consider(m);
        }
    }
    best
}
