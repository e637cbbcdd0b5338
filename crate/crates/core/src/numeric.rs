//! Small numerical utilities shared across modules.

use serde::{Deserialize, Serialize};

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit; `None` with fewer than two distinct abscissae.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = (0..n)
        .map(|i| {
            let r = ys[i] - intercept - slope * xs[i];
            r * r
        })
        .sum();
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Some(LineFit {
        slope,
        intercept,
        stderr,
        residual: (sse / nf).sqrt(),
        points: n,
    })
}

/// Aitken Δ² extrapolation from the last three terms of a sequence.
/// Falls back to the last term when the second difference vanishes.
pub fn aitken(seq: &[f64]) -> Option<f64> {
    let n = seq.len();
    match n {
        0 => None,
        1 | 2 => Some(seq[n - 1]),
        _ => {
            let (x0, x1, x2) = (seq[n - 3], seq[n - 2], seq[n - 1]);
            let den = x2 - 2.0 * x1 + x0;
            if den.abs() <= f64::EPSILON * x2.abs() {
                Some(x2)
            } else {
                Some(x2 - (x2 - x1) * (x2 - x1) / den)
            }
        }
    }
}

/// Error-free sum: returns `(s, e)` with `s + e == a + b` exactly.
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Bisection on a sign change of `f` over `[lo, hi]` down to width `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All sign changes of `f` on a uniform grid of `cells` cells over
/// `[lo, hi]`, each refined by bisection to `tol`. Exact grid zeros are
/// reported as roots.
pub fn scan_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cells: usize, tol: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = (hi - lo) / cells as f64;
    let mut x0 = lo;
    let mut f0 = f(lo);
    if f0 == 0.0 {
        roots.push(lo);
    }
    for i in 1..=cells {
        let x1 = if i == cells { hi } else { lo + step * i as f64 };
        let f1 = f(x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            roots.push(bisect(&f, x0, x1, tol));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-13);
        assert!(f.residual < 1e-13 && f.stderr < 1e-13);
    }

    #[test]
    fn fit_rejects_degenerate_abscissae() {
        assert!(fit_line(&[1.0, 1.0], &[0.0, 2.0]).is_none());
        assert!(fit_line(&[1.0], &[0.0]).is_none());
    }

    #[test]
    fn aitken_accelerates_geometric_tail() {
        let seq: Vec<f64> = (0..6).map(|k| 4.0 + 0.3f64.powi(k)).collect();
        let lim = aitken(&seq).unwrap();
        assert!((lim - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_sum_is_exact() {
        let (s, e) = two_sum(1.0, 1e-17);
        assert_eq!(s, 1.0);
        assert_eq!(e, 1e-17);
    }

    #[test]
    fn scan_finds_polynomial_roots() {
        let r = scan_roots(|x| (x - 0.3) * (x + 0.7) * (x - 0.9), -1.0, 1.0, 1000, 1e-14);
        assert_eq!(r.len(), 3);
        assert!((r[0] + 0.7).abs() < 1e-13);
        assert!((r[1] - 0.3).abs() < 1e-13);
        assert!((r[2] - 0.9).abs() < 1e-13);
    }
}
