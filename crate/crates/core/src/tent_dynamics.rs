//! Parameter dynamics of the tent family: `φ_n(b) = T_b^n(1)` with its slope
//! derivative, periodic slopes, safe preimages, and the return bound check.

use serde::{Deserialize, Serialize};

use crate::critical_orbit::attracting_cycle;
use crate::error::{Error, Result};
use crate::maps::{beta, check_tent, Family, FamilyParam};
use crate::numeric::scan_roots;

/// Guard used for zero hits of `φ_j`.
pub const PHI_GUARD: f64 = 1e-13;
/// Largest period accepted by the periodic-slope search.
pub const MAX_TENT_PERIOD: usize = 20;
/// Largest preimage depth for [`safe_elements`].
pub const MAX_SAFE_DEPTH: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiTrace {
    pub b: f64,
    /// `φ_0, …, φ_n`.
    pub phi: Vec<f64>,
    /// `φ'_0, …`; stops one past the first zero hit.
    pub phi_prime: Vec<f64>,
    /// First `j ≥ 1` with `|φ_j| ≤ guard`.
    pub zero_hit: Option<usize>,
}

pub fn phi_with_derivative(b: f64, n: usize) -> Result<PhiTrace> {
    check_tent(b)?;
    let mut phi: Vec<f64> = Vec::with_capacity(n + 1);
    let mut dphi = Vec::with_capacity(n + 1);
    phi.push(1.0);
    dphi.push(0.0);
    let mut zero_hit = None;
    for i in 1..=n {
        let prev = phi[i - 1];
        phi.push(1.0 - b * prev.abs());
        if zero_hit.is_none() {
            let dprev = dphi[i - 1];
            dphi.push(-prev.signum() * (prev + b * dprev));
            if phi[i].abs() <= PHI_GUARD {
                zero_hit = Some(i);
            }
        }
    }
    Ok(PhiTrace {
        b,
        phi,
        phi_prime: dphi,
        zero_hit,
    })
}

/// `max_{5≤j≤n} max(|φ'_j|/b^j, b^j/|φ'_j|)`.
pub fn growth_check(b: f64, n: usize) -> Result<f64> {
    if n < 5 {
        return Err(Error::invalid("growth check needs n >= 5"));
    }
    let tr = phi_with_derivative(b, n)?;
    if let Some(j) = tr.zero_hit {
        if j < n {
            return Err(Error::ZeroHit(j));
        }
    }
    let mut c: f64 = 1.0;
    for j in 5..=n {
        let r = tr.phi_prime[j].abs() / b.powi(j as i32);
        c = c.max(r).max(1.0 / r);
    }
    Ok(c)
}

/// Whether `(b+1)/2 < |φ'_i/φ'_{i−1}| < 2b − 1` wherever `|φ'_{i−1}| ≥ 10³`.
pub fn ratio_bound_holds(tr: &PhiTrace) -> bool {
    let b = tr.b;
    tr.phi_prime.windows(2).all(|w| {
        if w[0].abs() < 1e3 {
            return true;
        }
        let r = (w[1] / w[0]).abs();
        r > 1.0 + (b - 1.0) / 2.0 && r < 1.0 + 2.0 * (b - 1.0)
    })
}

fn phi_at(b: f64, j: usize) -> f64 {
    let mut x = 1.0f64;
    for _ in 0..j {
        x = 1.0 - b * x.abs();
    }
    x
}

/// Slopes in `[lo, hi]` whose turning point is periodic with exact period `p`.
pub fn periodic_tent_slopes(p: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if p < 3 {
        return Err(Error::invalid("the period of a periodic tent slope is at least 3"));
    }
    if p > MAX_TENT_PERIOD {
        return Err(Error::Budget(format!("period limited to {MAX_TENT_PERIOD}")));
    }
    if !(lo < hi) || lo <= 1.0 || hi > 2.0 {
        return Err(Error::invalid("need 1 < lo < hi <= 2"));
    }
    // roots are spaced roughly b^{-p}; refine the grid beyond 2^14 cells when needed
    let cells = (1usize << 14).max(((hi - lo) * 4.0 * hi.powi(p as i32)).ceil() as usize);
    let raw = scan_roots(|b| phi_at(b, p - 1), lo, hi, cells, 1e-14);
    let mut out = Vec::new();
    for mut b in raw {
        // Newton polish so that |φ_{p−1}| sits well inside the zero guard
        for _ in 0..3 {
            let tr = phi_with_derivative(b, p - 1)?;
            let d = tr.phi_prime[tr.phi_prime.len() - 1];
            if tr.zero_hit.is_some_and(|j| j < p - 1) || d == 0.0 {
                break;
            }
            let step = tr.phi[p - 1] / d;
            if !(b - step > lo && b - step <= hi) {
                break;
            }
            b -= step;
        }
        let tr = phi_with_derivative(b, p - 1)?;
        let earlier = (1..p - 1).any(|j| tr.phi[j].abs() <= 1e-10);
        // a touching zero (as at b → 1, where φ has a double root) is not a crossing
        let d = 1e-11 * b;
        let crosses = phi_at(b - d, p - 1) * phi_at(b + d, p - 1) < 0.0;
        if earlier || !crosses {
            continue;
        }
        if b.powi(p as i32) < 2.0 * 2f64.sqrt() {
            return Err(Error::NotResolved(format!(
                "slope {b} of period {p} violates b^p >= 2√2"
            )));
        }
        out.push(b);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafeSet {
    pub b: f64,
    pub depth: usize,
    pub elements: Vec<f64>,
}

/// Preimages of the turning point up to depth `n` that avoid its forward orbit.
pub fn safe_elements(b: f64, n: usize) -> Result<SafeSet> {
    check_tent(b)?;
    if n > MAX_SAFE_DEPTH {
        return Err(Error::Budget(format!("safe set depth limited to {MAX_SAFE_DEPTH}")));
    }
    let guard = PHI_GUARD;
    let mut orbit = Vec::with_capacity(4 * n + 1);
    let mut x = 0.0f64;
    for _ in 0..=4 * n {
        orbit.push(x);
        x = 1.0 - b * x.abs();
    }
    let mut all = Vec::new();
    let mut level = vec![0.0f64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &y in &level {
            if y > 1.0 {
                continue;
            }
            let r = (1.0 - y) / b;
            if r == 0.0 {
                next.push(0.0);
            } else {
                next.push(r);
                next.push(-r);
            }
        }
        all.extend_from_slice(&next);
        level = next;
    }
    all.retain(|x| orbit.iter().all(|o| (x - o).abs() > 10.0 * guard));
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    Ok(SafeSet {
        b,
        depth: n,
        elements: all,
    })
}

/// The periodic slope of smallest period strictly inside `(b1, b2)`.
pub fn periodic_slope_in_gap(b1: f64, b2: f64, max_period: usize) -> Result<Option<(f64, usize)>> {
    if !(b1 < b2) {
        return Err(Error::invalid("need b1 < b2"));
    }
    check_tent(b1)?;
    check_tent(b2)?;
    for p in 3..=max_period.min(MAX_TENT_PERIOD) {
        let inside: Vec<f64> = periodic_tent_slopes(p, b1, b2)?
            .into_iter()
            .filter(|&b| b > b1 && b < b2)
            .collect();
        if let Some(&b) = inside.first() {
            return Ok(Some((b, p)));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrzytyckiReport {
    /// `|g^{n+1}(0)|`.
    pub lhs: f64,
    /// `2⁻²·C⁻¹·γ⁻ⁿ`.
    pub rhs: f64,
    pub pass: bool,
    /// Constant with `|g'(x)| ≤ C|x|`.
    pub c: f64,
    /// `max |g'|` on the invariant interval.
    pub gamma: f64,
}

/// Lower bound on the return of the turning point after `n + 1` steps.
///
/// Quadratic maps must have no attracting cycle of period `≤ n + 1`; tent
/// maps pass with a zero right-hand side.
pub fn przytycki_check(param: FamilyParam, n: usize) -> Result<PrzytyckiReport> {
    let v = param.value();
    let mut x = 0.0f64;
    for _ in 0..=n {
        x = crate::maps::eval(param, x);
    }
    let lhs = x.abs();
    match param.family() {
        Family::Tent => Ok(PrzytyckiReport {
            lhs,
            rhs: 0.0,
            pass: lhs >= 0.0,
            c: f64::INFINITY,
            gamma: v,
        }),
        Family::Quadratic => {
            if let Some(p) = attracting_cycle(v, n + 1) {
                return Err(Error::NotApplicable(format!(
                    "critical orbit attracted to a cycle of period {p}"
                )));
            }
            let c = 2.0;
            let gamma = 2.0 * beta(v);
            let rhs = 0.25 / c * gamma.powi(-(n as i32));
            Ok(PrzytyckiReport {
                lhs,
                rhs,
                pass: lhs > rhs,
                c,
                gamma,
            })
        }
    }
}
