//! Renormalisation structure of `x² + a`: superattracting parameters, the
//! band-merging cascade, its accumulation point and renormalisation windows.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kneading::{
    band_merging_target, chebyshev, feigenbaum, inflate, itinerary_compare, quad_symbols, star, unstar, Itinerary,
    KneadOrder, Symbol,
};
use crate::maps::{check_quadratic, QUAD_MAX, QUAD_MIN};
use crate::numeric::{aitken, scan_roots};
use crate::precision::{with_real, PrecisionContext, Real};

pub const MAX_WINDOW_PERIOD: usize = 24;
pub const MIN_CASCADE_DEPTH: usize = 2;
pub const MAX_CASCADE_DEPTH: usize = 10;
/// Symbols compared per unit of renormalisation period in the cascade.
const CASCADE_SYMBOLS: usize = 64;

fn xi(a: f64, j: usize) -> f64 {
    let mut x = a;
    for _ in 0..j {
        x = x * x + a;
    }
    x
}

/// `(ξ_j(a), ξ'_j(a))`.
fn xi_with_derivative(a: f64, j: usize) -> (f64, f64) {
    let (mut x, mut dx) = (a, 1.0);
    for _ in 0..j {
        dx = 1.0 + 2.0 * x * dx;
        x = x * x + a;
    }
    (x, dx)
}

fn newton_center(mut a: f64, period: usize) -> f64 {
    for _ in 0..8 {
        let (x, dx) = xi_with_derivative(a, period - 1);
        if dx == 0.0 || x == 0.0 {
            break;
        }
        let next = a - x / dx;
        if !next.is_finite() || (next - a).abs() > 1e-6 {
            break;
        }
        a = next;
    }
    a
}

/// Parameters in `[lo, hi]` whose critical point is periodic with exact period `period`.
pub fn superattracting_parameters(period: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if period == 0 || period > MAX_WINDOW_PERIOD {
        return Err(Error::invalid(format!("period must lie in 1..={MAX_WINDOW_PERIOD}")));
    }
    if !(lo < hi) {
        return Err(Error::invalid("need lo < hi"));
    }
    check_quadratic(lo)?;
    check_quadratic(hi)?;
    let shift = (2 * period + 2).min(22) as u32;
    let cells = ((1usize << shift) as f64 * (hi - lo) / (QUAD_MAX - QUAD_MIN)).ceil() as usize;
    let cells = cells.clamp(1 << 14, 1 << 22);
    let mut out = Vec::new();
    for root in scan_roots(|a| xi(a, period - 1), lo, hi, cells, 1e-14) {
        let a = newton_center(root, period).clamp(lo, hi);
        let earlier = (0..period - 1).any(|j| xi(a, j).abs() <= 1e-9);
        if !earlier && xi(a, period - 1).abs() <= 1e-9 {
            out.push(a);
        }
    }
    out.dedup_by(|x, y| (*x - *y).abs() <= 1e-13);
    Ok(out)
}

/// Parameter interval on which the kneading sequence matches a target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolicRoot {
    pub value: f64,
    pub value_lo: f64,
    pub half_width: f64,
    /// The bisection met a parameter whose itinerary agrees with the target
    /// over the whole compared depth.
    pub tie: bool,
}

fn symbolic_root_with<R: Real>(target: &Itinerary, lo: f64, hi: f64, ctx: &PrecisionContext) -> SymbolicRoot {
    let bits = ctx.bits();
    let n = target.len();
    let order = |a: &R| itinerary_compare(&quad_symbols(a, n, ctx.guard()), target);
    let mut l = R::from_f64(lo, bits);
    let mut h = R::from_f64(hi, bits);
    let mut tie = None;
    for _ in 0..ctx.iters() {
        let m = l.midpoint(&h);
        if !l.lt(&m) || !m.lt(&h) {
            break;
        }
        // a larger itinerary means more entropy, which lies to the left
        match order(&m) {
            KneadOrder::Greater => l = m,
            KneadOrder::Less => h = m,
            KneadOrder::Equal | KneadOrder::Incomparable => {
                tie = Some(m);
                break;
            }
        }
    }
    let was_tie = tie.is_some();
    if let Some(t) = tie {
        let (mut l0, mut l1) = (l, t.clone());
        for _ in 0..ctx.iters() {
            let c = l0.midpoint(&l1);
            if !l0.lt(&c) || !c.lt(&l1) {
                break;
            }
            if order(&c) == KneadOrder::Greater {
                l0 = c;
            } else {
                l1 = c;
            }
        }
        let (mut r0, mut r1) = (t, h);
        for _ in 0..ctx.iters() {
            let c = r0.midpoint(&r1);
            if !r0.lt(&c) || !c.lt(&r1) {
                break;
            }
            if order(&c) == KneadOrder::Less {
                r1 = c;
            } else {
                r0 = c;
            }
        }
        l = l0;
        h = r1;
    }
    let (value, value_lo) = l.midpoint(&h).to_pair();
    SymbolicRoot {
        value,
        value_lo,
        half_width: h.sub(&l).to_f64().abs() * 0.5,
        tie: was_tie,
    }
}

/// Bisect `[lo, hi]` for the parameter whose kneading sequence is `target`.
pub fn symbolic_root(target: &Itinerary, lo: f64, hi: f64, ctx: &PrecisionContext) -> Result<SymbolicRoot> {
    check_quadratic(lo)?;
    check_quadratic(hi)?;
    if !(lo < hi) {
        return Err(Error::invalid("need lo < hi"));
    }
    Ok(with_real!(ctx, R => symbolic_root_with::<R>(target, lo, hi, ctx)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeTable {
    /// `a_m` with `h(a_m) = 2^{−m} log 2`, high words.
    pub a_m: Vec<f64>,
    pub a_m_lo: Vec<f64>,
    /// Half-width of the parameter interval each `a_m` was resolved to.
    pub a_m_err: Vec<f64>,
    /// `(a_m − a_{m−1}) / (a_{m+1} − a_m)` for `m = 1, …`.
    pub ratios: Vec<f64>,
    pub delta_star: f64,
    pub a_f: f64,
    pub a_f_uncertainty: f64,
    pub bits: usize,
    pub warnings: Vec<String>,
}

impl CascadeTable {
    /// `a_m − a_{m−1}` using both words.
    pub fn step(&self, m: usize) -> f64 {
        (self.a_m[m] - self.a_m[m - 1]) + (self.a_m_lo[m] - self.a_m_lo[m - 1])
    }

    pub fn rows(&self) -> usize {
        self.a_m.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accumulation {
    pub value: f64,
    pub uncertainty: f64,
    pub delta_star: f64,
}

fn ratio_limit(ratios: &[f64]) -> f64 {
    if ratios.len() >= 3 {
        aitken(ratios).unwrap_or(ratios[ratios.len() - 1])
    } else {
        ratios[ratios.len() - 1]
    }
}

/// Geometric extrapolation of the cascade to its accumulation point.
///
/// The uncertainty is the drift between extrapolating with the accelerated
/// ratio and with the last raw ratio; a table with a single ratio reports
/// the whole extrapolation step.
pub fn feigenbaum_a_f(table: &CascadeTable) -> Result<Accumulation> {
    let rows = table.rows();
    if rows < 3 {
        return Err(Error::invalid("accumulation needs a table with at least three rows"));
    }
    let ratios: Vec<f64> = (1..rows - 1).map(|m| table.step(m) / table.step(m + 1)).collect();
    let delta = ratio_limit(&ratios);
    let last = rows - 1;
    let step = table.step(last);
    let base = table.a_m[last] + table.a_m_lo[last];
    let value = base + step / (delta - 1.0);
    let raw = ratios[ratios.len() - 1];
    let uncertainty = if ratios.len() < 2 {
        (step / (delta - 1.0)).abs()
    } else {
        (step / (delta - 1.0) - step / (raw - 1.0)).abs()
    } + table.a_m_err[last];
    Ok(Accumulation {
        value,
        uncertainty,
        delta_star: delta,
    })
}

/// Band-merging parameters `a_0, …, a_M` by symbolic bisection against the
/// inflated Chebyshev sequences, in extended precision that grows with `m`.
pub fn band_merging_cascade(depth: usize, ctx: &PrecisionContext) -> Result<CascadeTable> {
    if !(MIN_CASCADE_DEPTH..=MAX_CASCADE_DEPTH).contains(&depth) {
        return Err(Error::invalid(format!(
            "cascade depth must lie in {MIN_CASCADE_DEPTH}..={MAX_CASCADE_DEPTH}"
        )));
    }
    let mut table = CascadeTable {
        a_m: vec![QUAD_MIN],
        a_m_lo: vec![0.0],
        a_m_err: vec![0.0],
        ratios: Vec::new(),
        delta_star: f64::NAN,
        a_f: f64::NAN,
        a_f_uncertainty: f64::INFINITY,
        bits: 0,
        warnings: Vec::new(),
    };
    // every a_m lies left of the period-doubling region around −1.4
    let right = -1.40;
    for m in 1..=depth {
        let bits = ctx.bits().max(160 + 16 * m);
        table.bits = table.bits.max(bits);
        let level = PrecisionContext::extended(bits)?.with_iters(ctx.iters().max(bits + 16));
        let target = band_merging_target(m as u32, CASCADE_SYMBOLS << m);
        let left = table.a_m[m - 1];
        let root = symbolic_root(&target, left, right, &level)?;
        let prev_step = if m >= 2 { table.step(m - 1).abs() } else { 1.0 };
        if root.half_width > 1e-3 * prev_step || root.value <= left {
            table.warnings.push(format!(
                "a_{m} resolved only to ±{:.3e}; table truncated at m = {}",
                root.half_width,
                m - 1
            ));
            break;
        }
        table.a_m.push(root.value);
        table.a_m_lo.push(root.value_lo);
        table.a_m_err.push(root.half_width);
    }
    let rows = table.rows();
    table.ratios = (1..rows.saturating_sub(1))
        .map(|m| table.step(m) / table.step(m + 1))
        .collect();
    if rows >= 3 {
        let acc = feigenbaum_a_f(&table)?;
        table.delta_star = acc.delta_star;
        table.a_f = acc.value;
        table.a_f_uncertainty = acc.uncertainty;
    } else {
        table.warnings.push("too few rows to extrapolate".into());
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperstableCascade {
    /// Superattracting parameters of period `2^m`.
    pub s_m: Vec<f64>,
    pub ratios: Vec<f64>,
    pub delta_star: f64,
}

/// Superattracting period-doubling parameters, a cross-check on the
/// band-merging ratios converging to the same constant.
pub fn superstable_cascade(depth: usize) -> Result<SuperstableCascade> {
    if !(MIN_CASCADE_DEPTH..=MAX_CASCADE_DEPTH).contains(&depth) {
        return Err(Error::invalid(format!(
            "cascade depth must lie in {MIN_CASCADE_DEPTH}..={MAX_CASCADE_DEPTH}"
        )));
    }
    let ctx = PrecisionContext::native();
    let mut s_m = vec![0.0];
    let mut target = Itinerary::from_symbols(vec![Symbol::C])?;
    for m in 1..=depth {
        target = inflate(&target);
        let root = symbolic_root(&target, QUAD_MIN, s_m[m - 1], &ctx)?;
        s_m.push(newton_center(root.value, 1 << m));
    }
    let ratios: Vec<f64> = (1..s_m.len() - 1)
        .map(|m| (s_m[m] - s_m[m - 1]) / (s_m[m + 1] - s_m[m]))
        .collect();
    let delta_star = ratio_limit(&ratios);
    Ok(SuperstableCascade {
        s_m,
        ratios,
        delta_star,
    })
}

/// Accumulation of period doubling, from the kneading sequence fixed by
/// inflation.
pub fn period_doubling_limit() -> f64 {
    static LIMIT: OnceLock<f64> = OnceLock::new();
    *LIMIT.get_or_init(|| {
        let ctx = PrecisionContext::native();
        let target = feigenbaum(1 << 18);
        symbolic_root(&target, QUAD_MIN, -1.0, &ctx)
            .expect("bracket inside the parameter range")
            .value
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormWindow {
    pub period: usize,
    pub left: f64,
    pub right: f64,
    pub center: f64,
    /// Number of period doublings separating the window from a primitive one.
    pub feig_depth: usize,
}

impl RenormWindow {
    pub fn contains(&self, a: f64) -> bool {
        a >= self.left && a <= self.right
    }

    /// Windows reached from the main cascade by period doubling, where the
    /// entropy is not constant.
    pub fn is_feigenbaum(&self) -> bool {
        self.period == 1 << self.feig_depth
    }
}

/// Solve `f^q(x) = x`, `(f^q)'(x) = τ` for `(x, a)`, continuing `τ` from 0
/// at the center `(0, center)` to `tau_end`.
fn multiplier_continuation(center: f64, q: usize, tau_end: f64) -> Option<f64> {
    let (mut x, mut a) = (0.0f64, center);
    let steps = 64;
    for k in 1..=steps {
        let tau = tau_end * k as f64 / steps as f64;
        let mut converged = false;
        for _ in 0..40 {
            // y: orbit point, d: (f^i)'(x), e: ∂y/∂a, dd_x, dd_a: derivatives of d
            let (mut y, mut d, mut e, mut ddx, mut dda) = (x, 1.0, 0.0, 0.0, 0.0);
            for _ in 0..q {
                let (ny, nd) = (y * y + a, 2.0 * y * d);
                ddx = 2.0 * d * d + 2.0 * y * ddx;
                dda = 2.0 * e * d + 2.0 * y * dda;
                e = 2.0 * y * e + 1.0;
                y = ny;
                d = nd;
            }
            let g1 = y - x;
            let g2 = d - tau;
            let (j11, j12, j21, j22) = (d - 1.0, e, ddx, dda);
            let det = j11 * j22 - j12 * j21;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let dx = (g1 * j22 - g2 * j12) / det;
            let da = (j11 * g2 - j21 * g1) / det;
            x -= dx;
            a -= da;
            if dx.abs() <= 1e-15 * (1.0 + x.abs()) && da.abs() <= 1e-15 * (1.0 + a.abs()) {
                converged = true;
                break;
            }
        }
        if !converged && k == steps {
            return None;
        }
    }
    a.is_finite().then_some(a)
}

/// Block of a period-doubled window: `A = B x B` with `Θ(B)·x = −1`.
fn doubled_half(block: &[Symbol]) -> Option<Vec<Symbol>> {
    let p = block.len() + 1;
    if p % 2 != 0 {
        return None;
    }
    let q = p / 2;
    let half = &block[..q - 1];
    let theta: i8 = half.iter().map(|s| s.sign()).product();
    (block[q..] == *half && theta * block[q - 1].sign() == -1).then(|| half.to_vec())
}

fn window_for_block(block: &[Symbol], ctx: &PrecisionContext) -> Option<RenormWindow> {
    let p = block.len() + 1;
    let mut center_seq = block.to_vec();
    center_seq.push(Symbol::C);
    let target = Itinerary::from_symbols(center_seq).ok()?;
    let center = newton_center(symbolic_root(&target, QUAD_MIN, QUAD_MAX, ctx).ok()?.value, p);
    let k = quad_symbols(&center, p + 1, 1e-9);
    if k.symbols[..] != *target.symbols {
        return None;
    }
    let mut feig_depth = 0;
    let mut b = block.to_vec();
    while let Some(h) = doubled_half(&b) {
        feig_depth += 1;
        b = h;
    }
    let right = match doubled_half(block) {
        Some(half) => {
            let q = p / 2;
            let half_center = if q == 1 {
                0.0
            } else {
                let mut seq = half.clone();
                seq.push(Symbol::C);
                let t = Itinerary::from_symbols(seq).ok()?;
                newton_center(symbolic_root(&t, QUAD_MIN, QUAD_MAX, ctx).ok()?.value, q)
            };
            multiplier_continuation(half_center, q, -1.0)?
        }
        None => multiplier_continuation(center, p, 1.0)?,
    };
    let exit = star(block, &chebyshev(ctx.depth().max(4 * p)));
    let left = symbolic_root(&exit, QUAD_MIN, center, ctx).ok()?.value;
    (left < center && center <= right).then_some(RenormWindow {
        period: p,
        left,
        right,
        center,
        feig_depth,
    })
}

/// The renormalisation window of smallest period containing `a`.
///
/// Period 1 stands for the zero-entropy region to the right of the
/// period-doubling accumulation point.
pub fn detect_window(a: f64, max_period: usize) -> Result<Option<RenormWindow>> {
    check_quadratic(a)?;
    if max_period == 0 || max_period > MAX_WINDOW_PERIOD {
        return Err(Error::invalid(format!(
            "max period must lie in 1..={MAX_WINDOW_PERIOD}"
        )));
    }
    let a_f = period_doubling_limit();
    if a > a_f {
        return Ok(Some(RenormWindow {
            period: 1,
            left: a_f,
            right: QUAD_MAX,
            center: 0.0,
            feig_depth: 0,
        }));
    }
    let ctx = PrecisionContext::native().with_depth(64.max(4 * max_period));
    let k = quad_symbols(&a, ctx.depth(), ctx.guard());
    for p in 2..=max_period {
        // a terminated itinerary is exact, however short
        if (!k.terminated && k.reliable_len() < 3 * p) || k.len() < p {
            break;
        }
        let block = &k.symbols[..p - 1];
        let own_center = k.terminated && k.len() == p;
        if block.contains(&Symbol::C) || (!own_center && unstar(&k, block).is_none()) {
            continue;
        }
        if let Some(w) = window_for_block(block, &ctx) {
            if w.contains(a) {
                return Ok(Some(w));
            }
        }
    }
    Ok(None)
}
