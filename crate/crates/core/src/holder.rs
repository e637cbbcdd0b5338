//! Local regularity of `a ↦ h(a)`: Hölder exponents from entropy
//! differences, flatness at parabolic parameters, the exponent at the
//! period-doubling accumulation point and a uniform Hölder envelope.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::critical_orbit::{lyapunov_estimate, LAMBDA_GAP_TOL};
use crate::entropy::{quad_entropy_ctx, EntropyResult};
use crate::error::{Error, Result};
use crate::maps::{check_quadratic, ParamValue, QUAD_MAX, QUAD_MIN};
use crate::numeric::fit_line;
use crate::parallel::par_map;
use crate::precision::PrecisionContext;
use crate::renorm::CascadeTable;

/// Differences below this multiple of the entropy error are discarded.
pub const RELIABILITY_FACTOR: f64 = 10.0;
/// Smallest number of retained points for a trustworthy slope.
pub const MIN_POINTS: usize = 5;
/// Smallest Lyapunov exponent accepted by [`theoretical_exponent`].
pub const MIN_LAMBDA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Both,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "L",
            Side::Right => "R",
            Side::Both => "both",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l" | "left" => Ok(Side::Left),
            "r" | "right" => Ok(Side::Right),
            "both" | "b" => Ok(Side::Both),
            _ => Err(Error::invalid(format!("unknown side {s:?}; expected L, R or both"))),
        }
    }
}

/// `h / λ`.
pub fn exponent_from(h: f64, lambda: f64) -> f64 {
    h / lambda
}

/// `h(a)/λ(a)` with `λ` estimated from `n` steps of the critical orbit.
pub fn theoretical_exponent(a: impl Into<ParamValue>, n: usize, ctx: &PrecisionContext) -> Result<f64> {
    let a = a.into();
    let lambda = lyapunov_estimate(a, n, ctx)?;
    if !lambda.converged {
        return Err(Error::NotResolved(format!(
            "λ(a) not resolved: λ_n varies by {:.3e} over the tail (tolerance {LAMBDA_GAP_TOL})",
            lambda.gap
        )));
    }
    if lambda.last <= MIN_LAMBDA {
        return Err(Error::NotApplicable(format!(
            "λ(a) = {:.4} is not bounded away from zero",
            lambda.last
        )));
    }
    let h = quad_entropy_ctx(a, ctx)?;
    Ok(exponent_from(h.value, lambda.last))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderSample {
    pub t: f64,
    /// `h(a ± t) − h(a)`.
    pub dh: f64,
    pub err: f64,
    pub used: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub a: f64,
    pub side: Side,
    /// Regression exponent; absent when no difference was resolved.
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    pub t_range: Option<(f64, f64)>,
    pub points_used: usize,
    pub theoretical: Option<f64>,
    pub reliable: bool,
    /// Every difference sat below the error threshold.
    pub flat: bool,
    /// Retained differences all carry the sign monotonicity dictates.
    pub monotone: bool,
    pub samples: Vec<HolderSample>,
    pub warnings: Vec<String>,
}

/// Mark the samples whose difference clears the error threshold.
pub fn select_reliable(samples: &mut [HolderSample]) -> usize {
    let mut used = 0;
    for s in samples.iter_mut() {
        s.used = s.dh.is_finite() && s.dh.abs() > RELIABILITY_FACTOR * s.err;
        used += usize::from(s.used);
    }
    used
}

fn one_side(
    a: ParamValue,
    h0: &EntropyResult,
    sign: f64,
    ts: &[f64],
    ctx: &PrecisionContext,
    threads: usize,
    warnings: &mut Vec<String>,
) -> Result<Vec<HolderSample>> {
    let evals = par_map(ts.len(), threads, |i| {
        let p = a.offset(sign * ts[i]);
        let x = p.approx();
        if x < QUAD_MIN || x > QUAD_MAX {
            return Ok(None);
        }
        quad_entropy_ctx(p, ctx).map(Some)
    });
    let mut out = Vec::with_capacity(ts.len());
    for (t, e) in ts.iter().zip(evals) {
        match e? {
            Some(h) => out.push(HolderSample {
                t: *t,
                dh: h.diff(h0),
                err: h.error_radius.max(h0.error_radius),
                used: false,
            }),
            None => warnings.push(format!("t = {t:.3e} leaves the parameter range and was clipped")),
        }
    }
    Ok(out)
}

fn summarise(a: f64, side: Side, mut samples: Vec<HolderSample>, warnings: Vec<String>) -> HolderEstimate {
    let used = select_reliable(&mut samples);
    let kept: Vec<&HolderSample> = samples.iter().filter(|s| s.used).collect();
    let xs: Vec<f64> = kept.iter().map(|s| s.t.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|s| s.dh.abs().ln()).collect();
    let fit = fit_line(&xs, &ys);
    let t_range = (!kept.is_empty()).then(|| {
        let lo = kept.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
        let hi = kept.iter().map(|s| s.t).fold(0.0, f64::max);
        (lo, hi)
    });
    // h is non-increasing: left differences are ≥ 0, right differences ≤ 0
    let monotone = kept.iter().all(|s| s.dh * side_sign(side, s) <= 0.0);
    HolderEstimate {
        a,
        side,
        slope: fit.map(|f| f.slope),
        stderr: fit.map(|f| f.stderr),
        t_range,
        points_used: used,
        theoretical: None,
        reliable: used >= MIN_POINTS,
        flat: used == 0,
        monotone,
        samples,
        warnings,
    }
}

fn side_sign(side: Side, s: &HolderSample) -> f64 {
    match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
        // pooled samples carry the side in the sign of t
        Side::Both => s.t.signum(),
    }
}

fn geometric_grid(t0: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t0 * ratio.powi(k as i32)).collect()
}

fn check_grid(t0: f64, ratio: f64, count: usize) -> Result<()> {
    if !(t0 > 0.0 && t0 <= 1e-2) {
        return Err(Error::invalid("t0 must lie in (0, 1e-2]"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("ratio must lie in (0, 1)"));
    }
    if count < 8 {
        return Err(Error::invalid("count must be at least 8"));
    }
    Ok(())
}

/// Regress `log|h(a ± t) − h(a)|` on `log t` over `t = t0·ratio^k`.
///
/// With [`Side::Both`] the two sides are pooled; see
/// [`estimate_two_sided`] for separate reports.
pub fn estimate_local_exponent(
    a: impl Into<ParamValue>,
    side: Side,
    t0: f64,
    ratio: f64,
    count: usize,
    ctx: &PrecisionContext,
    threads: usize,
) -> Result<HolderEstimate> {
    let a = a.into().validate()?;
    check_grid(t0, ratio, count)?;
    let ts = geometric_grid(t0, ratio, count);
    let h0 = quad_entropy_ctx(a, ctx)?;
    let mut warnings = Vec::new();
    let samples = match side {
        Side::Left => one_side(a, &h0, -1.0, &ts, ctx, threads, &mut warnings)?,
        Side::Right => one_side(a, &h0, 1.0, &ts, ctx, threads, &mut warnings)?,
        Side::Both => {
            let mut l = one_side(a, &h0, -1.0, &ts, ctx, threads, &mut warnings)?;
            for s in &mut l {
                s.t = -s.t;
            }
            let r = one_side(a, &h0, 1.0, &ts, ctx, threads, &mut warnings)?;
            l.extend(r);
            l
        }
    };
    let mut est = summarise(a.approx(), side, samples, warnings);
    if side == Side::Both {
        // regress on |t| for the pooled fit
        let kept: Vec<&HolderSample> = est.samples.iter().filter(|s| s.used).collect();
        let xs: Vec<f64> = kept.iter().map(|s| s.t.abs().ln()).collect();
        let ys: Vec<f64> = kept.iter().map(|s| s.dh.abs().ln()).collect();
        let fit = fit_line(&xs, &ys);
        est.slope = fit.map(|f| f.slope);
        est.stderr = fit.map(|f| f.stderr);
        est.t_range = (!kept.is_empty()).then(|| {
            let lo = kept.iter().map(|s| s.t.abs()).fold(f64::INFINITY, f64::min);
            let hi = kept.iter().map(|s| s.t.abs()).fold(0.0, f64::max);
            (lo, hi)
        });
    }
    if !est.reliable && !est.flat {
        est.warnings
            .push(format!("only {} resolved differences", est.points_used));
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedEstimate {
    pub left: HolderEstimate,
    pub right: HolderEstimate,
    /// Neither side is flat.
    pub both_sides_vary: bool,
}

pub fn estimate_two_sided(
    a: impl Into<ParamValue>,
    t0: f64,
    ratio: f64,
    count: usize,
    ctx: &PrecisionContext,
    threads: usize,
) -> Result<TwoSidedEstimate> {
    let a = a.into();
    let left = estimate_local_exponent(a, Side::Left, t0, ratio, count, ctx, threads)?;
    let right = estimate_local_exponent(a, Side::Right, t0, ratio, count, ctx, threads)?;
    let both_sides_vary = !left.flat && !right.flat;
    Ok(TwoSidedEstimate {
        left,
        right,
        both_sides_vary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedFlatness {
    pub kappa: f64,
    pub c: f64,
    /// Coefficient of `log log(1/t)`.
    pub mu: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessFit {
    pub a: f64,
    /// Exponent in `log|Δh| ≈ −c·t^{−κ}`.
    pub kappa: f64,
    pub c: f64,
    pub residual: f64,
    pub points: usize,
    pub corrected: Option<CorrectedFlatness>,
    pub samples: Vec<HolderSample>,
}

/// Minimum number of retained points for a flatness fit.
pub const MIN_FLATNESS_POINTS: usize = 6;
/// Minimum span of the retained `t` in decades.
pub const MIN_FLATNESS_DECADES: f64 = 1.5;

fn lstsq3(rows: &[[f64; 3]], ys: &[f64]) -> Option<([f64; 3], f64)> {
    let mut m = [[0.0f64; 4]; 3];
    for (r, &y) in rows.iter().zip(ys) {
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += r[i] * r[j];
            }
            m[i][3] += r[i] * y;
        }
    }
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        m.swap(c, piv);
        if m[c][c].abs() < 1e-300 {
            return None;
        }
        for r in 0..3 {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..4 {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    let beta = [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]];
    let sse: f64 = rows
        .iter()
        .zip(ys)
        .map(|(r, y)| {
            let e = y - (beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2]);
            e * e
        })
        .sum();
    Some((beta, (sse / ys.len() as f64).sqrt()))
}

/// Fit `log(−log|Δh|) = log c + κ·log(1/t)`, optionally with an extra
/// `log log(1/t)` term.
pub fn fit_flatness_series(
    ts: &[f64],
    dhs: &[f64],
    log_correction: bool,
) -> Result<(f64, f64, f64, Option<CorrectedFlatness>)> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(dhs)
        .filter(|(t, d)| **t > 0.0 && **t < 1.0 && d.abs() > 0.0 && d.abs() < 1.0)
        .map(|(t, d)| ((1.0 / t).ln(), (-d.abs().ln()).ln()))
        .collect();
    if pts.len() < MIN_FLATNESS_POINTS {
        return Err(Error::InsufficientSignal(format!(
            "{} usable points, need {MIN_FLATNESS_POINTS}",
            pts.len()
        )));
    }
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo) / std::f64::consts::LN_10 < MIN_FLATNESS_DECADES {
        return Err(Error::InsufficientSignal(format!(
            "points span {:.2} decades, need {MIN_FLATNESS_DECADES}",
            (hi - lo) / std::f64::consts::LN_10
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::InsufficientSignal("degenerate abscissae".into()))?;
    let corrected = if log_correction {
        let rows: Vec<[f64; 3]> = xs.iter().map(|&u| [1.0, u, u.ln()]).collect();
        lstsq3(&rows, &ys).map(|(b, residual)| CorrectedFlatness {
            kappa: b[1],
            c: b[0].exp(),
            mu: b[2],
            residual,
        })
    } else {
        None
    };
    Ok((fit.slope, fit.intercept.exp(), fit.residual, corrected))
}

/// Period of a nearly neutral cycle attracting the critical orbit, if any.
pub fn parabolic_period(a: f64) -> Option<usize> {
    let mut x = 0.0f64;
    for _ in 0..200_000 {
        x = x * x + a;
    }
    (1..=24).find(|&p| {
        let mut y = x;
        let mut mult = 1.0;
        for _ in 0..p {
            mult *= 2.0 * y;
            y = y * y + a;
        }
        (y - x).abs() <= 1e-3 && (mult - 1.0).abs() <= 0.05
    })
}

/// Flatness exponent of `h` at a saddle-node parameter on one side.
pub fn parabolic_flatness_fit(
    a: f64,
    side: Side,
    t_grid: &[f64],
    log_correction: bool,
    ctx: &PrecisionContext,
    threads: usize,
) -> Result<FlatnessFit> {
    check_quadratic(a)?;
    if side == Side::Both {
        return Err(Error::invalid("flatness is fitted one side at a time"));
    }
    if !ctx.is_extended() {
        return Err(Error::invalid("flatness fits need an extended-precision context"));
    }
    if parabolic_period(a).is_none() {
        return Err(Error::NotApplicable(format!("no neutral cycle at a = {a}")));
    }
    let a = ParamValue::from(a);
    let h0 = quad_entropy_ctx(a, ctx)?;
    let sign = if side == Side::Left { -1.0 } else { 1.0 };
    let mut warnings = Vec::new();
    let mut samples = one_side(a, &h0, sign, t_grid, ctx, threads, &mut warnings)?;
    select_reliable(&mut samples);
    let kept: Vec<&HolderSample> = samples.iter().filter(|s| s.used).collect();
    let ts: Vec<f64> = kept.iter().map(|s| s.t).collect();
    let dhs: Vec<f64> = kept.iter().map(|s| s.dh).collect();
    let (kappa, c, residual, corrected) = fit_flatness_series(&ts, &dhs, log_correction)?;
    Ok(FlatnessFit {
        a: a.hi,
        kappa,
        c,
        residual,
        points: ts.len(),
        corrected,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderAtAccumulation {
    pub slope: f64,
    pub stderr: f64,
    /// `log 2 / log δ*` from the table's ratio limit.
    pub predicted: f64,
    pub rows_used: usize,
    /// Too few rows for a trustworthy slope.
    pub flagged: bool,
}

/// First table row used by [`holder_at_a_f`]; the Chebyshev row lies
/// outside the geometric regime.
const FIRST_ASYMPTOTIC_ROW: usize = 1;

/// Slope of `log h(a_m)` against `log|a_m − a_F|` over the cascade rows.
pub fn holder_at_a_f(table: &CascadeTable) -> Result<HolderAtAccumulation> {
    let rows = table.rows();
    if rows < FIRST_ASYMPTOTIC_ROW + 3 || !table.a_f.is_finite() {
        return Err(Error::invalid(
            "the cascade table needs at least four rows and an accumulation estimate",
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for m in FIRST_ASYMPTOTIC_ROW..rows {
        let dist = (table.a_m[m] - table.a_f) + table.a_m_lo[m];
        xs.push(dist.abs().ln());
        ys.push((LN_2 / (1u64 << m) as f64).ln());
    }
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::invalid("degenerate cascade table"))?;
    let used = xs.len();
    Ok(HolderAtAccumulation {
        slope: fit.slope,
        stderr: fit.stderr,
        predicted: LN_2 / table.delta_star.ln(),
        rows_used: used,
        flagged: rows < 6 || fit.stderr > 0.02,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformHolderFit {
    pub c: f64,
    pub beta: f64,
    pub pairs_used: usize,
    /// Pairs discarded because `|Δh|` was not resolved (flat pairs).
    pub flat_pairs: usize,
}

/// Upper hull of points sorted by abscissa.
fn upper_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// `(log C, β)` of the tightest line `y = log C + β·x` above every point,
/// taken as the upper-hull edge over the mean abscissa, then `β` raised to
/// the largest value the fitted `C` admits.
pub fn envelope_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let mut pts = points.to_vec();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let mean = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let hull = upper_hull(&pts);
    if hull.len() < 2 {
        return None;
    }
    let i = hull.windows(2).position(|w| w[1].0 >= mean).unwrap_or(hull.len() - 2);
    let (p, q) = (hull[i], hull[i + 1]);
    if q.0 <= p.0 {
        return None;
    }
    let slope = (q.1 - p.1) / (q.0 - p.0);
    let log_c = p.1 - slope * p.0;
    let beta = pts
        .iter()
        .filter(|p| p.0 < 0.0)
        .map(|p| (p.1 - log_c) / p.0)
        .fold(f64::INFINITY, f64::min);
    Some((log_c, if beta.is_finite() { beta } else { slope }))
}

/// Envelope `|Δh| ≤ C·|Δa|^β` over pairs of a uniform grid on `[lo, hi]`.
///
/// All pairs are used when they fit in `pair_budget`; otherwise pairs are
/// drawn with a seeded generator.
pub fn uniform_holder_fit(
    lo: f64,
    hi: f64,
    grid: usize,
    pair_budget: usize,
    seed: u64,
    ctx: &PrecisionContext,
    threads: usize,
) -> Result<UniformHolderFit> {
    check_quadratic(lo)?;
    check_quadratic(hi)?;
    if !(lo < hi) {
        return Err(Error::invalid("need lo < hi"));
    }
    if grid < 100 {
        return Err(Error::invalid("grid must have at least 100 points"));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let hs = par_map(grid, threads, |i| {
        let a = if i + 1 == grid { hi } else { lo + step * i as f64 };
        quad_entropy_ctx(a, ctx).map(|h| (a, h))
    });
    let hs: Vec<(f64, EntropyResult)> = hs.into_iter().collect::<Result<_>>()?;
    let total = grid * (grid - 1) / 2;
    let mut pairs = Vec::with_capacity(total.min(pair_budget));
    if total <= pair_budget {
        for i in 0..grid {
            for j in i + 1..grid {
                pairs.push((i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while pairs.len() < pair_budget {
            let i = rng.gen_range(0..grid);
            let j = rng.gen_range(0..grid);
            if i != j {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    let mut points = Vec::with_capacity(pairs.len());
    let mut flat = 0;
    for (i, j) in pairs {
        let (a1, h1) = &hs[i];
        let (a2, h2) = &hs[j];
        let dh = h1.diff(h2).abs();
        if dh <= RELIABILITY_FACTOR * h1.error_radius.max(h2.error_radius) {
            flat += 1;
            continue;
        }
        points.push(((a2 - a1).abs().ln(), dh.ln()));
    }
    let (log_c, beta) =
        envelope_fit(&points).ok_or_else(|| Error::InsufficientSignal("fewer than two resolved pairs".into()))?;
    Ok(UniformHolderFit {
        c: log_c.exp(),
        beta,
        pairs_used: points.len(),
        flat_pairs: flat,
    })
}
