//! Statistics along the critical orbit of `x² + a`: the critical value
//! functions `ξ_j(a) = f^j(a)`, their parameter derivatives, finite-time
//! Lyapunov exponents, the transversality sum and the close-return statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::ParamValue;
use crate::precision::{with_real, PrecisionContext, Real};

/// Gap between the lower and upper exponent proxies below which the
/// exponent is considered resolved.
pub const LAMBDA_GAP_TOL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalOrbitStats {
    pub a: f64,
    /// `ξ_j` for `j = 0..=last`.
    pub xi: Vec<f64>,
    /// `ξ'_j = dξ_j/da`.
    pub xi_prime: Vec<f64>,
    /// `λ_j = (1/j)·log|(f^j)'(a)|`, with `λ_0 = 0`.
    pub lambda_n: Vec<f64>,
    /// `Q_j = Σ_{k≤j} 1/(f^k)'(a)`.
    pub q_n: Vec<f64>,
    /// First `j` with `|ξ_j| ≤ guard`; the sequences end there.
    pub critical_hit: Option<usize>,
}

impl CriticalOrbitStats {
    /// Largest index with data.
    pub fn last(&self) -> usize {
        self.xi.len() - 1
    }
}

fn stats_with<R: Real>(a: ParamValue, n: usize, ctx: &PrecisionContext) -> CriticalOrbitStats {
    let bits = ctx.bits();
    let ar: R = a.to_real(bits);
    let one = ar.lit(1.0);
    let two = ar.lit(2.0);
    let mut x = ar.clone();
    let mut dx = one.clone();
    // 1/(f^j)'(a) carried as a real to avoid overflow of the product itself
    let mut inv = one.clone();
    let mut q = one.clone();
    let mut log_sum = 0.0;
    let mut out = CriticalOrbitStats {
        a: a.approx(),
        xi: vec![x.to_f64()],
        xi_prime: vec![1.0],
        lambda_n: vec![0.0],
        q_n: vec![1.0],
        critical_hit: None,
    };
    for j in 1..=n {
        let xf = x.to_f64();
        if xf.abs() <= ctx.guard() {
            out.critical_hit = Some(j - 1);
            break;
        }
        let slope = two.mul(&x);
        log_sum += slope.to_f64().abs().ln();
        dx = one.add(&slope.mul(&dx));
        inv = inv.div(&slope);
        q = q.add(&inv);
        x = x.square().add(&ar);
        out.xi.push(x.to_f64());
        out.xi_prime.push(dx.to_f64());
        out.lambda_n.push(log_sum / j as f64);
        out.q_n.push(q.to_f64());
    }
    if out.critical_hit.is_none() && out.xi[out.last()].abs() <= ctx.guard() {
        out.critical_hit = Some(out.last());
    }
    out
}

/// Critical-orbit statistics for `n` steps; sequences stop at a critical hit.
pub fn critical_stats(a: impl Into<ParamValue>, n: usize, ctx: &PrecisionContext) -> Result<CriticalOrbitStats> {
    let a = a.into().validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(with_real!(ctx, R => stats_with::<R>(a, n, ctx)))
}

/// `Q_n(a)`, computed both as `ξ'_n/(f^n)'(a)` and as a partial sum; the two
/// must agree.
pub fn transversality_q(a: impl Into<ParamValue>, n: usize) -> Result<f64> {
    let a = a.into().validate()?;
    let a = a.approx();
    if n == 0 {
        return Ok(1.0);
    }
    let mut x = a;
    let mut dx = 1.0f64;
    // log|(f^j)'| and its sign, kept apart so the ratio survives overflow
    let mut log_d = 0.0f64;
    let mut sign_d = 1.0f64;
    let mut sum = 1.0;
    let mut abs_sum = 1.0;
    let mut inv = 1.0;
    for j in 0..n {
        if x.abs() <= 1e-13 {
            return Err(Error::CriticalHit(j));
        }
        let s = 2.0 * x;
        log_d += s.abs().ln();
        sign_d *= s.signum();
        dx = 1.0 + s * dx;
        inv /= s;
        sum += inv;
        abs_sum += inv.abs();
        x = x * x + a;
    }
    if x.abs() <= 1e-13 {
        return Err(Error::CriticalHit(n));
    }
    if dx.is_finite() && dx != 0.0 {
        let ratio = sign_d * dx.signum() * (dx.abs().ln() - log_d).exp();
        if (ratio - sum).abs() > 1e-8 * abs_sum {
            return Err(Error::NotResolved(format!(
                "ratio form {ratio} and sum form {sum} of Q disagree"
            )));
        }
    }
    Ok(sum)
}

/// Value of the close-return statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WrValue {
    Finite(f64),
    /// The orbit of the turning point returns to it exactly.
    Superattracting,
}

impl WrValue {
    pub fn as_f64(self) -> f64 {
        match self {
            WrValue::Finite(v) => v,
            WrValue::Superattracting => f64::NEG_INFINITY,
        }
    }
}

/// `(1/n)·Σ log|f'(f^j(0))|` over `1 ≤ j ≤ n` with `|f^j(0)| ≤ delta`.
pub fn wr_statistic(a: impl Into<ParamValue>, delta: f64, n: usize, ctx: &PrecisionContext) -> Result<WrValue> {
    let a = a.into().validate()?;
    if !(delta > ctx.guard()) {
        return Err(Error::invalid("delta must exceed the guard"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let v = with_real!(ctx, R => {
        let ar: R = a.to_real(ctx.bits());
        let mut y = ar.clone();
        let mut sum = 0.0;
        let mut hit = false;
        for _ in 1..=n {
            let yf = y.to_f64();
            if yf.abs() <= ctx.guard() {
                hit = true;
                break;
            }
            if yf.abs() <= delta {
                sum += (2.0 * yf).abs().ln();
            }
            y = y.square().add(&ar);
        }
        if hit { WrValue::Superattracting } else { WrValue::Finite(sum / n as f64) }
    });
    Ok(v)
}

/// Lower and upper proxies for the Lyapunov exponent of the critical value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lower: f64,
    pub upper: f64,
    /// `λ_n` at the last available index.
    pub last: f64,
    pub gap: f64,
    pub converged: bool,
    /// Number of steps actually used.
    pub steps: usize,
}

/// Min and max of `λ_j` over `j ∈ [n/2, n]`.
pub fn lyapunov_from_stats(stats: &CriticalOrbitStats) -> Result<LyapunovEstimate> {
    let n = stats.last();
    if n < 2 {
        return Err(Error::NotResolved(format!(
            "only {n} steps before the critical orbit hit the turning point"
        )));
    }
    let tail = &stats.lambda_n[(n / 2).max(1)..=n];
    let lower = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = upper - lower;
    Ok(LyapunovEstimate {
        lower,
        upper,
        last: stats.lambda_n[n],
        gap,
        converged: gap < LAMBDA_GAP_TOL && stats.critical_hit.is_none(),
        steps: n,
    })
}

pub fn lyapunov_estimate(a: impl Into<ParamValue>, n: usize, ctx: &PrecisionContext) -> Result<LyapunovEstimate> {
    lyapunov_from_stats(&critical_stats(a, n, ctx)?)
}

/// Whether the critical orbit is attracted to a cycle of period at most
/// `max_period` (or hits the turning point).
pub fn attracting_cycle(a: f64, max_period: usize) -> Option<usize> {
    let mut x = 0.0f64;
    for i in 0..4000 {
        x = x * x + a;
        if x.abs() <= 1e-13 {
            return Some(i + 1);
        }
    }
    for p in 1..=max_period {
        let mut y = x;
        let mut mult = 1.0;
        for _ in 0..p {
            mult *= 2.0 * y;
            y = y * y + a;
        }
        if (y - x).abs() <= 1e-9 && mult.abs() < 1.0 {
            return Some(p);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::bisect;
    use proptest::prelude::*;

    fn native() -> PrecisionContext {
        PrecisionContext::native()
    }

    fn period3_center() -> f64 {
        bisect(|a| (a * a + a) * (a * a + a) + a, -1.76, -1.75, 1e-16)
    }

    #[test]
    fn chebyshev_stats() {
        let s = critical_stats(-2.0, 3, &native()).unwrap();
        assert_eq!(s.xi, vec![-2.0, 2.0, 2.0, 2.0]);
        assert_eq!(s.xi_prime[1], -3.0);
        assert!((s.lambda_n[3] - 4f64.ln()).abs() < 1e-15);
        assert_eq!(s.critical_hit, None);
    }

    #[test]
    fn parabolic_exponent_vanishes() {
        let s = critical_stats(0.25, 20000, &native()).unwrap();
        assert!(s.lambda_n[20000].abs() < 0.01);
    }

    #[test]
    fn xi_prime_matches_finite_difference() {
        let xi = |a: f64, n: usize| {
            let mut x = a;
            for _ in 0..n {
                x = x * x + a;
            }
            x
        };
        let e = 1e-7;
        let fd = (xi(-1.8 + e, 10) - xi(-1.8 - e, 10)) / (2.0 * e);
        let s = critical_stats(-1.8, 10, &native()).unwrap();
        assert!((s.xi_prime[10] - fd).abs() <= 1e-4 * fd.abs());
    }

    #[test]
    fn hits_truncate_sequences() {
        let s = critical_stats(period3_center(), 10, &native()).unwrap();
        assert_eq!(s.critical_hit, Some(2));
        assert_eq!(s.xi.len(), 3);
        assert_eq!(s.lambda_n.len(), 3);
    }

    #[test]
    fn q_examples() {
        let q = transversality_q(-2.0, 60).unwrap();
        assert!((q - 2.0 / 3.0).abs() < 1e-10, "{q}");
        assert_eq!(transversality_q(-1.3, 0).unwrap(), 1.0);
        assert!(matches!(
            transversality_q(period3_center(), 2),
            Err(Error::CriticalHit(2))
        ));
    }

    #[test]
    fn q_direct_summation_oracle() {
        // independent oracle: Σ 1/(f^k)'(a) from explicit products
        let a = -1.6;
        let mut orbit = vec![a];
        for _ in 0..30 {
            let x = *orbit.last().unwrap();
            orbit.push(x * x + a);
        }
        let mut want = 0.0;
        for k in 0..=30 {
            let d: f64 = orbit[..k].iter().map(|x| 2.0 * x).product();
            want += 1.0 / d;
        }
        let got = transversality_q(a, 30).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn wr_examples() {
        assert_eq!(wr_statistic(-2.0, 0.1, 1000, &native()).unwrap(), WrValue::Finite(0.0));
        assert_eq!(
            wr_statistic(period3_center(), 0.1, 3, &native()).unwrap(),
            WrValue::Superattracting
        );
        assert!(wr_statistic(-1.9, 1e-14, 10, &native()).is_err());
    }

    #[test]
    fn wr_matches_brute_force_bitwise() {
        let (a, delta, n) = (-1.9f64, 0.05, 10_000);
        let mut y = 0.0f64;
        let mut terms = Vec::new();
        for _ in 0..n {
            y = y * y + a;
            if y.abs() <= delta {
                terms.push((2.0 * y).abs().ln());
            }
        }
        let want = terms.iter().fold(0.0, |s, t| s + t) / n as f64;
        assert_eq!(wr_statistic(a, delta, n, &native()).unwrap(), WrValue::Finite(want));
    }

    #[test]
    fn lyapunov_chebyshev_converges() {
        let l = lyapunov_estimate(-2.0, 200, &native()).unwrap();
        assert!(l.converged);
        assert!((l.last - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn attracting_cycles_detected() {
        assert_eq!(attracting_cycle(0.0, 3), Some(1));
        assert_eq!(attracting_cycle(-0.5, 3), Some(1));
        assert_eq!(attracting_cycle(-1.3, 8), Some(4));
        assert_eq!(attracting_cycle(-2.0, 20), None);
        assert_eq!(attracting_cycle(-1.9, 20), None);
    }

    #[test]
    fn extended_stats_track_native() {
        let n = critical_stats(-1.7, 20, &native()).unwrap();
        let e = critical_stats(-1.7, 20, &PrecisionContext::extended(192).unwrap()).unwrap();
        for j in 0..=20 {
            assert!((n.xi[j] - e.xi[j]).abs() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn expanded_derivative_sum(u in 0.0f64..1.0) {
            let a = -2.0 + 2.25 * u;
            let s = critical_stats(a, 30, &native()).unwrap();
            for k in 1..=s.last().min(30) {
                // ξ'_k = Σ_{i=0..k} (f^i)'(ξ_{k−i}) with the derivative taken at the later points
                let mut total = 1.0;
                let mut abs_total = 1.0;
                let mut prod = 1.0;
                for i in (0..k).rev() {
                    prod *= 2.0 * s.xi[i];
                    total += prod;
                    abs_total += prod.abs();
                }
                prop_assert!((s.xi_prime[k] - total).abs() <= 1e-10 * abs_total, "a={} k={}", a, k);
            }
        }

        #[test]
        fn chain_rule_for_lambda(u in 0.0f64..1.0) {
            let a = -2.0 + 2.25 * u;
            let s = critical_stats(a, 1000, &native()).unwrap();
            let mut acc = 0.0;
            for j in 1..=s.last() {
                acc += (2.0 * s.xi[j - 1]).abs().ln();
                prop_assert!((s.lambda_n[j] * j as f64 - acc).abs() <= 1e-10 * j as f64);
            }
        }

        #[test]
        fn q_ratio_sum_identity(u in 0.0f64..1.0, n in 1usize..40) {
            let a = -2.0 + 1.5 * u;
            match transversality_q(a, n) {
                Ok(_) | Err(Error::CriticalHit(_)) => {}
                Err(e) => prop_assert!(false, "{}", e),
            }
        }

        #[test]
        fn wr_added_terms_are_near_critical(u in 0.0f64..1.0, d1 in 0.01f64..0.2, extra in 0.0f64..0.2) {
            let a = -2.0 + 0.6 * u;
            let d2 = d1 + extra;
            let n = 2000;
            let w1 = wr_statistic(a, d1, n, &native()).unwrap();
            let w2 = wr_statistic(a, d2, n, &native()).unwrap();
            if let (WrValue::Finite(w1), WrValue::Finite(w2)) = (w1, w2) {
                // n·(w2 − w1) is the sum of the added terms, each at most log(2·d2)
                let mut added = 0.0;
                let mut count = 0;
                let mut y = 0.0f64;
                for _ in 0..n {
                    y = y * y + a;
                    if y.abs() > d1 && y.abs() <= d2 {
                        let t = (2.0 * y).abs().ln();
                        prop_assert!(t <= (2.0 * d2).ln());
                        added += t;
                        count += 1;
                    }
                }
                prop_assert!(((w2 - w1) * n as f64 - added).abs() <= 1e-9 * (1.0 + count as f64));
            }
        }
    }
}
