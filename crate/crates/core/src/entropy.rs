//! Topological entropy by the exact tent formula, by kneading bisection
//! against the tent family, and by lap counting.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kneading::{deflate, itinerary_compare, quad_symbols, tent_symbols, Itinerary, KneadOrder, Symbol};
use crate::maps::{check_tent, Family, FamilyParam, ParamValue};
use crate::precision::{with_real, PrecisionContext, Real};

/// Lower end of the slope bracket.
pub const MIN_SLOPE: f64 = 1.0 + 1e-9;
/// Deflation stops after this many period-doubling steps.
pub const MAX_RENORM: u32 = 12;
/// Largest iterate accepted by [`lap_count`].
pub const MAX_LAP_ITERATE: usize = 22;

/// Symbols that must be trustworthy before a bisection is attempted.
const MIN_RELIABLE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntropyMethod {
    TentExact,
    KneadBisect,
    KneadRoot,
    LapCount,
}

/// An entropy value in nats with an error radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub value: f64,
    /// Low word of the value; nonzero only for extended-precision runs.
    pub value_lo: f64,
    pub error_radius: f64,
    pub method: EntropyMethod,
    /// Number of period-doubling deflations applied before matching.
    pub renorm_depth: u32,
    /// The determinant had no root in `(0, 1)`; the value 0 is a bound.
    pub no_root: bool,
    /// The critical orbit is periodic: the parameter is a window center.
    pub superattracting: bool,
}

impl EntropyResult {
    fn exact(value: f64, method: EntropyMethod) -> Self {
        EntropyResult {
            value,
            value_lo: 0.0,
            error_radius: 0.0,
            method,
            renorm_depth: 0,
            no_root: false,
            superattracting: false,
        }
    }

    /// `self − other`, using the low words so that differences far below
    /// one ulp of the values survive.
    pub fn diff(&self, other: &EntropyResult) -> f64 {
        (self.value - other.value) + (self.value_lo - other.value_lo)
    }
}

pub fn tent_entropy(b: f64) -> Result<EntropyResult> {
    check_tent(b)?;
    Ok(EntropyResult::exact(b.ln(), EntropyMethod::TentExact))
}

enum SlopeMatch<R> {
    /// The target lies below every tent kneading in the bracket.
    Below,
    Bracket(R, R),
}

/// Bisect the tent slope until its kneading brackets `target`.
///
/// A tie at finite depth means the target sits inside a cylinder of slopes;
/// both cylinder edges are then located and returned.
fn match_slope<R: Real>(target: &Itinerary, iters: usize, ctx: &PrecisionContext) -> SlopeMatch<R> {
    let bits = ctx.bits();
    let n = target.len();
    let order = |b: &R| itinerary_compare(target, &tent_symbols(b, n, ctx.guard()));
    let mut lo = R::from_f64(MIN_SLOPE, bits);
    let mut hi = R::from_f64(2.0, bits);
    if order(&lo) == KneadOrder::Less {
        return SlopeMatch::Below;
    }
    let mut tie = None;
    for _ in 0..iters {
        let mid = lo.midpoint(&hi);
        if !lo.lt(&mid) || !mid.lt(&hi) {
            break;
        }
        match order(&mid) {
            KneadOrder::Greater => lo = mid,
            KneadOrder::Less => hi = mid,
            KneadOrder::Equal | KneadOrder::Incomparable => {
                tie = Some(mid);
                break;
            }
        }
    }
    let Some(m) = tie else {
        return SlopeMatch::Bracket(lo, hi);
    };
    let (mut l0, mut l1) = (lo, m.clone());
    let (mut r0, mut r1) = (m, hi);
    for _ in 0..iters {
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
    for _ in 0..iters {
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
    SlopeMatch::Bracket(l0, r1)
}

fn deflate_times(it: &Itinerary, m: u32) -> Option<Itinerary> {
    let mut k = it.clone();
    for _ in 0..m {
        k = deflate(&k)?;
    }
    Some(k)
}

fn quad_entropy_with<R: Real>(
    a: ParamValue,
    depth: usize,
    iters: usize,
    ctx: &PrecisionContext,
) -> Result<EntropyResult> {
    let bits = ctx.bits();
    let ar: R = a.to_real(bits);
    let threshold = 0.99 * LN_2 / 2.0;
    let mut m = 0u32;
    let mut raw = quad_symbols(&ar, depth, ctx.guard());
    let superattracting = raw.terminated;
    let zero = |m: u32, err: f64| EntropyResult {
        value: 0.0,
        value_lo: 0.0,
        error_radius: err,
        method: EntropyMethod::KneadBisect,
        renorm_depth: m,
        no_root: false,
        superattracting,
    };
    loop {
        let cur = deflate_times(&raw, m).expect("deflatability checked before descending");
        if let Some(j) = cur.ambiguous_at {
            if j < MIN_RELIABLE {
                return Err(Error::InsufficientPrecision {
                    index: j,
                    lo: MIN_SLOPE,
                    hi: 2.0,
                });
            }
        }
        let scale = 0.5f64.powi(m as i32);
        match match_slope::<R>(&cur, iters, ctx) {
            SlopeMatch::Below => return Ok(zero(m, MIN_SLOPE.ln() * scale)),
            SlopeMatch::Bracket(lo, hi) => {
                let h = lo.midpoint(&hi).ln();
                let half = hi.ln().sub(&lo.ln()).to_f64() * 0.5;
                if h.to_f64() < threshold && raw.symbols[0] == Symbol::L && deflate(&cur).is_some() {
                    if m == MAX_RENORM {
                        return Ok(zero(m, LN_2 * scale));
                    }
                    m += 1;
                    raw = quad_symbols(&ar, depth << m, ctx.guard());
                    if deflate_times(&raw, m).is_none() {
                        // the longer itinerary broke the pattern; stay one level up
                        m -= 1;
                        return Ok(finish(h.mul(&h.lit(scale)), half * scale, m, superattracting));
                    }
                    continue;
                }
                return Ok(finish(h.mul(&h.lit(scale)), half * scale, m, superattracting));
            }
        }
    }
}

fn finish<R: Real>(h: R, half: f64, m: u32, superattracting: bool) -> EntropyResult {
    let (value, value_lo) = h.to_pair();
    let floor = value.abs() * 2f64.powi(-(h.bits() as i32 - 3));
    EntropyResult {
        value,
        value_lo,
        error_radius: half.max(floor).max(f64::MIN_POSITIVE),
        method: EntropyMethod::KneadBisect,
        renorm_depth: m,
        no_root: false,
        superattracting,
    }
}

/// Entropy of `x² + a` by matching its kneading sequence against the tent
/// family, deflating period-doubling structure first when the entropy is
/// small.
pub fn quad_entropy(
    a: impl Into<ParamValue>,
    depth: usize,
    iters: usize,
    ctx: &PrecisionContext,
) -> Result<EntropyResult> {
    let a = a.into().validate()?;
    if depth < MIN_RELIABLE {
        return Err(Error::invalid(format!("depth must be at least {MIN_RELIABLE}")));
    }
    if iters < 32 {
        return Err(Error::invalid("iters must be at least 32"));
    }
    with_real!(ctx, R => quad_entropy_with::<R>(a, depth, iters, ctx))
}

/// Entropy with depth and iteration budget taken from the context.
pub fn quad_entropy_ctx(a: impl Into<ParamValue>, ctx: &PrecisionContext) -> Result<EntropyResult> {
    quad_entropy(a, ctx.depth(), ctx.iters(), ctx)
}

/// Number of maximal monotone pieces of the `n`-th iterate on the dynamical
/// core, the interval between the first two images of the turning point.
///
/// Counts the distinct interior turning points `x` with `f^k(x) = 0` for some
/// `k < n` by solving backwards from the turning point. Preimages that land
/// back on the turning point (periodic critical orbit) are counted once.
pub fn lap_count(param: FamilyParam, n: usize) -> Result<u64> {
    if n > MAX_LAP_ITERATE {
        return Err(Error::Budget(format!("lap count limited to n <= {MAX_LAP_ITERATE}")));
    }
    if n == 0 {
        return Ok(1);
    }
    let v = param.value();
    // the dynamical core [f(0), f²(0)] (quadratic) or [T(1), 1] (tent)
    let (lo, hi) = match param.family() {
        Family::Quadratic => (v, v * v + v),
        Family::Tent => (1.0 - v, 1.0),
    };
    let tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
    if hi - lo <= 2.0 * tol {
        return Ok(1);
    }
    let inside = |x: f64| x > lo + tol && x < hi - tol;
    if !inside(0.0) {
        return Ok(1);
    }
    let mut level = vec![0.0f64];
    let mut total: u64 = 0;
    let mut next = Vec::new();
    for _ in 1..n {
        next.clear();
        for &y in &level {
            // the single preimage of the critical value is the turning point itself
            let r = match param.family() {
                Family::Quadratic => y - v,
                Family::Tent => (1.0 - y) / v,
            };
            if r <= tol {
                continue;
            }
            let x = match param.family() {
                Family::Quadratic => r.sqrt(),
                Family::Tent => r,
            };
            next.extend([x, -x].into_iter().filter(|&z| inside(z)));
        }
        total += next.len() as u64;
        std::mem::swap(&mut level, &mut next);
        if level.is_empty() {
            break;
        }
    }
    Ok(2 + total)
}

/// `(1/n)·log lap_count(n)`, with the gap to the ratio estimate
/// `log(ℓ_n/ℓ_{n−1})` as error radius.
pub fn lap_entropy_estimate(param: FamilyParam, n: usize) -> Result<EntropyResult> {
    if n < 2 {
        return Err(Error::invalid("lap entropy needs n >= 2"));
    }
    let ln = lap_count(param, n)? as f64;
    let lp = lap_count(param, n - 1)? as f64;
    let value = ln.ln() / n as f64;
    let ratio = (ln / lp).ln();
    Ok(EntropyResult {
        error_radius: (value - ratio).abs(),
        ..EntropyResult::exact(value, EntropyMethod::LapCount)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kneading::{kneading_root_entropy, sign_products};
    use crate::numeric::bisect;
    use proptest::prelude::*;

    fn golden() -> f64 {
        0.5 * (1.0 + 5f64.sqrt())
    }

    fn native() -> PrecisionContext {
        PrecisionContext::native()
    }

    fn period3_center() -> f64 {
        bisect(|a| (a * a + a) * (a * a + a) + a, -1.76, -1.75, 1e-16)
    }

    #[test]
    fn tent_examples() {
        assert_eq!(tent_entropy(2.0).unwrap().value, LN_2);
        assert!((tent_entropy(golden()).unwrap().value - 0.4812118).abs() < 1e-7);
        let e = tent_entropy(1.0 + 1e-9).unwrap();
        assert_eq!(e.value, (1.0f64 + 1e-9).ln());
        assert_eq!(e.error_radius, 0.0);
        assert!(tent_entropy(1.0).is_err());
    }

    #[test]
    fn chebyshev_has_log_two() {
        let r = quad_entropy(-2.0, 48, 200, &native()).unwrap();
        assert!((r.value - LN_2).abs() < 1e-9, "{r:?}");
        assert!(r.error_radius < 1e-9);
        assert_eq!(r.method, EntropyMethod::KneadBisect);
    }

    #[test]
    fn attracting_fixed_point_has_zero_entropy() {
        for a in [0.0, 0.1, 0.25, -0.5, -1.0, -1.3] {
            let r = quad_entropy(a, 48, 200, &native()).unwrap();
            assert_eq!(r.value, 0.0, "a={a}");
            assert!(r.error_radius <= 1e-8);
        }
    }

    #[test]
    fn period_three_center_has_golden_entropy() {
        let r = quad_entropy(period3_center(), 48, 200, &native()).unwrap();
        assert!((r.value - golden().ln()).abs() < 1e-8, "{r:?}");
        assert!(r.superattracting);
    }

    #[test]
    fn first_renormalisation_halves() {
        // a inside the two-band region: deflates once
        let r = quad_entropy(-1.45, 48, 200, &native()).unwrap();
        assert_eq!(r.renorm_depth, 1);
        assert!(r.value > 0.0 && r.value < LN_2 / 2.0);
    }

    #[test]
    fn extended_agrees_with_native() {
        let ctx = PrecisionContext::extended(160).unwrap();
        for a in [-1.9, -1.7, -1.62] {
            let n = quad_entropy(a, 48, 200, &native()).unwrap();
            let e = quad_entropy(a, 100, 200, &ctx).unwrap();
            assert!((n.value - e.value).abs() < 1e-6, "{a}: {n:?} {e:?}");
        }
    }

    #[test]
    fn precondition_errors() {
        assert!(quad_entropy(-2.1, 48, 200, &native()).is_err());
        assert!(quad_entropy(-1.8, 8, 200, &native()).is_err());
        assert!(quad_entropy(-1.8, 48, 10, &native()).is_err());
    }

    #[test]
    fn ambiguous_prefix_is_reported() {
        let ctx = native().with_guard(1e-3);
        let e = quad_entropy(-1.0025, 48, 200, &ctx);
        assert!(matches!(e, Err(Error::InsufficientPrecision { index: 1, .. })), "{e:?}");
    }

    #[test]
    fn lap_count_examples() {
        assert_eq!(lap_count(FamilyParam::tent(2.0).unwrap(), 5).unwrap(), 32);
        assert_eq!(lap_count(FamilyParam::quadratic(-2.0).unwrap(), 5).unwrap(), 32);
        assert!(lap_count(FamilyParam::tent(2.0).unwrap(), 23).is_err());
    }

    /// Count monotone pieces of f^n directly by sampling sign changes of the
    /// derivative on a fine grid.
    fn brute_laps(p: FamilyParam, n: usize, samples: usize) -> u64 {
        let v = p.value();
        let dom = match p.family() {
            Family::Quadratic => crate::maps::DynInterval { lo: v, hi: v * v + v },
            Family::Tent => crate::maps::DynInterval { lo: 1.0 - v, hi: 1.0 },
        };
        let mut prev = 0.0;
        let mut laps = 1;
        for i in 0..=samples {
            let x = dom.lo + (dom.hi - dom.lo) * (i as f64 + 0.5) / (samples as f64 + 1.0);
            let mut y = x;
            let mut d = 1.0;
            for _ in 0..n {
                d *= match p.family() {
                    Family::Quadratic => 2.0 * y,
                    Family::Tent => -p.value() * y.signum(),
                };
                y = crate::maps::eval(p, y);
            }
            let s = d.signum();
            if i > 0 && s != prev {
                laps += 1;
            }
            prev = s;
        }
        laps
    }

    #[test]
    fn lap_count_matches_direct_count() {
        for (p, n) in [
            (FamilyParam::quadratic(-2.0).unwrap(), 5),
            (FamilyParam::quadratic(-1.7).unwrap(), 6),
            (FamilyParam::tent(golden()).unwrap(), 6),
            (FamilyParam::tent(1.5).unwrap(), 7),
        ] {
            assert_eq!(lap_count(p, n).unwrap(), brute_laps(p, n, 200_000), "{p:?}");
        }
    }

    #[test]
    fn lap_estimate_golden_tent() {
        let p = FamilyParam::tent(golden()).unwrap();
        let e = lap_entropy_estimate(p, 6).unwrap();
        assert!((e.value - golden().ln()).abs() < 0.08, "{e:?}");
    }

    #[test]
    fn superattracting_laps_dedupe_turning_point() {
        let p = FamilyParam::quadratic(period3_center()).unwrap();
        for n in 2..=7 {
            assert_eq!(lap_count(p, n).unwrap(), brute_laps(p, n, 400_000), "n={n}");
        }
        // the core of x² − 1 is [−1, 0], where the map is monotone
        assert_eq!(lap_count(FamilyParam::quadratic(-1.0).unwrap(), 6).unwrap(), 1);
    }

    #[test]
    fn diff_uses_low_words() {
        let a = EntropyResult {
            value: 0.5,
            value_lo: 1e-20,
            ..EntropyResult::exact(0.5, EntropyMethod::KneadBisect)
        };
        let b = EntropyResult::exact(0.5, EntropyMethod::KneadBisect);
        assert_eq!(a.diff(&b), 1e-20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn bisect_agrees_with_root(u in 0.0f64..1.0) {
            let a = -1.9 + 0.3 * u;
            let ctx = native();
            let kb = quad_entropy(a, 48, 200, &ctx).unwrap();
            let it = crate::kneading::quad_itinerary(a.into(), 48, &ctx);
            let kr = kneading_root_entropy(&sign_products(&it), 1e-12).unwrap();
            prop_assert!((kb.value - kr.value).abs() <= 1e-5, "{} {} {}", a, kb.value, kr.value);
        }

        #[test]
        fn outputs_stay_in_range(u in 0.0f64..1.0) {
            let a = -2.0 + 2.25 * u;
            let r = quad_entropy(a, 48, 200, &native()).unwrap();
            prop_assert!(r.value >= 0.0 && r.value <= LN_2 + 1e-12);
            prop_assert!(r.error_radius > 0.0);
        }
    }

    #[test]
    fn monotone_on_grid() {
        let n = 1000;
        let ctx = native();
        let hs: Vec<EntropyResult> = crate::parallel::par_map(n, 4, |i| {
            quad_entropy(-2.0 + 2.25 * i as f64 / (n - 1) as f64, 48, 200, &ctx).unwrap()
        });
        for w in hs.windows(2) {
            assert!(
                w[1].value - w[0].value <= 2.0 * w[0].error_radius.max(w[1].error_radius),
                "{:?} {:?}",
                w[0],
                w[1]
            );
        }
    }
}
