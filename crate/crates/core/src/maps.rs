//! The two map families, their invariant intervals, and orbit iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::two_sum;
use crate::precision::Real;

pub const QUAD_MIN: f64 = -2.0;
pub const QUAD_MAX: f64 = 0.25;
pub const TENT_MAX: f64 = 2.0;

/// Orbits longer than this keep only running sums past this index.
pub const STORED_POINTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Quadratic,
    Tent,
}

/// A validated member of one of the two families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParam")]
pub struct FamilyParam {
    family: Family,
    value: f64,
}

#[derive(Deserialize)]
struct RawParam {
    family: Family,
    value: f64,
}

impl TryFrom<RawParam> for FamilyParam {
    type Error = Error;
    fn try_from(r: RawParam) -> Result<Self> {
        FamilyParam::new(r.family, r.value)
    }
}

impl FamilyParam {
    pub fn new(family: Family, value: f64) -> Result<Self> {
        match family {
            Family::Quadratic => check_quadratic(value)?,
            Family::Tent => check_tent(value)?,
        }
        Ok(FamilyParam { family, value })
    }

    pub fn quadratic(a: f64) -> Result<Self> {
        Self::new(Family::Quadratic, a)
    }

    pub fn tent(b: f64) -> Result<Self> {
        Self::new(Family::Tent, b)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

pub(crate) fn check_quadratic(a: f64) -> Result<()> {
    if (QUAD_MIN..=QUAD_MAX).contains(&a) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            family: "quadratic",
            value: a,
            range: "[-2, 0.25]",
        })
    }
}

pub(crate) fn check_tent(b: f64) -> Result<()> {
    if b > 1.0 && b <= TENT_MAX {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            family: "tent",
            value: b,
            range: "(1, 2]",
        })
    }
}

/// A quadratic parameter held as an unevaluated sum `hi + lo` of doubles.
///
/// Plain `f64` parameters convert with `lo = 0`. The low word lets
/// extended-precision callers address parameters closer together than one
/// ulp of `hi`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub hi: f64,
    pub lo: f64,
}

impl From<f64> for ParamValue {
    fn from(hi: f64) -> Self {
        ParamValue { hi, lo: 0.0 }
    }
}

impl ParamValue {
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        ParamValue { hi, lo }
    }

    /// `self + t`, kept exact up to the two-word representation.
    pub fn offset(self, t: f64) -> Self {
        let (s, e) = two_sum(self.hi, t);
        ParamValue::new(s, e + self.lo)
    }

    pub fn approx(self) -> f64 {
        self.hi + self.lo
    }

    pub fn to_real<R: Real>(self, bits: usize) -> R {
        let hi = R::from_f64(self.hi, bits);
        if self.lo == 0.0 {
            hi
        } else {
            hi.add(&R::from_f64(self.lo, bits))
        }
    }

    pub(crate) fn validate(self) -> Result<Self> {
        let x = self.approx();
        if x < QUAD_MIN || x > QUAD_MAX || (x == QUAD_MIN && self.lo < 0.0) || (x == QUAD_MAX && self.lo > 0.0) {
            return Err(Error::OutOfRange {
                family: "quadratic",
                value: x,
                range: "[-2, 0.25]",
            });
        }
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynInterval {
    pub lo: f64,
    pub hi: f64,
}

impl DynInterval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// Orbit points with accumulated `log|f'|` along the orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    /// `x_0, …, x_n`, truncated after [`STORED_POINTS`] entries.
    pub points: Vec<f64>,
    /// Entry `k − 1` is `Σ_{j=1..=k} log|f'(x_j)|`, i.e. `log|(f^k)'(x_1)|`.
    pub log_abs_deriv: Vec<f64>,
    /// First `j ≥ 1` with `|x_j| ≤ guard`.
    pub critical_hit_index: Option<usize>,
    /// Number of iterates requested.
    pub steps: usize,
    pub final_point: f64,
    /// Last accumulated sum, also kept when the vectors are truncated.
    pub final_log_deriv: f64,
}

pub fn eval(param: FamilyParam, x: f64) -> f64 {
    match param.family {
        Family::Quadratic => x * x + param.value,
        Family::Tent => 1.0 - param.value * x.abs(),
    }
}

pub fn deriv(param: FamilyParam, x: f64) -> Result<f64> {
    match param.family {
        Family::Quadratic => Ok(2.0 * x),
        Family::Tent => {
            if x == 0.0 {
                Err(Error::DerivativeUndefined)
            } else {
                Ok(-param.value * x.signum())
            }
        }
    }
}

/// Right fixed point `β = (1 + √(1 − 4a))/2` of `x² + a`.
pub fn beta(a: f64) -> f64 {
    0.5 * (1.0 + (1.0 - 4.0 * a).sqrt())
}

pub fn invariant_interval(param: FamilyParam) -> DynInterval {
    match param.family {
        Family::Quadratic => {
            let b = beta(param.value);
            DynInterval { lo: -b, hi: b }
        }
        Family::Tent => {
            let r = 1.0 / (param.value - 1.0);
            DynInterval { lo: -r, hi: r }
        }
    }
}

/// Iterate `n` steps from `x0`, summing `log|f'|` from the first image on.
///
/// The start point may be the turning point itself; hits are looked for
/// from index 1.
pub fn orbit_with_derivative(param: FamilyParam, x0: f64, n: usize, guard: f64) -> Result<OrbitTrace> {
    let dom = invariant_interval(param);
    if !x0.is_finite() || !dom.contains(x0, 1e-12) {
        return Err(Error::EscapingPoint(x0));
    }
    let mut points = Vec::with_capacity(n.min(STORED_POINTS) + 1);
    let mut sums = Vec::with_capacity(n.min(STORED_POINTS));
    points.push(x0);
    let mut x = x0;
    let mut acc = 0.0;
    let mut hit = None;
    for j in 1..=n {
        x = eval(param, x);
        if points.len() <= STORED_POINTS {
            points.push(x);
        }
        if hit.is_none() {
            if x.abs() <= guard {
                hit = Some(j);
            } else {
                acc += deriv(param, x)?.abs().ln();
                if sums.len() < STORED_POINTS {
                    sums.push(acc);
                }
            }
        }
    }
    Ok(OrbitTrace {
        points,
        log_abs_deriv: sums,
        critical_hit_index: hit,
        steps: n,
        final_point: x,
        final_log_deriv: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: f64) -> FamilyParam {
        FamilyParam::quadratic(a).unwrap()
    }
    fn t(b: f64) -> FamilyParam {
        FamilyParam::tent(b).unwrap()
    }

    #[test]
    fn construction_rejects_out_of_range() {
        assert!(FamilyParam::quadratic(-2.0).is_ok());
        assert!(FamilyParam::quadratic(0.25).is_ok());
        assert!(FamilyParam::quadratic(-2.0001).is_err());
        assert!(FamilyParam::quadratic(0.26).is_err());
        assert!(FamilyParam::tent(1.0).is_err());
        assert!(FamilyParam::tent(2.0).is_ok());
        assert!(FamilyParam::tent(2.1).is_err());
        assert!(FamilyParam::quadratic(f64::NAN).is_err());
    }

    #[test]
    fn deserialization_validates() {
        let ok: FamilyParam = serde_json::from_str(r#"{"family":"Tent","value":1.5}"#).unwrap();
        assert_eq!(ok.value(), 1.5);
        assert!(serde_json::from_str::<FamilyParam>(r#"{"family":"Tent","value":3.0}"#).is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval(q(-2.0), 0.0), -2.0);
        assert_eq!(eval(t(2.0), 0.0), 1.0);
        assert_eq!(eval(q(0.25), 0.5), 0.5);
    }

    #[test]
    fn deriv_examples() {
        assert_eq!(deriv(q(-2.0), 2.0).unwrap(), 4.0);
        assert_eq!(deriv(t(1.5), -0.3).unwrap(), 1.5);
        assert!(matches!(deriv(t(2.0), 0.0), Err(Error::DerivativeUndefined)));
    }

    #[test]
    fn interval_examples() {
        assert_eq!(invariant_interval(q(-2.0)), DynInterval { lo: -2.0, hi: 2.0 });
        assert_eq!(invariant_interval(q(0.0)), DynInterval { lo: -1.0, hi: 1.0 });
        assert_eq!(invariant_interval(t(2.0)), DynInterval { lo: -1.0, hi: 1.0 });
    }

    #[test]
    fn orbit_chebyshev() {
        let o = orbit_with_derivative(q(-2.0), 0.0, 3, 0.0).unwrap();
        assert_eq!(o.points, vec![0.0, -2.0, 2.0, 2.0]);
        let l4 = 4f64.ln();
        assert_eq!(o.log_abs_deriv.len(), 3);
        for (k, s) in o.log_abs_deriv.iter().enumerate() {
            assert!((s - l4 * (k + 1) as f64).abs() < 1e-14);
        }
        assert_eq!(o.critical_hit_index, None);
    }

    #[test]
    fn orbit_full_tent() {
        let o = orbit_with_derivative(t(2.0), 1.0, 2, 0.0).unwrap();
        assert_eq!(o.points, vec![1.0, -1.0, -1.0]);
    }

    #[test]
    fn orbit_superattracting_period_three() {
        // root of (a² + a)² + a = 0 near -1.75, from bisection
        let a = crate::numeric::bisect(|a| (a * a + a) * (a * a + a) + a, -1.76, -1.75, 1e-16);
        let o = orbit_with_derivative(q(a), a, 2, 1e-12).unwrap();
        assert_eq!(o.critical_hit_index, Some(2));
        assert_eq!(o.log_abs_deriv.len(), 1);
    }

    #[test]
    fn orbit_rejects_escaping_start() {
        assert!(matches!(
            orbit_with_derivative(q(0.0), 1.5, 3, 0.0),
            Err(Error::EscapingPoint(_))
        ));
    }

    #[test]
    fn long_orbits_keep_running_sums() {
        let o = orbit_with_derivative(q(-2.0), 2.0, STORED_POINTS + 10, 0.0).unwrap();
        assert_eq!(o.points.len(), STORED_POINTS + 1);
        assert_eq!(o.final_point, 2.0);
        let expect = 4f64.ln() * (STORED_POINTS + 10) as f64;
        assert!((o.final_log_deriv - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn param_value_offset_is_exact() {
        let p = ParamValue::from(-1.5).offset(1e-20);
        assert_eq!(p.hi, -1.5);
        assert_eq!(p.lo, 1e-20);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn closure_of_invariant_interval(quad in any::<bool>(), v in 0.0f64..1.0, s in 0.0f64..1.0) {
            let p = if quad { q(-2.0 + 2.25 * v) } else { t(1.0 + 1e-6 + (1.0 - 1e-6) * v) };
            let dom = invariant_interval(p);
            let x = dom.lo + (dom.hi - dom.lo) * s;
            let y = eval(p, x);
            prop_assert!(dom.contains(y, 1e-12), "{:?} {} -> {}", p, x, y);
        }
    }

    proptest! {
        #[test]
        fn right_endpoint_is_fixed(v in 0.0f64..1.0) {
            let p = q(-2.0 + 2.25 * v);
            let hi = invariant_interval(p).hi;
            prop_assert!((eval(p, hi) - hi).abs() <= 1e-12);
        }

        #[test]
        fn tent_left_endpoint_is_fixed(v in 0.0f64..1.0) {
            let p = t(1.05 + 0.95 * v);
            let lo = invariant_interval(p).lo;
            prop_assert!((eval(p, lo) - lo).abs() <= 1e-12 * lo.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn derivative_matches_finite_difference(quad in any::<bool>(), v in 0.0f64..1.0, s in 0.0f64..1.0) {
            let p = if quad { q(-2.0 + 2.25 * v) } else { t(1.01 + 0.99 * v) };
            let dom = invariant_interval(p);
            let x = dom.lo + (dom.hi - dom.lo) * s;
            prop_assume!(x.abs() > 1e-3);
            let h = 1e-6;
            let fd = (eval(p, x + h) - eval(p, x - h)) / (2.0 * h);
            let d = deriv(p, x).unwrap();
            prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "{} vs {}", fd, d);
        }
    }
}
