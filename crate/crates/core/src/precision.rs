//! Arithmetic backends and the context object that selects between them.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;

/// Smallest mantissa width accepted for the extended backend.
pub const MIN_EXTENDED_BITS: usize = 128;
/// Largest mantissa width accepted; keeps the guard representable as `f64`.
pub const MAX_EXTENDED_BITS: usize = 1024;
/// Default symbolic depth in native mode.
pub const NATIVE_DEPTH: usize = 48;
/// Default bisection budget for slope and parameter searches.
pub const DEFAULT_ITERS: usize = 200;

/// Real arithmetic used along orbits.
///
/// Only the operations the dynamics needs are exposed. Values carry their own
/// precision so generic code never has to thread it through.
pub trait Real: Clone + fmt::Debug + Send + Sync + 'static {
    fn from_f64(x: f64, bits: usize) -> Self;
    fn to_f64(&self) -> f64;
    fn bits(&self) -> usize;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn ln(&self) -> Self;
    fn total_cmp(&self, o: &Self) -> Ordering;

    fn lit(&self, x: f64) -> Self {
        Self::from_f64(x, self.bits())
    }

    fn square(&self) -> Self {
        self.mul(self)
    }

    fn midpoint(&self, o: &Self) -> Self {
        self.add(o).mul(&self.lit(0.5))
    }

    fn lt(&self, o: &Self) -> bool {
        self.total_cmp(o) == Ordering::Less
    }

    /// Split into an unevaluated pair `hi + lo` of doubles.
    fn to_pair(&self) -> (f64, f64) {
        let hi = self.to_f64();
        let lo = self.sub(&self.lit(hi)).to_f64();
        (hi, lo)
    }
}

impl Real for f64 {
    fn from_f64(x: f64, _bits: usize) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn bits(&self) -> usize {
        53
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn total_cmp(&self, o: &Self) -> Ordering {
        f64::total_cmp(self, o)
    }
}

thread_local! {
    static CONSTS: RefCell<Option<Consts>> = const { RefCell::new(None) };
}

/// Extended binary floating point with a fixed mantissa width.
#[derive(Clone)]
pub struct Ext {
    v: BigFloat,
    p: usize,
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ext({:e}, {} bits)", self.to_f64(), self.p)
    }
}

fn scale_pow2(mut x: f64, mut k: i64) -> f64 {
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k as i32)
}

impl Ext {
    fn wrap(&self, v: BigFloat) -> Self {
        Ext { v, p: self.p }
    }
}

impl Real for Ext {
    fn from_f64(x: f64, bits: usize) -> Self {
        Ext {
            v: BigFloat::from_f64(x, bits),
            p: bits,
        }
    }

    fn to_f64(&self) -> f64 {
        if self.v.is_nan() {
            return f64::NAN;
        }
        if self.v.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.v.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        if self.v.is_zero() {
            return 0.0;
        }
        match self.v.as_raw_parts() {
            Some((words, _, sign, exp, _)) => {
                let n = words.len();
                let top = words[n - 1] as u64;
                let next = if n >= 2 { words[n - 2] as u64 } else { 0 };
                // top word carries the leading bit; the next word fixes the final rounding
                let m = top as f64 + scale_pow2(next as f64, -64);
                let mag = scale_pow2(m, exp as i64 - 64);
                if sign == Sign::Neg {
                    -mag
                } else {
                    mag
                }
            }
            None => f64::NAN,
        }
    }

    fn bits(&self) -> usize {
        self.p
    }
    fn add(&self, o: &Self) -> Self {
        self.wrap(self.v.add(&o.v, self.p, RM))
    }
    fn sub(&self, o: &Self) -> Self {
        self.wrap(self.v.sub(&o.v, self.p, RM))
    }
    fn mul(&self, o: &Self) -> Self {
        self.wrap(self.v.mul(&o.v, self.p, RM))
    }
    fn div(&self, o: &Self) -> Self {
        self.wrap(self.v.div(&o.v, self.p, RM))
    }
    fn neg(&self) -> Self {
        self.wrap(self.v.neg())
    }
    fn abs(&self) -> Self {
        self.wrap(self.v.abs())
    }
    fn sqrt(&self) -> Self {
        self.wrap(self.v.sqrt(self.p, RM))
    }
    fn ln(&self) -> Self {
        let v = CONSTS.with(|c| {
            let mut slot = c.borrow_mut();
            let cc = slot.get_or_insert_with(|| Consts::new().expect("constant cache"));
            self.v.ln(self.p, RM, cc)
        });
        self.wrap(v)
    }
    fn total_cmp(&self, o: &Self) -> Ordering {
        match self.v.cmp(&o.v) {
            Some(c) if c < 0 => Ordering::Less,
            Some(c) if c > 0 => Ordering::Greater,
            Some(_) => Ordering::Equal,
            None => self.to_f64().total_cmp(&o.to_f64()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    Native,
    Extended,
}

/// Arithmetic configuration shared by all numeric operations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionContext {
    backend: Backend,
    bits: usize,
    guard: f64,
    depth: usize,
    iters: usize,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::native()
    }
}

impl PrecisionContext {
    pub fn native() -> Self {
        PrecisionContext {
            backend: Backend::Native,
            bits: 53,
            guard: 1e-13,
            depth: NATIVE_DEPTH,
            iters: DEFAULT_ITERS,
        }
    }

    pub fn extended(bits: usize) -> Result<Self> {
        if !(MIN_EXTENDED_BITS..=MAX_EXTENDED_BITS).contains(&bits) {
            return Err(Error::invalid(format!(
                "extended precision needs {MIN_EXTENDED_BITS}..={MAX_EXTENDED_BITS} bits, got {bits}"
            )));
        }
        Ok(PrecisionContext {
            backend: Backend::Extended,
            bits,
            guard: 2f64.powi(-(bits as i32 - 10)),
            depth: (0.8 * bits as f64).floor() as usize,
            iters: DEFAULT_ITERS,
        })
    }

    /// 53 selects the native backend, anything in the extended range the
    /// extended one.
    pub fn from_bits(bits: usize) -> Result<Self> {
        if bits == 53 {
            Ok(Self::native())
        } else {
            Self::extended(bits)
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.iters = iters;
        self
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn guard(&self) -> f64 {
        self.guard
    }

    /// Symbolic depth used when an operation does not take one explicitly.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn iters(&self) -> usize {
        self.iters
    }

    pub fn is_extended(&self) -> bool {
        self.backend == Backend::Extended
    }

    /// Context with at least `bits` of mantissa, keeping depth proportional.
    pub fn at_least(&self, bits: usize) -> Self {
        if bits <= self.bits {
            return *self;
        }
        let mut c = Self::extended(bits.min(MAX_EXTENDED_BITS)).expect("valid width");
        c.iters = self.iters.max(c.iters);
        c
    }
}

/// Run `$body` with `$R` bound to the real type selected by `$ctx`.
macro_rules! with_real {
    ($ctx:expr, $R:ident => $body:expr) => {
        match $ctx.backend() {
            $crate::precision::Backend::Native => {
                type $R = f64;
                $body
            }
            $crate::precision::Backend::Extended => {
                type $R = $crate::precision::Ext;
                $body
            }
        }
    };
}
pub(crate) use with_real;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_defaults() {
        let c = PrecisionContext::native();
        assert_eq!(c.bits(), 53);
        assert_eq!(c.guard(), 1e-13);
        assert_eq!(c.depth(), 48);
    }

    #[test]
    fn extended_guard_and_depth() {
        let c = PrecisionContext::extended(256).unwrap();
        assert_eq!(c.guard(), 2f64.powi(-246));
        assert_eq!(c.depth(), 204);
        assert!(PrecisionContext::extended(100).is_err());
        assert!(PrecisionContext::from_bits(64).is_err());
    }

    #[test]
    fn ext_round_trips_doubles() {
        for &x in &[0.0, 1.0, -2.0, 0.1, -1.7548776662466927, 1e-300, 3.5e200] {
            let e = Ext::from_f64(x, 192);
            assert_eq!(e.to_f64(), x, "{x}");
        }
    }

    #[test]
    fn ext_pair_split_is_exact_enough() {
        let third = Ext::from_f64(1.0, 256).div(&Ext::from_f64(3.0, 256));
        let (hi, lo) = third.to_pair();
        assert_eq!(hi, 1.0 / 3.0);
        assert!(lo != 0.0 && lo.abs() < 1e-16);
        let back = Ext::from_f64(hi, 256).add(&Ext::from_f64(lo, 256));
        let err = back.sub(&third).abs().to_f64();
        assert!(err < 1e-32, "{err}");
    }

    #[test]
    fn ext_ln_matches_f64() {
        let x = Ext::from_f64(2.0, 160).ln().to_f64();
        assert!((x - std::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn dispatch_macro_selects_backend() {
        let ctx = PrecisionContext::extended(128).unwrap();
        let b = with_real!(ctx, R => R::from_f64(1.0, ctx.bits()).bits());
        assert_eq!(b, 128);
        let n = with_real!(PrecisionContext::native(), R => R::from_f64(1.0, 53).bits());
        assert_eq!(n, 53);
    }
}
