//! Symbolic dynamics of the critical orbit.
//!
//! Symbols are derivative signs along the orbit of the critical value, so a
//! quadratic map and the tent map it is semiconjugate to produce the same
//! sequence.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyMethod, EntropyResult};
use crate::error::{Error, Result};
use crate::maps::{Family, FamilyParam, ParamValue};
use crate::precision::{with_real, PrecisionContext, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(i8)]
pub enum Symbol {
    L = -1,
    C = 0,
    R = 1,
}

impl Symbol {
    pub fn sign(self) -> i8 {
        self as i8
    }

    pub fn from_sign(s: i8) -> Symbol {
        match s.signum() {
            -1 => Symbol::L,
            0 => Symbol::C,
            _ => Symbol::R,
        }
    }

    pub fn flip(self) -> Symbol {
        Symbol::from_sign(-self.sign())
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::L => 'L',
            Symbol::C => 'C',
            Symbol::R => 'R',
        }
    }
}

/// Symbol sequence along the critical orbit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    pub symbols: Vec<Symbol>,
    /// The orbit hit the turning point; the last symbol is `C`.
    pub terminated: bool,
    /// First index whose orbit point lay within ten guards of the turning
    /// point without being classified as a hit.
    pub ambiguous_at: Option<usize>,
}

impl Itinerary {
    /// Build from symbols; a `C` is only allowed in last position.
    pub fn from_symbols(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("empty itinerary"));
        }
        let n = symbols.len();
        if symbols[..n - 1].contains(&Symbol::C) {
            return Err(Error::invalid("C may only appear in last position"));
        }
        let terminated = symbols[n - 1] == Symbol::C;
        Ok(Itinerary {
            symbols,
            terminated,
            ambiguous_at: None,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Number of leading symbols that can be trusted.
    pub fn reliable_len(&self) -> usize {
        self.ambiguous_at.unwrap_or(self.len()).min(self.len())
    }

    pub fn truncated(&self, n: usize) -> Itinerary {
        let n = n.min(self.len()).max(1);
        Itinerary {
            symbols: self.symbols[..n].to_vec(),
            terminated: self.terminated && n == self.len(),
            ambiguous_at: self.ambiguous_at.filter(|&i| i < n),
        }
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Itinerary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(|c| match c {
                'L' => Ok(Symbol::L),
                'C' => Ok(Symbol::C),
                'R' => Ok(Symbol::R),
                other => Err(Error::invalid(format!("unknown symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Itinerary::from_symbols(symbols)
    }
}

/// Cumulative sign products, the coefficients of the kneading determinant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KneadingData {
    pub d: Vec<i8>,
    pub source: Itinerary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KneadOrder {
    Less,
    Equal,
    Greater,
    Incomparable,
}

struct SymbolBuilder {
    symbols: Vec<Symbol>,
    ambiguous_at: Option<usize>,
    guard: f64,
}

impl SymbolBuilder {
    fn new(n: usize, guard: f64) -> Self {
        SymbolBuilder {
            symbols: Vec::with_capacity(n),
            ambiguous_at: None,
            guard,
        }
    }

    /// Record the symbol with derivative sign `sign·sgn(x)`; returns false on a hit.
    fn push(&mut self, x: f64, sign: i8) -> bool {
        let ax = x.abs();
        if ax <= self.guard {
            self.symbols.push(Symbol::C);
            return false;
        }
        if ax <= 10.0 * self.guard && self.ambiguous_at.is_none() {
            self.ambiguous_at = Some(self.symbols.len());
        }
        let s = if x < 0.0 { -sign } else { sign };
        self.symbols.push(Symbol::from_sign(s));
        true
    }

    fn finish(self) -> Itinerary {
        let terminated = self.symbols.last() == Some(&Symbol::C);
        Itinerary {
            symbols: self.symbols,
            terminated,
            ambiguous_at: self.ambiguous_at,
        }
    }
}

/// Itinerary of `x² + a` from the critical value `a`.
pub(crate) fn quad_symbols<R: Real>(a: &R, n: usize, guard: f64) -> Itinerary {
    let mut b = SymbolBuilder::new(n, guard);
    let mut x = a.clone();
    for i in 0..n {
        if !b.push(x.to_f64(), 1) || i + 1 == n {
            break;
        }
        x = x.square().add(a);
    }
    b.finish()
}

/// Itinerary of `1 − b|x|` from the critical value 1.
pub(crate) fn tent_symbols<R: Real>(slope: &R, n: usize, guard: f64) -> Itinerary {
    let mut b = SymbolBuilder::new(n, guard);
    let one = slope.lit(1.0);
    let mut x = one.clone();
    for i in 0..n {
        if !b.push(x.to_f64(), -1) || i + 1 == n {
            break;
        }
        x = one.sub(&slope.mul(&x.abs()));
    }
    b.finish()
}

/// Kneading itinerary of length `n` (shorter when the orbit hits the turning point).
pub fn kneading_itinerary(param: FamilyParam, n: usize, ctx: &PrecisionContext) -> Itinerary {
    let n = n.max(1);
    let v = param.value();
    with_real!(ctx, R => {
        let x = R::from_f64(v, ctx.bits());
        match param.family() {
            Family::Quadratic => quad_symbols(&x, n, ctx.guard()),
            Family::Tent => tent_symbols(&x, n, ctx.guard()),
        }
    })
}

/// Quadratic itinerary at a two-word parameter.
pub fn quad_itinerary(a: ParamValue, n: usize, ctx: &PrecisionContext) -> Itinerary {
    with_real!(ctx, R => quad_symbols(&a.to_real::<R>(ctx.bits()), n.max(1), ctx.guard()))
}

pub fn sign_products(it: &Itinerary) -> KneadingData {
    let mut d = Vec::with_capacity(it.len() + 1);
    let mut p: i8 = 1;
    d.push(p);
    for s in &it.symbols {
        p *= s.sign();
        d.push(p);
    }
    KneadingData { d, source: it.clone() }
}

fn horner(c: &[f64], t: f64) -> (f64, f64) {
    let (mut v, mut dv) = (0.0, 0.0);
    for &ci in c.iter().rev() {
        dv = dv * t + v;
        v = v * t + ci;
    }
    (v, dv)
}

/// Entropy `−log s` from the smallest root `s` of the kneading determinant.
///
/// A terminated itinerary is extended periodically with the turning-point
/// symbol replaced so that each block has sign product −1, the one-sided
/// limit of nearby parameters. The determinant is then `P(t)/(1 + t^p)` with
/// `P` the polynomial of the first block, and only `P` is searched.
pub fn kneading_root_entropy(kd: &KneadingData, tol: f64) -> Result<EntropyResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let terminated = kd.source.terminated;
    if !terminated && kd.d.len() < 8 {
        return Err(Error::invalid("kneading data needs at least 8 coefficients"));
    }
    let coeffs: Vec<f64> = if terminated {
        kd.d[..kd.d.len() - 1].iter().map(|&x| x as f64).collect()
    } else {
        kd.d.iter().map(|&x| x as f64).collect()
    };
    let n = coeffs.len() - 1;
    let upper = 1.0 - tol;
    let cells = 4096;
    let mut root = None;
    let mut t0 = 0.0;
    let mut f0 = 1.0;
    for i in 1..=cells {
        let t1 = upper * i as f64 / cells as f64;
        let f1 = horner(&coeffs, t1).0;
        if f1 == 0.0 || (f1 < 0.0) != (f0 < 0.0) {
            root = Some(crate::numeric::bisect(|t| horner(&coeffs, t).0, t0, t1, tol * 1e-3));
            break;
        }
        t0 = t1;
        f0 = f1;
    }
    let base = EntropyResult {
        value: 0.0,
        value_lo: 0.0,
        error_radius: tol,
        method: EntropyMethod::KneadRoot,
        renorm_depth: 0,
        no_root: true,
        superattracting: terminated,
    };
    let Some(s) = root else {
        return Ok(base);
    };
    let slope = horner(&coeffs, s).1.abs();
    let tail = if terminated {
        0.0
    } else {
        s.powi(n as i32 + 1) / (1.0 - s)
    };
    let ds = if slope > 0.0 { tail / slope } else { f64::INFINITY };
    Ok(EntropyResult {
        value: -s.ln(),
        error_radius: (ds + tol * 1e-3) / s,
        no_root: false,
        ..base
    })
}

/// Parity-twisted lexicographic order on kneading sequences, oriented so
/// that larger entropy means larger sequence.
pub fn itinerary_compare(x: &Itinerary, y: &Itinerary) -> KneadOrder {
    let n = x.len().min(y.len());
    let limit = x.reliable_len().min(y.reliable_len());
    let mut theta: i8 = 1;
    for i in 0..n {
        let (a, b) = (x.symbols[i], y.symbols[i]);
        if i >= limit {
            return KneadOrder::Incomparable;
        }
        if a != b {
            let pa = -a.sign() * theta;
            let pb = -b.sign() * theta;
            return match pa.cmp(&pb) {
                Ordering::Less => KneadOrder::Less,
                Ordering::Greater => KneadOrder::Greater,
                Ordering::Equal => KneadOrder::Equal,
            };
        }
        theta *= a.sign();
    }
    KneadOrder::Equal
}

/// `L R R R …` of length `n`, the kneading of the Chebyshev map `x² − 2`.
pub fn chebyshev(n: usize) -> Itinerary {
    let mut symbols = vec![Symbol::R; n.max(1)];
    symbols[0] = Symbol::L;
    Itinerary {
        symbols,
        terminated: false,
        ambiguous_at: None,
    }
}

/// Substitute `inner` into the renormalisation pattern with block `block`.
///
/// Position `q·p + r` (with `p = block.len() + 1`) carries `block[r]` for
/// `r < p − 1` and `Θ·inner[q]` at the block end, where `Θ` is the sign
/// product of the block.
pub fn star(block: &[Symbol], inner: &Itinerary) -> Itinerary {
    let theta: i8 = block.iter().map(|s| s.sign()).product();
    let p = block.len() + 1;
    let mut symbols = Vec::with_capacity(p * inner.len());
    for &s in &inner.symbols {
        symbols.extend_from_slice(block);
        symbols.push(Symbol::from_sign(theta * s.sign()));
    }
    Itinerary {
        symbols,
        terminated: inner.terminated,
        ambiguous_at: inner.ambiguous_at.map(|q| q * p + p - 1),
    }
}

/// Inverse of [`star`] when `it` has the block structure over its reliable
/// prefix; `None` otherwise or when not a single block is complete.
pub fn unstar(it: &Itinerary, block: &[Symbol]) -> Option<Itinerary> {
    let p = block.len() + 1;
    let limit = it.reliable_len();
    let theta: i8 = block.iter().map(|s| s.sign()).product();
    let mut inner = Vec::with_capacity(it.len() / p);
    for (i, &s) in it.symbols.iter().enumerate() {
        let r = i % p;
        if r + 1 == p {
            inner.push(Symbol::from_sign(theta * s.sign()));
        } else if s != block[r] && i < limit {
            return None;
        }
    }
    if inner.is_empty() {
        return None;
    }
    let terminated = it.terminated && it.len() % p == 0;
    Some(Itinerary {
        symbols: inner,
        terminated,
        ambiguous_at: it.ambiguous_at.map(|i| i / p),
    })
}

/// Period-doubling deflation: defined when every even position is `L`.
pub fn deflate(it: &Itinerary) -> Option<Itinerary> {
    unstar(it, &[Symbol::L])
}

/// Period-doubling inflation, the inverse of [`deflate`].
pub fn inflate(it: &Itinerary) -> Itinerary {
    star(&[Symbol::L], it)
}

/// Prefix of length `n` of the kneading sequence at the accumulation of
/// period doubling, the fixed point of [`inflate`].
pub fn feigenbaum(n: usize) -> Itinerary {
    let mut k = Itinerary::from_symbols(vec![Symbol::L]).expect("nonempty");
    while k.len() < n {
        k = inflate(&k);
    }
    k.truncated(n)
}

/// `inflate` applied `m` times to the Chebyshev sequence, truncated to `n`.
pub fn band_merging_target(m: u32, n: usize) -> Itinerary {
    let inner = chebyshev(n.div_ceil(1 << m) + 1);
    let mut k = inner;
    for _ in 0..m {
        k = inflate(&k);
    }
    k.truncated(n)
}
