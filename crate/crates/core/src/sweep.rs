//! Parameter sweeps over a uniform grid, evaluated in parallel with
//! deterministic output and an optional on-disk entropy cache.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheKey, EntropyCache};
use crate::critical_orbit::{lyapunov_estimate, transversality_q, wr_statistic, WrValue};
use crate::entropy::{quad_entropy, EntropyResult};
use crate::error::{Error, Result};
use crate::export::{export, Format, SweepRecord};
use crate::holder::{estimate_local_exponent, Side};
use crate::maps::check_quadratic;
use crate::parallel::par_map;
use crate::precision::{PrecisionContext, DEFAULT_ITERS};
use crate::renorm::detect_window;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Entropy,
    Lyapunov,
    Wr,
    Windows,
    Holder,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entropy" => Ok(Task::Entropy),
            "lyapunov" => Ok(Task::Lyapunov),
            "wr" => Ok(Task::Wr),
            "windows" => Ok(Task::Windows),
            "holder" => Ok(Task::Holder),
            other => Err(Error::invalid(format!("unknown sweep task {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lo: f64,
    pub hi: f64,
    pub grid: usize,
    pub depth: usize,
    pub bits: usize,
    pub iters: usize,
    pub threads: usize,
    pub tasks: BTreeSet<Task>,
    /// Orbit length for the Lyapunov, transversality and WR columns.
    pub orbit_steps: usize,
    pub delta: f64,
    pub max_period: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub cache: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(lo: f64, hi: f64, grid: usize) -> Self {
        SweepConfig {
            lo,
            hi,
            grid,
            depth: crate::precision::NATIVE_DEPTH,
            bits: 53,
            iters: DEFAULT_ITERS,
            threads: 1,
            tasks: [Task::Entropy].into_iter().collect(),
            orbit_steps: 1000,
            delta: 0.05,
            max_period: 12,
            output: None,
            format: Format::Csv,
            cache: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_quadratic(self.lo)?;
        check_quadratic(self.hi)?;
        if !(self.lo < self.hi) {
            return Err(Error::invalid("sweep range needs lo < hi"));
        }
        if self.grid == 0 {
            return Err(Error::invalid("grid must be at least 1"));
        }
        if self.threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        if self.tasks.is_empty() {
            return Err(Error::invalid("no sweep tasks selected"));
        }
        if self.orbit_steps == 0 || !(self.delta > 0.0) {
            return Err(Error::invalid("orbit steps and delta must be positive"));
        }
        Ok(())
    }

    pub fn context(&self) -> Result<PrecisionContext> {
        Ok(PrecisionContext::from_bits(self.bits)?
            .with_depth(self.depth)
            .with_iters(self.iters))
    }

    /// Grid point `i`; the last point is exactly `hi`.
    pub fn point(&self, i: usize) -> f64 {
        if self.grid == 1 {
            return self.lo;
        }
        if i + 1 == self.grid {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * i as f64 / (self.grid - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    /// Points where a requested computation failed.
    pub flagged: usize,
    pub cache_hits: usize,
    pub warnings: Vec<String>,
}

struct PointResult {
    record: SweepRecord,
    fresh: Option<EntropyResult>,
    hit: bool,
    failed: bool,
}

fn evaluate(cfg: &SweepConfig, ctx: &PrecisionContext, cache: Option<&EntropyCache>, a: f64) -> PointResult {
    let mut rec = SweepRecord::empty(a);
    let mut failed = false;
    let mut fresh = None;
    let mut hit = false;
    if cfg.tasks.contains(&Task::Entropy) {
        let key = CacheKey::new(a, cfg.depth, ctx.bits());
        let cached = cache.and_then(|c| c.get(&key));
        let h = match cached {
            Some(h) => {
                hit = true;
                Ok(h)
            }
            None => quad_entropy(a, cfg.depth, cfg.iters, ctx).inspect(|h| fresh = Some(*h)),
        };
        match h {
            Ok(h) => {
                rec.h = Some(h.value);
                rec.h_err = Some(h.error_radius);
            }
            Err(_) => failed = true,
        }
    }
    if cfg.tasks.contains(&Task::Lyapunov) {
        match lyapunov_estimate(a, cfg.orbit_steps, ctx) {
            Ok(l) => {
                rec.lambda_gap = Some(l.gap);
                rec.lambda = l.converged.then_some(l.last);
            }
            // a critical hit before two steps leaves nothing to report
            Err(Error::NotResolved(_)) => {}
            Err(_) => failed = true,
        }
        rec.q = transversality_q(a, cfg.orbit_steps).ok().filter(|q| q.is_finite());
    }
    if cfg.tasks.contains(&Task::Wr) {
        match wr_statistic(a, cfg.delta, cfg.orbit_steps, ctx) {
            Ok(WrValue::Finite(v)) => rec.wr = Some(v),
            Ok(WrValue::Superattracting) => rec.wr = Some(f64::NEG_INFINITY),
            Err(_) => failed = true,
        }
    }
    if cfg.tasks.contains(&Task::Windows) {
        match detect_window(a, cfg.max_period) {
            Ok(Some(w)) => {
                rec.window_period = Some(w.period);
                rec.window_center = Some(w.center);
            }
            Ok(None) => {}
            Err(_) => failed = true,
        }
    }
    if cfg.tasks.contains(&Task::Holder) {
        match estimate_local_exponent(a, Side::Both, 1e-3, 0.5, 12, ctx, 1) {
            Ok(e) if e.reliable => rec.holder = e.slope,
            Ok(_) => {}
            Err(_) => failed = true,
        }
    }
    PointResult {
        record: rec,
        fresh,
        hit,
        failed,
    }
}

/// Evaluate every grid point; results are independent of the thread count.
/// Writes the output file when the configuration names one.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let ctx = cfg.context()?;
    let mut warnings = Vec::new();
    let mut cache = match &cfg.cache {
        Some(p) => {
            let c = EntropyCache::open(p, ctx.bits())?;
            warnings.extend(c.warnings.iter().cloned());
            Some(c)
        }
        None => None,
    };
    let results = par_map(cfg.grid, cfg.threads, |i| {
        evaluate(cfg, &ctx, cache.as_ref(), cfg.point(i))
    });
    let mut records = Vec::with_capacity(results.len());
    let mut new_entries = Vec::new();
    let (mut flagged, mut hits) = (0, 0);
    for r in results {
        flagged += usize::from(r.failed);
        hits += usize::from(r.hit);
        if let Some(h) = r.fresh {
            new_entries.push((CacheKey::new(r.record.a, cfg.depth, ctx.bits()), h));
        }
        records.push(r.record);
    }
    if let Some(c) = cache.as_mut() {
        c.append(&new_entries)?;
    }
    if let Some(path) = &cfg.output {
        export(&records, cfg.format, path)?;
    }
    Ok(SweepOutcome {
        records,
        flagged,
        cache_hits: hits,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::render;
    use std::f64::consts::LN_2;

    #[test]
    fn staircase_endpoints() {
        let mut cfg = SweepConfig::new(-2.0, 0.25, 65);
        cfg.threads = 4;
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.records.len(), 65);
        assert_eq!(out.flagged, 0);
        let first = &out.records[0];
        assert_eq!(first.a, -2.0);
        assert!((first.h.unwrap() - LN_2).abs() < 1e-9);
        let last = out.records.last().unwrap();
        assert_eq!(last.a, 0.25);
        assert_eq!(last.h, Some(0.0));
        assert!(out.records.windows(2).all(|w| w[0].a < w[1].a));
        assert!(out.records.iter().all(|r| r.h_err.unwrap() > 0.0));
    }

    #[test]
    fn single_point_matches_direct_entropy() {
        let cfg = SweepConfig::new(-1.8, -1.7, 1);
        let out = run_sweep(&cfg).unwrap();
        let direct = quad_entropy(-1.8, cfg.depth, cfg.iters, &cfg.context().unwrap()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].h, Some(direct.value));
        assert_eq!(out.records[0].h_err, Some(direct.error_radius));
    }

    #[test]
    fn output_independent_of_threads() {
        let mut cfg = SweepConfig::new(-1.95, -1.2, 97);
        cfg.tasks = [Task::Entropy, Task::Lyapunov, Task::Wr, Task::Windows]
            .into_iter()
            .collect();
        cfg.orbit_steps = 300;
        let texts: Vec<String> = [1, 3, 8]
            .iter()
            .map(|&t| {
                cfg.threads = t;
                render(&run_sweep(&cfg).unwrap().records, Format::Csv).unwrap()
            })
            .collect();
        assert_eq!(texts[0], texts[1]);
        assert_eq!(texts[0], texts[2]);
    }

    #[test]
    fn warm_cache_matches_cold() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = SweepConfig::new(-2.0, -1.0, 129);
        cfg.cache = Some(dir.path().join("cache.bin"));
        cfg.threads = 4;
        let cold = run_sweep(&cfg).unwrap();
        assert_eq!(cold.cache_hits, 0);
        let warm = run_sweep(&cfg).unwrap();
        assert_eq!(warm.cache_hits, 129);
        assert_eq!(
            render(&cold.records, Format::Json).unwrap(),
            render(&warm.records, Format::Json).unwrap()
        );
    }

    #[test]
    fn superattracting_wr_flag() {
        let c = crate::renorm::superattracting_parameters(3, -1.8, -1.7).unwrap()[0];
        let mut cfg = SweepConfig::new(c, -1.7, 1);
        cfg.tasks = [Task::Wr].into_iter().collect();
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.records[0].wr, Some(f64::NEG_INFINITY));
    }

    #[test]
    fn invalid_configs() {
        assert!(run_sweep(&SweepConfig::new(-1.0, -2.0, 10)).is_err());
        assert!(run_sweep(&SweepConfig::new(-3.0, -2.0, 10)).is_err());
        assert!(run_sweep(&SweepConfig::new(-2.0, -1.0, 0)).is_err());
        let mut c = SweepConfig::new(-2.0, -1.0, 10);
        c.threads = 0;
        assert!(run_sweep(&c).is_err());
        assert_eq!("Holder".parse::<Task>().unwrap(), Task::Holder);
        assert!("speed".parse::<Task>().is_err());
    }
}
