use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use entroscope::critical_orbit::{attracting_cycle, critical_stats, lyapunov_from_stats, wr_statistic, WrValue};
use entroscope::entropy::{lap_entropy_estimate, quad_entropy, tent_entropy};
use entroscope::export::{export, float, read_records, render, Format};
use entroscope::holder::{
    estimate_local_exponent, holder_at_a_f, parabolic_flatness_fit, uniform_holder_fit, HolderSample, Side,
};
use entroscope::kneading::quad_itinerary;
use entroscope::parallel::available_threads;
use entroscope::renorm::{band_merging_cascade, detect_window, feigenbaum_a_f, superstable_cascade};
use entroscope::sweep::{run_sweep, SweepConfig, Task};
use entroscope::tent_dynamics::{periodic_tent_slopes, safe_elements};
use entroscope::{Error, FamilyParam, ParamValue, PrecisionContext};

#[derive(Parser)]
#[command(
    name = "entroscope",
    version,
    about = "Entropy, kneading and renormalisation numerics for x² + a and 1 − b|x|"
)]
struct Cli {
    /// Working precision in bits; 53 selects native doubles.
    #[arg(long, global = true, default_value_t = 53)]
    prec: usize,
    /// Symbolic depth, or the number of cascade rows for `cascade`.
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, env = "ENTROSCOPE_CACHE")]
    cache: Option<PathBuf>,
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    #[arg(long, global = true)]
    csv: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Topological entropy of x² + a.
    Entropy(EntropyArgs),
    /// Tent-family slopes: entropy, periodic slopes, safe sets.
    Tent(TentArgs),
    /// Critical-orbit exponent, transversality sum and close-return statistic.
    Lyapunov(LyapunovArgs),
    /// Local Hölder exponent of the entropy function.
    Holder(HolderArgs),
    /// Flatness of the entropy function at a saddle-node parameter.
    Parabolic(ParabolicArgs),
    /// Band-merging cascade and its accumulation point.
    Cascade(CascadeArgs),
    /// Renormalisation window containing a parameter.
    Windows(WindowsArgs),
    /// Uniform Hölder envelope over a parameter range.
    Uniform(UniformArgs),
    /// Evaluate selected quantities over a parameter grid.
    Sweep(SweepArgs),
    /// Convert a record file between CSV and JSON.
    Export(ExportArgs),
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long)]
    iters: Option<usize>,
    /// `knead` (default) or `lap`.
    #[arg(long, default_value = "knead")]
    method: String,
    /// Iterate used by the lap-count method.
    #[arg(long, default_value_t = 18)]
    laps: usize,
}

#[derive(Args)]
struct TentArgs {
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Slopes whose turning point has this exact period.
    #[arg(long)]
    periodic: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    range: Option<Vec<f64>>,
    /// Safe preimages of the turning point up to this depth.
    #[arg(long)]
    safe: Option<usize>,
}

#[derive(Args)]
struct LyapunovArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Number of trailing λ values reported.
    #[arg(long, default_value_t = 10)]
    tail: usize,
}

#[derive(Args)]
struct HolderArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value = "both")]
    side: String,
    #[arg(long, default_value_t = 1e-3)]
    t0: f64,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 20)]
    count: usize,
}

#[derive(Args)]
struct ParabolicArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value = "R")]
    side: String,
    /// Also fit the log-corrected model.
    #[arg(long)]
    log_correction: bool,
    /// Largest offset, as a power of two exponent.
    #[arg(long, default_value_t = 3)]
    from_exp: i32,
    #[arg(long, default_value_t = 12)]
    to_exp: i32,
}

#[derive(Args)]
struct CascadeArgs {
    /// Report the superattracting period-doubling parameters instead.
    #[arg(long)]
    superstable: bool,
}

#[derive(Args)]
struct WindowsArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 12)]
    max_period: usize,
}

#[derive(Args)]
struct UniformArgs {
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    range: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    #[arg(long, default_value_t = 200_000)]
    pairs: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    range: Vec<f64>,
    #[arg(long)]
    grid: usize,
    /// Comma-separated subset of entropy, lyapunov, wr, windows, holder.
    #[arg(long, default_value = "entropy")]
    tasks: String,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    orbit_steps: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 12)]
    max_period: usize,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    format: Option<String>,
}

/// A command's result: a JSON document plus an optional table for `--csv`.
struct Report {
    json: Value,
    table: Option<(String, Vec<String>)>,
    partial: bool,
}

impl Report {
    fn json(json: Value) -> Self {
        Report {
            json,
            table: None,
            partial: false,
        }
    }

    fn with_table(mut self, header: &str, rows: Vec<String>) -> Self {
        self.table = Some((header.to_string(), rows));
        self
    }
}

/// Printed directly when a command already wrote its own output.
enum Outcome {
    Report(Report),
    Text(String, bool),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::OutOfRange { .. } => 2,
        Error::Io(_) => 4,
        _ => 1,
    }
}

impl Cli {
    fn context(&self) -> Result<PrecisionContext, Error> {
        let ctx = PrecisionContext::from_bits(self.prec)?;
        Ok(match self.depth {
            Some(d) => ctx.with_depth(d),
            None => ctx,
        })
    }

    fn threads(&self) -> usize {
        self.threads.unwrap_or_else(available_threads).max(1)
    }

    fn format(&self, default: Format) -> Format {
        if self.csv {
            Format::Csv
        } else if self.json {
            Format::Json
        } else {
            default
        }
    }
}

fn range(v: &[f64]) -> Result<(f64, f64), Error> {
    match v {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(Error::InvalidArgument("--range takes two values".into())),
    }
}

fn samples_table(samples: &[HolderSample]) -> Vec<String> {
    samples
        .iter()
        .map(|s| format!("{},{},{},{}", float(s.t), float(s.dh), float(s.err), s.used))
        .collect()
}

fn heuristic_label(a: f64, superattracting: bool, lambda_lower: Option<f64>, converged: bool) -> &'static str {
    if superattracting {
        "window-center"
    } else if attracting_cycle(a, 64).is_some() {
        "window-interior"
    } else if converged && lambda_lower.is_some_and(|l| l > 0.0) {
        "apparently-non-flat"
    } else {
        "undetermined"
    }
}

fn entropy_cmd(cli: &Cli, args: &EntropyArgs) -> Result<Outcome, Error> {
    let ctx = cli.context()?;
    let r = match args.method.as_str() {
        "knead" => quad_entropy(args.a, ctx.depth(), args.iters.unwrap_or(ctx.iters()), &ctx)?,
        "lap" => lap_entropy_estimate(FamilyParam::quadratic(args.a)?, args.laps)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown method {other:?}; expected knead or lap"
            )))
        }
    };
    let itinerary = quad_itinerary(ParamValue::from(args.a), ctx.depth().min(64), &ctx);
    let json = json!({
        "a": args.a,
        "h": r.value,
        "err": r.error_radius,
        "method": r.method,
        "m": r.renorm_depth,
        "superattracting": r.superattracting,
        "no_root": r.no_root,
        "kneading": itinerary.to_string(),
    });
    let row = format!(
        "{},{},{},{:?},{}",
        float(args.a),
        float(r.value),
        float(r.error_radius),
        r.method,
        r.renorm_depth
    );
    Ok(Outcome::Report(
        Report::json(json).with_table("a,h,err,method,m", vec![row]),
    ))
}

fn tent_cmd(args: &TentArgs) -> Result<Outcome, Error> {
    if let Some(p) = args.periodic {
        let (lo, hi) = match &args.range {
            Some(r) => range(r)?,
            None => (1.0 + 1e-9, 2.0),
        };
        let slopes = periodic_tent_slopes(p, lo, hi)?;
        let rows = slopes.iter().map(|b| float(*b)).collect();
        return Ok(Outcome::Report(Report::json(json!(slopes)).with_table("b", rows)));
    }
    let b = args
        .b
        .ok_or_else(|| Error::InvalidArgument("tent needs --b or --periodic".into()))?;
    if let Some(n) = args.safe {
        let set = safe_elements(b, n)?;
        let rows = set.elements.iter().map(|x| float(*x)).collect();
        return Ok(Outcome::Report(Report::json(json!(set.elements)).with_table("x", rows)));
    }
    let h = tent_entropy(b)?;
    let row = format!("{},{},{}", float(b), float(h.value), float(h.error_radius));
    Ok(Outcome::Report(
        Report::json(json!({"b": b, "h": h.value, "err": h.error_radius})).with_table("b,h,err", vec![row]),
    ))
}

fn lyapunov_cmd(cli: &Cli, args: &LyapunovArgs) -> Result<Outcome, Error> {
    let ctx = cli.context()?;
    let stats = critical_stats(args.a, args.n, &ctx)?;
    let est = lyapunov_from_stats(&stats).ok();
    let wr = wr_statistic(args.a, args.delta, args.n, &ctx)?;
    let last = stats.last();
    let from = (last + 1).saturating_sub(args.tail).max(1);
    let tail: Vec<(usize, f64)> = (from..=last).map(|j| (j, stats.lambda_n[j])).collect();
    let superattracting = matches!(wr, WrValue::Superattracting) || stats.critical_hit.is_some();
    let label = heuristic_label(
        args.a,
        superattracting,
        est.map(|e| e.lower),
        est.is_some_and(|e| e.converged),
    );
    let json = json!({
        "a": args.a,
        "n": last,
        "lambda_tail": tail.iter().map(|(j, l)| json!({"n": j, "lambda": l})).collect::<Vec<_>>(),
        "lambda_lower": est.map(|e| e.lower),
        "lambda_upper": est.map(|e| e.upper),
        "converged": est.is_some_and(|e| e.converged),
        "q": stats.q_n[last],
        "wr": match wr {
            WrValue::Finite(v) => json!(v),
            WrValue::Superattracting => json!("-inf"),
        },
        "critical_hit": stats.critical_hit,
        "label": label,
    });
    let rows = tail.iter().map(|(j, l)| format!("{j},{}", float(*l))).collect();
    Ok(Outcome::Report(Report::json(json).with_table("n,lambda", rows)))
}

fn holder_cmd(cli: &Cli, args: &HolderArgs) -> Result<Outcome, Error> {
    let ctx = cli.context()?;
    let side: Side = args.side.parse()?;
    let est = estimate_local_exponent(args.a, side, args.t0, args.ratio, args.count, &ctx, cli.threads())?;
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    let rows = samples_table(&est.samples);
    Ok(Outcome::Report(
        Report::json(json!(est)).with_table("t,dh,err,used", rows),
    ))
}

fn parabolic_cmd(cli: &Cli, args: &ParabolicArgs) -> Result<Outcome, Error> {
    let bits = if cli.prec < 256 { 256 } else { cli.prec };
    let ctx = PrecisionContext::extended(bits)?.with_depth(cli.depth.unwrap_or(1024));
    let side: Side = args.side.parse()?;
    if args.to_exp <= args.from_exp {
        return Err(Error::InvalidArgument("need from-exp < to-exp".into()));
    }
    let grid: Vec<f64> = (args.from_exp..=args.to_exp).map(|k| 2f64.powi(-k)).collect();
    let fit = parabolic_flatness_fit(args.a, side, &grid, args.log_correction, &ctx, cli.threads())?;
    let rows = samples_table(&fit.samples);
    Ok(Outcome::Report(
        Report::json(json!(fit)).with_table("t,dh,err,used", rows),
    ))
}

fn cascade_cmd(cli: &Cli, args: &CascadeArgs) -> Result<Outcome, Error> {
    let depth = cli.depth.unwrap_or(8);
    if args.superstable {
        let c = superstable_cascade(depth)?;
        let rows = c
            .s_m
            .iter()
            .enumerate()
            .map(|(m, s)| format!("{m},{}", float(*s)))
            .collect();
        return Ok(Outcome::Report(Report::json(json!(c)).with_table("m,s_m", rows)));
    }
    let ctx = PrecisionContext::from_bits(cli.prec)?;
    let table = band_merging_cascade(depth, &ctx)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    let acc = feigenbaum_a_f(&table).ok();
    let holder = holder_at_a_f(&table).ok();
    let mut doc = json!(table);
    doc["accumulation"] = json!(acc);
    doc["holder_at_a_f"] = json!(holder);
    let rows = (0..table.rows())
        .map(|m| {
            let ratio = m
                .checked_sub(1)
                .and_then(|i| table.ratios.get(i))
                .map(|r| float(*r))
                .unwrap_or_default();
            format!(
                "{m},{},{},{},{ratio}",
                float(table.a_m[m]),
                float(table.a_m_lo[m]),
                float(table.a_m_err[m])
            )
        })
        .collect();
    let mut report = Report::json(doc).with_table("m,a_m,a_m_lo,a_m_err,ratio", rows);
    report.partial = !table.warnings.is_empty();
    Ok(Outcome::Report(report))
}

fn windows_cmd(args: &WindowsArgs) -> Result<Outcome, Error> {
    let w = detect_window(args.a, args.max_period)?;
    let row = match &w {
        Some(w) => format!(
            "{},{},{},{},{},{}",
            float(args.a),
            w.period,
            float(w.left),
            float(w.right),
            float(w.center),
            w.feig_depth
        ),
        None => format!("{},,,,,", float(args.a)),
    };
    let json = json!({"a": args.a, "window": w});
    Ok(Outcome::Report(
        Report::json(json).with_table("a,period,left,right,center,feig_depth", vec![row]),
    ))
}

fn uniform_cmd(cli: &Cli, args: &UniformArgs) -> Result<Outcome, Error> {
    let (lo, hi) = range(&args.range)?;
    let ctx = cli.context()?;
    let fit = uniform_holder_fit(lo, hi, args.grid, args.pairs, cli.seed, &ctx, cli.threads())?;
    let row = format!(
        "{},{},{},{}",
        float(fit.c),
        float(fit.beta),
        fit.pairs_used,
        fit.flat_pairs
    );
    Ok(Outcome::Report(
        Report::json(json!(fit)).with_table("c,beta,pairs_used,flat_pairs", vec![row]),
    ))
}

fn sweep_cmd(cli: &Cli, args: &SweepArgs) -> Result<Outcome, Error> {
    let (lo, hi) = range(&args.range)?;
    let mut cfg = SweepConfig::new(lo, hi, args.grid);
    cfg.bits = cli.prec;
    if let Some(d) = cli.depth {
        cfg.depth = d;
    }
    if let Some(k) = args.iters {
        cfg.iters = k;
    }
    cfg.threads = cli.threads();
    cfg.tasks = args
        .tasks
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse::<Task>)
        .collect::<Result<_, _>>()?;
    cfg.orbit_steps = args.orbit_steps;
    cfg.delta = args.delta;
    cfg.max_period = args.max_period;
    cfg.output = args.output.clone();
    cfg.format = cli.format(Format::Csv);
    cfg.cache = cli.cache.clone();
    let out = run_sweep(&cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let partial = out.flagged > 0;
    if partial {
        eprintln!("warning: {} grid points flagged", out.flagged);
    }
    match &cfg.output {
        Some(path) => {
            let summary = json!({
                "points": out.records.len(),
                "flagged": out.flagged,
                "cache_hits": out.cache_hits,
                "output": path,
            });
            Ok(Outcome::Text(format!("{summary:#}\n"), partial))
        }
        None => Ok(Outcome::Text(render(&out.records, cfg.format)?, partial)),
    }
}

fn export_cmd(cli: &Cli, args: &ExportArgs) -> Result<Outcome, Error> {
    let records = read_records(&args.input)?;
    let format = match &args.format {
        Some(f) => f.parse()?,
        None => match args.output.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            _ => cli.format(Format::Csv),
        },
    };
    export(&records, format, &args.output)?;
    Ok(Outcome::Text(
        format!("{}\n", json!({"records": records.len(), "output": args.output})),
        false,
    ))
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    match &cli.command {
        Command::Entropy(a) => entropy_cmd(cli, a),
        Command::Tent(a) => tent_cmd(a),
        Command::Lyapunov(a) => lyapunov_cmd(cli, a),
        Command::Holder(a) => holder_cmd(cli, a),
        Command::Parabolic(a) => parabolic_cmd(cli, a),
        Command::Cascade(a) => cascade_cmd(cli, a),
        Command::Windows(a) => windows_cmd(a),
        Command::Uniform(a) => uniform_cmd(cli, a),
        Command::Sweep(a) => sweep_cmd(cli, a),
        Command::Export(a) => export_cmd(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Text(text, partial)) => {
            print!("{text}");
            ExitCode::from(if partial { 3 } else { 0 })
        }
        Ok(Outcome::Report(r)) => {
            match (cli.csv, &r.table) {
                (true, Some((header, rows))) => {
                    let mut out = String::new();
                    let _ = writeln!(out, "{header}");
                    for row in rows {
                        let _ = writeln!(out, "{row}");
                    }
                    print!("{out}");
                }
                _ => println!("{:#}", r.json),
            }
            ExitCode::from(if r.partial { 3 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
