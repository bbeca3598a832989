//! Command-line experiment runner.
//!
//! Every subcommand reads a JSON [`ExperimentConfig`], applies flag
//! overrides and writes one CSV. The CSV starts with `#` comment lines
//! (schema, command, seed); the body depends only on the config and seed.
//!
//! Exit codes: 0 success, 2 config error, 3 regime rejection, 4 budget or
//! hit-count error, 1 anything else. Failures also print one JSON line on
//! standard error.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::asymptotics::{
    prediction_at_log, regime_select, horizon_rule, Hypothesis, Regime, RegimeConfig, SelectOptions,
    SignProb, HORIZON_CAP,
};
use crate::chain::simulate_path;
use crate::config::{ExperimentConfig, Level};
use crate::dist::{class_diagnostic, DiagnosticOptions, TailFn, TailModel};
use crate::error::{Error, Result};
use crate::law::{estimate_drift, CoefficientLaw, Marginal, Structure};
use crate::montecarlo::{
    self, auto_tune, conditional_big_jump_prob, estimate_tail_grid, BigJumpParams, Event, McOptions,
    Probe,
};
use crate::oracle::exact_distribution;
use crate::trace;

const SIGN_SEED_SALT: u64 = 0x51_6e_5f_70;
const DRIFT_DRAWS: usize = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "perpetuity", version, about = "Tail experiments for D_n = A_n D_{n-1} + B_n")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "PERPETUITY_WORKERS")]
    pub workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated levels, e.g. `e^8,e^10` or `100,1000`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub x: Option<Vec<String>>,
    /// Comma-separated horizons.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    /// Number of paths; accepts `1e6`.
    #[arg(long = "N", global = true, value_parser = parse_count)]
    pub n_paths: Option<u64>,
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Fill the `wall_time_s` column; output is then no longer reproducible.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Simulate one path; CSV trace, plus a binary trace when `trace` is configured.
    Simulate,
    /// Asymptotic tail predictions.
    Predict,
    /// Monte Carlo tail estimates.
    Estimate,
    /// Predictions joined with estimates.
    Compare,
    /// Heavy-tail class diagnostics.
    Diagnose,
    /// Conditional probability of a single big jump.
    Bigjump,
    /// Exact law of `D_n` for a finite joint law.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Predict => "predict",
            Command::Estimate => "estimate",
            Command::Compare => "compare",
            Command::Diagnose => "diagnose",
            Command::Bigjump => "bigjump",
            Command::Oracle => "oracle",
        }
    }
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(format!("not a count: {s}"))
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidModel(_) | Error::NanInput(_) | Error::InconclusiveRange { .. } => 2,
        Error::RegimeHypothesisViolated(_)
        | Error::Unsupported(_)
        | Error::DriftNotNegative { .. }
        | Error::NonIntegrableTail(_) => 3,
        Error::BudgetExceeded { .. } | Error::TooFewHits { .. } | Error::HorizonOverflow { .. } => 4,
        Error::EmptySelection { .. } | Error::Quadrature(_) | Error::Io(_) => 1,
    }
}

/// Parses `std::env::args`, runs, and returns the exit code.
pub fn main_from_env() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let line = serde_json::json!({
                "error": e.kind(),
                "exit_code": code,
                "command": cli.command.name(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            code
        }
    }
}

/// Config after flag overrides.
struct Job {
    cfg: ExperimentConfig,
    workers: usize,
    timing: bool,
    out: Option<PathBuf>,
}

fn resolve(common: &Common) -> Result<Job> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(xs) = &common.x {
        cfg.x_grid = xs.iter().map(|s| Level::parse(s)).collect::<Result<_>>()?;
    }
    if let Some(ns) = &common.n {
        cfg.n_grid = ns.clone();
    }
    if let Some(n) = common.n_paths {
        cfg.n_paths = n;
    }
    if common.c.is_some() {
        cfg.bigjump.c = common.c;
    }
    if common.epsilon.is_some() {
        cfg.bigjump.epsilon = common.epsilon;
    }
    cfg.validate()?;
    let workers = common.workers.or(cfg.workers).unwrap_or(1);
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    Ok(Job {
        out: common.out.clone().or_else(|| cfg.out.clone()),
        cfg,
        workers,
        timing: common.timing,
    })
}

impl Job {
    fn mc(&self, seed: u64) -> McOptions {
        McOptions {
            n_paths: self.cfg.n_paths,
            seed,
            workers: self.workers,
            d0: self.cfg.d0,
        }
    }

    fn elapsed(&self, t: Instant) -> String {
        if self.timing {
            format!("{:.3}", t.elapsed().as_secs_f64())
        } else {
            "NA".into()
        }
    }
}

/// CSV text with the comment header.
struct Table {
    head: Vec<String>,
    body: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(command: Command, job: &Job, columns: &[&str]) -> Result<Self> {
        let mut head = vec![
            "# schema=v1".to_string(),
            format!("# command={}", command.name()),
            format!("# seed={}", job.cfg.seed),
        ];
        if job.timing {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            head.push(format!("# generated_unix={now}"));
        }
        let mut body = csv::Writer::from_writer(Vec::new());
        body.write_record(columns).map_err(csv_err)?;
        Ok(Table { head, body })
    }

    fn comment(&mut self, line: impl Into<String>) {
        self.head.push(format!("# {}", line.into()));
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.body.write_record(fields).map_err(csv_err)
    }

    fn finish(self, out: Option<&PathBuf>) -> Result<()> {
        let body = self.body.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        let mut text = self.head.join("\n").into_bytes();
        text.push(b'\n');
        text.extend_from_slice(&body);
        match out {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(&text)?,
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn num(v: f64) -> String {
    v.to_string()
}

fn execute(cli: &Cli) -> Result<()> {
    let job = resolve(&cli.common)?;
    match cli.command {
        Command::Simulate => simulate(&job),
        Command::Predict => predict(&job),
        Command::Estimate => estimate(&job),
        Command::Compare => compare(&job),
        Command::Diagnose => diagnose(&job),
        Command::Bigjump => bigjump(&job),
        Command::Oracle => oracle(&job),
    }
}

fn model_arc(m: &TailModel) -> Arc<dyn TailFn> {
    Arc::new(m.clone())
}

/// Regime configuration for the job: the override when given, otherwise
/// automatic selection. `P{D_∞ > 0}` is estimated when the regime needs it.
fn regime_config(job: &Job) -> Result<RegimeConfig> {
    let law = job.cfg.law_arc();
    let select = SelectOptions {
        g_minus_constant: job.cfg.tolerances.g_minus_constant,
        ..Default::default()
    };
    let mut rc = match &job.cfg.regime {
        None => regime_select(&law, select)?,
        Some(o) => {
            let a = match o.a {
                Some(a) => a,
                None => {
                    let d = law.drift();
                    if d.analytic || o.regime == Regime::AtomAtZero {
                        d.value
                    } else {
                        estimate_drift(&law, DRIFT_DRAWS, job.cfg.seed).value
                    }
                }
            };
            let h = o.h.as_ref().map(model_arc).unwrap_or_else(|| law.marginal(Marginal::H));
            let mut rc = RegimeConfig::manual(o.regime, a, o.p0.unwrap_or(law.flags().p0), h);
            rc.p_plus = law.flags().p_plus;
            rc.f = Some(o.f.as_ref().map(model_arc).unwrap_or_else(|| law.marginal(Marginal::F)));
            rc.g = Some(law.marginal(Marginal::G));
            rc.g_plus = Some(
                o.g_plus
                    .as_ref()
                    .map(model_arc)
                    .unwrap_or_else(|| law.marginal(Marginal::GPlus)),
            );
            rc.g_minus = Some(
                o.g_minus
                    .as_ref()
                    .map(model_arc)
                    .unwrap_or_else(|| law.marginal(Marginal::GMinus)),
            );
            rc.prob_dinf_positive = match o.p_dinf_positive {
                Some(p) => SignProb::Known(p),
                None if o.regime == Regime::PositiveSignedB => SignProb::NeedsMc,
                None => SignProb::Known(1.0),
            };
            rc.hypotheses = vec![Hypothesis {
                name: "all".into(),
                status: "asserted by regime override".into(),
            }];
            rc
        }
    };
    if rc.prob_dinf_positive == SignProb::NeedsMc {
        let s = montecarlo::estimate_sign_prob(&law, &rc, job.mc(job.cfg.seed ^ SIGN_SEED_SALT))?;
        rc.prob_dinf_positive = SignProb::Estimated {
            value: s.positive.p_hat,
            lo: s.positive.ci95.0,
            hi: s.positive.ci95.1,
        };
    }
    Ok(rc)
}

fn describe_regime(t: &mut Table, rc: &RegimeConfig) {
    t.comment(format!("regime={} a={} p0={}", rc.regime, rc.a, rc.p0));
    if let SignProb::Estimated { value, lo, hi } = rc.prob_dinf_positive {
        t.comment(format!("p_dinf_positive={value} ci=[{lo},{hi}]"));
    }
    for h in &rc.hypotheses {
        t.comment(format!("hypothesis {}: {}", h.name, h.status));
    }
}

fn simulate(job: &Job) -> Result<()> {
    let n = *job.cfg.n_grid.last().expect("validated");
    let path = simulate_path(&job.cfg.law, n as usize, job.cfg.d0, job.cfg.seed)?;
    if let Some(p) = &job.cfg.trace {
        let f = std::fs::File::create(p)?;
        trace::write_binary(&path, std::io::BufWriter::new(f))?;
    }
    let mut buf = Vec::new();
    trace::write_csv(&path, &mut buf)?;
    match &job.out {
        Some(p) => std::fs::write(p, buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn predict(job: &Job) -> Result<()> {
    let rc = regime_config(job)?;
    let mut t = Table::new(
        Command::Predict,
        job,
        &["x", "n", "regime", "prediction", "lower_form", "range_lo", "range_hi", "ingredients"],
    )?;
    describe_regime(&mut t, &rc);
    let horizons: Vec<Option<u64>> = std::iter::once(None).chain(job.cfg.n_grid.iter().map(|&n| Some(n))).collect();
    for lvl in &job.cfg.x_grid {
        for &n in &horizons {
            for lower in [false, true] {
                let p = prediction_at_log(&rc, n, lvl.log_x, lower)?;
                let ing: Vec<String> = p.ingredients.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let (rlo, rhi) = p.range.map(|(a, b)| (num(a), num(b))).unwrap_or(("NA".into(), "NA".into()));
                t.row([
                    lvl.to_string(),
                    n.map_or("inf".into(), |n| n.to_string()),
                    rc.regime.to_string(),
                    num(p.value),
                    lower.to_string(),
                    rlo,
                    rhi,
                    ing.join(";"),
                ])?;
            }
        }
    }
    t.finish(job.out.as_ref())
}

/// One estimate per `(x, n)` plus one per `x` at the stationary horizon.
struct EstimateRow {
    level: Level,
    n: Option<u64>,
    est: montecarlo::TailEstimate,
}

fn estimate_rows(job: &Job, rc: &RegimeConfig) -> Result<(Vec<EstimateRow>, String)> {
    let mut probes = Vec::new();
    let mut keys = Vec::new();
    for lvl in &job.cfg.x_grid {
        let stationary = horizon_rule(rc, lvl.x, HORIZON_CAP)?;
        for n in std::iter::once(None).chain(job.cfg.n_grid.iter().map(|&n| Some(n))) {
            probes.push(Probe {
                n: n.unwrap_or(stationary),
                event: Event::d_above_log(lvl.log_x),
            });
            keys.push((*lvl, n));
        }
    }
    let t0 = Instant::now();
    let est = estimate_tail_grid(&job.cfg.law, &probes, job.mc(job.cfg.seed))?;
    let wall = job.elapsed(t0);
    let rows = keys
        .into_iter()
        .zip(est)
        .map(|((level, n), est)| EstimateRow { level, n, est })
        .collect();
    Ok((rows, wall))
}

fn estimate(job: &Job) -> Result<()> {
    let rc = regime_config(job)?;
    let (rows, wall) = estimate_rows(job, &rc)?;
    let mut t = Table::new(
        Command::Estimate,
        job,
        &["x", "n", "p_hat", "lo", "hi", "n_hits", "N", "horizon_n", "wall_time_s"],
    )?;
    describe_regime(&mut t, &rc);
    for r in rows {
        t.row([
            r.level.to_string(),
            r.n.map_or("inf".into(), |n| n.to_string()),
            num(r.est.p_hat),
            num(r.est.ci95.0),
            num(r.est.ci95.1),
            r.est.n_hits.to_string(),
            r.est.n_samples.to_string(),
            r.est.horizon_n.to_string(),
            wall.clone(),
        ])?;
    }
    t.finish(job.out.as_ref())
}

fn compare(job: &Job) -> Result<()> {
    let rc = regime_config(job)?;
    let (rows, wall) = estimate_rows(job, &rc)?;
    let mut t = Table::new(
        Command::Compare,
        job,
        &[
            "x", "n", "regime", "prediction", "p_hat", "lo", "hi", "ratio", "ratio_lo", "ratio_hi", "n_hits", "N",
            "horizon_n", "wall_time_s",
        ],
    )?;
    describe_regime(&mut t, &rc);
    for r in rows {
        let pred = prediction_at_log(&rc, r.n, r.level.log_x, false)?.value;
        t.row([
            r.level.to_string(),
            r.n.map_or("inf".into(), |n| n.to_string()),
            rc.regime.to_string(),
            num(pred),
            num(r.est.p_hat),
            num(r.est.ci95.0),
            num(r.est.ci95.1),
            num(r.est.p_hat / pred),
            num(r.est.ci95.0 / pred),
            num(r.est.ci95.1 / pred),
            r.est.n_hits.to_string(),
            r.est.n_samples.to_string(),
            r.est.horizon_n.to_string(),
            wall.clone(),
        ])?;
    }
    t.finish(job.out.as_ref())
}

/// Named one-dimensional models to diagnose.
fn diagnose_targets(cfg: &ExperimentConfig) -> Result<Vec<(String, TailModel)>> {
    if let Some(h) = cfg.regime.as_ref().and_then(|o| o.h.clone()) {
        return Ok(vec![("H".into(), h)]);
    }
    let scalar = |name: &str, s: &crate::law::ScalarLaw| (name.to_string(), s.log_abs().clone());
    Ok(match cfg.law.structure() {
        Structure::IndependentProduct { a, b } => vec![scalar("log|A|", a), scalar("log|B|", b)],
        Structure::BEqualsAEta { a, eta } => vec![scalar("log|A|", a), scalar("log|eta|", eta)],
        Structure::Custom { atoms } => {
            let pts = atoms
                .atoms()
                .iter()
                .map(|&((a, b), p)| ((1.0 + a.abs() + b.abs()).ln(), p))
                .collect();
            vec![("H".into(), TailModel::finite_support(pts)?)]
        }
    })
}

fn diagnose(job: &Job) -> Result<()> {
    let xs: Vec<f64> = match &job.cfg.diag_x_grid {
        Some(g) => g.clone(),
        None => job.cfg.x_grid.iter().map(|l| l.log_x).collect(),
    };
    let opts = DiagnosticOptions {
        tol: job.cfg.tolerances.diagnostic,
    };
    let mut t = Table::new(
        Command::Diagnose,
        job,
        &["component", "x", "shift_ratio", "conv_ratio", "sstar_ratio"],
    )?;
    let mut rows = Vec::new();
    for (name, model) in diagnose_targets(&job.cfg)? {
        let d = class_diagnostic(&model, &xs, &job.cfg.diag_y_grid, opts)?;
        t.comment(format!(
            "{name}: long_tailed={:?} subexponential={:?} strong_subexponential={:?}",
            d.long_tailed, d.subexponential, d.strong_subexponential
        ));
        for (x, s, c, ss) in d.rows() {
            rows.push([name.clone(), num(x), num(s), num(c), num(ss)]);
        }
    }
    for r in rows {
        t.row(r)?;
    }
    t.finish(job.out.as_ref())
}

fn bigjump_params(job: &Job, law: &CoefficientLaw, n: u64, t: &mut Table) -> Result<BigJumpParams> {
    let d = law.drift();
    let a = if d.analytic {
        d.value
    } else {
        estimate_drift(law, DRIFT_DRAWS, job.cfg.seed).value
    };
    let spec = job.cfg.bigjump;
    match (spec.c, spec.epsilon) {
        (Some(c), eps) => BigJumpParams::new(c, eps.unwrap_or(0.1 * a), a),
        (None, eps) => {
            let tune = auto_tune(law, n, a, job.cfg.n_paths.min(20_000), job.cfg.seed)?;
            t.comment(format!(
                "auto-tuned c={} window_rate={} minorant_rate={}",
                tune.params.c, tune.window_rate, tune.minorant_rate
            ));
            BigJumpParams::new(tune.params.c, eps.unwrap_or(tune.params.epsilon), a)
        }
    }
}

fn bigjump(job: &Job) -> Result<()> {
    let law = &job.cfg.law;
    let mut t = Table::new(
        Command::Bigjump,
        job,
        &[
            "x", "n", "c", "epsilon", "p_hat", "lo", "hi", "n_matched", "n_conditional", "tail_p_hat", "N",
            "overlaps", "wall_time_s",
        ],
    )?;
    if !(law.flags().a_positive && law.flags().b_nonnegative) {
        return Err(Error::RegimeHypothesisViolated(
            "big-jump events need A > 0 and B >= 0".into(),
        ));
    }
    let n_max = *job.cfg.n_grid.last().expect("validated");
    let params = bigjump_params(job, law, n_max, &mut t)?;
    for lvl in &job.cfg.x_grid {
        for &n in &job.cfg.n_grid {
            let t0 = Instant::now();
            let e = conditional_big_jump_prob(law, n, lvl.log_x, params, job.mc(job.cfg.seed))?;
            t.row([
                lvl.to_string(),
                n.to_string(),
                num(params.c),
                num(params.epsilon),
                num(e.conditional.p_hat),
                num(e.conditional.ci95.0),
                num(e.conditional.ci95.1),
                e.conditional.n_hits.to_string(),
                e.conditional.n_samples.to_string(),
                num(e.tail.p_hat),
                e.tail.n_samples.to_string(),
                e.overlaps.to_string(),
                job.elapsed(t0),
            ])?;
        }
    }
    t.finish(job.out.as_ref())
}

fn oracle(job: &Job) -> Result<()> {
    let atoms = job
        .cfg
        .law
        .as_discrete()
        .ok_or_else(|| Error::Config("oracle needs a law with finitely many atoms".into()))?;
    let mut t = Table::new(Command::Oracle, job, &["n", "value", "prob", "tail_above"])?;
    for &n in &job.cfg.n_grid {
        let d = exact_distribution(atoms, n, job.cfg.d0)?;
        let mut above = 0.0;
        let mut rows = Vec::with_capacity(d.support.len());
        for &(v, p) in d.support.iter().rev() {
            rows.push([n.to_string(), num(v), num(p), num(above)]);
            above += p;
        }
        for r in rows.into_iter().rev() {
            t.row(r)?;
        }
    }
    t.finish(job.out.as_ref())
}
