//! `qravi` — command-line driver for the risk-aware distributional value
//! iteration stack.
//!
//! Five subcommands cover the full experiment surface:
//!
//! * `train`     — one training run; writes `train_log.csv`, `episodes.csv`,
//!   checkpoints, and the resolved config echo.
//! * `eval`      — greedy (or uniform-random) evaluation of trained runs;
//!   writes a per-variant summary table plus per-episode rows.
//! * `pareto`    — a β × λ sweep of short training runs; writes the loss
//!   pairs with the non-dominated front marked.
//! * `kde-demo`  — density-estimator convergence study on a closed-form
//!   heavy-tailed distribution; writes per-sample-count error rows.
//! * `verify`    — operator contraction campaign, CVaR non-expansiveness
//!   probe, and fixed-point spot checks; writes per-trial rows and a
//!   key/value summary.
//!
//! Every command is deterministic given its flags: reruns produce
//! byte-identical CSVs. Outputs land under `--out` (default: the
//! `QRAVI_OUT` environment variable, falling back to `runs`).

mod config;

use config::{RunConfig, Scale, OUT_ROOT_ENV};
use qravi::agent::{self, EvalPolicy, UpdateRecord, Variant};
use qravi::demo::{
    kde_convergence_rows, TruncatedPareto, DEMO_BANDWIDTH, DEMO_BETAS, DEMO_B_LIST, DEMO_RESAMPLES,
};
use qravi::env::EnvConfig;
use qravi::net::load_checkpoint;
use qravi::tabular::{
    contraction_campaign, fixed_point_campaign, nonexpansiveness_probe, CampaignDims,
    ContractionRecord, FixedPointTrial, ProbeReport, TrialOutcome,
};
use qravi::{exec, Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: &str = "\
usage: qravi [--workers N] <command> [flags]

commands:
  train     run one training configuration
  eval      evaluate trained runs and tabulate summary metrics
  pareto    sweep risk.beta x risk.lambda and mark the non-dominated front
  kde-demo  density-estimator convergence study (closed-form reference)
  verify    contraction campaign, non-expansiveness probe, fixed-point checks

shared flags (train, pareto):
  --config FILE       flat key=value config file ('#' comments)
  --scale smoke|paper workload preset applied before the file
  --<section>.<key> V override any config key (e.g. --risk.beta 0.95)

run `qravi <command> --help` for the command's own flags.";

const TRAIN_HELP: &str = "\
usage: qravi train [--config FILE] [--scale smoke|paper] [--<section>.<key> V]...

Trains one agent and writes, under <out.dir>/<run.id>/:
  config_resolved.txt  full key=value echo (re-usable as --config)
  train_log.csv        one row per gradient update
  episodes.csv         one row per completed episode
  checkpoint.bin       final network + optimizer state
  checkpoint_<N>.bin   intermediate checkpoints (agent.checkpoint_every > 0)
A non-finite loss aborts the run, leaves failure.txt in the run directory,
and exits nonzero.";

const EVAL_HELP: &str = "\
usage: qravi eval (--run DIR | --checkpoint FILE)... [flags]

  --run DIR         a train output directory (checkpoint + config + log);
                    repeatable — rows share one summary table
  --checkpoint FILE a bare checkpoint; evaluated on the default environment,
                    loss columns left empty
  --seeds LIST      comma-separated evaluation seeds (default 0,5,10,15,20)
  --episodes N      episodes per seed (default 20)
  --policy P        greedy | uniform (default greedy)
  --traces          also write eval_traces.csv (one row per step)
  --out DIR         output directory (default $QRAVI_OUT or runs)

Writes eval_summary.csv (one row per input, success rate normalized by the
best row) and eval_episodes.csv. Loss columns are the means over the final
10% of each run's logged updates.";

const PARETO_HELP: &str = "\
usage: qravi pareto [--betas LIST] [--lambdas LIST] [train flags] [--out DIR]

  --betas LIST    comma-separated risk.beta grid (default 0.9,0.95)
  --lambdas LIST  comma-separated risk.lambda grid (default 0.1,0.3,0.5,0.7,0.9)

Trains every (beta, lambda) cell at the configured scale (default: smoke)
with a shared seed, records the final-10% mean quantile and risk losses, and
marks the non-dominated cells. Failed cells are recorded and skipped by the
front. Writes pareto.csv.";

const KDE_DEMO_HELP: &str = "\
usage: qravi kde-demo [flags]

  --b-list LIST   sample counts (default 100,1000,10000)
  --betas LIST    tail levels (default 0.9,0.95)
  --bandwidth H   fixed kernel bandwidth (default 0.3)
  --resamples N   resamples averaged per cell (default 20)
  --x-min X       reference distribution lower support point (default 0.05)
  --shape A       reference distribution tail exponent (default 1.5)
  --seed S        base seed (default 0)
  --out DIR       output directory (default $QRAVI_OUT or runs)

Samples a closed-form heavy-tailed distribution on (0,1], fits the density
estimator per sample count, and writes kde_demo.csv with the mean absolute
CVaR error against the analytic value.";

const VERIFY_HELP: &str = "\
usage: qravi verify [flags]

  --trials N       contraction trials per beta (default 1000)
  --betas LIST     tail levels (default 0.9,0.95)
  --gamma G        campaign discount (default 0.99)
  --seed S         base seed (default 0)
  --probe-pairs N  non-expansiveness probe pairs per beta (default 10000)
  --fp-trials N    fixed-point spot checks per beta (default 20)
  --fp-gamma G     fixed-point discount (default 0.95; geometric decay at
                   0.99 cannot reach tol 1e-6 inside the iteration budget)
  --out DIR        output directory (default $QRAVI_OUT or runs)

Writes verify.csv (one row per contraction trial; violations appear as
pass=false rows, never suppressed) and verify_summary.csv (key,value rows
for the campaign, probe, and fixed-point aggregates).";

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(argv: &[String]) -> Result<()> {
    // Normalize `--flag=value` to `--flag value` so both spellings work.
    let mut tokens: Vec<String> = Vec::with_capacity(argv.len());
    for arg in argv {
        match arg.strip_prefix("--").and_then(|rest| rest.split_once('=')) {
            Some((flag, value)) => {
                tokens.push(format!("--{flag}"));
                tokens.push(value.to_string());
            }
            None => tokens.push(arg.clone()),
        }
    }

    // The worker-pool flag is global; strip it before dispatch.
    if let Some(pos) = tokens.iter().position(|t| t == "--workers") {
        let n: usize = take_value(&tokens, pos, "--workers")?
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid("--workers expects a positive integer"))?;
        exec::configure_workers(n).map_err(Error::invalid)?;
        tokens.drain(pos..pos + 2);
    }

    let Some(command) = tokens.first() else {
        eprintln!("{USAGE}");
        return Err(Error::invalid("missing command"));
    };
    let rest = &tokens[1..];
    match command.as_str() {
        "train" => cmd_train(rest),
        "eval" => cmd_eval(rest),
        "pareto" => cmd_pareto(rest),
        "kde-demo" => cmd_kde_demo(rest),
        "verify" => cmd_verify(rest),
        "--help" | "help" => {
            println!("{USAGE}");
            Ok(())
        }
        other => {
            eprintln!("{USAGE}");
            Err(Error::invalid(format!("unknown command `{other}`")))
        }
    }
}

/// The value following flag at `pos`, or an error naming the flag.
fn take_value<'a>(tokens: &'a [String], pos: usize, flag: &str) -> Result<&'a str> {
    tokens
        .get(pos + 1)
        .map(|s| s.as_str())
        .ok_or_else(|| Error::invalid(format!("flag {flag} needs a value")))
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>> {
    let items: std::result::Result<Vec<T>, _> =
        s.split(',').map(|p| p.trim().parse::<T>()).collect();
    let items = items.map_err(|_| Error::invalid(format!("{flag} expects a comma-separated list, got `{s}`")))?;
    if items.is_empty() {
        return Err(Error::invalid(format!("{flag} must not be empty")));
    }
    Ok(items)
}

/// Default output root: `$QRAVI_OUT`, falling back to `runs`.
fn default_out_root() -> PathBuf {
    PathBuf::from(std::env::var(OUT_ROOT_ENV).unwrap_or_else(|_| "runs".to_string()))
}

/// Split command tokens into `(known flag, value)` pairs and config
/// overrides, then assemble the configuration in precedence order:
/// defaults, `--scale`, `--config`, explicit `--section.key` overrides.
fn build_config(tokens: &[String], help: &str) -> Result<RunConfig> {
    let mut scale: Option<Scale> = None;
    let mut file: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i].as_str() {
            "--help" => {
                println!("{help}");
                std::process::exit(0);
            }
            "--scale" => {
                scale = Some(take_value(tokens, i, "--scale")?.parse()?);
                i += 2;
            }
            "--config" => {
                file = Some(PathBuf::from(take_value(tokens, i, "--config")?));
                i += 2;
            }
            flag if flag.starts_with("--") && flag.contains('.') => {
                let key = flag.trim_start_matches("--").to_string();
                let value = take_value(tokens, i, flag)?.to_string();
                overrides.push((key, value));
                i += 2;
            }
            other => return Err(Error::invalid(format!("unknown flag `{other}`"))),
        }
    }

    let mut cfg = RunConfig::default();
    if let Some(s) = scale {
        cfg.apply_scale(s);
    }
    if let Some(path) = file {
        cfg.apply_file(&path)?;
    }
    for (key, value) in &overrides {
        cfg.set(key, value)?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// train

fn cmd_train(tokens: &[String]) -> Result<()> {
    let mut cfg = build_config(tokens, TRAIN_HELP)?;
    cfg.finalize()?;
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir)?;
    write_file(&dir.join("config_resolved.txt"), &cfg.resolved())?;

    match agent::train(&cfg.agent, &cfg.env, Some(&dir)) {
        Ok(out) => {
            out.log.write(&dir)?;
            let goals: usize = out.log.episodes.iter().map(|e| e.goals).sum();
            println!(
                "train: {} steps, {} updates, {} episodes, {} goals -> {}",
                cfg.agent.total_env_steps,
                out.log.updates.len(),
                out.log.episodes.len(),
                goals,
                dir.display()
            );
            Ok(())
        }
        Err(Error::NonFinite { step, detail }) => {
            // Leave a diagnostic artifact in the run directory so the
            // failure is inspectable after the process exits.
            let msg = format!("non-finite value at environment step {step}\n{detail}\n");
            write_file(&dir.join("failure.txt"), &msg)?;
            Err(Error::NonFinite { step, detail })
        }
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// eval

/// Where one evaluation row's network came from.
enum EvalSource {
    /// A train output directory: config echo, checkpoint, training log.
    Run(PathBuf),
    /// A bare checkpoint file (default environment, no loss columns).
    Checkpoint(PathBuf),
}

/// Mean quantile/risk/total losses over the final 10% of updates.
#[derive(Clone, Copy)]
struct FinalLosses {
    quantile: f64,
    risk: f64,
    total: f64,
}

fn final_tenth(updates: &[UpdateRecord]) -> Option<FinalLosses> {
    if updates.is_empty() {
        return None;
    }
    let count = updates.len().div_ceil(10);
    let tail = &updates[updates.len() - count..];
    let n = tail.len() as f64;
    Some(FinalLosses {
        quantile: tail.iter().map(|u| u.quantile_loss).sum::<f64>() / n,
        risk: tail.iter().map(|u| u.risk_loss).sum::<f64>() / n,
        total: tail.iter().map(|u| u.total_loss).sum::<f64>() / n,
    })
}

/// Parse a written train_log.csv back into the loss aggregate. Only the
/// three loss columns are read; the header row is validated by prefix.
fn final_tenth_from_csv(path: &Path) -> Result<Option<FinalLosses>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("step,quantile_loss,risk_loss,total_loss") => {}
        _ => return Err(Error::invalid(format!("{} is not a training log", path.display()))),
    }
    let mut updates = Vec::new();
    for (idx, line) in lines.enumerate() {
        let mut cols = line.split(',');
        let parse = |field: Option<&str>| -> Result<f64> {
            field
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| {
                    Error::invalid(format!("{} row {}: malformed", path.display(), idx + 2))
                })
        };
        cols.next(); // step
        let quantile_loss = parse(cols.next())?;
        let risk_loss = parse(cols.next())?;
        let total_loss = parse(cols.next())?;
        updates.push(UpdateRecord {
            step: 0,
            quantile_loss,
            risk_loss,
            total_loss,
            epsilon: 0.0,
            rho_hat: None,
            degenerate_tail: false,
        });
    }
    Ok(final_tenth(&updates))
}

struct EvalRow {
    label: String,
    variant: Option<Variant>,
    report: agent::EvalReport,
    losses: Option<FinalLosses>,
}

fn cmd_eval(tokens: &[String]) -> Result<()> {
    let mut sources: Vec<EvalSource> = Vec::new();
    let mut seeds: Vec<u64> = vec![0, 5, 10, 15, 20];
    let mut episodes: usize = 20;
    let mut policy = EvalPolicy::Greedy;
    let mut traces = false;
    let mut out_dir = default_out_root();
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i].as_str() {
            "--help" => {
                println!("{EVAL_HELP}");
                return Ok(());
            }
            "--run" => {
                sources.push(EvalSource::Run(PathBuf::from(take_value(tokens, i, "--run")?)));
                i += 2;
            }
            "--checkpoint" => {
                sources.push(EvalSource::Checkpoint(PathBuf::from(take_value(
                    tokens,
                    i,
                    "--checkpoint",
                )?)));
                i += 2;
            }
            "--seeds" => {
                seeds = parse_list(take_value(tokens, i, "--seeds")?, "--seeds")?;
                i += 2;
            }
            "--episodes" => {
                episodes = take_value(tokens, i, "--episodes")?
                    .parse()
                    .map_err(|_| Error::invalid("--episodes expects a positive integer"))?;
                i += 2;
            }
            "--policy" => {
                policy = match take_value(tokens, i, "--policy")? {
                    "greedy" => EvalPolicy::Greedy,
                    "uniform" => EvalPolicy::UniformRandom,
                    other => {
                        return Err(Error::invalid(format!(
                            "--policy expects greedy or uniform, got `{other}`"
                        )))
                    }
                };
                i += 2;
            }
            "--traces" => {
                traces = true;
                i += 1;
            }
            "--out" => {
                out_dir = PathBuf::from(take_value(tokens, i, "--out")?);
                i += 2;
            }
            other => return Err(Error::invalid(format!("unknown flag `{other}`"))),
        }
    }
    if sources.is_empty() {
        return Err(Error::invalid("eval needs at least one --run or --checkpoint"));
    }

    let mut rows: Vec<EvalRow> = Vec::new();
    for source in &sources {
        let row = match source {
            EvalSource::Run(dir) => {
                let mut cfg = RunConfig::default();
                cfg.apply_file(&dir.join("config_resolved.txt"))?;
                let (params, _, _) = load_checkpoint(&dir.join("checkpoint.bin"))?;
                let losses = final_tenth_from_csv(&dir.join("train_log.csv"))?;
                let report =
                    agent::evaluate(&params, policy, &seeds, episodes, &cfg.env, traces)?;
                let label = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| dir.display().to_string());
                EvalRow { label, variant: Some(cfg.agent.variant), report, losses }
            }
            EvalSource::Checkpoint(path) => {
                let (params, _, _) = load_checkpoint(path)?;
                let report = agent::evaluate(
                    &params,
                    policy,
                    &seeds,
                    episodes,
                    &EnvConfig::default(),
                    traces,
                )?;
                let label = path
                    .file_stem()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                EvalRow { label, variant: None, report, losses: None }
            }
        };
        rows.push(row);
    }

    // Success rates are normalized against the best row in this table; a
    // lone row (or an all-zero table) therefore reads 100.
    let max_goals = rows.iter().map(|r| r.report.total_goals).max().unwrap_or(0);
    let rate = |goals: usize| -> f64 {
        if max_goals == 0 {
            100.0
        } else {
            goals as f64 / max_goals as f64 * 100.0
        }
    };

    let mut summary = String::from(
        "run,variant,avg_cost_to_go,avg_cost_per_step,violation_mean,violation_std,\
         quantile_loss_final10,total_loss_final10,total_goals,success_rate_pct\n",
    );
    let mut episodes_csv = String::from(
        "run,eval_seed,episode,cum_stage_cost,cum_violation_cost,goals,steps\n",
    );
    let mut traces_csv = String::from(
        "run,eval_seed,episode,t,x,y,theta,action,stage_cost,hazard_cost,obstacle_cost,goal_reached\n",
    );
    for row in &rows {
        let r = &row.report;
        let variant = row.variant.map(|v| v.to_string()).unwrap_or_default();
        let (ql, tl) = row
            .losses
            .map(|l| (l.quantile.to_string(), l.total.to_string()))
            .unwrap_or_default();
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{},{}",
            row.label,
            variant,
            r.avg_cost_to_go,
            r.avg_cost_per_step,
            r.violation_mean,
            r.violation_std,
            ql,
            tl,
            r.total_goals,
            rate(r.total_goals)
        );
        for ep in &r.episodes {
            let _ = writeln!(
                episodes_csv,
                "{},{},{},{},{},{},{}",
                row.label,
                ep.eval_seed,
                ep.episode,
                ep.cum_stage_cost,
                ep.cum_violation_cost,
                ep.goals,
                ep.steps
            );
            if let Some(trace) = &ep.trace {
                for s in trace {
                    let _ = writeln!(
                        traces_csv,
                        "{},{},{},{},{},{},{},{},{},{},{},{}",
                        row.label,
                        ep.eval_seed,
                        ep.episode,
                        s.t,
                        s.x,
                        s.y,
                        s.theta,
                        s.action,
                        s.stage_cost,
                        s.hazard_cost,
                        s.obstacle_cost,
                        s.goal_reached
                    );
                }
            }
        }
    }

    std::fs::create_dir_all(&out_dir)?;
    write_file(&out_dir.join("eval_summary.csv"), &summary)?;
    write_file(&out_dir.join("eval_episodes.csv"), &episodes_csv)?;
    if traces {
        write_file(&out_dir.join("eval_traces.csv"), &traces_csv)?;
    }
    for row in &rows {
        println!(
            "eval: {} -> cost-to-go {:.4}, violations {:.4} +- {:.4}, {} goals",
            row.label,
            row.report.avg_cost_to_go,
            row.report.violation_mean,
            row.report.violation_std,
            row.report.total_goals
        );
    }
    println!("eval: wrote {}", out_dir.join("eval_summary.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// pareto

struct ParetoCell {
    beta: f64,
    lambda: f64,
    result: Result<Option<FinalLosses>>,
}

fn cmd_pareto(tokens: &[String]) -> Result<()> {
    let mut betas: Vec<f64> = vec![0.9, 0.95];
    let mut lambdas: Vec<f64> = vec![0.1, 0.3, 0.5, 0.7, 0.9];
    let mut out_dir: Option<PathBuf> = None;
    let mut passthrough: Vec<String> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i].as_str() {
            "--help" => {
                println!("{PARETO_HELP}");
                return Ok(());
            }
            "--betas" => {
                betas = parse_list(take_value(tokens, i, "--betas")?, "--betas")?;
                i += 2;
            }
            "--lambdas" => {
                lambdas = parse_list(take_value(tokens, i, "--lambdas")?, "--lambdas")?;
                i += 2;
            }
            "--out" => {
                out_dir = Some(PathBuf::from(take_value(tokens, i, "--out")?));
                i += 2;
            }
            _ => {
                passthrough.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    let base = build_config(&passthrough, PARETO_HELP)?;
    if !base.agent.variant.has_risk_term() {
        return Err(Error::invalid(format!(
            "pareto sweeps vary the risk weights; variant {} has no risk term",
            base.agent.variant
        )));
    }
    let out_dir = out_dir.unwrap_or_else(|| base.out_dir.clone());

    // Each cell trains with the same seed, so cells differ only in (β, λ).
    let grid: Vec<(f64, f64)> = betas
        .iter()
        .flat_map(|&b| lambdas.iter().map(move |&l| (b, l)))
        .collect();
    let cells: Vec<ParetoCell> = exec::indexed_map(grid.len(), |i| {
        let (beta, lambda) = grid[i];
        let mut cfg = base.clone();
        cfg.agent.risk.beta = beta;
        cfg.agent.risk.lambda = lambda;
        let result = cfg
            .agent
            .validate()
            .and_then(|()| agent::train(&cfg.agent, &cfg.env, None))
            .map(|out| final_tenth(&out.log.updates));
        ParetoCell { beta, lambda, result }
    });

    // Non-dominated set under (quantile loss, risk loss) minimization.
    // Equal pairs do not dominate each other, so the front is an antichain.
    let points: Vec<Option<(f64, f64)>> = cells
        .iter()
        .map(|c| match &c.result {
            Ok(Some(l)) => Some((l.quantile, l.risk)),
            _ => None,
        })
        .collect();
    let dominated = |a: (f64, f64), b: (f64, f64)| -> bool {
        b.0 <= a.0 && b.1 <= a.1 && (b.0 < a.0 || b.1 < a.1)
    };
    let on_front: Vec<bool> = points
        .iter()
        .map(|p| match p {
            Some(a) => !points
                .iter()
                .flatten()
                .any(|&b| dominated(*a, b)),
            None => false,
        })
        .collect();

    let mut csv = String::from(
        "beta,lambda,seed,status,quantile_loss,risk_loss,total_loss,on_front,detail\n",
    );
    let mut failed = 0usize;
    for (cell, front) in cells.iter().zip(&on_front) {
        let (status, ql, rl, tl, detail) = match &cell.result {
            Ok(Some(l)) => {
                ("ok", l.quantile.to_string(), l.risk.to_string(), l.total.to_string(), String::new())
            }
            Ok(None) => {
                failed += 1;
                ("failed", String::new(), String::new(), String::new(), "no updates ran".into())
            }
            Err(e) => {
                failed += 1;
                ("failed", String::new(), String::new(), String::new(), e.to_string().replace(',', ";"))
            }
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            cell.beta, cell.lambda, base.agent.seed, status, ql, rl, tl, front, detail
        );
    }
    std::fs::create_dir_all(&out_dir)?;
    write_file(&out_dir.join("pareto.csv"), &csv)?;
    let front_size = on_front.iter().filter(|&&f| f).count();
    println!(
        "pareto: {} cells ({} failed), {} on the front -> {}",
        cells.len(),
        failed,
        front_size,
        out_dir.join("pareto.csv").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// kde-demo

fn cmd_kde_demo(tokens: &[String]) -> Result<()> {
    let mut b_list: Vec<usize> = DEMO_B_LIST.to_vec();
    let mut betas: Vec<f64> = DEMO_BETAS.to_vec();
    let mut bandwidth = DEMO_BANDWIDTH;
    let mut resamples = DEMO_RESAMPLES;
    let mut x_min = TruncatedPareto::default().x_min();
    let mut shape = TruncatedPareto::default().shape();
    let mut seed: u64 = 0;
    let mut out_dir = default_out_root();
    let mut i = 0;
    while i < tokens.len() {
        let flag = tokens[i].as_str();
        let num = |name: &str| -> Result<f64> {
            take_value(tokens, i, name)?
                .parse()
                .map_err(|_| Error::invalid(format!("{name} expects a number")))
        };
        match flag {
            "--help" => {
                println!("{KDE_DEMO_HELP}");
                return Ok(());
            }
            "--b-list" => {
                b_list = parse_list(take_value(tokens, i, flag)?, flag)?;
                i += 2;
            }
            "--betas" => {
                betas = parse_list(take_value(tokens, i, flag)?, flag)?;
                i += 2;
            }
            "--bandwidth" => {
                bandwidth = num(flag)?;
                i += 2;
            }
            "--resamples" => {
                resamples = num(flag)? as usize;
                i += 2;
            }
            "--x-min" => {
                x_min = num(flag)?;
                i += 2;
            }
            "--shape" => {
                shape = num(flag)?;
                i += 2;
            }
            "--seed" => {
                seed = take_value(tokens, i, flag)?
                    .parse()
                    .map_err(|_| Error::invalid("--seed expects an integer"))?;
                i += 2;
            }
            "--out" => {
                out_dir = PathBuf::from(take_value(tokens, i, flag)?);
                i += 2;
            }
            other => return Err(Error::invalid(format!("unknown flag `{other}`"))),
        }
    }

    let dist = TruncatedPareto::new(x_min, shape)?;
    let rows = kde_convergence_rows(&dist, &b_list, &betas, bandwidth, resamples, seed)?;
    let mut csv = String::from("b,beta,mean_abs_error,analytic_cvar\n");
    for row in &rows {
        let _ = writeln!(csv, "{},{},{},{}", row.b, row.beta, row.mean_abs_error, row.analytic_cvar);
        println!(
            "kde-demo: B={:<6} beta={:<5} mean |error| = {:.6}",
            row.b, row.beta, row.mean_abs_error
        );
    }
    std::fs::create_dir_all(&out_dir)?;
    write_file(&out_dir.join("kde_demo.csv"), &csv)?;
    println!("kde-demo: wrote {}", out_dir.join("kde_demo.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// verify

fn cmd_verify(tokens: &[String]) -> Result<()> {
    let mut trials: usize = 1000;
    let mut betas: Vec<f64> = vec![0.9, 0.95];
    let mut gamma: f64 = 0.99;
    let mut seed: u64 = 0;
    let mut probe_pairs: usize = 10_000;
    let mut fp_trials: usize = 20;
    let mut fp_gamma: f64 = 0.95;
    let mut out_dir = default_out_root();
    let mut i = 0;
    while i < tokens.len() {
        let flag = tokens[i].as_str();
        match flag {
            "--help" => {
                println!("{VERIFY_HELP}");
                return Ok(());
            }
            "--trials" | "--probe-pairs" | "--fp-trials" => {
                let v: usize = take_value(tokens, i, flag)?
                    .parse()
                    .map_err(|_| Error::invalid(format!("{flag} expects a positive integer")))?;
                match flag {
                    "--trials" => trials = v,
                    "--probe-pairs" => probe_pairs = v,
                    _ => fp_trials = v,
                }
                i += 2;
            }
            "--betas" => {
                betas = parse_list(take_value(tokens, i, flag)?, flag)?;
                i += 2;
            }
            "--gamma" | "--fp-gamma" => {
                let v: f64 = take_value(tokens, i, flag)?
                    .parse()
                    .map_err(|_| Error::invalid(format!("{flag} expects a number")))?;
                if flag == "--gamma" {
                    gamma = v;
                } else {
                    fp_gamma = v;
                }
                i += 2;
            }
            "--seed" => {
                seed = take_value(tokens, i, flag)?
                    .parse()
                    .map_err(|_| Error::invalid("--seed expects an integer"))?;
                i += 2;
            }
            "--out" => {
                out_dir = PathBuf::from(take_value(tokens, i, flag)?);
                i += 2;
            }
            other => return Err(Error::invalid(format!("unknown flag `{other}`"))),
        }
    }
    if trials == 0 {
        return Err(Error::invalid("--trials must be at least 1"));
    }

    let dims = CampaignDims::default();
    const FP_TOL: f64 = 1e-6;
    const FP_MAX_ITER: usize = 500;
    const FP_BURN_IN: usize = 5;

    let records = contraction_campaign(seed, trials, &betas, gamma, dims);
    let mut csv = String::from("trial,seed,beta,gamma,status,ratio,pass\n");
    for (idx, rec) in records.iter().enumerate() {
        let (status, ratio, pass) = match rec.outcome {
            TrialOutcome::Skipped => ("skipped", String::new(), String::new()),
            TrialOutcome::Ran { ratio, pass } => ("ran", ratio.to_string(), pass.to_string()),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            idx, rec.seed, rec.beta, rec.gamma, status, ratio, pass
        );
    }

    let mut summary = String::from("key,value\n");
    let _ = writeln!(summary, "verify.seed,{seed}");
    let _ = writeln!(summary, "verify.gamma,{gamma}");
    let _ = writeln!(summary, "verify.trials_per_beta,{trials}");
    let mut stdout_lines: Vec<String> = Vec::new();
    for &beta in &betas {
        let per: Vec<&ContractionRecord> =
            records.iter().filter(|r| r.beta == beta).collect();
        let evaluated: Vec<f64> = per
            .iter()
            .filter_map(|r| match r.outcome {
                TrialOutcome::Ran { ratio, .. } => Some(ratio),
                TrialOutcome::Skipped => None,
            })
            .collect();
        let passed = per
            .iter()
            .filter(|r| matches!(r.outcome, TrialOutcome::Ran { pass: true, .. }))
            .count();
        let skipped = per.len() - evaluated.len();
        let pass_rate = if evaluated.is_empty() {
            1.0
        } else {
            passed as f64 / evaluated.len() as f64
        };
        let max_ratio = evaluated.iter().copied().fold(0.0, f64::max);
        let mean_ratio = if evaluated.is_empty() {
            0.0
        } else {
            evaluated.iter().sum::<f64>() / evaluated.len() as f64
        };
        let _ = writeln!(summary, "campaign.beta{beta}.trials,{}", per.len());
        let _ = writeln!(summary, "campaign.beta{beta}.evaluated,{}", evaluated.len());
        let _ = writeln!(summary, "campaign.beta{beta}.skipped,{skipped}");
        let _ = writeln!(summary, "campaign.beta{beta}.passed,{passed}");
        let _ = writeln!(summary, "campaign.beta{beta}.pass_rate,{pass_rate}");
        let _ = writeln!(summary, "campaign.beta{beta}.max_ratio,{max_ratio}");
        let _ = writeln!(summary, "campaign.beta{beta}.mean_ratio,{mean_ratio}");

        let probe: ProbeReport = nonexpansiveness_probe(seed, probe_pairs, beta, dims.max_atoms);
        let _ = writeln!(summary, "probe.beta{beta}.pairs,{}", probe.pairs);
        let _ = writeln!(summary, "probe.beta{beta}.evaluated,{}", probe.evaluated);
        let _ = writeln!(summary, "probe.beta{beta}.skipped,{}", probe.skipped);
        let _ = writeln!(summary, "probe.beta{beta}.w1_max,{}", probe.w1.max);
        let _ = writeln!(summary, "probe.beta{beta}.w1_mean,{}", probe.w1.mean);
        let _ = writeln!(
            summary,
            "probe.beta{beta}.w1_frac_nonexpansive,{}",
            probe.w1.frac_nonexpansive
        );
        let _ = writeln!(summary, "probe.beta{beta}.winf_max,{}", probe.winf.max);
        let _ = writeln!(
            summary,
            "probe.beta{beta}.winf_frac_nonexpansive,{}",
            probe.winf.frac_nonexpansive
        );

        let fp: Vec<FixedPointTrial> =
            fixed_point_campaign(seed, fp_trials, beta, fp_gamma, dims, FP_TOL, FP_MAX_ITER, FP_BURN_IN);
        let converged = fp.iter().filter(|t| t.converged).count();
        let max_iter = fp.iter().map(|t| t.iterations).max().unwrap_or(0);
        let max_agree = fp.iter().map(|t| t.init_agreement).fold(0.0, f64::max);
        let max_fp_ratio = fp.iter().map(|t| t.max_ratio_after_burnin).fold(0.0, f64::max);
        let _ = writeln!(summary, "fixed_point.beta{beta}.gamma,{fp_gamma}");
        let _ = writeln!(summary, "fixed_point.beta{beta}.trials,{}", fp.len());
        let _ = writeln!(summary, "fixed_point.beta{beta}.converged,{converged}");
        let _ = writeln!(summary, "fixed_point.beta{beta}.max_iterations,{max_iter}");
        let _ = writeln!(summary, "fixed_point.beta{beta}.max_init_agreement,{max_agree}");
        let _ = writeln!(summary, "fixed_point.beta{beta}.max_ratio_after_burnin,{max_fp_ratio}");

        stdout_lines.push(format!(
            "verify: beta={beta} pass-rate {pass_rate:.4} ({passed}/{} evaluated, {skipped} skipped), \
             max ratio {max_ratio:.6}; probe winf max {:.6}; fixed point {converged}/{} converged",
            evaluated.len(),
            probe.winf.max,
            fp.len()
        ));
    }

    std::fs::create_dir_all(&out_dir)?;
    write_file(&out_dir.join("verify.csv"), &csv)?;
    write_file(&out_dir.join("verify_summary.csv"), &summary)?;
    for line in stdout_lines {
        println!("{line}");
    }
    println!("verify: wrote {}", out_dir.join("verify_summary.csv").display());
    Ok(())
}
