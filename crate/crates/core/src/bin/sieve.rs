use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sieve_core::dataset::{load_dataset, save_dataset, validate_dataset, Dataset};
use sieve_core::env::{
    generate_dataset, make_env, parse_env_id, BehaviorSettings, DiscreteMdp, EnvParams, MixSpec, ENV_HELP,
};
use sieve_core::eval::{default_plan, emit_results, load_plan, rollout_return, run_experiment, EvalConfig};
use sieve_core::filter::{apply_filter, partition, save_report, CriterionKind, DiscountMode, ScoreCriterion};
use sieve_core::learn::{
    load_model, policy_divergence_report, save_model, train, Algorithm, DivergenceConfig, LearnerConfig,
};
use sieve_core::{Error, Result};

const CSV_HELP: &str = "\
Results CSV (written by `report`):
  line 1   `# results v1 {json}` with env, gamma_train, gamma_eval, budget,
           filter_mode, filter_gamma
  header   algorithm,criterion,seed,checkpoint,mean_return,std_return,
           dataset_size_transitions,status,fallback_steps,sweeps
  rows     one per (seed, criterion, algorithm, checkpoint) in plan order;
           status is OK or DEGENERATE (returns left empty)
  summary  after `# summary`, `# `-prefixed CSV with columns
           algorithm,criterion,checkpoint,seeds_ok,seeds_degenerate,
           mean_return,std_return,mean_dataset_size";

const EXIT_HELP: &str = "Exit status: 0 success, 1 data or I/O error, 2 usage error.";

#[derive(Parser)]
#[command(name = "sieve", version, about = "Episode-level filtering of offline RL datasets", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mixed-quality dataset from a built-in environment
    #[command(after_help = ENV_HELP)]
    Gen(GenArgs),
    /// Check a dataset file against all structural invariants
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Score every episode and print the partition without writing a dataset
    Score {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        criterion: CriterionArgs,
        /// Also write the filter report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Keep only episodes scoring strictly above the dataset mean
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        criterion: CriterionArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train a tabular learner on a dataset
    Train(TrainArgs),
    /// Roll out a trained model's policy and print return statistics
    #[command(after_help = ENV_HELP)]
    Eval(EvalArgs),
    /// Run a filtered-vs-unfiltered experiment plan and write a results CSV
    #[command(after_help = CSV_HELP)]
    Report {
        /// TOML plan file; omit to use the built-in default plan
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, required_unless_present = "print_default_plan")]
        out: Option<PathBuf>,
        /// Print the default plan as TOML and exit
        #[arg(long)]
        print_default_plan: bool,
    },
}

#[derive(Args)]
struct EnvArgs {
    /// Environment name, or a full id such as `gridworld:n=5,slip=0.1`
    #[arg(long)]
    env: String,
    /// Environment parameter, repeatable
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl EnvArgs {
    fn build(&self) -> Result<DiscreteMdp> {
        env_from_id(&self.env, &self.params)
    }
}

fn env_from_id(id: &str, extra: &[String]) -> Result<DiscreteMdp> {
    let (name, _) = parse_env_id(id)?;
    let mut pairs: Vec<String> = id
        .split_once(':')
        .map(|(_, rest)| rest.split(',').filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    pairs.extend(extra.iter().cloned());
    make_env(&name, &EnvParams::parse(&pairs)?)
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Relative weights of random, medium and expert episodes
    #[arg(long, default_value = "50,30,20", value_parser = parse_mix)]
    mix: [u64; 3],
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for interleaving episodes; defaults to `--seed`
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long, default_value_t = BehaviorSettings::default().epsilon)]
    epsilon: f64,
    #[arg(long, default_value_t = BehaviorSettings::default().medium_fraction)]
    medium_fraction: f64,
    #[arg(long, default_value_t = BehaviorSettings::default().gamma)]
    behavior_gamma: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_mix(s: &str) -> std::result::Result<[u64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [r, m, e] = parts[..] else {
        return Err("expected three comma-separated weights, e.g. 50,30,20".into());
    };
    let p = |x: &str| x.parse::<u64>().map_err(|e| format!("`{x}`: {e}"));
    Ok([p(r)?, p(m)?, p(e)?])
}

#[derive(Args)]
struct CriterionArgs {
    #[arg(long, default_value = "disc")]
    criterion: CriterionKind,
    #[arg(long, default_value = "absolute")]
    mode: DiscountMode,
    #[arg(long, default_value_t = sieve_core::filter::DEFAULT_GAMMA)]
    gamma: f64,
}

impl CriterionArgs {
    fn build(&self) -> Result<ScoreCriterion> {
        ScoreCriterion::new(self.criterion, self.gamma, self.mode)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    gamma: Option<f64>,
    /// Maximum number of sweeps
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Print the per-state MMD^2 between learned and behavior actions
    #[arg(long)]
    divergence: bool,
}

impl TrainArgs {
    fn config(&self) -> LearnerConfig {
        let d = LearnerConfig::new(self.algo);
        LearnerConfig {
            algorithm: self.algo,
            gamma: self.gamma.unwrap_or(d.gamma),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            alpha: self.alpha.unwrap_or(d.alpha),
            expectile_tau: self.tau.unwrap_or(d.expectile_tau),
            awr_temperature: self.temperature.unwrap_or(d.awr_temperature),
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Environment id; defaults to the env_id of `--data`
    #[arg(long, required_unless_present = "data")]
    env: Option<String>,
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Dataset whose env_id names the environment
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = EvalConfig::default().n_episodes)]
    episodes: usize,
    #[arg(long, default_value_t = EvalConfig::default().gamma_eval)]
    gamma_eval: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn print_partition(d: &Dataset, c: &ScoreCriterion) -> Result<sieve_core::filter::FilterReport> {
    let r = partition(d, c)?;
    println!("criterion={}", c.label());
    println!("episodes={}", d.len());
    println!("dataset_mean={}", r.dataset_mean);
    println!("superior={}", r.superior_indices.len());
    println!("inferior={}", r.inferior_indices.len());
    println!("retained_transitions={}/{}", r.retained_transition_count, r.original_transition_count);
    Ok(r)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => {
            let m = a.env.build()?;
            let mix = MixSpec::from_weights(a.mix, a.episodes, a.shuffle_seed.unwrap_or(a.seed))?;
            let settings = BehaviorSettings {
                epsilon: a.epsilon,
                medium_fraction: a.medium_fraction,
                gamma: a.behavior_gamma,
            };
            let d = generate_dataset(&m, &mix, &settings, a.seed)?;
            save_dataset(&d, &a.out)?;
            println!("env={}", m.env_id());
            println!("episodes={} transitions={}", d.len(), d.transition_count());
            println!("digest={}", d.digest());
        }
        Command::Validate { input } => {
            // load_dataset already validates; re-run to list every check
            let d = load_dataset(&input)?;
            for c in &validate_dataset(&d).checks {
                println!("{}: {}", c.name, if c.passed { "ok" } else { "FAILED" });
            }
            println!("episodes={} transitions={}", d.len(), d.transition_count());
        }
        Command::Score {
            input,
            criterion,
            report,
        } => {
            let d = load_dataset(&input)?;
            let r = print_partition(&d, &criterion.build()?)?;
            if let Some(path) = report {
                save_report(&r, path)?;
            }
        }
        Command::Filter {
            input,
            out,
            criterion,
            report,
        } => {
            let d = load_dataset(&input)?;
            let r = print_partition(&d, &criterion.build()?)?;
            if let Some(path) = &report {
                save_report(&r, path)?;
            }
            let f = apply_filter(&d, &r)?;
            save_dataset(&f, &out)?;
            println!("retention={}", r.retention_ratio());
        }
        Command::Train(a) => {
            let d = load_dataset(&a.data)?;
            let model = train(&d, &a.config())?;
            save_model(&model, &a.out)?;
            println!("algorithm={}", model.config.algorithm.as_str());
            println!("sweeps={} converged={}", model.sweeps, model.converged);
            if let Some(l) = model.bc_lambda {
                println!("bc_lambda={l}");
            }
            println!("support_violations={}", model.support_violations());
            if a.divergence {
                let r = policy_divergence_report(&model, &model.behavior, &DivergenceConfig::default())?;
                for (s, v) in &r.per_state {
                    println!("mmd2 s={s} {v}");
                }
                println!("mmd2_aggregate={}", r.aggregate);
            }
        }
        Command::Eval(a) => {
            let model = load_model(&a.model)?;
            let m = match (&a.env, &a.data) {
                (Some(id), _) => env_from_id(id, &a.params)?,
                (None, Some(path)) => env_from_id(&load_dataset(path)?.env_spec.env_id, &a.params)?,
                (None, None) => unreachable!("clap requires one of --env/--data"),
            };
            let cfg = EvalConfig {
                n_episodes: a.episodes,
                gamma_eval: a.gamma_eval,
                seed: a.seed,
            };
            let stats = rollout_return(&m, &model.policy, &cfg)?;
            println!("env={}", m.env_id());
            println!("episodes={} gamma_eval={}", cfg.n_episodes, cfg.gamma_eval);
            println!("mean_return={}", stats.mean);
            println!("std_return={}", stats.std);
            println!("fallback_steps={}", stats.fallback_steps);
        }
        Command::Report {
            plan,
            out,
            print_default_plan,
        } => {
            if print_default_plan {
                print!("{}", default_plan().to_toml());
                return Ok(());
            }
            let plan = match plan {
                Some(p) => load_plan(p)?,
                None => default_plan(),
            };
            let table = run_experiment(&plan)?;
            let out = out.expect("clap requires --out");
            emit_results(&table, &out)?;
            let degenerate = table
                .rows
                .iter()
                .filter(|r| r.status == sieve_core::eval::RowStatus::Degenerate)
                .count();
            println!("rows={} degenerate={}", table.rows.len(), degenerate);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParam(_) | Error::Unsupported(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
