use clap::{Args, Parser, Subcommand, ValueEnum};
use familyrl::bandit::{best_arm_frequency, simulate, trace_to_csv, BanditAlgorithm, BanditConfig, BanditState, BernoulliSchedule};
use familyrl::family::{build_family, FamilySchedule};
use familyrl::harness::{config_reference, run_training, HarnessConfig, RunMode};
use familyrl::metrics::{normalize_scores, write_game_scores};
use familyrl::{verify, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "familyrl", version, about = "Tabular policy-family agents: training, oracle checks and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a config file and write metrics.csv, final_eval.csv and summary.txt.
    Train(TrainArgs),
    /// Run every oracle and equivalence suite; exits nonzero on any failure.
    Verify {
        /// Write per-iteration decomposition deviations here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate a bandit against Bernoulli arms and print its trace as CSV.
    BanditSim(BanditArgs),
    /// Print the (j, beta, gamma) family as CSV.
    FamilyDump {
        /// Take the family from this config instead of the default schedule.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        num_policies: Option<usize>,
    },
    /// Score normalization.
    Metrics {
        /// Score file (game,score) and baseline file (game,human,random).
        #[arg(long, num_args = 2, value_names = ["SCORES", "BASELINES"], required = true)]
        hns: Vec<PathBuf>,
    },
    /// Print every config key with its default and reference value.
    ConfigReference,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output directory; metrics go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's run mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Multi,
}

#[derive(Args)]
struct BanditArgs {
    /// Comma-separated Bernoulli means.
    #[arg(long, default_value = "0.9,0.5,0.1", value_delimiter = ',')]
    means: Vec<f64>,
    /// Swap the two arms' means at this step (two arms only).
    #[arg(long)]
    swap_at: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    steps: u64,
    #[arg(long, default_value_t = BanditConfig::EVALUATOR_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = BanditConfig::EVALUATOR_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = BanditConfig::DEFAULT_BONUS)]
    beta: f64,
    /// simplified, ucb1 or sw-ucb
    #[arg(long, default_value = "simplified")]
    algorithm: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print best-arm frequencies of every algorithm over the last 1000 steps instead of a trace.
    #[arg(long)]
    compare: bool,
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = HarnessConfig::from_file(&args.config)?;
    cfg.seed = args.seed;
    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            ModeArg::Single => RunMode::Single,
            ModeArg::Multi => RunMode::Multi,
        };
    }
    let run = run_training(&cfg)?;
    match args.out {
        Some(dir) => {
            run.write_artifacts(&dir)?;
            print!("{}", run.summary());
        }
        None => {
            print!("{}", run.metrics_csv()?);
            eprint!("{}", run.summary());
        }
    }
    Ok(())
}

fn bandit_sim(args: BanditArgs) -> Result<()> {
    let schedule = match args.swap_at {
        Some(at) => match args.means.as_slice() {
            [a, b] => BernoulliSchedule::swapping(*a, *b, at),
            _ => return Err(Error::Config("--swap-at needs exactly two means".into())),
        },
        None => BernoulliSchedule::stationary(args.means.clone()),
    };
    let run = |algorithm: BanditAlgorithm| -> Result<_> {
        let mut cfg = BanditConfig::new(args.means.len(), args.window, args.epsilon);
        cfg.bonus_beta = args.beta;
        cfg.algorithm = algorithm;
        let mut state = BanditState::new(cfg)?;
        simulate(&mut state, &schedule, args.steps, &mut ChaCha8Rng::seed_from_u64(args.seed))
    };
    let mut stdout = std::io::stdout().lock();
    if args.compare {
        writeln!(stdout, "algorithm,best_arm_frequency_last_1000")?;
        for (name, alg) in
            [("simplified", BanditAlgorithm::Simplified), ("ucb1", BanditAlgorithm::Ucb1), ("sw-ucb", BanditAlgorithm::SlidingWindow)]
        {
            let trace = run(alg)?;
            let freq = best_arm_frequency(&trace, &schedule, args.steps.saturating_sub(1000), args.steps);
            writeln!(stdout, "{name},{freq}")?;
        }
    } else {
        write!(stdout, "{}", trace_to_csv(&run(args.algorithm.parse()?)?))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(args) => train(args)?,
        Command::Verify { csv } => {
            let (outcomes, equivalence) = verify::run_all()?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            if let Some(path) = csv {
                std::fs::write(path, equivalence.to_csv())?;
            }
            return Ok(outcomes.iter().all(|o| o.passed()));
        }
        Command::BanditSim(args) => bandit_sim(args)?,
        Command::FamilyDump { config, num_policies } => {
            let family = match (config, num_policies) {
                (Some(path), _) => HarnessConfig::from_file(&path)?.family()?,
                (None, Some(n)) => build_family(&FamilySchedule::with_size(n))?,
                (None, None) => build_family(&FamilySchedule::default())?,
            };
            print!("{}", family.to_csv());
        }
        Command::Metrics { hns } => {
            let scores = normalize_scores(File::open(&hns[0])?, File::open(&hns[1])?)?;
            write_game_scores(&scores, std::io::stdout().lock())?;
        }
        Command::ConfigReference => print!("{}", config_reference()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
