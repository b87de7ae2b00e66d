use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use micky_core::evalharness::{cost_curve, knee_point, replicate, run_method, summarize, KneeInputs, MethodSpec};
use micky_core::synth::{write_synth, SynthSpec};
use micky_core::{Budget, Error, ObjectiveKind, PerfMatrix, PolicySpec, RewardMode};

#[derive(Parser)]
#[command(name = "micky", version, about = "Collective cloud-configuration selection")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Objective to minimize.
    #[arg(long, global = true, value_enum)]
    objective: Option<Objective>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Time,
    Cost,
}

impl From<Objective> for ObjectiveKind {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Time => ObjectiveKind::ExecutionTime,
            Objective::Cost => ObjectiveKind::OperationalCost,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic matrix with a planted exemplar.
    Gen(GenArgs),
    /// Run one optimizer on a matrix.
    Run(RunArgs),
    /// Replicate optimizers and report NP and cost statistics.
    Eval(EvalArgs),
    /// Recurrence count at which per-workload optimization pays off.
    Knee(KneeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// JSON file with generator settings; inline flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workloads: Option<usize>,
    #[arg(long)]
    configs: Option<usize>,
    #[arg(long)]
    exemplar_fraction: Option<f64>,
    #[arg(long)]
    near_band: Option<f64>,
    #[arg(long)]
    penalty_scale: Option<f64>,
    #[arg(long)]
    min_time: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Micky,
    Cherrypick,
    Random4,
    Random8,
    Brute,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyName {
    Ucb1,
    EpsilonGreedy,
    Softmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardName {
    Online,
    Oracle,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, default_value_t = 1)]
    alpha: u32,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, value_enum, default_value = "ucb1")]
    policy: PolicyName,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    temperature: f64,
    #[arg(long, value_enum, default_value = "oracle")]
    reward_mode: RewardName,
    #[arg(long, default_value_t = 3)]
    n_init: usize,
    #[arg(long, default_value_t = 0.10)]
    ei_stop: f64,
    /// Overrides the number of configs measured by random methods.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    method: MethodName,
    #[arg(long)]
    data: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: MethodArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "micky,cherrypick,random4,random8,brute")]
    methods: Vec<MethodName>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; all cores when omitted. Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Workload counts for a cost curve, e.g. 10,20,40.
    #[arg(long, value_delimiter = ',')]
    curve: Vec<usize>,
    #[command(flatten)]
    params: MethodArgs,
}

#[derive(Args)]
struct KneeArgs {
    #[arg(long, allow_negative_numbers = true)]
    delta_p: f64,
    #[arg(long, allow_negative_numbers = true)]
    savings: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    ratio: f64,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(_) | Error::Parse(_) | Error::EmptyBudget => Failure::Usage(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

fn data_err(e: Error) -> Failure {
    Failure::Data(e.to_string())
}

fn at(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure::Data(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, Failure>;

const DEFAULT_SEED: u64 = 42;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let objective = cli.objective.map_or(ObjectiveKind::OperationalCost, ObjectiveKind::from);
    match &cli.command {
        Command::Gen(args) => gen(cli, args),
        Command::Run(args) => run(args, seed, objective),
        Command::Eval(args) => eval(args, seed, objective),
        Command::Knee(args) => knee(args),
    }
}

fn gen(cli: &Cli, args: &GenArgs) -> CliResult<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| at(path)(e.into()))?;
            serde_json::from_str::<SynthSpec>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(o) = cli.objective {
        spec.objective = o.into();
    }
    if let Some(v) = args.workloads {
        spec.n_workloads = v;
    }
    if let Some(v) = args.configs {
        spec.n_configs = v;
    }
    if let Some(v) = args.exemplar_fraction {
        spec.exemplar_fraction = v;
    }
    if let Some(v) = args.near_band {
        spec.near_band = v;
    }
    if let Some(v) = args.penalty_scale {
        spec.penalty_scale = v;
    }
    if let Some(v) = args.min_time {
        spec.base_time_range.0 = v;
    }
    if let Some(v) = args.max_time {
        spec.base_time_range.1 = v;
    }
    spec.validate()?;
    fs::create_dir_all(&args.out).map_err(|e| data_err(e.into()))?;
    let sidecar = write_synth(&spec, &args.out).map_err(data_err)?;
    println!("{}", sidecar.planted_exemplar);
    Ok(())
}

fn method_spec(name: MethodName, p: &MethodArgs) -> CliResult<MethodSpec> {
    let spec = match name {
        MethodName::Micky => {
            let policy = match p.policy {
                PolicyName::Ucb1 => PolicySpec::Ucb1,
                PolicyName::EpsilonGreedy => PolicySpec::epsilon_greedy(p.epsilon)?,
                PolicyName::Softmax => PolicySpec::softmax(p.temperature)?,
            };
            let reward_mode = match p.reward_mode {
                RewardName::Online => RewardMode::Online,
                RewardName::Oracle => RewardMode::Oracle,
            };
            MethodSpec::Micky { policy, budget: Budget::new(p.alpha, p.beta)?, reward_mode }
        }
        MethodName::Cherrypick => MethodSpec::CherryPick { n_init: p.n_init, ei_stop: p.ei_stop },
        MethodName::Random4 => MethodSpec::RandomK { k: p.k.unwrap_or(4) },
        MethodName::Random8 => MethodSpec::RandomK { k: p.k.unwrap_or(8) },
        MethodName::Brute => MethodSpec::Brute,
    };
    Ok(spec)
}

fn load(dir: &Path, objective: ObjectiveKind) -> CliResult<PerfMatrix> {
    PerfMatrix::load_dir(dir, objective).map_err(at(dir))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| data_err(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: &RunArgs, seed: u64, objective: ObjectiveKind) -> CliResult<()> {
    let method = method_spec(args.method, &args.params)?;
    let matrix = load(&args.data, objective)?;
    let outcome = run_method(&method, &matrix, seed)?;
    let json = outcome.to_json(&matrix, &method.label())?;
    write_output(args.out.as_deref(), &json)
}

fn eval(args: &EvalArgs, seed: u64, objective: ObjectiveKind) -> CliResult<()> {
    if args.reps == 0 {
        return Err(Failure::Usage("--reps must be >= 1".into()));
    }
    let methods = args.methods.iter().map(|&m| method_spec(m, &args.params)).collect::<CliResult<Vec<_>>>()?;
    let matrix = load(&args.data, objective)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;

    let summary = pool.install(|| -> CliResult<_> {
        let experiments =
            methods.iter().map(|m| replicate(m, &matrix, args.reps, seed)).collect::<micky_core::Result<Vec<_>>>()?;
        let curve = if args.curve.is_empty() {
            None
        } else {
            let seeds: Vec<u64> = (0..args.reps as u64).map(|i| seed.wrapping_add(i)).collect();
            Some(cost_curve(&matrix, &args.curve, &methods, &seeds)?)
        };
        Ok(summarize(&matrix, &experiments, curve.as_deref())?)
    })?;

    fs::create_dir_all(&args.out).map_err(|e| data_err(e.into()))?;
    let write = |name: &str, text: &str| fs::write(args.out.join(name), text).map_err(|e| data_err(e.into()));
    write("report.json", &summary.json)?;
    write("np.csv", &summary.np_csv)?;
    if let Some(csv) = &summary.cost_curve_csv {
        write("cost_curve.csv", csv)?;
    }
    print!("{}", summary.json);
    Ok(())
}

fn knee(args: &KneeArgs) -> CliResult<()> {
    let k = knee_point(&KneeInputs::new(args.delta_p, args.savings, args.ratio))?;
    println!("{k}");
    Ok(())
}
