//! Command-line front end: generate, plan, validate, simulate, experiment.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use iab_planner::channel::{McsTable, RadioParams};
use iab_planner::experiment::{median_rho, run_experiment, write_experiment_csv, ExperimentSpec};
use iab_planner::model::{build_model, ModelParams};
use iab_planner::resilience::{
    extract_multitree, inject_failure, load_fault_schedule, reconfigure, simulate_trace, verify_recovery,
    write_trace_csv, TraceConfig,
};
use iab_planner::scenario::{load_scenario, save_scenario, SyntheticConfig};
use iab_planner::solve::{export_mps, run_external, solve_exact, validate_solution, Solution, SolveLimits, SolveStatus};
use iab_planner::{schema_versions, Error};

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_NO_PLAN: u8 = 5;

#[derive(Parser)]
#[command(name = "iab-planner", about = "Donor-minimizing IAB backhaul planning", disable_version_flag = true)]
struct Cli {
    /// Print the tool and file-format versions.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Place gNBs at random and derive demands and candidate links.
    Generate(GenerateArgs),
    /// Solve the donor-minimizing plan for a scenario.
    Plan(PlanArgs),
    /// Check a plan against a scenario.
    Validate(CheckArgs),
    /// Replay link failures on a plan.
    Simulate(SimulateArgs),
    /// Sweep seeds and configurations, writing one CSV row per run.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Native,
    External,
}

#[derive(Args)]
struct RadioArgs {
    #[arg(long, default_value_t = 1)]
    mimo_layers: u32,
    #[arg(long)]
    fc_ghz: Option<f64>,
    /// MCS table CSV; the bundled 256-QAM table otherwise.
    #[arg(long)]
    mcs_table: Option<PathBuf>,
}

impl RadioArgs {
    fn radio(&self) -> RadioParams {
        let mut radio = RadioParams::default().with_mimo_layers(self.mimo_layers);
        if let Some(fc) = self.fc_ghz {
            radio.fc_ghz = fc;
        }
        radio
    }

    fn table(&self) -> Result<McsTable, Error> {
        match &self.mcs_table {
            Some(path) => McsTable::load_csv(path),
            None => Ok(McsTable::nr_256qam()),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    /// gNBs per km².
    #[arg(long, default_value_t = 45.0)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100.0)]
    coverage_radius: f64,
    #[arg(long, default_value_t = 1.0)]
    coverage_resolution: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    radio: RadioArgs,
    /// Output scenario JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long = "R", default_value_t = 1)]
    redundancy: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 4)]
    out_degree: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    flow: Switch,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    airtime_per_node: Switch,
    /// Donor egress cap in Mb/s; total demand when absent.
    #[arg(long)]
    donor_capacity: Option<f64>,
}

impl ParamArgs {
    fn params(&self) -> ModelParams {
        let mut p = ModelParams::new(self.depth, self.out_degree, self.redundancy)
            .with_flow(self.flow.on())
            .with_airtime_per_node(self.airtime_per_node.on());
        p.donor_capacity_mbps = self.donor_capacity;
        p
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value_t = Backend::Native)]
    backend: Backend,
    /// Command template with `{mps}` and `{sol}` placeholders.
    #[arg(long)]
    solver_cmd: Option<String>,
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0.0)]
    gap_target: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Start from the all-donors plan only.
    #[arg(long)]
    no_heuristic: bool,
    /// Also write the model in MPS format.
    #[arg(long)]
    export_mps: Option<PathBuf>,
    /// Output plan JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    check: CheckArgs,
    /// Fault schedule JSON. Without it every active link is failed once,
    /// one at a time, and the recovery is checked.
    #[arg(long)]
    faults: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    ticks: u64,
    #[arg(long, default_value_t = 5.0)]
    hop_latency_ms: f64,
    #[arg(long, default_value_t = 0.0)]
    switch_allowance_ms: f64,
    /// Output trace CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Seeds as a list and/or ranges, e.g. `1-30` or `1,4,9`.
    #[arg(long, default_value = "1-30", value_parser = parse_list)]
    seeds: List,
    #[arg(long = "n", default_value = "15", value_parser = parse_list)]
    node_counts: List,
    #[arg(long, default_value_t = 45.0)]
    density: f64,
    #[arg(long = "R", default_value = "1,2", value_parser = parse_list)]
    redundancies: List,
    #[arg(long, default_value = "1,2", value_parser = parse_list)]
    mimo_layers: List,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 4)]
    out_degree: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    airtime_per_node: Switch,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 1.0)]
    coverage_resolution: f64,
    /// Directory receiving `experiment.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Comma-separated values and inclusive ranges.
#[derive(Clone, Debug)]
struct List(Vec<u64>);

fn parse_list(text: &str) -> Result<List, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|e| format!("{part}: {e}"))?,
                    b.trim().parse().map_err(|e| format!("{part}: {e}"))?,
                );
                if a > b {
                    return Err(format!("empty range {part}"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|e| format!("{part}: {e}"))?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(List(out))
}

/// Error paired with the exit code it maps to.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Config(_) | Error::Parameter(_) => EXIT_PARSE,
            Error::Validation(_) => EXIT_INVALID,
            _ => EXIT_FAILURE,
        };
        Failure(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure(EXIT_FAILURE, format!("{}: {e}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let mut synthetic = SyntheticConfig::default();
    if let Some(l) = args.lambda {
        synthetic.lambda_mbps = l;
    }
    let spec = ExperimentSpec {
        density_per_km2: args.density,
        coverage_radius_m: args.coverage_radius,
        coverage_resolution_m: args.coverage_resolution,
        synthetic,
        radio: args.radio.radio(),
        mcs: args.radio.table()?,
        ..ExperimentSpec::default()
    };
    let graph = spec.scenario(args.seed, args.n, args.radio.mimo_layers)?;
    eprintln!("{} nodes, {} candidate links", graph.len(), graph.edges().len());
    match &args.out {
        Some(path) => save_scenario(&graph, path)?,
        None => write_output(None, &(graph.to_json_string() + "\n"))?,
    }
    Ok(())
}

fn plan(args: &PlanArgs) -> Result<(), Failure> {
    let graph = load_scenario(&args.input)?;
    let params = args.params.params();
    let model = build_model(&graph, &params)?;
    eprintln!(
        "{} nodes, {} links: {} variables, {} constraints",
        graph.len(),
        graph.edges().len(),
        model.num_vars(),
        model.constraints().len()
    );
    if let Some(path) = &args.export_mps {
        export_mps(&model, path)?;
    }
    let limits = SolveLimits {
        time_limit_s: args.time_limit,
        gap_target: args.gap_target,
        seed: args.seed,
        primal_heuristic: !args.no_heuristic,
        ..SolveLimits::default()
    };
    let sol = match args.backend {
        Backend::Native => solve_exact(&model, &limits)?,
        Backend::External => {
            let Some(cmd) = &args.solver_cmd else {
                return Err(Failure(EXIT_PARSE, "--backend external needs --solver-cmd".into()));
            };
            run_external(&model, cmd, &limits)?
        }
    };
    eprintln!(
        "status {}, objective {}, gap {:.4}, donors {:?}",
        sol.status.as_str(),
        sol.objective,
        sol.gap,
        sol.donor_set()
    );
    write_output(args.out.as_deref(), &(sol.to_json_string() + "\n"))?;
    match sol.status {
        SolveStatus::Infeasible => Err(Failure(EXIT_INFEASIBLE, "the model is infeasible".into())),
        SolveStatus::Timeout => Err(Failure(EXIT_NO_PLAN, "no plan found within the time limit".into())),
        _ => Ok(()),
    }
}

fn load_plan(args: &CheckArgs) -> Result<(iab_planner::scenario::ScenarioGraph, ModelParams, Solution), Failure> {
    let graph = load_scenario(&args.input)?;
    let solution = Solution::load(&args.solution)?;
    Ok((graph, args.params.params(), solution))
}

fn validate(args: &CheckArgs) -> Result<(), Failure> {
    let (graph, params, solution) = load_plan(args)?;
    let report = validate_solution(&graph, &params, &solution);
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure(EXIT_INVALID, format!("{} check(s) failed", report.failures().count())))
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let (graph, params, solution) = load_plan(&args.check)?;
    let topo = extract_multitree(&solution, &graph, &params)?;
    let Some(path) = &args.faults else {
        let mut failed = 0;
        let links: Vec<_> = solution.active_edges.iter().flatten().copied().collect();
        for &link in &links {
            let mut t = topo.clone();
            let Some(event) = inject_failure(&mut t, link) else { continue };
            let plan = reconfigure(&mut t, &event);
            let report = verify_recovery(&t, &graph, &params);
            let verdict = if report.passed() { "ok" } else { "FAIL" };
            println!(
                "{verdict} {}->{}: {} node(s) moved, {} unrecoverable",
                link.0,
                link.1,
                plan.entries.len(),
                report.unrecoverable.len()
            );
            failed += usize::from(!report.passed());
        }
        return if failed == 0 {
            Ok(())
        } else {
            Err(Failure(EXIT_INVALID, format!("{failed} of {} link failures not recovered", links.len())))
        };
    };
    let faults = load_fault_schedule(path)?;
    let config = TraceConfig {
        hop_latency_ms: args.hop_latency_ms,
        switch_allowance_ms: args.switch_allowance_ms,
        duration_ticks: args.ticks,
    };
    let rows = simulate_trace(&topo, &faults, &config);
    match &args.out {
        Some(out) => {
            let file = File::create(out).map_err(|e| io_failure(out, e))?;
            write_trace_csv(&rows, file)?;
        }
        None => write_trace_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs) -> Result<(), Failure> {
    let narrow = |v: &[u64], what: &str| -> Result<Vec<usize>, Failure> {
        v.iter()
            .map(|&x| usize::try_from(x).map_err(|_| Failure(EXIT_PARSE, format!("{what} {x} is too large"))))
            .collect()
    };
    let spec = ExperimentSpec {
        seeds: args.seeds.0.clone(),
        node_counts: narrow(&args.node_counts.0, "node count")?,
        density_per_km2: args.density,
        redundancies: narrow(&args.redundancies.0, "R")?,
        mimo_layers: args
            .mimo_layers
            .0
            .iter()
            .map(|&l| u32::try_from(l).map_err(|_| Failure(EXIT_PARSE, format!("layer count {l} is too large"))))
            .collect::<Result<_, _>>()?,
        limits: SolveLimits::default().with_time_limit(args.time_limit),
        max_depth: args.depth,
        max_out_degree: args.out_degree,
        airtime_per_node: args.airtime_per_node.on(),
        coverage_resolution_m: args.coverage_resolution,
        ..ExperimentSpec::default()
    };
    let rows = run_experiment(&spec, args.jobs)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;
    let path = args.out_dir.join("experiment.csv");
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    write_experiment_csv(&rows, file)?;
    for &r in &spec.redundancies {
        for &l in &spec.mimo_layers {
            if let Some(m) = median_rho(&rows, r, l) {
                eprintln!("R={r} layers={l}: median rho {m:.3}");
            }
        }
    }
    eprintln!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_PARSE) } else { ExitCode::SUCCESS };
        }
    };
    if cli.version {
        println!("iab-planner {}", env!("CARGO_PKG_VERSION"));
        for (name, version) in schema_versions() {
            println!("{name} {version}");
        }
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("no command given; see --help");
        return ExitCode::from(EXIT_PARSE);
    };
    let result = match &command {
        Command::Generate(a) => generate(a),
        Command::Plan(a) => plan(a),
        Command::Validate(a) => validate(a),
        Command::Simulate(a) => simulate(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
