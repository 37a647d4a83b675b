use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexplan::fltl::{evaluate, minimize_dfa, parse_fltl, to_dfa, Letter};
use lexplan::lex::{run_policy, solve_lexicographic};
use lexplan::product::satisfaction_probability;
use lexplan::scenario::{
    experiment_1, experiment_2, read_archive, read_jsonl, render, write_archive, write_jsonl, ScenarioFile,
    TrajectoryReport,
};
use lexplan::Error;

/// Lexicographic max/sum planning under finite-trace temporal constraints.
#[derive(Debug, Parser)]
#[command(name = "lexplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile an FLTL formula to a deterministic automaton.
    Translate(TranslateArgs),
    /// Solve a scenario and write the solution archive.
    Solve(SolveArgs),
    /// Simulate a stored solution and print JSON lines.
    Simulate(SimulateArgs),
    /// Exact satisfaction probability and initial values of a solution.
    Eval(EvalArgs),
    /// Draw trajectories on the scenario grid.
    Render(RenderArgs),
    /// Write the bundled single-objective gateway scenario.
    #[command(name = "experiment-1", alias = "paper-ex1")]
    Experiment1(ExportArgs),
    /// Write the bundled waypoint scenario with the temporal constraint.
    #[command(name = "experiment-2", alias = "paper-ex2")]
    Experiment2(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DfaFormat {
    Json,
    Dot,
}

#[derive(Debug, Args)]
struct TranslateArgs {
    formula: String,
    /// Atomic propositions (repeat or separate with commas).
    #[arg(long, value_delimiter = ',')]
    ap: Vec<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: DfaFormat,
    /// Keep the raw subset construction.
    #[arg(long)]
    no_minimize: bool,
    /// Check a word instead of printing the automaton. Positions are
    /// separated by `;`, propositions within a position by `,`.
    #[arg(long)]
    word: Option<String>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    scenario: PathBuf,
    /// Archive directory to create.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    c_fail: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Replace the scenario's formula.
    #[arg(long)]
    formula: Option<String>,
    /// Spread the backups over all cores.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    archive: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short, default_value_t = 1)]
    n: usize,
    /// Write to a file instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    archive: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenario", "archive"]))]
struct RenderArgs {
    /// JSON-lines trajectory file.
    report: PathBuf,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    archive: Option<PathBuf>,
    /// Render only the report on this line (0-based).
    #[arg(long)]
    index: Option<usize>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Write to a file instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Everything here maps to exit code 2 except capacity errors.
#[derive(Debug)]
enum Failure {
    Input(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_word(text: &str, ap: &[String]) -> Result<Vec<Letter>, Failure> {
    text.split(';')
        .map(|pos| {
            let props: Vec<&str> = pos.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
            if let Some(bad) = props.iter().find(|p| !ap.iter().any(|a| a == *p)) {
                return Err(Failure::Input(format!("word mentions undeclared proposition `{bad}`")));
            }
            Ok(Letter::from_props(ap, &props))
        })
        .collect()
}

fn translate(args: TranslateArgs) -> Result<(), Failure> {
    let phi = parse_fltl(&args.formula, &args.ap)?;
    let raw = to_dfa(&phi, &args.ap)?;
    let dfa = if args.no_minimize { raw } else { minimize_dfa(&raw)? };
    if let Some(w) = args.word {
        // The semantics are only defined on nonempty words.
        if w.is_empty() {
            return Err(Failure::Input("the word must have at least one position".into()));
        }
        let word = parse_word(&w, &args.ap)?;
        let report = serde_json::json!({
            "length": word.len(),
            "automaton": dfa.accepts(&word),
            "semantics": evaluate(&phi, &word),
        });
        println!("{report}");
        return Ok(());
    }
    let text = match args.format {
        DfaFormat::Json => serde_json::to_string_pretty(&dfa.to_json()).map_err(Error::from)? + "\n",
        DfaFormat::Dot => dfa.to_dot(),
    };
    emit(None, &text)
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let mut file = ScenarioFile::load(&args.scenario)?;
    if args.horizon.is_some() {
        file.horizon = args.horizon;
    }
    if args.c_fail.is_some() {
        file.c_fail = args.c_fail;
    }
    if args.epsilon.is_some() {
        file.epsilon = args.epsilon;
    }
    if args.formula.is_some() {
        file.formula = args.formula;
    }
    let model = file.compile().map_err(|e| e.with_path(&args.scenario))?;
    let product = model.product()?;
    let mut cfg = model.solver_config().map_err(|e| e.with_path(&args.scenario))?;
    cfg.parallel = args.parallel;
    for w in cfg.warnings(&product, &model.costs) {
        eprintln!("warning: {w}");
    }
    let sol = solve_lexicographic(&product, &model.costs, &cfg)?;
    write_archive(&args.out, &file, &product, &sol)?;
    eprintln!(
        "solved {} product states over {} augmented states; initial values {:?}",
        product.num_states(),
        sol.num_augmented_states(),
        sol.initial_values()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let loaded = read_archive(&args.archive)?;
    let stats = run_policy(&loaded.product, &loaded.model.costs, &loaded.solution, args.seed, args.n)?;
    let sys = loaded.product.base();
    let reports: Vec<TrajectoryReport> = stats.runs.iter().map(|r| TrajectoryReport::from_run(sys, r)).collect();
    let mut buf = Vec::new();
    write_jsonl(&reports, &mut buf)?;
    emit(args.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let loaded = read_archive(&args.archive)?;
    let sol = &loaded.solution;
    let p = satisfaction_probability(&loaded.product, sol, sol.horizon())?;
    let report = serde_json::json!({
        "satisfaction_probability": p,
        "initial_values": sol.initial_values(),
        "aggregations": sol.aggregations(),
        "horizon": sol.horizon(),
        "c_fail": sol.c_fail(),
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn render_cmd(args: RenderArgs) -> Result<(), Failure> {
    let model = match (&args.scenario, &args.archive) {
        (Some(path), _) => ScenarioFile::load(path)?.compile().map_err(|e| e.with_path(path))?,
        (None, Some(dir)) => read_archive(dir)?.model,
        (None, None) => unreachable!("clap requires one source"),
    };
    let grid = model
        .grid
        .as_ref()
        .ok_or_else(|| Failure::Input("the scenario has no grid layout to draw on".into()))?;
    let text = read_text(&args.report)?;
    let reports = read_jsonl(&text).map_err(|e| e.with_path(&args.report))?;
    let picked: Vec<&TrajectoryReport> = match args.index {
        Some(i) => vec![reports
            .get(i)
            .ok_or_else(|| Failure::Input(format!("report {i} out of range ({} available)", reports.len())))?],
        None => reports.iter().collect(),
    };
    let mut out = std::io::stdout().lock();
    for (i, r) in picked.into_iter().enumerate() {
        if i > 0 {
            let _ = writeln!(out);
        }
        let _ = write!(out, "{}", render(grid, &model.system, &model.costs, r)?);
    }
    Ok(())
}

fn export(file: ScenarioFile, args: ExportArgs) -> Result<(), Failure> {
    emit(args.out.as_deref(), &file.to_canonical_json()?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Translate(a) => translate(a),
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render_cmd(a),
        Command::Experiment1(a) => export(experiment_1(), a),
        Command::Experiment2(a) => export(experiment_2(), a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_capacity() { 3 } else { 2 })
        }
    }
}
