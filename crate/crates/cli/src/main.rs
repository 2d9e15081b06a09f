use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

use jaguar_core::decomposition::{enumerate_free_connex_tds, family_json, DEFAULT_MAX_VARS, DEFAULT_SELECTOR_LIMIT};
use jaguar_core::engine::{baseline_yannakakis, evaluate, AnswerSet, EngineConfig};
use jaguar_core::oracle::{brute_force, gen_random, gen_square, parse_random_spec, DEFAULT_BUDGET};
use jaguar_core::query::{catalog, classic_stats, default_stats, load_instance, parse_stats, RawInstance};
use jaguar_core::width::subw;
use jaguar_core::{ConjunctiveQuery, Database, Error, Statistics};

#[derive(Parser)]
#[command(name = "jaguar", version, about = "Conjunctive-query evaluation guided by submodularity violations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a query and write its answers as sorted TSV.
    Eval(EvalArgs),
    /// Compute the degree-aware submodular width of a query.
    Width(WidthArgs),
    /// Generate an instance.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Evaluate a query with the nested-loop reference evaluator.
    Oracle(OracleArgs),
    /// Run the engine on square instances of growing size and report work as CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Degree constraints, one `deg(R; Y|X) <= B` per line.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Use only cardinality constraints, with exponent 1.
    #[arg(long)]
    classic: bool,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Answers go here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the recursion trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Include each node's calibrated set function in the trace.
    #[arg(long, requires = "trace")]
    dump_g: bool,
    /// Print the decomposition family as JSON and stop.
    #[arg(long)]
    dump_tds: bool,
    /// Evaluate sibling branches one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct WidthArgs {
    #[arg(long)]
    query: PathBuf,
    /// Instance used to turn statistics into exponents (log base |D|).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, requires = "data", conflicts_with = "classic")]
    stats: Option<PathBuf>,
    /// Every atom bounded by N: plain submodular width.
    #[arg(long)]
    classic: bool,
    #[arg(long)]
    dump_tds: bool,
    /// Give up enumerating bag selectors after this many.
    #[arg(long, default_value_t = DEFAULT_SELECTOR_LIMIT)]
    selector_limit: usize,
}

#[derive(Subcommand)]
enum GenCommand {
    /// The skewed four-cycle instance with parameter m.
    Square {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniform random relations described by a spec file.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Query to run; the Boolean four-cycle by default.
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Smallest and largest m as powers of two.
    #[arg(long, default_value_t = 6)]
    min_log_m: u32,
    #[arg(long, default_value_t = 12)]
    max_log_m: u32,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also run plain Yannakakis through this decomposition of the family.
    #[arg(long)]
    baseline: Option<usize>,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) if e.is_internal() => 3,
            Failure::Core(_) => 2,
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("jaguar: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Outcome {
    let max_vars = max_vars()?;
    match command {
        Command::Eval(a) => eval(a, max_vars),
        Command::Width(a) => width(a, max_vars),
        Command::Gen(GenCommand::Square { m, out }) => Ok(gen_square(m)?.write(out)?),
        Command::Gen(GenCommand::Random { seed, spec, out }) => {
            let spec = parse_random_spec(&read(&spec)?)?;
            Ok(gen_random(seed, &spec)?.write(out)?)
        }
        Command::Oracle(a) => {
            let q = read_query(&a.query)?;
            let raw = load_instance(&a.data)?;
            let db = raw.bind(&q)?;
            let answers = AnswerSet::new(brute_force(&q, &db, DEFAULT_BUDGET)?);
            emit(a.output.as_deref(), &answers.to_tsv(&q, &raw.dict))
        }
        Command::Bench(a) => bench(a, max_vars),
    }
}

fn max_vars() -> Outcome<usize> {
    match std::env::var("JAGUAR_MAX_VARS") {
        Err(_) => Ok(DEFAULT_MAX_VARS),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| (1..=jaguar_core::relation::MAX_VARS).contains(&n))
            .ok_or_else(|| {
                Failure::Core(Error::Invalid(format!(
                    "JAGUAR_MAX_VARS must be an integer in 1..={}, got {s:?}",
                    jaguar_core::relation::MAX_VARS
                )))
            }),
    }
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Core(Error::Invalid(format!("cannot read {}: {e}", path.display()))))
}

fn read_query(path: &Path) -> Outcome<ConjunctiveQuery> {
    Ok(ConjunctiveQuery::parse(&read(path)?)?)
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::Core(Error::Invalid(format!("cannot write {}: {e}", p.display())))),
    }
}

fn pretty(v: &Json) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn statistics(
    q: &ConjunctiveQuery,
    raw: &RawInstance,
    db: &Database,
    stats: Option<&Path>,
    classic: bool,
) -> Outcome<Statistics> {
    match stats {
        Some(p) if classic => Err(Failure::Usage(format!(
            "--stats {} and --classic are mutually exclusive",
            p.display()
        ))),
        Some(p) => Ok(parse_stats(&read(p)?, q, db, Some(&raw.dict), db.size())?),
        None => Ok(default_stats(q, db, db.size(), classic)?),
    }
}

fn eval(a: EvalArgs, max_vars: usize) -> Outcome {
    let q = read_query(&a.query)?;
    if a.dump_tds {
        return emit(None, &pretty(&family_json(&q, &enumerate_free_connex_tds(&q, max_vars)?)));
    }
    let raw = load_instance(&a.data)?;
    let db = raw.bind(&q)?;
    let stats = statistics(&q, &raw, &db, a.stats.as_deref(), a.classic)?;
    let config = EngineConfig {
        epsilon: a.epsilon,
        max_vars,
        parallel: !a.sequential,
        record_g: a.dump_g,
        ..EngineConfig::default()
    };
    let ev = evaluate(&q, &stats, &db, &config)?;
    if let Some(path) = &a.trace {
        let mut t = ev.trace.to_json(&q);
        t["work"] = json!(ev.work);
        t["brute_force"] = json!(ev.brute_force);
        emit(Some(path), &pretty(&t))?;
    }
    emit(a.output.as_deref(), &ev.answers.to_tsv(&q, &raw.dict))
}

fn width(a: WidthArgs, max_vars: usize) -> Outcome {
    let q = read_query(&a.query)?;
    if a.dump_tds {
        return emit(None, &pretty(&family_json(&q, &enumerate_free_connex_tds(&q, max_vars)?)));
    }
    let stats = match &a.data {
        Some(dir) if !a.classic => {
            let raw = load_instance(dir)?;
            let db = raw.bind(&q)?;
            statistics(&q, &raw, &db, a.stats.as_deref(), false)?
        }
        _ => classic_stats(&q),
    };
    let w = subw(&q, &stats, max_vars, a.selector_limit)?;
    emit(None, &pretty(&w.to_json(&q)))
}

fn bench(a: BenchArgs, max_vars: usize) -> Outcome {
    if a.min_log_m == 0 || a.min_log_m > a.max_log_m || a.max_log_m > 24 {
        return Err(Failure::Usage("need 1 <= --min-log-m <= --max-log-m <= 24".into()));
    }
    let q = match &a.query {
        Some(p) => read_query(p)?,
        None => ConjunctiveQuery::parse(catalog::FOUR_CYCLE_BOOLEAN)?,
    };
    let mut header = "m,N,epsilon,join_work_tuples,heavy_edges_max,light_run_max,wall_ms".to_string();
    if a.baseline.is_some() {
        header.push_str(",baseline_work_tuples,baseline_wall_ms");
    }
    let mut csv = header + "\n";
    let config = EngineConfig {
        epsilon: a.epsilon,
        max_vars,
        ..EngineConfig::default()
    };
    for k in a.min_log_m..=a.max_log_m {
        let m = 1usize << k;
        let db = gen_square(m)?.bind(&q)?;
        let stats = default_stats(&q, &db, db.size(), false)?;
        let started = Instant::now();
        let ev = evaluate(&q, &stats, &db, &config)?;
        let wall = started.elapsed().as_millis();
        csv.push_str(&format!(
            "{m},{},{},{},{},{},{wall}",
            db.size(),
            a.epsilon,
            ev.work,
            ev.trace.heavy_edges_max(),
            ev.trace.light_run_max()
        ));
        if let Some(td) = a.baseline {
            let started = Instant::now();
            let (_, work) = baseline_yannakakis(&q, &db, td, max_vars)?;
            csv.push_str(&format!(",{work},{}", started.elapsed().as_millis()));
        }
        csv.push('\n');
    }
    emit(a.csv.as_deref(), &csv)
}
