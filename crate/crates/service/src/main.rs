//! `casa`: assess arguments, run evaluations, suggest objections and serve the API.
//!
//! Exit codes: 0 on success, 2 on input or usage errors, 3 on backend errors.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use casa_core::assistance::{revise_with_llm, suggest};
use casa_core::eval::{
    compare_reports, convert_bigbench, convert_climate, load_bigbench_lfd, load_climate, load_dataset, run_method,
    sweep_csv, sweep_n, write_records, Dataset, Method, Report,
};
use casa_core::pipeline::Casa;
use casa_core::{Argument, CasaError, Label, Variant};
use casa_service::{ConfigError, ServiceConfig};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "casa", version, about = "Argument sufficiency assessment")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Pipeline variant: full, no_intervention, no_cond_x0, no_cond_y0, concat_intervention.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON script for scripted backends.
    #[arg(long, global = true)]
    mock: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assess arguments from a file or `-` for stdin: plain text with one
    /// argument per line, or JSON (`{"id", "text"}`, a string, or an array of either).
    Assess {
        input: String,
        /// Print the full step trace with each verdict.
        #[arg(long)]
        trace: bool,
    },
    /// Run one method over a dataset and write a JSON report.
    Eval {
        /// `bigbench`, `climate`, or a path to a dataset file.
        #[arg(long)]
        dataset: String,
        /// casa, zero_shot:K, one_shot:K, perplexity or direct_nli.
        #[arg(long, default_value = "casa")]
        method: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run CASA for several values of n and write a CSV of the metrics.
    Sweep {
        #[arg(long)]
        dataset: String,
        /// Inclusive range `a..b` or a comma-separated list.
        #[arg(long, default_value = "1..9")]
        n: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one report per n into this directory.
        #[arg(long)]
        reports_dir: Option<PathBuf>,
    },
    /// Suggest objection situations for the argument in a file.
    Assist {
        input: PathBuf,
        /// Also ask the LLM to revise the argument against each objection.
        #[arg(long)]
        revise: bool,
    },
    /// Paired permutation test between two reports on the same dataset.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Inspect or empty the response cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Convert an upstream dataset release into the dataset schema.
    Convert {
        /// `bigbench` (task JSON) or `climate` (CSV or JSON lines).
        dataset: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
}

#[derive(Debug, Subcommand)]
enum CacheAction {
    Stats,
    Clear,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Backend(String),
}

impl From<CasaError> for Failure {
    fn from(e: CasaError) -> Self {
        if e.is_backend() {
            Failure::Backend(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Casa(c) => c.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Backend(m)) => {
            eprintln!("backend error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut config = ServiceConfig::load(cli.config.as_deref())?;
    if let Some(v) = cli.variant {
        config.variant = v;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(m) = cli.mock {
        config.mock = Some(m);
    }
    match cli.command {
        Command::Assess { input, trace } => assess(&config, &input, trace),
        Command::Eval { dataset, method, n, out } => eval(config, &dataset, &method, n, out),
        Command::Sweep { dataset, n, out, reports_dir } => sweep(&config, &dataset, &n, out, reports_dir),
        Command::Assist { input, revise } => assist(&config, &input, revise),
        Command::Compare { a, b, resamples } => compare(&config, &a, &b, resamples),
        Command::Serve { bind } => {
            if let Some(b) = bind {
                config.bind = b;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(casa_service::serve(config)).map_err(|e| Failure::Input(e.to_string()))
        }
        Command::Cache { action } => cache(&config, action),
        Command::Convert { dataset, input, output, split } => convert(&dataset, &input, &output, &split),
    }
}

fn engine(config: &ServiceConfig) -> Result<Casa, Failure> {
    let b = config.backends()?;
    Ok(Casa::new(config.pipeline()?, b.llm, b.nli)?)
}

fn read_input(input: &str) -> Result<String, Failure> {
    if input == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(input).map_err(|e| Failure::Input(format!("{input}: {e}")))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InputItem {
    Text(String),
    Object { #[serde(default)] id: Option<String>, text: String },
}

fn parse_arguments(content: &str) -> Result<Vec<Argument>, Failure> {
    let trimmed = content.trim_start();
    let items: Vec<(Option<String>, String)> = if trimmed.starts_with('{') || trimmed.starts_with('[') || trimmed.starts_with('"') {
        let value: Value = serde_json::from_str(content).map_err(|e| Failure::Input(format!("invalid JSON input: {e}")))?;
        let list = match value {
            Value::Array(a) => a,
            other => vec![other],
        };
        list.into_iter()
            .map(|v| match serde_json::from_value::<InputItem>(v) {
                Ok(InputItem::Text(t)) => Ok((None, t)),
                Ok(InputItem::Object { id, text }) => Ok((id, text)),
                Err(e) => Err(Failure::Input(format!("invalid argument record: {e}"))),
            })
            .collect::<Result<_, _>>()?
    } else {
        content.lines().filter(|l| !l.trim().is_empty()).map(|l| (None, l.trim().to_string())).collect()
    };
    if items.is_empty() {
        return Err(Failure::Input("no arguments in input".into()));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, (id, text))| Ok(Argument::new(id.unwrap_or_else(|| format!("arg-{}", i + 1)), text)?))
        .collect()
}

fn assess(config: &ServiceConfig, input: &str, trace: bool) -> Outcome {
    let casa = engine(config)?;
    let arguments = parse_arguments(&read_input(input)?)?;
    let mut input_error = None;
    for argument in &arguments {
        match casa.assess(argument) {
            Ok(a) => {
                let line = if trace { serde_json::to_string(&a) } else { serde_json::to_string(&a.verdict) };
                println!("{}", line.expect("verdict serializes"));
            }
            Err(e) if e.is_backend() => return Err(e.into()),
            Err(e) => {
                eprintln!("{}: {e}", argument.id);
                input_error = Some(e);
            }
        }
    }
    match input_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn load_named(config: &ServiceConfig, dataset: &str) -> Result<Dataset, Failure> {
    let named = |file: &str| config.data_dir.join(file);
    Ok(match dataset {
        "bigbench" => load_bigbench_lfd(&named("bigbench.jsonl"))?,
        "climate" => load_climate(&named("climate.jsonl"))?,
        path => {
            let p = Path::new(path);
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
            load_dataset(p, name)?
        }
    })
}

fn write_file(path: &Path, content: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, content).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn eval(mut config: ServiceConfig, dataset: &str, method: &str, n: Option<usize>, out: Option<PathBuf>) -> Outcome {
    if let Some(n) = n {
        config.n = n;
    }
    let method: Method = method.parse()?;
    let data = load_named(&config, dataset)?;
    let report = run_method(method, &data, &engine(&config)?)?;
    let out = out.unwrap_or_else(|| {
        PathBuf::from("reports").join(format!("{}_{}.json", data.name, method.to_string().replace(':', "-")))
    });
    write_file(&out, &report.to_json())?;
    println!(
        "{}",
        json!({"report": out, "accuracy": report.accuracy, "macro_f1": report.macro_f1, "evaluated": report.evaluated, "errors": report.errors})
    );
    match report.interrupted {
        Some(m) => Err(Failure::Backend(format!("run interrupted, partial report written: {m}"))),
        None => Ok(()),
    }
}

fn parse_n_values(values_arg: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Input(format!("invalid n values {values_arg:?}; use a..b or a,b,c"));
    let values: Vec<usize> = match values_arg.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<usize>().map_err(|_| bad())?, b.trim().parse::<usize>().map_err(|_| bad())?);
            (a..=b).collect()
        }
        None => values_arg.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

fn sweep(config: &ServiceConfig, dataset: &str, n: &str, out: Option<PathBuf>, reports_dir: Option<PathBuf>) -> Outcome {
    let values = parse_n_values(n)?;
    let data = load_named(config, dataset)?;
    let reports = sweep_n(&data, &engine(config)?, &values)?;
    if let Some(dir) = reports_dir {
        for r in &reports {
            write_file(&dir.join(format!("{}_casa_n{}.json", data.name, r.n.unwrap_or(0))), &r.to_json())?;
        }
    }
    let csv = sweep_csv(&reports);
    let out = out.unwrap_or_else(|| PathBuf::from("reports").join(format!("{}_sweep.csv", data.name)));
    write_file(&out, &csv)?;
    print!("{csv}");
    match reports.iter().find_map(|r| r.interrupted.clone()) {
        Some(m) => Err(Failure::Backend(format!("sweep interrupted: {m}"))),
        None => Ok(()),
    }
}

fn assist(config: &ServiceConfig, input: &Path, revise: bool) -> Outcome {
    let text = fs::read_to_string(input).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    let casa = engine(config)?;
    let argument = Argument::new(input.file_stem().and_then(|s| s.to_str()).unwrap_or("argument"), text.trim())?;
    let s = suggest(&casa, &argument, config.seed)?;
    let mut suggestions = serde_json::to_value(&s.suggestions).expect("suggestions serialize");
    if revise {
        for (item, sug) in suggestions.as_array_mut().expect("array").iter_mut().zip(&s.suggestions) {
            item["revised_argument"] = Value::String(revise_with_llm(&argument.text, &sug.objection, casa.llm())?);
        }
    }
    let body = json!({"verdict": s.assessment.verdict, "suggestions": suggestions});
    println!("{}", serde_json::to_string_pretty(&body).expect("json"));
    Ok(())
}

fn compare(config: &ServiceConfig, a: &Path, b: &Path, resamples: usize) -> Outcome {
    let load = |p: &Path| -> Result<Report, Failure> {
        Report::from_json(&fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?)
            .map_err(Failure::from)
    };
    let (ra, rb) = (load(a)?, load(b)?);
    let p = compare_reports(&ra, &rb, resamples, config.seed)?;
    println!(
        "{}",
        json!({"a": ra.method, "b": rb.method, "accuracy_a": ra.accuracy, "accuracy_b": rb.accuracy, "p_value": p, "resamples": resamples, "seed": config.seed})
    );
    Ok(())
}

fn cache(config: &ServiceConfig, action: CacheAction) -> Outcome {
    let cache = config
        .open_cache()?
        .ok_or_else(|| Failure::Input("no cache configured; set cache_path or CASA_CACHE_PATH".into()))?;
    match action {
        CacheAction::Stats => println!("{}", serde_json::to_string(&cache.stats()?).expect("stats serialize")),
        CacheAction::Clear => {
            let before = cache.len();
            cache.clear()?;
            println!("{}", json!({"cleared": before}));
        }
    }
    Ok(())
}

fn convert(dataset: &str, input: &Path, output: &Path, split: &str) -> Outcome {
    let content = fs::read_to_string(input).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    let records = match dataset {
        "bigbench" => convert_bigbench(&content)?,
        "climate" => convert_climate(&content, split)?,
        other => return Err(Failure::Input(format!("unknown dataset {other:?}; use bigbench or climate"))),
    };
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_records(output, &records)?;
    let correct = records.iter().filter(|r| r.gold() == Some(Label::Sufficient)).count();
    let formal = records.iter().filter(|r| r.is_formal()).count();
    println!("{}", json!({"records": records.len(), "correct": correct, "formal": formal, "output": output}));
    Ok(())
}
