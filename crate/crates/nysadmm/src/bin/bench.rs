use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nysadmm::bench::{
    run_bench, write_csv, write_json, BenchConfig, DataSource, NormArg, OutputFormat, PortfolioForm, ProblemKind,
    EXIT_INPUT_ERROR,
};

/// Solve one benchmark problem and print its timing record.
///
/// Exit codes: 0 optimal, 2 infeasible, 3 iteration or time limit,
/// 4 input error, 1 solver failure.
#[derive(Parser, Debug)]
#[command(name = "bench", version)]
struct Args {
    problem: ProblemKind,
    /// Features or variables.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Portfolio factors (`n = 100 k` assets).
    #[arg(long)]
    k: Option<usize>,
    /// Sample count for synthetic data.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// libsvm file, or a QP directory (P.mtx q.txt M.mtx l.txt u.txt).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PortfolioForm::Qp)]
    portfolio_form: PortfolioForm,
    #[arg(long)]
    no_preconditioner: bool,
    /// Solve every x-subproblem to 1e-12.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    norm: NormArg,
    #[arg(long)]
    sketch_rank: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT_ERROR as u8) } else { ExitCode::SUCCESS };
        }
    };
    let config = BenchConfig {
        problem: args.problem,
        n: args.n,
        samples: args.samples,
        k: args.k,
        source: match args.data {
            Some(p) => DataSource::File(p),
            None => DataSource::Synthetic { seed: args.seed },
        },
        portfolio_form: args.portfolio_form,
        tol: args.tol,
        max_iter: args.max_iter,
        norm: args.norm,
        no_preconditioner: args.no_preconditioner,
        exact: args.exact,
        sketch_rank: args.sketch_rank,
        record_history: args.format == OutputFormat::Json,
    };
    let record = match run_bench(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("bench: {e}");
            return ExitCode::from(EXIT_INPUT_ERROR as u8);
        }
    };
    if let Some(msg) = &record.error {
        eprintln!("bench: solver failed: {msg}");
    }

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => match File::create(p) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                eprintln!("bench: {}: {e}", p.display());
                return ExitCode::from(EXIT_INPUT_ERROR as u8);
            }
        },
        None => Box::new(io::stdout().lock()),
    };
    let records = [record];
    let written = match args.format {
        OutputFormat::Csv => write_csv(sink, &records).map_err(|e| e.to_string()),
        OutputFormat::Json => write_json(sink, &records).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("bench: writing output: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(records[0].exit_code() as u8)
}
