//! Benchmark runs: build a problem, solve it with timing, emit records.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use nysadmm_core::admm::{solve_with, IterationRecord};
use nysadmm_core::linalg::NormKind;
use nysadmm_core::operators::{CsrMatrix, SharedOperator};
use nysadmm_core::problems::reformulations::{
    bounded_least_squares, portfolio_custom_qp, portfolio_generic, portfolio_qp,
};
use nysadmm_core::problems::GenericProblem;
use nysadmm_core::{MlProblem, SolveResult, SolveStatus, SolverOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::MonotonicClock;
use crate::generators;
use crate::io::{read_libsvm, read_qp_dir, Dataset, InputError};

/// Exact CSV header of [`write_csv`].
pub const CSV_HEADER: &str =
    "problem,n,status,iters,setup_s,precond_s,linsys_total_s,linsys_avg_ms,prox_total_s,prox_avg_ms,total_s,rp,rd,objective";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ProblemKind {
    Lasso,
    ElasticNet,
    Logistic,
    Huber,
    BoundedLs,
    Portfolio,
    QpFile,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Lasso => "lasso",
            ProblemKind::ElasticNet => "elastic_net",
            ProblemKind::Logistic => "logistic",
            ProblemKind::Huber => "huber",
            ProblemKind::BoundedLs => "bounded_ls",
            ProblemKind::Portfolio => "portfolio",
            ProblemKind::QpFile => "qp_file",
        }
    }
}

/// Which of the three portfolio formulations to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PortfolioForm {
    /// Lifted QP with the factor exposure as extra variables.
    #[default]
    Qp,
    /// Original QP with a diagonal-plus-low-rank `P`.
    Custom,
    /// Generic interface with projection onto the simplex.
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum NormArg {
    #[default]
    L2,
    Linf,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L2 => NormKind::L2,
            NormArg::Linf => NormKind::Linf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic { seed: u64 },
    /// libsvm file, or a directory of QP files for `qp_file`.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub problem: ProblemKind,
    /// Number of features (or variables).
    pub n: usize,
    /// Sample count for synthetic ML and least-squares data; defaults per
    /// problem.
    pub samples: Option<usize>,
    /// Portfolio factor count; `n = 100 k` assets.
    pub k: Option<usize>,
    pub source: DataSource,
    pub portfolio_form: PortfolioForm,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub norm: NormArg,
    pub no_preconditioner: bool,
    pub exact: bool,
    pub sketch_rank: Option<usize>,
    pub record_history: bool,
}

impl BenchConfig {
    pub fn synthetic(problem: ProblemKind, n: usize, seed: u64) -> Self {
        BenchConfig {
            problem,
            n,
            samples: None,
            k: None,
            source: DataSource::Synthetic { seed },
            portfolio_form: PortfolioForm::default(),
            tol: None,
            max_iter: None,
            norm: NormArg::L2,
            no_preconditioner: false,
            exact: false,
            sketch_rank: None,
            record_history: true,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.n == 0 && !matches!(self.problem, ProblemKind::Portfolio | ProblemKind::QpFile) {
            return bad("--n must be positive");
        }
        if self.samples == Some(0) || self.k == Some(0) {
            return bad("sizes must be positive");
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return bad("--tol must be positive");
            }
        }
        match (&self.source, self.problem) {
            (DataSource::Synthetic { .. }, ProblemKind::QpFile) => bad("qp_file needs --data <dir>"),
            (DataSource::File(_), ProblemKind::Portfolio) => bad("portfolio data is synthetic only"),
            (DataSource::Synthetic { .. }, ProblemKind::Huber) if self.n < 4 || self.n % 2 == 1 => {
                bad("huber needs an even n >= 4")
            }
            _ => Ok(()),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions { norm: self.norm.into(), ..SolverOptions::default() };
        if let Some(t) = self.tol {
            o.eps_abs = t;
            o.eps_rel = t;
            o.eps_dual_gap = t;
        }
        if let Some(m) = self.max_iter {
            o.max_iter = m;
        }
        if let DataSource::Synthetic { seed } = self.source {
            o.rng_seed = seed;
        }
        o.use_preconditioner = !self.no_preconditioner;
        o.exact_x_solve = self.exact;
        o.sketch_rank = self.sketch_rank;
        o.record_history = self.record_history;
        o
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Input(#[from] InputError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub rp: f64,
    pub rd: f64,
    pub objective: f64,
    pub rho: f64,
    pub cg_iters: usize,
    pub measure: Option<f64>,
    pub elapsed_s: f64,
}

impl From<&IterationRecord> for HistoryRow {
    fn from(r: &IterationRecord) -> Self {
        HistoryRow {
            iter: r.iter,
            rp: r.rp_norm,
            rd: r.rd_norm,
            objective: r.objective,
            rho: r.rho,
            cg_iters: r.cg_iters,
            measure: r.measure,
            elapsed_s: r.elapsed_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub n: usize,
    /// Solver status, or `error` when the solve failed.
    pub status: String,
    pub iters: usize,
    pub setup_s: f64,
    pub precond_s: f64,
    pub linsys_total_s: f64,
    pub linsys_avg_ms: f64,
    pub prox_total_s: f64,
    pub prox_avg_ms: f64,
    pub total_s: f64,
    #[serde(with = "non_finite")]
    pub rp: f64,
    #[serde(with = "non_finite")]
    pub rd: f64,
    #[serde(with = "non_finite")]
    pub objective: f64,
    pub cg_iters: usize,
    pub preconditioner: bool,
    pub exact: bool,
    /// `synthetic` or `file`.
    pub data_source: String,
    /// Synthetic data substitutes for the real datasets of the original
    /// experiments.
    pub synthetic_stand_in: bool,
    pub seed: Option<u64>,
    pub error: Option<String>,
    pub history: Vec<HistoryRow>,
}

/// JSON has no NaN; failed runs store `null` and read back as NaN.
mod non_finite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl RunRecord {
    /// Process exit code: 0 optimal, 2 infeasible, 3 iteration or time
    /// limit, 1 solver failure.
    pub fn exit_code(&self) -> i32 {
        match self.status.as_str() {
            "optimal" => 0,
            "primal_infeasible" | "dual_infeasible" | "primal_and_dual_infeasible" => 2,
            "iteration_limit" | "time_limit" => 3,
            _ => 1,
        }
    }
}

/// Exit code for configuration and input errors.
pub const EXIT_INPUT_ERROR: i32 = 4;

pub fn status_exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Optimal => 0,
        s if s.is_infeasible() => 2,
        _ => 3,
    }
}

fn dense(a: &DMatrix<f64>) -> SharedOperator {
    Arc::new(a.clone())
}

fn load(path: &PathBuf) -> Result<Dataset, BenchError> {
    Ok(read_libsvm(path)?)
}

/// Rows scaled by `-label`; labels `<= 0` count as `-1`.
fn fold_labels(d: &Dataset) -> Result<CsrMatrix, BenchError> {
    let mut t = Vec::with_capacity(d.a.nnz());
    for i in 0..d.a.nrows() {
        let s = if d.b[i] > 0.0 { -1.0 } else { 1.0 };
        let (cols, vals) = d.a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            t.push((i, j, s * v));
        }
    }
    CsrMatrix::from_triplets(d.a.nrows(), d.a.ncols(), &t).map_err(|e| BenchError::Input(e.into()))
}

fn linf_at(a: &dyn nysadmm_core::LinearOperator, b: &[f64]) -> f64 {
    a.apply_adjoint(b).map(|v| nysadmm_core::linalg::norm_inf(&v)).unwrap_or(0.0)
}

/// The problem a config describes, plus its reported size.
pub fn build_problem(config: &BenchConfig) -> Result<(GenericProblem, usize), BenchError> {
    config.validate()?;
    let n = config.n;
    let samples = config.samples;
    let err = |e: nysadmm_core::problems::ProblemError| BenchError::Input(e.into());
    let built = match (config.problem, &config.source) {
        (ProblemKind::Lasso, DataSource::Synthetic { seed }) => {
            let d = generators::lasso_data(samples.unwrap_or(2 * n), n, *seed);
            MlProblem::lasso(dense(&d.a), d.b, d.lambda1).map_err(err)?.to_generic()
        }
        (ProblemKind::ElasticNet, DataSource::Synthetic { seed }) => {
            let d = generators::low_rank_regression(samples.unwrap_or(2 * n), n, *seed);
            MlProblem::elastic_net(dense(&d.a), d.b, d.lambda1, d.lambda1).map_err(err)?.to_generic()
        }
        (ProblemKind::Logistic, DataSource::Synthetic { seed }) => {
            let d = generators::logistic_data(samples.unwrap_or(2 * n), n, *seed);
            MlProblem::logistic(dense(&d.a), d.lambda1, 0.0).map_err(err)?.to_generic()
        }
        (ProblemKind::Huber, DataSource::Synthetic { seed }) => {
            let d = generators::huber_data(n, *seed);
            huber_problem(MlProblem::huber(dense(&d.a), d.b, d.lambda1).map_err(err)?, config)
        }
        (ProblemKind::BoundedLs, DataSource::Synthetic { seed }) => {
            let s = samples.unwrap_or(2 * n);
            if s % 2 == 1 {
                return Err(BenchError::Config("bounded_ls needs an even sample count".into()));
            }
            generators::bounded_ls_data(s, *seed).qp.to_generic()
        }
        (ProblemKind::Portfolio, DataSource::Synthetic { seed }) => {
            let data = generators::portfolio_data(config.k.unwrap_or(1), *seed);
            match config.portfolio_form {
                PortfolioForm::Qp => portfolio_qp(&data).map_err(err)?.to_generic(),
                PortfolioForm::Custom => portfolio_custom_qp(&data).map_err(err)?.to_generic(),
                PortfolioForm::Generic => portfolio_generic(&data).map_err(err)?,
            }
        }
        (ProblemKind::QpFile, DataSource::File(dir)) => read_qp_dir(dir)?.to_generic(),
        (ProblemKind::Lasso | ProblemKind::ElasticNet, DataSource::File(p)) => {
            let d = load(p)?;
            let a: SharedOperator = Arc::new(d.a);
            let lam = 0.1 * linf_at(&*a, &d.b);
            let ml = if config.problem == ProblemKind::Lasso {
                MlProblem::lasso(a, d.b, lam)
            } else {
                MlProblem::elastic_net(a, d.b, lam, lam)
            };
            ml.map_err(err)?.to_generic()
        }
        (ProblemKind::Logistic, DataSource::File(p)) => {
            let d = load(p)?;
            let a: SharedOperator = Arc::new(fold_labels(&d)?);
            let lam = 0.05 * linf_at(&*a, &vec![1.0; d.b.len()]);
            MlProblem::logistic(a, lam, 0.0).map_err(err)?.to_generic()
        }
        (ProblemKind::Huber, DataSource::File(p)) => {
            let d = load(p)?;
            let a: SharedOperator = Arc::new(d.a);
            let lam = 0.1 * linf_at(&*a, &d.b);
            huber_problem(MlProblem::huber(a, d.b, lam).map_err(err)?, config)
        }
        (ProblemKind::BoundedLs, DataSource::File(p)) => {
            let d = load(p)?;
            bounded_least_squares(&d.a.to_dense(), &d.b).map_err(err)?.to_generic()
        }
        (ProblemKind::Portfolio, DataSource::File(_)) | (ProblemKind::QpFile, DataSource::Synthetic { .. }) => {
            unreachable!("rejected by validate")
        }
    };
    let size = built.n();
    Ok((built, size))
}

fn huber_problem(ml: MlProblem, config: &BenchConfig) -> GenericProblem {
    let rule = ml.subdiff_stopping_rule(config.tol.unwrap_or(1e-4));
    ml.to_generic().with_convergence(rule)
}

/// Builds and solves the configured problem. Input errors are returned;
/// solver failures are recorded with status `error`.
pub fn run_bench(config: &BenchConfig) -> Result<RunRecord, BenchError> {
    let (problem, n) = build_problem(config)?;
    let opts = config.solver_options();
    let clock = MonotonicClock::new();
    let outcome = solve_with(&problem, &opts, &clock, None);
    let (data_source, seed) = match config.source {
        DataSource::Synthetic { seed } => ("synthetic", Some(seed)),
        DataSource::File(_) => ("file", None),
    };
    let mut rec = RunRecord {
        problem: config.problem.name().to_string(),
        n,
        status: "error".to_string(),
        iters: 0,
        setup_s: 0.0,
        precond_s: 0.0,
        linsys_total_s: 0.0,
        linsys_avg_ms: 0.0,
        prox_total_s: 0.0,
        prox_avg_ms: 0.0,
        total_s: 0.0,
        rp: f64::NAN,
        rd: f64::NAN,
        objective: f64::NAN,
        cg_iters: 0,
        preconditioner: opts.use_preconditioner,
        exact: opts.exact_x_solve,
        data_source: data_source.to_string(),
        synthetic_stand_in: data_source == "synthetic",
        seed,
        error: None,
        history: Vec::new(),
    };
    match outcome {
        Ok(res) => fill(&mut rec, &res),
        Err(e) => {
            rec.total_s = nysadmm_core::Clock::now(&clock);
            rec.error = Some(e.to_string());
        }
    }
    Ok(rec)
}

fn fill(rec: &mut RunRecord, res: &SolveResult) {
    let t = &res.timings;
    let per = |total: f64| if res.iterations > 0 { 1e3 * total / res.iterations as f64 } else { 0.0 };
    rec.status = res.status.as_str().to_string();
    rec.iters = res.iterations;
    rec.setup_s = t.setup_s;
    rec.precond_s = t.precond_s;
    rec.linsys_total_s = t.linsys_s;
    rec.linsys_avg_ms = per(t.linsys_s);
    rec.prox_total_s = t.prox_s;
    rec.prox_avg_ms = per(t.prox_s);
    rec.total_s = t.total_s;
    rec.rp = res.rp_norm;
    rec.rd = res.rd_norm;
    rec.objective = res.objective;
    rec.cg_iters = res.total_cg_iters;
    rec.history = res.history.iter().map(HistoryRow::from).collect();
}

/// One CSV row per record under [`CSV_HEADER`].
pub fn write_csv<W: Write>(w: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER.split(','))?;
    for r in records {
        out.write_record([
            r.problem.clone(),
            r.n.to_string(),
            r.status.clone(),
            r.iters.to_string(),
            r.setup_s.to_string(),
            r.precond_s.to_string(),
            r.linsys_total_s.to_string(),
            r.linsys_avg_ms.to_string(),
            r.prox_total_s.to_string(),
            r.prox_avg_ms.to_string(),
            r.total_s.to_string(),
            r.rp.to_string(),
            r.rd.to_string(),
            r.objective.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(w: W, records: &[RunRecord]) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(w, records)
}
