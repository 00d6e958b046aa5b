//! Command-line surface: corpus ingestion, bias audits, calibration runs,
//! synthetic corpus generation, and brute-force verification.
//!
//! Exit codes: 0 success (calibration converged), 2 invalid input or flags,
//! 3 iteration limit reached (results still written), 4 oracle budget
//! exceeded.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{build_margin_constraints, ConstraintError};
use crate::decode::{adjusted_score, decode_corpus, PenaltyView};
use crate::metrics::{
    count_cooccurrences, count_margin_violations, mean_bias_amplification, top1_map,
    top1_role_accuracy, BiasTable,
};
use crate::oracle::{solve_exact, ExactOutcome, OracleBudget, OracleError};
use crate::schema::{
    assignment_score, check_feasible, validate_corpus, Assignment, Corpus, Family, IndicatorKey,
    OutputSchema, ValidationReport,
};
use crate::solver::{calibrate, write_trace_csv, SolverConfig, SolverError, SolverStatus};
use crate::synth::{generate, SynthConfig, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_ITERATION_LIMIT: i32 = 3;
pub const EXIT_BUDGET_EXCEEDED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: validation failed:\n{report}")]
    Invalid {
        path: PathBuf,
        report: ValidationReport,
    },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Config(String),
    #[error("oracle budget exceeded: {cardinality} joint combinations over {budget}")]
    Budget { cardinality: u128, budget: u64 },
    #[error("write failed: {0}")]
    Write(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Budget { .. } => EXIT_BUDGET_EXCEEDED,
            _ => EXIT_INVALID_INPUT,
        }
    }
}

impl From<ConstraintError> for CliError {
    fn from(err: ConstraintError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(err: SynthError) -> Self {
        CliError::Config(err.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "debias",
    version,
    about = "Measure gender-bias amplification in structured predictions and calibrate them with corpus-level constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare training bias against predicted bias and report amplification
    Analyze(AnalyzeArgs),
    /// Calibrate predictions under corpus-level gender-ratio constraints
    Calibrate(CalibrateArgs),
    /// Generate synthetic biased corpora with gold labels and score tables
    Simulate(SimulateArgs),
    /// Brute-force the exact constrained optimum on a tiny corpus
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Training corpus JSON with gold labels
    #[arg(long)]
    pub train: PathBuf,
    /// Predictions: an assignments JSON, or a corpus JSON to decode unconstrained
    #[arg(long)]
    pub pred: PathBuf,
    /// Margin for violation counting
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Write (output, b_train, b_pred) scatter points as CSV
    #[arg(long)]
    pub scatter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Corpus JSON to calibrate
    #[arg(long)]
    pub corpus: PathBuf,
    /// Training corpus JSON with gold labels; source of the target ratios
    #[arg(long)]
    pub train: PathBuf,
    /// Allowed gender-ratio band half-width around the training ratio
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Multiplier step size
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Slack at or below this counts as satisfied
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
    /// Where to write the calibrated assignments JSON
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the per-iteration trace CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Cap decode concurrency; results are identical for any worker count
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Vsrl,
    Mlc,
}

impl From<FamilyArg> for Family {
    fn from(arg: FamilyArg) -> Family {
        match arg {
            FamilyArg::Vsrl => Family::Vsrl,
            FamilyArg::Mlc => Family::Mlc,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub n_instances: usize,
    /// Verb count (VSRL) or object-category count (MLC)
    #[arg(long, default_value_t = 20)]
    pub n_verbs: usize,
    #[arg(long, default_value_t = 2)]
    pub roles_per_verb: usize,
    #[arg(long, default_value_t = 4)]
    pub nouns_per_role: usize,
    /// Target ratio per output: a single value, a comma-separated list, or a
    /// lo:hi range spread evenly across outputs
    #[arg(long, default_value = "0.6:0.9")]
    pub train_bias: String,
    #[arg(long, default_value_t = 1.0)]
    pub amplification: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = FamilyArg::Vsrl)]
    pub family: FamilyArg,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub eval_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Corpus JSON to optimize exactly
    #[arg(long)]
    pub corpus: PathBuf,
    /// Training corpus JSON with gold labels; source of the target ratios
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Joint combination budget
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    /// Calibrated assignments JSON to compare against the exact optimum
    #[arg(long)]
    pub calibrated: Option<PathBuf>,
}

/// Assignment list as written by `calibrate` and accepted by `analyze`.
#[derive(Debug, Serialize, Deserialize)]
pub struct AssignmentsDoc {
    pub assignments: Vec<Assignment>,
}

pub fn run(cli: Cli) -> i32 {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(&args, out),
        Command::Calibrate(args) => cmd_calibrate(&args, out),
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Oracle(args) => cmd_oracle(&args, out),
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    let text = read_to_string(path)?;
    let corpus: Corpus = serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })?;
    let report = validate_corpus(&corpus);
    if !report.is_valid() {
        return Err(CliError::Invalid {
            path: path.to_owned(),
            report,
        });
    }
    Ok(corpus)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn gold_bias(corpus: &Corpus, path: &Path) -> Result<BiasTable, CliError> {
    let gold = corpus.gold.as_ref().ok_or_else(|| CliError::Input {
        path: path.to_owned(),
        message: "corpus has no gold labels".into(),
    })?;
    Ok(BiasTable::from_counts(&count_cooccurrences(
        gold,
        &corpus.schema,
    )))
}

/// Load predictions: an assignments document, or a corpus decoded at zero
/// penalties.
fn load_predictions(path: &Path, schema: &OutputSchema) -> Result<Vec<Assignment>, CliError> {
    let text = read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|source| CliError::Parse {
            path: path.to_owned(),
            source,
        })?;
    let assignments = if value.get("assignments").is_some() {
        let doc: AssignmentsDoc =
            serde_json::from_value(value).map_err(|source| CliError::Parse {
                path: path.to_owned(),
                source,
            })?;
        doc.assignments
    } else {
        let corpus: Corpus = serde_json::from_value(value).map_err(|source| CliError::Parse {
            path: path.to_owned(),
            source,
        })?;
        let report = validate_corpus(&corpus);
        if !report.is_valid() {
            return Err(CliError::Invalid {
                path: path.to_owned(),
                report,
            });
        }
        if &corpus.schema != schema {
            return Err(CliError::Input {
                path: path.to_owned(),
                message: "prediction corpus schema differs from the training schema".into(),
            });
        }
        decode_corpus(&corpus, &PenaltyView::none()).map_err(|err| CliError::Input {
            path: path.to_owned(),
            message: err.to_string(),
        })?
    };
    for assignment in &assignments {
        check_feasible(schema, assignment).map_err(|err| CliError::Input {
            path: path.to_owned(),
            message: err.to_string(),
        })?;
    }
    Ok(assignments)
}

/// Per-output bias columns plus the two summary numbers, shared by `analyze`
/// and the calibrate report rows so their printed values agree exactly.
fn bias_summary(train: &BiasTable, pred: &BiasTable, margin: f64) -> (f64, Vec<String>) {
    let amp = mean_bias_amplification(train, pred).expect("tables share one domain");
    let violations = count_margin_violations(train, pred, margin).expect("tables share one domain");
    (amp, violations)
}

fn amp_contribution(train: &BiasTable, pred: &BiasTable, output: &str) -> f64 {
    let threshold = 1.0 / train.genders.len() as f64;
    let mut total = 0.0;
    for gender in &train.genders {
        if let Some(b_star) = train.get(output, gender) {
            if b_star > threshold {
                if let Some(b_pred) = pred.get(output, gender) {
                    total += b_pred - b_star;
                }
            }
        }
    }
    total
}

fn write_bias_table(
    out: &mut dyn Write,
    train: &BiasTable,
    pred: &BiasTable,
    margin: f64,
) -> Result<(f64, Vec<String>), CliError> {
    let g_ref = &train.genders[0];
    let (b_star_col, b_pred_col) = (format!("b*({g_ref})"), format!("b~({g_ref})"));
    writeln!(
        out,
        "  {:<24} {b_star_col:>9} {b_pred_col:>9} {:>9}  viol",
        "output", "amp"
    )?;
    let (amp, violations) = bias_summary(train, pred, margin);
    for output in &train.outputs {
        let b_star = train.get(output, g_ref);
        let b_pred = pred.get(output, g_ref);
        let fmt = |v: Option<f64>| match v {
            Some(v) => format!("{v:.4}"),
            None => "-".to_owned(),
        };
        let viol = match (b_star, b_pred) {
            (Some(_), Some(_)) => {
                if violations.contains(output) {
                    "yes"
                } else {
                    "no"
                }
            }
            _ => "-",
        };
        writeln!(
            out,
            "  {:<24} {:>9} {:>9} {:>9.4}  {}",
            output,
            fmt(b_star),
            fmt(b_pred),
            amp_contribution(train, pred, output),
            viol
        )?;
    }
    Ok((amp, violations))
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if args.margin.is_nan() || args.margin < 0.0 {
        return Err(CliError::Config(format!(
            "margin must be nonnegative, got {}",
            args.margin
        )));
    }
    let train = load_corpus(&args.train)?;
    let train_bias = gold_bias(&train, &args.train)?;
    let predictions = load_predictions(&args.pred, &train.schema)?;
    let pred_bias = BiasTable::from_counts(&count_cooccurrences(&predictions, &train.schema));

    writeln!(
        out,
        "bias report: {} outputs, {} predictions, margin {:.3}",
        train_bias.outputs.len(),
        predictions.len(),
        args.margin
    )?;
    let (amp, violations) = write_bias_table(out, &train_bias, &pred_bias, args.margin)?;
    writeln!(out, "mean bias amplification: {amp:.6}")?;
    if violations.is_empty() {
        writeln!(out, "margin violations: 0")?;
    } else {
        writeln!(
            out,
            "margin violations: {} ({})",
            violations.len(),
            violations.join(", ")
        )?;
    }

    if let Some(scatter) = &args.scatter {
        let mut csv = String::from("output,b_train,b_pred\n");
        let g_ref = &train_bias.genders[0];
        for output in &train_bias.outputs {
            if let (Some(b_star), Some(b_pred)) =
                (train_bias.get(output, g_ref), pred_bias.get(output, g_ref))
            {
                csv.push_str(&format!("{output},{b_star},{b_pred}\n"));
            }
        }
        fs::write(scatter, csv).map_err(|source| CliError::Io {
            path: scatter.clone(),
            source,
        })?;
        writeln!(out, "scatter points written to {}", scatter.display())?;
    }
    Ok(EXIT_OK)
}

/// One Table-style summary row: margin violations, mean amplified bias, and
/// recognition performance (percent) when gold labels are available.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub violations: usize,
    pub amplified_bias: f64,
    pub performance: Option<f64>,
}

impl ReportRow {
    pub fn write_header(out: &mut dyn Write) -> io::Result<()> {
        writeln!(
            out,
            "  {:<16} {:>6} {:>12} {:>10}",
            "method", "viol", "amp_bias", "perf"
        )
    }

    pub fn write(&self, out: &mut dyn Write) -> io::Result<()> {
        let perf = match self.performance {
            Some(p) => format!("{p:.2}"),
            None => "n/a".to_owned(),
        };
        writeln!(
            out,
            "  {:<16} {:>6} {:>12.6} {:>10}",
            self.label, self.violations, self.amplified_bias, perf
        )
    }
}

/// Ranking scores for the mean-average-precision metric: each instance's
/// adjusted object scores under its assigned gender.
fn mlc_ranking_scores(
    corpus: &Corpus,
    assignments: &[Assignment],
    penalties: &PenaltyView,
) -> Vec<(String, BTreeMap<String, f64>)> {
    corpus
        .instances
        .iter()
        .zip(assignments)
        .map(|(instance, assignment)| {
            let gender = assignment.gender().expect("MLC assignment");
            let scores = corpus
                .schema
                .objects
                .iter()
                .map(|object| {
                    let key = IndicatorKey::GenderObject {
                        gender: gender.to_owned(),
                        object: object.clone(),
                    };
                    let score = adjusted_score(instance, &key, penalties)
                        .expect("validated corpus covers every key");
                    (object.clone(), score)
                })
                .collect();
            (instance.instance_id.clone(), scores)
        })
        .collect()
}

fn performance_percent(
    corpus: &Corpus,
    assignments: &[Assignment],
    penalties: &PenaltyView,
) -> Option<f64> {
    let gold = corpus.gold.as_ref()?;
    let value = match corpus.schema.family {
        Family::Vsrl => top1_role_accuracy(assignments, gold).expect("aligned by construction"),
        Family::Mlc => {
            let scores = mlc_ranking_scores(corpus, assignments, penalties);
            top1_map(&scores, gold, &corpus.schema.objects).expect("aligned by construction")
        }
    };
    Some(value * 100.0)
}

fn report_row(
    label: &str,
    corpus: &Corpus,
    assignments: &[Assignment],
    train_bias: &BiasTable,
    margin: f64,
    penalties: &PenaltyView,
) -> ReportRow {
    let pred_bias = BiasTable::from_counts(&count_cooccurrences(assignments, &corpus.schema));
    let (amp, violations) = bias_summary(train_bias, &pred_bias, margin);
    ReportRow {
        label: label.to_owned(),
        violations: violations.len(),
        amplified_bias: amp,
        performance: performance_percent(corpus, assignments, penalties),
    }
}

fn run_in_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("workers must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|err| CliError::Config(format!("worker pool: {err}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let train = load_corpus(&args.train)?;
    let corpus = load_corpus(&args.corpus)?;
    if corpus.schema != train.schema {
        return Err(CliError::Input {
            path: args.corpus.clone(),
            message: "corpus schema differs from the training schema".into(),
        });
    }
    let train_bias = gold_bias(&train, &args.train)?;
    let config = SolverConfig {
        eta: args.eta,
        max_iters: args.max_iters,
        margin: args.margin,
        slack_tolerance: args.tolerance,
    };
    let set = build_margin_constraints(&corpus.schema, &train_bias, args.margin, None)?;
    writeln!(
        out,
        "constraints: {} (margin {:.3}, eta {}, max iterations {})",
        set.constraints.len(),
        args.margin,
        args.eta,
        args.max_iters
    )?;

    let outcome = run_in_pool(args.workers, || {
        let before = decode_corpus(&corpus, &PenaltyView::none());
        let result = calibrate(&corpus, &set, &config);
        (before, result)
    })?;
    let before = outcome.0.map_err(|err| CliError::Input {
        path: args.corpus.clone(),
        message: err.to_string(),
    })?;
    let result = outcome.1.map_err(|err| match err {
        SolverError::ConfigInvalid(msg) => CliError::Config(msg),
        SolverError::Decode(err) => CliError::Input {
            path: args.corpus.clone(),
            message: err.to_string(),
        },
    })?;

    let final_view = PenaltyView::new(&set, &result.dual.lambda);
    ReportRow::write_header(out)?;
    report_row(
        "unconstrained",
        &corpus,
        &before,
        &train_bias,
        args.margin,
        &PenaltyView::none(),
    )
    .write(out)?;
    report_row(
        "calibrated",
        &corpus,
        &result.assignments,
        &train_bias,
        args.margin,
        &final_view,
    )
    .write(out)?;

    write_json(
        &args.out,
        &AssignmentsDoc {
            assignments: result.assignments.clone(),
        },
    )?;
    writeln!(
        out,
        "calibrated assignments written to {}",
        args.out.display()
    )?;
    if let Some(trace_path) = &args.trace {
        let mut buf = Vec::new();
        write_trace_csv(&result.dual.trace, &mut buf)?;
        fs::write(trace_path, buf).map_err(|source| CliError::Io {
            path: trace_path.clone(),
            source,
        })?;
        writeln!(out, "trace written to {}", trace_path.display())?;
    }

    match result.dual.status {
        SolverStatus::Converged => {
            writeln!(
                out,
                "status: converged at iteration {}",
                result.dual.iteration
            )?;
            Ok(EXIT_OK)
        }
        SolverStatus::IterationLimit => {
            writeln!(
                out,
                "status: iteration limit ({}) reached, {} constraints still violated",
                result.dual.iteration,
                result.residual.len()
            )?;
            for (id, slack) in &result.residual {
                writeln!(out, "  residual {id}: slack {slack:.6}")?;
            }
            Ok(EXIT_ITERATION_LIMIT)
        }
    }
}

fn parse_bias_spec(spec: &str, n_outputs: usize) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Config(format!("--train-bias '{spec}': {msg}"));
    if let Some((lo, hi)) = spec.split_once(':') {
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|_| bad("range start is not a number".into()))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|_| bad("range end is not a number".into()))?;
        if n_outputs == 1 {
            return Ok(vec![lo]);
        }
        return Ok((0..n_outputs)
            .map(|i| lo + (hi - lo) * i as f64 / (n_outputs - 1) as f64)
            .collect());
    }
    spec.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("'{}' is not a number", part.trim())))
        })
        .collect()
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = SynthConfig {
        seed: args.seed,
        n_instances: args.n_instances,
        n_verbs: args.n_verbs,
        roles_per_verb: args.roles_per_verb,
        nouns_per_role: args.nouns_per_role,
        train_bias: parse_bias_spec(&args.train_bias, args.n_verbs)?,
        amplification: args.amplification,
        noise_sigma: args.noise,
        family: args.family.into(),
    };
    let (train, eval) = generate(&config)?;
    write_json(&args.train_out, &train)?;
    write_json(&args.eval_out, &eval)?;
    writeln!(
        out,
        "wrote {} train instances to {}",
        train.instances.len(),
        args.train_out.display()
    )?;
    writeln!(
        out,
        "wrote {} eval instances to {}",
        eval.instances.len(),
        args.eval_out.display()
    )?;

    let train_bias = gold_bias(&train, &args.train_out)?;
    let g_ref = train.schema.reference_gender().to_owned();
    writeln!(out, "empirical train gold bias toward '{g_ref}':")?;
    for output in &train_bias.outputs {
        match train_bias.get(output, &g_ref) {
            Some(b) => writeln!(out, "  {output:<24} {b:.4}")?,
            None => writeln!(out, "  {output:<24} -")?,
        }
    }

    // measured against the eval gold so a perturbation-free run reports zero
    let eval_bias = gold_bias(&eval, &args.eval_out)?;
    let decoded = decode_corpus(&eval, &PenaltyView::none()).map_err(|err| CliError::Input {
        path: args.eval_out.clone(),
        message: err.to_string(),
    })?;
    let pred_bias = BiasTable::from_counts(&count_cooccurrences(&decoded, &eval.schema));
    let amp = mean_bias_amplification(&eval_bias, &pred_bias).expect("tables share one domain");
    writeln!(
        out,
        "measured amplification of unconstrained decoding vs eval gold: {amp:.6}"
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let train = load_corpus(&args.train)?;
    let corpus = load_corpus(&args.corpus)?;
    if corpus.schema != train.schema {
        return Err(CliError::Input {
            path: args.corpus.clone(),
            message: "corpus schema differs from the training schema".into(),
        });
    }
    let train_bias = gold_bias(&train, &args.train)?;
    let set = build_margin_constraints(&corpus.schema, &train_bias, args.margin, None)?;
    let budget = OracleBudget {
        max_joint_combinations: args.budget,
    };

    let outcome = solve_exact(&corpus, &set, &budget).map_err(|err| match err {
        OracleError::BudgetExceeded {
            cardinality,
            budget,
        } => CliError::Budget {
            cardinality,
            budget,
        },
        OracleError::Schema(err) => CliError::Input {
            path: args.corpus.clone(),
            message: err.to_string(),
        },
    })?;

    let ExactOutcome::Optimal { objective, .. } = outcome else {
        writeln!(out, "Infeasible")?;
        return Ok(EXIT_OK);
    };
    writeln!(out, "exact constrained optimum: {objective:.9}")?;

    if let Some(calibrated_path) = &args.calibrated {
        let predictions = load_predictions(calibrated_path, &corpus.schema)?;
        let by_id: BTreeMap<&str, &Assignment> = predictions
            .iter()
            .map(|a| (a.instance_id.as_str(), a))
            .collect();
        let mut total = 0.0;
        for instance in &corpus.instances {
            let assignment =
                by_id
                    .get(instance.instance_id.as_str())
                    .ok_or_else(|| CliError::Input {
                        path: calibrated_path.clone(),
                        message: format!("no assignment for instance '{}'", instance.instance_id),
                    })?;
            total += assignment_score(&corpus.schema, instance, assignment).map_err(|err| {
                CliError::Input {
                    path: calibrated_path.clone(),
                    message: err.to_string(),
                }
            })?;
        }
        writeln!(out, "calibrated objective: {total:.9}")?;
        writeln!(out, "gap: {:.9}", objective - total)?;
    }
    Ok(EXIT_OK)
}
