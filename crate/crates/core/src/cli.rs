//! The `mdf` command line front end.
//!
//! Three subcommands wrap the library: `allocate` (size vectors),
//! `decide` (run a procedure on a p-value file) and `simulate` (Monte Carlo
//! grid to CSV). Input files are CSV with a header row; columns are matched
//! by name. JSON reports carry a `schema_version` field, and probabilities
//! are printed with 12 significant digits.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 when a
//! numerical routine fails.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{
    bonferroni_sizes, efficiency_of, optimal_sizes, optimal_sizes_clustered, sidak_sizes, ClusterSpec,
    SizeConditionReport,
};
use crate::error::{invalid, Error, Result};
use crate::model::{randomized_pvalue, GaussianHypothesis, RandomizedSample, RocModel};
use crate::procedures::{decide, generalized_pvalues, Decision, ProcedureTag, TraceStep};
use crate::sim::{run_table, stream_rng, GridSpec, Stream};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable with the worker count for `simulate`.
pub const THREADS_ENV: &str = "MDF_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mdf", version, about = "Power-enhanced multiple hypothesis testing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-test sizes under a weak FWER budget.
    Allocate(AllocateArgs),
    /// Apply a multiple decision procedure to a file of p-values.
    Decide(DecideArgs),
    /// Run a seeded Monte Carlo grid and write a CSV report.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Optimal,
    Sidak,
    Bonferroni,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct AllocateArgs {
    /// Weak FWER budget in [0, 1).
    #[arg(long)]
    pub alpha: f64,
    /// CSV with columns id, gamma and optionally cluster.
    #[arg(long, conflicts_with_all = ["m", "gamma_const"])]
    pub input: Option<PathBuf>,
    /// Number of hypotheses when no input file is given.
    #[arg(long = "M", id = "m")]
    pub m: Option<usize>,
    /// Common effect size for all `M` hypotheses.
    #[arg(long, requires = "m")]
    pub gamma_const: Option<f64>,
    #[arg(long, value_enum, default_value = "optimal")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "json")]
    pub out: OutFormat,
}

#[derive(Debug, clap::Args)]
pub struct DecideArgs {
    /// One of weak-fwer-opt, strong-fwer-opt, fdr-opt, bh, stepdown-sidak, bonferroni.
    #[arg(long, value_parser = parse_procedure)]
    pub procedure: ProcedureTag,
    /// Error budget for the stepwise procedures.
    #[arg(long, conflicts_with = "alpha", required_unless_present = "alpha")]
    pub q: Option<f64>,
    /// Error budget, alternative spelling.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// CSV with columns id, pvalue and optionally gamma; a column x may replace
    /// pvalue, in which case randomized p-values are drawn with --seed.
    #[arg(long)]
    pub input: PathBuf,
    /// Seed for the randomizers of randomized p-values.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Include the stepwise scan in the report.
    #[arg(long)]
    pub trace: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub out: OutFormat,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// JSON grid spec; defaults to the 27-cell study grid.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replicates per cell [default: 1000].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path; `-` writes to standard output.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

fn parse_procedure(s: &str) -> std::result::Result<ProcedureTag, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match &cli.command {
        Command::Allocate(a) => cmd_allocate(a, stdout),
        Command::Decide(a) => cmd_decide(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// Rounds to 12 significant digits so reports are stable across platforms.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn io_error(e: impl std::fmt::Display) -> Error {
    invalid(format!("i/o: {e}"))
}

#[derive(Debug, Default, Deserialize)]
struct InputRecord {
    id: String,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    pvalue: Option<f64>,
    #[serde(default)]
    cluster: Option<String>,
    #[serde(default)]
    x: Option<f64>,
}

struct InputTable {
    records: Vec<InputRecord>,
    has_gamma: bool,
    has_pvalue: bool,
    has_cluster: bool,
    has_x: bool,
}

fn read_input(path: &Path) -> Result<InputTable> {
    let file = File::open(path).map_err(|e| invalid(format!("cannot open {}: {e}", path.display())))?;
    read_input_from(file)
}

fn read_input_from<R: Read>(reader: R) -> Result<InputTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| invalid(format!("cannot read CSV header: {e}")))?.clone();
    let has = |name: &str| headers.iter().any(|h| h == name);
    if !has("id") {
        return Err(invalid("input CSV needs an 'id' column"));
    }
    let records = rdr
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| invalid(format!("input row {}: {e}", i + 1))))
        .collect::<Result<Vec<InputRecord>>>()?;
    if records.is_empty() {
        return Err(invalid("input CSV has no rows"));
    }
    Ok(InputTable {
        has_gamma: has("gamma"),
        has_pvalue: has("pvalue"),
        has_cluster: has("cluster"),
        has_x: has("x"),
        records,
    })
}

impl InputTable {
    fn gammas(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.gamma.ok_or_else(|| invalid(format!("missing gamma for id '{}'", r.id))))
            .collect()
    }
}

#[derive(Debug, Serialize)]
struct AllocationEntry {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster: Option<String>,
    size: f64,
}

#[derive(Debug, Serialize)]
struct AllocationReport {
    schema_version: u32,
    command: &'static str,
    method: &'static str,
    alpha: f64,
    lagrange: Option<f64>,
    constraint_residual: f64,
    stationarity_residual: Option<f64>,
    efficiency_vs_sidak: Option<f64>,
    size_sum: f64,
    hypotheses: Vec<AllocationEntry>,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Optimal => "optimal",
        Method::Sidak => "sidak",
        Method::Bonferroni => "bonferroni",
        Method::Clustered => "clustered",
    }
}

pub fn cmd_allocate(args: &AllocateArgs, out: &mut dyn Write) -> Result<()> {
    let (ids, gammas, clusters): (Vec<String>, Option<Vec<f64>>, Option<Vec<String>>) = match &args.input {
        Some(path) => {
            let table = read_input(path)?;
            let gammas = if table.has_gamma { Some(table.gammas()?) } else { None };
            let clusters = if table.has_cluster {
                Some(table.records.iter().map(|r| r.cluster.clone().unwrap_or_default()).collect())
            } else {
                None
            };
            (table.records.into_iter().map(|r| r.id).collect(), gammas, clusters)
        }
        None => {
            let m = args.m.ok_or_else(|| invalid("either --input or --M is required"))?;
            if m == 0 {
                return Err(invalid("--M must be at least 1"));
            }
            let ids = (1..=m).map(|i| i.to_string()).collect();
            (ids, args.gamma_const.map(|g| vec![g; m]), None)
        }
    };
    let m = ids.len();
    let needs_gamma = matches!(args.method, Method::Optimal | Method::Clustered);
    if needs_gamma && gammas.is_none() {
        return Err(invalid(format!(
            "method {} needs effect sizes: supply a gamma column or --gamma-const",
            method_name(args.method)
        )));
    }
    let model = gammas.as_deref().map(RocModel::from_gammas).transpose()?;

    let (sizes, lagrange, constraint_residual, stationarity_residual) = match args.method {
        Method::Sidak | Method::Bonferroni | Method::Optimal => {
            let a = match args.method {
                Method::Sidak => sidak_sizes(m, args.alpha)?,
                Method::Bonferroni => bonferroni_sizes(m, args.alpha)?,
                _ => optimal_sizes(model.as_ref().unwrap(), args.alpha)?,
            };
            (a.sizes, a.lagrange, a.constraint_residual, a.stationarity_residual)
        }
        Method::Clustered => {
            let gammas = gammas.as_ref().unwrap();
            let labels: Vec<String> = match &clusters {
                Some(c) => c.clone(),
                None => gammas.iter().map(|g| g.to_string()).collect(),
            };
            let (spec, member_of) = cluster_spec(&labels, gammas)?;
            let a = optimal_sizes_clustered(&spec, args.alpha)?;
            let sizes = member_of.iter().map(|&k| a.cluster_sizes[k]).collect();
            (sizes, Some(a.lagrange), a.constraint_residual, Some(a.stationarity_residual))
        }
    };
    let efficiency = match &model {
        Some(model) if args.alpha > 0.0 => Some(round_to(efficiency_of(model, &sizes, args.alpha)?, 12)),
        _ => None,
    };
    let entries: Vec<AllocationEntry> = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| AllocationEntry {
            id,
            gamma: gammas.as_ref().map(|g| g[i]),
            cluster: clusters.as_ref().map(|c| c[i].clone()),
            size: round12(sizes[i]),
        })
        .collect();
    match args.out {
        OutFormat::Json => {
            let report = AllocationReport {
                schema_version: SCHEMA_VERSION,
                command: "allocate",
                method: method_name(args.method),
                alpha: args.alpha,
                lagrange: lagrange.map(round12),
                constraint_residual,
                stationarity_residual,
                efficiency_vs_sidak: efficiency,
                size_sum: round12(sizes.iter().sum()),
                hypotheses: entries,
            };
            write_json(out, &report)
        }
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["id"];
            if gammas.is_some() {
                header.push("gamma");
            }
            if clusters.is_some() {
                header.push("cluster");
            }
            header.push("size");
            w.write_record(&header).map_err(io_error)?;
            for e in &entries {
                let mut row = vec![e.id.clone()];
                if let Some(g) = e.gamma {
                    row.push(g.to_string());
                }
                if let Some(c) = &e.cluster {
                    row.push(c.clone());
                }
                row.push(e.size.to_string());
                w.write_record(&row).map_err(io_error)?;
            }
            w.flush().map_err(io_error)
        }
    }
}

fn round_to(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.*e}", digits - 1).parse().unwrap_or(x)
}

/// Groups hypotheses by cluster label (in order of first appearance); all
/// members of a cluster must share one effect size.
fn cluster_spec(labels: &[String], gammas: &[f64]) -> Result<(ClusterSpec, Vec<usize>)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut cluster_gammas = Vec::new();
    let mut counts = Vec::new();
    let mut member_of = Vec::with_capacity(labels.len());
    for (label, &g) in labels.iter().zip(gammas) {
        let k = *index.entry(label.as_str()).or_insert_with(|| {
            cluster_gammas.push(g);
            counts.push(0);
            cluster_gammas.len() - 1
        });
        if cluster_gammas[k] != g {
            return Err(invalid(format!("cluster '{label}' mixes effect sizes {} and {g}", cluster_gammas[k])));
        }
        counts[k] += 1;
        member_of.push(k);
    }
    Ok((ClusterSpec::new(cluster_gammas, counts)?, member_of))
}

#[derive(Debug, Serialize)]
struct DecisionEntry {
    id: String,
    pvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    randomizer: Option<f64>,
    /// Generalized p-value for the optimal procedures, the p-value otherwise.
    w: f64,
    rank: usize,
    reject: bool,
}

#[derive(Debug, Serialize)]
struct DecisionReport {
    schema_version: u32,
    command: &'static str,
    procedure: ProcedureTag,
    budget: f64,
    rejections: usize,
    cutoff_index: usize,
    alpha_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    size_condition: Option<SizeConditionReport>,
    hypotheses: Vec<DecisionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<TraceStep>>,
}

pub fn cmd_decide(args: &DecideArgs, out: &mut dyn Write) -> Result<()> {
    let budget = args.q.or(args.alpha).ok_or_else(|| invalid("either --q or --alpha is required"))?;
    let table = read_input(&args.input)?;
    let tag = args.procedure;
    let model = if tag.needs_model() {
        if !table.has_gamma {
            return Err(invalid(format!("procedure {tag} needs a gamma column in the input")));
        }
        Some(RocModel::from_gammas(&table.gammas()?)?)
    } else {
        None
    };

    let (s, randomizers) = if table.has_pvalue {
        let s = table
            .records
            .iter()
            .map(|r| r.pvalue.ok_or_else(|| invalid(format!("missing pvalue for id '{}'", r.id))))
            .collect::<Result<Vec<f64>>>()?;
        (s, None)
    } else if table.has_x {
        let seed = args.seed.ok_or_else(|| invalid("randomized p-values from column x need --seed"))?;
        let (s, u) = randomized_from_x(&table, model.as_ref(), seed)?;
        (s, Some(u))
    } else {
        return Err(invalid("input CSV needs a 'pvalue' column (or 'x' with --seed)"));
    };

    let decision = decide(tag, model.as_ref(), &s, budget)?;
    let w = match &model {
        Some(model) => generalized_pvalues(model, &s)?.w,
        None => s.clone(),
    };
    let mut rank = vec![0; s.len()];
    for (r, &m) in crate::procedures::antiranks(&w).iter().enumerate() {
        rank[m] = r + 1;
    }
    let entries: Vec<DecisionEntry> = table
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| DecisionEntry {
            id: rec.id.clone(),
            pvalue: round12(s[i]),
            randomizer: randomizers.as_ref().map(|u| round12(u[i])),
            w: round12(w[i]),
            rank: rank[i],
            reject: decision.reject[i],
        })
        .collect();
    match args.out {
        OutFormat::Json => write_json(out, &decision_report(&decision, entries, args.trace)),
        OutFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(out);
            for e in &entries {
                wtr.serialize(e).map_err(io_error)?;
            }
            wtr.flush().map_err(io_error)
        }
    }
}

fn decision_report(decision: &Decision, hypotheses: Vec<DecisionEntry>, trace: bool) -> DecisionReport {
    let trace = trace.then(|| {
        decision
            .trace
            .steps
            .iter()
            .map(|t| TraceStep {
                statistic: round12(t.statistic),
                threshold: round12(t.threshold),
                product: t.product.map(round12),
                size_sum: t.size_sum.map(round12),
                ..t.clone()
            })
            .collect()
    });
    DecisionReport {
        schema_version: SCHEMA_VERSION,
        command: "decide",
        procedure: decision.procedure,
        budget: decision.budget,
        rejections: decision.rejections(),
        cutoff_index: decision.cutoff_index,
        alpha_threshold: round12(decision.alpha_threshold),
        size_condition: decision.size_condition.clone(),
        hypotheses,
        trace,
    }
}

/// Randomized p-values of the standard Gaussian tests at the observations `x`,
/// with one randomizer per row drawn from `seed`.
fn randomized_from_x(table: &InputTable, model: Option<&RocModel>, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = stream_rng(seed, 0, Stream::Randomizer);
    let mut s = Vec::with_capacity(table.records.len());
    let mut us = Vec::with_capacity(table.records.len());
    for (i, r) in table.records.iter().enumerate() {
        let x = r.x.ok_or_else(|| invalid(format!("missing x for id '{}'", r.id)))?;
        let u: f64 = rng.random();
        let h = match model {
            Some(m) => *m.get(i).unwrap(),
            None => GaussianHypothesis::standard(0.0)?,
        };
        s.push(randomized_pvalue(&h, &RandomizedSample::new(x, u)?)?);
        us.push(u);
    }
    Ok((s, us))
}

/// Grid file for `simulate`; omitted fields fall back to the study grid.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default, alias = "M")]
    m: Option<Vec<usize>>,
    #[serde(default)]
    p: Option<Vec<f64>>,
    #[serde(default)]
    nu: Option<Vec<f64>>,
    #[serde(default)]
    qstar: Option<f64>,
    #[serde(default)]
    reps: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    procedures: Option<Vec<ProcedureTag>>,
}

/// Default replicate count and seed for `simulate`.
pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;

fn grid_from_args(args: &SimulateArgs) -> Result<GridSpec> {
    let file = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<GridFile>(&text).map_err(|e| invalid(format!("bad grid config: {e}")))?
        }
        None => GridFile::default(),
    };
    let base = GridSpec::study_grid(0.1, DEFAULT_REPS, DEFAULT_SEED);
    let grid = GridSpec {
        m: file.m.unwrap_or(base.m),
        p: file.p.unwrap_or(base.p),
        nu: file.nu.unwrap_or(base.nu),
        qstar: file.qstar.unwrap_or(base.qstar),
        reps: args.reps.or(file.reps).unwrap_or(base.reps),
        seed: args.seed.or(file.seed).unwrap_or(base.seed),
        procedures: file.procedures.unwrap_or(base.procedures),
    };
    if grid.m.is_empty() || grid.p.is_empty() || grid.nu.is_empty() {
        return Err(invalid("grid needs at least one value of M, p and nu"));
    }
    for cell in grid.cells() {
        cell.validate()?;
    }
    Ok(grid)
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let grid = grid_from_args(args)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
    let rows = pool.install(|| run_table(&grid))?;

    let sink: Box<dyn Write + '_> = if args.out.as_os_str() == "-" {
        Box::new(&mut *stdout)
    } else {
        Box::new(File::create(&args.out).map_err(|e| invalid(format!("cannot create {}: {e}", args.out.display())))?)
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        let row = crate::sim::ReportRow {
            fdr: round12(row.fdr),
            se_fdr: round12(row.se_fdr),
            mdr_std: round12(row.mdr_std),
            se_mdr: round12(row.se_mdr),
            fwer: round12(row.fwer),
            se_fwer: round12(row.se_fwer),
            etp: round12(row.etp),
            se_etp: round12(row.se_etp),
            efp: round12(row.efp),
            se_efp: round12(row.se_efp),
            ..row
        };
        w.serialize(row).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io_error)?;
    writeln!(out).map_err(io_error)
}

/// Entry point used by the `mdf` binary.
pub fn main_from_env() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
