//! `s4factor` command-line experiments.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 bad input, 3 resource or
//! conditioning failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use s4factor::counterexample::{exponent_sweep, AlphaPolicy, CounterexampleConfig};
use s4factor::entropy::{capacity_verdict, check_entropy_sum_bound, DiagonalOperatorSpec};
use s4factor::gns::{
    audit_families, gns_factorize, reconstruction_ok, verify_adjoint_summing_bound, verify_j_contraction,
};
use s4factor::linalg::schatten_norm;
use s4factor::spaces::{DualOptions, MatrixOperator};
use s4factor::summing::{find_pietsch_domination, verify_certificate, DominationCertificate, InnerSearchOptions};
use s4factor::{ComplexMatrix, Error};

const M3_SAMPLE: &str = include_str!("../data/m3_sample.json");
const CSV_SCHEMA: &str = "v1";

#[derive(Parser)]
#[command(name = "s4factor", version, about = "Pietsch domination, S4 factorization and capacity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Report format; `text` prints a short summary.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Policy {
    AnalyticN,
    SampledPi1Lb,
}

#[derive(Subcommand)]
enum Command {
    /// Schatten p-norm of a matrix.
    Schatten {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        p: f64,
    },
    /// Pietsch domination, GNS factorization and all checks.
    Factorize {
        #[command(flatten)]
        input: OperatorInput,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Lattice covers and capacity bounds of a diagonal operator.
    Capacity {
        #[arg(long)]
        alphas: PathBuf,
        #[arg(long)]
        p: f64,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon: Vec<f64>,
    },
    /// Entropy number upper bounds and their p-sum bound.
    Entropy {
        #[arg(long)]
        alphas: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
    },
    /// Slope of log σ_p(K) against log n for the identity family.
    Sweep {
        #[arg(long)]
        p: f64,
        /// Comma-separated values of n.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_enum)]
        policy: Policy,
        #[arg(long)]
        seed: Option<u64>,
        /// Allowed |slope − target|; defaults to 1e-9 (analytic) or 0.15 (sampled).
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Domination certificate for an operator.
    Dominate {
        #[command(flatten)]
        input: OperatorInput,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Adversarial check of a saved certificate.
    Verify {
        #[command(flatten)]
        input: OperatorInput,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct OperatorInput {
    /// Operator JSON file.
    #[arg(long)]
    operator: Option<PathBuf>,
    /// Bundled sample operator.
    #[arg(long, value_parser = ["m3"])]
    sample: Option<String>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 200)]
    max_cuts: usize,
    /// Adversarial trials for the certificate check.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
}

/// Resolved inputs of a run; embedded in every JSON and CSV report.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    command: String,
    inputs: Vec<String>,
    seed: Option<u64>,
    format: Format,
    params: BTreeMap<String, Value>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Conditioning { .. } | Error::Resource(_) | Error::Solver(_) => 3,
            Error::InvalidInput(_) | Error::Domain(_) | Error::NotPsd { .. } => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

/// Report body plus its verdict.
struct Outcome {
    result: Value,
    checks: Vec<(String, bool)>,
    /// CSV header and rows, for commands with tabular output.
    table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    /// Lines for `--format text`.
    text: Vec<String>,
}

impl Outcome {
    fn pass(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(pass) => ExitCode::from(if pass { 0 } else { 1 }),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let (config, outcome) = dispatch(&cli.command, cli.output.format)?;
    let rendered = render(&config, &outcome, cli.output.format)?;
    match &cli.output.out {
        Some(path) => fs::write(path, rendered).map_err(|e| input_error(format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(rendered.as_bytes())
            .map_err(|e| Failure { code: 3, message: e.to_string() })?,
    }
    Ok(outcome.pass())
}

fn render(config: &RunConfig, outcome: &Outcome, format: Format) -> Result<String, Failure> {
    let checks: Vec<Value> = outcome.checks.iter().map(|(name, ok)| json!({"name": name, "pass": ok})).collect();
    match format {
        Format::Text => {
            let mut s = outcome.text.join("\n");
            s.push('\n');
            Ok(s)
        }
        Format::Json => {
            let doc = json!({
                "config": config,
                "result": outcome.result,
                "checks": checks,
                "pass": outcome.pass(),
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("values serialize");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut s = format!("# schema: s4factor-{} {CSV_SCHEMA}\n", config.command);
            s.push_str(&format!("# config: {}\n", serde_json::to_string(config).expect("config serializes")));
            let mut w = csv::Writer::from_writer(Vec::new());
            match &outcome.table {
                Some((header, rows)) => {
                    w.write_record(header).map_err(csv_failure)?;
                    for row in rows {
                        w.write_record(row).map_err(csv_failure)?;
                    }
                }
                None => {
                    w.write_record(["check", "pass"]).map_err(csv_failure)?;
                    for (name, ok) in &outcome.checks {
                        w.write_record([name.as_str(), if *ok { "true" } else { "false" }]).map_err(csv_failure)?;
                    }
                }
            }
            s.push_str(&String::from_utf8(w.into_inner().map_err(|e| input_error(e.to_string()))?).expect("utf8"));
            Ok(s)
        }
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure { code: 3, message: e.to_string() }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_operator(input: &OperatorInput) -> Result<(MatrixOperator, String), Failure> {
    match (&input.operator, &input.sample) {
        (Some(path), _) => Ok((read_json(path)?, path.display().to_string())),
        (None, Some(_)) => {
            let op = serde_json::from_str(M3_SAMPLE).map_err(|e| input_error(format!("bundled sample: {e}")))?;
            Ok((op, "sample:m3".into()))
        }
        (None, None) => Err(input_error("need --operator or --sample")),
    }
}

/// 12 significant digits, plain decimal notation.
fn sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{:.11}", v);
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..=15).contains(&mag) {
        return format!("{:.11e}", v);
    }
    let decimals = (11 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn check_lines(checks: &[(String, bool)]) -> Vec<String> {
    checks.iter().map(|(name, ok)| format!("{} {name}", verdict(*ok))).collect()
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn search_options(max_cuts: usize) -> Result<InnerSearchOptions, Failure> {
    if max_cuts == 0 {
        return Err(input_error("--max-cuts must be positive"));
    }
    Ok(InnerSearchOptions::default())
}

fn dispatch(command: &Command, format: Format) -> Result<(RunConfig, Outcome), Failure> {
    match command {
        Command::Schatten { matrix, p } => {
            let m: ComplexMatrix = read_json(matrix)?;
            let value = schatten_norm(&m, *p)?;
            let config = RunConfig {
                command: "schatten".into(),
                inputs: vec![matrix.display().to_string()],
                seed: None,
                format,
                params: params(&[("p", json!(p))]),
            };
            let outcome = Outcome {
                result: json!({"p": p, "sigma_p": value}),
                checks: Vec::new(),
                table: Some((vec!["p", "sigma_p"], vec![vec![p.to_string(), format!("{value:e}")]])),
                text: vec![sig12(value)],
            };
            Ok((config, outcome))
        }

        Command::Factorize { input, seed, delta, epsilon, search } => {
            let (op, source) = load_operator(input)?;
            let inner = search_options(search.max_cuts)?;
            let cert = find_pietsch_domination(&op, search.max_cuts, &inner, *seed)?;
            let margin = verify_certificate(&op, &cert, search.trials, *seed)?;
            let fact = gns_factorize(&op, &cert, *delta, *epsilon)?;
            let contraction = verify_j_contraction(&fact, search.trials, *seed);
            let families = audit_families(op.m(), 50, op.m().max(2), *seed);
            let audit = verify_adjoint_summing_bound(&fact, 2.0, &families, &DualOptions { seed: *seed, ..DualOptions::default() })?;
            let residual = fact.reconstruction_error(&op);
            let checks = vec![
                ("certificate".to_string(), margin.pass),
                ("reconstruction".to_string(), reconstruction_ok(&fact, &op)),
                ("j_contraction".to_string(), contraction.pass),
                ("sigma4_bound".to_string(), fact.bound_holds()),
                ("adjoint_summing".to_string(), audit.pass),
            ];
            let mut text = vec![
                format!("C = {}", sig12(cert.c)),
                format!("sigma4(K) = {}", sig12(fact.sigma4_k)),
                format!("2(1+eps)C = {}", sig12(fact.schatten_capacity_bound())),
            ];
            text.extend(check_lines(&checks));
            let config = RunConfig {
                command: "factorize".into(),
                inputs: vec![source],
                seed: Some(*seed),
                format,
                params: params(&[
                    ("delta", json!(delta)),
                    ("epsilon", json!(epsilon)),
                    ("max_cuts", json!(search.max_cuts)),
                    ("trials", json!(search.trials)),
                    ("inner_search", json!(inner)),
                ]),
            };
            let result = json!({
                "certificate": cert,
                "certificate_margin": margin.max_margin,
                "factorization": fact,
                "reconstruction_error": residual,
                "j_contraction_max_ratio": contraction.max_ratio,
                "adjoint_summing": audit,
            });
            Ok((config, Outcome { result, checks, table: None, text }))
        }

        Command::Capacity { alphas, p, epsilon } => {
            let spec: DiagonalOperatorSpec = read_json(alphas)?;
            let mut eps = epsilon.clone();
            if eps.iter().any(|e| !(*e > 0.0)) {
                return Err(input_error("every epsilon must be positive"));
            }
            eps.sort_by(f64::total_cmp);
            let reports = eps.iter().map(|e| capacity_verdict(&spec, *p, *e)).collect::<Result<Vec<_>, _>>()?;
            let checks = reports.iter().map(|r| (format!("epsilon={}", r.epsilon), r.pass())).collect();
            let rows = reports
                .iter()
                .map(|r| {
                    vec![
                        r.epsilon.to_string(),
                        r.covering_count.to_string(),
                        r.volumetric_lower.to_string(),
                        format!("{:e}", r.capacity_bound),
                        r.k_epsilon.to_string(),
                        r.pass().to_string(),
                    ]
                })
                .collect();
            let text = reports
                .iter()
                .map(|r| {
                    format!(
                        "{} epsilon={} count={} lower={} log2(count)={:.6} bound={:e} k_epsilon={}",
                        verdict(r.pass()),
                        r.epsilon,
                        r.covering_count,
                        r.volumetric_lower,
                        r.capacity,
                        r.capacity_bound,
                        r.k_epsilon
                    )
                })
                .collect();
            let config = RunConfig {
                command: "capacity".into(),
                inputs: vec![alphas.display().to_string()],
                seed: None,
                format,
                params: params(&[("p", json!(p)), ("epsilon", json!(eps))]),
            };
            let outcome = Outcome {
                result: json!({"alphas": spec.alphas(), "reports": reports}),
                checks,
                table: Some((vec!["epsilon", "count", "lower", "bound", "k_epsilon", "pass"], rows)),
                text,
            };
            Ok((config, outcome))
        }

        Command::Entropy { alphas, p, n_max } => {
            let spec: DiagonalOperatorSpec = read_json(alphas)?;
            let report = check_entropy_sum_bound(&spec, *p, *n_max)?;
            let rows = report
                .entropy_numbers
                .iter()
                .enumerate()
                .map(|(i, e)| vec![(i + 1).to_string(), format!("{e:e}")])
                .collect();
            let checks = vec![("entropy_sum_bound".to_string(), report.pass)];
            let mut text = vec![format!("lhs = {}", sig12(report.lhs)), format!("rhs = {}", sig12(report.rhs))];
            text.extend(check_lines(&checks));
            let config = RunConfig {
                command: "entropy".into(),
                inputs: vec![alphas.display().to_string()],
                seed: None,
                format,
                params: params(&[("p", json!(p)), ("n_max", json!(n_max))]),
            };
            Ok((config, Outcome { result: json!(report), checks, table: Some((vec!["n", "entropy_upper"], rows)), text }))
        }

        Command::Sweep { p, n, policy, seed, tolerance } => {
            let alpha_policy = match policy {
                Policy::AnalyticN => AlphaPolicy::AnalyticN,
                Policy::SampledPi1Lb => AlphaPolicy::SampledPi1Lb,
            };
            if alpha_policy == AlphaPolicy::SampledPi1Lb && seed.is_none() {
                return Err(input_error("the sampled policy needs --seed"));
            }
            let tol = tolerance.unwrap_or(match alpha_policy {
                AlphaPolicy::AnalyticN => 1e-9,
                AlphaPolicy::SampledPi1Lb => 0.15,
            });
            let cfg = CounterexampleConfig::new(n.clone(), *p, alpha_policy, seed.unwrap_or(0));
            let report = exponent_sweep(&cfg)?;
            let ok = report.within(tol);
            let checks = vec![("slope".to_string(), ok)];
            let rows = report
                .rows
                .iter()
                .map(|r| vec![r.n.to_string(), format!("{:e}", r.alpha), format!("{:e}", r.sigma_p), format!("{:e}", r.floor)])
                .collect();
            let text = vec![
                format!("slope = {}", sig12(report.slope)),
                format!("target = {}", sig12(report.target)),
                format!("{} |slope - target| <= {tol}", verdict(ok)),
            ];
            let config = RunConfig {
                command: "sweep".into(),
                inputs: Vec::new(),
                seed: *seed,
                format,
                params: params(&[
                    ("p", json!(p)),
                    ("n", json!(n)),
                    ("policy", json!(alpha_policy)),
                    ("tolerance", json!(tol)),
                ]),
            };
            let result = json!({"slope": report.slope, "target": report.target, "tolerance": tol, "rows": report.rows});
            Ok((config, Outcome { result, checks, table: Some((vec!["n", "alpha", "sigma_p", "floor"], rows)), text }))
        }

        Command::Dominate { input, seed, search } => {
            let (op, source) = load_operator(input)?;
            let inner = search_options(search.max_cuts)?;
            let cert = find_pietsch_domination(&op, search.max_cuts, &inner, *seed)?;
            let margin = verify_certificate(&op, &cert, search.trials, *seed)?;
            let checks = vec![("certificate".to_string(), margin.pass)];
            let mut text = vec![format!("C = {}", sig12(cert.c)), format!("margin = {:e}", margin.max_margin)];
            text.extend(check_lines(&checks));
            let config = RunConfig {
                command: "dominate".into(),
                inputs: vec![source],
                seed: Some(*seed),
                format,
                params: params(&[
                    ("max_cuts", json!(search.max_cuts)),
                    ("trials", json!(search.trials)),
                    ("inner_search", json!(inner)),
                ]),
            };
            let result = json!({"certificate": cert, "verify_margin": margin.max_margin});
            Ok((config, Outcome { result, checks, table: None, text }))
        }

        Command::Verify { input, certificate, seed, trials } => {
            let (op, source) = load_operator(input)?;
            let cert = load_certificate(certificate)?;
            let margin = verify_certificate(&op, &cert, *trials, *seed)?;
            let checks = vec![("certificate".to_string(), margin.pass)];
            let mut text = vec![format!("margin = {:e}", margin.max_margin)];
            text.extend(check_lines(&checks));
            let config = RunConfig {
                command: "verify".into(),
                inputs: vec![source, certificate.display().to_string()],
                seed: Some(*seed),
                format,
                params: params(&[("trials", json!(trials))]),
            };
            Ok((config, Outcome { result: json!(margin), checks, table: None, text }))
        }
    }
}

/// Accepts a bare certificate or a `dominate` JSON report.
fn load_certificate(path: &PathBuf) -> Result<DominationCertificate, Failure> {
    let value: Value = read_json(path)?;
    let inner = value.get("result").and_then(|r| r.get("certificate")).cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| input_error(format!("{}: {e}", path.display())))
}
