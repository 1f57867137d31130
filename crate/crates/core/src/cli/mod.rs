//! The `posthoc` command line.
//!
//! Every subcommand prints exactly one document on stdout (JSON by
//! default, CSV with `--format csv`); logs go to stderr. Exit codes: 0
//! success, 1 usage or configuration error, 2 input or parse error, 3 no
//! counterfactual found (`explain-cf --strict` only).

mod bench;

pub use bench::{bench_csv, BENCH_HEADER, BENCH_RADII};

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::counterfactual::{
    counterfactual_document, diverse_counterfactuals, find_counterfactual, render_contrast, DistanceConfig,
    DistanceKind, InnerOptimizer, SearchConfig, TargetSpec, DEFAULT_TOLERANCE,
};
use crate::dataset::Dataset;
use crate::error::Error;
use crate::fidelity::{
    classify_analogies, compare_schemes, validity_profile, AnalogyConfig, RegionSpec, SchemeCombo,
};
use crate::fixtures::{OwnedFixture, BENCH};
use crate::model::{load_model, Model};
use crate::schema::DataPoint;
use crate::service::requests::{distance_kind, parse_baseline};
use crate::service::ServiceConfig;
use crate::surrogate::{
    case_based, explain, global_tree_surrogate, AttributionOptions, AttributionScheme, BaselineConfig, CaseMetric,
    RegionSampling, SurrogateExplanation, TreeSurrogateConfig,
};

/// Central-difference step when a model has no analytic gradient.
const FD_STEP: f64 = 1e-3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "posthoc", version, about = "Post-hoc explanations for tabular black-box models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Errors go to stderr only, and explain-cf exits 3 without a result.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct ModelInput {
    /// Model document (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Reference data (CSV with a header row of feature names).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Input point as JSON, or @file.
    #[arg(long)]
    input: Option<String>,
}

#[derive(Debug, Args)]
struct SchemeArgs {
    /// gradient, edge, shapley, shapley-sampled, banzhaf, banzhaf-sampled or lime.
    #[arg(long)]
    scheme: String,
    /// zero, reference, dataset_median or dataset_mean.
    #[arg(long)]
    baseline: Option<String>,
    /// Reference point for --baseline reference (JSON or @file).
    #[arg(long)]
    reference: Option<String>,
    /// Kernel width for lime.
    #[arg(long)]
    kernel_width: Option<f64>,
    /// Central-difference step for gradient (analytic when omitted).
    #[arg(long)]
    step: Option<f64>,
    /// Largest dimension for exact enumeration.
    #[arg(long, default_value_t = crate::surrogate::DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a point (or every row of --data).
    Predict {
        #[command(flatten)]
        io: ModelInput,
        #[command(flatten)]
        out: Output,
    },
    /// Search for a counterfactual.
    ExplainCf {
        #[command(flatten)]
        io: ModelInput,
        #[command(flatten)]
        out: Output,
        /// Target score.
        #[arg(long, conflicts_with = "target_class")]
        target: Option<f64>,
        /// Target class label.
        #[arg(long)]
        target_class: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// mad_weighted_l1 or l2.
        #[arg(long, default_value = "mad_weighted_l1")]
        distance: String,
        /// Custom per-feature weights (comma separated); overrides --distance.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Features that must not change.
        #[arg(long, value_delimiter = ',')]
        lock: Vec<String>,
        /// nelder_mead, coordinate_descent or fd_gradient_descent.
        #[arg(long)]
        optimizer: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_outer: Option<usize>,
        #[arg(long)]
        max_inner_evals: Option<usize>,
        /// Number of diverse counterfactuals.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Local attribution under one scheme.
    ExplainAttr {
        #[command(flatten)]
        io: ModelInput,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Sample count for sampled schemes.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validity profile and analogy classes of an attribution.
    Fidelity {
        #[command(flatten)]
        io: ModelInput,
        #[command(flatten)]
        out: Output,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Radii in MAD units, ascending (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 0.95)]
        threshold: f64,
        /// Region samples per radius (also used by sampled schemes).
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Divergence between attribution schemes and baselines.
    Compare {
        #[command(flatten)]
        io: ModelInput,
        #[command(flatten)]
        out: Output,
        /// Schemes (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        scheme: Vec<String>,
        /// Baselines (comma separated).
        #[arg(long, value_delimiter = ',')]
        baseline: Vec<String>,
        #[arg(long)]
        reference: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = crate::surrogate::DEFAULT_EXACT_LIMIT)]
        exact_limit: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Most similar rows of the reference data.
    Casebase {
        #[command(flatten)]
        io: ModelInput,
        #[command(flatten)]
        out: Output,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// score_space, input_mad or blended.
        #[arg(long, default_value = "blended")]
        metric: String,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Distil the model into a decision tree over its schema bounds.
    TreeSurrogate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: Output,
        #[arg(long, default_value_t = 3)]
        max_depth: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the HTTP service.
    Serve {
        /// Listen address (default BIND_ADDR or 127.0.0.1:8080).
        #[arg(long)]
        bind: Option<String>,
        /// Session log directory (default LOG_DIR or ./sessions).
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Scheme x baseline divergence and validity radius over the shipped fixtures.
    Bench {
        #[arg(long)]
        seed: Option<u64>,
        /// Read fixtures from this directory instead of the embedded copies.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Samples per radius and for sampled schemes.
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    error: Value,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::ExactLimitExceeded { .. } | Error::Unsupported(_) => EXIT_USAGE,
            _ => EXIT_INPUT,
        };
        let api = crate::service::ApiError::from(e);
        Failure {
            code,
            message: api.message.clone(),
            error: api.to_json(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    let message = message.into();
    Failure {
        code: EXIT_USAGE,
        error: json!({"error": {"code": "usage", "message": message, "locus": null}}),
        message,
    }
}

type CliResult<T> = Result<T, Failure>;

/// What a subcommand produced.
enum Document {
    Json(Value),
    Text(String),
    /// Not converged under --strict; nothing is printed.
    NotConverged,
}

/// Runs the command line with `args` (including the program name) and
/// writes the result document to `out`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (format, strict) = match &cli.command {
        Command::Predict { out, .. }
        | Command::ExplainCf { out, .. }
        | Command::ExplainAttr { out, .. }
        | Command::Fidelity { out, .. }
        | Command::Compare { out, .. }
        | Command::Casebase { out, .. }
        | Command::TreeSurrogate { out, .. } => (out.format, out.strict),
        Command::Serve { .. } | Command::Bench { .. } => (Format::Csv, true),
    };
    match dispatch(cli.command) {
        Ok(Document::Json(v)) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"));
            EXIT_OK
        }
        Ok(Document::Text(s)) => {
            let _ = out.write_all(s.as_bytes());
            EXIT_OK
        }
        Ok(Document::NotConverged) => {
            log::error!("no counterfactual found within budget");
            EXIT_NOT_CONVERGED
        }
        Err(f) => {
            log::error!("{}", f.message);
            eprintln!("error: {}", f.message);
            if format == Format::Json && !strict {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&f.error).expect("json"));
            }
            f.code
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::from(Error::parse(path.display().to_string(), e.to_string())))
}

/// JSON given inline or as `@file`.
fn json_arg(arg: &str, what: &str) -> CliResult<Value> {
    let text = match arg.strip_prefix('@') {
        Some(path) => read_text(Path::new(path))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| {
        Failure::from(Error::parse(
            format!("{what}, line {}, column {}", e.line(), e.column()),
            e.to_string(),
        ))
    })
}

struct Loaded {
    model: Model,
    dataset: Option<Dataset>,
    input: Option<DataPoint>,
}

fn load(io: &ModelInput) -> CliResult<Loaded> {
    let model = load_model(&read_text(&io.model)?)?;
    let dataset = match &io.data {
        Some(p) => {
            let file = std::fs::File::open(p)
                .map_err(|e| Failure::from(Error::parse(p.display().to_string(), e.to_string())))?;
            Some(Dataset::from_csv(model.schema().clone(), file)?)
        }
        None => None,
    };
    let input = match &io.input {
        Some(arg) => Some(model.schema().point_from_json(&json_arg(arg, "input")?)?),
        None => None,
    };
    Ok(Loaded { model, dataset, input })
}

fn require_input(l: &Loaded) -> CliResult<DataPoint> {
    l.input.clone().ok_or_else(|| usage("--input is required"))
}

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| usage(format!("{what} is stochastic; pass --seed")))
}

fn scales(l: &Loaded) -> Vec<f64> {
    match &l.dataset {
        Some(d) => d.scales(),
        None => vec![1.0; l.model.dim()],
    }
}

/// Maps a command-line scheme name to a scheme. Sampled schemes need a seed.
fn scheme_from(name: &str, samples: Option<usize>, kernel_width: Option<f64>, step: Option<f64>, seed: Option<u64>, d: usize)
    -> CliResult<AttributionScheme> {
    let need_seed = |s: Option<u64>| require_seed(s, &format!("scheme {name}"));
    Ok(match name.replace('-', "_").as_str() {
        "gradient" => AttributionScheme::Gradient { step },
        "edge" | "edge_from_data" => AttributionScheme::EdgeFromData,
        "shapley" | "shapley_exact" => AttributionScheme::ShapleyExact,
        "banzhaf" | "banzhaf_exact" => AttributionScheme::BanzhafExact,
        "shapley_sampled" => AttributionScheme::ShapleySampled {
            n_permutations: samples.unwrap_or(256),
            seed: need_seed(seed)?,
        },
        "banzhaf_sampled" => AttributionScheme::BanzhafSampled {
            n: samples.unwrap_or(256),
            seed: need_seed(seed)?,
        },
        "lime" | "lime_kernel" => AttributionScheme::LimeKernel {
            n_samples: samples.unwrap_or_else(|| (1usize << d.min(12)).max(d + 1)),
            kernel_width,
            seed: need_seed(seed)?,
        },
        other => return Err(usage(format!("unknown scheme '{other}'"))),
    })
}

fn baseline_from(l: &Loaded, name: &str, reference: Option<&str>) -> CliResult<BaselineConfig> {
    let value = if name == "reference" {
        let values = json_arg(reference.ok_or_else(|| usage("--baseline reference needs --reference"))?, "reference")?;
        json!({"strategy": "reference", "values": values})
    } else {
        Value::String(name.to_string())
    };
    Ok(parse_baseline(l.model.schema(), &value, l.dataset.as_ref())?)
}

fn explanation(l: &Loaded, x: &DataPoint, args: &SchemeArgs, samples: Option<usize>, seed: Option<u64>) -> CliResult<SurrogateExplanation> {
    let mut scheme = scheme_from(&args.scheme, samples, args.kernel_width, args.step, seed, l.model.dim())?;
    if matches!(scheme, AttributionScheme::Gradient { step: None }) && !l.model.supports_analytic_gradient() {
        log::info!("model has no analytic gradient; using central differences");
        scheme = AttributionScheme::Gradient { step: Some(FD_STEP) };
    }
    let baseline = if scheme.uses_baseline() {
        let name = args
            .baseline
            .as_deref()
            .ok_or_else(|| usage(format!("scheme {} needs --baseline", scheme.name())))?;
        Some(baseline_from(l, name, args.reference.as_deref())?)
    } else {
        None
    };
    let opts = AttributionOptions {
        exact_limit: args.exact_limit,
        output: None,
    };
    Ok(explain(&l.model, x, &scheme, baseline.as_ref(), &opts)?)
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

fn dispatch(command: Command) -> CliResult<Document> {
    match command {
        Command::Predict { io, out } => predict(&io, out.format),
        Command::ExplainCf {
            io,
            out,
            target,
            target_class,
            tolerance,
            distance,
            weights,
            lock,
            optimizer,
            restarts,
            max_outer,
            max_inner_evals,
            n,
            seed,
        } => {
            let l = load(&io)?;
            let x = require_input(&l)?;
            let seed = require_seed(seed, "explain-cf")?;
            let target = match (target, target_class) {
                (Some(t), None) => TargetSpec::score(t, tolerance),
                (None, Some(c)) => TargetSpec::class(c, tolerance),
                _ => return Err(usage("give --target or --target-class")),
            };
            let kind = match weights {
                Some(w) => DistanceKind::CustomWeights { weights: w },
                None => distance_kind(&distance)?,
            };
            let sc = scales(&l);
            let dist = DistanceConfig::with_locked_names(
                l.model.schema(),
                kind,
                l.dataset.as_ref().map(|_| sc.as_slice()),
                &lock,
            )?;
            let mut search = SearchConfig::default().with_seed(seed);
            search.inner_optimizer = match optimizer.as_deref() {
                None => None,
                Some("nelder_mead") => Some(InnerOptimizer::NelderMead),
                Some("coordinate_descent") => Some(InnerOptimizer::CoordinateDescent),
                Some("fd_gradient_descent") => Some(InnerOptimizer::FdGradientDescent { step: 0.1 }),
                Some(other) => return Err(usage(format!("unknown optimizer '{other}'"))),
            };
            if let Some(r) = restarts {
                search.restarts = r;
            }
            if let Some(m) = max_outer {
                search.max_outer = m;
            }
            if let Some(m) = max_inner_evals {
                search.max_inner_evals = m;
            }
            let schema = l.model.schema();
            let results = if n == 1 {
                vec![find_counterfactual(&l.model, &x, &target, &dist, &search)?]
            } else {
                diverse_counterfactuals(&l.model, &x, &target, &dist, &search, n)?.results
            };
            if out.strict && !results.iter().any(|r| r.converged) {
                return Ok(Document::NotConverged);
            }
            let docs: Vec<Value> = results
                .iter()
                .map(|r| counterfactual_document(schema, r, &render_contrast(&x, r, schema), &target, &dist, &search))
                .collect();
            match out.format {
                Format::Json if n == 1 => Ok(Document::Json(docs.into_iter().next().expect("one result"))),
                Format::Json => Ok(Document::Json(json!({"results": docs, "requested": n, "shortfall": docs.len() < n}))),
                Format::Csv => {
                    let mut header: Vec<&str> = schema.names().collect();
                    header.extend(["score", "distance", "converged"]);
                    let rows = results
                        .iter()
                        .map(|r| {
                            let mut row: Vec<String> = r
                                .c
                                .values()
                                .iter()
                                .enumerate()
                                .map(|(k, &v)| schema.feature(k).display_value(v))
                                .collect();
                            row.extend([r.score_at_c.to_string(), r.distance.to_string(), r.converged.to_string()]);
                            row
                        })
                        .collect();
                    Ok(Document::Text(csv_text(&header, rows)))
                }
            }
        }
        Command::ExplainAttr {
            io,
            out,
            scheme,
            samples,
            seed,
        } => {
            let l = load(&io)?;
            let x = require_input(&l)?;
            let e = explanation(&l, &x, &scheme, samples, seed)?;
            match out.format {
                Format::Json => Ok(Document::Json(e.to_document().to_json())),
                Format::Csv => {
                    let mut rows: Vec<Vec<String>> = l
                        .model
                        .schema()
                        .names()
                        .zip(&e.weights)
                        .map(|(n, w)| vec![n.to_string(), w.to_string()])
                        .collect();
                    rows.push(vec!["(intercept)".into(), e.intercept.to_string()]);
                    Ok(Document::Text(csv_text(&["feature", "weight"], rows)))
                }
            }
        }
        Command::Fidelity {
            io,
            out,
            scheme,
            radii,
            threshold,
            samples,
            seed,
        } => {
            let l = load(&io)?;
            let x = require_input(&l)?;
            let seed = require_seed(seed, "fidelity")?;
            let e = explanation(&l, &x, &scheme, Some(samples), Some(seed))?;
            let sc = scales(&l);
            let profile = validity_profile(&l.model, &e, &sc, &radii, threshold, samples, seed)?;
            let radius = *radii.last().expect("clap requires radii");
            let region = RegionSpec::new(x, radius, samples, seed, sc);
            let report = classify_analogies(&l.model, &e, &region, &AnalogyConfig::default())?;
            match out.format {
                Format::Json => Ok(Document::Json(json!({
                    "explanation": e.to_document().to_json(),
                    "profile": profile.to_json(),
                    "analogies": report.to_json(),
                }))),
                Format::Csv => Ok(Document::Text(profile.to_csv())),
            }
        }
        Command::Compare {
            io,
            out,
            scheme,
            baseline,
            reference,
            samples,
            exact_limit,
            seed,
        } => {
            let l = load(&io)?;
            let x = require_input(&l)?;
            let mut combos = Vec::new();
            for name in &scheme {
                let s = scheme_from(name, samples, None, None, seed, l.model.dim())?;
                if !s.uses_baseline() {
                    combos.push(SchemeCombo::new(s, None));
                    continue;
                }
                if baseline.is_empty() {
                    return Err(usage(format!("scheme {name} needs --baseline")));
                }
                for b in &baseline {
                    combos.push(SchemeCombo::new(s.clone(), Some(baseline_from(&l, b, reference.as_deref())?)));
                }
            }
            let opts = AttributionOptions {
                exact_limit,
                output: None,
            };
            let m = compare_schemes(&l.model, &x, &combos, &opts)?;
            match out.format {
                Format::Json => Ok(Document::Json(m.to_json())),
                Format::Csv => {
                    let mut header = vec!["combination"];
                    header.extend(m.labels.iter().map(String::as_str));
                    let rows = m
                        .labels
                        .iter()
                        .zip(&m.divergence)
                        .map(|(label, row)| {
                            std::iter::once(label.clone())
                                .chain(row.iter().map(|d| d.map(|v| v.to_string()).unwrap_or_default()))
                                .collect()
                        })
                        .collect();
                    Ok(Document::Text(csv_text(&header, rows)))
                }
            }
        }
        Command::Casebase {
            io,
            out,
            k,
            metric,
            alpha,
        } => {
            let l = load(&io)?;
            let x = require_input(&l)?;
            let data = l.dataset.as_ref().ok_or_else(|| usage("casebase needs --data"))?;
            let metric = match metric.as_str() {
                "score_space" => CaseMetric::ScoreSpace,
                "input_mad" => CaseMetric::InputMad,
                "blended" => CaseMetric::Blended { alpha },
                other => return Err(usage(format!("unknown metric '{other}'"))),
            };
            let cb = case_based(&l.model, data, &x, k, metric)?;
            let schema = l.model.schema();
            match out.format {
                Format::Json => Ok(Document::Json(json!({
                    "metric": cb.metric,
                    "neighbors": cb.neighbors.iter().map(|n| json!({
                        "row": n.row,
                        "point": schema.point_to_json(&n.point),
                        "score": n.score,
                        "distance": n.distance,
                    })).collect::<Vec<_>>(),
                }))),
                Format::Csv => {
                    let mut header = vec!["row"];
                    header.extend(schema.names());
                    header.extend(["score", "distance"]);
                    let rows = cb
                        .neighbors
                        .iter()
                        .map(|n| {
                            let mut r = vec![n.row.to_string()];
                            r.extend(
                                n.point
                                    .values()
                                    .iter()
                                    .enumerate()
                                    .map(|(k, &v)| schema.feature(k).display_value(v)),
                            );
                            r.extend([n.score.to_string(), n.distance.to_string()]);
                            r
                        })
                        .collect();
                    Ok(Document::Text(csv_text(&header, rows)))
                }
            }
        }
        Command::TreeSurrogate {
            model,
            out,
            max_depth,
            samples,
            seed,
        } => {
            let model = load_model(&read_text(&model)?)?;
            let seed = require_seed(seed, "tree-surrogate")?;
            let region = RegionSampling::from_schema(model.schema())?;
            let t = global_tree_surrogate(&model, &region, &TreeSurrogateConfig::new(max_depth, samples, seed))?;
            let doc = json!({
                "tree": t.tree.to_document(),
                "fidelity": t.fidelity,
                "depth": t.depth,
                "n_train": t.n_train,
                "n_holdout": t.n_holdout,
                "seed": seed,
            });
            match out.format {
                Format::Json => Ok(Document::Json(doc)),
                Format::Csv => Ok(Document::Text(csv_text(
                    &["depth", "fidelity", "n_train", "n_holdout"],
                    vec![vec![
                        t.depth.to_string(),
                        t.fidelity.to_string(),
                        t.n_train.to_string(),
                        t.n_holdout.to_string(),
                    ]],
                ))),
            }
        }
        Command::Serve { bind, log_dir } => {
            let mut config = ServiceConfig::from_env()?;
            if let Some(b) = bind {
                config.bind = b;
            }
            if let Some(d) = log_dir {
                config.log_dir = Some(d);
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::from(Error::Io(e)))?;
            runtime.block_on(crate::service::serve(config))?;
            Ok(Document::Text(String::new()))
        }
        Command::Bench { seed, fixtures, samples } => {
            let seed = require_seed(seed, "bench")?;
            let suite = match fixtures {
                None => BENCH.iter().map(|f| OwnedFixture::embedded(*f)).collect::<Vec<_>>(),
                Some(dir) => {
                    if !dir.is_dir() {
                        return Err(Failure::from(Error::parse(
                            dir.display().to_string(),
                            "fixture directory not found",
                        )));
                    }
                    BENCH.iter().map(|f| f.from_dir(&dir)).collect::<Result<Vec<_>, _>>()?
                }
            };
            Ok(Document::Text(bench_csv(&suite, seed, samples)?))
        }
    }
}

fn predict(io: &ModelInput, format: Format) -> CliResult<Document> {
    let l = load(io)?;
    let schema = l.model.schema();
    let points: Vec<DataPoint> = match (&l.input, &l.dataset) {
        (Some(x), _) => vec![x.clone()],
        (None, Some(d)) => d.rows().to_vec(),
        (None, None) => return Err(usage("predict needs --input or --data")),
    };
    let preds = l.model.score_batch(&points)?;
    match format {
        Format::Json => {
            let docs: Vec<Value> = points
                .iter()
                .zip(&preds)
                .map(|(p, o)| {
                    let mut v = json!({"input": schema.point_to_json(p)});
                    if let (Value::Object(m), Value::Object(o)) = (&mut v, serde_json::to_value(o).expect("json")) {
                        m.extend(o);
                    }
                    v
                })
                .collect();
            Ok(Document::Json(if l.input.is_some() {
                docs.into_iter().next().expect("one point")
            } else {
                Value::Array(docs)
            }))
        }
        Format::Csv => {
            let mut header: Vec<&str> = schema.names().collect();
            header.extend(["score", "predicted_class"]);
            let rows = points
                .iter()
                .zip(&preds)
                .map(|(p, o)| {
                    let mut r: Vec<String> = p
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| schema.feature(k).display_value(v))
                        .collect();
                    r.push(o.score.to_string());
                    r.push(o.predicted_class.clone().unwrap_or_default());
                    r
                })
                .collect();
            Ok(Document::Text(csv_text(&header, rows)))
        }
    }
}
