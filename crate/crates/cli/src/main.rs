//! `setlsh`: build, query and check set-query LSH structures.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 failed selftest.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use setlsh::family::{HashFamily, Single};
use setlsh::metrics::{Point, SetQuery};
use setlsh::oracle::estimate_collision_probability;
use setlsh::selftest::{run_all, SelftestConfig};
use setlsh::slsh::{
    CentroidSlsh, ExhaustiveSlsh, RepeatSlsh, WeightedExhaustiveSlsh, DEFAULT_MULTIPLICITY_CAP,
};
use setlsh::storage::{parse_dataset, parse_query_file, DataFormat, Dataset, QueryShape};
use setlsh::structure::{
    AnyBase, BuildOptions, FamilyName, Mode, QueryInput, Record, SpecOptions, Structure,
};
use setlsh::{Error, Rational};

#[derive(Parser)]
#[command(
    name = "setlsh",
    version,
    about = "Set-query locality-sensitive hashing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a structure from a dataset and write a snapshot.
    Build(BuildArgs),
    /// Answer queries against a snapshot.
    Query(QueryArgs),
    /// Compare Monte Carlo collision rates with the analytic laws.
    Estimate(EstimateArgs),
    /// Run the property suites and print PASS/FAIL per invariant.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Fvecs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Json,
    Text,
}

#[derive(Args)]
struct FamilyArgs {
    /// Base family: hyperplane, bit, minhash or simple-alsh.
    #[arg(long)]
    family: Option<String>,
    /// lsh, lp, geometric, weighted-geometric, centroid, average-angular,
    /// average-euclidean, ellipsoid or center.
    #[arg(long)]
    mode: String,
    /// Comma-separated rational weights such as `2/1,1/2`.
    #[arg(long)]
    weights: Option<String>,
    /// Set-query size for the exhaustive construction.
    #[arg(long)]
    k: Option<usize>,
    /// Exponent of the lp similarity.
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the file extension (`.fvecs`/`.bin` are binary).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[command(flatten)]
    family: FamilyArgs,
    /// Similarity threshold S or distance threshold r.
    #[arg(long)]
    threshold: String,
    /// Approximation factor.
    #[arg(long)]
    c: f64,
    /// Quantization slack of the center mode, in (0, 1).
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Failure probability used to size the index.
    #[arg(long, default_value_t = 0.05)]
    delta_fail: f64,
    /// Upper bound on hash tables per index.
    #[arg(long)]
    max_tables: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// JSON-lines file, one query per line.
    #[arg(long)]
    query_file: PathBuf,
    #[arg(long, value_enum, default_value_t = Report::Json)]
    report: Report,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    query_file: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data points compared with each query.
    #[arg(long, default_value_t = 10)]
    limit: usize,
    #[arg(long, value_enum, default_value_t = Report::Text)]
    report: Report,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = SelftestConfig::default().seed)]
    seed: u64,
    /// Trials per Monte Carlo instance.
    #[arg(long, default_value_t = SelftestConfig::default().trials)]
    trials: u64,
    /// Samples per geometric suite.
    #[arg(long, default_value_t = SelftestConfig::default().samples)]
    samples: u64,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Data(String),
    Selftest,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("SLSH_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        Failure::Usage(format!(
            "SLSH_THREADS must be a non-negative integer, got `{v}`"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Estimate(a) => estimate(a),
        Command::Selftest(a) => selftest(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Selftest) => ExitCode::from(3),
    }
}

fn load_data(path: &Path, format: Option<FormatArg>) -> Result<Dataset, Failure> {
    let format = match format {
        Some(FormatArg::Csv) => DataFormat::Csv,
        Some(FormatArg::Fvecs) => DataFormat::Fvecs,
        None => DataFormat::from_path(path),
    };
    let data = parse_dataset(path, format)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if data.is_empty() {
        return Err(Failure::Data(format!("{}: no records", path.display())));
    }
    Ok(data)
}

fn parse_weights(s: &str) -> Result<Vec<Rational>, Failure> {
    s.split(',')
        .map(|w| {
            let w = w.trim();
            if !w.contains('/') {
                return Err(Failure::Usage(format!(
                    "weight `{w}` must be a rational literal a/b"
                )));
            }
            w.parse::<Rational>().map_err(Failure::from)
        })
        .collect()
}

fn spec_options(
    f: &FamilyArgs,
    threshold: String,
    c: f64,
    phi: Option<f64>,
) -> Result<SpecOptions, Failure> {
    Ok(SpecOptions {
        mode: f.mode.parse()?,
        family: f
            .family
            .as_deref()
            .map(str::parse::<FamilyName>)
            .transpose()?,
        threshold,
        c,
        weights: f.weights.as_deref().map(parse_weights).transpose()?,
        phi,
        k: f.k,
        p: f.p,
    })
}

fn build(a: BuildArgs) -> Result<(), Failure> {
    let opts = spec_options(&a.family, a.threshold, a.c, a.phi)?;
    let data = load_data(&a.data, a.format)?;
    let spec = opts.to_spec(data.kind, data.dim)?;
    let mut build = BuildOptions {
        delta_fail: a.delta_fail,
        seed: a.seed,
        ..BuildOptions::default()
    };
    if let Some(m) = a.max_tables {
        build.index.max_tables = m;
    }
    let s = Structure::build(spec, data.records, build)?;
    s.save(&a.out)?;
    let params = s.index_params();
    eprintln!(
        "built {} over {} records: {} index(es), tables {:?}, K {:?}",
        s.spec().name(),
        s.len(),
        params.len(),
        params.iter().map(|p| p.l).collect::<Vec<_>>(),
        params.iter().map(|p| p.k).collect::<Vec<_>>()
    );
    Ok(())
}

fn query(a: QueryArgs) -> Result<(), Failure> {
    let s = Structure::load(&a.index)?;
    let shape = QueryShape::of(&s);
    let queries = parse_query_file(BufReader::new(File::open(&a.query_file)?), &shape)?;
    let bar = s.bar();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut data_error = false;
    for (n, (line, q)) in queries.iter().enumerate() {
        match s.query(q) {
            Ok(o) => {
                if a.report == Report::Json {
                    let v = json!({
                        "query": n,
                        "line": line,
                        "id": o.hit.map(|h| h.id),
                        "score": o.hit.map(|h| h.score),
                        "bar": bar,
                        "tables_probed": o.stats.tables_probed,
                        "collisions": o.stats.collisions,
                        "inspected": o.stats.inspected,
                        "cap": o.stats.cap,
                    });
                    writeln!(out, "{v}")?;
                } else {
                    match o.hit {
                        Some(h) => writeln!(
                            out,
                            "query {n}: id {} score {} (bar {bar}, inspected {}/{})",
                            h.id, h.score, o.stats.inspected, o.stats.cap
                        )?,
                        None => writeln!(
                            out,
                            "query {n}: no answer (inspected {}/{})",
                            o.stats.inspected, o.stats.cap
                        )?,
                    }
                }
            }
            Err(e) => {
                data_error |= e.is_data_error();
                if a.report == Report::Json {
                    writeln!(
                        out,
                        "{}",
                        json!({"query": n, "line": line, "error": e.to_string()})
                    )?;
                } else {
                    writeln!(out, "query {n}: error: {e}")?;
                }
            }
        }
    }
    if data_error {
        return Err(Failure::Data("some queries were malformed".into()));
    }
    Ok(())
}

struct Row {
    query: usize,
    point: usize,
    estimate: f64,
    law: f64,
    within: bool,
}

fn estimate_rows<F: HashFamily>(
    family: &F,
    queries: &[F::Query],
    points: &[F::Point],
    a: &EstimateArgs,
) -> Result<Vec<Row>, Failure> {
    let mut rows = Vec::new();
    for (qi, q) in queries.iter().enumerate() {
        for (pi, x) in points.iter().take(a.limit).enumerate() {
            let seed = setlsh::rng::derive(setlsh::rng::derive(a.seed, qi as u64), pi as u64);
            let est = estimate_collision_probability(family, q, x, a.trials, seed)?;
            let law = family.collision_law(q, x)?;
            rows.push(Row {
                query: qi,
                point: pi,
                estimate: est.estimate,
                law,
                within: est.within_sigma(law, 3.0),
            });
        }
    }
    Ok(rows)
}

fn set_queries(qs: Vec<(usize, QueryInput)>) -> Result<Vec<SetQuery<Record>>, Failure> {
    qs.into_iter()
        .map(|(line, q)| match q {
            QueryInput::Set(s) => Ok(s),
            QueryInput::Ellipsoid(_) => {
                Err(Failure::Data(format!("line {line}: expected a set-query")))
            }
        })
        .collect()
}

fn dense_sets(qs: Vec<SetQuery<Record>>) -> Result<Vec<SetQuery<Point>>, Failure> {
    qs.into_iter()
        .map(|s| {
            let pts = s
                .points()
                .iter()
                .map(|r| r.as_dense().cloned())
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SetQuery::new(pts)?)
        })
        .collect()
}

fn estimate(a: EstimateArgs) -> Result<(), Failure> {
    let opts = spec_options(&a.family, "0".into(), 1.0, None)?;
    let data = load_data(&a.data, a.format)?;
    let dim = data.dim;
    let family_name = opts.family;
    let base = |default: FamilyName| -> Result<AnyBase, Failure> {
        let f = family_name.unwrap_or(default);
        Ok(AnyBase::from_descriptor(&f.descriptor(dim))?)
    };
    let shape = QueryShape {
        kind: data.kind,
        universe: dim as u64,
        ellipsoid: false,
    };
    let qs = set_queries(parse_query_file(
        BufReader::new(File::open(&a.query_file)?),
        &shape,
    )?)?;
    let records = data.records;
    let rows = match opts.mode {
        Mode::Lsh => {
            let singles: Vec<Record> = qs
                .iter()
                .map(|q| match q.points() {
                    [x] => Ok(x.clone()),
                    _ => Err(Failure::Data("lsh mode takes single-point queries".into())),
                })
                .collect::<Result<_, _>>()?;
            estimate_rows(
                &Single(base(FamilyName::Hyperplane)?),
                &singles,
                &records,
                &a,
            )?
        }
        Mode::Lp => estimate_rows(
            &RepeatSlsh::new(base(FamilyName::Hyperplane)?, opts.p.unwrap_or(1))?,
            &qs,
            &records,
            &a,
        )?,
        Mode::Geometric => {
            let k = opts
                .k
                .ok_or_else(|| Failure::Usage("geometric mode needs --k".into()))?;
            estimate_rows(
                &ExhaustiveSlsh::new(base(FamilyName::Hyperplane)?, k)?,
                &qs,
                &records,
                &a,
            )?
        }
        Mode::WeightedGeometric => {
            let w = opts
                .weights
                .clone()
                .ok_or_else(|| Failure::Usage("weighted-geometric mode needs --weights".into()))?;
            let fam = WeightedExhaustiveSlsh::new(
                base(FamilyName::Hyperplane)?,
                w,
                DEFAULT_MULTIPLICITY_CAP,
            )?;
            estimate_rows(&fam, &qs, &records, &a)?
        }
        Mode::Centroid => {
            let pts = records
                .iter()
                .map(|r| r.as_dense().cloned())
                .collect::<Result<Vec<_>, _>>()?;
            estimate_rows(&CentroidSlsh::new(dim)?, &dense_sets(qs)?, &pts, &a)?
        }
        Mode::AverageAngular => {
            let pts = records
                .iter()
                .map(|r| r.as_dense().cloned())
                .collect::<Result<Vec<_>, _>>()?;
            let fam = RepeatSlsh::new(setlsh::hashes::Hyperplane::new(dim)?, 1)?;
            estimate_rows(&fam, &dense_sets(qs)?, &pts, &a)?
        }
        m => {
            return Err(Failure::Usage(format!(
                "estimate does not support mode {m}"
            )))
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let outside = rows.iter().filter(|r| !r.within).count();
    for r in &rows {
        if a.report == Report::Json {
            let v = json!({"query": r.query, "point": r.point, "estimate": r.estimate, "law": r.law, "within_3_sigma": r.within, "trials": a.trials});
            writeln!(out, "{v}")?;
        } else {
            writeln!(
                out,
                "query {} point {}: estimate {:.6} law {:.6} {}",
                r.query,
                r.point,
                r.estimate,
                r.law,
                if r.within { "ok" } else { "OUTSIDE 3 sigma" }
            )?;
        }
    }
    if a.report == Report::Text {
        writeln!(
            out,
            "{} of {} estimates within 3 sigma",
            rows.len() - outside,
            rows.len()
        )?;
    }
    Ok(())
}

fn selftest(a: SelftestArgs) -> Result<(), Failure> {
    let cfg = SelftestConfig {
        seed: a.seed,
        trials: a.trials,
        samples: a.samples,
    };
    let reports = run_all(&cfg);
    let mut failed = 0;
    for r in &reports {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!r.passed());
        println!(
            "{verdict} {:<30} checked {:>7}  violations {}/{} allowed{}",
            r.name,
            r.checked,
            r.violations,
            r.allowed,
            if r.passed() {
                String::new()
            } else {
                format!("  worst: {}", r.detail)
            }
        );
    }
    println!(
        "{} of {} suites passed",
        reports.len() - failed,
        reports.len()
    );
    if failed > 0 {
        return Err(Failure::Selftest);
    }
    Ok(())
}
