//! `qikey`: find small quasi-identifiers in CSV files.
//!
//! Machine-readable JSON goes to stdout, one object per invocation; progress
//! messages go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qikey_core::adversarial::{self, DEFAULT_ROW_CAP};
use qikey_core::analysis::{self, CliqueSizeVector, DrawMode};
use qikey_core::bench::{self, BenchConfig};
use qikey_core::estimator::DEFAULT_K;
use qikey_core::filter::DEFAULT_CONSTANT;
use qikey_core::minkey::{self, GreedyStep};
use qikey_core::sketch_io::{self, StoredSketch};
use qikey_core::{sampling, AttributeSet, Dataset, Decision, Error, EstimatorSketch, PairSketch, TupleSketch};

#[derive(Parser)]
#[command(name = "qikey", version, about = "Sampling sketches for quasi-identifier discovery")]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether an attribute set is an ε-separation key.
    Filter(FilterArgs),
    /// Mine a small key with the greedy set-cover miner.
    Minkey(MinkeyArgs),
    /// Estimate the number of row pairs an attribute set leaves unseparated.
    Estimate(EstimateArgs),
    /// Write a hard instance as CSV, with a JSON manifest next to it.
    Gen(GenArgs),
    /// Evaluate the collision mathematics.
    Analyze(AnalyzeArgs),
    /// Compare the tuple and pair sketches on random queries.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV file to read.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Treat the first CSV line as data rather than column names.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "QIKEY_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CONSTANT)]
    constant: f64,
    #[command(flatten)]
    seed: SeedArg,
    /// Comma list of column names or 0-based indices; "" is the empty set.
    #[arg(long)]
    attrs: Option<String>,
    /// Use the pair-sample sketch instead of the tuple sketch.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    sketch_out: Option<PathBuf>,
    #[arg(long)]
    sketch_in: Option<PathBuf>,
    /// Leave wall-clock fields out of the output.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct MinkeyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CONSTANT)]
    constant: f64,
    #[command(flatten)]
    seed: SeedArg,
    /// Also search exhaustively for a minimum key of the sample.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    sketch_out: Option<PathBuf>,
    #[arg(long)]
    sketch_in: Option<PathBuf>,
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Largest attribute set the sketch will answer for.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_K)]
    constant: f64,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    attrs: Option<String>,
    #[arg(long)]
    sketch_out: Option<PathBuf>,
    #[arg(long)]
    sketch_in: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Every tuple of {1..q}^m.
    Grid {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_ROW_CAP)]
        cap: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// One large clique in column 0, a key overall.
    Clique {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// The bit-matrix gadget built from a random k-ones-per-column matrix.
    Encoding {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        m: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(subcommand)]
    kind: AnalyzeKind,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    With,
    Without,
}

#[derive(Subcommand)]
enum AnalyzeKind {
    /// Degree-r elementary symmetric polynomial of the sizes.
    Elementary {
        /// Comma list; `v*c` repeats v c times, e.g. "10,1*30,0*9".
        #[arg(long)]
        sizes: String,
        #[arg(long)]
        r: usize,
    },
    /// Probability that r draws hit r distinct cliques.
    Collision {
        #[arg(long)]
        sizes: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value = "without")]
        mode: ModeArg,
    },
    /// Fewest balls forcing a collision among N bins with probability 1-δ.
    Birthday {
        #[arg(long)]
        bins: u64,
        #[arg(long)]
        delta: f64,
    },
    /// Compare with- and without-replacement non-collision probabilities.
    Claim {
        #[arg(long)]
        sizes: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        m: usize,
    },
    /// Search for the clique-size vector maximizing the no-collision chance.
    Worstcase {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        epsilon: f64,
    },
    /// Closed-form unseparated-pair count of the encoding gadget.
    EncodingGamma {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        u: u64,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Use the built-in census-like table with this many rows instead of --input.
    #[arg(long, conflicts_with = "input")]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_CONSTANT)]
    constant: f64,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Parallel trials; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Skip the exact key/bad classification of each query.
    #[arg(long)]
    no_oracle: bool,
    #[arg(long)]
    no_timings: bool,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownColumn(_) | Error::ColumnOutOfRange { .. } | Error::InvalidParameter(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

struct Log {
    quiet: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("qikey: {}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Log { quiet: cli.quiet };
    let result = match cli.command {
        Command::Filter(a) => cmd_filter(a, &log),
        Command::Minkey(a) => cmd_minkey(a, &log),
        Command::Estimate(a) => cmd_estimate(a, &log),
        Command::Gen(a) => cmd_gen(a, &log),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Bench(a) => cmd_bench(a, &log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qikey: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit<T: Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string(value).map_err(|e| Failure {
        code: 1,
        message: e.to_string(),
    })?;
    println!("{text}");
    Ok(())
}

fn load_input(args: &InputArgs, log: &Log) -> CliResult<Dataset> {
    let path = args
        .input
        .as_ref()
        .ok_or_else(|| usage("--input is required unless --sketch-in is given"))?;
    let ds = Dataset::load_csv(path, !args.no_header)?;
    log.info(format!(
        "loaded {} rows x {} columns from {}",
        ds.n_rows(),
        ds.n_cols(),
        path.display()
    ));
    Ok(ds)
}

fn load_sketch(path: &Path, log: &Log) -> CliResult<StoredSketch> {
    let s = sketch_io::load(path)?;
    log.info(format!("read sketch {}", path.display()));
    Ok(s)
}

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("{flag} is required when building a sketch")))
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

enum FilterSketch {
    Tuple(TupleSketch),
    Pair(PairSketch),
}

impl FilterSketch {
    fn query(&self, a: &AttributeSet) -> qikey_core::Result<Decision> {
        match self {
            FilterSketch::Tuple(s) => s.query(a),
            FilterSketch::Pair(s) => s.query(a),
        }
    }

    fn sample_size(&self) -> usize {
        match self {
            FilterSketch::Tuple(s) => s.sample_size(),
            FilterSketch::Pair(s) => s.sample_size(),
        }
    }

    fn n_cols(&self) -> usize {
        match self {
            FilterSketch::Tuple(s) => s.n_cols(),
            FilterSketch::Pair(s) => s.n_cols(),
        }
    }

    fn names(&self) -> Option<&[String]> {
        match self {
            FilterSketch::Tuple(s) => s.names(),
            FilterSketch::Pair(s) => s.names(),
        }
    }

    fn stored(&self) -> StoredSketch {
        match self {
            FilterSketch::Tuple(s) => StoredSketch::Tuple(s.clone()),
            FilterSketch::Pair(s) => StoredSketch::Pair(s.clone()),
        }
    }
}

#[derive(Serialize)]
struct FilterOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    decision: Option<&'static str>,
    sample_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    build_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    query_ms: Option<f64>,
}

fn cmd_filter(a: FilterArgs, log: &Log) -> CliResult {
    let start = Instant::now();
    let sketch = match &a.sketch_in {
        Some(path) => match load_sketch(path, log)? {
            StoredSketch::Tuple(s) => FilterSketch::Tuple(s),
            StoredSketch::Pair(s) => FilterSketch::Pair(s),
            StoredSketch::Estimator(_) => return Err(usage("sketch file holds an estimator, not a filter")),
        },
        None => {
            let ds = load_input(&a.input, log)?;
            let eps = require(a.epsilon, "--epsilon")?;
            let seed = a.seed.seed;
            if a.baseline {
                FilterSketch::Pair(PairSketch::build(&ds, eps, a.constant, seed)?)
            } else {
                FilterSketch::Tuple(TupleSketch::build(&ds, eps, a.constant, seed)?)
            }
        }
    };
    let build_ms = elapsed_ms(start);
    log.info(format!("sketch holds {} samples", sketch.sample_size()));
    if let Some(path) = &a.sketch_out {
        sketch_io::save(path, &sketch.stored())?;
        log.info(format!("wrote sketch {}", path.display()));
    }

    let mut out = FilterOutput {
        decision: None,
        sample_size: sketch.sample_size(),
        witness: None,
        build_ms: (!a.no_timings).then_some(build_ms),
        query_ms: None,
    };
    if let Some(spec) = &a.attrs {
        let attrs = AttributeSet::parse(spec, sketch.names(), sketch.n_cols())?;
        let start = Instant::now();
        let decision = sketch.query(&attrs)?;
        out.query_ms = (!a.no_timings).then_some(elapsed_ms(start));
        out.decision = Some(if decision.is_accept() { "accept" } else { "reject" });
        out.witness = decision.witness();
    } else if a.sketch_out.is_none() {
        return Err(usage("nothing to do: give --attrs or --sketch-out"));
    }
    emit(&out)
}

#[derive(Serialize)]
struct KeyOutput {
    columns: Vec<usize>,
    names: Vec<String>,
    size: usize,
}

#[derive(Serialize)]
struct MinkeyOutput {
    #[serde(flatten)]
    key: KeyOutput,
    steps: Vec<GreedyStep>,
    residual_pairs: u64,
    sample_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<Option<KeyOutput>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    build_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mine_ms: Option<f64>,
}

fn key_output(columns: Vec<usize>, sketch: &TupleSketch) -> KeyOutput {
    let names = columns
        .iter()
        .map(|&k| sketch.names().map_or_else(|| format!("c{k}"), |ns| ns[k].clone()))
        .collect();
    KeyOutput {
        size: columns.len(),
        columns,
        names,
    }
}

fn cmd_minkey(a: MinkeyArgs, log: &Log) -> CliResult {
    let start = Instant::now();
    let sketch = match &a.sketch_in {
        Some(path) => match load_sketch(path, log)? {
            StoredSketch::Tuple(s) => s,
            _ => return Err(usage("minkey needs a tuple sketch")),
        },
        None => {
            let ds = load_input(&a.input, log)?;
            TupleSketch::build(&ds, require(a.epsilon, "--epsilon")?, a.constant, a.seed.seed)?
        }
    };
    let build_ms = elapsed_ms(start);
    if let Some(path) = &a.sketch_out {
        sketch_io::save(path, &StoredSketch::Tuple(sketch.clone()))?;
        log.info(format!("wrote sketch {}", path.display()));
    }

    let start = Instant::now();
    let greedy = minkey::greedy_minkey(&sketch);
    let mine_ms = elapsed_ms(start);
    log.info(format!("greedy picked {} columns", greedy.columns.len()));
    let exact = if a.exact {
        let best = minkey::exact_minkey(sketch.rows())?;
        Some(best.map(|s| key_output(s.indices().to_vec(), &sketch)))
    } else {
        None
    };
    emit(&MinkeyOutput {
        key: key_output(greedy.columns.clone(), &sketch),
        steps: greedy.steps,
        residual_pairs: greedy.residual_pairs,
        sample_size: greedy.sample_size,
        exact,
        build_ms: (!a.no_timings).then_some(build_ms),
        mine_ms: (!a.no_timings).then_some(mine_ms),
    })
}

fn cmd_estimate(a: EstimateArgs, log: &Log) -> CliResult {
    let sketch = match &a.sketch_in {
        Some(path) => match load_sketch(path, log)? {
            StoredSketch::Estimator(s) => s,
            _ => return Err(usage("sketch file does not hold an estimator")),
        },
        None => {
            let ds = load_input(&a.input, log)?;
            EstimatorSketch::build(
                &ds,
                require(a.k, "--k")?,
                require(a.alpha, "--alpha")?,
                require(a.epsilon, "--epsilon")?,
                a.constant,
                a.seed.seed,
            )?
        }
    };
    log.info(format!("estimator holds {} pairs", sketch.pair_count()));
    if let Some(path) = &a.sketch_out {
        sketch_io::save(path, &StoredSketch::Estimator(sketch.clone()))?;
        log.info(format!("wrote sketch {}", path.display()));
    }
    match &a.attrs {
        Some(spec) => {
            let attrs = AttributeSet::parse(spec, sketch.names(), sketch.n_cols())?;
            emit(&sketch.estimate(&attrs)?)
        }
        None if a.sketch_out.is_some() => Ok(()),
        None => Err(usage("nothing to do: give --attrs or --sketch-out")),
    }
}

#[derive(Serialize)]
struct Manifest<P: Serialize> {
    generator: &'static str,
    params: P,
    rows: usize,
    columns: usize,
    output: String,
}

#[derive(Serialize)]
struct GridParams {
    q: u32,
    m: usize,
}

#[derive(Serialize)]
struct CliqueParams {
    n: usize,
    epsilon: f64,
    m: usize,
    clique_size: u64,
}

#[derive(Serialize)]
struct EncodingParams {
    k: usize,
    t: usize,
    m: usize,
    seed: u64,
    /// The `kt × m` matrix, row-major.
    matrix: Vec<Vec<u8>>,
}

fn write_generated<P: Serialize>(ds: &Dataset, output: &Path, generator: &'static str, params: P, log: &Log) -> CliResult {
    let file = std::fs::File::create(output).map_err(|e| Failure {
        code: 1,
        message: format!("cannot create {}: {e}", output.display()),
    })?;
    ds.write_csv(std::io::BufWriter::new(file), true)?;
    let manifest = Manifest {
        generator,
        params,
        rows: ds.n_rows(),
        columns: ds.n_cols(),
        output: output.display().to_string(),
    };
    let mut sidecar = output.as_os_str().to_owned();
    sidecar.push(".json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&sidecar, text + "\n").map_err(|e| Failure {
        code: 1,
        message: format!("cannot write manifest: {e}"),
    })?;
    log.info(format!("wrote {} rows to {}", ds.n_rows(), output.display()));
    emit(&manifest)
}

fn cmd_gen(a: GenArgs, log: &Log) -> CliResult {
    match a.kind {
        GenKind::Grid { q, m, cap, output } => {
            let ds = adversarial::gen_grid(q, m, cap)?;
            write_generated(&ds, &output, "grid", GridParams { q, m }, log)
        }
        GenKind::Clique { n, epsilon, m, output } => {
            let ds = adversarial::gen_clique(n, epsilon, m)?;
            let params = CliqueParams {
                n,
                epsilon,
                m,
                clique_size: adversarial::clique_size(n, epsilon),
            };
            write_generated(&ds, &output, "clique", params, log)
        }
        GenKind::Encoding { k, t, m, seed, output } => {
            let matrix = adversarial::random_encoding_matrix(&mut sampling::rng(seed.seed), k, t, m);
            let ds = adversarial::gen_encoding(&matrix, k, t)?;
            let params = EncodingParams {
                k,
                t,
                m,
                seed: seed.seed,
                matrix,
            };
            write_generated(&ds, &output, "encoding", params, log)
        }
    }
}

#[derive(Serialize)]
struct ElementaryOutput {
    n: usize,
    r: usize,
    value: f64,
}

#[derive(Serialize)]
struct CollisionOutput {
    n: usize,
    r: usize,
    mode: DrawMode,
    probability: f64,
}

#[derive(Serialize)]
struct BirthdayOutput {
    bins: u64,
    delta: f64,
    q: u64,
    /// Exact no-collision probability at `q`.
    non_collision: f64,
}

#[derive(Serialize)]
struct GammaOutput {
    k: u64,
    t: u64,
    u: u64,
    gamma: i64,
}

fn cmd_analyze(a: AnalyzeArgs) -> CliResult {
    match a.kind {
        AnalyzeKind::Elementary { sizes, r } => {
            let v = CliqueSizeVector::parse(&sizes, 0.0)?;
            let value = analysis::elementary_symmetric(v.sizes(), r)?;
            emit(&ElementaryOutput { n: v.n(), r, value })
        }
        AnalyzeKind::Collision {
            sizes,
            epsilon,
            r,
            mode,
        } => {
            let v = CliqueSizeVector::parse(&sizes, epsilon)?;
            let mode = match mode {
                ModeArg::With => DrawMode::WithReplacement,
                ModeArg::Without => DrawMode::WithoutReplacement,
            };
            let probability = analysis::non_collision_prob(&v, r, mode)?;
            emit(&CollisionOutput {
                n: v.n(),
                r,
                mode,
                probability,
            })
        }
        AnalyzeKind::Birthday { bins, delta } => {
            let q = analysis::birthday_min_samples(bins, delta)?;
            emit(&BirthdayOutput {
                bins,
                delta,
                q,
                non_collision: analysis::birthday_non_collision(bins, q),
            })
        }
        AnalyzeKind::Claim { sizes, epsilon, r, m } => {
            let v = CliqueSizeVector::parse(&sizes, epsilon)?;
            emit(&analysis::verify_replacement_claim(&v, r, m)?)
        }
        AnalyzeKind::Worstcase { n, r, epsilon } => emit(&analysis::worstcase_search(n, r, epsilon)?),
        AnalyzeKind::EncodingGamma { k, t, u } => emit(&GammaOutput {
            k,
            t,
            u,
            gamma: adversarial::closed_form_gamma(k, t, u)?,
        }),
    }
}

fn cmd_bench(a: BenchArgs, log: &Log) -> CliResult {
    let ds = match a.synthetic {
        Some(rows) => {
            log.info(format!("generating census-like table with {rows} rows"));
            bench::adult_like(rows, a.seed.seed)?
        }
        None => load_input(&a.input, log)?,
    };
    let cfg = BenchConfig {
        epsilon: a.epsilon,
        constant: a.constant,
        queries: a.queries,
        trials: a.trials,
        seed: a.seed.seed,
        jobs: a.jobs,
        oracle: !a.no_oracle,
        timings: !a.no_timings,
    };
    let report = bench::run(&ds, &cfg)?;
    log.info(format!(
        "tuple {} rows vs pair {} pairs, agreement {:.1}%",
        report.tuple_sample_size,
        report.pair_sample_size,
        100.0 * report.agreement
    ));
    emit(&report)
}
