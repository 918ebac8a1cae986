//! Subcommand implementations for the `stsem` binary.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use stsem_core::graph_model::{load_corpus, save_corpus};
use stsem_core::learner::{SemanticSign, DEFAULT_LEVELS};
use stsem_core::matcher::{brute_force_match, match_graphs, BRUTE_FORCE_LIMIT};
use stsem_core::session::{Session, SessionConfig, SessionError, DEFAULT_THRESHOLD};
use stsem_core::synth::{generate_corpus, CorpusSpec};
use stsem_core::{Corpus, MatchConfig, ParameterVector, ScaleVector, ATTRIBUTE_COUNT};

#[derive(Parser)]
#[command(name = "stsem", version, about = "Learn and retrieve semantics over temporal graph patterns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and its ground truth from a class spec.
    Generate(GenerateArgs),
    /// Replay a feedback file and write a session snapshot.
    Train(TrainArgs),
    /// Rank a corpus with a trained snapshot.
    Rank(RankArgs),
    /// Time the matcher on every pair of corpus graphs.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// JSON file with `feature_dimension` and a list of `classes`.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives `corpus.json` and `ground_truth.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// One `graph_id,label` per line, label `positive` or `negative`.
    #[arg(long)]
    pub feedback: PathBuf,
    /// Where to write the session snapshot.
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub beam: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub deletion_penalty: f64,
}

#[derive(Args)]
pub struct RankArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Ranking export file.
    #[arg(long, default_value = "ranking.json")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// One weight for every attribute, or seven comma-separated weights.
    #[arg(long, default_value = "1.0")]
    pub phi: String,
    /// `exact` or `beam:<width>`.
    #[arg(long, default_value = "exact")]
    pub mode: String,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Optional JSON report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNKNOWN_GRAPH: i32 = 3;
pub const EXIT_STATE: i32 = 4;

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::UnknownGraph(_) => EXIT_UNKNOWN_GRAPH,
            SessionError::Learner(_) | SessionError::Semantics(_) => EXIT_STATE,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Train(a) => train(&a),
        Command::Rank(a) => rank(&a),
        Command::Bench(a) => bench(&a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    load_corpus(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

/// Writes every file to a temporary sibling first and renames only once all
/// of them are complete.
fn write_all_atomically(files: &[(&Path, &[u8])]) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
        tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let spec: CorpusSpec = serde_json::from_slice(&read(&args.spec)?)
        .map_err(|e| CliError::input(format!("{}: {e}", args.spec.display())))?;
    let (corpus, truth) = generate_corpus(&spec.classes, spec.feature_dimension, args.seed)
        .map_err(|e| CliError::input(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let corpus_path = args.out.join("corpus.json");
    let truth_path = args.out.join("ground_truth.json");
    let mut truth_bytes = serde_json::to_vec_pretty(&truth).expect("ground truth serializes");
    truth_bytes.push(b'\n');
    write_all_atomically(&[(&corpus_path, &save_corpus(&corpus)), (&truth_path, &truth_bytes)])?;

    println!("corpus {} ({} graphs, d = {})", corpus.content_id(), corpus.len(), corpus.feature_dimension());
    for class in &spec.classes {
        println!("  {:<16} {}", class.class_label, class.count);
    }
    println!("wrote {} and {}", corpus_path.display(), truth_path.display());
    Ok(())
}

/// Parses `graph_id,label` lines; blank lines and `#` comments are skipped.
pub fn parse_feedback(text: &str) -> Result<Vec<(String, SemanticSign)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| CliError::input(format!("feedback line {}: expected `graph_id,label`", n + 1)))?;
        let label = label
            .trim()
            .parse()
            .map_err(|e| CliError::input(format!("feedback line {}: {e}", n + 1)))?;
        out.push((id.trim().to_string(), label));
    }
    Ok(out)
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&args.corpus)?;
    let text = String::from_utf8(read(&args.feedback)?)
        .map_err(|_| CliError::input("feedback file is not UTF-8"))?;
    let feedback = parse_feedback(&text)?;
    let config = SessionConfig {
        levels: args.r,
        matcher: MatchConfig {
            beam_width: args.beam,
            deletion_penalty: args.deletion_penalty,
        },
        threshold: args.threshold,
    };
    let mut session = Session::new(&corpus, config)?;
    for (n, (id, label)) in feedback.iter().enumerate() {
        if !corpus.contains(id) {
            return Err(CliError {
                code: EXIT_UNKNOWN_GRAPH,
                message: format!("unknown graph id `{id}` (feedback entry {})", n + 1),
            });
        }
        session = session.apply_feedback(&corpus, id, *label)?;
    }
    write_all_atomically(&[(&args.snapshot, &session.to_snapshot_bytes())])?;
    println!(
        "revision {}: positive reference {}, negative reference {}",
        session.revision,
        session.positive.reference_graph_id.as_deref().unwrap_or("-"),
        session.negative.reference_graph_id.as_deref().unwrap_or("-"),
    );
    println!("wrote {}", args.snapshot.display());
    Ok(())
}

pub fn rank(args: &RankArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&args.corpus)?;
    let session = Session::from_snapshot_bytes(&read(&args.snapshot)?)?;
    session.check_corpus(&corpus)?;
    let mut ranking = session.rank(&corpus, None)?.ok_or(CliError {
        code: EXIT_STATE,
        message: "snapshot is untrained: label at least one positive example first".into(),
    })?;
    ranking.records.truncate(args.top_k);
    write_all_atomically(&[(&args.out, &ranking.to_export_json())])?;

    println!("{:>4}  {:<12} {:>10}  labeled", "rank", "graph", "posterior");
    for (i, r) in ranking.records.iter().enumerate() {
        println!(
            "{:>4}  {:<12} {:>10.6}  {}",
            i + 1,
            r.graph_id,
            r.posterior,
            if r.labeled { "yes" } else { "no" }
        );
    }
    if ranking.degenerate {
        eprintln!("warning: a model has all-zero weights; likelihoods are uniform");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchMode {
    Exact,
    Beam(usize),
}

pub fn parse_mode(s: &str) -> Result<BenchMode, CliError> {
    match s {
        "exact" => Ok(BenchMode::Exact),
        _ => s
            .strip_prefix("beam:")
            .and_then(|b| b.parse().ok())
            .filter(|b| *b > 0)
            .map(BenchMode::Beam)
            .ok_or_else(|| CliError::input(format!("--mode must be `exact` or `beam:<width>`, got `{s}`"))),
    }
}

pub fn parse_phi(s: &str) -> Result<ParameterVector, CliError> {
    let values = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::input(format!("--phi: {e}")))?;
    let weights: [f64; ATTRIBUTE_COUNT] = match values.len() {
        1 => [values[0]; ATTRIBUTE_COUNT],
        ATTRIBUTE_COUNT => values.try_into().expect("length checked"),
        n => return Err(CliError::input(format!("--phi needs 1 or {ATTRIBUTE_COUNT} values, got {n}"))),
    };
    ParameterVector::new(weights).map_err(|e| CliError::input(format!("--phi: {e}")))
}

#[derive(Debug, Serialize)]
pub struct PairReport {
    pub g1: String,
    pub g2: String,
    pub cost: f64,
    pub exact_cost: f64,
    /// Present when the pair is small enough for exhaustive enumeration.
    pub oracle_cost: Option<f64>,
    pub gap: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub mode: String,
    pub repetitions: usize,
    pub pairs: Vec<PairReport>,
    pub timing_us: Timing,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Matches every unordered pair under unit scales. Costs are compared with
/// the exact search and, for small pairs, with exhaustive enumeration.
pub fn run_bench(corpus: &Corpus, phi: &ParameterVector, mode: BenchMode, repetitions: usize) -> BenchReport {
    let scales = ScaleVector::ones();
    let exact = MatchConfig::exact();
    let config = match mode {
        BenchMode::Exact => exact,
        BenchMode::Beam(b) => MatchConfig::beam(b),
    };
    let graphs = corpus.graphs();
    let mut pairs = Vec::new();
    let mut times = Vec::new();
    for (i, a) in graphs.iter().enumerate() {
        for b in &graphs[i + 1..] {
            let mut per_rep = Vec::with_capacity(repetitions);
            let mut result = None;
            for _ in 0..repetitions.max(1) {
                let start = Instant::now();
                let r = match_graphs(a, b, phi, &scales, &config).expect("corpus graphs share a dimension");
                per_rep.push(start.elapsed().as_secs_f64() * 1e6);
                result = Some(r);
            }
            per_rep.sort_by(f64::total_cmp);
            times.push(per_rep[per_rep.len() / 2]);
            let cost = result.expect("at least one repetition").total_cost;
            let exact_cost = match mode {
                BenchMode::Exact => cost,
                BenchMode::Beam(_) => match_graphs(a, b, phi, &scales, &exact).expect("same inputs").total_cost,
            };
            let oracle_cost = (a.vertices.len() + b.vertices.len() <= BRUTE_FORCE_LIMIT)
                .then(|| brute_force_match(a, b, phi, &scales, &exact).expect("within limit").total_cost);
            pairs.push(PairReport {
                g1: a.id.clone(),
                g2: b.id.clone(),
                cost,
                exact_cost,
                gap: cost - oracle_cost.unwrap_or(exact_cost),
                oracle_cost,
            });
        }
    }
    times.sort_by(f64::total_cmp);
    BenchReport {
        mode: match mode {
            BenchMode::Exact => "exact".into(),
            BenchMode::Beam(b) => format!("beam:{b}"),
        },
        repetitions,
        pairs,
        timing_us: Timing {
            p50: percentile(&times, 0.5),
            p90: percentile(&times, 0.9),
            p99: percentile(&times, 0.99),
            max: times.last().copied().unwrap_or(0.0),
        },
    }
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&args.corpus)?;
    let phi = parse_phi(&args.phi)?;
    let mode = parse_mode(&args.mode)?;
    let report = run_bench(&corpus, &phi, mode, args.repetitions);
    let max_gap = report.pairs.iter().map(|p| p.gap).fold(0.0, f64::max);
    let below_exact = report.pairs.iter().filter(|p| p.cost < p.exact_cost - 1e-12).count();
    println!("mode {}  pairs {}  repetitions {}", report.mode, report.pairs.len(), report.repetitions);
    println!(
        "match time (us): p50 {:.1}  p90 {:.1}  p99 {:.1}  max {:.1}",
        report.timing_us.p50, report.timing_us.p90, report.timing_us.p99, report.timing_us.max
    );
    println!("max cost gap {max_gap:.3e}  pairs below exact {below_exact}");
    if let Some(out) = &args.out {
        let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        bytes.push(b'\n');
        write_all_atomically(&[(out, &bytes)])?;
    }
    Ok(())
}
