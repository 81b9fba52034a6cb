//! Command-line surface. Each subcommand is a thin driver over one library
//! module; structured output goes to --out or standard output, always UTF-8
//! with a trailing newline. Exit codes: 0 success, 1 usage/config/validation
//! /parse failures, 2 I/O and backend failures, with a single-line
//! `error: ...` on the diagnostic stream for every nonzero exit.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench;
use crate::chat::BackendConfig;
use crate::dataset;
use crate::error::{Error, Result};
use crate::fal::{FalWeights, LatencyMode};
use crate::judge::{Judge, JudgeCache, JudgeRequest};
use crate::madgf::{run_pipeline, PipelineConfig};
use crate::metrics::{aggregate_corpus, evaluate_pair, MetricReport};
use crate::report::{
    build_comparison, build_fal_report, render_csv, render_markdown, FalInput, FalReport,
    SystemInputs,
};
use crate::textnorm::{count_stats, tokenize, NormConfig, VariantTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Parser)]
#[command(
    name = "codemix",
    version,
    about = "Evaluation and data generation toolkit for mixed Cantonese/English speech transcripts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file (judge: backend settings; generate: full pipeline).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override for seed-bearing subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path (default: standard output; `dataset split` and
    /// `generate` treat it as a directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format for tabular reports. `bench`, `dataset split`, and
    /// `generate` produce fixed file formats and ignore it.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize text into CJK characters, Latin words, and digit runs.
    Tokenize(TokenizeArgs),
    /// Score hypothesis transcripts against references (MER/CER/WER).
    Eval(EvalArgs),
    /// Compute the composite fidelity/accuracy/latency score.
    Fal(FalArgs),
    /// Score transcript fidelity with a judge backend.
    Judge(JudgeArgs),
    /// Time a transcription command over a manifest, one run per utterance.
    Bench(BenchArgs),
    /// Manifest inspection and stratified splitting.
    Dataset(DatasetArgs),
    /// Run the multi-agent conversation generation pipeline.
    Generate,
    /// Join per-system metric, fidelity, and latency files into a
    /// comparison table sorted by composite score.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
struct TokenizeArgs {
    /// Inline text to tokenize.
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    /// File of utterances, one per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Traditional/simplified variant table (TSV: source<TAB>target).
    #[arg(long)]
    variant_table: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    /// Reference transcripts, JSONL with {"id", "text"}.
    #[arg(long = "ref")]
    ref_path: PathBuf,
    /// Hypothesis transcripts, JSONL with {"id", "text"}; ids must match
    /// the reference file exactly.
    #[arg(long = "hyp")]
    hyp_path: PathBuf,
    /// Traditional/simplified variant table (TSV: source<TAB>target).
    #[arg(long)]
    variant_table: Option<PathBuf>,
    /// Keep per-utterance alignment traces in the JSON report.
    #[arg(long)]
    trace: bool,
}

/// Weight and latency-scale flags shared by `fal` and `report`.
#[derive(Debug, clap::Args)]
struct ScoreArgs {
    /// Weight on fidelity; give all three weights or none (default 1/3 each).
    #[arg(long)]
    alpha: Option<f64>,
    /// Weight on accuracy.
    #[arg(long)]
    beta: Option<f64>,
    /// Weight on latency.
    #[arg(long)]
    gamma: Option<f64>,
    /// Latency direction: "paper" (published formula, grows with L) or
    /// "corrected" (rewards low latency).
    #[arg(long, default_value = "paper")]
    mode: String,
    /// Latency ceiling M in seconds (default: largest latency in the input).
    #[arg(long)]
    max_latency: Option<f64>,
}

impl ScoreArgs {
    fn weights(&self) -> Result<FalWeights> {
        match (self.alpha, self.beta, self.gamma) {
            (None, None, None) => Ok(FalWeights::default()),
            (Some(a), Some(b), Some(g)) => FalWeights::new(a, b, g),
            _ => Err(Error::Usage(
                "give all of --alpha/--beta/--gamma or none of them".into(),
            )),
        }
    }

    fn mode(&self) -> Result<LatencyMode> {
        match self.mode.as_str() {
            "paper" => Ok(LatencyMode::Paper),
            "corrected" => Ok(LatencyMode::Corrected),
            other => Err(Error::Usage(format!(
                "unknown latency mode {other:?}, expected \"paper\" or \"corrected\""
            ))),
        }
    }
}

#[derive(Debug, clap::Args)]
struct FalArgs {
    /// JSON file with an array of {"id", "F", "counts", "L"} systems;
    /// replaces the single-system flags below.
    #[arg(long, conflicts_with_all = ["fidelity", "latency", "len", "sub", "ins", "del"])]
    inputs: Option<PathBuf>,
    /// System id for single-system scoring.
    #[arg(long, default_value = "system")]
    id: String,
    /// Fidelity score F in [0, 100].
    #[arg(long)]
    fidelity: Option<f64>,
    /// Latency L in seconds.
    #[arg(long)]
    latency: Option<f64>,
    /// Reference token count N.
    #[arg(long)]
    len: Option<usize>,
    /// Substitution count S.
    #[arg(long, default_value_t = 0)]
    sub: usize,
    /// Insertion count I.
    #[arg(long, default_value_t = 0)]
    ins: usize,
    /// Deletion count D.
    #[arg(long, default_value_t = 0)]
    del: usize,
    #[command(flatten)]
    score: ScoreArgs,
}

#[derive(Debug, clap::Args)]
struct JudgeArgs {
    /// Reference transcripts, JSONL with {"id", "text"}.
    #[arg(long = "ref")]
    ref_path: PathBuf,
    /// Hypothesis transcripts, JSONL with {"id", "text"}.
    #[arg(long = "hyp")]
    hyp_path: PathBuf,
    /// Verdict cache (JSONL, append-only); hits skip the backend.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    /// Dataset manifest naming the audio files.
    #[arg(long)]
    manifest: PathBuf,
    /// Shell command template; {audio} expands to the audio path.
    #[arg(long)]
    cmd: String,
    /// System name recorded on every latency record.
    #[arg(long, default_value = "system")]
    system: String,
    /// Directory for captured transcripts, one <id>.txt per success.
    #[arg(long)]
    hyp_dir: Option<PathBuf>,
    /// Concurrent runs (1 = sequential, the default).
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Debug, clap::Args)]
struct DatasetArgs {
    #[command(subcommand)]
    command: DatasetCommand,
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Check manifest records; any violation exits 1.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Per-topic utterance, duration, and script-mix statistics.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        /// Traditional/simplified variant table (TSV: source<TAB>target).
        #[arg(long)]
        variant_table: Option<PathBuf>,
    },
    /// Stratified train/test split; writes train.jsonl, test.jsonl, and
    /// split_meta.json into --out.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// Train fraction in (0, 1).
        #[arg(long)]
        ratio: f64,
    },
}

#[derive(Debug, clap::Args)]
struct ReportArgs {
    /// JSON array of systems, each either file references
    /// {"system", "metrics", "fidelity", "latency"} or direct values
    /// {"system", "counts", "F", "L"}. Relative paths resolve against
    /// this file's directory.
    #[arg(long)]
    systems: PathBuf,
    #[command(flatten)]
    score: ScoreArgs,
}

/// Parses argv and runs the named subcommand, mapping every failure onto
/// the documented exit codes.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; those exit 0 via stdout
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Context {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
    };
    match cli.command {
        Command::Tokenize(args) => cmd_tokenize(&ctx, args),
        Command::Eval(args) => cmd_eval(&ctx, args),
        Command::Fal(args) => cmd_fal(&ctx, args),
        Command::Judge(args) => cmd_judge(&ctx, args),
        Command::Bench(args) => cmd_bench(&ctx, args),
        Command::Dataset(args) => cmd_dataset(&ctx, args),
        Command::Generate => cmd_generate(&ctx),
        Command::Report(args) => cmd_report(&ctx, args),
    }
}

struct Context {
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: OutputFormat,
}

impl Context {
    fn emit(&self, content: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, content).map_err(|e| Error::io(path, e)),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(content.as_bytes())
                    .and_then(|()| stdout.flush())
                    .map_err(Error::from)
            }
        }
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(&text)
    }
}

fn norm_config(variant_table: Option<&Path>) -> Result<NormConfig> {
    let mut cfg = NormConfig::default();
    if let Some(path) = variant_table {
        cfg.variant_table = Some(VariantTable::from_tsv_path(path)?);
    }
    Ok(cfg)
}

/// Markdown needs cell text free of pipes and newlines.
fn md_cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn ratio_cell(rate: Option<f64>) -> String {
    rate.map(|r| format!("{:.2}", r * 100.0)).unwrap_or_else(|| "-".into())
}

// ---- tokenize ----------------------------------------------------------

#[derive(Serialize)]
struct TokenizedLine {
    source: String,
    normalized: String,
    tokens: Vec<crate::textnorm::Token>,
    discarded: usize,
    counts: crate::textnorm::ScriptCounts,
}

fn cmd_tokenize(ctx: &Context, args: TokenizeArgs) -> Result<()> {
    let cfg = norm_config(args.variant_table.as_deref())?;
    let inputs: Vec<String> = match (args.text, args.input) {
        (Some(text), None) => vec![text],
        (None, Some(path)) => {
            let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            raw.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
        }
        _ => return Err(Error::Usage("give exactly one of --text or --input".into())),
    };
    if inputs.is_empty() {
        return Err(Error::Usage("no utterances to tokenize".into()));
    }
    let lines: Vec<TokenizedLine> = inputs
        .iter()
        .map(|text| {
            let seq = tokenize(text, &cfg);
            let counts = count_stats(&seq);
            TokenizedLine {
                source: seq.source,
                normalized: seq.normalized,
                tokens: seq.tokens,
                discarded: seq.discarded,
                counts,
            }
        })
        .collect();
    match ctx.format {
        OutputFormat::Json => ctx.emit_json(&lines),
        OutputFormat::Md => {
            let mut out = String::from("| Line | Token | Kind |\n|---:|---|---|\n");
            for (i, line) in lines.iter().enumerate() {
                for token in &line.tokens {
                    out.push_str(&format!(
                        "| {} | {} | {} |\n",
                        i + 1,
                        md_cell(&token.text),
                        token.kind
                    ));
                }
            }
            ctx.emit(&out)
        }
        OutputFormat::Csv => {
            let mut rows = vec![vec!["line".into(), "token".into(), "kind".into()]];
            for (i, line) in lines.iter().enumerate() {
                for token in &line.tokens {
                    rows.push(vec![
                        (i + 1).to_string(),
                        token.text.clone(),
                        token.kind.to_string(),
                    ]);
                }
            }
            ctx.emit(&csv_string(rows)?)
        }
    }
}

// ---- eval and judge share the transcript pair format -------------------

#[derive(Debug, Deserialize)]
struct TranscriptLine {
    id: String,
    text: String,
}

fn load_transcripts(path: &Path) -> Result<Vec<TranscriptLine>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TranscriptLine = serde_json::from_str(line).map_err(|e| {
            Error::Parse(format!("{}:{}: bad transcript line: {}", path.display(), lineno + 1, e))
        })?;
        if let Some(first) = seen.insert(parsed.id.clone(), lineno + 1) {
            return Err(Error::Validation(format!(
                "{}: duplicate id {:?} on lines {} and {}",
                path.display(),
                parsed.id,
                first,
                lineno + 1
            )));
        }
        lines.push(parsed);
    }
    if lines.is_empty() {
        return Err(Error::Usage(format!("{}: no utterances", path.display())));
    }
    Ok(lines)
}

/// Joins the two files by id, in reference order. Every reference id must
/// appear in the hypothesis file and vice versa.
fn join_transcripts(
    ref_path: &Path,
    hyp_path: &Path,
) -> Result<Vec<(String, String, String)>> {
    let refs = load_transcripts(ref_path)?;
    let hyps = load_transcripts(hyp_path)?;
    let mut by_id: HashMap<String, String> =
        hyps.into_iter().map(|l| (l.id, l.text)).collect();
    let mut pairs = Vec::with_capacity(refs.len());
    for line in refs {
        let hyp = by_id.remove(&line.id).ok_or_else(|| {
            Error::Validation(format!(
                "{}: missing hypothesis for id {:?}",
                hyp_path.display(),
                line.id
            ))
        })?;
        pairs.push((line.id, line.text, hyp));
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::Validation(format!(
            "{}: {} hypothesis id(s) absent from the reference, first {:?}",
            hyp_path.display(),
            by_id.len(),
            extra
        )));
    }
    Ok(pairs)
}

fn cmd_eval(ctx: &Context, args: EvalArgs) -> Result<()> {
    let cfg = norm_config(args.variant_table.as_deref())?;
    let pairs = join_transcripts(&args.ref_path, &args.hyp_path)?;
    let entries = pairs
        .into_iter()
        .map(|(id, ref_text, hyp_text)| {
            let mut entry = evaluate_pair(&ref_text, &hyp_text, &cfg);
            entry.id = id;
            if !args.trace {
                entry.alignment = None;
            }
            entry
        })
        .collect();
    let report = aggregate_corpus(entries)?;
    match ctx.format {
        OutputFormat::Json => ctx.emit_json(&report),
        OutputFormat::Md => ctx.emit(&eval_markdown(&report)),
        OutputFormat::Csv => ctx.emit(&eval_csv(&report)?),
    }
}

fn eval_markdown(report: &MetricReport) -> String {
    let mut out = String::from("| Utterance | MER% | CER% | WER% |\n|---|---:|---:|---:|\n");
    for entry in &report.utterances {
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            md_cell(&entry.id),
            ratio_cell(entry.mer),
            ratio_cell(entry.cer),
            ratio_cell(entry.wer)
        ));
    }
    out.push_str(&format!(
        "| corpus | {} | {} | {} |\n",
        ratio_cell(report.corpus.mer),
        ratio_cell(report.corpus.cer),
        ratio_cell(report.corpus.wer)
    ));
    out
}

/// Raw ratios and counts, one row per utterance plus a corpus row; an
/// export, so no percent rounding.
fn eval_csv(report: &MetricReport) -> Result<String> {
    let mut rows = vec![vec![
        "id".to_string(),
        "mer".into(),
        "cer".into(),
        "wer".into(),
        "mer_s".into(),
        "mer_i".into(),
        "mer_d".into(),
        "mer_n".into(),
        "cer_s".into(),
        "cer_i".into(),
        "cer_d".into(),
        "cer_n".into(),
        "wer_s".into(),
        "wer_i".into(),
        "wer_d".into(),
        "wer_n".into(),
    ]];
    let rate = |r: Option<f64>| r.map(|v| v.to_string()).unwrap_or_default();
    let mut push = |id: &str, e: &crate::metrics::MetricCounts, m, c, w| {
        rows.push(vec![
            id.to_string(),
            rate(m),
            rate(c),
            rate(w),
            e.mer.substitutions.to_string(),
            e.mer.insertions.to_string(),
            e.mer.deletions.to_string(),
            e.mer.reference_len.to_string(),
            e.cer.substitutions.to_string(),
            e.cer.insertions.to_string(),
            e.cer.deletions.to_string(),
            e.cer.reference_len.to_string(),
            e.wer.substitutions.to_string(),
            e.wer.insertions.to_string(),
            e.wer.deletions.to_string(),
            e.wer.reference_len.to_string(),
        ]);
    };
    for entry in &report.utterances {
        push(&entry.id, &entry.counts, entry.mer, entry.cer, entry.wer);
    }
    push(
        "corpus",
        &report.corpus.counts,
        report.corpus.mer,
        report.corpus.cer,
        report.corpus.wer,
    );
    csv_string(rows)
}

// ---- fal ----------------------------------------------------------------

fn cmd_fal(ctx: &Context, args: FalArgs) -> Result<()> {
    let weights = args.score.weights()?;
    let mode = args.score.mode()?;
    let inputs: Vec<FalInput> = match &args.inputs {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&raw)
                .map_err(|e| Error::Parse(format!("{}: {}", path.display(), e)))?
        }
        None => {
            let (fidelity, latency, len) = match (args.fidelity, args.latency, args.len) {
                (Some(f), Some(l), Some(n)) => (f, l, n),
                _ => {
                    return Err(Error::Usage(
                        "give --fidelity, --latency, and --len (or --inputs FILE)".into(),
                    ))
                }
            };
            if args.sub + args.del > len {
                return Err(Error::Validation(format!(
                    "S + D ({}) cannot exceed the reference length {len}",
                    args.sub + args.del
                )));
            }
            vec![FalInput {
                id: args.id.clone(),
                fidelity,
                latency_s: latency,
                counts: crate::metrics::EditCounts {
                    substitutions: args.sub,
                    insertions: args.ins,
                    deletions: args.del,
                    reference_len: len,
                    correct: len - args.sub - args.del,
                },
            }]
        }
    };
    let report = build_fal_report(&inputs, weights, mode, args.score.max_latency)?;
    match ctx.format {
        OutputFormat::Json => ctx.emit_json(&report),
        OutputFormat::Md => ctx.emit(&fal_markdown(&report)),
        OutputFormat::Csv => {
            let mut rows =
                vec![vec!["system".into(), "f".into(), "accuracy".into(), "latency".into(), "fal".into()]];
            for s in &report.systems {
                rows.push(vec![
                    s.id.clone(),
                    format!("{:.2}", s.terms.fidelity),
                    format!("{:.2}", s.terms.accuracy),
                    format!("{:.2}", s.terms.latency),
                    format!("{:.2}", s.total),
                ]);
            }
            ctx.emit(&csv_string(rows)?)
        }
    }
}

fn fal_markdown(report: &FalReport) -> String {
    let mut out =
        String::from("| System | F | Accuracy | Latency | FAL |\n|---|---:|---:|---:|---:|\n");
    for s in &report.systems {
        out.push_str(&format!(
            "| {} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
            md_cell(&s.id),
            s.terms.fidelity,
            s.terms.accuracy,
            s.terms.latency,
            s.total
        ));
    }
    out
}

// ---- judge ---------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct JudgedUtterance {
    id: String,
    score: u8,
    cache_hit: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct JudgeReport {
    task: String,
    backend: String,
    pub(crate) mean_score: Option<f64>,
    utterances: Vec<JudgedUtterance>,
}

fn judge_backend(ctx: &Context) -> Result<BackendConfig> {
    let mut backend = match &ctx.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&raw)
                .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?
        }
        None => BackendConfig::Mock { seed: 0 },
    };
    if let (Some(seed_override), BackendConfig::Mock { seed }) = (ctx.seed, &mut backend) {
        *seed = seed_override;
    }
    Ok(backend)
}

fn cmd_judge(ctx: &Context, args: JudgeArgs) -> Result<()> {
    let pairs = join_transcripts(&args.ref_path, &args.hyp_path)?;
    let judge = Judge::from_config(&judge_backend(ctx)?)?;
    let mut cache = match &args.cache {
        Some(path) => Some(JudgeCache::open(path)?),
        None => None,
    };
    let requests: Vec<JudgeRequest> = pairs
        .iter()
        .map(|(_, ref_text, hyp_text)| JudgeRequest::fidelity(ref_text, hyp_text))
        .collect();
    let verdicts = judge.score_all(&requests, cache.as_mut());
    let mut utterances = Vec::with_capacity(pairs.len());
    for ((id, _, _), verdict) in pairs.into_iter().zip(verdicts) {
        let v = verdict?;
        utterances.push(JudgedUtterance { id, score: v.score, cache_hit: v.cache_hit });
    }
    let mean_score = (!utterances.is_empty()).then(|| {
        utterances.iter().map(|u| u.score as f64).sum::<f64>() / utterances.len() as f64
    });
    let report = JudgeReport {
        task: "fidelity".into(),
        backend: judge.identity(),
        mean_score,
        utterances,
    };
    match ctx.format {
        OutputFormat::Json => ctx.emit_json(&report),
        OutputFormat::Md => {
            let mut out = String::from("| Utterance | Score | Cache |\n|---|---:|---|\n");
            for u in &report.utterances {
                out.push_str(&format!(
                    "| {} | {} | {} |\n",
                    md_cell(&u.id),
                    u.score,
                    if u.cache_hit { "hit" } else { "miss" }
                ));
            }
            ctx.emit(&out)
        }
        OutputFormat::Csv => {
            let mut rows = vec![vec!["id".into(), "score".into(), "cache_hit".into()]];
            for u in &report.utterances {
                rows.push(vec![u.id.clone(), u.score.to_string(), u.cache_hit.to_string()]);
            }
            ctx.emit(&csv_string(rows)?)
        }
    }
}

// ---- bench ---------------------------------------------------------------

fn cmd_bench(ctx: &Context, args: BenchArgs) -> Result<()> {
    let records = dataset::load_manifest(&args.manifest)?;
    if records.is_empty() {
        return Err(Error::Usage(format!("{}: no utterances", args.manifest.display())));
    }
    let items: Vec<bench::BenchItem> = records
        .into_iter()
        .map(|r| bench::BenchItem { id: r.id, audio: r.audio })
        .collect();
    let cfg = bench::BenchConfig {
        command: args.cmd,
        system: args.system,
        hyp_dir: args.hyp_dir,
    };
    let results = bench::run_many(&cfg, &items, args.parallelism)?;
    match &ctx.out {
        Some(path) => {
            bench::write_latency_jsonl(path, &results)?;
            // summary to stdout; failing it (e.g. zero successes) still
            // leaves the records on disk for inspection
            let summary = bench::summarize(&results)?;
            let mut text = serde_json::to_string_pretty(&summary)?;
            text.push('\n');
            print!("{text}");
            Ok(())
        }
        None => {
            let mut out = String::new();
            for record in &results {
                out.push_str(&serde_json::to_string(record)?);
                out.push('\n');
            }
            ctx.emit(&out)
        }
    }
}

// ---- dataset ---------------------------------------------------------------

fn cmd_dataset(ctx: &Context, args: DatasetArgs) -> Result<()> {
    match args.command {
        DatasetCommand::Validate { manifest } => {
            let records = dataset::load_manifest(&manifest)?;
            let issues = dataset::validate(&records);
            match ctx.format {
                OutputFormat::Json => {
                    ctx.emit_json(&serde_json::json!({ "issues": &issues }))?
                }
                OutputFormat::Md => {
                    let mut out = String::from("| Utterance | Issue |\n|---|---|\n");
                    for issue in &issues {
                        out.push_str(&format!(
                            "| {} | {} |\n",
                            md_cell(&issue.id),
                            md_cell(&issue.message)
                        ));
                    }
                    ctx.emit(&out)?
                }
                OutputFormat::Csv => {
                    let mut rows = vec![vec!["id".into(), "message".into()]];
                    for issue in &issues {
                        rows.push(vec![issue.id.clone(), issue.message.clone()]);
                    }
                    ctx.emit(&csv_string(rows)?)?
                }
            }
            if issues.is_empty() {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{}: {} issue(s) found",
                    manifest.display(),
                    issues.len()
                )))
            }
        }
        DatasetCommand::Stats { manifest, variant_table } => {
            let records = dataset::load_manifest(&manifest)?;
            let cfg = norm_config(variant_table.as_deref())?;
            let stats = dataset::stats(&records, &cfg);
            match ctx.format {
                OutputFormat::Json => ctx.emit_json(&stats),
                OutputFormat::Md => ctx.emit(&stats_markdown(&stats)),
                OutputFormat::Csv => ctx.emit(&stats_csv(&stats)?),
            }
        }
        DatasetCommand::Split { manifest, ratio } => {
            let out_dir = ctx.out.clone().ok_or_else(|| {
                Error::Usage("dataset split needs --out DIR for the split files".into())
            })?;
            let records = dataset::load_manifest(&manifest)?;
            let result = dataset::split(&records, ratio, ctx.seed.unwrap_or(0))?;
            dataset::write_split(&out_dir, &result)?;
            let summary = serde_json::json!({
                "seed": result.seed,
                "ratio": result.ratio,
                "train_count": result.train.len(),
                "test_count": result.test.len(),
                "topic_train_fractions": result.topic_train_fractions,
                "out_dir": out_dir,
            });
            let mut text = serde_json::to_string_pretty(&summary)?;
            text.push('\n');
            print!("{text}");
            Ok(())
        }
    }
}

fn stats_markdown(stats: &dataset::DatasetStats) -> String {
    let mut out = String::from(
        "| Topic | Utterances | Hours | CJK chars | Latin words | CJK:Latin |\n|---|---:|---:|---:|---:|---:|\n",
    );
    let mut row = |name: &str, t: &dataset::TopicStats| {
        out.push_str(&format!(
            "| {} | {} | {:.2} | {} | {} | {} |\n",
            md_cell(name),
            t.utterances,
            t.hours,
            t.cjk_chars,
            t.latin_words,
            t.ratio_cjk_to_latin.map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into())
        ));
    };
    for (topic, t) in &stats.topics {
        row(topic, t);
    }
    row("total", &stats.total);
    out
}

fn stats_csv(stats: &dataset::DatasetStats) -> Result<String> {
    let mut rows = vec![vec![
        "topic".to_string(),
        "utterances".into(),
        "hours".into(),
        "cjk_chars".into(),
        "latin_words".into(),
        "ratio_cjk_to_latin".into(),
    ]];
    let mut row = |name: &str, t: &dataset::TopicStats| {
        rows.push(vec![
            name.to_string(),
            t.utterances.to_string(),
            t.hours.to_string(),
            t.cjk_chars.to_string(),
            t.latin_words.to_string(),
            t.ratio_cjk_to_latin.map(|r| r.to_string()).unwrap_or_default(),
        ]);
    };
    for (topic, t) in &stats.topics {
        row(topic, t);
    }
    row("total", &stats.total);
    csv_string(rows)
}

// ---- generate ---------------------------------------------------------------

fn cmd_generate(ctx: &Context) -> Result<()> {
    let config_path = ctx
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("generate needs --config PIPELINE.toml".into()))?;
    let mut cfg = PipelineConfig::from_toml_path(config_path)?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if let Some(out_dir) = &ctx.out {
        cfg.out_dir = out_dir.clone();
    }
    let result = run_pipeline(&cfg)?;
    let mut text = serde_json::to_string_pretty(&result)?;
    text.push('\n');
    print!("{text}");
    Ok(())
}

// ---- report ---------------------------------------------------------------

/// One line of the systems file: either paths to the three per-system
/// reports or the aggregated numbers directly.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SystemSpec {
    Files {
        system: String,
        metrics: PathBuf,
        fidelity: PathBuf,
        latency: PathBuf,
    },
    Direct(SystemInputs),
}

fn resolve_relative(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn load_system(base: &Path, spec: SystemSpec) -> Result<SystemInputs> {
    match spec {
        SystemSpec::Direct(inputs) => Ok(inputs),
        SystemSpec::Files { system, metrics, fidelity, latency } => {
            let metrics_path = resolve_relative(base, &metrics);
            let raw = std::fs::read_to_string(&metrics_path)
                .map_err(|e| Error::io(&metrics_path, e))?;
            let metric_report: MetricReport = serde_json::from_str(&raw)
                .map_err(|e| Error::Parse(format!("{}: {}", metrics_path.display(), e)))?;

            let fidelity_path = resolve_relative(base, &fidelity);
            let raw = std::fs::read_to_string(&fidelity_path)
                .map_err(|e| Error::io(&fidelity_path, e))?;
            let judge_report: JudgeReport = serde_json::from_str(&raw)
                .map_err(|e| Error::Parse(format!("{}: {}", fidelity_path.display(), e)))?;
            let mean_fidelity = judge_report.mean_score.ok_or_else(|| {
                Error::Validation(format!(
                    "{}: no fidelity scores to average",
                    fidelity_path.display()
                ))
            })?;

            let latency_path = resolve_relative(base, &latency);
            let records = bench::read_latency_jsonl(&latency_path)?;
            let successful: Vec<f64> =
                records.iter().filter(|r| r.succeeded()).map(|r| r.latency_s).collect();
            if successful.is_empty() {
                return Err(Error::Validation(format!(
                    "{}: no successful runs to average",
                    latency_path.display()
                )));
            }
            let mean_latency = successful.iter().sum::<f64>() / successful.len() as f64;

            Ok(SystemInputs {
                system,
                counts: metric_report.corpus.counts,
                fidelity: mean_fidelity,
                latency_s: mean_latency,
            })
        }
    }
}

fn cmd_report(ctx: &Context, args: ReportArgs) -> Result<()> {
    let weights = args.score.weights()?;
    let mode = args.score.mode()?;
    let raw =
        std::fs::read_to_string(&args.systems).map_err(|e| Error::io(&args.systems, e))?;
    let specs: Vec<SystemSpec> = serde_json::from_str(&raw)
        .map_err(|e| Error::Parse(format!("{}: {}", args.systems.display(), e)))?;
    let base = args.systems.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let inputs: Vec<SystemInputs> = specs
        .into_iter()
        .map(|spec| load_system(&base, spec))
        .collect::<Result<_>>()?;
    let report = build_comparison(&inputs, weights, mode, args.score.max_latency)?;
    match ctx.format {
        OutputFormat::Json => ctx.emit_json(&report),
        OutputFormat::Md => ctx.emit(&render_markdown(&report)),
        OutputFormat::Csv => ctx.emit(&render_csv(&report)?),
    }
}
