use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dwe_core::corpus::Corpus;
use dwe_core::eval::{
    analogy_solvers, eval_analogy, eval_similarity, nearest_neighbors, AnalogyDataset, Embeddings, FrozenModel,
    SimilarityDataset, TextVectors, VectorKind,
};
use dwe_core::model::{ChannelMode, NegativeScaling};
use dwe_core::morphology::{build_ngram_dict, load_glyph_pack, load_stroke_table};
use dwe_core::trainer::{self, *};
use dwe_core::DweError;

#[derive(Debug, Parser)]
#[command(
    name = "dwe",
    version,
    about = "Dual-channel Chinese word embeddings: train, evaluate, query, export"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Spearman's rho on a word-similarity dataset.
    EvalSim(EvalSimArgs),
    /// Accuracy on a word-analogy dataset.
    EvalAnalogy(EvalAnalogyArgs),
    /// Nearest neighbours of a word.
    Nn(NnArgs),
    /// Write vectors in the word2vec text format.
    Export(ExportArgs),
    /// Show a character's strokes, stroke n-grams and glyph.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Segmented corpus, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Stroke table (CHAR<TAB>codes). Not needed with --resume.
    #[arg(long, required_unless_present = "resume")]
    strokes: Option<PathBuf>,
    /// Glyph pack. Not needed with --resume.
    #[arg(long, required_unless_present = "resume")]
    glyphs: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Continue training from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    lr: f64,
    /// Pairs per gradient step.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch: usize,
    #[arg(long, default_value_t = DEFAULT_N_MIN)]
    n_min: usize,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    n_max: usize,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Negative samples per pair.
    #[arg(long, default_value_t = DEFAULT_NEGATIVES)]
    negatives: usize,
    /// Exponent of the unigram noise distribution.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    min_count: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Adagrad epsilon.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    /// dual, stroke, glyph or word.
    #[arg(long, default_value_t = ChannelMode::Dual)]
    channels: ChannelMode,
    /// Subsampling threshold for frequent words; off by default.
    #[arg(long)]
    subsample: Option<f64>,
    /// How negative terms are combined: sum or mean.
    #[arg(long, default_value_t = NegativeScaling::Sum)]
    neg_scaling: NegativeScaling,
    /// Compute gradients on N worker threads.
    #[arg(long, conflicts_with = "deterministic")]
    threads: Option<usize>,
    /// Single worker, bit-reproducible for a fixed seed (the default).
    #[arg(long)]
    deterministic: bool,
    /// Print per-epoch statistics as JSON on standard output.
    #[arg(long)]
    json: bool,
}

impl TrainArgs {
    fn config(&self) -> TrainingConfig {
        TrainingConfig {
            dim: self.dim,
            lr: self.lr,
            batch_size: self.batch,
            n_min: self.n_min,
            n_max: self.n_max,
            window: self.window,
            negatives: self.negatives,
            alpha: self.alpha,
            epochs: self.epochs,
            min_count: self.min_count,
            seed: self.seed,
            mode: match self.threads {
                Some(threads) if !self.deterministic => ExecMode::Hogwild { threads },
                _ => ExecMode::Deterministic,
            },
            eps: self.eps,
            channels: self.channels,
            subsample: self.subsample,
            negative_scaling: self.neg_scaling,
        }
    }
}

/// Where vectors come from: a checkpoint or a word2vec text file.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Vectors in the word2vec text format.
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalSimArgs {
    #[command(flatten)]
    source: Source,
    /// word_a<TAB>word_b<TAB>score lines.
    #[arg(long)]
    data: PathBuf,
    /// Vectors taken from a checkpoint: composed or word_id.
    #[arg(long, default_value_t = VectorKind::Composed)]
    which: VectorKind,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalAnalogyArgs {
    #[command(flatten)]
    source: Source,
    /// `: group` headers followed by `a b h t` lines.
    #[arg(long)]
    data: PathBuf,
    /// 3cosadd, 3cosmul or all.
    #[arg(long, default_value = "all")]
    method: String,
    #[arg(long, default_value_t = VectorKind::Composed)]
    which: VectorKind,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct NnArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    word: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = VectorKind::Composed)]
    which: VectorKind,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = VectorKind::Composed)]
    which: VectorKind,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long = "char")]
    character: char,
    #[arg(long, required_unless_present = "glyphs")]
    strokes: Option<PathBuf>,
    #[arg(long)]
    glyphs: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_N_MIN)]
    n_min: usize,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    n_max: usize,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<DweError> for Failure {
    fn from(e: DweError) -> Self {
        match e {
            DweError::Config(_) | DweError::UnknownName { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::EvalSim(a) => eval_sim(a),
        Command::EvalAnalogy(a) => eval_analogy_cmd(a),
        Command::Nn(a) => nn(a),
        Command::Export(a) => export(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn train(a: TrainArgs) -> CliResult {
    let config = a.config();
    config.validate()?;
    let progress = |s: &EpochStats| eprintln!("{}", s.status_line());
    let (ckpt, stats) = match &a.resume {
        Some(path) => {
            let mut ckpt = load_checkpoint(path)?;
            config.check_resumable(&ckpt.config)?;
            ckpt.config = config.clone();
            let corpus = Corpus::load(&a.corpus)?;
            let stats = run_epochs(&mut ckpt, &corpus, config.epochs, progress)?;
            (ckpt, stats)
        }
        None => {
            let (strokes, glyphs) = (a.strokes.as_ref().unwrap(), a.glyphs.as_ref().unwrap());
            let trained = trainer::train(&a.corpus, strokes, glyphs, &config, progress)?;
            for c in trained.0.lexicon.missing_strokes() {
                eprintln!("warning: no stroke data for {c}");
            }
            trained
        }
    };
    save_checkpoint(&ckpt, &a.out)?;
    eprintln!(
        "wrote {} (vocab {}, n-grams {}, epoch {})",
        a.out.display(),
        ckpt.vocab.len(),
        ckpt.lexicon.dict().len(),
        ckpt.epoch
    );
    if a.json {
        let rows: Vec<_> = stats
            .iter()
            .map(|s| json!({"epoch": s.epoch, "loss": s.mean_loss, "pairs": s.pairs, "batches": s.batches}))
            .collect();
        println!("{}", serde_json::Value::Array(rows));
    }
    Ok(())
}

/// Runs `f` against the vectors named by `source`.
fn with_embeddings<T>(
    source: &Source,
    which: VectorKind,
    f: impl FnOnce(&dyn Embeddings) -> Result<T, Failure>,
) -> Result<T, Failure> {
    match (&source.model, &source.vectors) {
        (Some(path), _) => {
            let ckpt = load_checkpoint(path)?;
            f(&FrozenModel::new(&ckpt, which))
        }
        (None, Some(path)) => f(&TextVectors::load(path)?),
        (None, None) => Err(Failure::Usage("one of --model or --vectors is required".into())),
    }
}

fn eval_sim(a: EvalSimArgs) -> CliResult {
    let data = SimilarityDataset::load(&a.data)?;
    let report = with_embeddings(&a.source, a.which, |emb| Ok(eval_similarity(&data, emb)?))?;
    if a.json {
        println!("{}", json!(report));
    } else {
        println!("metric\tgroup\tvalue\tcoverage");
        println!("spearman\tall\t{:.4}\t{:.4}", report.rho, report.coverage);
    }
    eprintln!("scored {} of {} pairs", report.scored, report.total);
    Ok(())
}

fn eval_analogy_cmd(a: EvalAnalogyArgs) -> CliResult {
    let data = AnalogyDataset::load(&a.data)?;
    let solvers = analogy_solvers();
    let names: Vec<&str> = if a.method == "all" {
        solvers.names()
    } else {
        solvers.get(&a.method)?;
        vec![a.method.as_str()]
    };
    let reports = with_embeddings(&a.source, a.which, |emb| {
        names
            .iter()
            .map(|n| Ok(eval_analogy(&data, emb, solvers.get(n)?)?))
            .collect::<Result<Vec<_>, Failure>>()
    })?;
    if a.json {
        println!("{}", json!(reports));
        return Ok(());
    }
    println!("metric\tgroup\tvalue\tcoverage");
    for r in &reports {
        for g in r.groups.iter().chain(std::iter::once(&r.total)) {
            let coverage = if g.total == 0 {
                0.0
            } else {
                g.answered as f64 / g.total as f64
            };
            println!("{}\t{}\t{:.4}\t{:.4}", r.method, g.group, g.accuracy, coverage);
        }
    }
    Ok(())
}

fn nn(a: NnArgs) -> CliResult {
    let neighbors = with_embeddings(&a.source, a.which, |emb| Ok(nearest_neighbors(&a.word, emb, a.k)?))?;
    if a.json {
        let rows: Vec<_> = neighbors.iter().map(|(w, c)| json!({"word": w, "cosine": c})).collect();
        println!("{}", serde_json::Value::Array(rows));
    } else {
        for (w, c) in neighbors {
            println!("{w}\t{c:.6}");
        }
    }
    Ok(())
}

fn export(a: ExportArgs) -> CliResult {
    let ckpt = load_checkpoint(&a.model)?;
    export_vectors(&ckpt, &a.out, a.which)?;
    eprintln!("wrote {} {} vectors to {}", ckpt.vocab.len(), a.which, a.out.display());
    Ok(())
}

fn inspect(a: InspectArgs) -> CliResult {
    if a.n_min == 0 || a.n_min > a.n_max {
        return Err(Failure::Usage(format!(
            "invalid n-gram range {}..={}",
            a.n_min, a.n_max
        )));
    }
    let c = a.character;
    let mut out = String::new();
    writeln!(out, "char\t{c}\tU+{:04X}", c as u32).unwrap();
    if let Some(path) = &a.strokes {
        let table = load_stroke_table(path)?;
        match table.get(&c) {
            Some(seq) => {
                let codes: Vec<String> = seq.codes().iter().map(u8::to_string).collect();
                writeln!(out, "strokes\t{}", codes.join(",")).unwrap();
                let dict = build_ngram_dict(&table, &[c].into(), a.n_min, a.n_max);
                let ids = dict.char_ngrams(c).unwrap_or(&[]);
                writeln!(out, "ngrams\t{}", ids.len()).unwrap();
                for &id in ids {
                    writeln!(out, "  {}", dict.ngram(id)).unwrap();
                }
            }
            None => writeln!(out, "strokes\t(none)").unwrap(),
        }
    }
    if let Some(path) = &a.glyphs {
        let glyphs = load_glyph_pack(path)?;
        match glyphs.get(&c) {
            Some(g) => {
                writeln!(out, "glyph\t{} ink pixels", g.ink_count()).unwrap();
                out.push_str(&g.to_ascii());
            }
            None => writeln!(out, "glyph\t(none)").unwrap(),
        }
    }
    std::io::stdout().write_all(out.as_bytes())?;
    Ok(())
}
