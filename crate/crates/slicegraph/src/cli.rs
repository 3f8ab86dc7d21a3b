//! Command-line front end. Every parameter is a flag, and `pipeline` echoes
//! all of them into its run log.
//!
//! Exit status: 0 success, 1 usage error, 2 data or IO error, 3 training
//! diverged.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use slicegraph_core::corpus::SplitOptions;
use slicegraph_core::gcn::TrainConfig;
use slicegraph_core::graph::CooccurrenceMode;
use slicegraph_core::synthetic::{generate, noise_embeddings, Signal, SyntheticSpec};
use slicegraph_core::{Kind, Label};

use crate::error::{Error, Result, Stage, StageExt};
use crate::formats::checkpoint::{read_checkpoint, write_checkpoint};
use crate::formats::embeddings::{read_embeddings, write_embeddings};
use crate::formats::gadgets::write_gadgets;
use crate::formats::graph_dump::{read_graph, write_graph};
use crate::formats::sinks::read_sinks;
use crate::formats::tokens::{read_tokens, write_tokens};
use crate::formats::write_text;
use crate::pipeline::{self, CorpusSource, GraphOptions, PipelineOptions};
use crate::report::render_stats;

#[derive(Debug, Parser)]
#[command(name = "slicegraph", version, about = "Vulnerability detection on C/C++ code slices with a word-slice GCN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slice C/C++ sources around sink calls into a gadget corpus.
    Extract(ExtractArgs),
    /// Strip, symbolize and tokenize a gadget corpus.
    Normalize(NormalizeArgs),
    /// Build the word-slice graph and its node features from tokens.
    BuildGraph(BuildGraphArgs),
    /// Split the slices and train the GCN.
    Train(TrainArgs),
    /// Evaluate a checkpoint on its test slices.
    Eval(EvalArgs),
    /// Class probabilities for slices of a graph.
    Predict(PredictArgs),
    /// normalize, build-graph, train and eval in one run.
    Pipeline(PipelineArgs),
    /// Generate a planted-signal corpus.
    GenSynthetic(SyntheticArgs),
}

fn parse_label(s: &str) -> std::result::Result<(String, Label), String> {
    let (file, label) = s.split_once('=').ok_or_else(|| format!("expected FILE=LABEL, got {s:?}"))?;
    let label = label.parse::<u32>().map_err(|e| e.to_string()).and_then(|v| Label::from_u32(v).map_err(|e| e.to_string()))?;
    Ok((file.to_string(), label))
}

fn parse_kind(s: &str) -> std::result::Result<Kind, String> {
    s.parse().map_err(|e: slicegraph_core::corpus::CorpusError| e.to_string())
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Directory of C/C++ sources, visited in lexicographic order.
    #[arg(long)]
    src: PathBuf,
    /// Sink list (`<callee> <forward|backward>` per line); a built-in list
    /// of common unsafe calls otherwise.
    #[arg(long)]
    sinks: Option<PathBuf>,
    /// Label for the gadgets of one file, path relative to --src.
    #[arg(long = "label", value_name = "FILE=0|1", value_parser = parse_label)]
    labels: Vec<(String, Label)>,
    #[arg(long, default_value = "GADGET", value_parser = parse_kind)]
    kind: Kind,
    /// Output corpus; defined function names go to `<out>.funcs`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    /// Gadget corpus, `PATH` or `KIND=PATH`; repeatable.
    #[arg(long = "corpus", required = true)]
    corpora: Vec<CorpusSource>,
    /// Names of user-defined functions (one per line), symbolized as F1, F2, ...
    #[arg(long)]
    user_funcs: Option<PathBuf>,
    /// Keep only the first of slices with identical token sequences.
    #[arg(long)]
    dedup: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Clone)]
struct GraphFlags {
    /// Drop words occurring in fewer slices.
    #[arg(long, default_value_t = 1)]
    min_df: usize,
    /// Count word co-occurrence in sliding windows of this size instead of
    /// whole slices.
    #[arg(long)]
    window: Option<usize>,
    /// Slice embeddings (`dim=<d>` header, `<id>\t<values>` rows).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Use the mean of a slice's word vectors when it has no embedding.
    #[arg(long)]
    fallback_mean_words: bool,
    /// Word feature width (default: the embedding width, or 64).
    #[arg(long)]
    word_dim: Option<usize>,
}

impl GraphFlags {
    fn options(&self, seed: u64) -> GraphOptions {
        GraphOptions {
            min_df: self.min_df,
            mode: self.window.map_or(CooccurrenceMode::Slice, CooccurrenceMode::Window),
            word_dim: self.word_dim,
            seed,
            fallback_mean_words: self.fallback_mean_words,
        }
    }

    fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("min_df".into(), self.min_df.to_string()),
            ("window".into(), opt(&self.window)),
            ("embeddings".into(), opt_path(&self.embeddings)),
            ("fallback_mean_words".into(), self.fallback_mean_words.to_string()),
            ("word_dim".into(), opt(&self.word_dim)),
        ]
    }
}

#[derive(Debug, Args)]
struct BuildGraphArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[command(flatten)]
    graph: GraphFlags,
    /// Seed of the word feature vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Clone)]
struct TrainFlags {
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    /// Rate of each of the two dropout layers.
    #[arg(long, default_value_t = TrainConfig::default().dropout_p)]
    dropout: f64,
    /// Use one dropout layer instead of two.
    #[arg(long)]
    single_dropout: bool,
    /// Start the output bias at 0 instead of the training label log-odds.
    #[arg(long)]
    no_prior_bias: bool,
    #[arg(long, default_value_t = TrainConfig::default().hidden)]
    hidden: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Split each label class separately.
    #[arg(long)]
    stratify: bool,
    /// Seed of the split, initialization and dropout.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainFlags {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            dropout_p: self.dropout,
            single_dropout: self.single_dropout,
            prior_bias: !self.no_prior_bias,
            hidden: self.hidden,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    fn split(&self) -> SplitOptions {
        SplitOptions { train_fraction: self.train_fraction, seed: self.seed, stratify: self.stratify }
    }

    fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("learning_rate".into(), format!("{:?}", self.learning_rate)),
            ("epochs".into(), self.epochs.to_string()),
            ("dropout".into(), format!("{:?}", self.dropout)),
            ("single_dropout".into(), self.single_dropout.to_string()),
            ("no_prior_bias".into(), self.no_prior_bias.to_string()),
            ("hidden".into(), self.hidden.to_string()),
            ("train_fraction".into(), format!("{:?}", self.train_fraction)),
            ("stratify".into(), self.stratify.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Tokenized slices, for the labels.
    #[arg(long)]
    tokens: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus files (`PATH` or `KIND=PATH`) for a per-kind breakdown.
    #[arg(long = "corpus")]
    corpora: Vec<CorpusSource>,
    /// Also train and report the linear baseline on slice features alone.
    #[arg(long)]
    baseline: bool,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Slice ids to predict (default: every slice in the graph).
    #[arg(long, value_delimiter = ',')]
    ids: Option<Vec<u64>>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Gadget corpus, `PATH` or `KIND=PATH`; repeatable.
    #[arg(long = "corpus", required = true)]
    corpora: Vec<CorpusSource>,
    #[arg(long)]
    user_funcs: Option<PathBuf>,
    #[arg(long)]
    dedup: bool,
    #[command(flatten)]
    graph: GraphFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Also train and report the linear baseline.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    vuln_fraction: f64,
    /// `token` (label = a planted call occurs) or `cooccur` (label = two
    /// planted calls occur together).
    #[arg(long, default_value = "token")]
    signal: Signal,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write label-independent random slice embeddings here.
    #[arg(long)]
    noise_embeddings: Option<PathBuf>,
    /// Width of the noise embeddings.
    #[arg(long, default_value_t = crate::pipeline::DEFAULT_WORD_DIM)]
    embed_dim: usize,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), T::to_string)
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Extract(a) => extract(a).stage(Stage::Extract),
        Command::Normalize(a) => normalize(a).stage(Stage::Normalize),
        Command::BuildGraph(a) => build_graph(a),
        Command::Train(a) => train(a).stage(Stage::Train),
        Command::Eval(a) => eval(a).stage(Stage::Eval),
        Command::Predict(a) => predict(a).stage(Stage::Predict),
        Command::Pipeline(a) => run_pipeline(a),
        Command::GenSynthetic(a) => gen_synthetic(a).stage(Stage::Synthetic),
    }
}

fn extract(a: ExtractArgs) -> Result<()> {
    let sinks = match &a.sinks {
        Some(p) => read_sinks(p)?,
        None => Default::default(),
    };
    let mut labels = BTreeMap::new();
    for (file, label) in a.labels {
        if labels.insert(file.clone(), label).is_some() {
            return Err(Error::Usage(format!("--label {file} given twice")));
        }
    }
    let ex = pipeline::extract(&a.src, &sinks, &labels, a.kind)?;
    let funcs = pipeline::write_extraction(&ex, &a.out)?;
    println!("{} gadgets from {} files -> {} ({})", ex.records.len(), ex.files, a.out.display(), funcs.display());
    if !ex.records.is_empty() {
        print!("{}", render_stats(&pipeline::stats(&ex.records)?));
    }
    Ok(())
}

fn normalize(a: NormalizeArgs) -> Result<()> {
    let records = pipeline::load_corpora(&a.corpora)?;
    let user_functions = match &a.user_funcs {
        Some(p) => pipeline::read_user_functions(p)?,
        None => Default::default(),
    };
    let (tokens, dedup) = pipeline::normalize(&records, &user_functions, a.dedup)?;
    write_text(&a.out, &write_tokens(&tokens)?)?;
    println!("{} slices -> {}", tokens.len(), a.out.display());
    if let Some(d) = dedup {
        println!("dedup removed {} slices ({} with a conflicting label)", d.removed, d.label_conflicts);
    }
    Ok(())
}

fn build_graph(a: BuildGraphArgs) -> Result<()> {
    let tokens = read_tokens(&a.tokens).stage(Stage::Graph)?;
    let embeddings = match &a.graph.embeddings {
        Some(p) => Some(read_embeddings(p).stage(Stage::Embed)?),
        None => None,
    };
    let g = pipeline::build_graph_with_features(&tokens, &a.graph.options(a.seed), embeddings.as_ref())?;
    write_text(&a.out, &write_graph(&g)).stage(Stage::Graph)?;
    println!(
        "{} nodes ({} words, {} slices), {} nonzero entries, feature dim {} -> {}",
        g.n_nodes(),
        g.n_words(),
        g.n_slices(),
        g.adjacency().nnz(),
        g.feature_dim(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let labels = pipeline::label_map(&read_tokens(&a.tokens)?);
    let (ckpt, warnings) = pipeline::train(&g, &labels, a.train.split(), &a.train.config())?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    write_text(&a.out, &write_checkpoint(&ckpt))?;
    let last = ckpt.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "{} epochs on {} slices ({} held out), final loss {last:.6} -> {}",
        ckpt.config.epochs,
        ckpt.train_ids.len(),
        ckpt.test_ids.len(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let labels = pipeline::label_map(&read_tokens(&a.tokens)?);
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let kinds = if a.corpora.is_empty() {
        None
    } else {
        Some(pipeline::load_corpora(&a.corpora)?.into_iter().map(|r| (r.id, r.kind)).collect())
    };
    let eval = pipeline::eval_report(&g, &labels, &ckpt, kinds.as_ref(), a.baseline)?;
    if let Some(p) = &a.report {
        write_text(p, &eval.text)?;
    }
    print!("{}", eval.text);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let text = pipeline::predict(&g, &ckpt, a.ids.as_deref())?;
    match &a.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_pipeline(a: PipelineArgs) -> Result<()> {
    let mut echo: Vec<(String, String)> =
        a.corpora.iter().map(|c| ("corpus".to_string(), c.to_string())).collect();
    echo.push(("user_funcs".into(), opt_path(&a.user_funcs)));
    echo.push(("dedup".into(), a.dedup.to_string()));
    echo.extend(a.graph.echo());
    echo.extend(a.train.echo());
    echo.push(("baseline".into(), a.baseline.to_string()));
    echo.push(("out_dir".into(), a.out_dir.display().to_string()));

    let opts = PipelineOptions {
        corpora: a.corpora,
        user_functions: a.user_funcs,
        dedup: a.dedup,
        embeddings: a.graph.embeddings.clone(),
        graph: a.graph.options(a.train.seed),
        split: a.train.split(),
        train: a.train.config(),
        baseline: a.baseline,
    };
    let run = pipeline::run_pipeline(&opts, &a.out_dir, &echo)?;
    print!("{}\n{}", render_stats(&run.stats), run.eval.text);
    println!("\noutputs in {}", a.out_dir.display());
    Ok(())
}

fn gen_synthetic(a: SyntheticArgs) -> Result<()> {
    let spec = SyntheticSpec { n: a.n, vuln_fraction: a.vuln_fraction, signal: a.signal, seed: a.seed };
    let records = generate(&spec).map_err(|e| Error::Usage(e.to_string()))?;
    write_text(&a.out, &write_gadgets(&records)?)?;
    let positives = records.iter().filter(|r| r.label == Label::Vulnerable).count();
    println!("{} slices ({positives} vulnerable, signal {}) -> {}", records.len(), a.signal, a.out.display());
    if let Some(p) = &a.noise_embeddings {
        let table = noise_embeddings(records.iter().map(|r| r.id), a.embed_dim, a.seed).map_err(Error::data)?;
        write_text(p, &write_embeddings(&table)?)?;
        println!("{}-dimensional noise embeddings -> {}", a.embed_dim, p.display());
    }
    Ok(())
}
