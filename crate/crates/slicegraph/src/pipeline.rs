//! Stage functions shared by the individual subcommands and by `pipeline`,
//! which chains them and writes every intermediate artifact.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use slicegraph_core::baseline::baseline_linear;
use slicegraph_core::corpus::{corpus_stats, split_ids, CorpusStats, SplitOptions, SplitWarning};
use slicegraph_core::embed::{assemble_feature_matrix, word_node_features, EmbeddingTable, SliceFeatures};
use slicegraph_core::eval::{confusion_by_kind, evaluate, EvalReport};
use slicegraph_core::gcn::{self, GcnInput, TrainConfig, PROPAGATION_RULE};
use slicegraph_core::graph::{build_graph, CooccurrenceMode};
use slicegraph_core::linalg::Matrix;
use slicegraph_core::normalize::{dedup_tokenized, normalize_record, strip_comments_nonascii, DedupSummary, SymbolizeOptions};
use slicegraph_core::slicer::{extract_gadgets, SinkConfig};
use slicegraph_core::{Corpus, Kind, Label, SliceRecord, TextGraph, TokenizedSlice};

use crate::error::{Error, Result, Stage, StageExt};
use crate::formats::checkpoint::{config_lines, write_checkpoint, Checkpoint};
use crate::formats::embeddings::read_embeddings;
use crate::formats::gadgets::{read_gadget_file, write_gadgets};
use crate::formats::graph_dump::write_graph;
use crate::formats::tokens::write_tokens;
use crate::formats::{read_text, write_text};
use crate::report::render_report;

/// Word-node feature width when no slice embeddings fix it.
pub const DEFAULT_WORD_DIM: usize = 64;

const SOURCE_EXTENSIONS: [&str; 6] = ["c", "h", "cc", "cpp", "cxx", "hpp"];

/// Gadgets of a source tree plus the names of the functions it defines.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub records: Vec<SliceRecord>,
    pub user_functions: BTreeSet<String>,
    pub files: usize,
}

/// Slices every C/C++ file under `src_dir`, visiting files in lexicographic
/// path order. Records get ids from 0 in visit order and origin
/// `<relative path> <function> <sink line>`; `labels` maps relative paths to
/// labels (default 0).
pub fn extract(src_dir: &Path, sinks: &SinkConfig, labels: &BTreeMap<String, Label>, kind: Kind) -> Result<Extraction> {
    if !src_dir.is_dir() {
        return Err(Error::data(format!("{}: not a directory", src_dir.display())));
    }
    let mut out = Extraction { records: Vec::new(), user_functions: BTreeSet::new(), files: 0 };
    let mut seen_labels = BTreeSet::new();
    for entry in walkdir::WalkDir::new(src_dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::data(e.to_string()))?;
        let path = entry.path();
        let is_source = path.extension().and_then(|e| e.to_str()).is_some_and(|e| SOURCE_EXTENSIONS.contains(&e));
        if !entry.file_type().is_file() || !is_source {
            continue;
        }
        let rel = relative_name(src_dir, path);
        let text = read_text(path)?;
        let clean = strip_comments_nonascii(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let unit = extract_gadgets(&clean, sinks).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let label = labels.get(&rel).copied().unwrap_or(Label::Safe);
        seen_labels.insert(rel.clone());
        for g in &unit.gadgets {
            let id = out.records.len() as u64;
            let origin = format!("{rel} {} {}", g.function, g.sink.line);
            out.records.push(SliceRecord::new(id, origin, g.code_lines(), label, kind).map_err(Error::data)?);
        }
        out.user_functions.extend(unit.user_functions);
        out.files += 1;
    }
    if out.files == 0 {
        return Err(Error::data(format!("{}: no C/C++ source files", src_dir.display())));
    }
    if let Some(unknown) = labels.keys().find(|k| !seen_labels.contains(*k)) {
        return Err(Error::Usage(format!("--label {unknown}: no such source file under {}", src_dir.display())));
    }
    Ok(out)
}

fn relative_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// A corpus file and the kind its records get.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSource {
    pub kind: Kind,
    pub path: PathBuf,
}

impl FromStr for CorpusSource {
    type Err = String;

    /// `PATH` (kind GADGET) or `KIND=PATH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((kind, path)) = s.split_once('=') {
            if let Ok(kind) = kind.parse::<Kind>() {
                return Ok(Self { kind, path: path.into() });
            }
        }
        if s.is_empty() {
            return Err("empty corpus path".into());
        }
        Ok(Self { kind: Kind::Gadget, path: s.into() })
    }
}

impl std::fmt::Display for CorpusSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}", self.kind, self.path.display())
    }
}

/// Reads and concatenates corpus files; ids must stay unique across files.
pub fn load_corpora(sources: &[CorpusSource]) -> Result<Vec<SliceRecord>> {
    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    for src in sources {
        let corpus = read_gadget_file(&src.path, src.kind)?;
        for r in corpus.into_records() {
            if !ids.insert(r.id) {
                return Err(Error::data(format!("{}: slice id {} already used by an earlier corpus", src.path.display(), r.id)));
            }
            records.push(r);
        }
    }
    Ok(records)
}

pub fn stats(records: &[SliceRecord]) -> Result<CorpusStats> {
    let corpus = Corpus::new(records.to_vec()).map_err(Error::data)?;
    Ok(corpus_stats(&corpus))
}

/// One name per line.
pub fn read_user_functions(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read_text(path)?.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

pub fn write_user_functions(names: &BTreeSet<String>) -> String {
    names.iter().map(|n| format!("{n}\n")).collect()
}

/// Strips, symbolizes and tokenizes every record; with `dedup`, repeated
/// token sequences keep only their first slice.
pub fn normalize(
    records: &[SliceRecord],
    user_functions: &BTreeSet<String>,
    dedup: bool,
) -> Result<(Vec<TokenizedSlice>, Option<DedupSummary>)> {
    let opts = SymbolizeOptions::default();
    let tokens = records
        .iter()
        .map(|r| normalize_record(r, user_functions, &opts).map_err(Error::data))
        .collect::<Result<Vec<_>>>()?;
    if dedup {
        let (kept, summary) = dedup_tokenized(tokens);
        Ok((kept, Some(summary)))
    } else {
        Ok((tokens, None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphOptions {
    pub min_df: usize,
    pub mode: CooccurrenceMode,
    /// Word feature width; defaults to the embedding width, or
    /// [`DEFAULT_WORD_DIM`] without embeddings.
    pub word_dim: Option<usize>,
    pub seed: u64,
    /// Slices missing from the embedding table (or all slices, without a
    /// table) get the mean of their word vectors.
    pub fallback_mean_words: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self { min_df: 1, mode: CooccurrenceMode::Slice, word_dim: None, seed: 0, fallback_mean_words: false }
    }
}

/// Builds the word–slice graph and its node features. Graph errors are
/// tagged `build-graph`, feature errors `embed`.
pub fn build_graph_with_features(
    tokens: &[TokenizedSlice],
    opts: &GraphOptions,
    embeddings: Option<&EmbeddingTable>,
) -> Result<TextGraph> {
    let (_, graph) = build_graph(tokens, opts.min_df, opts.mode).map_err(Error::data).stage(Stage::Graph)?;
    let dim = match (embeddings, opts.word_dim) {
        (Some(t), Some(d)) if d != t.dim() => {
            return Err(Error::data(format!("--word-dim {d} differs from the {}-dimensional slice embeddings", t.dim()))
                .at(Stage::Embed))
        }
        (Some(t), _) => t.dim(),
        (None, d) => d.unwrap_or(DEFAULT_WORD_DIM),
    };
    let words = word_node_features(graph.words(), dim, opts.seed).map_err(Error::data).stage(Stage::Embed)?;
    let slices = match (embeddings, opts.fallback_mean_words) {
        (Some(t), false) => SliceFeatures::Table(t),
        (Some(t), true) => SliceFeatures::TableOrMeanOfWords(t, tokens),
        (None, true) => SliceFeatures::MeanOfWords(tokens),
        (None, false) => {
            return Err(
                Error::data("no slice embeddings: pass --embeddings FILE or --fallback-mean-words").at(Stage::Embed)
            )
        }
    };
    assemble_feature_matrix(graph, &words, slices).map_err(Error::data).stage(Stage::Embed)
}

/// Slice id → label, from tokenized slices.
pub fn label_map(tokens: &[TokenizedSlice]) -> BTreeMap<u64, Label> {
    tokens.iter().map(|t| (t.slice_id, t.label)).collect()
}

fn graph_labels(g: &TextGraph, labels: &BTreeMap<u64, Label>) -> Result<Vec<Label>> {
    g.slice_ids()
        .iter()
        .map(|id| labels.get(id).copied().ok_or_else(|| Error::data(format!("no label for graph slice {id}"))))
        .collect()
}

fn slice_index(g: &TextGraph) -> BTreeMap<u64, usize> {
    g.slice_ids().iter().enumerate().map(|(k, &id)| (id, k)).collect()
}

fn indices_of(g: &TextGraph, ids: &[u64]) -> Result<Vec<usize>> {
    let index = slice_index(g);
    ids.iter().map(|id| index.get(id).copied().ok_or_else(|| Error::data(format!("slice {id} is not in the graph")))).collect()
}

/// Splits the graph's slices, trains on the training part and packages the
/// result as a checkpoint.
pub fn train(
    g: &TextGraph,
    labels: &BTreeMap<u64, Label>,
    split: SplitOptions,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, Vec<SplitWarning>)> {
    let slice_labels = graph_labels(g, labels)?;
    let entries: Vec<(u64, Label)> = g.slice_ids().iter().copied().zip(slice_labels.iter().copied()).collect();
    let split = split_ids(&entries, split).map_err(Error::data)?;
    if split.train.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    let train_ids: Vec<u64> = split.train.iter().copied().collect();
    let targets: Vec<(usize, Label)> =
        indices_of(g, &train_ids)?.into_iter().map(|k| (g.slice_node(k), slice_labels[k])).collect();
    let input = GcnInput::from_graph(g)?;
    let outcome = gcn::train(&input, cfg, &targets)?;
    let checkpoint = Checkpoint {
        config: *cfg,
        params: outcome.params,
        train_ids,
        test_ids: split.test.iter().copied().collect(),
        loss_history: outcome.loss_history,
        objective_history: outcome.objective_history,
    };
    Ok((checkpoint, split.warnings))
}

/// Metrics of a checkpoint on its test slices. With `kinds`, the report
/// also carries per-kind confusion counts.
pub fn evaluate_checkpoint(
    g: &TextGraph,
    labels: &BTreeMap<u64, Label>,
    ckpt: &Checkpoint,
    kinds: Option<&BTreeMap<u64, Kind>>,
) -> Result<EvalReport> {
    if ckpt.test_ids.is_empty() {
        return Err(Error::data("checkpoint has an empty test set"));
    }
    let slice_labels = graph_labels(g, labels)?;
    let rows = indices_of(g, &ckpt.test_ids)?;
    let nodes: Vec<usize> = rows.iter().map(|&k| g.slice_node(k)).collect();
    let input = GcnInput::from_graph(g)?;
    let preds = gcn::predict(&input, &ckpt.params, &nodes)?;
    let truth: Vec<Label> = rows.iter().map(|&k| slice_labels[k]).collect();
    let mut report = evaluate(&preds.labels, &truth).map_err(Error::data)?;
    if let Some(kinds) = kinds {
        let test_kinds = ckpt
            .test_ids
            .iter()
            .map(|id| kinds.get(id).copied().ok_or_else(|| Error::data(format!("no corpus record for slice {id}"))))
            .collect::<Result<Vec<_>>>()?;
        report.per_kind = confusion_by_kind(&test_kinds, &preds.labels, &truth).map_err(Error::data)?;
    }
    Ok(report)
}

/// The linear baseline on the slice rows of the node features, trained on
/// the checkpoint's training slices with its configuration.
pub fn evaluate_baseline(g: &TextGraph, labels: &BTreeMap<u64, Label>, ckpt: &Checkpoint) -> Result<EvalReport> {
    let x = g.features().ok_or_else(|| Error::data("graph has no node features"))?;
    let slice_labels = graph_labels(g, labels)?;
    let rows = Matrix::from_fn(g.n_slices(), x.cols(), |k, c| x[(g.slice_node(k), c)]);
    let train = indices_of(g, &ckpt.train_ids)?;
    let test = indices_of(g, &ckpt.test_ids)?;
    let outcome = baseline_linear(&rows, &slice_labels, &train, &test, &ckpt.config).map_err(|e| match e {
        slicegraph_core::baseline::BaselineError::Train(e) => Error::from(e),
        other => Error::data(other),
    })?;
    Ok(outcome.report)
}

/// What the report echoes: the model's configuration and the graph it was
/// evaluated on. Derived from the checkpoint and graph only, so a report
/// does not depend on which command produced it.
pub fn report_echo(g: &TextGraph, ckpt: &Checkpoint) -> Vec<(String, String)> {
    let mut echo = vec![
        ("rule".to_string(), PROPAGATION_RULE.to_string()),
        ("nodes".into(), g.n_nodes().to_string()),
        ("words".into(), g.n_words().to_string()),
        ("slices".into(), g.n_slices().to_string()),
        ("edges".into(), g.adjacency().nnz().to_string()),
        ("feature_dim".into(), g.feature_dim().to_string()),
        ("train_slices".into(), ckpt.train_ids.len().to_string()),
        ("test_slices".into(), ckpt.test_ids.len().to_string()),
    ];
    echo.extend(config_lines(&ckpt.config).into_iter().map(|(k, v)| (k.to_string(), v)));
    if let Some(last) = ckpt.loss_history.last() {
        echo.push(("final_loss".into(), format!("{last:?}")));
    }
    echo
}

/// Rendered report text with the model's metrics and, when requested, the
/// baseline's.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub text: String,
    pub report: EvalReport,
    pub baseline: Option<EvalReport>,
}

/// Evaluates a checkpoint (and optionally the baseline) and renders the
/// report text.
pub fn eval_report(
    g: &TextGraph,
    labels: &BTreeMap<u64, Label>,
    ckpt: &Checkpoint,
    kinds: Option<&BTreeMap<u64, Kind>>,
    baseline: bool,
) -> Result<EvalOutcome> {
    let report = evaluate_checkpoint(g, labels, ckpt, kinds)?;
    let base = if baseline { Some(evaluate_baseline(g, labels, ckpt)?) } else { None };
    let mut models = vec![("gcn", &report)];
    if let Some(b) = &base {
        models.push(("linear", b));
    }
    let text = render_report(&report_echo(g, ckpt), &models);
    Ok(EvalOutcome { text, report, baseline: base })
}

/// `slice_id label p_vulnerable` rows for the requested slices (all slices
/// when `ids` is `None`).
pub fn predict(g: &TextGraph, ckpt: &Checkpoint, ids: Option<&[u64]>) -> Result<String> {
    let ids: Vec<u64> = ids.map_or_else(|| g.slice_ids().to_vec(), <[u64]>::to_vec);
    let rows = indices_of(g, &ids)?;
    let nodes: Vec<usize> = rows.iter().map(|&k| g.slice_node(k)).collect();
    let input = GcnInput::from_graph(g)?;
    let preds = gcn::predict(&input, &ckpt.params, &nodes)?;
    let mut out = String::from("# slice_id label p_vulnerable\n");
    for ((id, label), p) in ids.iter().zip(&preds.labels).zip(&preds.probs) {
        out.push_str(&format!("{id} {label} {:.6}\n", p[1]));
    }
    Ok(out)
}

/// Everything `pipeline` needs besides the output directory.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub corpora: Vec<CorpusSource>,
    pub user_functions: Option<PathBuf>,
    pub dedup: bool,
    pub embeddings: Option<PathBuf>,
    pub graph: GraphOptions,
    pub split: SplitOptions,
    pub train: TrainConfig,
    pub baseline: bool,
}

/// Files written by one pipeline run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelinePaths {
    pub tokens: PathBuf,
    pub graph: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
    pub run: PathBuf,
}

impl PipelinePaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            tokens: dir.join("tokens.txt"),
            graph: dir.join("graph.txt"),
            checkpoint: dir.join("checkpoint.txt"),
            report: dir.join("report.txt"),
            run: dir.join("run.txt"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub paths: PipelinePaths,
    pub stats: CorpusStats,
    pub eval: EvalOutcome,
    pub checkpoint: Checkpoint,
    pub timings: Vec<(Stage, Duration)>,
}

fn timed<T>(timings: &mut Vec<(Stage, Duration)>, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().stage(stage)?;
    timings.push((stage, start.elapsed()));
    Ok(out)
}

/// normalize → build-graph → embed → train → eval, writing tokens, graph,
/// checkpoint, report and a run log (flag echo, paths, timings) into
/// `out_dir`. `echo` is the caller's flag echo for the run log.
pub fn run_pipeline(opts: &PipelineOptions, out_dir: &Path, echo: &[(String, String)]) -> Result<PipelineRun> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths = PipelinePaths::in_dir(out_dir);
    let mut timings = Vec::new();

    let (records, tokens) = timed(&mut timings, Stage::Normalize, || {
        let records = load_corpora(&opts.corpora)?;
        let user_functions = match &opts.user_functions {
            Some(p) => read_user_functions(p)?,
            None => BTreeSet::new(),
        };
        let (tokens, _) = normalize(&records, &user_functions, opts.dedup)?;
        write_text(&paths.tokens, &write_tokens(&tokens)?)?;
        Ok((records, tokens))
    })?;
    let stats = stats(&records).stage(Stage::Normalize)?;

    let embeddings = match &opts.embeddings {
        Some(p) => Some(read_embeddings(p).stage(Stage::Embed)?),
        None => None,
    };
    let graph = timed(&mut timings, Stage::Graph, || {
        let g = build_graph_with_features(&tokens, &opts.graph, embeddings.as_ref())?;
        write_text(&paths.graph, &write_graph(&g))?;
        Ok(g)
    })?;

    let labels = label_map(&tokens);
    let checkpoint = timed(&mut timings, Stage::Train, || {
        let (ckpt, _) = train(&graph, &labels, opts.split, &opts.train)?;
        write_text(&paths.checkpoint, &write_checkpoint(&ckpt))?;
        Ok(ckpt)
    })?;

    let kinds: BTreeMap<u64, Kind> = records.iter().map(|r| (r.id, r.kind)).collect();
    let eval = timed(&mut timings, Stage::Eval, || {
        let eval = eval_report(&graph, &labels, &checkpoint, Some(&kinds), opts.baseline)?;
        write_text(&paths.report, &eval.text)?;
        Ok(eval)
    })?;

    write_text(&paths.run, &render_run_log(echo, &paths, &timings))?;
    Ok(PipelineRun { paths, stats, eval, checkpoint, timings })
}

fn render_run_log(echo: &[(String, String)], paths: &PipelinePaths, timings: &[(Stage, Duration)]) -> String {
    let mut out = String::from("# slicegraph pipeline run\n\n[flags]\n");
    for (k, v) in echo {
        out.push_str(&format!("{k}={v}\n"));
    }
    out.push_str("\n[outputs]\n");
    for (k, p) in [
        ("tokens", &paths.tokens),
        ("graph", &paths.graph),
        ("checkpoint", &paths.checkpoint),
        ("report", &paths.report),
    ] {
        out.push_str(&format!("{k}={}\n", p.display()));
    }
    out.push_str("\n[timings]\n");
    for (stage, d) in timings {
        out.push_str(&format!("{stage}={:.3}s\n", d.as_secs_f64()));
    }
    out
}

/// Writes the extracted corpus and its `.funcs` sidecar (defined function
/// names, for symbolization).
pub fn write_extraction(ex: &Extraction, out: &Path) -> Result<PathBuf> {
    write_text(out, &write_gadgets(&ex.records)?)?;
    let funcs = funcs_sidecar(out);
    write_text(&funcs, &write_user_functions(&ex.user_functions))?;
    Ok(funcs)
}

/// `<corpus path>.funcs`.
pub fn funcs_sidecar(corpus: &Path) -> PathBuf {
    let mut name = corpus.as_os_str().to_owned();
    name.push(".funcs");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_source_syntax() {
        let s: CorpusSource = "fc=data/fc.txt".parse().unwrap();
        assert_eq!((s.kind, s.path.as_path()), (Kind::Fc, Path::new("data/fc.txt")));
        let s: CorpusSource = "plain.txt".parse().unwrap();
        assert_eq!(s.kind, Kind::Gadget);
        let s: CorpusSource = "odd=name.txt".parse().unwrap();
        assert_eq!((s.kind, s.path.as_path()), (Kind::Gadget, Path::new("odd=name.txt")));
        assert!("".parse::<CorpusSource>().is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(funcs_sidecar(Path::new("out/corpus.txt")), Path::new("out/corpus.txt.funcs"));
    }

    #[test]
    fn missing_embeddings_without_fallback_is_an_embed_error() {
        let toks = vec![TokenizedSlice { slice_id: 0, label: Label::Safe, tokens: vec!["a".into(), "b".into()] }];
        let err = build_graph_with_features(&toks, &GraphOptions::default(), None).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Embed));
        assert_eq!(err.exit_code(), 2);
        let g = build_graph_with_features(&toks, &GraphOptions { fallback_mean_words: true, ..Default::default() }, None)
            .unwrap();
        assert_eq!(g.feature_dim(), DEFAULT_WORD_DIM);
    }
}
