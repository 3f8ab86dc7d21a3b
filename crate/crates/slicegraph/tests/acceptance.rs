//! Acceptance checks, one `PASS`/`FAIL` line each, with wall time. Each
//! check compares against an oracle computed here from first principles,
//! not against the library's own helpers. Exits non-zero if any check fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicegraph::formats::embeddings::write_embeddings;
use slicegraph::formats::gadgets::write_gadgets;
use slicegraph::formats::write_text;
use slicegraph::pipeline::{run_pipeline, CorpusSource, GraphOptions, PipelineOptions, PipelineRun};
use slicegraph_core::corpus::SplitOptions;
use slicegraph_core::eval::evaluate;
use slicegraph_core::gcn::{backward, forward, loss, GcnInput, GcnParams, Mode, TrainConfig, TENSOR_NAMES};
use slicegraph_core::graph::{build_graph, sym_normalize, CooccurrenceMode};
use slicegraph_core::linalg::{CsrMatrix, Matrix};
use slicegraph_core::normalize::{normalize_record, tokenize_symbolic, SymbolizeOptions};
use slicegraph_core::synthetic::{generate, noise_embeddings, Signal, SyntheticSpec};
use slicegraph_core::{Kind, Label, SliceRecord, TextGraph, TokenizedSlice};

/// Settings of the learning runs: word feature width and Adam step size.
const WORD_DIM: usize = 64;
const LEARNING_RATE: f64 = 0.003;
const EPOCHS: usize = 200;
/// Every learning check runs on all of these seeds.
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

type Check = fn() -> Result<String, String>;

fn main() {
    let checks: [(&str, Duration, Check); 8] = [
        ("edge-weight oracle", Duration::from_secs(5), edge_weight_oracle),
        ("adjacency structure", Duration::from_secs(5), adjacency_structure),
        ("gradient check", Duration::from_secs(10), gradient_check),
        ("learning sanity", Duration::from_secs(60), learning_sanity),
        ("graph advantage", Duration::from_secs(90), graph_advantage),
        ("tokenizer", Duration::from_secs(5), tokenizer),
        ("metrics", Duration::from_secs(5), metrics_oracle),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took longer than the {}s budget", budget.as_secs()))
            }
        });
        let secs = elapsed.as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!("{} of {} acceptance checks passed", 8 - failed, 8);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<TokenizedSlice> {
    let n_words = rng.random_range(2..=50);
    let n_slices = rng.random_range(1..=20);
    (0..n_slices)
        .map(|k| TokenizedSlice {
            slice_id: k as u64 * 3 + 1,
            label: if rng.random() { Label::Vulnerable } else { Label::Safe },
            tokens: (0..rng.random_range(1..=12)).map(|_| format!("w{}", rng.random_range(0..n_words))).collect(),
        })
        .collect()
}

fn ten_corpora() -> Vec<Vec<TokenizedSlice>> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    (0..10).map(|_| random_corpus(&mut rng)).collect()
}

/// Dense adjacency from the definitions: 1 on the diagonal, slice–word
/// weight `count · ln(N / df)`, word–word weight `max(0, ln(p_ij / (p_i
/// p_j)))` with probabilities over slices, and nothing between slices.
fn brute_force_adjacency(corpus: &[TokenizedSlice], words: &[String]) -> Vec<Vec<f64>> {
    let v = words.len();
    let n = v + corpus.len();
    let n_slices = corpus.len() as f64;
    let sets: Vec<BTreeSet<&str>> = corpus.iter().map(|s| s.tokens.iter().map(String::as_str).collect()).collect();
    let df = |w: &str| sets.iter().filter(|s| s.contains(w)).count() as f64;
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for i in 0..v {
        for j in 0..v {
            if i == j {
                continue;
            }
            let both = sets.iter().filter(|s| s.contains(words[i].as_str()) && s.contains(words[j].as_str())).count();
            if both > 0 {
                let p_ij = both as f64 / n_slices;
                let p_i = df(&words[i]) / n_slices;
                let p_j = df(&words[j]) / n_slices;
                a[i][j] = (p_ij / (p_i * p_j)).ln().max(0.0);
            }
        }
    }
    for (k, slice) in corpus.iter().enumerate() {
        for (w, word) in words.iter().enumerate() {
            let count = slice.tokens.iter().filter(|t| *t == word).count() as f64;
            let weight = count * (n_slices / df(word)).ln();
            a[v + k][w] = weight;
            a[w][v + k] = weight;
        }
    }
    a
}

fn edge_weight_oracle() -> Result<String, String> {
    let mut entries = 0usize;
    let mut worst = 0.0f64;
    for (c, corpus) in ten_corpora().iter().enumerate() {
        let (_, g) = build_graph(corpus, 1, CooccurrenceMode::Slice).map_err(|e| e.to_string())?;
        let distinct: BTreeSet<&str> = corpus.iter().flat_map(|s| s.tokens.iter().map(String::as_str)).collect();
        ensure(g.words().iter().map(String::as_str).collect::<BTreeSet<_>>() == distinct, || {
            format!("corpus {c}: vocabulary differs from the distinct tokens")
        })?;
        let expected = brute_force_adjacency(corpus, g.words());
        let dense = g.adjacency().to_dense();

        // Normalization oracle: D^-1/2 A D^-1/2 with D the row sums.
        let d: Vec<f64> = expected.iter().map(|r| r.iter().sum::<f64>()).collect();
        let normalized = g.normalized().ok_or("graph is not normalized")?.to_dense();
        for (i, row) in expected.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                let diff = (dense[(i, j)] - want).abs();
                let norm_diff = (normalized[(i, j)] - want / (d[i].sqrt() * d[j].sqrt())).abs();
                worst = worst.max(diff).max(norm_diff);
                ensure(diff <= 1e-12 && norm_diff <= 1e-12, || {
                    format!("corpus {c}: entry ({i},{j}) is {} / normalized {}, expected {want}", dense[(i, j)], normalized[(i, j)])
                })?;
                entries += 1;
            }
        }
    }
    Ok(format!("10 corpora, {entries} raw and normalized entries, max |diff| {worst:.1e}"))
}

fn adjacency_structure() -> Result<String, String> {
    let mut graphs: Vec<TextGraph> = ten_corpora()
        .iter()
        .map(|c| build_graph(c, 1, CooccurrenceMode::Slice).map(|(_, g)| g))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let records = generate(&SyntheticSpec { n: 200, vuln_fraction: 0.3, signal: Signal::Cooccur, seed: 1 })
        .map_err(|e| e.to_string())?;
    let tokens: Vec<TokenizedSlice> = records
        .iter()
        .map(|r| normalize_record(r, &BTreeSet::new(), &SymbolizeOptions::default()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    graphs.push(build_graph(&tokens, 1, CooccurrenceMode::Slice).map_err(|e| e.to_string())?.1);
    graphs.push(build_graph(&tokens, 1, CooccurrenceMode::Window(4)).map_err(|e| e.to_string())?.1);

    let mut checked = 0usize;
    for (gi, g) in graphs.iter().enumerate() {
        let v = g.n_words();
        for m in [g.adjacency(), g.normalized().ok_or("graph is not normalized")?] {
            for (i, j, w) in m.triplets() {
                ensure(m.get(j, i) == w, || format!("graph {gi}: ({i},{j}) = {w} but ({j},{i}) = {}", m.get(j, i)))?;
                ensure(w >= 0.0, || format!("graph {gi}: negative weight {w} at ({i},{j})"))?;
                ensure(i == j || i < v || j < v, || format!("graph {gi}: slice-slice entry ({i},{j}) = {w}"))?;
                checked += 1;
            }
        }
        let a = g.adjacency();
        for i in 0..g.n_nodes() {
            ensure(a.get(i, i) == 1.0, || format!("graph {gi}: diagonal ({i},{i}) = {}", a.get(i, i)))?;
        }
    }
    Ok(format!("{} graphs, {checked} stored entries: symmetric, unit diagonal, no slice-slice edges, non-negative", graphs.len()))
}

fn random_gcn_case(rng: &mut ChaCha8Rng) -> (CsrMatrix, Matrix, Vec<(usize, Label)>) {
    let n = 6;
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, 1.0));
        for j in 0..i {
            if rng.random::<f64>() < 0.5 {
                let w = rng.random_range(0.1..2.0);
                trip.push((i, j, w));
                trip.push((j, i, w));
            }
        }
    }
    let a = sym_normalize(&CsrMatrix::from_triplets(n, n, trip));
    let x = Matrix::from_fn(n, 8, |_, _| rng.random_range(-1.0..1.0));
    let targets = vec![(0, Label::Safe), (2, Label::Vulnerable), (3, Label::Safe), (5, Label::Vulnerable)];
    (a, x, targets)
}

/// Per tensor: `‖g_fd − g‖ / (‖g_fd‖ + ‖g‖)` over the checked entries, with
/// `g_fd` the central difference `(L(θ+h) − L(θ−h)) / 2h`, h = 1e-5. Dropout
/// is on, with the same masks in every evaluation.
fn gradient_errors(
    a: &CsrMatrix,
    x: &Matrix,
    targets: &[(usize, Label)],
    hidden: usize,
    seed: u64,
    entries_per_tensor: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<[f64; 6], String> {
    let h = 1e-5;
    let input = GcnInput::new(a, x).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { hidden, dropout_p: 0.5, ..Default::default() };
    let mode = Mode::Train { seed };
    let params = GcnParams::init(8, hidden, seed);
    let cache = forward(&input, &params, mode, &cfg).map_err(|e| e.to_string())?;
    let grads = backward(&input, &params, &cache, targets).map_err(|e| e.to_string())?;
    let eval = |p: &GcnParams| loss(&forward(&input, p, mode, &cfg).unwrap(), targets).unwrap();

    let mut errors = [0.0; 6];
    for t in 0..6 {
        let len = params.tensors()[t].len();
        let picks: Vec<usize> = match entries_per_tensor {
            Some(k) if k < len => (0..k).map(|_| rng.random_range(0..len)).collect(),
            _ => (0..len).collect(),
        };
        let (mut diff2, mut fd2, mut an2) = (0.0, 0.0, 0.0);
        for e in picks {
            let mut p = params.clone();
            p.tensors_mut()[t][e] += h;
            let up = eval(&p);
            p.tensors_mut()[t][e] -= 2.0 * h;
            let down = eval(&p);
            let fd = (up - down) / (2.0 * h);
            let an = grads.tensors()[t][e];
            diff2 += (fd - an) * (fd - an);
            fd2 += fd * fd;
            an2 += an * an;
        }
        let denom = fd2.sqrt() + an2.sqrt();
        errors[t] = if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 };
    }
    Ok(errors)
}

fn gradient_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = [0.0f64; 6];
    for case in 0..5u64 {
        let (a, x, targets) = random_gcn_case(&mut rng);
        // Every entry at a narrow hidden width, then sampled entries at the
        // production width.
        for (hidden, sample) in [(16, None), (200, Some(150))] {
            let errs = gradient_errors(&a, &x, &targets, hidden, 100 + case, sample, &mut rng)?;
            for (t, &e) in errs.iter().enumerate() {
                ensure(e < 1e-4, || format!("graph {case}, hidden {hidden}: {} relative error {e:.2e}", TENSOR_NAMES[t]))?;
                worst[t] = worst[t].max(e);
            }
        }
    }
    let summary: Vec<String> = TENSOR_NAMES.iter().zip(worst).map(|(n, e)| format!("{n} {e:.1e}")).collect();
    Ok(format!("5 graphs x 6 nodes, dim 8, hidden 16 (all entries) and 200 (sampled); max rel. error {}", summary.join(", ")))
}

fn pipeline_options(corpus: &Path, embeddings: Option<&Path>, seed: u64) -> PipelineOptions {
    PipelineOptions {
        corpora: vec![CorpusSource { kind: Kind::Gadget, path: corpus.to_path_buf() }],
        user_functions: None,
        dedup: false,
        embeddings: embeddings.map(Path::to_path_buf),
        graph: GraphOptions {
            word_dim: Some(WORD_DIM),
            seed,
            fallback_mean_words: embeddings.is_none(),
            ..GraphOptions::default()
        },
        split: SplitOptions { seed, ..SplitOptions::default() },
        train: TrainConfig { learning_rate: LEARNING_RATE, epochs: EPOCHS, seed, ..TrainConfig::default() },
        baseline: embeddings.is_some(),
    }
}

fn synthetic_run(signal: Signal, seed: u64, noise: bool) -> Result<PipelineRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let records = generate(&SyntheticSpec { n: 200, vuln_fraction: 0.3, signal, seed }).map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.txt");
    write_text(&corpus, &write_gadgets(&records).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let embeddings = if noise {
        let table = noise_embeddings(records.iter().map(|r| r.id), WORD_DIM, seed).map_err(|e| e.to_string())?;
        let path = dir.path().join("embeddings.txt");
        write_text(&path, &write_embeddings(&table).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        Some(path)
    } else {
        None
    };
    let opts = pipeline_options(&corpus, embeddings.as_deref(), seed);
    run_pipeline(&opts, &dir.path().join("out"), &[]).map_err(|e| e.to_string())
}

fn learning_sanity() -> Result<String, String> {
    let mut f1s = Vec::new();
    for seed in SEEDS {
        let run = synthetic_run(Signal::Token, seed, false)?;
        let loss = &run.checkpoint.loss_history;
        ensure(loss.len() == EPOCHS, || format!("seed {seed}: {} loss values", loss.len()))?;
        if let Some(e) = (1..20).find(|&e| loss[e] >= loss[e - 1]) {
            return Err(format!("seed {seed}: loss rose at epoch {e}: {} -> {}", loss[e - 1], loss[e]));
        }
        let f1 = run.eval.report.f1;
        ensure(f1 >= 0.95, || format!("seed {seed}: held-out F1 {f1:.3} < 0.95"))?;
        f1s.push(format!("{f1:.2}"));
    }
    Ok(format!(
        "token signal, 200 slices, 30% vulnerable, mean-of-words slices, {EPOCHS} epochs, seeds {SEEDS:?}: \
         loss strictly falls over epochs 1-20, held-out F1 [{}]",
        f1s.join(", ")
    ))
}

fn graph_advantage() -> Result<String, String> {
    let mut rows = Vec::new();
    for seed in SEEDS {
        let run = synthetic_run(Signal::Cooccur, seed, true)?;
        let gcn = run.eval.report.f1;
        let linear = run.eval.baseline.as_ref().ok_or("no baseline report")?.f1;
        ensure(linear <= 0.6, || format!("seed {seed}: linear baseline F1 {linear:.3} > 0.6"))?;
        ensure(gcn >= 0.9, || format!("seed {seed}: GCN F1 {gcn:.3} < 0.9"))?;
        rows.push(format!("{gcn:.2}/{linear:.2}"));
    }
    Ok(format!(
        "co-occurrence signal, label-free slice embeddings, seeds {SEEDS:?}: GCN/linear F1 [{}]",
        rows.join(", ")
    ))
}

const VAR_POOL: [&str; 10] = ["buf", "len", "src", "dst", "count", "ptr", "idx", "tmp", "node", "size"];
const FUNC_POOL: [&str; 4] = ["helper", "parse_item", "emit", "check_bounds"];

fn random_snippet(rng: &mut ChaCha8Rng) -> Vec<String> {
    let v = |rng: &mut ChaCha8Rng| *VAR_POOL.choose(rng).unwrap();
    let f = |rng: &mut ChaCha8Rng| *FUNC_POOL.choose(rng).unwrap();
    (0..rng.random_range(2..=8))
        .map(|_| {
            let (a, b, c) = (v(rng), v(rng), v(rng));
            match rng.random_range(0..8) {
                0 => format!("int {a} = {b} + {};", rng.random_range(0..100)),
                1 => format!("{a} = {}({b}, {c});", f(rng)),
                2 => format!("strcpy({a}, {b});"),
                3 => format!("if ({a} < {b}) {c} = {a};"),
                4 => format!("{a}[{b}] = {c} * 2;"),
                5 => format!("{a}->{b} = {c};"),
                6 => format!("char *{a} = \"x y\";"),
                _ => format!("{}({a});", f(rng)),
            }
        })
        .collect()
}

/// Renames whole identifiers per `map`.
fn rename(line: &str, map: &BTreeMap<&str, String>) -> String {
    let mut out = String::new();
    let mut word = String::new();
    for ch in line.chars().chain(std::iter::once('\0')) {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            word.push(ch);
            continue;
        }
        out.push_str(map.get(word.as_str()).map_or(word.as_str(), String::as_str));
        word.clear();
        if ch != '\0' {
            out.push(ch);
        }
    }
    out
}

fn tokenizer() -> Result<String, String> {
    let expected = ["V1", "=", "V2", "-", "8", ";"];
    let got = tokenize_symbolic(0, Label::Safe, &["V1=V2-8;".to_string()]).map_err(|e| e.to_string())?;
    ensure(got.tokens == expected, || format!("V1=V2-8; tokenized as {:?}", got.tokens))?;

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let opts = SymbolizeOptions::default();
    for case in 0..50 {
        let lines = random_snippet(&mut rng);
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        for (k, name) in VAR_POOL.iter().chain(&FUNC_POOL).enumerate() {
            let fresh: String = (0..rng.random_range(1..6)).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
            map.insert(name, format!("q{fresh}_{k}"));
        }
        let renamed: Vec<String> = lines.iter().map(|l| rename(l, &map)).collect();
        let funcs: BTreeSet<String> = FUNC_POOL.iter().map(|s| s.to_string()).collect();
        let renamed_funcs: BTreeSet<String> = FUNC_POOL.iter().map(|s| map[s].clone()).collect();
        let rec = |lines: Vec<String>| SliceRecord::new(case, "t", lines, Label::Safe, Kind::Gadget).unwrap();
        let a = normalize_record(&rec(lines.clone()), &funcs, &opts).map_err(|e| e.to_string())?;
        let b = normalize_record(&rec(renamed.clone()), &renamed_funcs, &opts).map_err(|e| e.to_string())?;
        ensure(a.tokens == b.tokens, || format!("case {case}: {lines:?} and {renamed:?} normalize differently"))?;
        ensure(a.tokens.iter().any(|t| t == "V1"), || format!("case {case}: nothing was symbolized in {:?}", a.tokens))?;
        ensure(b.tokens.iter().all(|t| !map.values().any(|r| r == t)), || format!("case {case}: a name survived"))?;
    }
    Ok("V1=V2-8; -> [V1, =, V2, -, 8, ;]; 50 renamed snippets give identical token sequences".into())
}

fn metrics_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let n = rng.random_range(1..=200);
        let rate_t = rng.random::<f64>();
        let rate_p = rng.random::<f64>();
        let truth: Vec<Label> = (0..n).map(|_| if rng.random::<f64>() < rate_t { Label::Vulnerable } else { Label::Safe }).collect();
        let preds: Vec<Label> = (0..n).map(|_| if rng.random::<f64>() < rate_p { Label::Vulnerable } else { Label::Safe }).collect();
        let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for (&p, &t) in preds.iter().zip(&truth) {
            match (p == Label::Vulnerable, t == Label::Vulnerable) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
            }
        }
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let accuracy = ratio(tp + tn, n as u64);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        let r = evaluate(&preds, &truth).map_err(|e| e.to_string())?;
        let c = r.confusion;
        ensure((c.tp, c.tn, c.fp, c.fn_) == (tp, tn, fp, fn_), || format!("case {case}: counts {c:?}"))?;
        ensure((r.accuracy, r.precision, r.recall, r.f1) == (accuracy, precision, recall, f1), || {
            format!("case {case}: {:?} vs {:?}", (r.accuracy, r.precision, r.recall, r.f1), (accuracy, precision, recall, f1))
        })?;
        if precision + recall > 0.0 {
            let harmonic = 2.0 * precision * recall / (precision + recall);
            ensure((r.f1 - harmonic).abs() <= 4.0 * f64::EPSILON * harmonic, || format!("case {case}: F1 {} vs {harmonic}", r.f1))?;
        }
    }
    let truth = [Label::Vulnerable, Label::Safe, Label::Vulnerable, Label::Safe, Label::Safe];
    let r = evaluate(&truth, &truth).map_err(|e| e.to_string())?;
    ensure((r.accuracy, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0), || format!("perfect classifier: {r:?}"))?;
    Ok("100 random confusion matrices match hand-computed counts and metrics exactly; perfect classifier scores 1.0".into())
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let records = generate(&SyntheticSpec { n: 200, vuln_fraction: 0.3, signal: Signal::Token, seed: 8 }).map_err(|e| e.to_string())?;
    fs::write(d.join("corpus.txt"), write_gadgets(&records).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let run = |out: &str, seed: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let status = Command::new(env!("CARGO_BIN_EXE_slicegraph"))
            .current_dir(d)
            .args(["pipeline", "--corpus", "corpus.txt", "--fallback-mean-words", "--baseline", "--epochs", "200"])
            .args(["--word-dim", "64", "--learning-rate", "0.003", "--seed", seed, "--out-dir", out])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        let read = |f: &str| fs::read(d.join(out).join(f)).map_err(|e| e.to_string());
        Ok((read("checkpoint.txt")?, read("report.txt")?))
    };
    let first = run("a", "8")?;
    let second = run("b", "8")?;
    ensure(first.0 == second.0, || "checkpoints differ between identical runs".into())?;
    ensure(first.1 == second.1, || "reports differ between identical runs".into())?;
    let other = run("c", "9")?;
    ensure(other.0 != first.0, || "a different seed gave the same checkpoint".into())?;
    Ok(format!(
        "two separate pipeline processes, seed 8: checkpoint ({} bytes) and report ({} bytes) byte-identical; seed 9 differs",
        first.0.len(),
        first.1.len()
    ))
}
