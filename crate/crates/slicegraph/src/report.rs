//! Plain-text reports: aligned tables with percentages to one decimal place,
//! followed by a `key=value` block that scripts can grep. Reports carry no
//! timings or paths, so reruns with the same seed are byte-identical.

use slicegraph_core::corpus::{CorpusStats, Kind};
use slicegraph_core::eval::{metrics, ConfusionMatrix, EvalReport};

/// Left-aligns the first column and right-aligns the rest, two spaces apart.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            if i == 0 {
                s.push_str(&format!("{cell:<w$}"));
            } else {
                s.push_str(&format!("  {cell:>w$}"));
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&mut headers.iter().copied());
    out.push_str(&line(&mut widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str)));
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

const METRIC_HEADERS: [&str; 10] =
    ["", "Samples", "TP", "TN", "FP", "FN", "Accuracy(%)", "Precision(%)", "Recall(%)", "F1(%)"];

fn metric_row(name: &str, c: &ConfusionMatrix, r: &EvalReport) -> Vec<String> {
    vec![
        name.to_string(),
        c.total().to_string(),
        c.tp.to_string(),
        c.tn.to_string(),
        c.fp.to_string(),
        c.fn_.to_string(),
        pct(r.accuracy),
        pct(r.precision),
        pct(r.recall),
        pct(r.f1),
    ]
}

fn key_values(prefix: &str, r: &EvalReport) -> String {
    let c = &r.confusion;
    let mut out = String::new();
    for (k, v) in [("tp", c.tp), ("tn", c.tn), ("fp", c.fp), ("fn", c.fn_)] {
        out.push_str(&format!("{prefix}.{k}={v}\n"));
    }
    for (k, v) in [("accuracy", r.accuracy), ("precision", r.precision), ("recall", r.recall), ("f1", r.f1)] {
        out.push_str(&format!("{prefix}.{k}={v:?}\n"));
    }
    for w in &r.warnings {
        out.push_str(&format!("{prefix}.warning={w}\n"));
    }
    out
}

/// Full evaluation report. `echo` is the configuration that produced the
/// model; `models` are named results, the first being the main one.
pub fn render_report(echo: &[(String, String)], models: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("# slicegraph evaluation report\n\n[config]\n");
    for (k, v) in echo {
        out.push_str(&format!("{k}={v}\n"));
    }

    out.push_str("\n[results]\n");
    let rows: Vec<Vec<String>> = models.iter().map(|(name, r)| metric_row(name, &r.confusion, r)).collect();
    let mut headers = METRIC_HEADERS;
    headers[0] = "Model";
    out.push_str(&table(&headers, &rows));

    if let Some((_, main)) = models.first() {
        if main.per_kind.len() > 1 {
            out.push_str("\n[per-kind]\n");
            let rows: Vec<Vec<String>> = main
                .per_kind
                .iter()
                .filter_map(|(kind, c)| metrics(c).ok().map(|r| metric_row(kind.as_str(), c, &r)))
                .collect();
            headers[0] = "Kind";
            out.push_str(&table(&headers, &rows));
        }
    }

    out.push_str("\n[metrics]\n");
    for (name, r) in models {
        out.push_str(&key_values(name, r));
    }
    out
}

/// Corpus summary in the shape of a dataset table: totals by label, then
/// per-kind counts for the kinds that occur.
pub fn render_stats(s: &CorpusStats) -> String {
    let mut headers = vec!["Slices", "Vulnerable", "Non-vulnerable"];
    let mut row = vec![s.total.to_string(), s.vulnerable.to_string(), s.non_vulnerable.to_string()];
    for kind in Kind::ALL {
        let n = s.kind_count(kind);
        if n > 0 {
            headers.push(kind.as_str());
            row.push(n.to_string());
        }
    }
    table(&headers, &[row])
}
