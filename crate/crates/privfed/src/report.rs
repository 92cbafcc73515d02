//! Report rendering: per-run CSV, summary CSV and an aligned text report
//! laid out as edge and central accuracy tables.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use privfed_core::metrics::Metrics;

use crate::config::{FeatureMode, Tuning};
use crate::experiment::{CellResult, ExperimentReport};

/// Reference top-5 feature ranking for comparison.
pub const REFERENCE_TOP5: [&str; 5] =
    ["concave points_mean", "fractal_dimension_mean", "texture_se", "texture_worst", "smoothness_mean"];
/// Reference ranks 26 to 30.
pub const REFERENCE_LEAST5: [&str; 5] =
    ["smoothness_se", "concave points_worst", "concavity_mean", "concavity_se", "radius_worst"];

/// Sample mean and sample standard deviation (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stdev: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stdev =
        if n < 2 { 0.0 } else { (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt() };
    Some(Summary { mean, stdev, n })
}

fn cells_of(report: &ExperimentReport, mode: FeatureMode, tuning: Tuning) -> impl Iterator<Item = &CellResult> {
    report.cells.iter().filter(move |c| c.mode == mode && c.tuning == tuning)
}

/// Final-round accuracy of edge `edge` (0 or 1) on its own test split.
pub fn edge_summary(report: &ExperimentReport, edge: usize, mode: FeatureMode, tuning: Tuning) -> Option<Summary> {
    let values: Vec<f64> =
        cells_of(report, mode, tuning).map(|c| c.last_round().edges[edge].local.accuracy()).collect();
    summarize(&values)
}

/// Final-round ensemble accuracy on the central test split.
pub fn central_summary(report: &ExperimentReport, mode: FeatureMode, tuning: Tuning) -> Option<Summary> {
    let values: Vec<f64> = cells_of(report, mode, tuning).map(|c| c.last_round().ensemble().accuracy()).collect();
    summarize(&values)
}

/// Tuning shown in the central row: HPT when any HPT cell ran.
pub fn central_tuning(report: &ExperimentReport) -> Tuning {
    if report.cells.iter().any(|c| c.tuning == Tuning::Hpt) {
        Tuning::Hpt
    } else {
        Tuning::Normal
    }
}

fn pct(s: Option<Summary>) -> String {
    match s {
        Some(s) => format!("{:.2} ± {:.2}", 100.0 * s.mean, 100.0 * s.stdev),
        None => "-".to_string(),
    }
}

fn metrics_fields(m: &Metrics) -> String {
    format!("{:.4},{},{},{},{}", m.accuracy(), m.tp, m.fp, m.fn_, m.tn)
}

pub fn render_runs_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "mode,tuning,seed,round,node,local_accuracy,local_tp,local_fp,local_fn,local_tn,\
         global_accuracy,global_tp,global_fp,global_fn,global_tn,bytes_transferred\n",
    );
    for cell in &report.cells {
        for round in &cell.run.rounds {
            let names = ["Edge-1", "Edge-2"];
            let nodes = round.edges.iter().zip(names).chain(std::iter::once((&round.central, "Central")));
            for (node, name) in nodes {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    cell.mode,
                    cell.tuning,
                    cell.seed,
                    round.round,
                    name,
                    metrics_fields(&node.local),
                    metrics_fields(&node.global),
                    round.bytes_transferred
                );
            }
        }
    }
    out
}

fn summary_line(out: &mut String, table: &str, row: &str, column: FeatureMode, s: Option<Summary>) {
    if let Some(s) = s {
        let _ = writeln!(out, "{table},{row},{column},{:.4},{:.4},{}", s.mean, s.stdev, s.n);
    }
}

pub fn render_summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("table,row,column,mean_accuracy,stdev_accuracy,seeds\n");
    for (edge, name) in ["Edge-1", "Edge-2"].iter().enumerate() {
        for tuning in Tuning::ALL {
            for mode in FeatureMode::ALL {
                let row = format!("{name} {tuning}");
                summary_line(&mut out, "edge", &row, mode, edge_summary(report, edge, mode, tuning));
            }
        }
    }
    let tuning = central_tuning(report);
    for mode in FeatureMode::ALL {
        summary_line(&mut out, "central", &format!("Central {tuning}"), mode, central_summary(report, mode, tuning));
    }
    out
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |out: &mut String, cells: Vec<&str>| {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(out, header.to_vec());
    line(out, widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        line(out, row.iter().map(String::as_str).collect());
    }
}

pub fn render_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let mode = if report.leakage_safe { "leakage-safe (partition first)" } else { "default (preprocess first)" };
    let seeds: Vec<String> = report.prepared.iter().map(|p| p.seed.to_string()).collect();
    let _ = writeln!(out, "pipeline: {mode}");
    let _ = writeln!(out, "rounds: {}", report.rounds);
    let _ = writeln!(out, "seeds: {}", seeds.join(" "));
    let _ = writeln!(out, "accuracy: percent, mean ± sample stdev over seeds, final round");

    let _ = writeln!(out, "\nstage counts (benign / malignant)");
    let mut rows = Vec::new();
    for p in &report.prepared {
        let c = &p.counts;
        let pair = |x: [usize; 2]| format!("{} / {}", x[0], x[1]);
        let shards: Vec<String> = c.shards.iter().map(|(tr, te)| format!("{tr}+{te}")).collect();
        rows.push(vec![
            p.seed.to_string(),
            pair(c.loaded),
            pair(c.after_smote),
            pair(c.after_outliers),
            c.total_after_outliers().to_string(),
            shards.join(" "),
            c.synthetic_in_test.to_string(),
        ]);
    }
    table(
        &mut out,
        &["seed", "loaded", "after SMOTE", "after outliers", "total", "train+test E1 E2 C", "synthetic in test"],
        &rows,
    );

    let _ = writeln!(out, "\nedge devices (own model, own test split)");
    let mut rows = Vec::new();
    for (edge, name) in ["Edge-1", "Edge-2"].iter().enumerate() {
        for tuning in Tuning::ALL {
            let mut row = vec![format!("{name} {tuning}")];
            row.extend(FeatureMode::ALL.iter().map(|&m| pct(edge_summary(report, edge, m, tuning))));
            rows.push(row);
        }
    }
    table(&mut out, &["node", "Full", "Top5", "Least5"], &rows);

    let tuning = central_tuning(report);
    let _ = writeln!(out, "\ncentral server (ensemble, central test split)");
    let mut row = vec![format!("Central {tuning}")];
    row.extend(FeatureMode::ALL.iter().map(|&m| pct(central_summary(report, m, tuning))));
    table(&mut out, &["node", "Full", "Top5", "Least5"], &[row]);

    let ranked: Vec<_> = report.prepared.iter().filter_map(|p| p.ranking.as_ref().map(|r| (p.seed, r))).collect();
    if !ranked.is_empty() {
        let _ = writeln!(out, "\nfeature ranking");
        for (seed, (m, ranking)) in &ranked {
            let _ = writeln!(out, "seed {seed}: {m} components");
            let mut rows = Vec::new();
            for i in 0..ranking.top.len() {
                rows.push(vec![
                    (i + 1).to_string(),
                    ranking.top[i].clone(),
                    REFERENCE_TOP5.get(i).unwrap_or(&"-").to_string(),
                    ranking.bottom[i].clone(),
                    REFERENCE_LEAST5.get(i).unwrap_or(&"-").to_string(),
                ]);
            }
            table(&mut out, &["#", "top", "reference top", "least", "reference least"], &rows);
        }
    }
    out
}

/// Writes `report.txt`, `summary.csv` and `runs.csv` into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    if report.cells.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty report"));
    }
    fs::create_dir_all(dir)?;
    let files = [
        ("report.txt", render_text(report)),
        ("summary.csv", render_summary_csv(report)),
        ("runs.csv", render_runs_csv(report)),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}
