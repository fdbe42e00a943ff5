//! Aggregation of run results into per-cell summaries and report tables.

use super::{Approach, RunResult};
use crate::stats::{
    self, average_relative_uncertainty, convergence_count, convergence_threshold, fit_quadratic,
    is_significant, notation, ratio_with_uncertainty, ConvergenceRow, FitOptions, FitPoint, FitResult,
    Summary, Threshold,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Summaries of one `(approach, corpus, x)` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub approach: Approach,
    pub corpus_id: String,
    pub x: f64,
    pub n_runs: usize,
    pub cv: usize,
    /// f1 over the converged runs.
    pub f1: Option<Summary>,
    /// Epochs over the converged runs.
    pub epochs: Option<Summary>,
    /// Mean scaled split sizes.
    pub n_train: f64,
    pub n_val: f64,
}

impl CellStats {
    /// A cell from already summarized values, with every run converged.
    pub fn published(approach: Approach, corpus_id: &str, x: f64, n_runs: usize, f1: Summary, epochs: Summary) -> Self {
        Self {
            approach,
            corpus_id: corpus_id.to_string(),
            x,
            n_runs,
            cv: n_runs,
            f1: Some(f1),
            epochs: Some(epochs),
            n_train: 0.0,
            n_val: 0.0,
        }
    }

    pub fn all_converged(&self) -> bool {
        self.cv == self.n_runs && self.n_runs > 0
    }

    /// f1 summary, only when every run converged.
    pub fn full_f1(&self) -> Option<Summary> {
        self.f1.filter(|_| self.all_converged())
    }

    pub fn full_epochs(&self) -> Option<Summary> {
        self.epochs.filter(|_| self.all_converged())
    }
}

/// Groups results by approach, corpus and training scaling factor, in order of first appearance.
pub fn aggregate(results: &[RunResult]) -> Vec<CellStats> {
    let mut groups: Vec<(Approach, &str, f64, Vec<&RunResult>)> = Vec::new();
    for r in results {
        match groups
            .iter_mut()
            .find(|g| g.0 == r.approach && g.1 == r.corpus_id && g.2 == r.x_train)
        {
            Some(g) => g.3.push(r),
            None => groups.push((r.approach, &r.corpus_id, r.x_train, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(approach, corpus_id, x, runs)| {
            let f1_all: Vec<f64> = runs.iter().map(|r| r.test_f1).collect();
            let converged: Vec<&&RunResult> = runs.iter().filter(|r| r.test_f1 > 0.0).collect();
            let f1: Vec<f64> = converged.iter().map(|r| r.test_f1).collect();
            let epochs: Vec<f64> = converged.iter().map(|r| r.epochs_run).collect();
            let n = runs.len() as f64;
            CellStats {
                approach,
                corpus_id: corpus_id.to_string(),
                x,
                n_runs: runs.len(),
                cv: convergence_count(&f1_all),
                f1: stats::summarize(&f1).ok(),
                epochs: stats::summarize(&epochs).ok(),
                n_train: runs.iter().map(|r| r.n_train as f64).sum::<f64>() / n,
                n_val: runs.iter().map(|r| r.n_val as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableCell {
    pub text: String,
    pub bold: bool,
}

impl From<String> for TableCell {
    fn from(text: String) -> Self {
        Self { text, bold: false }
    }
}

impl From<&str> for TableCell {
    fn from(text: &str) -> Self {
        text.to_string().into()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<TableCell>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let field = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = String::new();
        let line = |cells: Vec<&str>| cells.into_iter().map(field).collect::<Vec<_>>().join(",");
        out.push_str(&line(self.header.iter().map(String::as_str).collect()));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row.iter().map(|c| c.text.as_str()).collect()));
            out.push('\n');
        }
        out
    }

    /// Column-aligned Markdown; bold cells are wrapped in `**`.
    pub fn to_markdown(&self) -> String {
        let render = |c: &TableCell| {
            if c.bold {
                format!("**{}**", c.text)
            } else {
                c.text.clone()
            }
        };
        let rows: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(render).collect()).collect();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count().max(3)).collect();
        for row in &rows {
            for (i, c) in row.iter().enumerate() {
                if i < widths.len() {
                    widths[i] = widths[i].max(c.chars().count());
                }
            }
        }
        let mut out = String::new();
        let emit = |out: &mut String, cells: &[String]| {
            out.push('|');
            for (i, w) in widths.iter().enumerate() {
                let c = cells.get(i).map_or("", String::as_str);
                let _ = write!(out, " {c:<w$} |");
            }
            out.push('\n');
        };
        emit(&mut out, &self.header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        emit(&mut out, &rule);
        for row in &rows {
            emit(&mut out, row);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    MainTable,
    RatioTable,
    StabilityTable,
    FitTable,
}

pub fn build_report(results: &[RunResult], kind: ReportKind) -> Table {
    let cells = aggregate(results);
    match kind {
        ReportKind::MainTable => main_table(&cells),
        ReportKind::RatioTable => ratio_table(&cells, Approach::Adaptive, &[Approach::Stable, Approach::Original]),
        ReportKind::StabilityTable => stability_table(&cells),
        ReportKind::FitTable => fit_table(&cells, FitOptions::default()),
    }
}

fn first_seen<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

fn corpora(cells: &[CellStats]) -> Vec<String> {
    first_seen(cells.iter().map(|c| c.corpus_id.clone()))
}

fn approaches(cells: &[CellStats]) -> Vec<Approach> {
    first_seen(cells.iter().map(|c| c.approach))
}

fn xs(cells: &[CellStats], corpus: &str) -> Vec<f64> {
    let mut v = first_seen(cells.iter().filter(|c| c.corpus_id == corpus).map(|c| c.x));
    v.sort_by(f64::total_cmp);
    v
}

fn find<'a>(cells: &'a [CellStats], a: Approach, corpus: &str, x: f64) -> Option<&'a CellStats> {
    cells.iter().find(|c| c.approach == a && c.corpus_id == corpus && c.x == x)
}

const F1_DECIMALS: usize = 4;
const EPOCH_DECIMALS: usize = 1;
const MISSING: &str = "---";

/// Approach whose f1 is the highest and significantly above every other in the row.
pub fn significant_best(row: &[(Approach, Summary)]) -> Option<Approach> {
    let (best, top) = row.iter().max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))?;
    row.iter()
        .filter(|(a, _)| a != best)
        .all(|(_, s)| is_significant(top, s))
        .then_some(*best)
}

/// Per scaling factor: convergence counts, f1 of fully converged cells,
/// adaptive epoch counts, and the significantly best approach in bold.
pub fn main_table(cells: &[CellStats]) -> Table {
    let aps = approaches(cells);
    let mut header = vec!["corpus".to_string(), "x".to_string()];
    for a in &aps {
        header.push(format!("{a} cv"));
        header.push(format!("{a} f1"));
        if a.is_adaptive() {
            header.push(format!("{a} epochs"));
        }
    }
    header.push("significant_best".into());
    let mut table = Table::new(header);
    for corpus in corpora(cells) {
        for x in xs(cells, &corpus) {
            let row_cells: Vec<Option<&CellStats>> = aps.iter().map(|&a| find(cells, a, &corpus, x)).collect();
            let available: Vec<(Approach, Summary)> = aps
                .iter()
                .zip(&row_cells)
                .filter_map(|(&a, c)| c.and_then(CellStats::full_f1).map(|s| (a, s)))
                .collect();
            let best = significant_best(&available);
            let mut row: Vec<TableCell> = vec![corpus.as_str().into(), format!("{x}").into()];
            for (a, cell) in aps.iter().zip(&row_cells) {
                let cv = match cell {
                    Some(c) if !c.all_converged() => c.cv.to_string(),
                    Some(_) => String::new(),
                    None => MISSING.into(),
                };
                row.push(cv.into());
                let f1 = cell.and_then(|c| c.full_f1());
                row.push(TableCell {
                    text: f1.map_or(MISSING.into(), |s| notation::format(s.mean, s.delta, F1_DECIMALS)),
                    bold: best == Some(*a),
                });
                if a.is_adaptive() {
                    let ep = cell.and_then(|c| c.full_epochs());
                    row.push(ep.map_or(MISSING.into(), |s| notation::format(s.mean, s.delta, EPOCH_DECIMALS)).into());
                }
            }
            row.push(best.map_or(String::new(), |a| a.to_string()).into());
            table.rows.push(row);
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub corpus_id: String,
    pub x: f64,
    pub denominator: Approach,
    pub f1: Summary,
    pub epochs: Summary,
}

/// f1 and epoch ratios of `numerator` against each denominator, at every x
/// where both cells fully converged.
pub fn ratio_rows(cells: &[CellStats], numerator: Approach, denominators: &[Approach]) -> Vec<RatioRow> {
    let mut out = Vec::new();
    for corpus in corpora(cells) {
        for x in xs(cells, &corpus) {
            for &d in denominators {
                let (Some(n), Some(dc)) = (find(cells, numerator, &corpus, x), find(cells, d, &corpus, x)) else {
                    continue;
                };
                let (Some(nf), Some(df), Some(ne), Some(de)) = (n.full_f1(), dc.full_f1(), n.full_epochs(), dc.full_epochs())
                else {
                    continue;
                };
                let (Ok(f1), Ok(epochs)) = (ratio_with_uncertainty(&nf, &df), ratio_with_uncertainty(&ne, &de)) else {
                    continue;
                };
                out.push(RatioRow {
                    corpus_id: corpus.clone(),
                    x,
                    denominator: d,
                    f1,
                    epochs,
                });
            }
        }
    }
    out
}

pub fn ratio_table(cells: &[CellStats], numerator: Approach, denominators: &[Approach]) -> Table {
    let rows = ratio_rows(cells, numerator, denominators);
    let mut header = vec!["corpus".to_string(), "x".to_string()];
    for d in denominators {
        header.push(format!("f1 {numerator}/{d}"));
        header.push(format!("epochs {numerator}/{d}"));
    }
    let mut table = Table::new(header);
    for corpus in corpora(cells) {
        for x in xs(cells, &corpus) {
            let mut row: Vec<TableCell> = vec![corpus.as_str().into(), format!("{x}").into()];
            let mut any = false;
            for &d in denominators {
                match rows.iter().find(|r| r.corpus_id == corpus && r.x == x && r.denominator == d) {
                    Some(r) => {
                        any = true;
                        row.push(notation::format(r.f1.mean, r.f1.delta, 3).into());
                        row.push(notation::format(r.epochs.mean, r.epochs.delta, 2).into());
                    }
                    None => {
                        row.push(MISSING.into());
                        row.push(MISSING.into());
                    }
                }
            }
            if any {
                table.rows.push(row);
            }
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub corpus_id: String,
    pub threshold: Threshold,
    /// Average relative f1 uncertainty per approach above the threshold.
    pub u: Vec<(Approach, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Mean of the per-corpus values, over corpora with a threshold.
    pub global: Vec<(Approach, Option<f64>)>,
}

pub fn stability_report(cells: &[CellStats]) -> StabilityReport {
    let aps = approaches(cells);
    let mut rows = Vec::new();
    for corpus in corpora(cells) {
        let grid = xs(cells, &corpus);
        let n_runs = cells
            .iter()
            .filter(|c| c.corpus_id == corpus)
            .map(|c| c.n_runs)
            .max()
            .unwrap_or(0);
        let cv_rows: Vec<ConvergenceRow> = grid
            .iter()
            .map(|&x| ConvergenceRow {
                x,
                counts: aps
                    .iter()
                    .map(|&a| find(cells, a, &corpus, x).map_or(0, |c| c.cv))
                    .collect(),
            })
            .collect();
        let threshold = convergence_threshold(&cv_rows, n_runs);
        let u = aps
            .iter()
            .map(|&a| {
                let value = threshold.value().and_then(|t| {
                    let summaries: Vec<(f64, Summary)> = grid
                        .iter()
                        .filter_map(|&x| find(cells, a, &corpus, x).and_then(|c| c.f1).map(|s| (x, s)))
                        .collect();
                    average_relative_uncertainty(&summaries, t).ok()
                });
                (a, value)
            })
            .collect();
        rows.push(StabilityRow {
            corpus_id: corpus,
            threshold,
            u,
        });
    }
    let global = aps
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.u[i].1).collect();
            (a, stats::global_average_relative_uncertainty(&vals).ok())
        })
        .collect();
    StabilityReport { rows, global }
}

pub fn stability_table(cells: &[CellStats]) -> Table {
    let report = stability_report(cells);
    let mut header = vec!["corpus".to_string(), "threshold".to_string()];
    header.extend(approaches(cells).iter().map(|a| format!("u {a}")));
    let mut table = Table::new(header);
    let fmt_u = |u: Option<f64>| u.map_or(MISSING.to_string(), |v| format!("{v:.4}"));
    for r in &report.rows {
        let mut row: Vec<TableCell> = vec![
            r.corpus_id.as_str().into(),
            r.threshold.value().map_or("never".to_string(), |t| format!("{t}")).into(),
        ];
        row.extend(r.u.iter().map(|(_, u)| TableCell::from(fmt_u(*u))));
        table.rows.push(row);
    }
    if !report.rows.is_empty() {
        let mut row: Vec<TableCell> = vec!["global".into(), String::new().into()];
        row.extend(report.global.iter().map(|(_, u)| TableCell::from(fmt_u(*u))));
        table.rows.push(row);
    }
    table
}

/// Fit points of one approach on one corpus: `u = 1 / (N_epochs x)` over fully converged cells.
pub fn fit_points(cells: &[CellStats], approach: Approach, corpus: &str) -> Vec<FitPoint> {
    xs(cells, corpus)
        .into_iter()
        .filter_map(|x| {
            let c = find(cells, approach, corpus, x)?;
            let (f1, ep) = (c.full_f1()?, c.full_epochs()?);
            Some(FitPoint {
                inv_nx: 1.0 / (ep.mean * x),
                f1: f1.mean,
                delta: f1.delta,
            })
        })
        .collect()
}

pub fn fit_rows(cells: &[CellStats], opts: FitOptions) -> Vec<(String, Approach, Result<FitResult, stats::StatsError>)> {
    let mut out = Vec::new();
    for corpus in corpora(cells) {
        for a in approaches(cells) {
            let pts = fit_points(cells, a, &corpus);
            out.push((corpus.clone(), a, fit_quadratic(&pts, opts)));
        }
    }
    out
}

pub fn fit_table(cells: &[CellStats], opts: FitOptions) -> Table {
    let mut table = Table::new(
        ["corpus", "approach", "a0", "a1", "a2", "residual"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for (corpus, a, fit) in fit_rows(cells, opts) {
        let mut row: Vec<TableCell> = vec![corpus.into(), a.to_string().into()];
        match fit {
            Ok(f) => {
                for (i, v) in [f.a0, f.a1, f.a2].into_iter().enumerate() {
                    let sd = f.covariance[i][i].max(0.0).sqrt();
                    row.push(format!("{v:.6e} +- {sd:.1e}").into());
                }
                row.push(format!("{:.4}", f.residual).into());
            }
            Err(e) => {
                row.extend(std::iter::repeat_with(|| TableCell::from(MISSING)).take(3));
                row.push(e.to_string().into());
            }
        }
        table.rows.push(row);
    }
    table
}
