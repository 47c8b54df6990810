//! Rank tables and top-n counts from one or more results files.
//!
//! A ranking unit is a (dataset, γ) pair scored by the mean metric over
//! repeats. Average ranks per dataset are taken across its noise levels.

use std::io;
use std::path::Path;

use serde::Serialize;

use super::sweep::{sort_results, summarize, CellResult, RESULTS_HEADER};
use super::ExperimentError;
use crate::dataset::format_float;
use crate::metrics::{rank_methods, RankTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub methods: Vec<String>,
    /// `(dataset, γ)` per row of `table.ranks`.
    pub units: Vec<(String, f64)>,
    /// Mean metric per unit and method.
    pub scores: Vec<Vec<f64>>,
    pub table: RankTable,
    /// Average rank per dataset across its noise levels, one entry per method.
    pub per_dataset: Vec<(String, Vec<f64>)>,
}

pub fn read_results<R: io::Read>(reader: R) -> Result<Vec<CellResult>, ExperimentError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ExperimentError::Format(format!("results file lacks column `{name}`")))
    };
    let idx: Vec<usize> = RESULTS_HEADER.iter().map(|h| col(h)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let bad = |k: usize| {
            ExperimentError::Format(format!(
                "row {}: bad `{}` value `{}`",
                line + 1,
                RESULTS_HEADER[k],
                field(k)
            ))
        };
        let real = |k: usize| field(k).parse::<f64>().map_err(|_| bad(k));
        let int = |k: usize| field(k).parse::<usize>().map_err(|_| bad(k));
        out.push(CellResult {
            dataset: field(0).to_string(),
            method: field(1).to_string(),
            gamma: real(2)?,
            repeat: int(3)?,
            metric: real(4)?,
            r: real(5)?,
            q: real(6)?,
            learning_rate: real(7)?,
            n_rounds: int(8)?,
            flips: int(9)?,
        });
    }
    Ok(out)
}

pub fn build_report(results: &[CellResult]) -> Result<Report, ExperimentError> {
    let mut sorted = results.to_vec();
    sort_results(&mut sorted);
    let summary = summarize(&sorted);
    let mut methods: Vec<String> = summary.iter().map(|s| s.method.clone()).collect();
    methods.sort();
    methods.dedup();
    let mut units: Vec<(String, f64)> = summary.iter().map(|s| (s.dataset.clone(), s.gamma)).collect();
    units.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    units.dedup();
    let mut scores = vec![vec![f64::NAN; methods.len()]; units.len()];
    for s in &summary {
        let u = units
            .iter()
            .position(|u| u.0 == s.dataset && u.1 == s.gamma)
            .expect("unit listed");
        let m = methods.iter().position(|m| *m == s.method).expect("method listed");
        scores[u][m] = s.mean;
    }
    for (u, row) in scores.iter().enumerate() {
        if let Some(m) = row.iter().position(|v| v.is_nan()) {
            return Err(ExperimentError::Format(format!(
                "method `{}` has no result for dataset `{}` at gamma {}",
                methods[m], units[u].0, units[u].1
            )));
        }
    }
    let table = rank_methods(&methods, &scores, true)?;
    let mut per_dataset: Vec<(String, Vec<f64>)> = Vec::new();
    for (u, (dataset, _)) in units.iter().enumerate() {
        match per_dataset.last_mut() {
            Some((d, sums)) if d == dataset => {
                for (s, r) in sums.iter_mut().zip(&table.ranks[u]) {
                    *s += r;
                }
            }
            _ => per_dataset.push((dataset.clone(), table.ranks[u].clone())),
        }
    }
    for (dataset, sums) in &mut per_dataset {
        let n = units.iter().filter(|u| u.0 == *dataset).count() as f64;
        for s in sums.iter_mut() {
            *s /= n;
        }
    }
    Ok(Report {
        methods,
        units,
        scores,
        table,
        per_dataset,
    })
}

/// `ranks.csv`: one row per (dataset, γ, method).
pub fn write_ranks<W: io::Write>(writer: W, report: &Report) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dataset", "gamma", "method", "mean_metric", "rank"])?;
    for (u, (dataset, gamma)) in report.units.iter().enumerate() {
        for (m, method) in report.methods.iter().enumerate() {
            w.write_record([
                dataset.clone(),
                format_float(*gamma),
                method.clone(),
                format_float(report.scores[u][m]),
                format_float(report.table.ranks[u][m]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `topn.csv`: average rank and top-n counts per method.
pub fn write_topn<W: io::Write>(writer: W, report: &Report) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["method".to_string(), "average_rank".to_string()];
    header.extend((1..=report.methods.len()).map(|n| format!("top_{n}")));
    w.write_record(&header)?;
    for (m, method) in report.methods.iter().enumerate() {
        let mut row = vec![method.clone(), format_float(report.table.average_rank[m])];
        row.extend(report.table.top_n[m].iter().map(usize::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `table.csv`: datasets by methods, average rank across noise levels, with a
/// closing `average` row over all units.
pub fn write_table<W: io::Write>(writer: W, report: &Report) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["dataset".to_string()];
    header.extend(report.methods.iter().cloned());
    w.write_record(&header)?;
    for (dataset, ranks) in &report.per_dataset {
        let mut row = vec![dataset.clone()];
        row.extend(ranks.iter().map(|r| format_float(*r)));
        w.write_record(&row)?;
    }
    let mut row = vec!["average".to_string()];
    row.extend(report.table.average_rank.iter().map(|r| format_float(*r)));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// Writes `ranks.csv`, `topn.csv`, `table.csv` and `report.json` under `dir`.
pub fn write_report(dir: &Path, report: &Report) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    write_ranks(std::fs::File::create(dir.join("ranks.csv"))?, report)?;
    write_topn(std::fs::File::create(dir.join("topn.csv"))?, report)?;
    write_table(std::fs::File::create(dir.join("table.csv"))?, report)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| ExperimentError::Format(e.to_string()))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}
