//! CSV emission, atomic writes and cross-seed aggregation.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::spec::{fmt, RunOutput};

/// Full file contents of one run: `#` metadata, column header, rows.
pub fn render(out: &RunOutput) -> Result<String> {
    let mut text = String::new();
    for line in out.spec.header_lines()? {
        text.push_str(&line);
        text.push('\n');
    }
    text.push_str(&format!("# status: {}\n", out.status.as_str()));
    text.push_str(&render_table(&out.columns, &out.rows)?);
    Ok(text)
}

fn render_table(columns: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn run_file(dir: &Path, run_id: &str, seed: u64) -> PathBuf {
    dir.join(format!("{run_id}__seed{seed}.csv"))
}

pub fn mean_file(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(format!("{run_id}__mean.csv"))
}

/// Per-row mean across seeds, truncated to the shortest run. The first two
/// columns become `run_id` and `mean`; cells that do not parse as numbers are
/// taken from the first seed.
pub fn aggregate(runs: &[&RunOutput]) -> (Vec<String>, Vec<Vec<String>>) {
    let first = runs[0];
    let len = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    let rows = (0..len)
        .map(|i| {
            let mut row = vec![first.spec.run_id.clone(), "mean".to_string()];
            for c in 2..first.columns.len() {
                let parsed: Option<Vec<f64>> = runs.iter().map(|r| r.rows[i][c].parse::<f64>().ok()).collect();
                row.push(match parsed {
                    Some(vals) => fmt(vals.iter().sum::<f64>() / vals.len() as f64),
                    None => first.rows[i][c].clone(),
                });
            }
            row
        })
        .collect();
    (first.columns.clone(), rows)
}

/// Aggregate file: a `# seeds:` line, then the table.
pub fn render_mean(runs: &[&RunOutput]) -> Result<String> {
    let (columns, rows) = aggregate(runs);
    let seeds: Vec<String> = runs.iter().map(|r| r.spec.seed.to_string()).collect();
    let mut text = format!("# mean over seeds: {}\n", seeds.join(","));
    text.push_str(&render_table(&columns, &rows)?);
    Ok(text)
}

/// Parses the data rows of an emitted file (comment lines skipped).
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let columns = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((columns, rows))
}
