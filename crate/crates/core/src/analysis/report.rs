//! CSV reports, plot scripts and the worker pool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvReport {
    pub name: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvReport {
    pub fn new(name: impl Into<String>, header: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            header: header.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: impl Into<String>) {
        self.rows.push(row.into());
    }

    /// Writes an optional `# generated` line, the header and the rows.
    pub fn write<W: Write>(&self, mut w: W, timestamp: bool) -> Result<()> {
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            writeln!(w, "# generated unix={secs}")?;
        }
        writeln!(w, "{}", self.header)?;
        for row in &self.rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, timestamp: bool) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, timestamp).expect("writing to memory");
        String::from_utf8(buf).expect("reports are UTF-8")
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.split(',').position(|c| c == name)
    }
}

/// Where each report of a run goes: a single report is written to `out`,
/// several get `-<name>` appended to the file stem.
pub fn report_paths(out: &Path, reports: &[CsvReport]) -> Vec<PathBuf> {
    if reports.len() == 1 {
        return vec![out.to_path_buf()];
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    reports
        .iter()
        .map(|r| out.with_file_name(format!("{stem}-{}.{ext}", r.name)))
        .collect()
}

/// Writes every report, plus a gnuplot script next to each CSV when `gnuplot`
/// is set. Returns the paths written.
pub fn write_reports(out: &Path, reports: &[CsvReport], timestamp: bool, gnuplot: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (report, path) in reports.iter().zip(report_paths(out, reports)) {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        report.write(fs::File::create(&path)?, timestamp)?;
        written.push(path.clone());
        if gnuplot {
            let script = path.with_extension("gp");
            fs::write(&script, gnuplot_script(report, &path))?;
            written.push(script);
        }
    }
    Ok(written)
}

/// A gnuplot script plotting the report's last numeric-looking column
/// against its first column.
pub fn gnuplot_script(report: &CsvReport, csv: &Path) -> String {
    let cols: Vec<&str> = report.header.split(',').collect();
    let (x, y) = plot_columns(report);
    let file = csv.file_name().and_then(|s| s.to_str()).unwrap_or("report.csv");
    let png = Path::new(file).with_extension("png");
    format!(
        "set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 900,600\n\
         set output '{}'\n\
         set title '{}'\n\
         set xlabel '{}'\n\
         set ylabel '{}'\n\
         plot '{file}' using {}:{} with linespoints\n",
        png.display(),
        report.name,
        cols[x - 1],
        cols[y - 1],
        x,
        y
    )
}

/// 1-based (x, y) columns for plotting: `x` is the first column whose values
/// differ across rows (an index if none does), `y` the last numeric column.
fn plot_columns(report: &CsvReport) -> (usize, usize) {
    let cells: Vec<Vec<&str>> = report.rows.iter().map(|r| r.split(',').collect()).collect();
    let width = report.header.split(',').count();
    let numeric = |c: usize| !cells.is_empty() && cells.iter().all(|r| r.get(c).is_some_and(|v| v.parse::<f64>().is_ok()));
    let y = (0..width).rev().find(|&c| numeric(c)).unwrap_or(width - 1);
    let x = (0..width)
        .filter(|&c| c != y)
        .find(|&c| cells.iter().any(|r| r.get(c) != cells[0].get(c)))
        .unwrap_or(0);
    (x + 1, y + 1)
}

/// Worker-pool size: `NRS_THREADS` if set and positive, else rayon's default.
pub fn thread_count() -> Result<Option<usize>> {
    match std::env::var("NRS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::config(format!("NRS_THREADS must be a positive integer, got {v:?}"))),
            Ok(k) => Ok(Some(k)),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a pool capped by `NRS_THREADS`.
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = thread_count()? {
        b = b.num_threads(k);
    }
    let pool = b.build().map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Formats a float for CSV output with fixed precision.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.4}")
}
