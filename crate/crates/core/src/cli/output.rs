use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use nalgebra::DMatrix;
use serde::Serialize;

use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Write to `path`, or to stdout when absent.
pub fn write_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let wrap = |e: io::Error| match path {
        Some(p) => CliError::Input(format!("{}: {e}", p.display())),
        None => CliError::Input(format!("stdout: {e}")),
    };
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(wrap)?);
            body(&mut w).map_err(wrap)?;
            w.flush().map_err(wrap)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).map_err(wrap)?;
            w.flush().map_err(wrap)
        }
    }
}

pub fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

/// `name[i][j]` for an `rows × cols` block, row-major.
pub fn matrix_header(name: &str, rows: usize, cols: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("{name}[{i}][{j}]")))
        .collect()
}

pub fn matrix_row(m: &DMatrix<f64>) -> Vec<String> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)].to_string()))
        .collect()
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// One line on stderr per measured residual.
pub fn report(check: &str, residual: f64, threshold: f64, pass: bool) {
    eprintln!(
        "{check}: residual {residual:e} threshold {threshold:e} {}",
        if pass { "PASS" } else { "FAIL" }
    );
}
