//! CSV ingestion with file/line/field diagnostics.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use protosel::{kernel_to_distance, DissimilarityMatrix, FeatureTable, KernelMatrix};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    Features,
    Dissimilarity,
    Kernel,
}

/// Raw CSV cells plus the source line of each row.
#[derive(Debug)]
pub struct Table {
    pub path: PathBuf,
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<String>>,
    pub lines: Vec<u64>,
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

/// A column given by header name or 0-based index.
pub fn resolve_column(table: &Table, spec: &str) -> CliResult<usize> {
    if let Some(h) = &table.header {
        if let Some(k) = h.iter().position(|c| c == spec) {
            return Ok(k);
        }
    }
    let width = table.rows.first().map_or(0, Vec::len);
    match spec.parse::<usize>() {
        Ok(k) if k < width => Ok(k),
        Ok(k) => Err(CliError::Usage(format!(
            "{}: column index {k} out of range ({width} columns)",
            table.path.display()
        ))),
        Err(_) => Err(CliError::Usage(format!(
            "{}: no column named '{spec}'",
            table.path.display()
        ))),
    }
}

/// Reads a CSV file. The first row is a header when any of its cells outside
/// `label_hint` is not a number, or when the label column is named.
pub fn read_table(path: &Path, label_hint: Option<&str>) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        lines.push(record.position().map_or(0, |p| p.line()));
        rows.push(record.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", path.display())));
    }
    let label_index = label_hint.and_then(|s| s.parse::<usize>().ok());
    let named_label = label_hint.is_some() && label_index.is_none();
    let first = &rows[0];
    let header = named_label
        || first
            .iter()
            .enumerate()
            .any(|(k, cell)| Some(k) != label_index && !is_number(cell));
    let header = if header {
        lines.remove(0);
        Some(rows.remove(0))
    } else {
        None
    };
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: header but no data rows", path.display())));
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
        lines,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::Data(format!("{}: {e}", path.display())),
        _ => match e.position() {
            Some(p) => CliError::Data(format!("{}:{}: {e}", path.display(), p.line())),
            None => CliError::Data(format!("{}: {e}", path.display())),
        },
    }
}

impl Table {
    fn field_name(&self, k: usize) -> String {
        match &self.header {
            Some(h) => format!("'{}'", h[k]),
            None => format!("column {k}"),
        }
    }

    /// Parses the given columns of every row as finite numbers.
    pub fn numeric(&self, cols: &[usize]) -> CliResult<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .zip(&self.lines)
            .map(|(row, line)| {
                cols.iter()
                    .map(|&k| {
                        let cell = &row[k];
                        match cell.parse::<f64>() {
                            Ok(v) if v.is_finite() => Ok(v),
                            _ => Err(CliError::Data(format!(
                                "{}:{line}: field {}: '{cell}' is not a finite number",
                                self.path.display(),
                                self.field_name(k)
                            ))),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn column(&self, k: usize) -> Vec<String> {
        self.rows.iter().map(|r| r[k].clone()).collect()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }
}

/// Numeric content of an input file.
#[derive(Debug, Clone)]
pub enum Values {
    Features(FeatureTable),
    /// Dissimilarities, given directly or derived from a kernel.
    Matrix(DissimilarityMatrix),
}

#[derive(Debug)]
pub struct Input {
    pub labels: Option<Vec<String>>,
    pub values: Values,
}

/// Loads a file of the given kind, splitting off the label column when given.
pub fn load(path: &Path, kind: InputKind, labels_col: Option<&str>) -> CliResult<Input> {
    let table = read_table(path, labels_col)?;
    let label_k = labels_col.map(|s| resolve_column(&table, s)).transpose()?;
    let cols: Vec<usize> = (0..table.width()).filter(|&k| Some(k) != label_k).collect();
    if cols.is_empty() {
        return Err(CliError::Data(format!("{}: no value columns", path.display())));
    }
    let rows = table.numeric(&cols)?;
    let labels = label_k.map(|k| table.column(k));
    let wrap = |e: protosel::Error| CliError::Data(format!("{}: {e}", path.display()));
    let values = match kind {
        InputKind::Features => Values::Features(FeatureTable::from_rows(&rows).map_err(wrap)?),
        InputKind::Dissimilarity => Values::Matrix(DissimilarityMatrix::from_rows(&rows).map_err(wrap)?),
        InputKind::Kernel => {
            let k = KernelMatrix::from_rows(&rows).map_err(wrap)?;
            Values::Matrix(kernel_to_distance(&k).map_err(wrap)?)
        }
    };
    Ok(Input { labels, values })
}
