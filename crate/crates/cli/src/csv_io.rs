//! Panel CSV files: one row per series, one column per time point.
//!
//! Lines starting with `#` are comments. Values are written with 17
//! significant digits, so a write/read round trip is exact.

use std::io::{Read, Write};

use factor_order::{validate_panel, Error as CoreError, Panel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}, row {row}, column {column}: cannot parse {text:?} as a number")]
    Parse {
        line: u64,
        row: usize,
        column: usize,
        text: String,
    },
    /// The cells parsed but the panel is invalid. Row and column numbers in
    /// the message are 1-based.
    #[error("{message}")]
    Invalid { source: CoreError, message: String },
}

/// Reads a panel. With `header`, the first non-comment line is skipped.
pub fn read_panel<R: Read>(reader: R, header: bool) -> Result<Panel, InputError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .enumerate()
            .map(|(col, text)| {
                text.parse::<f64>().map_err(|_| InputError::Parse {
                    line,
                    row: row + 1,
                    column: col + 1,
                    text: text.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
        lines.push(line);
    }

    validate_panel(&rows).map_err(|source| {
        let line_of = |row: usize| lines.get(row).copied().unwrap_or(0);
        let message = match &source {
            CoreError::NonFinite { row, col } => format!(
                "line {}, row {}, column {}: value is not finite",
                line_of(*row),
                row + 1,
                col + 1
            ),
            CoreError::RaggedRows {
                row,
                expected,
                found,
            } => format!(
                "line {}, row {}: expected {expected} columns, found {found}",
                line_of(*row),
                row + 1
            ),
            other => other.to_string(),
        };
        InputError::Invalid { source, message }
    })
}

/// Writes `panel` with each entry of `comments` as a leading `# ` line.
pub fn write_panel<W: Write>(
    mut writer: W,
    panel: &Panel,
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(writer, "# {c}")?;
    }
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for row in panel.rows() {
        wtr.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    wtr.flush()
}
