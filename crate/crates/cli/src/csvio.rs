//! CSV files: a `#` metadata line, a column header row, then data rows,
//! comma separated with LF endings.

use std::io::Write;
use std::path::Path;

use cavity_readout::{AngularFrequency, FrequencyGrid, Spectrum};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Frequency column name and the value column name.
pub const FREQ_COLUMN: &str = "omega_L_MHz";
pub const VALUE_COLUMN: &str = "S_value";

/// `x` with 12 significant digits, e.g. `1.23456789012e-03`.
pub fn sci(x: f64) -> String {
    let s = format!("{:.11e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn mhz6(x: f64) -> String {
    format!("{:.6}", x)
}

/// Metadata line: tool version, method, params hash and extra `key=value` pairs.
pub fn metadata_line(method: &str, params_hash: &str, extra: &[(&str, String)]) -> String {
    let mut line = format!("# cavity-readout {VERSION} method={method} params={params_hash}");
    for (k, v) in extra {
        line.push_str(&format!(" {k}={v}"));
    }
    line
}

/// Accumulates rows in memory so output is assembled in a fixed order.
pub struct Table {
    metadata: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(metadata: String, columns: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(columns).expect("in-memory write");
        Self { metadata, writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        let body = self.writer.into_inner().expect("in-memory flush");
        let mut out = Vec::with_capacity(self.metadata.len() + 1 + body.len());
        out.extend_from_slice(self.metadata.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(&body);
        out
    }
}

/// The two-column spectrum table.
pub fn spectrum_table(spectrum: &Spectrum, metadata: String) -> Table {
    let mut t = Table::new(metadata, &[FREQ_COLUMN, VALUE_COLUMN]);
    for (w, s) in spectrum.iter() {
        t.row([mhz6(AngularFrequency::from_rad_per_us(w).mhz()), sci(s)]);
    }
    t
}

/// Writes to `path`, or to stdout when `None`.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// A parsed CSV: comment lines, header and string rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `index` parsed as numbers.
    pub fn numbers(&self, index: usize, path: &Path) -> CliResult<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[index].trim().parse::<f64>().map_err(|_| CliError::Input {
                    path: path.to_path_buf(),
                    message: format!(
                        "data row {}: `{}` in column `{}` is not a number",
                        i + 1,
                        r[index],
                        self.header[index]
                    ),
                })
            })
            .collect()
    }
}

pub fn read_table(path: &Path) -> CliResult<RawTable> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_table(&text).map_err(|message| CliError::Input {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_table(text: &str) -> Result<RawTable, String> {
    let comments: Vec<String> = text
        .lines()
        .filter(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        Some(r) => r
            .map_err(|e| e.to_string())?
            .iter()
            .map(|s| s.trim().to_string())
            .collect(),
        None => return Err("no header row".into()),
    };
    let mut rows = Vec::new();
    for (i, r) in records.enumerate() {
        let r = r.map_err(|e| e.to_string())?;
        if r.len() != header.len() {
            return Err(format!(
                "data row {} has {} columns, header has {}",
                i + 1,
                r.len(),
                header.len()
            ));
        }
        rows.push(r.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    Ok(RawTable {
        comments,
        header,
        rows,
    })
}

/// Reads a spectrum CSV back into a uniform grid and raw values (which may
/// be negative for noisy data).
pub fn read_spectrum(path: &Path) -> CliResult<(FrequencyGrid, Vec<f64>)> {
    let table = read_table(path)?;
    let input = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    let fc = table
        .column(FREQ_COLUMN)
        .ok_or_else(|| input(format!("missing column `{FREQ_COLUMN}`")))?;
    let vc = table
        .column(VALUE_COLUMN)
        .ok_or_else(|| input(format!("missing column `{VALUE_COLUMN}`")))?;
    let freqs = table.numbers(fc, path)?;
    let values = table.numbers(vc, path)?;
    if freqs.len() < 2 {
        return Err(input("need at least two rows".into()));
    }
    let n = freqs.len();
    let (first, last) = (freqs[0], freqs[n - 1]);
    let step = (last - first) / (n - 1) as f64;
    if !(step > 0.0) {
        return Err(input("frequencies must increase".into()));
    }
    // rows carry 6 decimals, so allow rounding on top of a tiny relative slack
    let slack = 1e-6 + 1e-4 * step;
    for (i, f) in freqs.iter().enumerate() {
        if (f - (first + i as f64 * step)).abs() > slack {
            return Err(input(format!(
                "row {} breaks the uniform frequency spacing",
                i + 1
            )));
        }
    }
    let grid = FrequencyGrid::new(
        AngularFrequency::from_mhz(first),
        AngularFrequency::from_mhz(last),
        n,
    )?;
    Ok((grid, values))
}
