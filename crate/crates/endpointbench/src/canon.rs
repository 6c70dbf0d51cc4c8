//! Canonical text forms: 9-significant-digit numbers, fixed-column CSV
//! tables with LF line endings, and a typed row reader.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use endpointbench_core::{Decoding, EndpointId, Precision};

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Decimal text with at most 9 significant digits. Non-finite values print
/// as `inf`, `-inf` and `nan`; negative zero prints as `0`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("exponent form always parses");
    format!("{rounded}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Rounds through the canonical text form.
pub fn round(x: f64) -> f64 {
    parse_f64(&num(x)).expect("canonical numbers parse")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

pub const ID_COLUMNS: [&str; 6] = ["provider", "model", "sku", "precision", "decoding", "region"];

pub fn id_cells(id: &EndpointId) -> [String; 6] {
    [
        id.provider.clone(),
        id.model.clone(),
        id.sku.clone(),
        id.precision.to_string(),
        id.decoding.to_string(),
        id.region.clone(),
    ]
}

/// A header plus string rows, written with `,` separators and `\n` endings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table {
            headers: headers.into_iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_id<S: AsRef<str>>(prefix: &str, rest: impl IntoIterator<Item = S>) -> Self {
        let mut headers: Vec<String> = ID_COLUMNS.iter().map(|c| format!("{prefix}{c}")).collect();
        headers.extend(rest.into_iter().map(|h| h.as_ref().to_string()));
        Table { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len(), "row width for {:?}", self.headers);
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
        fs::write(path, self.to_bytes()).map_err(Error::io(path))
    }

    /// Fixed-width rendering for terminals.
    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let _ = write!(s, "{c:<w$}");
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&mut out, &self.headers);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule);
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }
}

/// A parsed CSV file whose cells are looked up by header name.
#[derive(Debug)]
pub struct CsvFile {
    pub path: PathBuf,
    headers: csv::StringRecord,
    records: Vec<csv::StringRecord>,
}

impl CsvFile {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        Self::parse(path, &bytes)
    }

    pub fn parse(path: &Path, bytes: &[u8]) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::ReaderBuilder::new().from_reader(bytes);
        let headers = r.headers().map_err(csv_err)?.clone();
        let records = r.records().collect::<Result<Vec<_>, _>>().map_err(csv_err)?;
        Ok(CsvFile {
            path: path.to_path_buf(),
            headers,
            records,
        })
    }

    pub fn require(&self, columns: &[&str]) -> Result<()> {
        for c in columns {
            if !self.headers.iter().any(|h| h == *c) {
                return Err(Error::format(&self.path, format!("missing column `{c}`")));
            }
        }
        Ok(())
    }

    pub fn has_column(&self, column: &str) -> bool {
        self.headers.iter().any(|h| h == column)
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.records.iter().enumerate().map(move |(i, rec)| Row {
            file: self,
            // Header is line 1.
            line: i as u64 + 2,
            rec,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub struct Row<'a> {
    file: &'a CsvFile,
    pub line: u64,
    rec: &'a csv::StringRecord,
}

impl<'a> Row<'a> {
    pub fn error(&self, column: &str, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.file.path.clone(),
            line: self.line,
            column: column.to_string(),
            msg: msg.into(),
        }
    }

    pub fn str(&self, column: &str) -> Result<&'a str> {
        let i = self
            .file
            .headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| self.error(column, "no such column"))?;
        self.rec.get(i).ok_or_else(|| self.error(column, "row is too short"))
    }

    pub fn parse<T: FromStr>(&self, column: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.str(column)?;
        s.parse().map_err(|e: T::Err| self.error(column, format!("`{s}`: {e}")))
    }

    pub fn f64(&self, column: &str) -> Result<f64> {
        let s = self.str(column)?;
        parse_f64(s).ok_or_else(|| self.error(column, format!("`{s}` is not a number")))
    }

    pub fn opt_f64(&self, column: &str) -> Result<Option<f64>> {
        match self.str(column)? {
            "" => Ok(None),
            _ => self.f64(column).map(Some),
        }
    }

    pub fn opt_parse<T: FromStr>(&self, column: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.str(column)? {
            "" => Ok(None),
            _ => self.parse(column).map(Some),
        }
    }

    pub fn opt_str(&self, column: &str) -> Result<Option<String>> {
        Ok(Some(self.str(column)?).filter(|s| !s.is_empty()).map(str::to_string))
    }

    pub fn bool(&self, column: &str) -> Result<bool> {
        match self.str(column)? {
            "true" => Ok(true),
            "false" => Ok(false),
            s => Err(self.error(column, format!("`{s}` is not true/false"))),
        }
    }

    pub fn endpoint_id(&self, prefix: &str) -> Result<EndpointId> {
        let col = |c: &str| format!("{prefix}{c}");
        let precision: Precision = self.parse(&col("precision"))?;
        let decoding: Decoding = self.parse(&col("decoding"))?;
        let id = EndpointId::new(
            self.str(&col("provider"))?,
            self.str(&col("model"))?,
            self.str(&col("sku"))?,
            precision,
            decoding,
            self.str(&col("region"))?,
        );
        id.validate().map_err(|e| self.error(&col("provider"), e.to_string()))?;
        Ok(id)
    }
}

/// `a;b;c` list of canonical numbers.
pub fn join_nums(values: &[f64]) -> String {
    values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

pub fn split_nums(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(';').map(parse_f64).collect()
}
