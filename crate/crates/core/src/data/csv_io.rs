use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::table::{Column, DataTable, FeatureSpec, RoleHint, Source, Split};
use crate::error::{Error, Result};

/// Header plus untyped records, as read from one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCsv {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

/// Reads RFC 4180 CSV (comma separated, optional double quotes). The first
/// record is the header. Rows whose width differs from the header are errors.
pub fn parse_csv<R: Read>(reader: R) -> Result<RawCsv> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header: Vec<String> = match records.next() {
        Some(rec) => rec?.iter().map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::Empty("csv file has no header".into())),
    };
    if header.iter().all(String::is_empty) {
        return Err(Error::Empty("csv header is empty".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {}",
                i + 2,
                rec.len(),
                header.len()
            )));
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(RawCsv { header, records: out })
}

pub fn load_csv(path: impl AsRef<Path>, role_hint: RoleHint) -> Result<DataTable> {
    load_csv_files(&[(path.as_ref(), role_hint)])
}

pub fn read_csv_str(text: &str, role_hint: RoleHint) -> Result<DataTable> {
    from_raw(vec![(parse_csv(text.as_bytes())?, role_hint)])
}

/// Loads one or more files sharing a header. With a single `All` file the rows
/// are staged as train until `split_random` runs; otherwise every file names
/// its own partition.
pub fn load_csv_files(files: &[(&Path, RoleHint)]) -> Result<DataTable> {
    let mut parts = Vec::with_capacity(files.len());
    for (path, hint) in files {
        let file = File::open(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        parts.push((parse_csv(BufReader::new(file))?, *hint));
    }
    from_raw(parts)
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Builds a typed table from raw parts. A column is numeric iff every
/// non-empty cell, across all parts, parses as a finite real.
pub fn from_raw(parts: Vec<(RawCsv, RoleHint)>) -> Result<DataTable> {
    let Some((first, _)) = parts.first() else {
        return Err(Error::Empty("no csv input".into()));
    };
    let header = first.header.clone();
    for (p, _) in &parts[1..] {
        if p.header != header {
            return Err(Error::Csv("csv files have different headers".into()));
        }
    }
    let all = parts.iter().any(|(_, h)| *h == RoleHint::All);
    if all && parts.len() > 1 {
        return Err(Error::InvalidInput("a file with role `all` cannot be combined with other files".into()));
    }
    let source = if all { Source::SingleFileSplit } else { Source::SeparateFiles };

    let mut split = Vec::new();
    for (p, hint) in &parts {
        let s = match hint {
            RoleHint::All | RoleHint::Train => Split::Train,
            RoleHint::Validation => Split::Validation,
            RoleHint::Test => Split::Test,
        };
        split.extend(std::iter::repeat_n(s, p.records.len()));
    }
    let cells = |j: usize| parts.iter().flat_map(move |(p, _)| p.records.iter().map(move |r| r[j].trim()));

    let mut schema = Vec::with_capacity(header.len());
    let mut columns = Vec::with_capacity(header.len());
    for (j, name) in header.iter().enumerate() {
        let numeric = cells(j).filter(|c| !c.is_empty()).all(|c| parse_number(c).is_some());
        if numeric {
            schema.push(FeatureSpec::numeric(name.clone()));
            columns.push(Column::Numeric(cells(j).map(parse_number).collect()));
        } else {
            let mut categories: Vec<String> = Vec::new();
            let mut codes = Vec::with_capacity(split.len());
            for c in cells(j) {
                if c.is_empty() {
                    codes.push(None);
                    continue;
                }
                let idx = match categories.iter().position(|k| k == c) {
                    Some(i) => i,
                    None => {
                        categories.push(c.to_string());
                        categories.len() - 1
                    }
                };
                codes.push(Some(idx as u32));
            }
            schema.push(FeatureSpec::categorical(name.clone(), categories));
            columns.push(Column::Categorical(codes));
        }
    }
    DataTable::new(schema, columns, split, source)
}

impl DataTable {
    /// Writes the table back out as CSV (header plus one line per row).
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.schema.iter().map(|f| f.name.as_str())).unwrap();
        for r in 0..self.n_rows() {
            let rec: Vec<String> =
                (0..self.schema.len()).map(|j| self.cell_text(j, r).unwrap_or_default()).collect();
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}
