//! Table ingestion and CSV output.
//!
//! A table file has a header line whose first field is empty followed by
//! the column labels; every other line holds a row label and one count per
//! column.

use std::fmt;
use std::path::Path;

use rcassoc::{fixtures, ContingencyTable};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    /// 1-based field number; 0 when the problem concerns the whole line.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug)]
pub enum InputError {
    Io(String),
    Parse(ParseError),
    Table(rcassoc::Error),
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Io(m) => f.write_str(m),
            InputError::Parse(e) => e.fmt(f),
            InputError::Table(e) => e.fmt(f),
        }
    }
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> InputError {
    InputError::Parse(ParseError { line, column, message: message.into() })
}

/// Parses the CSV table format from text.
pub fn parse_table_str(text: &str, strict: bool) -> Result<ContingencyTable, InputError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(parse_error(1, 0, e.to_string())),
        None => return Err(parse_error(1, 0, "empty input; expected a header line")),
    };
    if header.len() < 2 {
        return Err(parse_error(1, 0, "header needs an empty first field and column labels"));
    }
    if !header[0].trim().is_empty() {
        return Err(parse_error(1, 1, format!("first header field must be empty, found {:?}", &header[0])));
    }
    let col_labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if let Some(k) = col_labels.iter().position(|l| l.is_empty()) {
        return Err(parse_error(1, k + 2, "empty column label"));
    }
    let mut row_labels = Vec::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != col_labels.len() + 1 {
            return Err(parse_error(
                line,
                0,
                format!("expected {} fields, found {}", col_labels.len() + 1, record.len()),
            ));
        }
        let label = record[0].trim();
        if label.is_empty() {
            return Err(parse_error(line, 1, "empty row label"));
        }
        let mut cells = Vec::with_capacity(col_labels.len());
        for (k, field) in record.iter().enumerate().skip(1) {
            let v: f64 =
                field.trim().parse().map_err(|_| parse_error(line, k + 1, format!("not a number: {field:?}")))?;
            cells.push(v);
        }
        row_labels.push(label.to_string());
        rows.push(cells);
    }
    let table = if strict {
        ContingencyTable::new_strict(row_labels, col_labels, rows)
    } else {
        ContingencyTable::new(row_labels, col_labels, rows)
    };
    table.map_err(InputError::Table)
}

/// Reads a table file.
pub fn parse_table_csv(path: &Path, strict: bool) -> Result<ContingencyTable, InputError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| InputError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_table_str(&text, strict)
}

/// Bundled fixture names take precedence over file paths.
pub fn resolve_table(source: &str, strict: bool) -> Result<ContingencyTable, InputError> {
    match fixtures::by_name(source) {
        Some(t) => Ok(t),
        None => parse_table_csv(Path::new(source), strict),
    }
}

fn format_count(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Writes a table in the same CSV format that [`parse_table_str`] reads.
pub fn table_to_csv(t: &ContingencyTable) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    let header: Vec<&str> = std::iter::once("").chain(t.col_labels().iter().map(String::as_str)).collect();
    w.write_record(&header).expect("in-memory write");
    for (i, label) in t.row_labels().iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(t.row(i).iter().map(|&v| format_count(v)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = fixtures::table7();
        let back = parse_table_str(&table_to_csv(&t), true).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn fixture_names() {
        assert_eq!(resolve_table("table7", false).unwrap().get(0, 0), 2644.0);
        assert_eq!(resolve_table("table5", false).unwrap().row(0), &[526.0, 1222.0, 1707.0, 307.0, 102.0]);
    }

    #[test]
    fn malformed_header() {
        match parse_table_str("x,a,b\nr,1,2\ns,3,4\n", false) {
            Err(InputError::Parse(e)) => assert_eq!((e.line, e.column), (1, 1)),
            other => panic!("{other:?}"),
        }
        match parse_table_str("", false) {
            Err(InputError::Parse(e)) => assert_eq!(e.line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cell_location() {
        match parse_table_str(",a,b\nr,1,2\ns,3,x\n", false) {
            Err(InputError::Parse(e)) => assert_eq!((e.line, e.column), (3, 3)),
            other => panic!("{other:?}"),
        }
        match parse_table_str(",a,b\nr,1,2\ns,3\n", false) {
            Err(InputError::Parse(e)) => assert_eq!(e.line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_table_str(",a,b\nr,1,\"1,000\"\ns,3,4\n", false), Err(InputError::Parse(_))));
    }

    #[test]
    fn strict_mode() {
        assert!(matches!(parse_table_str(",a,b\nr,1,2.5\ns,3,4\n", true), Err(InputError::Table(_))));
        assert!(parse_table_str(",a,b\nr,1,2.5\ns,3,4\n", false).is_ok());
    }
}
