//! Strict, versioned CSV for benchmark artifacts.
//!
//! Layout of an artifact:
//!
//! ```text
//! # groundhog-csv v1 stability
//! solver,seed,log10_h_err,log10_f_err
//! fhf,17,-12.25,-9.5
//! ```
//!
//! The dialect is deliberately narrow: comma separator, `.` decimal point,
//! no quoting, no escapes, one schema comment line, one header row.
//! Writers reject fields that would need quoting; the parser rejects
//! anything outside the dialect with the offending line number.

use std::path::Path;

use crate::error::{Error, Result};

/// First line of every artifact, followed by the table name.
pub const SCHEMA_PREFIX: &str = "# groundhog-csv v1";

/// Missing/not-applicable numeric fields are written as this token.
pub const NA: &str = "na";

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "table/column name '{name}' must be non-empty [A-Za-z0-9_-]"
        )))
    }
}

fn check_field(field: &str) -> Result<()> {
    if field.contains([',', '"', '\n', '\r']) || field.starts_with('#') {
        return Err(Error::InvalidInput(format!(
            "field '{field}' needs quoting, which this dialect forbids"
        )));
    }
    Ok(())
}

/// An in-memory CSV artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    /// Table name carried on the schema line.
    pub name: String,
    /// Column names.
    pub columns: Vec<String>,
    /// Data rows; every row has `columns.len()` fields.
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    /// Creates an empty table, validating the name and column names.
    pub fn new(name: &str, columns: &[&str]) -> Result<Self> {
        check_name(name)?;
        if columns.is_empty() {
            return Err(Error::InvalidInput("a table needs at least one column".into()));
        }
        for c in columns {
            check_name(c)?;
        }
        Ok(Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        })
    }

    /// Appends a row, validating arity and the no-quoting rule.
    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} fields, table '{}' has {} columns",
                row.len(),
                self.name,
                self.columns.len()
            )));
        }
        for f in &row {
            check_field(f)?;
        }
        self.rows.push(row);
        Ok(())
    }

    /// Renders the artifact (schema line, header, rows, trailing newline).
    pub fn render(&self) -> String {
        let mut out = format!("{SCHEMA_PREFIX} {}\n{}\n", self.name, self.columns.join(","));
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes the rendered artifact to a file.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    /// Parses an artifact, enforcing the dialect strictly. Error messages
    /// carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.split('\n').enumerate();

        let (_, schema) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, msg: "empty input".into() })?;
        let name = schema
            .strip_prefix(SCHEMA_PREFIX)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("expected schema line '{SCHEMA_PREFIX} <name>', got '{schema}'"),
            })?;
        check_name(name).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;

        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 2, msg: "missing header row".into() })?;
        let columns: Vec<String> = header.split(',').map(|c| c.to_string()).collect();
        for c in &columns {
            check_name(c).map_err(|e| Error::Parse { line: 2, msg: e.to_string() })?;
        }

        let mut table = CsvTable { name: name.to_string(), columns, rows: Vec::new() };
        let mut ended = false;
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.is_empty() {
                // Only legal as the result of the trailing newline.
                ended = true;
                continue;
            }
            if ended {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "blank line in the middle of the table".into(),
                });
            }
            let row: Vec<String> = line.split(',').map(|f| f.to_string()).collect();
            if row.len() != table.columns.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!(
                        "row has {} fields, header has {}",
                        row.len(),
                        table.columns.len()
                    ),
                });
            }
            for f in &row {
                check_field(f).map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    /// Reads and parses an artifact file.
    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Extracts a column as `f64`, decoding [`NA`] as NaN.
    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column(name)
            .ok_or_else(|| Error::Data(format!("table '{}' has no column '{name}'", self.name)))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let f = &row[idx];
                if f == NA {
                    return Ok(f64::NAN);
                }
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 3,
                    msg: format!("column '{name}': '{f}' is not a number"),
                })
            })
            .collect()
    }
}

/// Formats a float for CSV output; NaN becomes [`NA`]. `Display` for `f64`
/// produces the shortest digits that parse back to the identical bits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        NA.to_string()
    } else {
        format!("{v}")
    }
}

/// Formats an optional float; `None` becomes [`NA`].
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => NA.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsvTable {
        let mut t = CsvTable::new("speed", &["solver", "mean_us"]).unwrap();
        t.push_row(vec!["fhf".into(), fmt_f64(12.625)]).unwrap();
        t.push_row(vec!["hf".into(), fmt_f64(3.5)]).unwrap();
        t
    }

    #[test]
    fn render_parse_round_trip() {
        let t = sample();
        let text = t.render();
        assert!(text.starts_with("# groundhog-csv v1 speed\nsolver,mean_us\n"));
        assert_eq!(CsvTable::parse(&text).unwrap(), t);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let vals = [1.0 / 3.0, -0.0, 2.5e-17, 1.7976931348608e308, 123456789.000001];
        for v in vals {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "na");
    }

    #[test]
    fn rejects_fields_needing_quotes() {
        let mut t = sample();
        assert!(t.push_row(vec!["a,b".into(), "1".into()]).is_err());
        assert!(t.push_row(vec!["a\"b".into(), "1".into()]).is_err());
        assert!(t.push_row(vec!["#c".into(), "1".into()]).is_err());
        assert!(t.push_row(vec!["ok".into()]).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match CsvTable::parse("nonsense\n") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        let bad_arity = "# groundhog-csv v1 t\na,b\n1,2\n3\n";
        match CsvTable::parse(bad_arity) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        let inner_blank = "# groundhog-csv v1 t\na,b\n\n1,2\n";
        match CsvTable::parse(inner_blank) {
            Err(Error::Parse { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn f64_column_decodes_na() {
        let mut t = CsvTable::new("noise", &["sigma", "e_t"]).unwrap();
        t.push_row(vec!["0.5".into(), NA.into()]).unwrap();
        let col = t.f64_column("e_t").unwrap();
        assert!(col[0].is_nan());
        assert!(t.f64_column("missing").is_err());
    }
}
