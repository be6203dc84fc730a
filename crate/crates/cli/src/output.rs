//! Tabular artifacts and their CSV encoding.

use std::io::Write;

use cvrisk::combinatorics::{format_exact, to_f64};
use cvrisk::decomposition::Term;
use cvrisk::ExactValue;

use crate::error::CliResult;

/// A header and string-valued rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a column, in row order.
    pub fn values(&self, name: &str) -> Vec<&str> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| r[i].as_str()).collect(),
            None => Vec::new(),
        }
    }

    /// RFC 4180 encoding preceded by a `#` comment line.
    pub fn to_csv(&self, comment: &str) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        write!(out, "# {comment}\r\n")?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Comment line recording the tool version, command and seed.
pub fn provenance(command: &str, seed: u64) -> String {
    format!("cvrisk {} command={command} seed={seed}", env!("CARGO_PKG_VERSION"))
}

pub fn exact_cells(x: &ExactValue) -> [String; 2] {
    [format_exact(x), float(to_f64(x))]
}

pub fn float(x: f64) -> String {
    format!("{x}")
}

/// `[value, value_f64, std_error]`; estimates leave the exact cell empty.
pub fn term_cells(t: &Term) -> [String; 3] {
    match t {
        Term::Exact(v) => {
            let [a, b] = exact_cells(v);
            [a, b, "0".into()]
        }
        Term::Estimate(e) => [String::new(), float(e.value), float(e.std_error)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cvrisk::combinatorics::rational;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1/2".into(), "x,y".into()]);
        let s = String::from_utf8(t.to_csv("c").unwrap()).unwrap();
        assert_eq!(s, "# c\r\na,b\r\n1/2,\"x,y\"\r\n");
        assert_eq!(t.values("b"), vec!["x,y"]);
        assert_eq!(exact_cells(&rational(1, 8)), ["1/8".to_string(), "0.125".to_string()]);
    }
}
