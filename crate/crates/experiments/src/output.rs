//! Artifact files of one run: CSV tables, JSON documents and SVG figures.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::Value;

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Leading columns of every CSV row.
pub const ECHO_HEADER: [&str; 5] = ["kappa", "m0", "mu", "N", "seed"];

#[derive(Clone, Copy, Debug)]
pub struct Echo {
    pub kappa: f64,
    pub m0: f64,
    pub n: usize,
    pub seed: u64,
}

impl Echo {
    fn cells(&self, mu: f64) -> Vec<String> {
        vec![num(self.kappa), num(self.m0), num(mu), self.n.to_string(), self.seed.to_string()]
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    /// Table whose header starts with [`ECHO_HEADER`], followed by `columns`.
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: ECHO_HEADER.iter().chain(columns).map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, echo: &Echo, mu: f64, cells: Vec<String>) {
        let mut row = echo.cells(mu);
        row.extend(cells);
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Output directory plus the list of files written into it.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: BTreeSet<String>,
    tables: Vec<(String, Table)>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: BTreeSet::new(),
            tables: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> Vec<String> {
        self.written.iter().cloned().collect()
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.insert(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Registers a table to be written by [`Artifacts::flush_tables`], also after a failure.
    pub fn table(&mut self, name: &str, columns: &[&str]) -> usize {
        self.tables.push((name.to_string(), Table::new(columns)));
        self.tables.len() - 1
    }

    pub fn rows(&mut self, id: usize) -> &mut Table {
        &mut self.tables[id].1
    }

    pub fn flush_tables(&mut self) -> io::Result<()> {
        let tables = std::mem::take(&mut self.tables);
        for (name, t) in &tables {
            self.write_bytes(name, &t.to_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, 5e-324, 1.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn rows_echo_the_run() {
        let mut t = Table::new(&["F"]);
        let echo = Echo { kappa: 1.0, m0: 0.4, n: 64, seed: 7 };
        t.push(&echo, 0.5, vec![num(0.41)]);
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(text, "kappa,m0,mu,N,seed,F\n1.0,0.4,0.5,64,7,0.41\n");
    }
}
