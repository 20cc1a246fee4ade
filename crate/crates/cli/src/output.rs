use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Header-first CSV sink over a file or standard output.
pub struct Table {
    out: Box<dyn Write>,
}

impl Table {
    pub fn create(path: Option<&Path>, header: &[&str]) -> io::Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        let mut t = Table { out };
        t.row(header.iter().map(|h| h.to_string()))?;
        Ok(t)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) -> io::Result<()> {
        let line: Vec<String> = cells.into_iter().collect();
        writeln!(self.out, "{}", line.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Shortest decimal that parses back to the same f64.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Missing values are empty cells.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
