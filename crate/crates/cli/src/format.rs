//! Output file formats.
//!
//! Time series and tables are UTF-8 CSV preceded by a block of `# ` comment
//! lines holding the resolved configuration. Matrices (density matrices,
//! Wigner grids) use a line-oriented text format:
//!
//! ```text
//! # comment lines
//! @matrix <name> <real|complex> <rows> <cols>
//! @axis rows <label> <v0> <v1> ...
//! @axis cols <label> <v0> <v1> ...
//! <row 0: entries separated by single spaces; complex entries as re,im>
//! ```
//!
//! Floats are written in shortest round-trip exponent form (`1.5e-3`), so
//! parsing a file and writing it again reproduces it byte for byte.

use nalgebra::DMatrix;
use ppcat_core::C64;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn flag(b: bool) -> Self {
        Cell::Int(b as i64)
    }

    pub fn opt(v: Option<f64>) -> Self {
        Cell::Float(v.unwrap_or(f64::NAN))
    }

    fn render(&self) -> String {
        match self {
            Cell::Float(x) => float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn parse(s: &str) -> Cell {
        if let Ok(i) = s.parse::<i64>() {
            return Cell::Int(i);
        }
        match s.parse::<f64>() {
            Ok(x) if float(x) == s => Cell::Float(x),
            _ => Cell::Text(s.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

pub fn float(x: f64) -> String {
    format!("{x:e}")
}

fn write_comments(out: &mut String, comments: &[String]) {
    for line in comments {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
}

/// Splits the leading comment block from the body.
fn split_comments(text: &str) -> (Vec<String>, &str) {
    let mut comments = Vec::new();
    let mut rest = text;
    while rest.starts_with('#') {
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        let body = &line[1..];
        comments.push(body.strip_prefix(' ').unwrap_or(body).to_string());
        rest = tail;
    }
    (comments, rest)
}

/// A commented CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(comments: Vec<String>, columns: Vec<String>) -> Self {
        Self {
            comments,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        write_comments(&mut out, &self.comments);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output"));
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let (comments, body) = split_comments(text);
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns: Vec<String> = r
            .headers()
            .map_err(|e| CliError::Format(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::Format(e.to_string()))?;
            rows.push(rec.iter().map(Cell::parse).collect());
        }
        Ok(Self {
            comments,
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// Column-wise builder for [`Table`].
#[derive(Default)]
pub struct Columns {
    names: Vec<String>,
    values: Vec<Vec<Cell>>,
}

impl Columns {
    pub fn add(&mut self, name: impl Into<String>, values: Vec<Cell>) {
        self.names.push(name.into());
        self.values.push(values);
    }

    pub fn add_f64(&mut self, name: impl Into<String>, values: impl IntoIterator<Item = f64>) {
        self.add(name, values.into_iter().map(Cell::Float).collect());
    }

    /// Pads every column with `NaN` to the longest length.
    pub fn into_table(self, comments: Vec<String>) -> Table {
        let len = self.values.iter().map(Vec::len).max().unwrap_or(0);
        let rows = (0..len)
            .map(|i| {
                self.values
                    .iter()
                    .map(|c| c.get(i).cloned().unwrap_or(Cell::Float(f64::NAN)))
                    .collect()
            })
            .collect();
        Table {
            comments,
            columns: self.names,
            rows,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixData {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

impl MatrixData {
    fn shape(&self) -> (usize, usize) {
        match self {
            MatrixData::Real(m) => m.shape(),
            MatrixData::Complex(m) => m.shape(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub comments: Vec<String>,
    pub name: String,
    pub data: MatrixData,
    pub rows_axis: Option<Axis>,
    pub cols_axis: Option<Axis>,
}

impl MatrixFile {
    pub fn render(&self) -> String {
        let mut out = String::new();
        write_comments(&mut out, &self.comments);
        let (nr, nc) = self.data.shape();
        let kind = match self.data {
            MatrixData::Real(_) => "real",
            MatrixData::Complex(_) => "complex",
        };
        out.push_str(&format!("@matrix {} {kind} {nr} {nc}\n", self.name));
        for (which, axis) in [("rows", &self.rows_axis), ("cols", &self.cols_axis)] {
            if let Some(a) = axis {
                out.push_str(&format!("@axis {which} {}", a.label));
                for v in &a.values {
                    out.push(' ');
                    out.push_str(&float(*v));
                }
                out.push('\n');
            }
        }
        for r in 0..nr {
            let line: Vec<String> = (0..nc)
                .map(|c| match &self.data {
                    MatrixData::Real(m) => float(m[(r, c)]),
                    MatrixData::Complex(m) => format!("{},{}", float(m[(r, c)].re), float(m[(r, c)].im)),
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |msg: &str| CliError::Format(msg.to_string());
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::Format(format!("bad number `{s}`")))
        };
        let (comments, body) = split_comments(text);
        let mut lines = body.lines().peekable();
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing @matrix line"))?
            .split(' ')
            .collect();
        if head.len() != 5 || head[0] != "@matrix" {
            return Err(bad("expected `@matrix <name> <kind> <rows> <cols>`"));
        }
        let nr: usize = head[3].parse().map_err(|_| bad("bad row count"))?;
        let nc: usize = head[4].parse().map_err(|_| bad("bad column count"))?;
        let (mut rows_axis, mut cols_axis) = (None, None);
        while let Some(line) = lines.next_if(|l| l.starts_with("@axis")) {
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() < 3 {
                return Err(bad("malformed @axis line"));
            }
            let axis = Axis {
                label: parts[2].to_string(),
                values: parts[3..].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            };
            match parts[1] {
                "rows" => rows_axis = Some(axis),
                "cols" => cols_axis = Some(axis),
                _ => return Err(bad("@axis must name rows or cols")),
            }
        }
        let cells: Vec<Vec<&str>> = lines.map(|l| l.split(' ').collect()).collect();
        if cells.len() != nr || cells.iter().any(|r| r.len() != nc) {
            return Err(bad("matrix body does not match the declared shape"));
        }
        let data = match head[2] {
            "real" => MatrixData::Real(DMatrix::from_row_iterator(
                nr,
                nc,
                cells.iter().flatten().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?,
            )),
            "complex" => {
                let values = cells
                    .iter()
                    .flatten()
                    .map(|s| {
                        let (re, im) = s.split_once(',').ok_or_else(|| bad("complex entries are `re,im`"))?;
                        Ok(C64::new(num(re)?, num(im)?))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                MatrixData::Complex(DMatrix::from_row_iterator(nr, nc, values))
            }
            _ => return Err(bad("matrix kind must be real or complex")),
        };
        Ok(Self {
            comments,
            name: head[1].to_string(),
            data,
            rows_axis,
            cols_axis,
        })
    }
}
