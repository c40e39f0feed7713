use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

/// One output row: a flat JSON object.
pub type Record = Map<String, Value>;

/// CSV layout: (header, record field) pairs.
pub type Columns = &'static [(&'static str, &'static str)];

pub const DEFAULT_COLUMNS: Columns = &[
    ("op", "op"),
    ("matrix_id", "matrix_id"),
    ("p", "p"),
    ("k", "k"),
    ("value", "value"),
    ("status", "status"),
    ("seed", "seed"),
];

pub struct Sink {
    inner: Box<dyn Write>,
    format: Format,
    columns: Columns,
    timing: bool,
    wrote_header: bool,
}

impl Sink {
    pub fn open(out: Option<&Path>, format: Format, columns: Columns, timing: bool) -> io::Result<Self> {
        let inner: Box<dyn Write> = match out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self {
            inner,
            format,
            columns,
            timing,
            wrote_header: false,
        })
    }

    pub fn write(&mut self, record: &Record) -> io::Result<()> {
        match self.format {
            Format::Jsonl => {
                serde_json::to_writer(&mut self.inner, record)?;
                writeln!(self.inner)
            }
            Format::Csv => {
                if !self.wrote_header {
                    let mut header: Vec<&str> = self.columns.iter().map(|c| c.0).collect();
                    if self.timing {
                        header.push("ms");
                    }
                    writeln!(self.inner, "{}", header.join(","))?;
                    self.wrote_header = true;
                }
                let mut fields: Vec<String> = self.columns.iter().map(|c| csv_field(record.get(c.1))).collect();
                if self.timing {
                    fields.push(csv_field(record.get("ms")));
                }
                writeln!(self.inner, "{}", fields.join(","))
            }
        }
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn csv_field(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
        Some(Value::Array(items)) => items.iter().map(|x| csv_field(Some(x))).collect::<Vec<_>>().join(" "),
        Some(other) => other.to_string(),
    }
}

/// JSON number for finite values, null otherwise.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
