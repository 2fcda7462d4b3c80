//! Column tables and their CSV / JSON encodings.
//!
//! Both encodings carry the same metadata record. In CSV it is TOML, one
//! `# `-prefixed line per TOML line, ahead of the header row; in JSON it is the
//! `meta` object next to column-oriented `data`. Floats are written as the
//! shortest decimal that round-trips.

use beatmap::ModelParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::options::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Float(Vec<Option<f64>>),
    Int(Vec<Option<i64>>),
    Bool(Vec<Option<bool>>),
    Text(Vec<Option<String>>),
}

impl Column {
    pub fn floats(v: impl IntoIterator<Item = f64>) -> Self {
        Column::Float(v.into_iter().map(Some).collect())
    }

    pub fn ints<T: TryInto<i64>>(v: impl IntoIterator<Item = T>) -> Self {
        Column::Int(v.into_iter().map(|x| x.try_into().ok()).collect())
    }

    pub fn text<S: Into<String>>(v: impl IntoIterator<Item = S>) -> Self {
        Column::Text(v.into_iter().map(|s| Some(s.into())).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Int(v) => v.len(),
            Column::Bool(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::Float(v) => v[row].map(|x| format!("{x:?}")).unwrap_or_default(),
            Column::Int(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            Column::Bool(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            Column::Text(v) => v[row].clone().unwrap_or_default(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Column::Float(v) => v.iter().map(|x| x.map_or(Value::Null, Value::from)).collect(),
            Column::Int(v) => v.iter().map(|x| x.map_or(Value::Null, Value::from)).collect(),
            Column::Bool(v) => v.iter().map(|x| x.map_or(Value::Null, Value::from)).collect(),
            Column::Text(v) => v.iter().map(|x| x.clone().map_or(Value::Null, Value::from)).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, column: Column) -> Self {
        if let Some(first) = self.columns.first() {
            assert_eq!(first.len(), column.len(), "column `{name}` has the wrong length");
        }
        self.names.push(name.to_string());
        self.columns.push(column);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }
}

/// Everything needed to recompute an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Where the value of tau came from: flag, config, preset or default.
    pub tau_source: String,
    pub tau_note: String,
    /// Why a run stopped early, when it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    pub params: ModelParams,
    pub options: Value,
}

pub const TAU_NOTE: &str = "tau is not fixed by the rule strengths; 1000 ms is the calibrated default";

pub fn render(format: Format, meta: &Meta, table: &Table) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => render_csv(meta, table),
        Format::Json => render_json(meta, table),
    }
}

fn render_csv(meta: &Meta, table: &Table) -> Result<Vec<u8>, CliError> {
    let header = toml::to_string(meta).map_err(|e| CliError::Internal(format!("metadata: {e}")))?;
    let mut out = Vec::new();
    for line in header.lines() {
        if line.is_empty() {
            out.extend_from_slice(b"#\n");
        } else {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let internal = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(&table.names).map_err(internal)?;
    for row in 0..table.rows() {
        w.write_record(table.columns.iter().map(|c| c.cell(row))).map_err(internal)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

fn render_json(meta: &Meta, table: &Table) -> Result<Vec<u8>, CliError> {
    let mut data = Map::new();
    for (name, col) in table.names.iter().zip(&table.columns) {
        data.insert(name.clone(), col.json());
    }
    let doc = serde_json::json!({ "meta": meta, "data": data });
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Recover the metadata record and the encoding of an output file.
pub fn read_meta(bytes: &[u8]) -> Result<(Meta, Format), CliError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CliError::Config("output file is not UTF-8".into()))?;
    let bad = |e: String| CliError::Config(format!("unreadable metadata header: {e}"));
    if text.trim_start().starts_with('{') {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let meta = doc.get_mut("meta").map(Value::take).ok_or_else(|| bad("no `meta` key".into()))?;
        return Ok((serde_json::from_value(meta).map_err(|e| bad(e.to_string()))?, Format::Json));
    }
    let header: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").unwrap_or(&l[1..]))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        });
    if header.is_empty() {
        return Err(bad("no `#` lines before the header row".into()));
    }
    Ok((toml::from_str(&header).map_err(|e| bad(e.to_string()))?, Format::Csv))
}
