//! A small typed column store with Parquet and JSON Lines persistence.
//!
//! Every table this crate persists (nodes, edges, metrics) goes through here,
//! so both formats share one column contract.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use parquet::basic::{ConvertedType, Type as PhysicalType};
use parquet::data_type::{ByteArray, ByteArrayType, DoubleType, Int64Type};
use parquet::file::properties::WriterProperties;
use parquet::file::reader::{FileReader, SerializedFileReader};
use parquet::file::writer::SerializedFileWriter;
use parquet::record::Field;
use parquet::schema::types::Type;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("column {name:?} has kind {found:?}, expected {expected:?}")]
    WrongKind {
        name: String,
        expected: ColumnKind,
        found: ColumnKind,
    },
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error("unsupported parquet column {0:?}")]
    UnsupportedColumn(String),
    #[error("column {0:?} has a different row count")]
    Ragged(String),
    #[error(transparent)]
    Parquet(#[from] parquet::errors::ParquetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Int64,
    Float64,
    Utf8,
    Int64List,
    Utf8List,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    Utf8(Vec<String>),
    Int64List(Vec<Vec<i64>>),
    Utf8List(Vec<Vec<String>>),
}

impl ColumnData {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Self::Int64(_) => ColumnKind::Int64,
            Self::Float64(_) => ColumnKind::Float64,
            Self::Utf8(_) => ColumnKind::Utf8,
            Self::Int64List(_) => ColumnKind::Int64List,
            Self::Utf8List(_) => ColumnKind::Utf8List,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Int64(v) => v.len(),
            Self::Float64(v) => v.len(),
            Self::Utf8(v) => v.len(),
            Self::Int64List(v) => v.len(),
            Self::Utf8List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn empty(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Int64 => Self::Int64(Vec::new()),
            ColumnKind::Float64 => Self::Float64(Vec::new()),
            ColumnKind::Utf8 => Self::Utf8(Vec::new()),
            ColumnKind::Int64List => Self::Int64List(Vec::new()),
            ColumnKind::Utf8List => Self::Utf8List(Vec::new()),
        }
    }

    fn json(&self, row: usize) -> Value {
        match self {
            Self::Int64(v) => Value::from(v[row]),
            Self::Float64(v) => Value::from(v[row]),
            Self::Utf8(v) => Value::from(v[row].as_str()),
            Self::Int64List(v) => Value::from(v[row].clone()),
            Self::Utf8List(v) => Value::from(v[row].clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Self {
        Self {
            name: name.into(),
            data,
        }
    }
}

/// Persistence format for tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Parquet,
    Jsonl,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Parquet => "parquet",
            Self::Jsonl => "jsonl",
        }
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parquet" => Ok(Self::Parquet),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown table format {other:?} (expected parquet or jsonl)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { columns }
    }

    pub fn num_rows(&self) -> usize {
        self.columns.first().map(|c| c.data.len()).unwrap_or(0)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Checks that each named column exists with the given kind. A table
    /// without rows and without columns (an empty JSON Lines file) passes.
    pub fn check_schema(&self, schema: &[(&str, ColumnKind)]) -> Result<(), TableError> {
        if self.columns.is_empty() {
            return Ok(());
        }
        for &(name, kind) in schema {
            let col = self
                .column(name)
                .ok_or_else(|| TableError::MissingColumn(name.to_string()))?;
            if col.data.kind() != kind {
                return Err(TableError::WrongKind {
                    name: name.to_string(),
                    expected: kind,
                    found: col.data.kind(),
                });
            }
        }
        Ok(())
    }

    /// Fixes up kinds that JSON inference cannot decide: list columns whose
    /// rows are all empty, and integral values in float columns.
    pub fn conform(&mut self, schema: &[(&str, ColumnKind)]) {
        for &(name, kind) in schema {
            let Some(col) = self.columns.iter_mut().find(|c| c.name == name) else {
                continue;
            };
            let n = col.data.len();
            match (&col.data, kind) {
                (ColumnData::Utf8List(v), ColumnKind::Int64List) if v.iter().all(Vec::is_empty) => {
                    col.data = ColumnData::Int64List(vec![Vec::new(); n]);
                }
                (ColumnData::Int64List(v), ColumnKind::Utf8List) if v.iter().all(Vec::is_empty) => {
                    col.data = ColumnData::Utf8List(vec![Vec::new(); n]);
                }
                (ColumnData::Int64(v), ColumnKind::Float64) => {
                    col.data = ColumnData::Float64(v.iter().map(|&x| x as f64).collect());
                }
                _ => {}
            }
        }
    }

    fn typed<'a, T>(
        &'a self,
        name: &str,
        kind: ColumnKind,
        pick: impl Fn(&'a ColumnData) -> Option<&'a [T]>,
    ) -> Result<&'a [T], TableError> {
        match self.column(name) {
            None if self.columns.is_empty() => Ok(&[]),
            None => Err(TableError::MissingColumn(name.to_string())),
            Some(c) => pick(&c.data).ok_or(TableError::WrongKind {
                name: name.to_string(),
                expected: kind,
                found: c.data.kind(),
            }),
        }
    }

    pub fn int64(&self, name: &str) -> Result<&[i64], TableError> {
        self.typed(name, ColumnKind::Int64, |d| match d {
            ColumnData::Int64(v) => Some(v.as_slice()),
            _ => None,
        })
    }

    pub fn float64(&self, name: &str) -> Result<&[f64], TableError> {
        self.typed(name, ColumnKind::Float64, |d| match d {
            ColumnData::Float64(v) => Some(v.as_slice()),
            _ => None,
        })
    }

    pub fn utf8(&self, name: &str) -> Result<&[String], TableError> {
        self.typed(name, ColumnKind::Utf8, |d| match d {
            ColumnData::Utf8(v) => Some(v.as_slice()),
            _ => None,
        })
    }

    pub fn int64_list(&self, name: &str) -> Result<&[Vec<i64>], TableError> {
        self.typed(name, ColumnKind::Int64List, |d| match d {
            ColumnData::Int64List(v) => Some(v.as_slice()),
            _ => None,
        })
    }

    pub fn utf8_list(&self, name: &str) -> Result<&[Vec<String>], TableError> {
        self.typed(name, ColumnKind::Utf8List, |d| match d {
            ColumnData::Utf8List(v) => Some(v.as_slice()),
            _ => None,
        })
    }

    fn check_rows(&self) -> Result<(), TableError> {
        let n = self.num_rows();
        match self.columns.iter().find(|c| c.data.len() != n) {
            Some(c) => Err(TableError::Ragged(c.name.clone())),
            None => Ok(()),
        }
    }

    pub fn write(&self, path: &Path, format: TableFormat) -> Result<(), TableError> {
        match format {
            TableFormat::Parquet => self.write_parquet(path),
            TableFormat::Jsonl => self.write_jsonl(path),
        }
    }

    pub fn read(path: &Path, format: TableFormat) -> Result<Self, TableError> {
        match format {
            TableFormat::Parquet => Self::read_parquet(path),
            TableFormat::Jsonl => Self::read_jsonl(path),
        }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), TableError> {
        self.check_rows()?;
        let mut out = BufWriter::new(File::create(path)?);
        for row in 0..self.num_rows() {
            let obj: Map<String, Value> = self
                .columns
                .iter()
                .map(|c| (c.name.clone(), c.data.json(row)))
                .collect();
            serde_json::to_writer(&mut out, &Value::Object(obj)).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads JSON Lines. Column order follows the first row; kinds are
    /// inferred from the values (integers, floats, strings, arrays).
    pub fn read_jsonl(path: &Path) -> Result<Self, TableError> {
        let reader = BufReader::new(File::open(path)?);
        let mut columns: Vec<Column> = Vec::new();
        let mut rows = 0usize;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| TableError::Jsonl { line: i + 1, message };
            let value: Value = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            let Value::Object(obj) = value else {
                return Err(err("row is not an object".into()));
            };
            if rows == 0 {
                for (name, v) in &obj {
                    columns.push(Column::new(name.clone(), ColumnData::empty(infer_kind(v))));
                }
            }
            if obj.len() != columns.len() {
                return Err(err(format!("expected {} fields, found {}", columns.len(), obj.len())));
            }
            for col in &mut columns {
                let v = obj
                    .get(&col.name)
                    .ok_or_else(|| err(format!("missing field {:?}", col.name)))?;
                push_json(&mut col.data, v).map_err(|m| err(format!("{}: {m}", col.name)))?;
            }
            rows += 1;
        }
        Ok(Self { columns })
    }

    fn parquet_schema(&self) -> Type {
        use parquet::basic::Repetition;
        let fields = self
            .columns
            .iter()
            .map(|c| {
                let prim = |ty: PhysicalType, name: &str, conv: ConvertedType, rep: Repetition| {
                    Arc::new(
                        Type::primitive_type_builder(name, ty)
                            .with_repetition(rep)
                            .with_converted_type(conv)
                            .build()
                            .expect("valid primitive"),
                    )
                };
                let list = |elem: Arc<Type>| {
                    let inner = Type::group_type_builder("list")
                        .with_repetition(Repetition::REPEATED)
                        .with_fields(vec![elem])
                        .build()
                        .expect("valid list group");
                    Arc::new(
                        Type::group_type_builder(&c.name)
                            .with_repetition(Repetition::REQUIRED)
                            .with_converted_type(ConvertedType::LIST)
                            .with_fields(vec![Arc::new(inner)])
                            .build()
                            .expect("valid list"),
                    )
                };
                match c.data.kind() {
                    ColumnKind::Int64 => prim(PhysicalType::INT64, &c.name, ConvertedType::NONE, Repetition::REQUIRED),
                    ColumnKind::Float64 => prim(PhysicalType::DOUBLE, &c.name, ConvertedType::NONE, Repetition::REQUIRED),
                    ColumnKind::Utf8 => prim(PhysicalType::BYTE_ARRAY, &c.name, ConvertedType::UTF8, Repetition::REQUIRED),
                    ColumnKind::Int64List => list(prim(
                        PhysicalType::INT64,
                        "element",
                        ConvertedType::NONE,
                        Repetition::REQUIRED,
                    )),
                    ColumnKind::Utf8List => list(prim(
                        PhysicalType::BYTE_ARRAY,
                        "element",
                        ConvertedType::UTF8,
                        Repetition::REQUIRED,
                    )),
                }
            })
            .collect();
        Type::group_type_builder("schema")
            .with_fields(fields)
            .build()
            .expect("valid schema")
    }

    pub fn write_parquet(&self, path: &Path) -> Result<(), TableError> {
        self.check_rows()?;
        let props = Arc::new(WriterProperties::builder().build());
        let mut writer = SerializedFileWriter::new(File::create(path)?, Arc::new(self.parquet_schema()), props)?;
        let mut rg = writer.next_row_group()?;
        for col in &self.columns {
            let mut cw = rg.next_column()?.expect("one writer per schema column");
            match &col.data {
                ColumnData::Int64(v) => {
                    cw.typed::<Int64Type>().write_batch(v, None, None)?;
                }
                ColumnData::Float64(v) => {
                    cw.typed::<DoubleType>().write_batch(v, None, None)?;
                }
                ColumnData::Utf8(v) => {
                    let vals: Vec<ByteArray> = v.iter().map(|s| ByteArray::from(s.as_str())).collect();
                    cw.typed::<ByteArrayType>().write_batch(&vals, None, None)?;
                }
                ColumnData::Int64List(v) => {
                    let (vals, def, rep) = list_levels(v, |x| *x);
                    cw.typed::<Int64Type>().write_batch(&vals, Some(&def), Some(&rep))?;
                }
                ColumnData::Utf8List(v) => {
                    let (vals, def, rep) = list_levels(v, |s| ByteArray::from(s.as_str()));
                    cw.typed::<ByteArrayType>().write_batch(&vals, Some(&def), Some(&rep))?;
                }
            }
            cw.close()?;
        }
        rg.close()?;
        writer.close()?;
        Ok(())
    }

    pub fn read_parquet(path: &Path) -> Result<Self, TableError> {
        let reader = SerializedFileReader::new(File::open(path)?)?;
        let schema = reader.metadata().file_metadata().schema().clone();
        let mut columns = schema
            .get_fields()
            .iter()
            .map(|f| Ok(Column::new(f.name(), ColumnData::empty(parquet_kind(f)?))))
            .collect::<Result<Vec<_>, TableError>>()?;
        for row in reader.get_row_iter(None)? {
            let row = row?;
            for ((_, field), col) in row.get_column_iter().zip(columns.iter_mut()) {
                push_field(&mut col.data, field).ok_or_else(|| TableError::UnsupportedColumn(col.name.clone()))?;
            }
        }
        Ok(Self { columns })
    }
}

fn list_levels<T, U>(rows: &[Vec<T>], conv: impl Fn(&T) -> U) -> (Vec<U>, Vec<i16>, Vec<i16>) {
    let mut vals = Vec::new();
    let mut def = Vec::new();
    let mut rep = Vec::new();
    for row in rows {
        if row.is_empty() {
            def.push(0);
            rep.push(0);
        }
        for (i, x) in row.iter().enumerate() {
            vals.push(conv(x));
            def.push(1);
            rep.push(if i == 0 { 0 } else { 1 });
        }
    }
    (vals, def, rep)
}

fn parquet_kind(f: &Type) -> Result<ColumnKind, TableError> {
    let unsupported = || TableError::UnsupportedColumn(f.name().to_string());
    if f.is_primitive() {
        return match f.get_physical_type() {
            PhysicalType::INT64 => Ok(ColumnKind::Int64),
            PhysicalType::DOUBLE => Ok(ColumnKind::Float64),
            PhysicalType::BYTE_ARRAY => Ok(ColumnKind::Utf8),
            _ => Err(unsupported()),
        };
    }
    let elem = f
        .get_fields()
        .first()
        .and_then(|g| g.get_fields().first())
        .filter(|e| e.is_primitive())
        .ok_or_else(unsupported)?;
    match elem.get_physical_type() {
        PhysicalType::INT64 => Ok(ColumnKind::Int64List),
        PhysicalType::BYTE_ARRAY => Ok(ColumnKind::Utf8List),
        _ => Err(unsupported()),
    }
}

fn push_field(data: &mut ColumnData, field: &Field) -> Option<()> {
    match (data, field) {
        (ColumnData::Int64(v), Field::Long(x)) => v.push(*x),
        (ColumnData::Float64(v), Field::Double(x)) => v.push(*x),
        (ColumnData::Utf8(v), Field::Str(s)) => v.push(s.clone()),
        (ColumnData::Int64List(v), Field::ListInternal(l)) => v.push(
            l.elements()
                .iter()
                .map(|e| match e {
                    Field::Long(x) => Some(*x),
                    _ => None,
                })
                .collect::<Option<_>>()?,
        ),
        (ColumnData::Utf8List(v), Field::ListInternal(l)) => v.push(
            l.elements()
                .iter()
                .map(|e| match e {
                    Field::Str(s) => Some(s.clone()),
                    _ => None,
                })
                .collect::<Option<_>>()?,
        ),
        _ => return None,
    }
    Some(())
}

fn infer_kind(v: &Value) -> ColumnKind {
    match v {
        Value::Number(n) if n.is_i64() || n.is_u64() => ColumnKind::Int64,
        Value::Number(_) => ColumnKind::Float64,
        Value::Array(items) => match items.first() {
            Some(Value::Number(_)) => ColumnKind::Int64List,
            _ => ColumnKind::Utf8List,
        },
        _ => ColumnKind::Utf8,
    }
}

fn push_json(data: &mut ColumnData, v: &Value) -> Result<(), String> {
    let bad = || format!("unexpected value {v}");
    match data {
        ColumnData::Int64(out) => out.push(v.as_i64().ok_or_else(bad)?),
        ColumnData::Float64(out) => out.push(v.as_f64().ok_or_else(bad)?),
        ColumnData::Utf8(out) => out.push(v.as_str().ok_or_else(bad)?.to_string()),
        ColumnData::Int64List(out) => out.push(
            v.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|x| x.as_i64().ok_or_else(bad))
                .collect::<Result<_, _>>()?,
        ),
        ColumnData::Utf8List(out) => {
            let items = v.as_array().ok_or_else(bad)?;
            // An all-empty prefix may have been inferred as strings.
            if let Some(Value::Number(_)) = items.first() {
                if out.iter().all(|r| r.is_empty()) {
                    let n = out.len();
                    *data = ColumnData::Int64List(vec![Vec::new(); n]);
                    return push_json(data, v);
                }
            }
            out.push(
                items
                    .iter()
                    .map(|x| x.as_str().map(str::to_string).ok_or_else(bad))
                    .collect::<Result<_, _>>()?,
            )
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        Table::new(vec![
            Column::new("a", ColumnData::Int64(vec![1, -2, 3])),
            Column::new("b", ColumnData::Float64(vec![0.0, 2.5, 1e9])),
            Column::new("c", ColumnData::Utf8(vec!["x".into(), "".into(), "line\nbreak".into()])),
            Column::new("d", ColumnData::Int64List(vec![vec![], vec![1, 2], vec![3]])),
            Column::new(
                "e",
                ColumnData::Utf8List(vec![vec!["p".into()], vec![], vec!["q".into(), "r".into()]]),
            ),
        ])
    }

    #[test]
    fn parquet_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.parquet");
        sample().write_parquet(&p).unwrap();
        assert_eq!(Table::read_parquet(&p).unwrap(), sample());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        sample().write_jsonl(&p).unwrap();
        assert_eq!(Table::read_jsonl(&p).unwrap(), sample());
    }

    #[test]
    fn empty_parquet_keeps_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.parquet");
        let t = Table::new(vec![
            Column::new("a", ColumnData::Int64(vec![])),
            Column::new("d", ColumnData::Utf8List(vec![])),
        ]);
        t.write_parquet(&p).unwrap();
        assert_eq!(Table::read_parquet(&p).unwrap(), t);
    }

    #[test]
    fn missing_column_reported() {
        let t = sample();
        let err = t
            .check_schema(&[("a", ColumnKind::Int64), ("zz", ColumnKind::Utf8)])
            .unwrap_err();
        assert!(matches!(err, TableError::MissingColumn(ref c) if c == "zz"));
        assert!(matches!(t.utf8("a"), Err(TableError::WrongKind { .. })));
    }

    #[test]
    fn parquet_output_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.parquet"), dir.path().join("2.parquet"));
        sample().write_parquet(&p1).unwrap();
        sample().write_parquet(&p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
}
