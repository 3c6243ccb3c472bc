//! Dataset files and index snapshots.
//!
//! Snapshot layout, all integers little-endian:
//!
//! ```text
//! "SLSH" | u32 version | u64 header length | header (JSON) | payload | u32 crc32
//! ```
//!
//! The checksum covers every byte before it. The header carries the structure
//! spec, build options and index parameters; the payload carries the records
//! and the sorted tables. Lifted points are recomputed on load, which is exact
//! because lifting is a pure function of the stored records.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::center::{plan_level, CenterConfig, CenterStructure, Level, LevelState};
use crate::ellipsoid::{EllipsoidIndex, EllipsoidPlan, EuclideanEllipsoidQuery};
use crate::error::{Error, Location, Result};
use crate::family::{FamilyDescriptor, Single};
use crate::index::{IndexParams, IpAverage, PointSimilarity, SlshIndex, Table, VerifiedIndex};
use crate::lift::{
    angular_family, avg_euclid_slsh_params, AverageAngularIndex, LiftParams, ShrinkLiftIndex,
};
use crate::metrics::{BitVector, Point, S2p, SetQuery, SimilarityAggregation, TokenSet};
use crate::slsh::{CentroidSlsh, ExhaustiveSlsh, RepeatSlsh, WeightedExhaustiveSlsh};
use crate::structure::{
    dense_points, plan_spec_params, AnyBase, BuildOptions, ElementKind, Engine, QueryInput, Record,
    Structure, StructureSpec,
};

pub const MAGIC: &[u8; 4] = b"SLSH";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Fvecs,
}

impl DataFormat {
    /// `.fvecs` and `.bin` files are binary; everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("fvecs") | Some("bin") => DataFormat::Fvecs,
            _ => DataFormat::Csv,
        }
    }
}

/// Parsed dataset: records of one kind and one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub kind: ElementKind,
    /// Coordinates for dense and bit records, universe size for token sets.
    pub dim: usize,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn parse_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    match format {
        DataFormat::Csv => parse_csv(BufReader::new(fs::File::open(path)?)),
        DataFormat::Fvecs => {
            let mut buf = Vec::new();
            fs::File::open(path)?.read_to_end(&mut buf)?;
            parse_fvecs(&buf)
        }
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        location: Location::Line(line),
        reason: reason.into(),
    }
}

#[derive(Default)]
struct CsvHeader {
    kind: Option<ElementKind>,
    dim: Option<usize>,
    count: Option<usize>,
    universe: Option<u64>,
}

/// Reads `# key=value ...` header comments. Unknown keys are ignored so
/// files can carry free-form comments.
fn read_header_line(text: &str, line: usize, h: &mut CsvHeader) -> Result<()> {
    for part in text.split_whitespace() {
        let Some((key, value)) = part.split_once('=') else {
            continue;
        };
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| parse_err(line, format!("bad header value `{part}`")))
        };
        match key {
            "kind" => {
                h.kind = Some(match value {
                    "dense" => ElementKind::Dense,
                    "bits" => ElementKind::Bits,
                    "tokens" => ElementKind::Tokens,
                    _ => return Err(parse_err(line, format!("unknown element kind `{value}`"))),
                })
            }
            "dim" => h.dim = Some(num(value)? as usize),
            "count" => h.count = Some(num(value)? as usize),
            "universe" => h.universe = Some(num(value)?),
            _ => {}
        }
    }
    Ok(())
}

/// Parses a CSV dataset.
///
/// Rows are comma-separated. Dense rows hold decimals, bit rows hold `0`/`1`
/// (commas optional), token rows hold non-negative integers with `{}` for
/// the empty set. Optional `# kind=.. dim=.. count=.. universe=..` comment
/// lines declare the header; blank lines are skipped.
pub fn parse_csv<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut header = CsvHeader::default();
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            read_header_line(rest, line_no, &mut header)?;
            continue;
        }
        rows.push((line_no, t.to_string()));
    }
    let kind = header.kind.unwrap_or(ElementKind::Dense);
    let mut records = Vec::with_capacity(rows.len());
    let mut dim = header.dim;
    let mut token_rows: Vec<(usize, Vec<u64>)> = Vec::new();
    for (line, row) in &rows {
        let line = *line;
        match kind {
            ElementKind::Dense => {
                let coords =
                    row.split(',')
                        .map(|f| {
                            let v: f64 = f.trim().parse().map_err(|_| {
                                parse_err(line, format!("bad number `{}`", f.trim()))
                            })?;
                            if !v.is_finite() {
                                return Err(parse_err(line, "non-finite value"));
                            }
                            Ok(v)
                        })
                        .collect::<Result<Vec<_>>>()?;
                check_dim(&mut dim, coords.len(), line)?;
                records.push(Record::Dense(
                    Point::new(coords).map_err(|e| parse_err(line, e.to_string()))?,
                ));
            }
            ElementKind::Bits => {
                let bits = row
                    .chars()
                    .filter(|c| !c.is_whitespace() && *c != ',')
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(parse_err(line, format!("bad bit `{c}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                check_dim(&mut dim, bits.len(), line)?;
                records.push(Record::Bits(
                    BitVector::new(bits).map_err(|e| parse_err(line, e.to_string()))?,
                ));
            }
            ElementKind::Tokens => {
                let tokens = if row == "{}" {
                    Vec::new()
                } else {
                    row.split(',')
                        .map(|f| {
                            f.trim()
                                .parse::<u64>()
                                .map_err(|_| parse_err(line, format!("bad token `{}`", f.trim())))
                        })
                        .collect::<Result<Vec<_>>>()?
                };
                token_rows.push((line, tokens));
            }
        }
    }
    if kind == ElementKind::Tokens {
        let universe = match header.universe.or(header.dim.map(|d| d as u64)) {
            Some(u) => u,
            None => token_rows
                .iter()
                .flat_map(|(_, t)| t.iter().copied())
                .max()
                .map_or(1, |m| m + 1),
        };
        for (line, tokens) in token_rows {
            records.push(Record::Tokens(
                TokenSet::new(tokens, universe).map_err(|e| parse_err(line, e.to_string()))?,
            ));
        }
        dim = Some(universe as usize);
    }
    if let Some(count) = header.count {
        if count != records.len() {
            return Err(parse_err(
                rows.last().map_or(0, |r| r.0),
                format!("header declares {count} rows, found {}", records.len()),
            ));
        }
    }
    Ok(Dataset {
        kind,
        dim: dim.unwrap_or(0),
        records,
    })
}

fn check_dim(dim: &mut Option<usize>, got: usize, line: usize) -> Result<()> {
    match *dim {
        Some(d) if d != got => Err(parse_err(
            line,
            format!("row has dimension {got}, expected {d}"),
        )),
        Some(_) => Ok(()),
        None => {
            *dim = Some(got);
            Ok(())
        }
    }
}

/// Parses the binary vector format: per vector a little-endian `i32`
/// dimension followed by that many little-endian `f32` values.
pub fn parse_fvecs(bytes: &[u8]) -> Result<Dataset> {
    let err = |offset: usize, reason: String| Error::Parse {
        location: Location::Offset(offset as u64),
        reason,
    };
    let mut pos = 0;
    let mut dim = None;
    let mut records = Vec::new();
    while pos < bytes.len() {
        let start = pos;
        let head = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| err(start, "truncated dimension field".into()))?;
        let d = i32::from_le_bytes(head.try_into().expect("4 bytes"));
        if d <= 0 {
            return Err(err(start, format!("invalid dimension {d}")));
        }
        let d = d as usize;
        match dim {
            Some(expected) if expected != d => {
                return Err(err(
                    start,
                    format!("record has dimension {d}, expected {expected}"),
                ))
            }
            _ => dim = Some(d),
        }
        pos += 4;
        let body = bytes
            .get(pos..pos + 4 * d)
            .ok_or_else(|| err(start, "truncated record".into()))?;
        let coords = body
            .chunks_exact(4)
            .enumerate()
            .map(|(j, c)| {
                let v = f32::from_le_bytes(c.try_into().expect("4 bytes"));
                if v.is_finite() {
                    Ok(v as f64)
                } else {
                    Err(err(pos + 4 * j, "non-finite value".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        pos += 4 * d;
        records.push(Record::Dense(Point::new(coords)?));
    }
    Ok(Dataset {
        kind: ElementKind::Dense,
        dim: dim.unwrap_or(0),
        records,
    })
}

/// Writes dense points in the binary vector format (values rounded to `f32`).
pub fn write_fvecs<W: Write>(mut w: W, points: &[Point]) -> Result<()> {
    for p in points {
        w.write_all(&(p.dim() as i32).to_le_bytes())?;
        for &v in p.coords() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Writes a dataset as CSV with a header comment. Dense values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(mut w: W, data: &Dataset) -> Result<()> {
    let kind = match data.kind {
        ElementKind::Dense => "dense",
        ElementKind::Bits => "bits",
        ElementKind::Tokens => "tokens",
    };
    let size_key = if data.kind == ElementKind::Tokens {
        "universe"
    } else {
        "dim"
    };
    writeln!(
        w,
        "# kind={kind} {size_key}={} count={}",
        data.dim,
        data.len()
    )?;
    for r in &data.records {
        match r {
            Record::Dense(p) => {
                let row: Vec<String> = p.coords().iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Record::Bits(b) => {
                let row: String = b
                    .bits()
                    .iter()
                    .map(|&x| if x { '1' } else { '0' })
                    .collect();
                writeln!(w, "{row}")?;
            }
            Record::Tokens(t) => {
                if t.is_empty() {
                    writeln!(w, "{{}}")?;
                } else {
                    let row: Vec<String> = t.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{}", row.join(","))?;
                }
            }
        }
    }
    Ok(())
}

/// How to read records and whether queries are ellipsoids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryShape {
    pub kind: ElementKind,
    /// Universe for token records.
    pub universe: u64,
    pub ellipsoid: bool,
}

impl QueryShape {
    pub fn of(s: &Structure) -> Self {
        let universe = match s.spec() {
            StructureSpec::Lsh { base, .. }
            | StructureSpec::Lp { base, .. }
            | StructureSpec::Geometric { base, .. }
            | StructureSpec::WeightedGeometric { base, .. } => match base {
                crate::family::BaseDescriptor::MinHash { universe } => *universe,
                _ => 0,
            },
            _ => 0,
        };
        QueryShape {
            kind: s.spec().element_kind(),
            universe,
            ellipsoid: matches!(s.spec(), StructureSpec::Ellipsoid { .. }),
        }
    }
}

fn json_record(v: &Value, shape: &QueryShape) -> std::result::Result<Record, String> {
    match shape.kind {
        ElementKind::Dense => {
            let arr = v
                .as_array()
                .ok_or("dense point must be an array of numbers")?;
            let coords = arr
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| format!("bad coordinate {x}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Point::new(coords)
                .map(Record::Dense)
                .map_err(|e| e.to_string())
        }
        ElementKind::Bits => {
            let s = v
                .as_str()
                .ok_or("bit vector must be a string such as \"0110\"")?;
            BitVector::parse(s)
                .map(Record::Bits)
                .map_err(|e| e.to_string())
        }
        ElementKind::Tokens => {
            let arr = v
                .as_array()
                .ok_or("token set must be an array of integers")?;
            let toks = arr
                .iter()
                .map(|x| x.as_u64().ok_or_else(|| format!("bad token {x}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            TokenSet::new(toks, shape.universe)
                .map(Record::Tokens)
                .map_err(|e| e.to_string())
        }
    }
}

fn json_point(v: &Value) -> std::result::Result<Point, String> {
    json_record(
        v,
        &QueryShape {
            kind: ElementKind::Dense,
            universe: 0,
            ellipsoid: false,
        },
    )
    .map(|r| match r {
        Record::Dense(p) => p,
        _ => unreachable!("dense shape yields dense records"),
    })
}

/// Parses one query from JSON.
///
/// Set-queries are an array of elements or `{"points": [...]}`; ellipsoid
/// queries are `{"center": [...], "axes": [[...], ...]}` with `axes`
/// defaulting to the standard basis.
pub fn parse_query(v: &Value, shape: &QueryShape) -> std::result::Result<QueryInput, String> {
    if shape.ellipsoid {
        let center = json_point(v.get("center").ok_or("ellipsoid query needs \"center\"")?)?;
        let q = match v.get("axes") {
            Some(Value::Array(axes)) => {
                let axes = axes
                    .iter()
                    .map(json_point)
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                EuclideanEllipsoidQuery::new(center, axes)
            }
            Some(_) => return Err("\"axes\" must be an array of points".into()),
            None => EuclideanEllipsoidQuery::standard(center),
        };
        return q.map(QueryInput::Ellipsoid).map_err(|e| e.to_string());
    }
    let items = match v {
        Value::Array(items) => items,
        Value::Object(_) => v
            .get("points")
            .and_then(Value::as_array)
            .ok_or("set-query object needs a \"points\" array")?,
        _ => return Err("query must be an array or an object".into()),
    };
    let points = items
        .iter()
        .map(|x| json_record(x, shape))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    SetQuery::new(points)
        .map(QueryInput::Set)
        .map_err(|e| e.to_string())
}

/// Reads a JSON-lines query file; blank lines and `#` comments are skipped.
/// Returns `(line, query)` pairs.
pub fn parse_query_file<R: BufRead>(
    reader: R,
    shape: &QueryShape,
) -> Result<Vec<(usize, QueryInput)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: Value = serde_json::from_str(t).map_err(|e| parse_err(line_no, e.to_string()))?;
        out.push((
            line_no,
            parse_query(&v, shape).map_err(|e| parse_err(line_no, e))?,
        ));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    spec: StructureSpec,
    options: BuildOptions,
    n: usize,
    family: Option<FamilyDescriptor>,
    indexes: Vec<IndexParams>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Snapshot(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    /// A length, bounded by the bytes left so corrupt input cannot force
    /// huge allocations.
    fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(unit.max(1) as u64) > left {
            return Err(Error::Snapshot(format!(
                "length {n} exceeds remaining payload"
            )));
        }
        Ok(n as usize)
    }
    fn u64s(&mut self, unit_len: usize) -> Result<Vec<u64>> {
        let n = self.len(8 * unit_len.max(1))? * unit_len.max(1);
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn write_records(w: &mut Writer, records: &[Record]) {
    w.len(records.len());
    for r in records {
        match r {
            Record::Dense(p) => {
                w.u8(0);
                w.len(p.dim());
                for &v in p.coords() {
                    w.u64(v.to_bits());
                }
            }
            Record::Bits(b) => {
                w.u8(1);
                w.len(b.len());
                w.0.extend(b.bits().iter().map(|&x| x as u8));
            }
            Record::Tokens(t) => {
                w.u8(2);
                w.u64(t.universe());
                w.len(t.len());
                for tok in t.iter() {
                    w.u64(tok);
                }
            }
        }
    }
}

fn read_records(r: &mut Reader) -> Result<Vec<Record>> {
    let n = r.len(1)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let bad = |e: Error| Error::Snapshot(format!("record {i}: {e}"));
        let rec = match r.u8()? {
            0 => {
                let d = r.len(8)?;
                let coords = (0..d)
                    .map(|_| r.u64().map(f64::from_bits))
                    .collect::<Result<Vec<_>>>()?;
                Record::Dense(Point::new(coords).map_err(bad)?)
            }
            1 => {
                let d = r.len(1)?;
                let bits = r
                    .take(d)?
                    .iter()
                    .map(|&b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(Error::Snapshot(format!("record {i}: bad bit byte {b}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Record::Bits(BitVector::new(bits).map_err(bad)?)
            }
            2 => {
                let universe = r.u64()?;
                let m = r.len(8)?;
                let tokens = (0..m).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                Record::Tokens(TokenSet::new(tokens, universe).map_err(bad)?)
            }
            t => return Err(Error::Snapshot(format!("record {i}: unknown tag {t}"))),
        };
        out.push(rec);
    }
    Ok(out)
}

fn write_tables(w: &mut Writer, tables: &[Table]) {
    w.len(tables.len());
    for t in tables {
        w.len(t.keys.len());
        for &k in &t.keys {
            w.u64(k);
        }
        for &id in &t.ids {
            w.u32(id);
        }
        w.len(t.full.len());
        for &f in &t.full {
            w.u64(f);
        }
    }
}

fn read_tables(r: &mut Reader) -> Result<Vec<Table>> {
    let l = r.len(16)?;
    let mut tables = Vec::with_capacity(l);
    for _ in 0..l {
        let keys = r.u64s(1)?;
        let ids = (0..keys.len())
            .map(|_| r.u32())
            .collect::<Result<Vec<_>>>()?;
        let full = r.u64s(1)?;
        tables.push(Table { keys, ids, full });
    }
    Ok(tables)
}

fn engine_tables(engine: &Engine) -> Vec<&[Table]> {
    match engine {
        Engine::Lsh(v) => vec![v.index().tables()],
        Engine::Lp(v) => vec![v.index().tables()],
        Engine::Geometric(v) => vec![v.index().tables()],
        Engine::WeightedGeometric(v) => vec![v.index().tables()],
        Engine::Centroid(v) => vec![v.index().tables()],
        Engine::AverageAngular(v) => vec![v.index().tables()],
        Engine::AverageEuclidean(v) => vec![v.index().tables()],
        Engine::Ellipsoid(v) => vec![v.index().tables()],
        Engine::Center(v) => v
            .level_states()
            .iter()
            .filter_map(|l| match &l.state {
                LevelState::Built(e) => Some(e.index().tables()),
                LevelState::OverBudget { .. } => None,
            })
            .collect(),
    }
}

impl Structure {
    /// Serializes to the snapshot format. Equal structures give equal bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = SnapshotHeader {
            spec: self.spec.clone(),
            options: self.options,
            n: self.records.len(),
            family: self.family_descriptor(),
            indexes: self.index_params(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Snapshot(e.to_string()))?;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.len(json.len());
        w.0.extend_from_slice(&json);
        write_records(&mut w, &self.records);
        let tables = engine_tables(&self.engine);
        w.len(tables.len());
        for t in tables {
            write_tables(&mut w, t);
        }
        let crc = crc32fast::hash(&w.0);
        w.u32(crc);
        Ok(w.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Snapshot("missing SLSH magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::SnapshotVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < 12 {
            return Err(Error::Snapshot("truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::Snapshot("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 8 };
        let hlen = r.len(1)?;
        let header: SnapshotHeader = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| Error::Snapshot(format!("header: {e}")))?;
        let records = read_records(&mut r)?;
        if records.len() != header.n {
            return Err(Error::Snapshot("record count does not match header".into()));
        }
        let count = r.len(8)?;
        let mut tables = (0..count)
            .map(|_| read_tables(&mut r))
            .collect::<Result<Vec<_>>>()?;
        if r.pos != body.len() {
            return Err(Error::Snapshot("trailing bytes".into()));
        }
        if tables.len() != header.indexes.len() {
            return Err(Error::Snapshot("index count does not match header".into()));
        }
        let engine = restore_engine(&header, records.clone(), &mut tables)?;
        let structure = Structure {
            spec: header.spec,
            options: header.options,
            records,
            engine,
        };
        if structure.index_params() != header.indexes {
            return Err(Error::Snapshot(
                "stored parameters disagree with the rebuilt plan".into(),
            ));
        }
        Ok(structure)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn restore_engine(
    h: &SnapshotHeader,
    records: Vec<Record>,
    tables: &mut Vec<Vec<Table>>,
) -> Result<Engine> {
    let opts = &h.options;
    let config = opts.index;
    tables.reverse();
    let mut next_tables = || {
        tables
            .pop()
            .ok_or_else(|| Error::Snapshot("missing tables".into()))
    };
    let planned = plan_spec_params(&h.spec, records.len(), opts)?;
    let mut params = planned.into_iter();
    let mut next_params = || {
        params
            .next()
            .ok_or_else(|| Error::Snapshot("missing parameters".into()))
    };
    Ok(match &h.spec {
        StructureSpec::Lsh { base, .. } => {
            let b = AnyBase::from_descriptor(base)?;
            let kind = b.similarity_kind();
            let idx =
                SlshIndex::from_parts(Single(b), records, next_params()?, config, next_tables()?)?;
            Engine::Lsh(VerifiedIndex::new(idx, PointSimilarity(kind)))
        }
        StructureSpec::Lp { base, p, .. } => {
            let b = AnyBase::from_descriptor(base)?;
            let objective = S2p::Similarity {
                kernel: b.similarity_kind(),
                aggregation: SimilarityAggregation::Lp(*p as u32),
            };
            let idx = SlshIndex::from_parts(
                RepeatSlsh::new(b, *p)?,
                records,
                next_params()?,
                config,
                next_tables()?,
            )?;
            Engine::Lp(VerifiedIndex::new(idx, objective))
        }
        StructureSpec::Geometric { base, k, .. } => {
            let b = AnyBase::from_descriptor(base)?;
            let objective = S2p::Similarity {
                kernel: b.similarity_kind(),
                aggregation: SimilarityAggregation::Geometric,
            };
            let idx = SlshIndex::from_parts(
                ExhaustiveSlsh::new(b, *k)?,
                records,
                next_params()?,
                config,
                next_tables()?,
            )?;
            Engine::Geometric(VerifiedIndex::new(idx, objective))
        }
        StructureSpec::WeightedGeometric {
            base,
            weights,
            threshold,
            c,
        } => {
            let b = AnyBase::from_descriptor(base)?;
            let objective = S2p::Similarity {
                kernel: b.similarity_kind(),
                aggregation: SimilarityAggregation::WeightedGeometric,
            };
            let fam = WeightedExhaustiveSlsh::new(b, weights.clone(), opts.multiplicity_cap)?;
            let idx = SlshIndex::from_parts(fam, records, next_params()?, config, next_tables()?)?;
            Engine::WeightedGeometric(VerifiedIndex::with_bar(idx, objective, c * threshold))
        }
        StructureSpec::Centroid { dim, threshold, c } => {
            let idx = SlshIndex::from_parts(
                CentroidSlsh::new(*dim)?,
                dense_points(&records)?,
                next_params()?,
                config,
                next_tables()?,
            )?;
            Engine::Centroid(VerifiedIndex::with_bar(idx, IpAverage, c * threshold))
        }
        StructureSpec::AverageAngular { dim, .. } => {
            let idx = SlshIndex::from_parts(
                angular_family(*dim)?,
                dense_points(&records)?,
                next_params()?,
                config,
                next_tables()?,
            )?;
            Engine::AverageAngular(AverageAngularIndex::from_index(idx))
        }
        StructureSpec::AverageEuclidean { dim, r, c } => {
            let points = dense_points(&records)?;
            let derived = avg_euclid_slsh_params(*r, *c)?;
            let lifted = LiftParams::new(derived.epsilon, *dim)?.lift_all(&points)?;
            let idx = SlshIndex::from_parts(
                angular_family(dim + 1)?,
                lifted,
                next_params()?,
                config,
                next_tables()?,
            )?;
            Engine::AverageEuclidean(ShrinkLiftIndex::from_index(points, *r, *c, idx)?)
        }
        StructureSpec::Ellipsoid { dim, r, c, weights } => {
            let plan = EllipsoidPlan::new(*dim, *r, *c, weights.clone(), opts.multiplicity_cap)?;
            Engine::Ellipsoid(restore_ellipsoid(
                plan,
                dense_points(&records)?,
                next_params()?,
                config,
                next_tables()?,
            )?)
        }
        StructureSpec::Center { dim, params: cp } => {
            let points = dense_points(&records)?;
            let cfg = CenterConfig {
                index: config,
                max_structures: opts.max_structures,
                multiplicity_cap: opts.multiplicity_cap,
                strict: false,
            };
            let mut levels = Vec::with_capacity(cp.structure_count());
            for i in 0..cp.structure_count() {
                let pl = plan_level(cp, *dim, points.len(), i, opts.delta_fail, opts.seed, &cfg)?;
                let state = if pl.info.built {
                    let e = restore_ellipsoid(
                        pl.plan,
                        points.clone(),
                        pl.params,
                        config,
                        next_tables()?,
                    )?;
                    LevelState::Built(Box::new(e))
                } else {
                    LevelState::OverBudget {
                        needed: pl.info.tables as u64,
                        cap: config.max_tables,
                    }
                };
                levels.push(Level {
                    info: pl.info,
                    state,
                });
            }
            Engine::Center(CenterStructure::from_levels(
                cp.clone(),
                *dim,
                points,
                levels,
                opts.delta_fail,
                opts.seed,
            ))
        }
    })
}

fn restore_ellipsoid(
    plan: EllipsoidPlan,
    points: Vec<Point>,
    params: IndexParams,
    config: crate::index::IndexConfig,
    tables: Vec<Table>,
) -> Result<EllipsoidIndex> {
    let lifted = LiftParams::new(plan.epsilon, plan.dim)?.lift_all(&points)?;
    let idx = SlshIndex::from_parts(plan.family()?, lifted, params, config, tables)?;
    EllipsoidIndex::from_index(plan, points, idx)
}
