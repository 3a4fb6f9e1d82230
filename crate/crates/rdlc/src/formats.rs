//! On-disk formats: versioned CSV tables, the binary snapshot container and
//! JSON documents.
//!
//! Every CSV starts with a `# format_version=N` comment line. The snapshot
//! file is the magic `RDLCSNAP`, then one record per snapshot: a little-endian
//! `u64` header length, a JSON header, and `cells` values of `a` followed by
//! `cells` values of `b` as little-endian `f64`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use rdlc_core::diagnostics::TraceSeries;
use rdlc_core::grid::GridSummary;
use rdlc_core::solver::StatePair;

/// Version tag written into every output file.
pub const FORMAT_VERSION: u32 = 1;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"RDLCSNAP";

/// Column of a table: name and cells, `None` written as an empty field.
pub type Column = (String, Vec<Option<f64>>);

fn version_line() -> String {
    format!("# format_version={FORMAT_VERSION}\n")
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Writes a numeric table. All columns must have the same length.
pub fn write_table(path: &Path, columns: &[Column]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    ensure!(columns.iter().all(|c| c.1.len() == rows), "ragged table for {}", path.display());
    let mut file = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    file.write_all(version_line().as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(columns.iter().map(|c| c.0.as_str()))?;
    for r in 0..rows {
        w.write_record(columns.iter().map(|c| cell(c.1[r])))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes string records under a header.
pub fn write_records(path: &Path, header: &[&str], records: &[Vec<String>]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    file.write_all(version_line().as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`] (or any comma-separated table
/// with `#` comment lines). Empty cells read as `None`. A leading
/// `# format_version=N` line must name the current version.
pub fn read_table(path: &Path) -> Result<Vec<Column>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    if let Some(v) = text.lines().next().and_then(|l| l.strip_prefix("# format_version=")) {
        ensure!(v.trim() == FORMAT_VERSION.to_string(), "{}: unsupported format version {}", path.display(), v.trim());
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols: Vec<Column> = names.into_iter().map(|n| (n, Vec::new())).collect();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad record {}", path.display(), line + 1))?;
        ensure!(rec.len() == cols.len(), "{}: record {} has {} fields", path.display(), line + 1, rec.len());
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            let v = if field.is_empty() {
                None
            } else {
                Some(field.parse::<f64>().with_context(|| {
                    format!("{}: record {}, column {}: `{field}` is not a number", path.display(), line + 1, c.0)
                })?)
            };
            c.1.push(v);
        }
    }
    Ok(cols)
}

/// Looks up a fully populated column.
pub fn column(cols: &[Column], name: &str) -> Option<Result<Vec<f64>>> {
    cols.iter().find(|c| c.0 == name).map(|c| {
        c.1.iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| anyhow::anyhow!("column {name} is empty at row {}", k + 1)))
            .collect()
    })
}

/// Trace series as a table with `t` first, then every channel, then `extra`.
pub fn write_traces(path: &Path, trace: &TraceSeries, extra: &[Column]) -> Result<()> {
    let mut cols: Vec<Column> = vec![("t".into(), trace.times.iter().copied().map(Some).collect())];
    for ch in &trace.channels {
        cols.push((ch.name.clone(), ch.values.iter().copied().map(Some).collect()));
    }
    cols.extend(extra.iter().cloned());
    write_table(path, &cols)
}

/// Reads the trace channels back, skipping optional columns with gaps.
pub fn read_traces(path: &Path, definitions: &[(&str, &str)]) -> Result<TraceSeries> {
    let cols = read_table(path)?;
    let times = column(&cols, "t").context("traces have no `t` column")??;
    let mut trace = TraceSeries::new(times).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    for (name, def) in definitions {
        if let Some(values) = column(&cols, name) {
            trace.set_channel(name, def, "", values?).map_err(|e| anyhow::anyhow!("{e}"))?;
        }
    }
    Ok(trace)
}

/// Per-record header of the snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format_version: u32,
    pub dim: usize,
    pub resolution: usize,
    pub cells: usize,
    pub t: f64,
    pub fields: Vec<String>,
}

pub fn write_snapshots(path: &Path, grid: &GridSummary, snapshots: &[StatePair]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    w.write_all(SNAPSHOT_MAGIC)?;
    for s in snapshots {
        ensure!(s.a.len() == grid.cells && s.b.len() == grid.cells, "snapshot does not match the grid");
        let header = SnapshotHeader {
            format_version: FORMAT_VERSION,
            dim: grid.dim,
            resolution: grid.resolution,
            cells: grid.cells,
            t: s.t,
            fields: vec!["a".into(), "b".into()],
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for v in s.a.iter().chain(&s.b) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<(Vec<SnapshotHeader>, Vec<StatePair>)> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).context("snapshot file is truncated")?;
    if &magic != SNAPSHOT_MAGIC {
        bail!("{} is not a snapshot file", path.display());
    }
    let (mut headers, mut states) = (Vec::new(), Vec::new());
    loop {
        let mut len = [0u8; 8];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json).context("snapshot header is truncated")?;
        let h: SnapshotHeader = serde_json::from_slice(&json).context("bad snapshot header")?;
        ensure!(h.format_version == FORMAT_VERSION, "unsupported snapshot format version {}", h.format_version);
        let mut bytes = vec![0u8; 16 * h.cells];
        r.read_exact(&mut bytes).context("snapshot data is truncated")?;
        let vals: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        states.push(StatePair { a: vals[..h.cells].to_vec(), b: vals[h.cells..].to_vec(), t: h.t });
        headers.push(h);
    }
    Ok((headers, states))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}
