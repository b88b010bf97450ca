//! Strongest-cell and handover metrics over measurement traces.
//!
//! Trace format (CSV, one row per sample):
//!
//! ```text
//! [track,]timestamp_s,x_m,y_m,z_m,cells
//! 1,0.0,10.0,20.0,120.0,3:-71.5;8:-80.25
//! ```
//!
//! `lon,lat` may replace `x_m,y_m`; such traces are projected to local metres
//! with an equirectangular projection centred on the mean trace position
//! (x = R·Δlon·cos(lat0), y = R·Δlat, R = 6371008.8 m). The sidecar file
//! lists cell positions as `cell_id,x_m,y_m,z_m` (or `cell_id,lon,lat,z_m`).
//! Timestamps must be non-decreasing within each track.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Position;
use crate::handover::{detect_pingpong, HoAttempt, HoOutcome};
use crate::{Ecgi, Pci, UeId, UeKind};

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;
/// Buckets n = 1, 2, 3, 4 and "5 or more".
pub const NTH_BUCKETS: usize = 5;
pub const DEFAULT_EXTERNAL_BIN_M: f64 = 15.0;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: unknown cell id {id}")]
    UnknownCell { line: u64, id: u64 },
    #[error("line {line}: timestamp {t} goes backwards (previous {prev})")]
    NonMonotone { line: u64, t: f64, prev: f64 },
    #[error("{0}")]
    Header(String),
}

fn malformed(line: u64, msg: impl Into<String>) -> AnalysisError {
    AnalysisError::Malformed { line, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub track: u32,
    pub timestamp_s: f64,
    pub position: Position,
    /// (cell id, RSRP dBm) of every cell measured in this sample.
    pub cells: Vec<(u64, f64)>,
}

impl TraceRow {
    /// Strongest measured cell, lowest id on ties.
    pub fn strongest(&self) -> Option<u64> {
        self.cells.iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0))).map(|c| c.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalTrace {
    pub rows: Vec<TraceRow>,
    pub cells: BTreeMap<u64, Position>,
    /// Projection origin (lon, lat) in degrees when the input was geographic.
    pub origin: Option<(f64, f64)>,
}

impl ExternalTrace {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let mut last: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let line = i as u64 + 2;
            for (id, _) in &r.cells {
                if !self.cells.contains_key(id) {
                    return Err(AnalysisError::UnknownCell { line, id: *id });
                }
            }
            if let Some(&prev) = last.get(&r.track) {
                if r.timestamp_s < prev {
                    return Err(AnalysisError::NonMonotone { line, t: r.timestamp_s, prev });
                }
            }
            last.insert(r.track, r.timestamp_s);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMode {
    ThreeD,
    TwoD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AltitudeBins {
    /// One bin per distinct altitude (simulated runs fly at a fixed height).
    Exact,
    /// Bins of the given width, labelled by their lower edge.
    Width(f64),
}

/// Altitude bin label in millimetres, so it can be an ordered map key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AltitudeBin(pub i64);

impl AltitudeBin {
    pub fn of(z: f64, bins: AltitudeBins) -> Self {
        let label = match bins {
            AltitudeBins::Exact => z,
            AltitudeBins::Width(w) => (z / w).floor() * w,
        };
        AltitudeBin((label * 1000.0).round() as i64)
    }

    pub fn metres(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for AltitudeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.metres())
    }
}

/// Rank (1-based) of `cell` by distance from `pos` among all `cells`, ties by id.
pub fn closeness_rank(cell: u64, pos: &Position, cells: &BTreeMap<u64, Position>, mode: DistanceMode) -> usize {
    let dist = |p: &Position| match mode {
        DistanceMode::ThreeD => pos.distance(p),
        DistanceMode::TwoD => pos.horizontal_distance(p),
    };
    let d = dist(&cells[&cell]);
    1 + cells.iter().filter(|(id, p)| dist(p).total_cmp(&d).then(id.cmp(&&cell)).is_lt()).count()
}

/// Per altitude bin, fraction of samples whose strongest cell is the n-th
/// closest (index 4 collects n ≥ 5). Rows without measured cells are skipped.
pub fn nth_closest_strongest(
    trace: &ExternalTrace,
    bins: AltitudeBins,
    mode: DistanceMode,
) -> Result<BTreeMap<AltitudeBin, [f64; NTH_BUCKETS]>, AnalysisError> {
    let mut counts: BTreeMap<AltitudeBin, [u64; NTH_BUCKETS]> = BTreeMap::new();
    for (i, row) in trace.rows.iter().enumerate() {
        let Some(strongest) = row.strongest() else { continue };
        if !trace.cells.contains_key(&strongest) {
            return Err(AnalysisError::UnknownCell { line: i as u64 + 2, id: strongest });
        }
        let n = closeness_rank(strongest, &row.position, &trace.cells, mode);
        counts.entry(AltitudeBin::of(row.position.z, bins)).or_default()[n.min(NTH_BUCKETS) - 1] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(bin, c)| {
            let total: u64 = c.iter().sum();
            (bin, c.map(|x| x as f64 / total as f64))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeRate {
    pub changes: u64,
    pub minutes: f64,
    pub rate_per_min: f64,
}

/// Strongest-cell changes per altitude bin, counted between consecutive
/// rows of the same track within the bin. Any subsequence of a trace has at
/// most as many changes.
pub fn strongest_changes(trace: &ExternalTrace, bins: AltitudeBins) -> BTreeMap<AltitudeBin, u64> {
    let mut counts: BTreeMap<AltitudeBin, u64> = BTreeMap::new();
    let mut last_cell: BTreeMap<(u32, AltitudeBin), u64> = BTreeMap::new();
    for row in &trace.rows {
        let Some(cell) = row.strongest() else { continue };
        let bin = AltitudeBin::of(row.position.z, bins);
        let changed = last_cell.insert((row.track, bin), cell).is_some_and(|prev| prev != cell);
        *counts.entry(bin).or_default() += changed as u64;
    }
    counts
}

/// Observed seconds and row count per bin. Time comes from maximal runs of
/// consecutive rows of one track inside one bin: a run of m rows spanning T
/// seconds counts as T·m/(m−1) seconds, i.e. m sample intervals.
fn bin_durations(trace: &ExternalTrace, bins: AltitudeBins) -> BTreeMap<AltitudeBin, (f64, u64)> {
    let mut acc: BTreeMap<AltitudeBin, (f64, u64)> = BTreeMap::new();
    // per track: (bin, first_t, last_t, rows) of the open run
    let mut open: BTreeMap<u32, (AltitudeBin, f64, f64, u64)> = BTreeMap::new();
    let close = |acc: &mut BTreeMap<AltitudeBin, (f64, u64)>,
                 (bin, first, last, rows): (AltitudeBin, f64, f64, u64)| {
        let e = acc.entry(bin).or_default();
        e.1 += rows;
        if rows >= 2 {
            e.0 += (last - first) * rows as f64 / (rows - 1) as f64;
        }
    };
    for row in trace.rows.iter().filter(|r| !r.cells.is_empty()) {
        let bin = AltitudeBin::of(row.position.z, bins);
        let t = row.timestamp_s;
        match open.remove(&row.track) {
            Some((b, first, _, rows)) if b == bin => {
                open.insert(row.track, (b, first, t, rows + 1));
            }
            other => {
                if let Some(run) = other {
                    close(&mut acc, run);
                }
                open.insert(row.track, (bin, t, t, 1));
            }
        }
    }
    for run in open.into_values() {
        close(&mut acc, run);
    }
    acc
}

/// Strongest-cell changes per minute per altitude bin (see
/// [`strongest_changes`]). Bins with fewer than two rows, or no elapsed
/// time, are omitted with a warning.
pub fn strongest_changes_per_minute(trace: &ExternalTrace, bins: AltitudeBins) -> BTreeMap<AltitudeBin, ChangeRate> {
    change_rates(trace, bins)
        .into_iter()
        .filter_map(|(bin, rate)| {
            if rate.is_none() {
                log::warn!("altitude bin {bin} m has fewer than two usable rows; omitted");
            }
            rate.map(|r| (bin, r))
        })
        .collect()
}

/// Like [`strongest_changes_per_minute`] but keeps unusable bins as `None`, silently.
pub(crate) fn change_rates(trace: &ExternalTrace, bins: AltitudeBins) -> BTreeMap<AltitudeBin, Option<ChangeRate>> {
    let changes = strongest_changes(trace, bins);
    bin_durations(trace, bins)
        .into_iter()
        .map(|(bin, (seconds, rows))| {
            let rate = (rows >= 2 && seconds > 0.0).then(|| {
                let minutes = seconds / 60.0;
                let changes = changes[&bin];
                ChangeRate { changes, minutes, rate_per_min: changes as f64 / minutes }
            });
            (bin, rate)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coords {
    Local,
    LonLat,
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64, AnalysisError> {
    let v: f64 = field.trim().parse().map_err(|_| malformed(line, format!("bad {what} {field:?}")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("non-finite {what}")));
    }
    Ok(v)
}

fn coord_columns(headers: &csv::StringRecord) -> Result<(Coords, usize, usize, usize), AnalysisError> {
    let z = header_index(headers, "z_m").ok_or_else(|| AnalysisError::Header("missing z_m column".into()))?;
    if let (Some(x), Some(y)) = (header_index(headers, "x_m"), header_index(headers, "y_m")) {
        return Ok((Coords::Local, x, y, z));
    }
    if let (Some(x), Some(y)) = (header_index(headers, "lon"), header_index(headers, "lat")) {
        return Ok((Coords::LonLat, x, y, z));
    }
    Err(AnalysisError::Header("expected x_m,y_m or lon,lat columns".into()))
}

fn project(lon: f64, lat: f64, origin: (f64, f64)) -> (f64, f64) {
    let (lon0, lat0) = origin;
    (EARTH_RADIUS_M * (lon - lon0).to_radians() * lat0.to_radians().cos(), EARTH_RADIUS_M * (lat - lat0).to_radians())
}

fn parse_cells_field(field: &str, line: u64) -> Result<Vec<(u64, f64)>, AnalysisError> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|pair| {
            let (id, rsrp) = pair.split_once(':').ok_or_else(|| malformed(line, format!("bad cell entry {pair:?}")))?;
            let id = id.trim().parse().map_err(|_| malformed(line, format!("bad cell id {id:?}")))?;
            Ok((id, parse_f64(rsrp, line, "rsrp")?))
        })
        .collect()
}

/// Parses a trace and its cell sidecar, then validates it.
pub fn parse_trace(trace: impl Read, cells: impl Read) -> Result<ExternalTrace, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(trace);
    let headers = rdr.headers().map_err(|e| AnalysisError::Header(e.to_string()))?.clone();
    let (coords, xi, yi, zi) = coord_columns(&headers)?;
    let ti = header_index(&headers, "timestamp_s")
        .ok_or_else(|| AnalysisError::Header("missing timestamp_s column".into()))?;
    let ci = header_index(&headers, "cells").ok_or_else(|| AnalysisError::Header("missing cells column".into()))?;
    let track_i = header_index(&headers, "track");

    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        let get = |idx: usize| rec.get(idx).ok_or_else(|| malformed(line, "missing field"));
        let track = match track_i {
            Some(k) => get(k)?.trim().parse().map_err(|_| malformed(line, "bad track"))?,
            None => 0,
        };
        raw.push((
            line,
            track,
            parse_f64(get(ti)?, line, "timestamp")?,
            parse_f64(get(xi)?, line, "x")?,
            parse_f64(get(yi)?, line, "y")?,
            parse_f64(get(zi)?, line, "z")?,
            parse_cells_field(get(ci)?, line)?,
        ));
    }
    let origin = (coords == Coords::LonLat && !raw.is_empty()).then(|| {
        let n = raw.len() as f64;
        (raw.iter().map(|r| r.3).sum::<f64>() / n, raw.iter().map(|r| r.4).sum::<f64>() / n)
    });

    let mut crdr = csv::ReaderBuilder::new().has_headers(true).from_reader(cells);
    let cheaders = crdr.headers().map_err(|e| AnalysisError::Header(e.to_string()))?.clone();
    let (ccoords, cx, cy, cz) = coord_columns(&cheaders)?;
    let cid =
        header_index(&cheaders, "cell_id").ok_or_else(|| AnalysisError::Header("missing cell_id column".into()))?;
    if ccoords == Coords::LonLat && coords == Coords::Local {
        return Err(AnalysisError::Header("sidecar is geographic but the trace is local".into()));
    }
    let mut cell_map = BTreeMap::new();
    for (i, rec) in crdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        let get = |idx: usize| rec.get(idx).ok_or_else(|| malformed(line, "missing field"));
        let id: u64 = get(cid)?.trim().parse().map_err(|_| malformed(line, "bad cell_id"))?;
        let (mut x, mut y) = (parse_f64(get(cx)?, line, "x")?, parse_f64(get(cy)?, line, "y")?);
        if ccoords == Coords::LonLat {
            (x, y) = project(x, y, origin.unwrap_or((x, y)));
        }
        let z = parse_f64(get(cz)?, line, "z")?;
        if cell_map.insert(id, Position::new(x, y, z)).is_some() {
            return Err(malformed(line, format!("duplicate cell id {id}")));
        }
    }

    let mut rows = Vec::with_capacity(raw.len());
    let mut last: BTreeMap<u32, f64> = BTreeMap::new();
    for (line, track, t, x, y, z, cells) in raw {
        if let Some(id) = cells.iter().map(|c| c.0).find(|id| !cell_map.contains_key(id)) {
            return Err(AnalysisError::UnknownCell { line, id });
        }
        if let Some(&prev) = last.get(&track) {
            if t < prev {
                return Err(AnalysisError::NonMonotone { line, t, prev });
            }
        }
        last.insert(track, t);
        let (x, y) = match origin {
            Some(o) => project(x, y, o),
            None => (x, y),
        };
        rows.push(TraceRow { track, timestamp_s: t, position: Position::new(x, y, z), cells });
    }
    Ok(ExternalTrace { rows, cells: cell_map, origin })
}

pub fn ingest_trace(trace_path: &Path, cells_path: &Path) -> Result<ExternalTrace, AnalysisError> {
    parse_trace(std::fs::File::open(trace_path)?, std::fs::File::open(cells_path)?)
}

/// Writes rows in the local-metre trace format. Floats use shortest
/// round-trip formatting, so re-ingesting reproduces the rows exactly.
pub fn write_trace(rows: &[TraceRow], out: impl Write) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| AnalysisError::Io(e.into());
    w.write_record(["track", "timestamp_s", "x_m", "y_m", "z_m", "cells"]).map_err(csv_err)?;
    for r in rows {
        let cells: Vec<String> = r.cells.iter().map(|(id, rsrp)| format!("{id}:{rsrp}")).collect();
        w.write_record([
            r.track.to_string(),
            r.timestamp_s.to_string(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.position.z.to_string(),
            cells.join(";"),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cells(cells: &BTreeMap<u64, Position>, out: impl Write) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| AnalysisError::Io(e.into());
    w.write_record(["cell_id", "x_m", "y_m", "z_m"]).map_err(csv_err)?;
    for (id, p) in cells {
        w.write_record([id.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Record types of the handover event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordType {
    /// One handover attempt.
    #[serde(rename = "HO")]
    Ho,
    /// One radio link failure; `outcome` holds the cause.
    #[serde(rename = "DROP")]
    Drop,
    /// Per-UE totals written at the end of a run.
    #[serde(rename = "SESSION")]
    Session,
}

pub const EVENT_LOG_HEADER: [&str; 11] = [
    "record",
    "ue_id",
    "ue_kind",
    "time_s",
    "source_ecgi",
    "reported_pci",
    "prepared_ecgi",
    "true_ecgi",
    "outcome",
    "interruption_s",
    "connected_s",
];

/// One row of the handover event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub record: RecordType,
    pub ue_id: u32,
    pub ue_kind: UeKind,
    pub time_s: f64,
    pub source_ecgi: Option<u64>,
    pub reported_pci: Option<u16>,
    pub prepared_ecgi: Option<u64>,
    pub true_ecgi: Option<u64>,
    pub outcome: String,
    pub interruption_s: f64,
    pub connected_s: Option<f64>,
}

impl EventRecord {
    pub fn from_attempt(a: &HoAttempt, kind: UeKind) -> Self {
        EventRecord {
            record: RecordType::Ho,
            ue_id: a.ue_id.0,
            ue_kind: kind,
            time_s: a.time_s,
            source_ecgi: Some(a.source.0),
            reported_pci: Some(a.reported_pci.0),
            prepared_ecgi: a.prepared_target.map(|e| e.0),
            true_ecgi: Some(a.true_target.0),
            outcome: a.outcome.as_str().to_string(),
            interruption_s: a.interruption_s,
            connected_s: None,
        }
    }

    fn to_attempt(&self, line: u64) -> Result<HoAttempt, AnalysisError> {
        let need = |v: Option<u64>, what: &str| v.ok_or_else(|| malformed(line, format!("HO row without {what}")));
        Ok(HoAttempt {
            ue_id: UeId(self.ue_id),
            time_s: self.time_s,
            source: Ecgi(need(self.source_ecgi, "source_ecgi")?),
            reported_pci: Pci(self.reported_pci.ok_or_else(|| malformed(line, "HO row without reported_pci"))?),
            prepared_target: self.prepared_ecgi.map(Ecgi),
            true_target: Ecgi(need(self.true_ecgi, "true_ecgi")?),
            outcome: self.outcome.parse().map_err(|e: String| malformed(line, e))?,
            interruption_s: self.interruption_s,
        })
    }
}

pub fn write_event_log(records: &[EventRecord], out: impl Write) -> Result<(), AnalysisError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| AnalysisError::Io(e.into());
    w.write_record(EVENT_LOG_HEADER).map_err(csv_err)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        w.write_record([
            match r.record {
                RecordType::Ho => "HO".to_string(),
                RecordType::Drop => "DROP".to_string(),
                RecordType::Session => "SESSION".to_string(),
            },
            r.ue_id.to_string(),
            r.ue_kind.to_string(),
            r.time_s.to_string(),
            opt(r.source_ecgi.map(|v| v.to_string())),
            opt(r.reported_pci.map(|v| v.to_string())),
            opt(r.prepared_ecgi.map(|v| v.to_string())),
            opt(r.true_ecgi.map(|v| v.to_string())),
            r.outcome.clone(),
            r.interruption_s.to_string(),
            opt(r.connected_s.map(|v| v.to_string())),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an event log; malformed rows are reported with their line number.
pub fn parse_event_log(input: impl Read) -> Result<Vec<EventRecord>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr.headers().map_err(|e| AnalysisError::Header(e.to_string()))?.clone();
    if headers.iter().map(str::trim).ne(EVENT_LOG_HEADER) {
        return Err(AnalysisError::Header(format!("expected header {}", EVENT_LOG_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        let f = |k: usize| rec.get(k).unwrap_or("").trim();
        let opt_u64 = |k: usize| -> Result<Option<u64>, AnalysisError> {
            let s = f(k);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| malformed(line, format!("bad {} {s:?}", EVENT_LOG_HEADER[k])))
            }
        };
        let record = match f(0) {
            "HO" => RecordType::Ho,
            "DROP" => RecordType::Drop,
            "SESSION" => RecordType::Session,
            other => return Err(malformed(line, format!("unknown record type {other:?}"))),
        };
        let connected_s = match f(10) {
            "" => None,
            s => Some(parse_f64(s, line, "connected_s")?),
        };
        out.push(EventRecord {
            record,
            ue_id: f(1).parse().map_err(|_| malformed(line, "bad ue_id"))?,
            ue_kind: f(2).parse().map_err(|e: String| malformed(line, e))?,
            time_s: parse_f64(f(3), line, "time_s")?,
            source_ecgi: opt_u64(4)?,
            reported_pci: opt_u64(5)?
                .map(|v| u16::try_from(v).map_err(|_| malformed(line, "pci out of range")))
                .transpose()?,
            prepared_ecgi: opt_u64(6)?,
            true_ecgi: opt_u64(7)?,
            outcome: f(8).to_string(),
            interruption_s: parse_f64(f(9), line, "interruption_s")?,
            connected_s,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub ues: u64,
    pub connected_s: f64,
    pub handovers: u64,
    pub handovers_per_min: f64,
    pub pingpongs: u64,
    pub failures: BTreeMap<String, u64>,
    pub cancelled: u64,
    pub disconnects: u64,
    /// Mean interruption of disconnects (0 when there were none).
    pub mean_interruption_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoSummary {
    pub per_kind: BTreeMap<UeKind, KindSummary>,
    pub uav_handovers_per_min: f64,
    pub gue_handovers_per_min: f64,
    /// UAV over GUE handover rate; null when either rate is undefined or the GUE rate is 0.
    pub uav_gue_ratio: Option<f64>,
}

/// Summarises an event log per UE kind. Rates use the connected time of the
/// SESSION rows; without them a kind's rate is 0.
pub fn ho_summary(records: &[EventRecord], t_pingpong_s: f64) -> Result<HoSummary, AnalysisError> {
    let mut per_kind: BTreeMap<UeKind, KindSummary> =
        [UeKind::Uav, UeKind::Gue].map(|k| (k, KindSummary::default())).into();
    let mut attempts: BTreeMap<UeKind, Vec<HoAttempt>> = BTreeMap::new();
    let mut interruption: BTreeMap<UeKind, f64> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let line = i as u64 + 2;
        let s = per_kind.get_mut(&r.ue_kind).expect("both kinds present");
        match r.record {
            RecordType::Ho => {
                let a = r.to_attempt(line)?;
                match a.outcome {
                    HoOutcome::Success => s.handovers += 1,
                    HoOutcome::Cancelled => s.cancelled += 1,
                    o => *s.failures.entry(o.as_str().to_string()).or_default() += 1,
                }
                attempts.entry(r.ue_kind).or_default().push(a);
            }
            RecordType::Drop => {
                s.disconnects += 1;
                *interruption.entry(r.ue_kind).or_default() += r.interruption_s;
            }
            RecordType::Session => {
                s.ues += 1;
                s.connected_s += r.connected_s.ok_or_else(|| malformed(line, "SESSION row without connected_s"))?;
            }
        }
    }
    for (kind, s) in per_kind.iter_mut() {
        if let Some(a) = attempts.get_mut(kind) {
            a.sort_by(|x, y| x.time_s.total_cmp(&y.time_s));
            s.pingpongs = detect_pingpong(a, t_pingpong_s) as u64;
        }
        if s.connected_s > 0.0 {
            s.handovers_per_min = s.handovers as f64 / (s.connected_s / 60.0);
        }
        if s.disconnects > 0 {
            s.mean_interruption_s = interruption[kind] / s.disconnects as f64;
        }
    }
    let uav = &per_kind[&UeKind::Uav];
    let gue = &per_kind[&UeKind::Gue];
    let ratio = (uav.connected_s > 0.0 && gue.connected_s > 0.0 && gue.handovers_per_min > 0.0)
        .then(|| uav.handovers_per_min / gue.handovers_per_min);
    Ok(HoSummary {
        uav_handovers_per_min: uav.handovers_per_min,
        gue_handovers_per_min: gue.handovers_per_min,
        uav_gue_ratio: ratio,
        per_kind,
    })
}
