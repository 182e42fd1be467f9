//! CSV ingestion in the Kelvins collision-avoidance challenge layout.
//!
//! Input units: time to TCA in days (or hours, see [`TimeUnit`]), distances
//! and standard deviations in m, velocities in m/s, object spans in m.
//! Everything is converted to km, km/s and hours.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{grid_time, CdmGeometry, CdmRecord, EventSeries, HORIZON};
use crate::geom::{Covariance3, RtnVector};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[default]
    Days,
    Hours,
}

impl TimeUnit {
    fn hours_per_unit(self) -> f64 {
        match self {
            TimeUnit::Days => 24.0,
            TimeUnit::Hours => 1.0,
        }
    }
}

/// Logical columns understood by the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    EventId,
    TimeToTca,
    MissDistance,
    RelPosR,
    RelPosT,
    RelPosN,
    RelVelR,
    RelVelT,
    RelVelN,
    TSigmaR,
    TSigmaT,
    TSigmaN,
    TCorrTr,
    TCorrNr,
    TCorrNt,
    CSigmaR,
    CSigmaT,
    CSigmaN,
    CCorrTr,
    CCorrNr,
    CCorrNt,
    TSpan,
    CSpan,
}

impl Field {
    pub const ALL: [Field; 23] = [
        Field::EventId,
        Field::TimeToTca,
        Field::MissDistance,
        Field::RelPosR,
        Field::RelPosT,
        Field::RelPosN,
        Field::RelVelR,
        Field::RelVelT,
        Field::RelVelN,
        Field::TSigmaR,
        Field::TSigmaT,
        Field::TSigmaN,
        Field::TCorrTr,
        Field::TCorrNr,
        Field::TCorrNt,
        Field::CSigmaR,
        Field::CSigmaT,
        Field::CSigmaN,
        Field::CCorrTr,
        Field::CCorrNr,
        Field::CCorrNt,
        Field::TSpan,
        Field::CSpan,
    ];

    /// Column name in the Kelvins training file.
    pub fn kelvins_name(self) -> &'static str {
        match self {
            Field::EventId => "event_id",
            Field::TimeToTca => "time_to_tca",
            Field::MissDistance => "miss_distance",
            Field::RelPosR => "relative_position_r",
            Field::RelPosT => "relative_position_t",
            Field::RelPosN => "relative_position_n",
            Field::RelVelR => "relative_velocity_r",
            Field::RelVelT => "relative_velocity_t",
            Field::RelVelN => "relative_velocity_n",
            Field::TSigmaR => "t_sigma_r",
            Field::TSigmaT => "t_sigma_t",
            Field::TSigmaN => "t_sigma_n",
            Field::TCorrTr => "t_ct_r",
            Field::TCorrNr => "t_cn_r",
            Field::TCorrNt => "t_cn_t",
            Field::CSigmaR => "c_sigma_r",
            Field::CSigmaT => "c_sigma_t",
            Field::CSigmaN => "c_sigma_n",
            Field::CCorrTr => "c_ct_r",
            Field::CCorrNr => "c_cn_r",
            Field::CCorrNt => "c_cn_t",
            Field::TSpan => "t_span",
            Field::CSpan => "c_span",
        }
    }

    /// Correlations and object spans may be absent; they default to 0 and
    /// the configured radius.
    fn optional(self) -> bool {
        matches!(
            self,
            Field::TCorrTr
                | Field::TCorrNr
                | Field::TCorrNt
                | Field::CCorrTr
                | Field::CCorrNr
                | Field::CCorrNt
                | Field::TSpan
                | Field::CSpan
        )
    }

    fn from_kelvins_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.kelvins_name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub time_unit: TimeUnit,
    /// Extra header names per logical column, keyed by the Kelvins name.
    /// Matching is case-insensitive.
    pub aliases: BTreeMap<String, Vec<String>>,
    /// Object radius used when a span column is absent or empty, m.
    pub default_radius_m: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { time_unit: TimeUnit::Days, aliases: BTreeMap::new(), default_radius_m: 5.0 }
    }
}

/// Row and event accounting of one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped_missing: usize,
    pub dropped_bounds: usize,
    /// Kept rows whose covariance or relative state could not be used.
    pub geometry_unusable: usize,
    pub events_seen: usize,
    pub events_kept: usize,
    /// Kept events with no message at or before the 8-hour grid point.
    pub events_off_grid: usize,
    pub series: usize,
}

impl IngestReport {
    pub fn mean_cdms_per_event(&self) -> f64 {
        if self.events_kept == 0 {
            0.0
        } else {
            self.rows_kept as f64 / self.events_kept as f64
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, cfg: &IngestConfig) -> Result<(Vec<EventSeries>, IngestReport), IngestError> {
    ingest_reader(File::open(path)?, cfg)
}

pub fn ingest_reader<R: Read>(reader: R, cfg: &IngestConfig) -> Result<(Vec<EventSeries>, IngestReport), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(IngestError::EmptyDataset);
    }
    let columns = resolve_columns(&headers, cfg)?;

    let mut report = IngestReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<CdmRecord>> = HashMap::new();
    let mut seen: HashSet<String> = HashSet::new();

    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(e)),
        }
        let line = row.position().map_or(0, |p| p.line());
        report.rows_read += 1;
        let id = row.get(columns[&Field::EventId]).unwrap_or("").trim().to_string();
        if id.is_empty() {
            report.dropped_missing += 1;
            continue;
        }
        if seen.insert(id.clone()) {
            report.events_seen += 1;
        }
        let parsed = match parse_row(&row, &columns, cfg, line)? {
            Some(r) => r,
            None => {
                report.dropped_missing += 1;
                continue;
            }
        };
        let (record, geometry_ok) = build_record(id.clone(), parsed, cfg);
        if !record.within_state_bounds() {
            log::debug!("line {line}: state out of bounds, dropped");
            report.dropped_bounds += 1;
            continue;
        }
        if !geometry_ok {
            report.geometry_unusable += 1;
        }
        report.rows_kept += 1;
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(record);
    }
    if report.rows_read == 0 {
        return Err(IngestError::EmptyDataset);
    }
    report.events_kept = order.len();

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut records = groups.remove(&id).unwrap_or_default();
        records.sort_by(|a, b| b.time_to_tca.total_cmp(&a.time_to_tca));
        match resample(&id, &records) {
            Some(s) => out.push(s),
            None => report.events_off_grid += 1,
        }
    }
    report.series = out.len();
    if report.dropped_missing + report.dropped_bounds > 0 {
        log::info!(
            "ingest: dropped {} rows with missing values and {} rows outside state bounds",
            report.dropped_missing,
            report.dropped_bounds
        );
    }
    if out.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    Ok((out, report))
}

/// Writes series in the Kelvins layout using the canonical column names and
/// the configured time unit. Records without geometry are written with zero
/// relative state and a chaser covariance carrying only `sigma_t`.
pub fn write_csv<W: Write>(series: &[EventSeries], writer: W, cfg: &IngestConfig) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(Field::ALL.iter().map(|f| f.kelvins_name())).map_err(csv_error)?;
    let tu = cfg.time_unit.hours_per_unit();
    for s in series {
        for r in &s.records {
            let g = r.geometry;
            let (pos, vel) = g.map_or((RtnVector::default(), RtnVector::default()), |g| (g.rel_position, g.rel_velocity));
            let (ts, tc) = g.map_or(([0.0; 3], [0.0; 3]), |g| {
                (sigmas_correlations(&g.covariance_target), sigmas_correlations(&g.covariance_chaser))
            });
            let mut fields: Vec<String> = Vec::with_capacity(Field::ALL.len());
            fields.push(s.event_id.clone());
            fields.push(fmt(r.time_to_tca / tu));
            fields.push(fmt(r.miss_distance * 1e3));
            for v in [pos.r, pos.t, pos.n, vel.r, vel.t, vel.n] {
                fields.push(fmt(v * 1e3));
            }
            push_cov(&mut fields, g.map(|g| g.covariance_target), ts, None);
            push_cov(&mut fields, g.map(|g| g.covariance_chaser), tc, Some(r.sigma_t));
            fields.push(fmt(2.0 * r.r_t * 1e3));
            fields.push(fmt(2.0 * r.r_c * 1e3));
            w.write_record(&fields).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn push_cov(fields: &mut Vec<String>, cov: Option<Covariance3>, corr: [f64; 3], sigma_t: Option<f64>) {
    let sig = match cov {
        Some(c) => {
            let m = c.entries();
            [m[0][0].sqrt(), m[1][1].sqrt(), m[2][2].sqrt()]
        }
        None => [0.0, sigma_t.unwrap_or(0.0), 0.0],
    };
    let mut sig = sig;
    if let Some(st) = sigma_t {
        sig[1] = st;
    }
    for v in sig {
        fields.push(fmt(v * 1e3));
    }
    for v in corr {
        fields.push(fmt(v));
    }
}

/// Correlations (ρ_TR, ρ_NR, ρ_NT) of a covariance; zero where a sigma vanishes.
fn sigmas_correlations(c: &Covariance3) -> [f64; 3] {
    let m = c.entries();
    let s = [m[0][0].sqrt(), m[1][1].sqrt(), m[2][2].sqrt()];
    let corr = |i: usize, j: usize| if s[i] > 0.0 && s[j] > 0.0 { m[i][j] / (s[i] * s[j]) } else { 0.0 };
    [corr(1, 0), corr(2, 0), corr(2, 1)]
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::MalformedRow { line, reason: format!("{other:?}") },
    }
}

fn resolve_columns(headers: &csv::StringRecord, cfg: &IngestConfig) -> Result<HashMap<Field, usize>, IngestError> {
    let lower: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let mut names: HashMap<Field, Vec<String>> = Field::ALL.iter().map(|&f| (f, vec![f.kelvins_name().to_string()])).collect();
    for (key, extra) in &cfg.aliases {
        let field = Field::from_kelvins_name(&key.to_ascii_lowercase())
            .ok_or_else(|| IngestError::MissingColumn(format!("unknown alias key {key}")))?;
        let list = names.get_mut(&field).expect("all fields present");
        list.splice(0..0, extra.iter().map(|a| a.to_ascii_lowercase()));
    }
    let mut out = HashMap::new();
    for &f in &Field::ALL {
        let found = names[&f].iter().find_map(|n| lower.iter().position(|h| h == n));
        match found {
            Some(i) => {
                out.insert(f, i);
            }
            None if f.optional() => {}
            None => return Err(IngestError::MissingColumn(f.kelvins_name().to_string())),
        }
    }
    Ok(out)
}

struct ParsedRow {
    values: HashMap<Field, f64>,
}

impl ParsedRow {
    fn get(&self, f: Field) -> Option<f64> {
        self.values.get(&f).copied()
    }
}

/// Parses the numeric fields of a row. Returns `None` when a required value
/// is empty; non-numeric text is an error.
fn parse_row(
    row: &csv::StringRecord,
    columns: &HashMap<Field, usize>,
    _cfg: &IngestConfig,
    line: u64,
) -> Result<Option<ParsedRow>, IngestError> {
    let mut values = HashMap::with_capacity(columns.len());
    for (&f, &i) in columns {
        if f == Field::EventId {
            continue;
        }
        let raw = row.get(i).unwrap_or("").trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            if f.optional() {
                continue;
            }
            return Ok(None);
        }
        let v: f64 = raw.parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("column `{}`: cannot parse `{raw}` as a number", f.kelvins_name()),
        })?;
        if !v.is_finite() {
            return Err(IngestError::MalformedRow { line, reason: format!("column `{}`: non-finite value", f.kelvins_name()) });
        }
        values.insert(f, v);
    }
    Ok(Some(ParsedRow { values }))
}

fn build_record(event_id: String, p: ParsedRow, cfg: &IngestConfig) -> (CdmRecord, bool) {
    let km = |f: Field| p.get(f).unwrap_or(0.0) * 1e-3;
    let corr = |f: Field| p.get(f).unwrap_or(0.0);
    let radius = |f: Field| p.get(f).filter(|v| *v > 0.0).map_or(cfg.default_radius_m, |span| 0.5 * span) * 1e-3;

    let rel_position = RtnVector::new(km(Field::RelPosR), km(Field::RelPosT), km(Field::RelPosN));
    let rel_velocity = RtnVector::new(km(Field::RelVelR), km(Field::RelVelT), km(Field::RelVelN));
    let ct = Covariance3::from_sigmas_correlations(
        [km(Field::TSigmaR), km(Field::TSigmaT), km(Field::TSigmaN)],
        corr(Field::TCorrTr),
        corr(Field::TCorrNr),
        corr(Field::TCorrNt),
    );
    let cc = Covariance3::from_sigmas_correlations(
        [km(Field::CSigmaR), km(Field::CSigmaT), km(Field::CSigmaN)],
        corr(Field::CCorrTr),
        corr(Field::CCorrNr),
        corr(Field::CCorrNt),
    );
    let geometry = match (ct, cc) {
        (Ok(covariance_target), Ok(covariance_chaser)) => {
            Some(CdmGeometry { covariance_target, covariance_chaser, rel_position, rel_velocity })
        }
        _ => None,
    };
    let ok = geometry.is_some();
    let record = CdmRecord {
        event_id,
        time_to_tca: p.get(Field::TimeToTca).unwrap_or(f64::NAN) * cfg.time_unit.hours_per_unit(),
        miss_distance: km(Field::MissDistance),
        sigma_t: km(Field::CSigmaT),
        geometry,
        r_t: radius(Field::TSpan),
        r_c: radius(Field::CSpan),
    };
    (record, ok)
}

/// Nearest-preceding hold onto the grid: grid point k carries the latest
/// message issued at or before time-to-TCA `grid_time(k)`. `records` must be
/// sorted by decreasing time to TCA.
pub fn resample(event_id: &str, records: &[CdmRecord]) -> Option<EventSeries> {
    let mut out = Vec::new();
    let mut start_k = None;
    let mut next = 0;
    let mut current: Option<&CdmRecord> = None;
    for k in 0..HORIZON {
        let t = grid_time(k);
        while next < records.len() && records[next].time_to_tca >= t {
            current = Some(&records[next]);
            next += 1;
        }
        if let Some(r) = current {
            start_k.get_or_insert(k);
            let mut held = r.clone();
            held.time_to_tca = t;
            out.push(held);
        }
    }
    start_k.map(|start_k| EventSeries { event_id: event_id.to_string(), start_k, records: out, service_altitude_km: None })
}
