//! Trip records to per-vertex productivity observations.
//!
//! For consecutive trips of one driver, the second trip's fare divided by
//! the time from the end of the first trip to the end of the second gives a
//! rate in dollars per hour:
//!
//! ```text
//! w   = next dispatch - current end      (idle)
//! rho = next pickup   - next dispatch    (reach)
//! d   = next end      - next pickup      (trip)
//! pi  = F_next / (w + rho + d)
//! ```
//!
//! The observation belongs to the dropoff zone and local hour-of-week of the
//! first trip. Pairs with `w` of an hour or more end the session and emit
//! nothing.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Timelike, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{GfenError, Result};
use crate::graph::SpatioTemporalGraph;

pub const HOURS_PER_WEEK: usize = 168;

#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub driver: String,
    pub dispatched_at: DateTime<Utc>,
    pub started_at: DateTime<Utc>,
    pub completed_at: DateTime<Utc>,
    pub dropoff_taz: String,
    /// Fare in dollars, already normalized to the standard tariff.
    pub fare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub taz: String,
    pub hour: usize,
    pub productivity: f64,
}

/// Input column names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub driver: String,
    pub dispatched_at: String,
    pub started_at: String,
    pub completed_at: String,
    pub dropoff_taz: String,
    pub fare: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            driver: "driver_id".into(),
            dispatched_at: "dispatched_on".into(),
            started_at: "started_on".into(),
            completed_at: "completed_on".into(),
            dropoff_taz: "end_taz".into(),
            fare: "fare".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub columns: ColumnMap,
    /// IANA zone for hour-of-week and for timestamps without an offset.
    pub timezone: String,
    /// Keep pairs whose first trip ends in `[from, to)` (local dates or
    /// timestamps).
    pub window_from: Option<String>,
    pub window_to: Option<String>,
    pub max_idle_hours: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            columns: ColumnMap::default(),
            timezone: "America/Chicago".into(),
            window_from: None,
            window_to: None,
            max_idle_hours: 1.0,
        }
    }
}

impl IngestConfig {
    pub fn tz(&self) -> Result<Tz> {
        self.timezone
            .parse()
            .map_err(|_| GfenError::Ingest(format!("unknown timezone {:?}", self.timezone)))
    }

    fn window(&self, tz: &Tz) -> Result<(Option<DateTime<Utc>>, Option<DateTime<Utc>>)> {
        let f = |s: &Option<String>| s.as_deref().map(|s| parse_timestamp(s, tz)).transpose();
        Ok((f(&self.window_from)?, f(&self.window_to)?))
    }
}

/// Parse RFC 3339 or a naive `YYYY-MM-DD[ T]HH:MM[:SS]` / `YYYY-MM-DD`
/// timestamp; naive values are local time in `tz`.
pub fn parse_timestamp(s: &str, tz: &Tz) -> Result<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    let naive = [
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    .or_else(|| {
        chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
    })
    .ok_or_else(|| GfenError::Ingest(format!("cannot parse timestamp {s:?}")))?;
    tz.from_local_datetime(&naive)
        .earliest()
        .map(|dt| dt.with_timezone(&Utc))
        .ok_or_else(|| GfenError::Ingest(format!("{s:?} does not exist in {tz}")))
}

/// Hours since the most recent local Sunday midnight.
pub fn hour_of_week(t: DateTime<Utc>, tz: &Tz) -> usize {
    let local = t.with_timezone(tz);
    local.weekday().num_days_from_sunday() as usize * 24 + local.hour() as usize
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub trips: usize,
    pub pairs: usize,
    pub emitted: usize,
    pub idle_filtered: usize,
    pub negative_duration: usize,
    pub outside_window: usize,
}

fn hours(a: DateTime<Utc>, b: DateTime<Utc>) -> f64 {
    (b - a).num_milliseconds() as f64 / 3_600_000.0
}

/// Productivity observations from trips; trips are grouped by driver and
/// ordered by dispatch time.
pub fn compute_productivity(
    trips: &[Trip],
    config: &IngestConfig,
) -> Result<(Vec<Observation>, IngestReport)> {
    let tz = config.tz()?;
    let (from, to) = config.window(&tz)?;
    let mut report = IngestReport {
        trips: trips.len(),
        ..IngestReport::default()
    };
    let mut order: Vec<usize> = (0..trips.len()).collect();
    order.sort_by(|&a, &b| {
        (trips[a].driver.as_str(), trips[a].dispatched_at)
            .cmp(&(trips[b].driver.as_str(), trips[b].dispatched_at))
    });
    let mut out = Vec::new();
    for pair in order.windows(2) {
        let (cur, next) = (&trips[pair[0]], &trips[pair[1]]);
        if cur.driver != next.driver {
            continue;
        }
        report.pairs += 1;
        let w = hours(cur.completed_at, next.dispatched_at);
        let rho = hours(next.dispatched_at, next.started_at);
        let d = hours(next.started_at, next.completed_at);
        if w < 0.0 || rho < 0.0 || d < 0.0 || w + rho + d <= 0.0 {
            log::warn!(
                "driver {}: trip ending {} followed by a trip with negative durations; skipped",
                cur.driver,
                cur.completed_at
            );
            report.negative_duration += 1;
            continue;
        }
        if w >= config.max_idle_hours {
            report.idle_filtered += 1;
            continue;
        }
        if from.is_some_and(|f| cur.completed_at < f) || to.is_some_and(|t| cur.completed_at >= t) {
            report.outside_window += 1;
            continue;
        }
        let pi = next.fare / (w + rho + d);
        if !(pi.is_finite() && pi > 0.0) {
            report.negative_duration += 1;
            continue;
        }
        out.push(Observation {
            taz: cur.dropoff_taz.clone(),
            hour: hour_of_week(cur.completed_at, &tz),
            productivity: pi,
        });
    }
    report.emitted = out.len();
    Ok((out, report))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| GfenError::Ingest(format!("missing column {name:?}")))
}

pub fn read_trips<R: std::io::Read>(input: R, config: &IngestConfig) -> Result<Vec<Trip>> {
    let tz = config.tz()?;
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let c = &config.columns;
    let idx = [
        column(&headers, &c.driver)?,
        column(&headers, &c.dispatched_at)?,
        column(&headers, &c.started_at)?,
        column(&headers, &c.completed_at)?,
        column(&headers, &c.dropoff_taz)?,
        column(&headers, &c.fare)?,
    ];
    let mut trips = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let at = |i: usize| rec.get(idx[i]).unwrap_or("").trim();
        let row = line + 2;
        let ts = |i: usize| {
            parse_timestamp(at(i), &tz).map_err(|e| GfenError::Ingest(format!("row {row}: {e}")))
        };
        let fare: f64 = at(5)
            .parse()
            .map_err(|_| GfenError::Ingest(format!("row {row}: bad fare {:?}", at(5))))?;
        if !(fare >= 0.0) {
            return Err(GfenError::Ingest(format!("row {row}: negative fare")));
        }
        let trip = Trip {
            driver: at(0).to_string(),
            dispatched_at: ts(1)?,
            started_at: ts(2)?,
            completed_at: ts(3)?,
            dropoff_taz: at(4).to_string(),
            fare,
        };
        if trip.started_at < trip.dispatched_at || trip.completed_at < trip.started_at {
            return Err(GfenError::Ingest(format!(
                "row {row}: timestamps out of order"
            )));
        }
        trips.push(trip);
    }
    Ok(trips)
}

pub fn read_trips_csv(path: &Path, config: &IngestConfig) -> Result<Vec<Trip>> {
    read_trips(std::fs::File::open(path)?, config)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinReport {
    pub binned: usize,
    pub unknown_taz: usize,
    pub nonempty_vertices: usize,
}

/// Observation lists per graph vertex. Observations in zones the graph does
/// not contain (including dropped, disconnected ones) are counted and
/// skipped.
pub fn bin_to_graph(
    obs: &[Observation],
    graph: &SpatioTemporalGraph,
) -> Result<(Vec<Vec<f64>>, BinReport)> {
    let map: HashMap<&str, usize> = graph.location_map();
    let mut out = vec![Vec::new(); graph.n_vertices()];
    let mut report = BinReport::default();
    for o in obs {
        if o.hour >= graph.n_times() {
            return Err(GfenError::Ingest(format!(
                "hour {} outside the graph's {} time slots",
                o.hour,
                graph.n_times()
            )));
        }
        match map.get(o.taz.as_str()) {
            Some(&loc) => {
                out[graph.vertex(loc, o.hour)].push(o.productivity);
                report.binned += 1;
            }
            None => report.unknown_taz += 1,
        }
    }
    if report.unknown_taz > 0 {
        log::warn!(
            "{} observations in zones outside the graph were skipped",
            report.unknown_taz
        );
    }
    report.nonempty_vertices = out.iter().filter(|v| !v.is_empty()).count();
    Ok((out, report))
}

pub fn write_observations<W: std::io::Write>(obs: &[Observation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for o in obs {
        w.serialize(o)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations(path: &Path) -> Result<Vec<Observation>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
