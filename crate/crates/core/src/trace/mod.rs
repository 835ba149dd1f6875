//! Spatio-temporal traces: one uniformly sampled multivariate series per
//! location.

mod foodcourt;

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::spatial::Location;

pub use foodcourt::{generate_food_court, FoodCourt, FoodCourtConfig};

/// Missing-value fraction above which [`SpatioTemporalTrace::clean`] drops a location.
pub const DEFAULT_MISSING_THRESHOLD: f64 = 0.15;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unknown location id `{0}`")]
    UnknownLocation(String),
    #[error("time grid is not uniform: step {expected} expected, found {found} after t = {after}")]
    NonUniformGrid { expected: f64, found: f64, after: f64 },
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Unparseable { row: usize, column: String, value: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("duplicate sample for location `{id}` at time {time}")]
    DuplicateSample { id: String, time: f64 },
    #[error("header must start with `location_id,time` and name at least one variable")]
    BadHeader,
    #[error("trace has no samples")]
    Empty,
    #[error("every location was dropped while cleaning")]
    AllDropped,
    #[error("invalid food court config: {0}")]
    InvalidConfig(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Values for every location on a shared uniform time grid. Missing cells
/// are `NaN` until [`clean`](Self::clean) imputes them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalTrace {
    variables: Vec<String>,
    location_ids: Vec<String>,
    start: f64,
    step: f64,
    len: usize,
    time_unit: String,
    /// Per location, row-major `time x variable`.
    values: Vec<Vec<f64>>,
}

impl SpatioTemporalTrace {
    /// Build from per-location `time x variable` matrices (`values[loc][t][var]`).
    pub fn new(
        variables: Vec<String>,
        location_ids: Vec<String>,
        start: f64,
        step: f64,
        values: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, TraceError> {
        assert_eq!(location_ids.len(), values.len(), "one matrix per location");
        assert!(step > 0.0, "time step must be positive");
        let len = values.first().map_or(0, Vec::len);
        if len == 0 {
            return Err(TraceError::Empty);
        }
        let nv = variables.len();
        let flat = values
            .into_iter()
            .map(|m| {
                assert_eq!(m.len(), len, "all locations share the time grid");
                m.into_iter()
                    .flat_map(|row| {
                        assert_eq!(row.len(), nv, "one value per variable");
                        row
                    })
                    .collect()
            })
            .collect();
        Ok(SpatioTemporalTrace {
            variables,
            location_ids,
            start,
            step,
            len,
            time_unit: String::from("units"),
            values: flat,
        })
    }

    pub fn with_time_unit(mut self, unit: impl Into<String>) -> Self {
        self.time_unit = unit.into();
        self
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn location_ids(&self) -> &[String] {
        &self.location_ids
    }

    pub fn num_locations(&self) -> usize {
        self.location_ids.len()
    }

    /// Number of samples per location.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start + self.step * index as f64
    }

    /// Time span covered by the grid.
    pub fn horizon(&self) -> f64 {
        self.step * (self.len - 1) as f64
    }

    /// Grid index of `time`, if it lies on the grid.
    pub fn time_index(&self, time: f64) -> Option<usize> {
        let k = ((time - self.start) / self.step).round();
        let on_grid = (self.start + k * self.step - time).abs() <= 1e-9 * self.step.max(1.0);
        (k >= 0.0 && (k as usize) < self.len && on_grid).then_some(k as usize)
    }

    #[inline]
    pub fn value(&self, location: usize, time: usize, variable: usize) -> f64 {
        self.values[location][time * self.variables.len() + variable]
    }

    /// Series of one variable at one location.
    pub fn series(&self, location: usize, variable: usize) -> Vec<f64> {
        (0..self.len).map(|t| self.value(location, t, variable)).collect()
    }

    /// `(min, max)` of a variable over all locations and times, ignoring missing cells.
    pub fn value_range(&self, variable: usize) -> Option<(f64, f64)> {
        let nv = self.variables.len();
        self.values
            .iter()
            .flat_map(|m| m.iter().skip(variable).step_by(nv))
            .filter(|v| !v.is_nan())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((f64::min(lo, v), f64::max(hi, v))),
            })
    }

    pub fn missing_fraction(&self, location: usize) -> f64 {
        let cells = &self.values[location];
        cells.iter().filter(|v| v.is_nan()).count() as f64 / cells.len() as f64
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|m| m.iter().all(|v| !v.is_nan()))
    }

    /// Drop locations whose missing fraction exceeds `threshold`, then fill
    /// the remaining gaps with the nearest observed value in time (ties go to
    /// the earlier sample). A location whose variable is entirely missing is
    /// dropped as well, since nothing can be imputed from it.
    pub fn clean(&self, threshold: f64) -> Result<(SpatioTemporalTrace, Vec<String>), TraceError> {
        let nv = self.variables.len();
        let mut kept_ids = Vec::new();
        let mut kept_values = Vec::new();
        let mut dropped = Vec::new();
        'locations: for (loc, id) in self.location_ids.iter().enumerate() {
            if self.missing_fraction(loc) > threshold {
                dropped.push(id.clone());
                continue;
            }
            let mut cells = self.values[loc].clone();
            for var in 0..nv {
                let series = self.series(loc, var);
                match impute_nearest(&series) {
                    Some(filled) => {
                        for (t, v) in filled.into_iter().enumerate() {
                            cells[t * nv + var] = v;
                        }
                    }
                    None => {
                        dropped.push(id.clone());
                        continue 'locations;
                    }
                }
            }
            kept_ids.push(id.clone());
            kept_values.push(cells);
        }
        if kept_ids.is_empty() {
            return Err(TraceError::AllDropped);
        }
        Ok((
            SpatioTemporalTrace { location_ids: kept_ids, values: kept_values, ..self.clone() },
            dropped,
        ))
    }

    /// Write as `location_id,time,<vars...>` CSV.
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<(), TraceError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["location_id".to_string(), "time".to_string()];
        header.extend(self.variables.iter().cloned());
        wtr.write_record(&header)?;
        for (loc, id) in self.location_ids.iter().enumerate() {
            for t in 0..self.len {
                let mut record = vec![id.clone(), self.time(t).to_string()];
                for v in 0..self.variables.len() {
                    let x = self.value(loc, t, v);
                    record.push(if x.is_nan() { String::new() } else { x.to_string() });
                }
                wtr.write_record(&record)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Nearest non-missing value in time, ties to the earlier sample. `None`
/// when the whole series is missing.
pub fn impute_nearest(series: &[f64]) -> Option<Vec<f64>> {
    let observed: Vec<usize> = (0..series.len()).filter(|&i| !series[i].is_nan()).collect();
    if observed.is_empty() {
        return None;
    }
    let mut out = series.to_vec();
    let mut next = 0;
    for i in 0..series.len() {
        if !series[i].is_nan() {
            continue;
        }
        while next < observed.len() && observed[next] < i {
            next += 1;
        }
        let before = next.checked_sub(1).map(|k| observed[k]);
        let after = observed.get(next).copied();
        let pick = match (before, after) {
            (Some(b), Some(a)) => {
                if i - b <= a - i {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!("observed is non-empty"),
        };
        out[i] = series[pick];
    }
    Some(out)
}

/// Load a trace CSV (`location_id,time,<var1>,...`) aligned to `locations`.
pub fn load_traces(path: impl AsRef<Path>, locations: &[Location]) -> Result<SpatioTemporalTrace, TraceError> {
    load_traces_from(std::fs::File::open(path)?, locations)
}

/// Empty cells and `NA`/`NaN`/`null` are missing; any other non-numeric cell is an error.
pub fn load_traces_from(reader: impl Read, locations: &[Location]) -> Result<SpatioTemporalTrace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "location_id" || &header[1] != "time" {
        return Err(TraceError::BadHeader);
    }
    let variables: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let index: HashMap<&str, usize> = locations.iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect();

    let mut rows: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() != header.len() {
            return Err(TraceError::RowLength { row, expected: header.len(), found: record.len() });
        }
        let id = &record[0];
        let loc = *index.get(id).ok_or_else(|| TraceError::UnknownLocation(id.to_string()))?;
        let time = record[1].parse::<f64>().ok().filter(|t| t.is_finite()).ok_or_else(|| {
            TraceError::Unparseable { row, column: "time".into(), value: record[1].to_string() }
        })?;
        let values = variables
            .iter()
            .enumerate()
            .map(|(k, name)| parse_cell(&record[k + 2]).ok_or_else(|| TraceError::Unparseable {
                row,
                column: name.clone(),
                value: record[k + 2].to_string(),
            }))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((loc, time, values));
    }
    if rows.is_empty() {
        return Err(TraceError::Empty);
    }

    let times: BTreeSet<u64> = rows.iter().map(|r| r.1.to_bits()).collect();
    let mut grid: Vec<f64> = times.into_iter().map(f64::from_bits).collect();
    grid.sort_by(f64::total_cmp);
    let step = if grid.len() > 1 { grid[1] - grid[0] } else { 1.0 };
    for w in grid.windows(2) {
        let found = w[1] - w[0];
        if (found - step).abs() > 1e-9 * step.abs().max(1.0) {
            return Err(TraceError::NonUniformGrid { expected: step, found, after: w[0] });
        }
    }
    let start = grid[0];
    let len = grid.len();
    let nv = variables.len();
    let mut values = vec![vec![f64::NAN; len * nv]; locations.len()];
    let mut seen = vec![vec![false; len]; locations.len()];
    for (loc, time, vals) in rows {
        let t = ((time - start) / step).round() as usize;
        if std::mem::replace(&mut seen[loc][t], true) {
            return Err(TraceError::DuplicateSample { id: locations[loc].id.clone(), time });
        }
        values[loc][t * nv..(t + 1) * nv].copy_from_slice(&vals);
    }
    Ok(SpatioTemporalTrace {
        variables,
        location_ids: locations.iter().map(|l| l.id.clone()).collect(),
        start,
        step,
        len,
        time_unit: String::from("units"),
        values,
    })
}

fn parse_cell(cell: &str) -> Option<f64> {
    match cell {
        "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL" => Some(f64::NAN),
        s => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locs(ids: &[&str]) -> Vec<Location> {
        ids.iter().enumerate().map(|(i, id)| Location::new(*id, 0.0, i as f64 * 0.01)).collect()
    }

    #[test]
    fn loads_single_location() {
        let csv = "location_id,time,x\na,0,1\na,1,2\na,2,3\n";
        let tr = load_traces_from(csv.as_bytes(), &locs(&["a"])).unwrap();
        assert_eq!(tr.len(), 3);
        assert_eq!(tr.variables(), ["x"]);
        assert_eq!(tr.series(0, 0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn unknown_location_is_named() {
        let csv = "location_id,time,x\nzz,0,1\n";
        let err = load_traces_from(csv.as_bytes(), &locs(&["a"])).unwrap_err();
        assert!(err.to_string().contains("zz"), "{err}");
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let csv = "location_id,time,x\na,0,1\na,1,2\na,3,3\n";
        assert!(matches!(
            load_traces_from(csv.as_bytes(), &locs(&["a"])),
            Err(TraceError::NonUniformGrid { .. })
        ));
    }

    #[test]
    fn missing_versus_unparseable() {
        let ok = "location_id,time,x\na,0,NA\na,1,\na,2,4\n";
        let tr = load_traces_from(ok.as_bytes(), &locs(&["a"])).unwrap();
        assert!(tr.value(0, 0, 0).is_nan() && tr.value(0, 1, 0).is_nan());
        let bad = "location_id,time,x\na,0,abc\n";
        assert!(matches!(
            load_traces_from(bad.as_bytes(), &locs(&["a"])),
            Err(TraceError::Unparseable { .. })
        ));
    }

    #[test]
    fn duplicate_sample_rejected() {
        let csv = "location_id,time,x\na,0,1\na,0,2\n";
        assert!(matches!(
            load_traces_from(csv.as_bytes(), &locs(&["a"])),
            Err(TraceError::DuplicateSample { .. })
        ));
    }

    #[test]
    fn shuffled_rows_equal_sorted_rows() {
        let sorted = "location_id,time,x,y\na,0,1,5\na,1,2,6\nb,0,3,7\nb,1,4,8\n";
        let shuffled = "location_id,time,x,y\nb,1,4,8\na,1,2,6\nb,0,3,7\na,0,1,5\n";
        let l = locs(&["a", "b"]);
        assert_eq!(
            load_traces_from(sorted.as_bytes(), &l).unwrap(),
            load_traces_from(shuffled.as_bytes(), &l).unwrap()
        );
    }

    #[test]
    fn nearest_imputation_prefers_earlier_on_ties() {
        let nan = f64::NAN;
        assert_eq!(impute_nearest(&[nan, 5.0, nan, nan, 9.0]).unwrap(), vec![5.0, 5.0, 5.0, 9.0, 9.0]);
        assert_eq!(impute_nearest(&[1.0, nan, 3.0]).unwrap(), vec![1.0, 1.0, 3.0]);
        assert!(impute_nearest(&[nan, nan]).is_none());
    }

    fn trace_with_missing(missing: usize, total: usize) -> SpatioTemporalTrace {
        let series: Vec<Vec<f64>> =
            (0..total).map(|t| vec![if t < missing { f64::NAN } else { t as f64 }]).collect();
        let full: Vec<Vec<f64>> = (0..total).map(|t| vec![t as f64]).collect();
        SpatioTemporalTrace::new(vec!["x".into()], vec!["gappy".into(), "full".into()], 0.0, 1.0, vec![series, full])
            .unwrap()
    }

    #[test]
    fn clean_threshold_is_strict() {
        // 3 of 20 missing is exactly 15%: kept.
        let (kept, dropped) = trace_with_missing(3, 20).clean(DEFAULT_MISSING_THRESHOLD).unwrap();
        assert!(dropped.is_empty());
        assert!(kept.is_complete());
        // 4 of 25 is 16%: dropped.
        let (kept, dropped) = trace_with_missing(4, 25).clean(DEFAULT_MISSING_THRESHOLD).unwrap();
        assert_eq!(dropped, vec!["gappy".to_string()]);
        assert_eq!(kept.location_ids(), ["full"]);
    }

    #[test]
    fn clean_without_gaps_is_identity_and_idempotent() {
        let tr = trace_with_missing(0, 10);
        let (once, dropped) = tr.clean(0.15).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(once, tr);
        let gappy = trace_with_missing(2, 20);
        let (a, _) = gappy.clean(0.15).unwrap();
        let (b, _) = a.clean(0.15).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clean_all_dropped() {
        let tr = trace_with_missing(10, 10);
        let tr = SpatioTemporalTrace { location_ids: vec!["gappy".into()], values: vec![tr.values[0].clone()], ..tr };
        assert!(matches!(tr.clean(0.15), Err(TraceError::AllDropped)));
    }

    #[test]
    fn time_index_lookup() {
        let tr = SpatioTemporalTrace::new(vec!["x".into()], vec!["a".into()], 10.0, 5.0, vec![vec![vec![0.0]; 4]])
            .unwrap();
        assert_eq!(tr.time_index(15.0), Some(1));
        assert_eq!(tr.time_index(17.0), None);
        assert_eq!(tr.time_index(30.0), None);
        assert_eq!(tr.horizon(), 15.0);
    }
}
