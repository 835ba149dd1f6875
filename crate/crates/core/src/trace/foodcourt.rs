//! Synthetic food-court occupancy traces.
//!
//! The floor is a `cols x rows` grid of square regions. Every customer enters
//! at the entrance region at time 0. At each decision instant a customer picks
//! a destination (a popular region with probability `popular_prob`, otherwise a
//! uniformly chosen non-popular region, which may be the one they already stand
//! in) and walks towards its center in a straight line at `speed_m_s`. The
//! occupancy of each region is sampled once per minute.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SpatioTemporalTrace, TraceError};
use crate::spatial::{Location, EARTH_RADIUS_M};

pub const OCCUPANCY_VARIABLE: &str = "numPeople";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoodCourtConfig {
    pub cols: usize,
    pub rows: usize,
    pub cell_size_m: f64,
    pub entrance: usize,
    pub popular: Vec<usize>,
    pub customers: usize,
    /// Simulated minutes; the trace has `horizon_min + 1` samples.
    pub horizon_min: usize,
    pub popular_prob: f64,
    pub decision_period_min: usize,
    pub speed_m_s: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
}

impl Default for FoodCourtConfig {
    fn default() -> Self {
        FoodCourtConfig {
            cols: 5,
            rows: 4,
            cell_size_m: 15.0,
            entrance: 0,
            popular: vec![7, 14, 19],
            customers: 500,
            horizon_min: 240,
            popular_prob: 0.8,
            decision_period_min: 10,
            speed_m_s: 1.4,
            origin_lat: 40.0,
            origin_lon: -75.0,
        }
    }
}

impl FoodCourtConfig {
    pub fn regions(&self) -> usize {
        self.cols * self.rows
    }

    fn validate(&self) -> Result<(), TraceError> {
        let bad = |msg: String| Err(TraceError::InvalidConfig(msg));
        let n = self.regions();
        if n < 2 {
            return bad(format!("need at least two regions, got {n}"));
        }
        if self.entrance >= n {
            return bad(format!("entrance {} out of range for {n} regions", self.entrance));
        }
        if self.popular.is_empty() {
            return bad("at least one popular region is required".into());
        }
        let mut sorted = self.popular.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.popular.len() {
            return bad("popular regions must be distinct".into());
        }
        if let Some(&p) = self.popular.iter().find(|&&p| p >= n) {
            return bad(format!("popular region {p} out of range for {n} regions"));
        }
        if sorted.len() == n {
            return bad("at least one region must be non-popular".into());
        }
        if !(0.0..=1.0).contains(&self.popular_prob) {
            return bad(format!("popular_prob {} outside [0, 1]", self.popular_prob));
        }
        if !(self.cell_size_m > 0.0) || !(self.speed_m_s > 0.0) || self.decision_period_min == 0 {
            return bad("cell size, speed and decision period must be positive".into());
        }
        if self.horizon_min == 0 {
            return bad("horizon must be at least one minute".into());
        }
        Ok(())
    }

    fn center(&self, region: usize) -> (f64, f64) {
        let (col, row) = (region % self.cols, region / self.cols);
        ((col as f64 + 0.5) * self.cell_size_m, (row as f64 + 0.5) * self.cell_size_m)
    }

    fn region_at(&self, (x, y): (f64, f64)) -> usize {
        let col = ((x / self.cell_size_m).floor().max(0.0) as usize).min(self.cols - 1);
        let row = ((y / self.cell_size_m).floor().max(0.0) as usize).min(self.rows - 1);
        row * self.cols + col
    }

    /// Region centers projected to latitude/longitude around the origin.
    pub fn locations(&self) -> Vec<Location> {
        let lat0 = self.origin_lat.to_radians();
        (0..self.regions())
            .map(|r| {
                let (x, y) = self.center(r);
                let lat = self.origin_lat + (y / EARTH_RADIUS_M).to_degrees();
                let lon = self.origin_lon + (x / (EARTH_RADIUS_M * lat0.cos())).to_degrees();
                let name = if r == self.entrance {
                    "entrance".to_string()
                } else if let Some(k) = self.popular.iter().position(|&p| p == r) {
                    format!("popular-{}", k + 1)
                } else {
                    format!("region-{r}")
                };
                Location::new(format!("r{r:02}"), lat, lon).with_name(name)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FoodCourt {
    pub config: FoodCourtConfig,
    pub locations: Vec<Location>,
    pub trace: SpatioTemporalTrace,
}

pub fn generate_food_court(config: &FoodCourtConfig, seed: u64) -> Result<FoodCourt, TraceError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.regions();
    let others: Vec<usize> = (0..n).filter(|r| !config.popular.contains(r)).collect();
    let step_m = config.speed_m_s * 60.0;

    let mut position = vec![config.center(config.entrance); config.customers];
    let mut target = position.clone();
    let mut counts = vec![vec![vec![0.0]; config.horizon_min + 1]; n];

    for minute in 0..=config.horizon_min {
        for p in &position {
            counts[config.region_at(*p)][minute][0] += 1.0;
        }
        if minute == config.horizon_min {
            break;
        }
        if minute % config.decision_period_min == 0 {
            for t in target.iter_mut() {
                let region = if rng.gen_bool(config.popular_prob) {
                    *config.popular.choose(&mut rng).expect("non-empty")
                } else {
                    *others.choose(&mut rng).expect("non-empty")
                };
                *t = config.center(region);
            }
        }
        for (p, t) in position.iter_mut().zip(&target) {
            let (dx, dy) = (t.0 - p.0, t.1 - p.1);
            let dist = dx.hypot(dy);
            *p = if dist <= step_m { *t } else { (p.0 + dx / dist * step_m, p.1 + dy / dist * step_m) };
        }
    }

    let locations = config.locations();
    let ids = locations.iter().map(|l| l.id.clone()).collect();
    let trace = SpatioTemporalTrace::new(vec![OCCUPANCY_VARIABLE.to_string()], ids, 0.0, 1.0, counts)?
        .with_time_unit("min");
    Ok(FoodCourt { config: config.clone(), locations, trace })
}
