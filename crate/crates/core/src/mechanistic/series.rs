use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// JSON sidecar accompanying an area CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub t_rt_start_days: f64,
    pub brain_area_mm2: f64,
}

/// Timestamped tumor areas for one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSeries {
    times: Vec<f64>,
    areas: Vec<f64>,
    t_rt_start: f64,
    brain_area: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t_days: f64,
    area_mm2: f64,
}

impl AreaSeries {
    pub fn new(times: Vec<f64>, areas: Vec<f64>, t_rt_start: f64, brain_area: f64) -> Result<Self> {
        if times.len() != areas.len() {
            return Err(Error::invalid("times and areas differ in length"));
        }
        if times.is_empty() {
            return Err(Error::invalid("area series is empty"));
        }
        if times.iter().chain(&areas).any(|v| !v.is_finite()) {
            return Err(Error::invalid("area series contains non-finite values"));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("times must be non-negative and strictly increasing"));
        }
        if areas.iter().any(|&a| a <= 0.0) {
            return Err(Error::invalid("areas must be strictly positive"));
        }
        if !(t_rt_start.is_finite() && t_rt_start >= 0.0) {
            return Err(Error::invalid("t_rt_start must be non-negative"));
        }
        if !(brain_area.is_finite() && areas.iter().all(|&a| a < brain_area)) {
            return Err(Error::invalid("brain area must exceed every tumor area"));
        }
        Ok(Self { times, areas, t_rt_start, brain_area })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn t_rt_start(&self) -> f64 {
        self.t_rt_start
    }

    pub fn brain_area(&self) -> f64 {
        self.brain_area
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn meta(&self) -> SeriesMeta {
        SeriesMeta { t_rt_start_days: self.t_rt_start, brain_area_mm2: self.brain_area }
    }

    /// Same series with the areas replaced (used for bootstrap perturbation).
    pub fn with_areas(&self, areas: Vec<f64>) -> Result<Self> {
        Self::new(self.times.clone(), areas, self.t_rt_start, self.brain_area)
    }

    /// All points except the last, plus the held-out `(t, area)`.
    pub fn split_last(&self) -> Result<(Self, (f64, f64))> {
        let n = self.len();
        if n < 2 {
            return Err(Error::invalid("need at least two points to hold one out"));
        }
        let head = Self::new(
            self.times[..n - 1].to_vec(),
            self.areas[..n - 1].to_vec(),
            self.t_rt_start,
            self.brain_area,
        )?;
        Ok((head, (self.times[n - 1], self.areas[n - 1])))
    }

    /// Reads `t_days,area_mm2` CSV plus its JSON sidecar.
    pub fn load(csv_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<Self> {
        let meta: SeriesMeta = serde_json::from_slice(&std::fs::read(meta_path)?)?;
        let mut reader = csv::Reader::from_path(csv_path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_days", "area_mm2"] {
            return Err(Error::invalid("area CSV header must be `t_days,area_mm2`"));
        }
        let mut times = Vec::new();
        let mut areas = Vec::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            times.push(row.t_days);
            areas.push(row.area_mm2);
        }
        Self::new(times, areas, meta.t_rt_start_days, meta.brain_area_mm2)
    }

    pub fn save(&self, csv_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(csv_path)?;
        for (&t_days, &area_mm2) in self.times.iter().zip(&self.areas) {
            writer.serialize(Row { t_days, area_mm2 })?;
        }
        writer.flush()?;
        std::fs::write(meta_path, serde_json::to_vec_pretty(&self.meta())?)?;
        Ok(())
    }
}
