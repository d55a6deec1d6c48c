//! Uniformly sampled trajectories and their on-disk form.
//!
//! CSV layout: header `t,y1,...,yn`, one row per sample, every float written
//! with 17 significant digits (lossless f64 round-trip). A JSON sidecar
//! carries the generation metadata.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// A trajectory sampled on the uniform grid t_n = t0 + n·h.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub system_name: String,
    pub t0: f64,
    /// Grid spacing (> 0).
    pub h: f64,
    /// N + 1 states of one shared dimension.
    pub states: Vec<Vec<f64>>,
}

/// Sidecar metadata written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: String,
    pub y0: Vec<f64>,
    pub h: f64,
    /// Number of transitions (states.len() − 1).
    pub n: usize,
    pub solver_tol: f64,
}

impl Trajectory {
    /// Number of transitions N (one less than the number of states).
    pub fn n_transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|n| self.time(n)).collect()
    }

    /// Checks grid and shape invariants.
    pub fn validate(&self) -> Result<()> {
        if self.h <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "trajectory step must be positive, got {}",
                self.h
            )));
        }
        if self.states.is_empty() {
            return Err(Error::InvalidArgument("trajectory has no states".into()));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::InvalidArgument("trajectory states are empty".into()));
        }
        for (n, s) in self.states.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "state {n} has dimension {} (expected {dim})",
                    s.len()
                )));
            }
        }
        Ok(())
    }

    /// Writes the sample table as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("y{i}")));
        w.write_record(&header)?;
        for (n, state) in self.states.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", self.time(n))];
            row.extend(state.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a sample table written by [`Trajectory::write_csv`]. The grid
    /// spacing is recovered from the time column; `system_name` is taken
    /// from the sidecar when available, otherwise left empty.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for record in r.records() {
            let record = record?;
            let mut vals = record.iter().map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad float '{s}': {e}")))
            });
            let t = vals.next().ok_or_else(|| {
                Error::InvalidArgument("empty csv row".into())
            })??;
            times.push(t);
            states.push(vals.collect::<Result<Vec<f64>>>()?);
        }
        if states.len() < 2 {
            return Err(Error::InvalidArgument(
                "trajectory csv needs at least two samples".into(),
            ));
        }
        let t0 = times[0];
        let h = times[1] - times[0];
        for (n, &t) in times.iter().enumerate() {
            if (t - (t0 + n as f64 * h)).abs() > 1e-9 * h.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "non-uniform time grid at row {n}"
                )));
            }
        }
        let traj = Trajectory {
            system_name: String::new(),
            t0,
            h,
            states,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn write_meta(&self, path: &Path, solver_tol: f64) -> Result<()> {
        let meta = TrajectoryMeta {
            system: self.system_name.clone(),
            y0: self.states[0].clone(),
            h: self.h,
            n: self.n_transitions(),
            solver_tol,
        };
        std::fs::write(path, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_meta(path: &Path) -> Result<TrajectoryMeta> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        Trajectory {
            system_name: "dp".into(),
            t0: 0.0,
            h: 0.5,
            states: vec![
                vec![1.0, 2.0, -3.0, 0.25],
                vec![0.1, -0.2, 0.3, -0.4],
                vec![std::f64::consts::PI, 1e-17, -1e300, 0.0],
            ],
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = sample();
        traj.write_csv(&path).unwrap();
        let back = Trajectory::read_csv(&path).unwrap();
        assert_eq!(back.states, traj.states);
        assert_eq!(back.t0, traj.t0);
        assert_eq!(back.h, traj.h);
    }

    #[test]
    fn meta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.meta.json");
        let traj = sample();
        traj.write_meta(&path, 1e-12).unwrap();
        let meta = Trajectory::read_meta(&path).unwrap();
        assert_eq!(meta.system, "dp");
        assert_eq!(meta.h, 0.5);
        assert_eq!(meta.n, 2);
        assert_eq!(meta.y0, traj.states[0]);
        assert_eq!(meta.solver_tol, 1e-12);
    }

    #[test]
    fn ragged_states_are_rejected() {
        let mut traj = sample();
        traj.states[1].pop();
        assert!(traj.validate().is_err());
    }

    #[test]
    fn header_names_follow_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        sample().write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,y1,y2,y3,y4\n"));
    }
}
