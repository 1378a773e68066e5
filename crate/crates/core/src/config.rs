//! Run configuration: every tunable of the pipeline in one flat TOML table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planning::{PlannerParams, RobotConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Simulation tick (s).
    pub dt: f64,
    pub map_size: f64,
    pub grid_resolution: f64,

    pub robot_radius: f64,
    pub a_max: f64,
    pub yaw_rate_max: f64,
    /// Sensor wedge for limited-view gaze policies (degrees).
    pub fov_width_deg: f64,
    pub fov_depth: f64,

    pub global_edge_duration: f64,
    pub global_max_expansions: usize,
    pub mpc_steps: usize,
    pub mpc_dt: f64,
    pub mpc_iterations: usize,
    pub local_duration: f64,
    pub local_samples: usize,
    pub safety_margin: f64,
    pub prediction_horizon: f64,
    pub output_horizon: f64,
    pub goal_tolerance: f64,

    pub replan_interval: f64,
    pub deadlock_brakes: u32,
    pub time_limit: f64,
    pub trial_speeds: Vec<f64>,

    pub d_sample: f64,
    pub directions: usize,
    pub n_vel: usize,
    pub vo_speed: f64,
    pub time_samples: usize,
    pub t_sample: f64,
    pub start_time_samples: usize,
    pub t_max: f64,

    pub seed: u64,
    pub seeds_per_cell: usize,
    pub dataset_ii_maps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PlannerParams::default();
        let r = RobotConfig::default();
        RunConfig {
            dt: 0.05,
            map_size: 50.0,
            grid_resolution: 0.5,
            robot_radius: r.radius,
            a_max: r.a_max,
            yaw_rate_max: r.yaw_rate_max,
            fov_width_deg: 90.0,
            fov_depth: r.fov_depth,
            global_edge_duration: p.global_edge_duration,
            global_max_expansions: p.global_max_expansions,
            mpc_steps: p.mpc_steps,
            mpc_dt: p.mpc_dt,
            mpc_iterations: p.mpc_iterations,
            local_duration: p.local_duration,
            local_samples: p.local_samples,
            safety_margin: p.safety_margin,
            prediction_horizon: p.prediction_horizon,
            output_horizon: p.output_horizon,
            goal_tolerance: p.goal_tolerance,
            replan_interval: 0.2,
            deadlock_brakes: 5,
            time_limit: 60.0,
            trial_speeds: vec![2.0, 4.0, 6.0],
            d_sample: 12.5,
            directions: 8,
            n_vel: 16,
            vo_speed: 4.0,
            time_samples: 10,
            t_sample: 1.0,
            start_time_samples: 10,
            t_max: 20.0,
            seed: 0,
            seeds_per_cell: 20,
            dataset_ii_maps: 40,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Checks every field, reporting the first offending one by name.
    pub fn validate(&self) -> Result<()> {
        fn pos(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        }
        fn nonneg(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")))
            }
        }
        fn count(name: &str, v: usize) -> Result<()> {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be at least 1")))
            }
        }
        for (name, v) in [
            ("dt", self.dt),
            ("map_size", self.map_size),
            ("grid_resolution", self.grid_resolution),
            ("robot_radius", self.robot_radius),
            ("a_max", self.a_max),
            ("yaw_rate_max", self.yaw_rate_max),
            ("fov_depth", self.fov_depth),
            ("global_edge_duration", self.global_edge_duration),
            ("mpc_dt", self.mpc_dt),
            ("local_duration", self.local_duration),
            ("prediction_horizon", self.prediction_horizon),
            ("output_horizon", self.output_horizon),
            ("goal_tolerance", self.goal_tolerance),
            ("replan_interval", self.replan_interval),
            ("time_limit", self.time_limit),
            ("d_sample", self.d_sample),
            ("vo_speed", self.vo_speed),
            ("t_sample", self.t_sample),
            ("t_max", self.t_max),
        ] {
            pos(name, v)?;
        }
        nonneg("safety_margin", self.safety_margin)?;
        for (name, v) in [
            ("global_max_expansions", self.global_max_expansions),
            ("mpc_steps", self.mpc_steps),
            ("mpc_iterations", self.mpc_iterations),
            ("local_samples", self.local_samples),
            ("directions", self.directions),
            ("n_vel", self.n_vel),
            ("time_samples", self.time_samples),
            ("start_time_samples", self.start_time_samples),
            ("seeds_per_cell", self.seeds_per_cell),
            ("dataset_ii_maps", self.dataset_ii_maps),
        ] {
            count(name, v)?;
        }
        count("deadlock_brakes", self.deadlock_brakes as usize)?;
        if self.fov_width_deg != 90.0 && self.fov_width_deg != 360.0 {
            return Err(Error::InvalidParameter(format!(
                "fov_width_deg must be 90 or 360, got {}",
                self.fov_width_deg
            )));
        }
        if self.trial_speeds.is_empty() {
            return Err(Error::InvalidParameter("trial_speeds must not be empty".into()));
        }
        for &v in &self.trial_speeds {
            pos("trial_speeds", v)?;
        }
        let ratio = self.replan_interval / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "replan_interval must be a whole number of ticks".into(),
            ));
        }
        if self.d_sample >= self.map_size {
            return Err(Error::InvalidParameter("d_sample must be smaller than map_size".into()));
        }
        if self.seed >= 1 << 63 {
            return Err(Error::InvalidParameter("seed must be below 2^63".into()));
        }
        Ok(())
    }

    pub fn robot(&self, v_cruise: f64) -> RobotConfig {
        RobotConfig {
            radius: self.robot_radius,
            a_max: self.a_max,
            v_cruise,
            yaw_rate_max: self.yaw_rate_max,
            fov_width: self.fov_width_deg.to_radians(),
            fov_depth: self.fov_depth,
        }
    }

    pub fn planner_params(&self) -> PlannerParams {
        PlannerParams {
            global_edge_duration: self.global_edge_duration,
            global_max_expansions: self.global_max_expansions,
            mpc_steps: self.mpc_steps,
            mpc_dt: self.mpc_dt,
            mpc_iterations: self.mpc_iterations,
            local_duration: self.local_duration,
            local_samples: self.local_samples,
            safety_margin: self.safety_margin,
            prediction_horizon: self.prediction_horizon,
            output_horizon: self.output_horizon,
            goal_tolerance: self.goal_tolerance,
            ..PlannerParams::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = RunConfig { t_max: 15.0, seed: 42, ..RunConfig::default() };
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn missing_keys_take_defaults() {
        let cfg = RunConfig::from_toml("t_max = 10.0\n").unwrap();
        assert_eq!(cfg.t_max, 10.0);
        assert_eq!(cfg.dt, 0.05);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(RunConfig::from_toml("t_maximum = 10.0\n").is_err());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = RunConfig::from_toml("dt = -1.0\n").unwrap_err().to_string();
        assert!(err.contains("dt"), "{err}");
        let err = RunConfig::from_toml("fov_width_deg = 120.0\n").unwrap_err().to_string();
        assert!(err.contains("fov_width_deg"), "{err}");
        assert!(RunConfig::from_toml("replan_interval = 0.07\n").is_err());
    }
}
