//! Fixed time-step schedule with a truncated final step.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative slack when deciding whether a duration is a whole number of
/// steps; absorbs representation error such as `172800 / 0.1`.
const WHOLE_STEP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    start: f64,
    duration: f64,
    dt: f64,
    steps: u64,
}

impl Schedule {
    pub fn new(start: f64, duration: f64, dt: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "duration",
                value: duration,
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: dt,
            });
        }
        if !start.is_finite() {
            return Err(Error::InvalidParameter {
                name: "start time",
                value: start,
            });
        }
        Ok(Self {
            start,
            duration,
            dt,
            steps: whole_steps(duration, dt),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Simulated time at level `k` (before step `k`); level `steps()` is the end.
    pub fn time_at(&self, k: u64) -> f64 {
        if k >= self.steps {
            self.end()
        } else {
            self.start + k as f64 * self.dt
        }
    }

    /// Length of step `k`: the base step, except a shorter final step that
    /// lands exactly on the end time.
    pub fn step_len(&self, k: u64) -> f64 {
        self.time_at(k + 1) - self.time_at(k)
    }

    /// `(level, start time, dt)` for every step.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64, f64)> + '_ {
        (0..self.steps).map(move |k| (k, self.time_at(k), self.step_len(k)))
    }

    /// Levels at which snapshots are taken: every `interval` rounded down to
    /// whole steps, starting at level 0. There are `floor(duration /
    /// interval) + 1` of them.
    pub fn snapshot_levels(&self, interval: f64) -> Result<Vec<u64>> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "snapshot interval",
                value: interval,
            });
        }
        let stride = (floor_tol(interval / self.dt) as u64).max(1);
        let count = floor_tol(self.duration / interval) as u64 + 1;
        Ok((0..count).map(|i| (i * stride).min(self.steps)).collect())
    }
}

fn floor_tol(x: f64) -> f64 {
    libm::floor(x * (1.0 + WHOLE_STEP_TOL))
}

fn whole_steps(duration: f64, dt: f64) -> u64 {
    let ratio = duration / dt;
    let nearest = libm::round(ratio);
    if nearest >= 1.0 && (nearest * dt - duration).abs() <= WHOLE_STEP_TOL * duration {
        nearest as u64
    } else {
        libm::ceil(ratio) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_days_at_tenth_second() {
        let s = Schedule::new(0.0, 172_800.0, 0.1).unwrap();
        assert_eq!(s.steps(), 1_728_000);
        assert!((s.step_len(s.steps() - 1) - 0.1).abs() < 1e-9);
        assert_eq!(s.time_at(s.steps()), 172_800.0);
    }

    #[test]
    fn truncated_final_step() {
        let s = Schedule::new(0.0, 0.25, 0.1).unwrap();
        let lens: Vec<f64> = s.iter().map(|(_, _, dt)| dt).collect();
        assert_eq!(lens.len(), 3);
        assert!((lens[0] - 0.1).abs() < 1e-12);
        assert!((lens[1] - 0.1).abs() < 1e-12);
        assert!((lens[2] - 0.05).abs() < 1e-12);
        assert!((lens.iter().sum::<f64>() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn short_duration_is_one_step() {
        let s = Schedule::new(10.0, 0.01, 0.1).unwrap();
        assert_eq!(s.steps(), 1);
        assert!((s.step_len(0) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(Schedule::new(0.0, 0.0, 0.1).is_err());
        assert!(Schedule::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn snapshot_levels_count() {
        let s = Schedule::new(0.0, 10.0, 0.5).unwrap();
        assert_eq!(s.snapshot_levels(2.0).unwrap(), vec![0, 4, 8, 12, 16, 20]);
        // interval not a multiple of dt: rounded down to 3 steps
        assert_eq!(s.snapshot_levels(1.7).unwrap(), vec![0, 3, 6, 9, 12, 15]);
        assert_eq!(s.snapshot_levels(100.0).unwrap(), vec![0]);
    }
}
