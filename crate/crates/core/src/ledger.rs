//! Volume bookkeeping: stored water against cumulative boundary flows and
//! the water added back by the negative-depth clamp.

/// Volumes accumulated over one or more steps, m³.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepFlows {
    pub inflow: f64,
    pub outflow: f64,
    /// Negative depth removed by clamping, expressed as a volume (≤ 0).
    pub clamped: f64,
}

impl StepFlows {
    pub fn add(&mut self, other: &StepFlows) {
        self.inflow += other.inflow;
        self.outflow += other.outflow;
        self.clamped += other.clamped;
    }
}

impl core::ops::AddAssign for StepFlows {
    fn add_assign(&mut self, rhs: Self) {
        self.add(&rhs);
    }
}

/// Mass balance at one time level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassLedger {
    pub step: u64,
    pub time: f64,
    /// Stored water, m³.
    pub volume: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub clamped: f64,
}

impl MassLedger {
    pub fn new(step: u64, time: f64, volume: f64, totals: StepFlows) -> Self {
        Self {
            step,
            time,
            volume,
            inflow: totals.inflow,
            outflow: totals.outflow,
            clamped: totals.clamped,
        }
    }

    /// `Δvolume - (inflow - outflow - clamped)`.
    pub fn residual(&self, initial_volume: f64) -> f64 {
        (self.volume - initial_volume) - (self.inflow - self.outflow - self.clamped)
    }

    /// Residual relative to the largest volume involved in the balance.
    pub fn relative_residual(&self, initial_volume: f64) -> f64 {
        let scale = self
            .volume
            .abs()
            .max(initial_volume.abs())
            .max(self.inflow.abs())
            .max(self.outflow.abs())
            .max(self.clamped.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.residual(initial_volume).abs() / scale
        }
    }
}
