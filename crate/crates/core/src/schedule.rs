//! Probe activation cadence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How often the trackers run and how often their state is persisted,
/// counted in training iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    pub activate_every: u64,
    pub snapshot_every: u64,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        ProbeSchedule {
            activate_every: 100,
            snapshot_every: 10_000,
        }
    }
}

impl ProbeSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.activate_every == 0 || self.snapshot_every == 0 {
            return Err(Error::MalformedReport(
                "schedule periods must be positive".into(),
            ));
        }
        if self.snapshot_every % self.activate_every != 0 {
            return Err(Error::MalformedReport(format!(
                "snapshot_every ({}) must be a multiple of activate_every ({})",
                self.snapshot_every, self.activate_every
            )));
        }
        Ok(())
    }

    pub fn is_activation(&self, iteration: u64) -> bool {
        iteration > 0 && iteration % self.activate_every == 0
    }

    pub fn is_snapshot(&self, iteration: u64) -> bool {
        iteration > 0 && iteration % self.snapshot_every == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cadence() {
        let s = ProbeSchedule::default();
        assert_eq!(s.activate_every, 100);
        assert_eq!(s.snapshot_every, 10_000);
        s.validate().unwrap();
    }

    #[test]
    fn cadence_counts_over_10k_iterations() {
        let s = ProbeSchedule::default();
        let activations = (1..=10_000).filter(|&i| s.is_activation(i)).count();
        let snapshots = (1..=10_000).filter(|&i| s.is_snapshot(i)).count();
        assert_eq!(activations, 100);
        assert_eq!(snapshots, 1);
    }

    #[test]
    fn misaligned_schedule_rejected() {
        let s = ProbeSchedule {
            activate_every: 100,
            snapshot_every: 150,
        };
        assert!(s.validate().is_err());
    }
}
