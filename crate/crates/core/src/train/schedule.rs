//! Reduce-on-plateau learning-rate schedule.

use crate::error::{Error, Result};

/// Strict-improvement tolerance on the monitored loss.
pub const PLATEAU_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(patience: usize, factor: f64, min_lr: f64) -> Result<Self> {
        if patience == 0 {
            return Err(Error::Config("plateau patience must be >= 1".into()));
        }
        if !(factor > 1.0) {
            return Err(Error::Config(format!("lr factor must exceed 1, got {factor}")));
        }
        if !(min_lr >= 0.0) {
            return Err(Error::Config(format!("min_lr must be non-negative, got {min_lr}")));
        }
        Ok(PlateauScheduler {
            patience,
            factor,
            min_lr,
            best: f64::INFINITY,
            wait: 0,
        })
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records one epoch's loss and returns the learning rate for the next.
    pub fn update(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best - PLATEAU_TOLERANCE {
            self.best = loss;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait < self.patience {
            return lr;
        }
        self.wait = 0;
        (lr / self.factor).max(self.min_lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(losses: &[f64], patience: usize, min_lr: f64) -> Vec<f64> {
        let mut s = PlateauScheduler::new(patience, 10.0, min_lr).unwrap();
        let mut lr = 1.0;
        losses
            .iter()
            .map(|&l| {
                lr = s.update(l, lr);
                lr
            })
            .collect()
    }

    #[test]
    fn improving_losses_keep_lr() {
        assert_eq!(trace(&[1.0, 0.9, 0.8], 2, 0.0), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_stalled_epochs_drop_once() {
        assert_eq!(trace(&[1.0, 0.9, 0.91, 0.92], 2, 0.0), vec![1.0, 1.0, 1.0, 0.1]);
    }

    #[test]
    fn counter_resets_after_a_drop() {
        let lrs = trace(&[1.0, 1.0, 1.0, 1.0, 1.0], 2, 0.0);
        assert_eq!(lrs, vec![1.0, 1.0, 0.1, 0.1, 0.1 / 10.0]);
    }

    #[test]
    fn floor_holds_and_tolerance_applies() {
        let lrs = trace(&[1.0; 8], 1, 0.01);
        assert_eq!(lrs.last(), Some(&0.01));
        assert!(lrs.iter().all(|&lr| lr >= 0.01));
        // an improvement smaller than the tolerance is not an improvement
        assert_eq!(trace(&[1.0, 1.0 - 5e-7], 1, 0.0), vec![1.0, 0.1]);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(PlateauScheduler::new(0, 10.0, 0.0).is_err());
        assert!(PlateauScheduler::new(3, 1.0, 0.0).is_err());
        assert!(PlateauScheduler::new(3, 10.0, -1.0).is_err());
    }
}
