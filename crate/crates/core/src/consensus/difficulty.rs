//! Nested per-order difficulty thresholds.
//!
//! Work is simulated: a mining attempt that meets the leaf threshold yields a
//! uniform sample in `[0, p_R)`, and the achieved order is the hardest order
//! whose threshold the sample also meets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DifficultyError {
    #[error("difficulty schedule needs at least one order")]
    Empty,
    #[error("threshold for order {order} must lie in (0, 1], got {value}")]
    OutOfRange { order: usize, value: f64 },
    #[error("thresholds must be strictly increasing: p_{order} = {value} does not exceed p_{prev}", prev = order - 1)]
    NotNested { order: usize, value: f64 },
    #[error("work sample {sample} meets no threshold (p_R = {leaf})")]
    MeetsNoThreshold { sample: f64, leaf: f64 },
    #[error("order {order} out of range 1..={orders}")]
    OrderOutOfRange { order: usize, orders: usize },
    #[error("coincidence is only defined toward harder orders: from {from} to {to}")]
    WrongDirection { from: usize, to: usize },
}

/// `thresholds[r - 1]` is the probability that one attempt meets order `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DifficultySchedule {
    thresholds: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DifficultySchedule {
    type Error = DifficultyError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        DifficultySchedule::new(v)
    }
}

impl From<DifficultySchedule> for Vec<f64> {
    fn from(s: DifficultySchedule) -> Self {
        s.thresholds
    }
}

impl DifficultySchedule {
    pub fn new(thresholds: Vec<f64>) -> Result<Self, DifficultyError> {
        if thresholds.is_empty() {
            return Err(DifficultyError::Empty);
        }
        for (i, &p) in thresholds.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(DifficultyError::OutOfRange { order: i + 1, value: p });
            }
            if i > 0 && p <= thresholds[i - 1] {
                return Err(DifficultyError::NotNested { order: i + 1, value: p });
            }
        }
        Ok(DifficultySchedule { thresholds })
    }

    /// Thresholds given as required leading zero bits, `p_r = 2^-bits_r`.
    pub fn from_leading_zero_bits(bits: &[u32]) -> Result<Self, DifficultyError> {
        Self::new(bits.iter().map(|&b| (-(b as f64)).exp2()).collect())
    }

    pub fn num_orders(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn threshold(&self, order: usize) -> Result<f64, DifficultyError> {
        self.check_order(order)?;
        Ok(self.thresholds[order - 1])
    }

    /// Fork-choice weight of one block counted in a chain of `order`: the
    /// expected number of attempts it represents.
    pub fn chain_weight(&self, order: usize) -> f64 {
        1.0 / self.thresholds[order - 1]
    }

    fn check_order(&self, order: usize) -> Result<(), DifficultyError> {
        if order == 0 || order > self.num_orders() {
            return Err(DifficultyError::OrderOutOfRange { order, orders: self.num_orders() });
        }
        Ok(())
    }
}

/// Hardest order whose threshold `work_sample` meets.
pub fn classify_order(work_sample: f64, schedule: &DifficultySchedule) -> Result<usize, DifficultyError> {
    schedule
        .thresholds
        .iter()
        .position(|&p| work_sample < p)
        .map(|i| i + 1)
        .ok_or(DifficultyError::MeetsNoThreshold {
            sample: work_sample,
            leaf: *schedule.thresholds.last().expect("non-empty"),
        })
}

/// Probability that a block meeting `from_order` also meets `to_order`.
pub fn coincidence_probability(
    schedule: &DifficultySchedule,
    from_order: usize,
    to_order: usize,
) -> Result<f64, DifficultyError> {
    let from = schedule.threshold(from_order)?;
    let to = schedule.threshold(to_order)?;
    if to_order > from_order {
        return Err(DifficultyError::WrongDirection { from: from_order, to: to_order });
    }
    Ok(to / from)
}

/// Maps a hash prefix of `bits` bits onto the unit interval, so that
/// `k` leading zero bits corresponds to a sample below `2^-k`.
pub fn work_sample_from_hash(hash: u64, bits: u32) -> f64 {
    hash as f64 / (bits as f64).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_orders() -> DifficultySchedule {
        DifficultySchedule::from_leading_zero_bits(&[12, 8, 4]).unwrap()
    }

    #[test]
    fn classifies_hash_prefixes() {
        let s = three_orders();
        assert_eq!(classify_order(work_sample_from_hash(0x000F, 16), &s).unwrap(), 1);
        assert_eq!(classify_order(work_sample_from_hash(0x00FF, 16), &s).unwrap(), 2);
        assert_eq!(classify_order(work_sample_from_hash(0x0FFF, 16), &s).unwrap(), 3);
        assert_eq!(classify_order(work_sample_from_hash(0x0FFA, 16), &s).unwrap(), 3);
    }

    #[test]
    fn sample_above_leaf_threshold_is_a_caller_bug() {
        let s = three_orders();
        assert!(matches!(
            classify_order(work_sample_from_hash(0x1000, 16), &s),
            Err(DifficultyError::MeetsNoThreshold { .. })
        ));
    }

    #[test]
    fn coincidence_ratios() {
        let s = three_orders();
        assert_eq!(coincidence_probability(&s, 3, 2).unwrap(), 0.0625);
        assert_eq!(coincidence_probability(&s, 3, 1).unwrap(), (-8f64).exp2());
        for r in 1..=3 {
            assert_eq!(coincidence_probability(&s, r, r).unwrap(), 1.0);
        }
        assert!(coincidence_probability(&s, 4, 1).is_err());
        assert!(coincidence_probability(&s, 1, 2).is_err());
    }

    #[test]
    fn rejects_unnested_schedules() {
        assert!(DifficultySchedule::new(vec![0.5, 0.25]).is_err());
        assert!(DifficultySchedule::new(vec![0.5, 0.5]).is_err());
        assert!(DifficultySchedule::new(vec![0.0, 0.5]).is_err());
        assert!(DifficultySchedule::new(vec![]).is_err());
        assert!(DifficultySchedule::new(vec![0.1, 1.0]).is_ok());
    }

    #[test]
    fn weight_is_expected_attempts() {
        let s = three_orders();
        assert_eq!(s.chain_weight(1), 4096.0);
        assert_eq!(s.chain_weight(3), 16.0);
    }
}
