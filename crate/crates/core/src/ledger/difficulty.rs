//! Volume-driven difficulty control.
//!
//! Difficulty is the number of leading zero hex characters a block hash must
//! carry. After every block the controller averages the transaction count of
//! the most recent `window` blocks: busy periods step difficulty down toward
//! `min`, quiet periods step it up toward `max`, and anything in between
//! drifts one step toward `base`.

use serde::{Deserialize, Serialize};

use super::LedgerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyParams {
    pub window: usize,
    pub min: u32,
    pub max: u32,
    pub base: u32,
    pub v_low: f64,
    pub v_high: f64,
    /// When set the controller ignores volume and always returns this value.
    pub static_value: Option<u32>,
}

impl Default for DifficultyParams {
    fn default() -> Self {
        Self::balanced()
    }
}

impl DifficultyParams {
    /// w=3, range [1,4], base 2, thresholds (3, 10).
    pub fn balanced() -> Self {
        Self {
            window: 3,
            min: 1,
            max: 4,
            base: 2,
            v_low: 3.0,
            v_high: 10.0,
            static_value: None,
        }
    }

    pub fn fixed(d: u32) -> Self {
        Self {
            window: 1,
            min: d,
            max: d,
            base: d,
            v_low: 0.0,
            v_high: f64::INFINITY,
            static_value: Some(d),
        }
    }

    pub fn is_static(&self) -> bool {
        self.static_value.is_some()
    }

    /// Difficulty of the first block after genesis.
    pub fn initial(&self) -> u32 {
        self.static_value.unwrap_or(self.base)
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        let ok = self.window >= 1
            && self.min >= 1
            && self.min <= self.base
            && self.base <= self.max
            && self.v_low < self.v_high
            && self.static_value.is_none_or(|d| d >= 1);
        if ok {
            Ok(())
        } else {
            Err(LedgerError::BadDifficultyParams(format!("{self:?}")))
        }
    }
}

/// Mean transaction count over the `window` most recent entries (fewer if the
/// history is shorter). An empty history averages to zero.
pub fn mean_recent_volume(tx_counts: &[usize], window: usize) -> f64 {
    let take = window.min(tx_counts.len());
    if take == 0 {
        return 0.0;
    }
    let sum: usize = tx_counts[tx_counts.len() - take..].iter().sum();
    sum as f64 / take as f64
}

pub fn next_difficulty(current: u32, avg_volume: f64, params: &DifficultyParams) -> u32 {
    if let Some(d) = params.static_value {
        return d;
    }
    let cur = current as i64;
    let stepped = if avg_volume >= params.v_high {
        cur - 1
    } else if avg_volume <= params.v_low {
        cur + 1
    } else {
        cur - (cur - params.base as i64).signum()
    };
    stepped.clamp(params.min as i64, params.max as i64) as u32
}

/// Running controller: feed it the transaction count of each committed block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptiveDifficulty {
    params: DifficultyParams,
    current: u32,
    history: Vec<usize>,
}

impl AdaptiveDifficulty {
    pub fn new(params: DifficultyParams) -> Self {
        let current = params.initial();
        Self {
            params,
            current,
            history: Vec::new(),
        }
    }

    pub fn params(&self) -> &DifficultyParams {
        &self.params
    }

    /// Difficulty the next block must satisfy.
    pub fn current(&self) -> u32 {
        self.current
    }

    pub fn average_volume(&self) -> f64 {
        mean_recent_volume(&self.history, self.params.window)
    }

    /// Records a committed block and returns the difficulty for the next one.
    pub fn record_block(&mut self, tx_count: usize) -> u32 {
        self.history.push(tx_count);
        self.current = next_difficulty(self.current, self.average_volume(), &self.params);
        self.current
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let p = DifficultyParams::balanced();
        assert_eq!(next_difficulty(3, 12.0, &p), 2);
        assert_eq!(next_difficulty(3, 2.0, &p), 4);
        assert_eq!(next_difficulty(2, 5.0, &p), 2);
        assert_eq!(next_difficulty(4, 5.0, &p), 3);
        assert_eq!(next_difficulty(1, 15.0, &p), 1);
        assert_eq!(next_difficulty(4, 0.0, &p), 4);
    }

    #[test]
    fn thresholds_are_inclusive() {
        let p = DifficultyParams::balanced();
        assert_eq!(next_difficulty(3, 10.0, &p), 2);
        assert_eq!(next_difficulty(3, 3.0, &p), 4);
    }

    #[test]
    fn mean_volume_rules() {
        assert_eq!(mean_recent_volume(&[9, 4, 6, 5], 3), 5.0);
        assert_eq!(mean_recent_volume(&[2], 3), 2.0);
        assert_eq!(mean_recent_volume(&[], 3), 0.0);
    }

    #[test]
    fn static_ignores_volume() {
        let p = DifficultyParams::fixed(3);
        for v in [0.0, 5.0, 100.0] {
            assert_eq!(next_difficulty(3, v, &p), 3);
        }
    }

    #[test]
    fn params_validation() {
        assert!(DifficultyParams::balanced().validate().is_ok());
        let mut bad = DifficultyParams::balanced();
        bad.base = 7;
        assert!(bad.validate().is_err());
        let mut bad = DifficultyParams::balanced();
        bad.v_low = 11.0;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn never_leaves_bounds(
            vols in proptest::collection::vec(0usize..30, 1..60),
            window in 1usize..6,
        ) {
            let params = DifficultyParams { window, ..DifficultyParams::balanced() };
            let mut c = AdaptiveDifficulty::new(params.clone());
            for v in vols {
                let d = c.record_block(v);
                prop_assert!((params.min..=params.max).contains(&d));
            }
        }
    }

    proptest! {

        #[test]
        fn drifts_to_base_and_stays(start in 1u32..=4, avg in 3.01f64..9.99) {
            let p = DifficultyParams::balanced();
            let mut d = start;
            let steps = start.abs_diff(p.base);
            for _ in 0..steps {
                d = next_difficulty(d, avg, &p);
            }
            prop_assert_eq!(d, p.base);
            for _ in 0..5 {
                d = next_difficulty(d, avg, &p);
                prop_assert_eq!(d, p.base);
            }
        }

        #[test]
        fn high_volume_reaches_min(start in 1u32..=4, avg in 10.0f64..100.0) {
            let p = DifficultyParams::balanced();
            let mut d = start;
            for _ in 0..(start - p.min) {
                d = next_difficulty(d, avg, &p);
            }
            prop_assert_eq!(d, p.min);
        }
    }
}
