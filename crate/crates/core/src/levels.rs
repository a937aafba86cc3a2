//! The ladder of likelihood levels.
//!
//! Each level `j` is the prior restricted to `L > cutoff_j`, enclosing an
//! estimated prior mass `X_j`. New levels are placed at the `1 - e^-1`
//! quantile of the likelihoods gathered above the current top level, so each
//! encloses about `e^-1` of the mass of its predecessor. The estimates are
//! then refined from how often a particle at level `j` exceeds the cutoff of
//! level `j + 1`.

use std::f64::consts::E;

use crate::explorer::WeightVector;
use crate::model::LikelihoodValue;

/// Target compression between consecutive levels.
pub const COMPRESSION: f64 = 1.0 / E;

/// Quantile of the buffered likelihoods at which a new level is placed.
pub const NEW_LEVEL_QUANTILE: f64 = 1.0 - 1.0 / E;

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub cutoff: LikelihoodValue,
    /// Estimated ln X_j.
    pub log_x: f64,
    /// Steps spent at this level while the next level existed.
    pub visits: u64,
    /// Of those, steps whose likelihood exceeded the next level's cutoff.
    pub exceeds: u64,
    /// All steps spent at this level.
    pub occupancy: u64,
    pub(crate) expected_occupancy: f64,
}

impl Level {
    pub fn new(cutoff: LikelihoodValue, log_x: f64) -> Self {
        Self {
            cutoff,
            log_x,
            visits: 0,
            exceeds: 0,
            occupancy: 0,
            expected_occupancy: 0.0,
        }
    }

    /// Rebuild a level from serialized counters.
    pub fn with_counters(
        cutoff: LikelihoodValue,
        log_x: f64,
        visits: u64,
        exceeds: u64,
        occupancy: u64,
        expected_occupancy: f64,
    ) -> Self {
        Self {
            cutoff,
            log_x,
            visits,
            exceeds,
            occupancy,
            expected_occupancy,
        }
    }
}

/// Likelihoods gathered above the top cutoff since the last level was made.
#[derive(Clone, Debug, Default)]
pub struct LikelihoodBuffer {
    values: Vec<LikelihoodValue>,
    target: usize,
}

impl LikelihoodBuffer {
    pub fn new(target: usize) -> Self {
        Self {
            values: Vec::with_capacity(target),
            target,
        }
    }

    /// Append a value. Callers only pass values above the top cutoff.
    pub fn record(&mut self, value: LikelihoodValue) {
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn is_full(&self) -> bool {
        self.values.len() >= self.target
    }

    pub fn values(&self) -> &[LikelihoodValue] {
        &self.values
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }
}

/// 1-based rank of the order statistic used as the new cutoff: the rank
/// nearest to `q * n`, clamped to `[1, n]`.
pub fn quantile_rank(n: usize, q: f64) -> usize {
    ((q * n as f64).round() as usize).clamp(1, n)
}

/// Log of the regularised compression estimate between level `j` and `j + 1`.
pub fn log_compression(exceeds: u64, visits: u64, c: f64) -> f64 {
    ((exceeds as f64 + c * COMPRESSION) / (visits as f64 + c)).ln()
}

/// The ordered levels plus their visit bookkeeping.
#[derive(Clone, Debug)]
pub struct LevelSet {
    levels: Vec<Level>,
    /// `log_ratios[j]` is the current estimate of ln(X_{j+1} / X_j).
    log_ratios: Vec<f64>,
    /// Weights in force since the last flush of the expected occupancies.
    epoch_weights: Vec<f64>,
    pending_steps: u64,
}

impl Default for LevelSet {
    fn default() -> Self {
        Self::new()
    }
}

impl LevelSet {
    /// A ladder holding only the prior level.
    pub fn new() -> Self {
        Self {
            levels: vec![Level::new(LikelihoodValue::FLOOR, 0.0)],
            log_ratios: Vec::new(),
            epoch_weights: vec![1.0],
            pending_steps: 0,
        }
    }

    /// Rebuild a ladder from stored levels, e.g. one read back from disk.
    /// Returns `None` unless the first level is the prior level and the
    /// cutoffs and masses are strictly ordered.
    pub fn from_levels(levels: Vec<Level>) -> Option<Self> {
        let first = levels.first()?;
        if first.cutoff.log_l != f64::NEG_INFINITY || first.log_x != 0.0 {
            return None;
        }
        let ordered = levels
            .windows(2)
            .all(|w| w[0].cutoff < w[1].cutoff && w[0].log_x > w[1].log_x);
        if !ordered {
            return None;
        }
        let log_ratios = levels.windows(2).map(|w| w[1].log_x - w[0].log_x).collect();
        let n = levels.len();
        Some(Self {
            levels,
            log_ratios,
            epoch_weights: vec![1.0 / n as f64; n],
            pending_steps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Index of the current top level, `J`.
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn top_cutoff(&self) -> LikelihoodValue {
        self.levels[self.top()].cutoff
    }

    pub fn get(&self, j: usize) -> &Level {
        &self.levels[j]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn log_x(&self, j: usize) -> f64 {
        self.levels[j].log_x
    }

    pub fn cutoff(&self, j: usize) -> LikelihoodValue {
        self.levels[j].cutoff
    }

    /// ⟨n_j⟩: the integrated weight of level `j` over the run so far.
    pub fn expected_occupancy(&self, j: usize) -> f64 {
        self.levels[j].expected_occupancy + self.pending_steps as f64 * self.epoch_weights[j]
    }

    /// Index of the highest level whose cutoff `value` exceeds.
    pub fn containing_level(&self, value: LikelihoodValue) -> usize {
        self.levels
            .partition_point(|level| level.cutoff < value)
            .saturating_sub(1)
    }

    /// Place a new level at the `1 - e^-1` quantile of the buffer and purge
    /// every buffered value at or below it. The new level starts one unit of
    /// ln X below the previous top. Returns `None` while the buffer is short
    /// of its target.
    pub fn create_level(&mut self, buffer: &mut LikelihoodBuffer) -> Option<&Level> {
        if !buffer.is_full() || buffer.is_empty() {
            return None;
        }
        let rank = quantile_rank(buffer.len(), NEW_LEVEL_QUANTILE);
        let (_, cutoff, _) = buffer.values.select_nth_unstable(rank - 1);
        let cutoff = *cutoff;
        buffer.values.retain(|v| *v > cutoff);
        debug_assert!(cutoff > self.top_cutoff());

        self.flush_expected();
        let log_x = self.levels[self.top()].log_x - 1.0;
        self.levels.push(Level::new(cutoff, log_x));
        self.log_ratios.push(-1.0);
        self.epoch_weights.push(0.0);
        self.levels.last()
    }

    /// Count one step spent at level `j` with likelihood `value`.
    pub fn record_visit(&mut self, j: usize, value: LikelihoodValue) {
        let has_next = j + 1 < self.levels.len();
        let next_cutoff = if has_next {
            Some(self.levels[j + 1].cutoff)
        } else {
            None
        };
        let level = &mut self.levels[j];
        level.occupancy = level.occupancy.saturating_add(1);
        if let Some(next_cutoff) = next_cutoff {
            level.visits = level.visits.saturating_add(1);
            if value > next_cutoff {
                level.exceeds = level.exceeds.saturating_add(1);
            }
        }
        self.pending_steps += 1;
    }

    /// Replace the weights used to accumulate expected occupancies.
    pub fn set_weights(&mut self, weights: &WeightVector) {
        assert_eq!(weights.len(), self.levels.len(), "one weight per level");
        self.flush_expected();
        self.epoch_weights.clear();
        self.epoch_weights.extend_from_slice(weights.as_slice());
    }

    fn flush_expected(&mut self) {
        if self.pending_steps == 0 {
            return;
        }
        let steps = self.pending_steps as f64;
        for (level, w) in self.levels.iter_mut().zip(&self.epoch_weights) {
            level.expected_occupancy += steps * w;
        }
        self.pending_steps = 0;
    }

    /// Re-estimate every ln X_j from the exceedance counters.
    pub fn revise_log_x(&mut self, c: f64) {
        for j in 0..self.log_ratios.len() {
            let level = &self.levels[j];
            self.log_ratios[j] = log_compression(level.exceeds, level.visits, c);
        }
        self.accumulate_from(0);
    }

    /// Cheaper form of [`revise_log_x`](Self::revise_log_x) after a visit to
    /// level `j`: only the ratio between `j` and `j + 1` can have changed.
    /// Gives bit-identical results to a full revision.
    pub fn revise_after_visit(&mut self, j: usize, c: f64) {
        if j < self.log_ratios.len() {
            let level = &self.levels[j];
            self.log_ratios[j] = log_compression(level.exceeds, level.visits, c);
            self.accumulate_from(j);
        }
    }

    fn accumulate_from(&mut self, j: usize) {
        for k in j..self.log_ratios.len() {
            self.levels[k + 1].log_x = self.levels[k].log_x + self.log_ratios[k];
        }
    }

    /// Zero the occupancy counters (n_j and ⟨n_j⟩). The compression counters
    /// and hence the ln X estimates are kept.
    pub fn reset_counters(&mut self) {
        self.pending_steps = 0;
        for level in &mut self.levels {
            level.occupancy = 0;
            level.expected_occupancy = 0.0;
        }
    }

    /// Snapshot with pending expected occupancy folded in.
    pub fn snapshot(&self) -> Vec<Level> {
        let mut levels = self.levels.clone();
        for (j, level) in levels.iter_mut().enumerate() {
            level.expected_occupancy = self.expected_occupancy(j);
        }
        levels
    }

    /// Check the ladder's ordering invariants.
    pub fn is_consistent(&self) -> bool {
        let first = &self.levels[0];
        first.cutoff.log_l == f64::NEG_INFINITY
            && first.log_x == 0.0
            && self
                .levels
                .windows(2)
                .all(|w| w[0].cutoff < w[1].cutoff && w[0].log_x > w[1].log_x)
            && self
                .levels
                .iter()
                .all(|l| l.exceeds <= l.visits && l.log_x <= 0.0)
    }
}
