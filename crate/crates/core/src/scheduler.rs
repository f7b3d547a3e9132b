//! Windowed broadcast schedule.
//!
//! Every step appends the number of newly admitted notes `n_t` to the record.
//! Each time the record length reaches a multiple of `W`, the window mean
//! `g_j` is compared with the first window's mean `g_ref`:
//! `r_j = g_j / (g_ref + eps)`. Probe moves to Broadcast when `r_j < start`,
//! Broadcast moves to FreeRun when `r_j < stop`. One transition per window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::mode::Mode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedulerError {
    #[error("cannot record step counts after entering free-run")]
    RecordAfterFreeRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTransition {
    /// Record length when the transition fired (steps are counted from 1).
    pub step: usize,
    pub from: Mode,
    pub to: Mode,
    pub ratio: f64,
}

/// One completed window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    /// 1-based window index.
    pub index: usize,
    pub end_step: usize,
    pub gain: f64,
    /// `None` for the reference window.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    mode: Mode,
    record: Vec<usize>,
    g_ref: Option<f64>,
    window_size: usize,
    start_threshold: f64,
    stop_threshold: f64,
    epsilon: f64,
    transitions: Vec<ModeTransition>,
    windows: Vec<WindowRecord>,
}

impl SchedulerState {
    pub fn new(window_size: usize, start_threshold: f64, stop_threshold: f64, epsilon: f64) -> Self {
        assert!(window_size >= 1, "window size must be positive");
        Self {
            mode: Mode::Probe,
            record: Vec::new(),
            g_ref: None,
            window_size,
            start_threshold,
            stop_threshold,
            epsilon,
            transitions: Vec::new(),
            windows: Vec::new(),
        }
    }

    pub fn from_config(config: &RunConfig) -> Self {
        Self::new(
            config.window_size,
            config.start_threshold,
            config.stop_threshold,
            config.epsilon,
        )
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn record(&self) -> &[usize] {
        &self.record
    }

    pub fn g_ref(&self) -> Option<f64> {
        self.g_ref
    }

    pub fn transitions(&self) -> &[ModeTransition] {
        &self.transitions
    }

    pub fn windows(&self) -> &[WindowRecord] {
        &self.windows
    }

    pub fn broadcasting_active(&self) -> bool {
        self.mode == Mode::Broadcast
    }

    pub fn record_step(&mut self, n: usize) -> Result<(), SchedulerError> {
        if self.mode == Mode::FreeRun {
            return Err(SchedulerError::RecordAfterFreeRun);
        }
        self.record.push(n);
        Ok(())
    }

    /// Close a window if the record length is a positive multiple of `W`.
    pub fn window_update(&mut self) -> Option<ModeTransition> {
        let len = self.record.len();
        if len == 0 || !len.is_multiple_of(self.window_size) {
            return None;
        }
        let window = &self.record[len - self.window_size..];
        let gain = window.iter().sum::<usize>() as f64 / self.window_size as f64;
        let index = len / self.window_size;
        let Some(g_ref) = self.g_ref else {
            self.g_ref = Some(gain);
            self.windows.push(WindowRecord {
                index,
                end_step: len,
                gain,
                ratio: None,
            });
            return None;
        };
        let ratio = gain / (g_ref + self.epsilon);
        self.windows.push(WindowRecord {
            index,
            end_step: len,
            gain,
            ratio: Some(ratio),
        });
        let to = match self.mode {
            Mode::Probe if ratio < self.start_threshold => Mode::Broadcast,
            Mode::Broadcast if ratio < self.stop_threshold => Mode::FreeRun,
            _ => return None,
        };
        let t = ModeTransition {
            step: len,
            from: self.mode,
            to,
            ratio,
        };
        self.mode = to;
        self.transitions.push(t);
        Some(t)
    }

    /// `record_step` followed by `window_update`.
    pub fn observe(&mut self, n: usize) -> Result<Option<ModeTransition>, SchedulerError> {
        self.record_step(n)?;
        Ok(self.window_update())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> SchedulerState {
        SchedulerState::new(3, 0.4, 0.1, 1e-9)
    }

    #[test]
    fn three_window_trace() {
        let mut s = defaults();
        for n in [10, 8] {
            assert_eq!(s.observe(n).unwrap(), None);
        }
        assert_eq!(s.observe(12).unwrap(), None);
        assert_eq!(s.g_ref(), Some(10.0));
        assert_eq!(s.mode(), Mode::Probe);

        for n in [3, 3] {
            assert_eq!(s.observe(n).unwrap(), None);
        }
        let t = s.observe(3).unwrap().expect("probe -> broadcast");
        assert_eq!((t.step, t.from, t.to), (6, Mode::Probe, Mode::Broadcast));
        // 3 / (10 + 1e-9), computed independently.
        assert!((t.ratio - 0.299_999_999_97).abs() < 1e-12);
        assert!(s.broadcasting_active());

        s.observe(0).unwrap();
        s.observe(1).unwrap();
        let t = s.observe(1).unwrap().expect("broadcast -> free run");
        assert_eq!((t.step, t.from, t.to), (9, Mode::Broadcast, Mode::FreeRun));
        assert!((t.ratio - (2.0 / 3.0) / (10.0 + 1e-9)).abs() < 1e-15);
        assert!(!s.broadcasting_active());
        assert_eq!(s.record_step(1), Err(SchedulerError::RecordAfterFreeRun));
        assert_eq!(s.record().len(), 9);
    }

    #[test]
    fn no_skip_from_probe_to_free_run() {
        let mut s = defaults();
        for n in [10, 10, 10, 0, 0] {
            s.observe(n).unwrap();
        }
        assert_eq!(s.observe(0).unwrap().map(|t| t.to), Some(Mode::Broadcast));
        assert_eq!(s.mode(), Mode::Broadcast);
    }

    #[test]
    fn ratio_equal_to_start_does_not_fire() {
        // eps = 0 makes the ratio exact: 2 / 5 = 0.4.
        let mut s = SchedulerState::new(1, 0.4, 0.1, 0.0);
        s.observe(5).unwrap();
        assert_eq!(s.observe(2).unwrap(), None);
        assert_eq!(s.mode(), Mode::Probe);
    }

    #[test]
    fn zero_reference_window() {
        let mut s = defaults();
        for _ in 0..3 {
            s.observe(0).unwrap();
        }
        assert_eq!(s.g_ref(), Some(0.0));
        for _ in 0..2 {
            s.observe(0).unwrap();
        }
        // 0 / eps = 0 < start.
        assert_eq!(s.observe(0).unwrap().map(|t| t.ratio), Some(0.0));
    }

    #[test]
    fn broadcast_check_only() {
        let mut s = defaults();
        assert!(!s.broadcasting_active());
        s.mode = Mode::FreeRun;
        assert!(!s.broadcasting_active());
    }
}
