use serde::{Deserialize, Serialize};

/// Broadcast schedule phase. Ordered: runs only ever move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Branches explore independently; notes are still extracted into the pool.
    Probe,
    /// Pool entries are sent to every branch at the start of each step.
    Broadcast,
    /// Synchronization stops; branches decode to completion.
    FreeRun,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Probe => "probe",
            Mode::Broadcast => "broadcast",
            Mode::FreeRun => "free_run",
        }
    }
}

/// True when a recorded sequence of modes never moves backwards.
pub fn is_monotone<'a>(modes: impl IntoIterator<Item = &'a Mode>) -> bool {
    let mut prev = Mode::Probe;
    for &m in modes {
        if m < prev {
            return false;
        }
        prev = m;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering() {
        assert!(Mode::Probe < Mode::Broadcast && Mode::Broadcast < Mode::FreeRun);
        assert!(is_monotone(&[Mode::Probe, Mode::Probe, Mode::Broadcast, Mode::FreeRun]));
        assert!(!is_monotone(&[Mode::Broadcast, Mode::Probe]));
    }
}
