//! External pacing current.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StimulusError {
    #[error("stimulus duration must be positive and finite, got {0}")]
    Duration(f64),
    #[error("stimulus magnitude must be non-negative and finite, got {0}")]
    Magnitude(f64),
    #[error("biphasic timescale a must be positive and finite, got {0}")]
    Timescale(f64),
    #[error("biphasic offset must be finite, got {0}")]
    Offset(f64),
}

/// Pulse shape applied at the start of every pacing period.
///
/// The biphasic pulse is
/// `-i_mag * (t/a - b) / (1 + (t/a - c)^4)` for `t < duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StimulusConfig {
    Square {
        magnitude: f64,
        duration: f64,
    },
    Biphasic {
        i_mag: f64,
        a: f64,
        b: f64,
        c: f64,
        duration: f64,
    },
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self::default_square()
    }
}

impl StimulusConfig {
    pub const fn default_square() -> Self {
        StimulusConfig::Square {
            magnitude: 0.2,
            duration: 2.0,
        }
    }

    pub const fn default_biphasic() -> Self {
        StimulusConfig::Biphasic {
            i_mag: 0.4,
            a: 0.725,
            b: 7.0,
            c: 6.72,
            duration: 10.0,
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            StimulusConfig::Square { duration, .. } | StimulusConfig::Biphasic { duration, .. } => {
                duration
            }
        }
    }

    pub fn validate(&self) -> Result<(), StimulusError> {
        let d = self.duration();
        if !(d.is_finite() && d > 0.0) {
            return Err(StimulusError::Duration(d));
        }
        match *self {
            StimulusConfig::Square { magnitude, .. } => {
                if !(magnitude.is_finite() && magnitude >= 0.0) {
                    return Err(StimulusError::Magnitude(magnitude));
                }
            }
            StimulusConfig::Biphasic { i_mag, a, b, c, .. } => {
                if !(i_mag.is_finite() && i_mag >= 0.0) {
                    return Err(StimulusError::Magnitude(i_mag));
                }
                if !(a.is_finite() && a > 0.0) {
                    return Err(StimulusError::Timescale(a));
                }
                for off in [b, c] {
                    if !off.is_finite() {
                        return Err(StimulusError::Offset(off));
                    }
                }
            }
        }
        Ok(())
    }

    /// Current in 1/ms at `t` ms after the stimulus onset.
    pub fn current(&self, t: f64) -> f64 {
        if t >= self.duration() || t < 0.0 {
            return 0.0;
        }
        match *self {
            StimulusConfig::Square { magnitude, .. } => magnitude,
            StimulusConfig::Biphasic { i_mag, a, b, c, .. } => {
                let x = t / a;
                let y = x - c;
                -i_mag * (x - b) / (1.0 + y * y * y * y)
            }
        }
    }
}

/// Free-function form of [`StimulusConfig::current`].
pub fn stimulus_current(cfg: &StimulusConfig, t: f64) -> f64 {
    cfg.current(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_defaults() {
        let s = StimulusConfig::default();
        assert_eq!(s.current(1.0), 0.2);
        assert_eq!(s.current(0.0), 0.2);
        assert_eq!(s.current(2.0), 0.0);
        assert_eq!(s.current(2.5), 0.0);
    }

    #[test]
    fn biphasic_zero_and_peak_points() {
        let s = StimulusConfig::default_biphasic();
        assert!(s.current(0.725 * 7.0).abs() < 1e-9);
        assert!((s.current(0.725 * 6.72) - 0.112).abs() < 1e-9);
        assert_eq!(s.current(10.0), 0.0);
        assert_eq!(s.current(12.0), 0.0);
    }

    #[test]
    fn biphasic_changes_sign_once() {
        let s = StimulusConfig::default_biphasic();
        let mut changes = 0;
        let mut prev = s.current(1e-3).signum();
        for i in 1..10_000 {
            let t = i as f64 * 1e-3;
            let sign = s.current(t).signum();
            if sign != 0.0 && sign != prev {
                changes += 1;
                prev = sign;
            }
        }
        assert_eq!(changes, 1);
        assert!(s.current(1.0) > 0.0);
        assert!(s.current(9.0) < 0.0);
    }

    #[test]
    fn validation() {
        assert!(StimulusConfig::default().validate().is_ok());
        assert!(StimulusConfig::default_biphasic().validate().is_ok());
        let bad = StimulusConfig::Square {
            magnitude: 0.2,
            duration: 0.0,
        };
        assert_eq!(bad.validate(), Err(StimulusError::Duration(0.0)));
        let bad = StimulusConfig::Biphasic {
            i_mag: 0.4,
            a: 0.0,
            b: 7.0,
            c: 6.72,
            duration: 10.0,
        };
        assert_eq!(bad.validate(), Err(StimulusError::Timescale(0.0)));
        let bad = StimulusConfig::Square {
            magnitude: -1.0,
            duration: 2.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_string(&StimulusConfig::default()).unwrap();
        assert_eq!(json, r#"{"kind":"square","magnitude":0.2,"duration":2.0}"#);
        let back: StimulusConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, StimulusConfig::default());
    }
}
