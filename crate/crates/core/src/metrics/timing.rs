//! Manual reading time and the speedup of the automated pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const READING_WPM: f64 = 238.0;

pub fn manual_time_estimate(total_words: u64, wpm: f64) -> Result<f64> {
    if wpm.is_nan() || wpm <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "reading speed must be positive, got {wpm}"
        )));
    }
    Ok(total_words as f64 / wpm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Speedup {
    pub raw: f64,
    pub reported: u64,
}

/// Ratio of manual to automated minutes; reported rounds half up.
pub fn speedup_multiple(manual_minutes: f64, automated_minutes: f64) -> Result<Speedup> {
    if automated_minutes.is_nan()
        || automated_minutes <= 0.0
        || !manual_minutes.is_finite()
        || manual_minutes < 0.0
    {
        return Err(Error::InvalidInput(format!(
            "cannot compute speedup of {manual_minutes} over {automated_minutes} minutes"
        )));
    }
    let raw = manual_minutes / automated_minutes;
    Ok(Speedup {
        raw,
        reported: (raw + 0.5).floor() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manual_minutes() {
        let m = manual_time_estimate(442_047, READING_WPM).unwrap();
        assert!((1856.0..=1859.0).contains(&m));
        assert_eq!(manual_time_estimate(238, READING_WPM).unwrap(), 1.0);
        assert_eq!(manual_time_estimate(0, READING_WPM).unwrap(), 0.0);
        assert!(manual_time_estimate(1, 0.0).is_err());
    }

    #[test]
    fn speedups() {
        assert_eq!(speedup_multiple(1860.0, 175.4).unwrap().reported, 11);
        assert_eq!(speedup_multiple(1860.0, 197.0).unwrap().reported, 9);
        let eq = speedup_multiple(5.0, 5.0).unwrap();
        assert_eq!((eq.raw, eq.reported), (1.0, 1));
        assert_eq!(speedup_multiple(5.0, 2.0).unwrap().reported, 3);
        assert!(speedup_multiple(1.0, 0.0).is_err());
    }
}
