//! Parsing and normalization of voltage recordings and APD target lists.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("voltage file contains no samples")]
    Empty,
    #[error("line {line}: '{text}' is not a finite number")]
    BadLine { line: usize, text: String },
    #[error("APD list is empty")]
    EmptyList,
    #[error("APD entry {position}: '{text}' is not a finite number")]
    BadEntry { position: usize, text: String },
    #[error("cannot normalize: all samples equal {0}")]
    Degenerate(f64),
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads one decimal per non-empty line.
pub fn load_voltage_file(bytes: &[u8]) -> Result<Vec<f64>, DataError> {
    let text = std::str::from_utf8(bytes).map_err(|_| DataError::NotUtf8)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v = parse_finite(trimmed).ok_or_else(|| DataError::BadLine {
            line: i + 1,
            text: trimmed.to_string(),
        })?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(out)
}

/// Rescales to `[0, normalize_to]`; `normalize_to == 0` returns the input unchanged.
pub fn normalize(samples: &[f64], normalize_to: f64) -> Result<Vec<f64>, DataError> {
    if samples.is_empty() {
        return Err(DataError::Empty);
    }
    if normalize_to == 0.0 {
        return Ok(samples.to_vec());
    }
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if max == min {
        return Err(DataError::Degenerate(min));
    }
    let scale = normalize_to / (max - min);
    Ok(samples
        .iter()
        .map(|&v| {
            // pin the extremes so min/max land exactly on 0 and normalize_to
            if v == max {
                normalize_to
            } else {
                (v - min) * scale
            }
        })
        .collect())
}

/// Parses a comma-separated list of APD values in ms.
pub fn parse_apd_list(text: &str) -> Result<Vec<f64>, DataError> {
    if text.trim().is_empty() {
        return Err(DataError::EmptyList);
    }
    text.split(',')
        .enumerate()
        .map(|(i, item)| {
            let t = item.trim();
            parse_finite(t).ok_or_else(|| DataError::BadEntry {
                position: i + 1,
                text: t.to_string(),
            })
        })
        .collect()
}

/// A normalized voltage recording at one cycle length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageDataset {
    pub label: String,
    pub samples: Vec<f64>,
    pub sample_interval: f64,
    pub cycle_length: f64,
    pub weight: f64,
}

/// Target APDs at one cycle length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApdDataset {
    pub label: String,
    pub targets: Vec<f64>,
    pub threshold: f64,
    pub cycle_length: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dataset {
    Voltage(VoltageDataset),
    Apd(ApdDataset),
}

impl Dataset {
    pub fn label(&self) -> &str {
        match self {
            Dataset::Voltage(d) => &d.label,
            Dataset::Apd(d) => &d.label,
        }
    }

    pub fn cycle_length(&self) -> f64 {
        match self {
            Dataset::Voltage(d) => d.cycle_length,
            Dataset::Apd(d) => d.cycle_length,
        }
    }

    pub fn weight(&self) -> f64 {
        match self {
            Dataset::Voltage(d) => d.weight,
            Dataset::Apd(d) => d.weight,
        }
    }
}
