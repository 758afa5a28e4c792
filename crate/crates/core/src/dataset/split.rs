use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: 0.6, val: 0.2, test: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Partitions subjects (never individual examples) into train/val/test with
/// sizes equal to the rounded fractions; the test split takes the remainder.
pub fn split_subjects(subjects: &[String], config: &SplitConfig, seed_value: u64) -> Result<SubjectSplit> {
    let total = config.train + config.val + config.test;
    if (total - 1.0).abs() > 1e-9 || [config.train, config.val, config.test].iter().any(|&f| f < 0.0) {
        return Err(Error::Split(format!("fractions must be non-negative and sum to 1, got {total}")));
    }
    if subjects.len() < 5 {
        return Err(Error::Split(format!("need at least 5 subjects, got {}", subjects.len())));
    }
    let mut unique = subjects.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() != subjects.len() {
        return Err(Error::Split("duplicate subject ids".into()));
    }
    let n = unique.len();
    let n_train = (config.train * n as f64).round() as usize;
    let n_val = ((config.val * n as f64).round() as usize).min(n - n_train);
    unique.shuffle(&mut seed::rng(&[seed_value, 0x5b11]));
    let test = unique.split_off(n_train + n_val);
    let val = unique.split_off(n_train);
    Ok(SubjectSplit { train: unique, val, test })
}
