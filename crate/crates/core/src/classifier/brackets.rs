use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, disjoint numeric intervals with one representative center each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub intervals: Vec<[f64; 2]>,
    pub centers: Vec<f64>,
}

impl BracketSpec {
    /// Age brackets 0-2, 3-9 and 10-19 with their midpoints.
    pub fn age_defaults() -> Self {
        Self {
            intervals: vec![[0.0, 2.0], [3.0, 9.0], [10.0, 19.0]],
            centers: vec![1.0, 6.0, 14.5],
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() || self.centers.len() != self.intervals.len() {
            return Err(Error::Config(
                "brackets need one center per interval".into(),
            ));
        }
        for (i, ([lo, hi], c)) in self.intervals.iter().zip(&self.centers).enumerate() {
            if !(lo <= c && c <= hi) {
                return Err(Error::Config(format!(
                    "center {c} outside bracket [{lo}, {hi}]"
                )));
            }
            if i > 0 {
                if !(self.centers[i - 1] < *c) {
                    return Err(Error::Config("bracket centers must increase".into()));
                }
                if !(self.intervals[i - 1][1] < *lo) {
                    return Err(Error::Config(
                        "brackets must be ordered and disjoint".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Bracket containing `v`; values in a gap go to the lower bracket and
    /// values beyond either end to the outermost one.
    pub fn index_of(&self, v: f64) -> usize {
        (0..self.len() - 1)
            .find(|&i| v < self.intervals[i + 1][0])
            .unwrap_or(self.len() - 1)
    }
}
