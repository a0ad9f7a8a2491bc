use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub prediction: C64,
    pub observed: C64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub observed: Vec<C64>,
    pub predictions: Vec<C64>,
    pub cap_distance: f64,
    /// Sorted by distance.
    pub matches: Vec<Match>,
    pub unmatched_predictions: Vec<C64>,
    pub unmatched_observed: Vec<C64>,
    pub n_observed: usize,
    pub n_predicted: usize,
    /// As many observed outliers as admissible predictions.
    pub counts_agree: bool,
}

impl OutlierReport {
    pub fn max_match_distance(&self) -> Option<f64> {
        self.matches.iter().map(|m| m.distance).reduce(f64::max)
    }

    /// Every prediction matched and nothing else observed.
    pub fn exact(&self) -> bool {
        self.unmatched_predictions.is_empty() && self.unmatched_observed.is_empty()
    }
}

/// `10 (log log n)^{-1/2}`.
pub fn default_match_cap(n: usize) -> f64 {
    10.0 / (n as f64).ln().ln().sqrt()
}

/// Greedy globally-nearest matching: repeatedly pairs the closest remaining
/// (prediction, observed) couple whose distance is at most `cap_distance`.
pub fn match_outliers(observed: &[C64], predictions: &[C64], cap_distance: f64) -> OutlierReport {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in predictions.iter().enumerate() {
        for (j, o) in observed.iter().enumerate() {
            let d = (p - o).norm();
            if d <= cap_distance {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predictions.len()];
    let mut used_o = vec![false; observed.len()];
    let mut matches = Vec::new();
    for (d, i, j) in pairs {
        if used_p[i] || used_o[j] {
            continue;
        }
        used_p[i] = true;
        used_o[j] = true;
        matches.push(Match {
            prediction: predictions[i],
            observed: observed[j],
            distance: d,
        });
    }
    let pick = |items: &[C64], used: &[bool]| -> Vec<C64> {
        items
            .iter()
            .zip(used)
            .filter(|(_, &u)| !u)
            .map(|(&z, _)| z)
            .collect()
    };
    OutlierReport {
        observed: observed.to_vec(),
        predictions: predictions.to_vec(),
        cap_distance,
        matches,
        unmatched_predictions: pick(predictions, &used_p),
        unmatched_observed: pick(observed, &used_o),
        n_observed: observed.len(),
        n_predicted: predictions.len(),
        counts_agree: observed.len() == predictions.len(),
    }
}

pub const REPORT_CSV_HEADER: &str =
    "trial,n_observed,n_predicted,max_match_distance,unmatched_predictions,unmatched_observed";

/// One CSV row; an empty distance field means nothing matched.
pub fn write_report_csv_row<W: Write>(
    mut out: W,
    trial: u64,
    r: &OutlierReport,
) -> std::io::Result<()> {
    let dist = r
        .max_match_distance()
        .map_or(String::new(), |d| d.to_string());
    writeln!(
        out,
        "{trial},{},{},{dist},{},{}",
        r.n_observed,
        r.n_predicted,
        r.unmatched_predictions.len(),
        r.unmatched_observed.len()
    )
}
