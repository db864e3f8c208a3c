use serde::{Deserialize, Serialize};

/// One grid point of the rejection curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    /// Fraction of correct classifications rejected.
    pub fnr: f64,
    /// Fraction of misclassifications rejected.
    pub tnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Winning-class scores in ascending order with their correctness.
    pub scores: Vec<(f64, bool)>,
    /// Largest grid τ whose FNR stays within `max_fnr`.
    pub selected: Option<SweepPoint>,
    pub max_fnr: f64,
}

/// `0, step, 2 step, ..., 1`.
pub fn tau_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Rejects a classification when its score is below τ. With no
/// misclassifications TNR is reported as 0.
pub fn threshold_sweep(scores: &[(f64, bool)], taus: &[f64], max_fnr: f64) -> Sweep {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let correct_scores: Vec<f64> = sorted.iter().filter(|s| s.1).map(|s| s.0).collect();
    let wrong_scores: Vec<f64> = sorted.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let frac_below = |v: &[f64], tau: f64| {
        if v.is_empty() {
            0.0
        } else {
            v.partition_point(|s| *s < tau) as f64 / v.len() as f64
        }
    };
    let mut taus = taus.to_vec();
    taus.sort_by(f64::total_cmp);
    let points: Vec<SweepPoint> = taus
        .iter()
        .map(|&tau| SweepPoint {
            tau,
            fnr: frac_below(&correct_scores, tau),
            tnr: frac_below(&wrong_scores, tau),
        })
        .collect();
    let selected = points.iter().rev().find(|p| p.fnr <= max_fnr).copied();
    Sweep {
        points,
        scores: sorted,
        selected,
        max_fnr,
    }
}

impl Sweep {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tau", "fnr", "tnr"])?;
        for p in &self.points {
            out.write_record([format!("{:.6}", p.tau), format!("{:.6}", p.fnr), format!("{:.6}", p.tnr)])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_scores_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rank", "score", "correct"])?;
        for (i, (s, c)) in self.scores.iter().enumerate() {
            out.write_record([i.to_string(), format!("{s:.9}"), (*c as u8).to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}
