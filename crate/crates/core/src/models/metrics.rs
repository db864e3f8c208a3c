use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub correct: usize,
    pub total: usize,
}

impl GroupScore {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<u32>,
    pub accuracy: f64,
    pub n: usize,
    /// `confusion[truth][predicted]` over `classes`.
    pub confusion: Vec<Vec<usize>>,
    pub groups: BTreeMap<String, GroupScore>,
}

impl Metrics {
    /// `groups[i]` is the group key of sample `i`, if grouping is wanted.
    pub fn from_predictions(
        classes: &[u32],
        truth: &[u32],
        predicted: &[u32],
        groups: Option<&[String]>,
    ) -> Self {
        assert_eq!(truth.len(), predicted.len());
        let pos = |c: u32| classes.iter().position(|k| *k == c);
        let m = classes.len();
        let mut confusion = vec![vec![0usize; m]; m];
        let mut correct = 0;
        let mut by_group: BTreeMap<String, GroupScore> = BTreeMap::new();
        for (i, (t, p)) in truth.iter().zip(predicted).enumerate() {
            let hit = t == p;
            correct += hit as usize;
            if let (Some(a), Some(b)) = (pos(*t), pos(*p)) {
                confusion[a][b] += 1;
            }
            if let Some(g) = groups {
                let e = by_group.entry(g[i].clone()).or_default();
                e.total += 1;
                e.correct += hit as usize;
            }
        }
        let n = truth.len();
        Self {
            classes: classes.to_vec(),
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            n,
            confusion,
            groups: by_group,
        }
    }

    pub fn group_accuracy(&self, key: &str) -> Option<f64> {
        self.groups.get(key).map(GroupScore::accuracy)
    }
}

/// Trained and untrained accuracy as `"a (b)"` in percent, one decimal.
pub fn format_pair(trained: f64, untrained: Option<f64>) -> String {
    match untrained {
        Some(u) => format!("{:.1} ({:.1})", trained * 100.0, u * 100.0),
        None => format!("{:.1}", trained * 100.0),
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy {:.4} over {} samples", self.accuracy, self.n)?;
        for (k, g) in &self.groups {
            writeln!(f, "  {k}: {:.4} ({}/{})", g.accuracy(), g.correct, g.total)?;
        }
        Ok(())
    }
}
