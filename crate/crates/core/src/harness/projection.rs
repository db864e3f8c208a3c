use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::features::{fix_sign, FeatureRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub sample: usize,
    pub class_id: u32,
    pub completion: f64,
    pub x: f64,
    pub y: f64,
}

/// Projects centred rows onto their two leading principal components.
/// Returns `None` for fewer than two rows.
pub fn project_2d(data: &[Vec<f64>]) -> Option<Vec<[f64; 2]>> {
    let n = data.len();
    if n < 2 {
        return None;
    }
    let d = data[0].len();
    let mut mean = vec![0.0; d];
    for r in data {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = order
        .iter()
        .take(2)
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    Some(
        (0..n)
            .map(|i| {
                let row = centred.row(i);
                let mut p = [0.0; 2];
                for (a, axis) in axes.iter().enumerate() {
                    p[a] = row.iter().zip(axis).map(|(x, w)| x * w).sum();
                }
                p
            })
            .collect(),
    )
}

pub fn export_projection(rows: &[FeatureRow]) -> Option<Vec<ProjectionRow>> {
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r.features.values.clone()).collect();
    let pts = project_2d(&data)?;
    Some(
        rows.iter()
            .zip(pts)
            .map(|(r, p)| ProjectionRow {
                sample: r.sample,
                class_id: r.class_id,
                completion: r.completion(),
                x: p[0],
                y: p[1],
            })
            .collect(),
    )
}

pub fn write_projection_csv<W: std::io::Write>(rows: &[ProjectionRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "class", "completion", "sample"])?;
    for r in rows {
        out.write_record([
            format!("{:.9}", r.x),
            format!("{:.9}", r.y),
            r.class_id.to_string(),
            format!("{:.4}", r.completion),
            r.sample.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Mean point per class.
pub fn class_centroids(rows: &[ProjectionRow]) -> Vec<(u32, [f64; 2])> {
    let mut acc: std::collections::BTreeMap<u32, ([f64; 2], usize)> = Default::default();
    for r in rows {
        let e = acc.entry(r.class_id).or_insert(([0.0; 2], 0));
        e.0[0] += r.x;
        e.0[1] += r.y;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(c, (s, n))| (c, [s[0] / n as f64, s[1] / n as f64]))
        .collect()
}
