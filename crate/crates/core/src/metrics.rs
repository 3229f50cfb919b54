//! Regime diagnostics computed from initial and final weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, gram, norm2, Matrix};
use crate::model::{Network, TrainRecord};

/// `|final - init| / |final|` in the Euclidean norm.
pub fn relative_change(init: &[f64], fin: &[f64]) -> Result<f64> {
    if init.len() != fin.len() {
        return Err(Error::Dimension(format!(
            "snapshots have {} and {} entries",
            init.len(),
            fin.len()
        )));
    }
    let denom = norm2(fin);
    if denom == 0.0 {
        return Err(Error::UndefinedMetric("final weights are all zero".into()));
    }
    let diff: f64 = init.iter().zip(fin).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(diff.sqrt() / denom)
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!("vectors of length {} and {}", u.len(), v.len())));
    }
    let (nu, nv) = (norm2(u), norm2(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::UndefinedMetric("cosine of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Indices of the `ceil(fraction * rows)` rows with the largest norm, largest first.
/// Equal norms keep the lower index first.
pub fn top_rows(w: &Matrix, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let norms: Vec<f64> = w.row_iter().map(norm2).collect();
    let mut idx: Vec<usize> = (0..w.rows()).collect();
    idx.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let keep = ((fraction * w.rows() as f64).ceil() as usize).clamp(1, w.rows().max(1));
    idx.truncate(keep);
    Ok(idx)
}

fn unit_rows(w: &Matrix, idx: &[usize]) -> Result<Matrix> {
    let mut out = Matrix::zeros(idx.len(), w.cols());
    for (r, &i) in idx.iter().enumerate() {
        let row = w.row(i);
        let n = norm2(row);
        if n == 0.0 {
            return Err(Error::UndefinedMetric(format!("row {i} is zero")));
        }
        for (o, v) in out.row_mut(r).iter_mut().zip(row) {
            *o = v / n;
        }
    }
    Ok(out)
}

/// Pairwise cosine similarities between the largest-norm rows of `w`, in
/// descending-norm order. Symmetric with an exact unit diagonal.
pub fn cosine_matrix(w: &Matrix, fraction: f64) -> Result<Matrix> {
    let idx = top_rows(w, fraction)?;
    let mut g = gram(&unit_rows(w, &idx)?);
    let k = idx.len();
    for i in 0..k {
        g.set(i, i, 1.0);
        for j in 0..i {
            let v = (0.5 * (g.get(i, j) + g.get(j, i))).clamp(-1.0, 1.0);
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    Ok(g)
}

/// Mean absolute cosine over all ordered pairs (diagonal included) of the
/// top-half-norm rows of `w`. Equals 1 when those rows are all parallel.
pub fn condensation_index(w: &Matrix) -> Result<f64> {
    if w.rows() < 2 {
        return Err(Error::UndefinedMetric("condensation index needs at least two rows".into()));
    }
    Ok(zeta_of(&cosine_matrix(w, 0.5)?))
}

/// Mean absolute entry of a cosine matrix.
pub fn zeta_of(cos: &Matrix) -> f64 {
    let k = cos.rows() as f64;
    cos.as_slice().iter().map(|v| v.abs()).sum::<f64>() / (k * k)
}

/// Rows of `W1` as points, bias component last.
pub fn scatter_w1(net: &Network) -> Vec<Vec<f64>> {
    net.w1.row_iter().map(<[f64]>::to_vec).collect()
}

/// Circular variance `1 - |mean unit direction|` of 2-D points, each point
/// contributing its angle only. 0 when all points share one direction, close
/// to 1 for directions spread evenly around the circle.
pub fn circular_variance(points: &[Vec<f64>]) -> Result<f64> {
    let mut sum = [0.0, 0.0];
    let mut count = 0usize;
    for p in points {
        if p.len() != 2 {
            return Err(Error::Dimension(format!("expected 2-D points, got {}", p.len())));
        }
        let r = p[0].hypot(p[1]);
        if r > 0.0 {
            sum[0] += p[0] / r;
            sum[1] += p[1] / r;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("no nonzero points".into()));
    }
    Ok(1.0 - sum[0].hypot(sum[1]) / count as f64)
}

/// Circular variance of the top-half-norm rows of a 2-column matrix (the
/// first layer on 1-d inputs).
pub fn direction_spread(w: &Matrix) -> Result<f64> {
    let idx = top_rows(w, 0.5)?;
    let pts: Vec<Vec<f64>> = idx.iter().map(|&i| w.row(i).to_vec()).collect();
    circular_variance(&pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeMetrics {
    pub rd_w1: f64,
    pub rd_w2: f64,
    pub zeta: f64,
    pub zeta_init: f64,
    pub w1_scatter_init: Vec<Vec<f64>>,
    pub w1_scatter_final: Vec<Vec<f64>>,
}

impl RegimeMetrics {
    pub fn from_record(record: &TrainRecord) -> Result<Self> {
        RegimeMetrics::between(&record.initial_snapshot, &record.final_snapshot)
    }

    pub fn between(init: &Network, fin: &Network) -> Result<Self> {
        Ok(RegimeMetrics {
            rd_w1: relative_change(init.w1.as_slice(), fin.w1.as_slice())?,
            rd_w2: relative_change(init.w2.as_slice(), fin.w2.as_slice())?,
            zeta: condensation_index(&fin.w2)?,
            zeta_init: condensation_index(&init.w2)?,
            w1_scatter_init: scatter_w1(init),
            w1_scatter_final: scatter_w1(fin),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_change_cases() {
        assert_eq!(relative_change(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(relative_change(&[0.0, 0.0], &[3.0, -4.0]).unwrap(), 1.0);
        assert_eq!(relative_change(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2f64.sqrt());
        assert!(matches!(relative_change(&[1.0], &[0.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn cosine_cases() {
        let u = [0.3, -1.2, 2.0];
        assert_eq!(cosine(&u, &u).unwrap(), 1.0);
        assert_eq!(cosine(&u, &u.map(|x| -x)).unwrap(), -1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn selection_order_and_ties() {
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0], vec![-1.0, 0.0], vec![2.0, 0.0]]);
        assert_eq!(top_rows(&w, 0.5).unwrap(), vec![1, 3]);
        assert_eq!(top_rows(&w, 1.0).unwrap(), vec![1, 3, 0, 2]);
        assert_eq!(top_rows(&w, 0.6).unwrap().len(), 3);
        assert!(top_rows(&w, 0.0).is_err());
    }

    #[test]
    fn cosine_matrix_small_cases() {
        let same = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.5, 1.0]]);
        let c = cosine_matrix(&same, 1.0).unwrap();
        assert!(c.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-15));

        let w = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 0.1], vec![0.0, 2.0], vec![0.1, 0.0]]);
        let c = cosine_matrix(&w, 0.5).unwrap();
        assert_eq!(c.shape(), (2, 2));
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), 0.0);
        assert_eq!(condensation_index(&w).unwrap(), 0.5);
    }

    #[test]
    fn zeta_parallel_rows_and_zero_rows() {
        let w = Matrix::from_rows(&[vec![1.0, 1.0], vec![-2.0, -2.0], vec![0.1, 0.1], vec![0.0, 0.0]]);
        assert!((condensation_index(&w).unwrap() - 1.0).abs() < 1e-15);
        let zeros = Matrix::zeros(4, 3);
        assert!(matches!(condensation_index(&zeros), Err(Error::UndefinedMetric(_))));
        assert!(condensation_index(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn scatter_and_spread() {
        let net = Network::zeros(1, 3, 1, 1.0);
        let pts = scatter_w1(&net);
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().all(|p| p == &vec![0.0, 0.0]));

        let one_ray = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(circular_variance(&one_ray).unwrap().abs() < 1e-15);
        let opposite = vec![vec![1.0, 0.0], vec![-3.0, 0.0]];
        assert!((circular_variance(&opposite).unwrap() - 1.0).abs() < 1e-15);
    }
}
