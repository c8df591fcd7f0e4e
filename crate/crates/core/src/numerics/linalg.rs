use super::{Matrix, NumericsError};

/// Least-squares solution of `a x ~= b` by Householder QR. Requires
/// `rows >= cols` and full column rank.
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(NumericsError::shape("least_squares", a.shape(), (b.len(), 1)));
    }
    if m < n {
        return Err(NumericsError::InvalidArgument(format!(
            "least squares needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| r.get(i, k).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(NumericsError::InvalidArgument(format!("column {k} is rank deficient")));
        }
        let alpha = if r.get(k, k) > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r.get(i, k)).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r.get(i, j)).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r.set(i, j, r.get(i, j) - f * v[i - k]);
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * rhs[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..m {
            rhs[i] -= f * v[i - k];
        }
    }
    let scale = (0..n).map(|k| r.get(k, k).abs()).fold(0.0, f64::max);
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let d = r.get(k, k);
        if d.abs() <= scale * 1e-13 {
            return Err(NumericsError::InvalidArgument(format!("column {k} is rank deficient")));
        }
        let s: f64 = (k + 1..n).map(|j| r.get(k, j) * x[j]).sum();
        x[k] = (rhs[k] - s) / d;
    }
    Ok(x)
}
