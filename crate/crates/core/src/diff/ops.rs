//! Forward and backward kernels for the handful of operations the tagger
//! needs. Backward functions accumulate (`+=`) into gradient buffers.

use super::{DiffError, Matrix};

/// Floor applied inside `ln` so zero probabilities give a finite loss.
pub const LOG_CLAMP: f64 = 1e-12;

/// Tolerance on `sum(p) - 1` before cross-entropy renormalizes.
pub const RENORM_TOLERANCE: f64 = 1e-9;

/// `y = W x + b`.
pub fn affine(x: &[f64], w: &Matrix, b: &[f64]) -> Result<Vec<f64>, DiffError> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(DiffError::ShapeMismatch {
            op: "affine",
            expected: format!("W {}x{}, b {}", b.len(), x.len(), b.len()),
            found: format!("W {}x{}, x {}, b {}", w.rows(), w.cols(), x.len(), b.len()),
        });
    }
    Ok((0..w.rows())
        .map(|r| b[r] + dot(w.row(r), x))
        .collect())
}

/// Accumulates `dW += dy xᵀ`, `db += dy` and, when given, `dx += Wᵀ dy`.
pub fn affine_backward(
    x: &[f64],
    w: &Matrix,
    dy: &[f64],
    dw: &mut Matrix,
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    debug_assert_eq!(dw.shape(), w.shape());
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db[r] += g;
        for (d, &xi) in dw.row_mut(r).iter_mut().zip(x) {
            *d += g * xi;
        }
    }
    if let Some(dx) = dx {
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (d, &wv) in dx.iter_mut().zip(w.row(r)) {
                *d += g * wv;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// `dz = p ⊙ (dp − ⟨dp, p⟩)`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let inner = dot(p, dp);
    p.iter().zip(dp).map(|(&pi, &gi)| pi * (gi - inner)).collect()
}

/// Logistic function evaluated without overflow on either tail.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Derivative of the sigmoid expressed through its output.
#[inline]
pub fn sigmoid_backward(s: f64, ds: f64) -> f64 {
    ds * s * (1.0 - s)
}

#[inline]
pub fn tanh_backward(y: f64, dy: f64) -> f64 {
    dy * (1.0 - y * y)
}

/// `q / Σq`. Errors on an all-zero row.
pub fn renormalize(q: &[f64]) -> Result<Vec<f64>, DiffError> {
    let sum: f64 = q.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(DiffError::DegenerateInput(format!("row sum {sum}")));
    }
    Ok(q.iter().map(|v| v / sum).collect())
}

/// Gradient of `q / Σq` given upstream `dp` and the output `p`:
/// `dq_k = (dp_k − ⟨dp, p⟩) / Σq`.
pub fn renormalize_backward(p: &[f64], sum: f64, dp: &[f64]) -> Vec<f64> {
    let inner = dot(p, dp);
    dp.iter().map(|&g| (g - inner) / sum).collect()
}

fn checked_sum(p: &[f64]) -> Result<f64, DiffError> {
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(DiffError::DegenerateInput("probabilities must be finite and >= 0".into()));
    }
    let sum: f64 = p.iter().sum();
    if sum <= 0.0 {
        return Err(DiffError::DegenerateInput("all-zero probability vector".into()));
    }
    Ok(sum)
}

/// `−Σ target·ln p`, with `p` renormalized first when its mass is off by
/// more than [`RENORM_TOLERANCE`]. Soft targets are allowed.
pub fn cross_entropy(p: &[f64], target: &[f64]) -> Result<f64, DiffError> {
    if p.len() != target.len() {
        return Err(DiffError::ShapeMismatch {
            op: "cross_entropy",
            expected: format!("{} classes", target.len()),
            found: format!("{} classes", p.len()),
        });
    }
    let sum = checked_sum(p)?;
    let scale = if (sum - 1.0).abs() > RENORM_TOLERANCE { sum } else { 1.0 };
    Ok(-p
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&pi, &t)| t * (pi / scale).max(LOG_CLAMP).ln())
        .sum::<f64>())
}

/// Gradient of [`cross_entropy`] w.r.t. `p`, including the renormalization
/// term when it applies. Clamped entries contribute no gradient.
pub fn cross_entropy_backward(p: &[f64], target: &[f64]) -> Result<Vec<f64>, DiffError> {
    let sum = checked_sum(p)?;
    let renorm = (sum - 1.0).abs() > RENORM_TOLERANCE;
    let scale = if renorm { sum } else { 1.0 };
    let mut grad: Vec<f64> = p
        .iter()
        .zip(target)
        .map(|(&pi, &t)| {
            if t != 0.0 && pi / scale > LOG_CLAMP {
                -t / pi
            } else {
                0.0
            }
        })
        .collect();
    if renorm {
        // d/dp_k of Σ_t target_t·ln(sum) = (Σ target)/sum for unclamped terms
        let mass: f64 = p
            .iter()
            .zip(target)
            .filter(|(&pi, &t)| t != 0.0 && pi / scale > LOG_CLAMP)
            .map(|(_, &t)| t)
            .sum();
        grad.iter_mut().for_each(|g| *g += mass / sum);
    }
    Ok(grad)
}

pub fn one_hot(k: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[index] = 1.0;
    v
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn affine_examples() {
        let y = affine(&[3.0, -1.0], &Matrix::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(y, [3.0, -1.0]);
        let w = Matrix::from_rows(&[vec![1.0, 2.0]]);
        assert_eq!(affine(&[1.0, 1.0], &w, &[1.0]).unwrap(), [4.0]);
        assert!(matches!(
            affine(&[1.0], &w, &[1.0]),
            Err(DiffError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn affine_weight_gradient_matches_finite_differences() {
        // d sum(Wx+b) / dW = 1 xᵀ
        let x = [0.3, -1.2, 2.0];
        let w = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-0.5, 0.4, 0.0]]);
        let b = [0.7, -0.1];
        let mut dw = Matrix::zeros(2, 3);
        let mut db = [0.0; 2];
        let mut dx = [0.0; 3];
        affine_backward(&x, &w, &[1.0, 1.0], &mut dw, &mut db, Some(&mut dx));
        let eps = 1e-6;
        for r in 0..2 {
            for c in 0..3 {
                let mut wp = w.clone();
                wp[(r, c)] += eps;
                let mut wm = w.clone();
                wm[(r, c)] -= eps;
                let fp: f64 = affine(&x, &wp, &b).unwrap().iter().sum();
                let fm: f64 = affine(&x, &wm, &b).unwrap().iter().sum();
                let fd = (fp - fm) / (2.0 * eps);
                assert!(close(dw[(r, c)], fd, 1e-8));
                assert!(close(dw[(r, c)], x[c], 1e-15));
            }
        }
        assert_eq!(db, [1.0, 1.0]);
        for c in 0..3 {
            assert!(close(dx[c], w[(0, c)] + w[(1, c)], 1e-15));
        }
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), [0.5, 0.5]);
        assert_eq!(softmax(&[1000.0, 1000.0]), [0.5, 0.5]);
        let p = softmax(&[1f64.ln(), 3f64.ln()]);
        assert!(close(p[0], 0.25, 1e-15) && close(p[1], 0.75, 1e-15));
    }

    #[test]
    fn softmax_backward_matches_fd() {
        let z = [0.2, -1.0, 0.7, 0.05];
        let up = [1.0, -2.0, 0.5, 3.0];
        let p = softmax(&z);
        let dz = softmax_backward(&p, &up);
        let eps = 1e-6;
        for k in 0..4 {
            let mut zp = z;
            zp[k] += eps;
            let mut zm = z;
            zm[k] -= eps;
            let fd = (dot(&softmax(&zp), &up) - dot(&softmax(&zm), &up)) / (2.0 * eps);
            assert!(close(dz[k], fd, 1e-8), "{k}: {} vs {fd}", dz[k]);
        }
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        let tiny = sigmoid(-1e4);
        assert!(tiny >= 0.0 && tiny < 1e-300);
        assert!(close(sigmoid(3f64.ln()), 0.75, 1e-15));
        for z in [-3.0, -0.1, 0.4, 9.0] {
            assert!(close(sigmoid(-z), 1.0 - sigmoid(z), 1e-15));
        }
        assert!(sigmoid(1.0) < sigmoid(1.1));
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform = vec![1.0 / 7.0; 7];
        let ce = cross_entropy(&uniform, &one_hot(7, 2)).unwrap();
        assert!(close(ce, 7f64.ln(), 1e-12));
        assert!(close(ce, 1.94591, 1e-5));
        assert_eq!(cross_entropy(&one_hot(3, 1), &one_hot(3, 1)).unwrap(), 0.0);
        assert!(close(cross_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 2f64.ln(), 1e-15));
        assert!(matches!(
            cross_entropy(&[0.0, 0.0], &[1.0, 0.0]),
            Err(DiffError::DegenerateInput(_))
        ));
        // zero probability on the target is clamped, not infinite
        let clamped = cross_entropy(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(close(clamped, -(1e-12f64).ln(), 1e-9));
    }

    #[test]
    fn cross_entropy_renormalizes_unnormalized_mass() {
        let q = [0.6, 0.3, 0.3];
        let p = [0.5, 0.25, 0.25];
        let t = [0.2, 0.8, 0.0];
        assert!(close(cross_entropy(&q, &t).unwrap(), cross_entropy(&p, &t).unwrap(), 1e-15));
        let g = cross_entropy_backward(&q, &t).unwrap();
        let eps = 1e-6;
        for k in 0..3 {
            let mut qp = q;
            qp[k] += eps;
            let mut qm = q;
            qm[k] -= eps;
            let fd = (cross_entropy(&qp, &t).unwrap() - cross_entropy(&qm, &t).unwrap()) / (2.0 * eps);
            assert!(close(g[k], fd, 1e-7), "{k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn renormalize_backward_matches_fd() {
        let q = [0.9, 0.2, 0.4];
        let up = [1.5, -0.5, 2.0];
        let sum: f64 = q.iter().sum();
        let p = renormalize(&q).unwrap();
        let dq = renormalize_backward(&p, sum, &up);
        let eps = 1e-6;
        for k in 0..3 {
            let mut qp = q;
            qp[k] += eps;
            let mut qm = q;
            qm[k] -= eps;
            let fd = (dot(&renormalize(&qp).unwrap(), &up) - dot(&renormalize(&qm).unwrap(), &up))
                / (2.0 * eps);
            assert!(close(dq[k], fd, 1e-8));
        }
        assert!(renormalize(&[0.0; 3]).is_err());
    }
}
