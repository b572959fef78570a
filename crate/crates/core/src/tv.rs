//! Isotropic, epsilon-smoothed total variation on a row-major grid.
//!
//! Forward differences; the difference across the last column (row) is zero.

use num_traits::Float;

pub const TV_EPS: f64 = 1e-8;

#[inline]
fn diffs<T: Float>(x: &[T], w: usize, h: usize, r: usize, c: usize) -> (T, T) {
    let v = x[r * w + c];
    let dx = if c + 1 < w { x[r * w + c + 1] - v } else { T::zero() };
    let dy = if r + 1 < h { x[(r + 1) * w + c] - v } else { T::zero() };
    (dx, dy)
}

/// `sum sqrt(dx^2 + dy^2 + eps)` over all pixels.
pub fn tv_sum<T: Float>(x: &[T], w: usize, h: usize, eps: T) -> T {
    let mut acc = T::zero();
    for r in 0..h {
        for c in 0..w {
            let (dx, dy) = diffs(x, w, h, r, c);
            acc = acc + (dx * dx + dy * dy + eps).sqrt();
        }
    }
    acc
}

/// Accumulate `scale * d(tv_sum)/dx` into `grad`.
pub fn tv_sum_grad<T: Float>(x: &[T], w: usize, h: usize, eps: T, scale: T, grad: &mut [T]) {
    for r in 0..h {
        for c in 0..w {
            let (dx, dy) = diffs(x, w, h, r, c);
            let n = (dx * dx + dy * dy + eps).sqrt();
            let gx = scale * dx / n;
            let gy = scale * dy / n;
            let i = r * w + c;
            if c + 1 < w {
                grad[i + 1] = grad[i + 1] + gx;
                grad[i] = grad[i] - gx;
            }
            if r + 1 < h {
                grad[i + w] = grad[i + w] + gy;
                grad[i] = grad[i] - gy;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_central_differences() {
        let (w, h) = (5, 4);
        let x: Vec<f64> = (0..w * h).map(|i| ((i * 7919) % 13) as f64 * 0.1).collect();
        let mut g = vec![0.0; w * h];
        tv_sum_grad(&x, w, h, TV_EPS, 1.0, &mut g);
        let step = 1e-6;
        for i in 0..w * h {
            let mut xp = x.clone();
            xp[i] += step;
            let mut xm = x.clone();
            xm[i] -= step;
            let fd = (tv_sum(&xp, w, h, TV_EPS) - tv_sum(&xm, w, h, TV_EPS)) / (2.0 * step);
            assert!((fd - g[i]).abs() <= 1e-6 * fd.abs().max(1.0), "{i}: {fd} vs {}", g[i]);
        }
    }
}
