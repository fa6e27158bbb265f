//! Level-1 kernels on plain `f64` slices.

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    // scaled accumulation keeps tiny residual norms (~1e-160) from underflowing
    let amax = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if amax == 0.0 || !amax.is_finite() {
        return amax;
    }
    let s: f64 = x.iter().map(|v| (v / amax) * (v / amax)).sum();
    amax * s.sqrt()
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Normalizes `x` in place and returns its former norm. A zero vector is left untouched.
pub fn normalize(x: &mut [f64]) -> f64 {
    let n = norm2(x);
    if n > 0.0 {
        scale(1.0 / n, x);
    }
    n
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Sine of the angle between the lines spanned by `x` and `y`, computed as the
/// norm of the rejection of the normalized `x` from `y`. Accurate for tiny angles.
pub fn sin_angle(x: &[f64], y: &[f64]) -> f64 {
    let nx = norm2(x);
    let ny = norm2(y);
    if nx == 0.0 || ny == 0.0 {
        return 1.0;
    }
    let c = dot(x, y) / (nx * ny);
    let rej: Vec<f64> = x.iter().zip(y).map(|(a, b)| a / nx - c * b / ny).collect();
    norm2(&rej).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_survives_tiny_entries() {
        let x = [3e-170, 4e-170];
        assert!((norm2(&x) - 5e-170).abs() < 1e-184);
    }

    #[test]
    fn sin_angle_small_and_right_angles() {
        assert!(sin_angle(&[1.0, 0.0], &[0.0, 2.0]) > 1.0 - 1e-15);
        let eps = 1e-12;
        let s = sin_angle(&[1.0, eps], &[1.0, 0.0]);
        assert!((s - eps).abs() < 1e-24);
        assert!(sin_angle(&[1.0, 1.0], &[-2.0, -2.0]) < 1e-15);
    }
}
