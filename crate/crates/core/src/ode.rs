//! Fixed-step integration and Hermite interpolation helpers.

/// One classical fourth-order Runge-Kutta step of size `h` (which may be negative).
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// Cubic Hermite interpolation on `[t0, t0 + h]` with endpoint values and
/// slopes. Returns the interpolated value and its time derivative at
/// `t0 + s * h`, `s` in `[0, 1]`.
pub fn hermite(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;

    let dh00 = 6.0 * s2 - 6.0 * s;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = -6.0 * s2 + 6.0 * s;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let slope = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_exact_for_cubics() {
        // y' = 3 t^2 integrates exactly under Simpson-weighted stages.
        let f = |t: f64, _y: &[f64; 1]| [3.0 * t * t];
        let y = rk4_step(&f, 0.0, &[0.0], 2.0);
        assert!((y[0] - 8.0).abs() < 1e-14);
    }

    #[test]
    fn rk4_backward_exponential() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let mut y = [1.0];
        let n = 1000;
        for i in 0..n {
            y = rk4_step(&f, 1.0 - i as f64 / n as f64, &y, -1.0 / n as f64);
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let dp = |t: f64| -2.0 + 1.5 * t * t;
        let (t0, h) = (0.3, 0.7);
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            let (v, d) = hermite(s, h, p(t0), dp(t0), p(t0 + h), dp(t0 + h));
            assert!((v - p(t0 + s * h)).abs() < 1e-14);
            assert!((d - dp(t0 + s * h)).abs() < 1e-13);
        }
    }
}
