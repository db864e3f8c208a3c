//! Not-a-knot cubic spline interpolation on a strictly increasing grid.

/// Piecewise cubic `y_i + b_i s + c_i s^2 + d_i s^3`, `s = x - x_i`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

impl CubicSpline {
    /// Not-a-knot spline through `(x, y)`. Needs at least 4 points; with
    /// exactly 4 it is the interpolating cubic.
    pub fn not_a_knot(x: &[f64], y: &[f64]) -> Option<Self> {
        let n = x.len();
        if n < 4 || y.len() != n {
            return None;
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        if h.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

        // Second derivatives M_1..M_{n-2}; M_0 and M_{n-1} are eliminated
        // through the third-derivative continuity at x_1 and x_{n-2}.
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            lower[k] = h[i - 1];
            diag[k] = 2.0 * (h[i - 1] + h[i]);
            upper[k] = h[i];
            rhs[k] = 6.0 * (delta[i] - delta[i - 1]);
        }
        // M_0 = ((h0 + h1) M_1 - h0 M_2) / h1
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (h0 + h1) / h1;
        upper[0] -= h0 * h0 / h1;
        // M_{n-1} = ((h_{n-3} + h_{n-2}) M_{n-2} - h_{n-2} M_{n-3}) / h_{n-3}
        let (ha, hb) = (h[n - 3], h[n - 2]);
        diag[m - 1] += hb * (ha + hb) / ha;
        lower[m - 1] -= hb * hb / ha;
        solve_tridiagonal(&lower, &mut diag, &upper, &mut rhs);

        let mut second = vec![0.0; n];
        second[1..n - 1].copy_from_slice(&rhs);
        second[0] = ((h0 + h1) * second[1] - h0 * second[2]) / h1;
        second[n - 1] = ((ha + hb) * second[n - 2] - hb * second[n - 3]) / ha;

        let mut b = Vec::with_capacity(n - 1);
        let mut c = Vec::with_capacity(n - 1);
        let mut d = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            b.push(delta[i] - h[i] * (2.0 * second[i] + second[i + 1]) / 6.0);
            c.push(second[i] / 2.0);
            d.push((second[i + 1] - second[i]) / (6.0 * h[i]));
        }
        Some(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            b,
            c,
            d,
        })
    }

    fn interval(&self, t: f64) -> usize {
        let last = self.x.len() - 2;
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t == self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.interval(t);
        let s = t - self.x[i];
        self.y[i] + s * (self.b[i] + s * (self.c[i] + s * self.d[i]))
    }
}

/// Piecewise-linear interpolation, exact at the knots.
pub fn linear_eval(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t <= x[0] {
        return y[0];
    }
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let i = match x.binary_search_by(|v| v.total_cmp(&t)) {
        Ok(i) => return y[i],
        Err(i) => i - 1,
    };
    let w = (t - x[i]) / (x[i + 1] - x[i]);
    y[i] + w * (y[i + 1] - y[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_on_uneven_grid() {
        let x = [0.0, 0.3, 0.35, 0.9, 1.4, 2.0, 2.2];
        let f = |t: f64| 2.0 * t * t * t - t * t + 0.5 * t - 3.0;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::not_a_knot(&x, &y).unwrap();
        for k in 0..=100 {
            let t = 2.2 * k as f64 / 100.0;
            assert!((s.eval(t) - f(t)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn four_points_is_the_interpolating_cubic() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let f = |t: f64| t * t * t - 4.0 * t;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::not_a_knot(&x, &y).unwrap();
        assert!((s.eval(1.5) - f(1.5)).abs() < 1e-12);
    }

    #[test]
    fn exact_at_knots() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let y: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64 * 1.37).collect();
        let s = CubicSpline::not_a_knot(&x, &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(s.eval(*a), *b);
        }
    }

    #[test]
    fn rejects_short_or_unsorted() {
        assert!(CubicSpline::not_a_knot(&[0.0, 1.0, 2.0], &[0.0; 3]).is_none());
        assert!(CubicSpline::not_a_knot(&[0.0, 2.0, 1.0, 3.0], &[0.0; 4]).is_none());
    }

    #[test]
    fn linear_fallback() {
        let x = [0.0, 0.5, 1.0];
        let y = [0.0, 1.0, 4.0];
        assert_eq!(linear_eval(&x, &y, 0.25), 0.5);
        assert_eq!(linear_eval(&x, &y, 1.0), 4.0);
        assert_eq!(linear_eval(&x, &y, 0.5), 1.0);
    }
}
