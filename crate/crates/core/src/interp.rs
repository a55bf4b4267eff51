//! Interpolants on sorted grids.

/// Index `i` with `xs[i] <= x <= xs[i+1]`, clamped to the valid range.
pub fn locate(xs: &[f64], x: f64) -> usize {
    debug_assert!(xs.len() >= 2);
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => i.saturating_sub(1).min(xs.len() - 2),
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// Needs at least two strictly increasing abscissae.
    pub fn new(x: &[f64], y: &[f64]) -> Option<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Some(Pchip { x: x.to_vec(), y: y.to_vec(), d })
    }

    /// NaN outside the sampled range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if !(x >= self.x[0] && x <= self.x[n - 1]) {
            return f64::NAN;
        }
        let i = locate(&self.x, x);
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Quintic Hermite interpolant from values and first two derivatives.
#[derive(Debug, Clone)]
pub struct QuinticHermite {
    x: Vec<f64>,
    f: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl QuinticHermite {
    pub fn new(x: Vec<f64>, f: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Option<Self> {
        let n = x.len();
        if n < 2 || f.len() != n || d1.len() != n || d2.len() != n || x.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        Some(QuinticHermite { x, f, d1, d2 })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Value and first derivative; NaN outside the sampled range.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.x.len();
        if !(x >= self.x[0] && x <= self.x[n - 1]) {
            return (f64::NAN, f64::NAN);
        }
        let i = locate(&self.x, x);
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let b0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let b1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let b2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let b5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let b4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let b3 = 0.5 * (t3 - 2.0 * t4 + t5);
        let db0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let db1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let db2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
        let db5 = -db0;
        let db4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let db3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
        let (f0, f1) = (self.f[i], self.f[i + 1]);
        let (g0, g1) = (h * self.d1[i], h * self.d1[i + 1]);
        let (c0, c1) = (h * h * self.d2[i], h * h * self.d2[i + 1]);
        let v = f0 * b0 + g0 * b1 + c0 * b2 + f1 * b5 + g1 * b4 + c1 * b3;
        let dv = (f0 * db0 + g0 * db1 + c0 * db2 + f1 * db5 + g1 * db4 + c1 * db3) / h;
        (v, dv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_reproduces_degree_five() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) + 0.25 * x.powi(5);
        let dp = |x: f64| -2.0 + 1.5 * x * x + 1.25 * x.powi(4);
        let ddp = |x: f64| 3.0 * x + 5.0 * x.powi(3);
        let xs = vec![0.0, 0.7, 1.1, 2.0];
        let q = QuinticHermite::new(
            xs.clone(),
            xs.iter().map(|&x| p(x)).collect(),
            xs.iter().map(|&x| dp(x)).collect(),
            xs.iter().map(|&x| ddp(x)).collect(),
        )
        .unwrap();
        for k in 0..=40 {
            let x = 2.0 * k as f64 / 40.0;
            let (v, d) = q.eval(x);
            assert!((v - p(x)).abs() < 1e-12, "{x}");
            assert!((d - dp(x)).abs() < 1e-11, "{x}");
        }
        assert!(q.eval(2.5).0.is_nan());
    }

    #[test]
    fn pchip_is_monotone_and_exact_on_lines() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64).powf(1.3)).collect();
        let line = Pchip::new(&xs, &xs.iter().map(|x| 3.0 * x - 1.0).collect::<Vec<_>>()).unwrap();
        assert!((line.eval(4.321) - (3.0 * 4.321 - 1.0)).abs() < 1e-12);
        let step: Vec<f64> = xs.iter().map(|&x| if x < 5.0 { 0.0 } else { 1.0 }).collect();
        let p = Pchip::new(&xs, &step).unwrap();
        let mut prev = -1.0;
        for k in 0..=1000 {
            let v = p.eval(xs[9] * k as f64 / 1000.0);
            assert!(v >= prev - 1e-15 && (-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn locate_clamps() {
        let xs = [0.0, 1.0, 2.0];
        assert_eq!(locate(&xs, -1.0), 0);
        assert_eq!(locate(&xs, 2.0), 1);
        assert_eq!(locate(&xs, 1.0), 1);
        assert_eq!(locate(&xs, 0.5), 0);
    }
}
