//! Bezier curves in Bernstein form, evaluated with de Casteljau's scheme.

use nalgebra::DVector;

/// One scalar Bezier curve of arbitrary degree (row of control values).
#[derive(Debug, Clone, PartialEq)]
pub struct BezierRow {
    pub coeffs: Vec<f64>,
}

impl BezierRow {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// de Casteljau evaluation at `s` (clamped to [0, 1]).
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let mut work = self.coeffs.clone();
        let n = work.len();
        for level in 1..n {
            for i in 0..n - level {
                work[i] = (1.0 - s) * work[i] + s * work[i + 1];
            }
        }
        work[0]
    }

    /// Derivative curve: degree M-1 with coefficients `M * (c[i+1] - c[i])`.
    pub fn derivative(&self) -> BezierRow {
        let m = self.degree() as f64;
        let coeffs = self
            .coeffs
            .windows(2)
            .map(|w| m * (w[1] - w[0]))
            .collect();
        BezierRow { coeffs }
    }

    /// Value and first derivative with respect to `s`.
    pub fn eval_with_derivative(&self, s: f64) -> (f64, f64) {
        (self.eval(s), self.derivative().eval(s))
    }
}

/// A bundle of Bezier rows sharing one parameter (the four desired outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct BezierSet {
    pub rows: Vec<BezierRow>,
}

impl BezierSet {
    pub fn from_matrix(coeffs: &[Vec<f64>]) -> Self {
        Self {
            rows: coeffs
                .iter()
                .map(|r| BezierRow { coeffs: r.clone() })
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.coeffs.clone()).collect()
    }

    pub fn eval(&self, s: f64) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.eval(s)))
    }

    pub fn eval_derivative(&self, s: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.derivative().eval(s)),
        )
    }

    pub fn eval_second_derivative(&self, s: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.derivative().derivative().eval(s)),
        )
    }
}

/// Interpolate samples `(s_i, y_i)` exactly with a Bezier row of degree
/// `n - 1` by solving the Bernstein collocation system.
pub fn interpolate(nodes: &[f64], values: &[f64]) -> BezierRow {
    assert_eq!(nodes.len(), values.len());
    let n = nodes.len();
    let m = n - 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (r, &s) in nodes.iter().enumerate() {
        for c in 0..n {
            a[(r, c)] = bernstein(m, c, s);
        }
    }
    let b = DVector::from_column_slice(values);
    let sol = a.lu().solve(&b).expect("Bernstein collocation is invertible");
    BezierRow {
        coeffs: sol.iter().copied().collect(),
    }
}

fn bernstein(m: usize, i: usize, s: f64) -> f64 {
    let mut binom = 1.0;
    for k in 0..i {
        binom *= (m - k) as f64 / (k + 1) as f64;
    }
    binom * s.powi(i as i32) * (1.0 - s).powi((m - i) as i32)
}
