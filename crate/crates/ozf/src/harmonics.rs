//! Positive definite sequences, piecewise-linear functions on the circle and
//! hyperdominance checks.

use crate::dft::{CirculantMatrix, RootsGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Outcome of [`is_pd_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct PdReport {
    pub is_pd: bool,
    /// Eigenvalues of the circulant `(c_{j−k mod N})`, real parts.
    pub eigenvalues: Vec<f64>,
    /// Most negative eigenvalue (the witness).
    pub min_eigenvalue: f64,
    /// Largest imaginary part among the eigenvalues.
    pub max_imag: f64,
}

/// Whether the circulant matrix `(c_{j−k mod N})` is Hermitian positive
/// semi-definite, judged from its DFT.
pub fn is_pd_sequence(c: &[Complex64]) -> PdReport {
    let grid = RootsGrid::new(c.len());
    let lam = CirculantMatrix::new(c.to_vec()).eigenvalues(&grid);
    let eigenvalues: Vec<f64> = lam.iter().map(|z| z.re).collect();
    let max_imag = lam.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    let min_eigenvalue = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let is_pd = max_imag <= 1e-10 && min_eigenvalue >= -1e-10 * max_eigenvalue.max(1.0);
    PdReport {
        is_pd,
        eigenvalues,
        min_eigenvalue,
        max_imag,
    }
}

/// Function on the unit circle, linear in angle between the nodes `2πj/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlCircleFunction {
    pub values: Vec<Complex64>,
}

impl PwlCircleFunction {
    pub fn new(values: Vec<Complex64>) -> Self {
        assert!(!values.is_empty(), "need at least one node");
        Self { values }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }

    /// Value at angle `omega` (any real).
    pub fn eval_angle(&self, omega: f64) -> Complex64 {
        let n = self.len();
        let h = self.arc_length();
        let w = omega.rem_euclid(2.0 * PI);
        let pos = w / h;
        let j = (pos.floor() as usize).min(n - 1);
        let t = (pos - j as f64).clamp(0.0, 1.0);
        self.values[j] * (1.0 - t) + self.values[(j + 1) % n] * t
    }

    /// Value at a unit-modulus `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        debug_assert!((z.norm() - 1.0).abs() <= 1e-9, "point off the unit circle");
        self.eval_angle(z.arg())
    }

    /// `h_k = (1/2π) ∫ f(e^{iω}) e^{ikω} dω`, so `f(z) = Σ h_k z^{−k}`.
    pub fn fourier_coefficient(&self, k: i64) -> Complex64 {
        let n = self.len();
        let h = self.arc_length();
        let kf = k as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let fa = self.values[j];
            let fb = self.values[(j + 1) % n];
            let a = j as f64 * h;
            if k == 0 {
                acc += (fa + fb) * (0.5 * h);
                continue;
            }
            let s = (fb - fa) / h;
            let ikh = Complex64::new(0.0, kf * h);
            let e = ikh.exp();
            let ik = Complex64::new(0.0, kf);
            let i0 = (e - 1.0) / ik;
            let i1 = e * h / ik + (e - 1.0) / (kf * kf);
            acc += Complex64::from_polar(1.0, kf * a) * (fa * i0 + s * i1);
        }
        acc / (2.0 * PI)
    }

    /// Coefficients `h_{kmin}..=h_{kmax}`.
    pub fn fourier_window(&self, kmin: i64, kmax: i64) -> Vec<Complex64> {
        (kmin..=kmax).map(|k| self.fourier_coefficient(k)).collect()
    }

    /// Coefficients `h_{−K}..=h_K`.
    pub fn fourier_coefficients(&self, k: usize) -> Vec<Complex64> {
        self.fourier_window(-(k as i64), k as i64)
    }
}

/// Outcome of a hyperdominance check.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperdominanceReport {
    pub is_dhd: bool,
    /// Total symbol sum (row sum); nonnegative when hyperdominant.
    pub row_sum_slack: f64,
    /// Largest positive off-diagonal entry, `0` if none.
    pub worst_off_diagonal: f64,
}

/// Two-sided symbol `m_kmin..=m_kmax`; `m_0` is the diagonal.
pub fn is_doubly_hyperdominant(kmin: i64, symbol: &[f64]) -> HyperdominanceReport {
    let mut worst = 0.0f64;
    for (i, &m) in symbol.iter().enumerate() {
        if kmin + i as i64 != 0 {
            worst = worst.max(m);
        }
    }
    let sum: f64 = symbol.iter().sum();
    HyperdominanceReport {
        is_dhd: worst <= 1e-12 && sum >= -1e-12,
        row_sum_slack: sum,
        worst_off_diagonal: worst,
    }
}

/// Finite square matrix version: nonpositive off-diagonals and nonnegative
/// row and column sums. The slack is the smallest row or column sum.
pub fn matrix_hyperdominance(m: &DMatrix<f64>) -> HyperdominanceReport {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)]);
            }
        }
    }
    let rows = (0..n).map(|i| m.row(i).sum());
    let cols = (0..m.ncols()).map(|j| m.column(j).sum());
    let slack = rows.chain(cols).fold(f64::INFINITY, f64::min);
    HyperdominanceReport {
        is_dhd: worst <= 1e-12 && slack >= -1e-12,
        row_sum_slack: slack,
        worst_off_diagonal: worst,
    }
}
