//! Roots of unity, the unitary DFT matrix and circulant matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// The `N`-th roots of unity `z_j = exp(2πij/N)`.
///
/// The table is built for `j ≤ N/2` and mirrored, so `z_{N-j}` is the exact
/// conjugate of `z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootsGrid {
    nodes: Vec<Complex64>,
}

impl RootsGrid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "grid size must be positive");
        let mut nodes = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..=n / 2 {
            let w = 2.0 * PI * j as f64 / n as f64;
            nodes[j] = Complex64::new(w.cos(), w.sin());
        }
        nodes[0] = Complex64::new(1.0, 0.0);
        if n % 2 == 0 {
            nodes[n / 2] = Complex64::new(-1.0, 0.0);
        }
        for j in (n / 2 + 1)..n {
            nodes[j] = nodes[n - j].conj();
        }
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> Complex64 {
        self.nodes[j % self.len()]
    }

    /// `z_j^p` for any integer power, read from the table.
    pub fn power(&self, j: usize, p: i64) -> Complex64 {
        let n = self.len() as i64;
        let m = ((j as i64 % n) * (p.rem_euclid(n))).rem_euclid(n);
        self.nodes[m as usize]
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.len() as f64
    }

    /// `V` with entries `z_j^l / √N` (row `j`, column `l`).
    pub fn dft_matrix(&self) -> DMatrix<Complex64> {
        let n = self.len();
        let s = 1.0 / (n as f64).sqrt();
        DMatrix::from_fn(n, n, |j, l| self.power(j, l as i64) * s)
    }

    /// `V x`.
    pub fn apply_v(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        let s = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|l| self.power(j, l as i64) * x[l])
                    .sum::<Complex64>()
                    * s
            })
            .collect()
    }

    /// `V* x`.
    pub fn apply_v_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        let s = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|l| {
                (0..n)
                    .map(|j| self.power(j, -(l as i64)) * x[j])
                    .sum::<Complex64>()
                    * s
            })
            .collect()
    }
}

/// Circulant matrix given by its first column: `C_{jk} = symbol_{(j-k) mod N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantMatrix {
    pub symbol: Vec<Complex64>,
}

impl CirculantMatrix {
    pub fn new(symbol: Vec<Complex64>) -> Self {
        assert!(!symbol.is_empty());
        Self { symbol }
    }

    pub fn from_real(symbol: &[f64]) -> Self {
        Self::new(symbol.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Circulant with diagonal `V diag(values) V*`.
    pub fn from_eigenvalues(grid: &RootsGrid, values: &[Complex64]) -> Self {
        // first column: (1/N) Σ_j values_j z_j^k
        let n = grid.len();
        let symbol = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| values[j] * grid.power(j, k as i64))
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect();
        Self { symbol }
    }

    /// The cyclic shift `S` with `S_{i,i+1} = 1`.
    pub fn shift(n: usize) -> Self {
        let mut s = vec![Complex64::new(0.0, 0.0); n];
        s[(n - 1) % n] = Complex64::new(1.0, 0.0);
        Self { symbol: s }
    }

    pub fn len(&self) -> usize {
        self.symbol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbol.is_empty()
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        let n = self.len();
        self.symbol[(j + n - k % n) % n]
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |j, k| self.entry(j, k))
    }

    /// Real part as a dense matrix.
    pub fn to_real_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |j, k| self.entry(j, k).re)
    }

    /// Eigenvalues `λ_m = Σ_l c_l z_m^{-l}`, matching eigenvector column `m` of `V`.
    pub fn eigenvalues(&self, grid: &RootsGrid) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|m| {
                (0..n)
                    .map(|l| self.symbol[l] * grid.power(m, -(l as i64)))
                    .sum()
            })
            .collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.len();
        assert_eq!(n, other.len());
        let symbol = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| self.symbol[(j + n - k) % n] * other.symbol[k])
                    .sum()
            })
            .collect();
        Self { symbol }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| (0..n).map(|k| self.entry(j, k).re * x[k]).sum())
            .collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.symbol.iter().fold(0.0f64, |m, z| m.max(z.im.abs()))
    }
}
