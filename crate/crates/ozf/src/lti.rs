//! Discrete-time state-space plants.

use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `x_{k+1} = A x_k + B u_k`, `y_k = C x_k + D u_k`.
///
/// Single-input single-output plants have `B: n×1`, `C: 1×n`, `D: 1×1`.
/// Kronecker liftings produce square `d×d` transfer matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

fn c64(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}", n, a.ncols())));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "B is {}x{}, C is {}x{} for n = {n}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        if [&a, &b, &c, &d]
            .iter()
            .any(|m| m.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidInput("non-finite plant data".into()));
        }
        Ok(Self { a, b, c, d })
    }

    /// Static gain `G(z) ≡ g` with no states.
    pub fn static_gain(g: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, g),
        }
    }

    /// Controllable canonical realization of `num(z)/den(z)`, coefficients in
    /// descending powers of `z`.
    pub fn from_transfer_function(num: &[f64], den: &[f64]) -> Result<Self> {
        let trim = |p: &[f64]| -> Vec<f64> {
            let first = p.iter().position(|&x| x != 0.0).unwrap_or(p.len());
            p[first..].to_vec()
        };
        let num = trim(num);
        let den = trim(den);
        if den.is_empty() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        if num.len() > den.len() {
            return Err(Error::InvalidInput("improper transfer function".into()));
        }
        let n = den.len() - 1;
        let lead = den[0];
        let a_coef: Vec<f64> = den[1..].iter().map(|x| x / lead).collect();
        let mut b_coef = vec![0.0; n + 1];
        for (i, x) in num.iter().enumerate() {
            b_coef[n + 1 - num.len() + i] = x / lead;
        }
        let d0 = b_coef[0];
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -a_coef[j];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(0, 0)] = 1.0;
        }
        let c = DMatrix::from_fn(1, n, |_, j| b_coef[j + 1] - d0 * a_coef[j]);
        let d = DMatrix::from_element(1, 1, d0);
        Self::new(a, b, c, d)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.inputs() == 1 && self.outputs() == 1
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    /// Errors unless the spectral radius is below `1 − 1e−9`.
    pub fn ensure_schur_stable(&self) -> Result<()> {
        let r = self.spectral_radius();
        if r < 1.0 - 1e-9 {
            Ok(())
        } else {
            Err(Error::NotSchurStable(r))
        }
    }

    fn resolvent_solve(&self, z: Complex64, rhs: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let n = self.order();
        let m = DMatrix::<Complex64>::identity(n, n) * z - c64(&self.a);
        let lu = m.lu();
        let pole = || Error::PoleOnEvaluationPoint { re: z.re, im: z.im };
        // reject near-singular pivots relative to the matrix scale
        let scale = 1.0 + self.a.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let umin = (0..n).fold(f64::INFINITY, |s, i| s.min(lu.u()[(i, i)].norm()));
        if umin <= 1e-13 * scale {
            return Err(pole());
        }
        lu.solve(&rhs).ok_or_else(pole)
    }

    /// Transfer matrix `C(zI − A)^{-1}B + D`.
    pub fn eval_transfer_matrix(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let d = c64(&self.d);
        if self.order() == 0 {
            return Ok(d);
        }
        let x = self.resolvent_solve(z, c64(&self.b))?;
        Ok(c64(&self.c) * x + d)
    }

    /// `G(z)` of a SISO plant.
    pub fn eval_transfer(&self, z: Complex64) -> Result<Complex64> {
        assert!(self.is_siso(), "eval_transfer needs a SISO plant");
        Ok(self.eval_transfer_matrix(z)?[(0, 0)])
    }

    /// `G(e^{iω})`.
    pub fn eval_angle(&self, omega: f64) -> Result<Complex64> {
        self.eval_transfer(Complex64::from_polar(1.0, omega))
    }

    /// `G'(z) = −C(zI − A)^{-2}B` of a SISO plant.
    pub fn eval_derivative(&self, z: Complex64) -> Result<Complex64> {
        if self.order() == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let x = self.resolvent_solve(z, c64(&self.b))?;
        let x2 = self.resolvent_solve(z, x)?;
        Ok(-(c64(&self.c) * x2)[(0, 0)])
    }

    /// Realization of `G ⊗ I_d`.
    pub fn kron_lift(&self, d: usize) -> Self {
        assert!(d >= 1, "lifting dimension must be positive");
        Self {
            a: linalg::kron_identity(&self.a, d),
            b: linalg::kron_identity(&self.b, d),
            c: linalg::kron_identity(&self.c, d),
            d: linalg::kron_identity(&self.d, d),
        }
    }

    /// One step: returns `(x_{k+1}, y_k)`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let next = &self.a * x + &self.b * u;
        let y = &self.c * x + &self.d * u;
        (next, y)
    }

    /// Forward simulation from `x0`; returns the outputs.
    pub fn simulate(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut x = x0.clone();
        inputs
            .iter()
            .map(|u| {
                let (next, y) = self.step(&x, u);
                x = next;
                y
            })
            .collect()
    }

    /// Initial state `ξ0 = (I − A^N)^{-1} Σ_j A^{N−1−j} B u_j` whose response to the
    /// `N`-periodic continuation of `period` is itself `N`-periodic.
    pub fn periodic_initial_state(&self, period: &[DVector<f64>]) -> Result<DVector<f64>> {
        let n = self.order();
        let np = period.len();
        if np == 0 {
            return Err(Error::InvalidInput("empty period".into()));
        }
        if let Some(u) = period.iter().find(|u| u.len() != self.inputs()) {
            return Err(Error::Dimension(format!(
                "input of length {} for {} plant inputs",
                u.len(),
                self.inputs()
            )));
        }
        if n == 0 {
            return Ok(DVector::zeros(0));
        }
        // zero-state response after one period
        let mut s = DVector::zeros(n);
        for u in period {
            s = &self.a * s + &self.b * u;
        }
        let mut an = DMatrix::<f64>::identity(n, n);
        for _ in 0..np {
            an = &self.a * an;
        }
        let m = DMatrix::<f64>::identity(n, n) - an;
        let lu = m.clone().lu();
        let umin = (0..n).fold(f64::INFINITY, |acc, i| acc.min(lu.u()[(i, i)].abs()));
        let umax = (0..n).fold(0.0f64, |acc, i| acc.max(lu.u()[(i, i)].abs()));
        if umin <= 1e-12 * umax.max(1.0) {
            return Err(Error::EigenvalueOnUnitCircle);
        }
        let mut x0 = lu.solve(&s).ok_or(Error::EigenvalueOnUnitCircle)?;
        // one step of iterative refinement
        let r = &s - &m * &x0;
        if let Some(dx) = lu.solve(&r) {
            x0 += dx;
        }
        Ok(x0)
    }
}

/// Rigorous bounds on a SISO transfer function over a closed disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskBounds {
    /// `sup |G'|` on the disk.
    pub d1: f64,
    /// `sup |G''|` on the disk.
    pub d2: f64,
}

impl StateSpaceModel {
    /// Bounds on `|G'|` and `|G''|` over `|z − center| ≤ radius`, from the
    /// Neumann series of the resolvent around `center`. Returns `None` when the
    /// series does not converge (`radius·‖R(center)‖_F ≥ 1/2`).
    pub fn disk_bounds(&self, center: Complex64, radius: f64) -> Result<Option<DiskBounds>> {
        let n = self.order();
        if n == 0 {
            return Ok(Some(DiskBounds { d1: 0.0, d2: 0.0 }));
        }
        let r0 = self.resolvent_solve(center, DMatrix::identity(n, n))?;
        let r = linalg::frobenius(&r0);
        let x = radius * r;
        if x >= 0.5 {
            return Ok(None);
        }
        let b = c64(&self.b);
        let c = c64(&self.c);
        let u1 = &r0 * &b;
        let w1 = &c * &r0;
        let w2 = &w1 * &r0;
        let w3 = &w2 * &r0;
        let bn = linalg::frobenius(&b);
        let cr2b = (&w1 * &u1)[(0, 0)].norm();
        let cr3b = (&w2 * &u1)[(0, 0)].norm();
        let inflate = 1.0 + 1e-9;
        let d1 = (cr2b + linalg::frobenius(&w2) * bn * ((1.0 - x).powi(-2) - 1.0)) * inflate;
        let d2 = 2.0 * (cr3b + linalg::frobenius(&w3) * bn * ((1.0 - x).powi(-3) - 1.0)) * inflate;
        Ok(Some(DiskBounds { d1, d2 }))
    }

    /// `sup |G'|` over the arc of angles `[a, b]`, subdividing until the
    /// resolvent series converges.
    pub fn arc_derivative_bound(&self, a: f64, b: f64) -> Result<f64> {
        let mut stack = vec![(a, b, 0u32)];
        let mut sup = 0.0f64;
        while let Some((lo, hi, depth)) = stack.pop() {
            let mid = 0.5 * (lo + hi);
            let radius = 2.0 * ((hi - lo) / 4.0).sin();
            match self.disk_bounds(Complex64::from_polar(1.0, mid), radius)? {
                Some(bd) => sup = sup.max(bd.d1),
                None if depth < 40 => {
                    stack.push((lo, mid, depth + 1));
                    stack.push((mid, hi, depth + 1));
                }
                None => {
                    return Err(Error::OscillationBoundUnavailable {
                        pole_radius: self.spectral_radius(),
                    })
                }
            }
        }
        Ok(sup)
    }
}

/// Nyquist value: `1 / max{G(z) : z ∈ T, G(z) real and positive}`, `∞` when
/// no positive real value is attained.
///
/// The real crossings are located on a uniform grid of `grid_size` points over
/// `[0, π]` and refined by bisection to `1e−6` in angle.
pub fn nyquist_value(ss: &StateSpaceModel, grid_size: usize) -> Result<f64> {
    ss.ensure_schur_stable()?;
    let m = grid_size.max(2);
    let omegas: Vec<f64> = (0..m).map(|i| PI * i as f64 / (m - 1) as f64).collect();
    let vals: Vec<Complex64> = omegas
        .iter()
        .map(|&w| ss.eval_angle(w))
        .collect::<Result<_>>()?;
    let mut best = 0.0f64;
    // real at ω = 0 and ω = π for real plants
    for g in [vals[0], vals[m - 1]] {
        best = best.max(g.re);
    }
    for i in 0..m - 1 {
        let (g0, g1) = (vals[i], vals[i + 1]);
        if g1.im == 0.0 && i + 1 < m - 1 {
            best = best.max(g1.re);
            continue;
        }
        if g0.im * g1.im >= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (omegas[i], omegas[i + 1]);
        let mut glo = g0;
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            let gm = ss.eval_angle(mid)?;
            if gm.im * glo.im <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        let g = ss.eval_angle(0.5 * (lo + hi))?;
        best = best.max(g.re);
    }
    Ok(if best > 0.0 {
        1.0 / best
    } else {
        f64::INFINITY
    })
}
