//! Finite maxima of affine functions, their subdifferentials, proximal maps and
//! conjugates.

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot};
use crate::simplex::{self, LinearProgram, Relation, SimplexOptions};
use nalgebra::{DMatrix, DVector};

/// `F(x) = max_k ⟨g_k, x⟩ + b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralConvexFunction {
    pub g: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// A point of the subdifferential graph with the piece weights generating it.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Convex weights over the pieces with `y = Σ λ_k g_k`.
    pub weights: Vec<f64>,
}

impl PolyhedralConvexFunction {
    pub fn new(g: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if g.is_empty() || g.len() != b.len() {
            return Err(Error::InvalidInput("need matching, nonempty pieces".into()));
        }
        let d = g[0].len();
        if g.iter().any(|v| v.len() != d) {
            return Err(Error::Dimension("pieces of different dimension".into()));
        }
        Ok(Self { g, b })
    }

    /// `F ≡ 0` on `ℝ^d`.
    pub fn zero(d: usize) -> Self {
        Self {
            g: vec![vec![0.0; d]],
            b: vec![0.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.g[0].len()
    }

    pub fn pieces(&self) -> usize {
        self.g.len()
    }

    pub fn piece_value(&self, k: usize, x: &[f64]) -> f64 {
        dot(&self.g[k], x) + self.b[k]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (0..self.pieces())
            .map(|k| self.piece_value(k, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pieces within `tol` of the maximum at `x`.
    pub fn active(&self, x: &[f64], tol: f64) -> Vec<usize> {
        let v = self.value(x);
        let scale = 1.0 + v.abs();
        (0..self.pieces())
            .filter(|&k| self.piece_value(k, x) >= v - tol * scale)
            .collect()
    }

    fn combine(&self, w: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (k, &l) in w.iter().enumerate() {
            if l != 0.0 {
                for (yi, gi) in y.iter_mut().zip(&self.g[k]) {
                    *yi += l * gi;
                }
            }
        }
        y
    }

    fn gram(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            dot(&self.g[idx[i]], &self.g[idx[j]])
        })
    }

    /// `argmin_x F(x) + (κ/2)‖x − z‖²` together with `y = κ(z − x) ∈ ∂F(x)`.
    pub fn prox(&self, z: &[f64], kappa: f64) -> Result<GraphPoint> {
        let all: Vec<usize> = (0..self.pieces()).collect();
        let beta: Vec<f64> = all.iter().map(|&k| self.piece_value(k, z)).collect();
        let h = self.gram(&all) / kappa;
        let lam = simplex_qp(&h, &beta)?;
        let y = self.combine(&lam);
        let x: Vec<f64> = z.iter().zip(&y).map(|(zi, yi)| zi - yi / kappa).collect();
        Ok(GraphPoint { x, y, weights: lam })
    }

    /// Least-norm element of `∂F(x)`, using pieces active within `tol`.
    pub fn least_norm_subgradient(&self, x: &[f64], tol: f64) -> Result<GraphPoint> {
        let act = self.active(x, tol);
        let h = self.gram(&act);
        let lam_act = simplex_qp(&h, &vec![0.0; act.len()])?;
        let mut lam = vec![0.0; self.pieces()];
        for (i, &k) in act.iter().enumerate() {
            lam[k] = lam_act[i];
        }
        Ok(GraphPoint {
            x: x.to_vec(),
            y: self.combine(&lam),
            weights: lam,
        })
    }

    /// `Σ λ_k (F(x) − ⟨g_k, x⟩ − b_k)`: an upper bound on the Fenchel–Young gap of
    /// `(x, Σ λ_k g_k)`, zero exactly when the weights sit on active pieces.
    pub fn weighted_gap(&self, x: &[f64], weights: &[f64]) -> f64 {
        let v = self.value(x);
        weights
            .iter()
            .enumerate()
            .map(|(k, &l)| l * (v - self.piece_value(k, x)))
            .sum()
    }

    /// `F*(y) = min{−Σ λ_k b_k : Σ λ_k g_k = y, λ ∈ Δ}`, `+∞` outside the hull.
    pub fn conjugate(&self, y: &[f64]) -> Result<f64> {
        let k = self.pieces();
        let mut lp = LinearProgram::new(self.b.iter().map(|b| -b).collect());
        for i in 0..self.dim() {
            lp.push((0..k).map(|j| self.g[j][i]).collect(), Relation::Eq, y[i]);
        }
        lp.push(vec![1.0; k], Relation::Eq, 1.0);
        match simplex::solve(&lp, &SimplexOptions::default()) {
            Ok(s) => Ok(s.objective),
            Err(Error::Infeasible) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// `F(x) + F*(y) − ⟨x, y⟩ ≥ 0`, zero iff `y ∈ ∂F(x)`.
    pub fn fenchel_young_gap(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.value(x) + self.conjugate(y)? - dot(x, y))
    }

    /// `x ↦ F(x + x0) − ⟨y0, x⟩ − F(x0)`.
    pub fn shift_origin(&self, x0: &[f64], y0: &[f64]) -> Self {
        let f0 = self.value(x0);
        let g = self
            .g
            .iter()
            .map(|gk| gk.iter().zip(y0).map(|(a, b)| a - b).collect())
            .collect();
        let b = (0..self.pieces())
            .map(|k| self.b[k] + dot(&self.g[k], x0) - f0)
            .collect();
        Self { g, b }
    }

    /// Whether `y` is a `ρ`-subgradient at `x` on the given probe points:
    /// `F(p) ≥ F(x) + ⟨y, p − x⟩ − ρ`. Returns the worst violation.
    pub fn epsilon_subgradient_violation(
        &self,
        x: &[f64],
        y: &[f64],
        rho: f64,
        probes: &[Vec<f64>],
    ) -> f64 {
        let fx = self.value(x);
        probes
            .iter()
            .map(|p| {
                let diff: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
                fx + dot(y, &diff) - rho - self.value(p)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Minimizes `½ λᵀHλ − βᵀλ` over the probability simplex (`H` symmetric PSD)
/// by a primal active-set method; a tiny ridge keeps the subproblems regular.
pub fn simplex_qp(h: &DMatrix<f64>, beta: &[f64]) -> Result<Vec<f64>> {
    let n = beta.len();
    if n == 0 {
        return Err(Error::ResolventFailure("empty piece set".into()));
    }
    let scale = 1.0 + h.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let ridge = 1e-13 * scale;
    let hr = h + DMatrix::identity(n, n) * ridge;
    let start = (0..n)
        .max_by(|&i, &j| beta[i].total_cmp(&beta[j]).then(j.cmp(&i)))
        .unwrap();
    let mut lam = vec![0.0; n];
    lam[start] = 1.0;
    let mut free = vec![start];
    let grad = |lam: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| hr[(i, j)] * lam[j]).sum::<f64>() - beta[i])
            .collect()
    };
    let tol = 1e-13 * (scale + beta.iter().fold(0.0f64, |s, x| s.max(x.abs())));
    for _ in 0..(50 * n + 100) {
        free.sort_unstable();
        let f = free.len();
        let mut kkt = DMatrix::zeros(f + 1, f + 1);
        let mut rhs = DVector::zeros(f + 1);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = hr[(i, j)];
            }
            kkt[(a, f)] = 1.0;
            kkt[(f, a)] = 1.0;
            rhs[a] = beta[i];
        }
        rhs[f] = 1.0;
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::ResolventFailure("singular KKT system".into()))?;
        let target: Vec<f64> = (0..f).map(|a| sol[a]).collect();
        let step: Vec<f64> = free.iter().zip(&target).map(|(&i, t)| t - lam[i]).collect();
        if step.iter().all(|s| s.abs() <= 1e-15)
            || step.iter().all(|s| *s >= -1e-300) && target.iter().all(|&t| t >= 0.0)
        {
            for (a, &i) in free.iter().enumerate() {
                lam[i] = target[a].max(0.0);
            }
            // multiplier of Σλ = 1
            let g = grad(&lam);
            let nu = -free.iter().map(|&i| g[i]).sum::<f64>() / f as f64;
            let worst = (0..n)
                .filter(|i| !free.contains(i))
                .map(|i| (i, g[i] + nu))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                Some((i, w)) if w < -tol => free.push(i),
                _ => {
                    let s: f64 = lam.iter().sum();
                    return Ok(lam.iter().map(|l| l / s).collect());
                }
            }
            continue;
        }
        // ratio test toward the target
        let mut alpha = 1.0f64;
        let mut block = None;
        for (a, &i) in free.iter().enumerate() {
            if target[a] < 0.0 && step[a] < 0.0 {
                let r = -lam[i] / step[a];
                if r < alpha {
                    alpha = r;
                    block = Some(i);
                }
            }
        }
        for (a, &i) in free.iter().enumerate() {
            lam[i] += alpha * step[a];
        }
        if let Some(i) = block {
            lam[i] = 0.0;
            free.retain(|&j| j != i);
        }
    }
    Err(Error::ResolventFailure(
        "active-set iteration cap reached".into(),
    ))
}

/// Distance helper re-exported for callers checking refinement bounds.
pub fn pair_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b)
}
