//! The margin linear program over positive definite sequences on the `N`-th
//! roots of unity, its dual certificate and the related side conditions.
//!
//! Primal: maximize `t` over `α ≥ 0`, `Σα ≤ 1` subject to
//! `Re(q_l (1 − c_l)) ≤ −t` where `c_l = Σ_j α_j z_l^j`.
//! Dual: `μ ≥ 0`, `Σμ = 1`, `η ≥ 0`, `Σ_l μ_l Re(q_l z_l^j) ≤ η` for all `j`,
//! with `t* = min (η − Σ_l μ_l Re q_l)`.

use crate::dft::RootsGrid;
use crate::error::{Error, Result};
use crate::frequency::{inverse_kappa, shifted_samples};
use crate::lti::StateSpaceModel;
use crate::simplex::{self, LinearProgram, Relation, SimplexOptions};
use num_complex::Complex64;
use num_traits::Zero;
use std::f64::consts::PI;

/// Samples `q_j = G(z_j) − 1/κ` on the `N`-th roots of unity.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginProblem {
    pub grid: RootsGrid,
    pub q: Vec<Complex64>,
    pub kappa: f64,
}

pub fn build_margin_problem(ss: &StateSpaceModel, n: usize, kappa: f64) -> Result<MarginProblem> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    ss.ensure_schur_stable()?;
    let grid = RootsGrid::new(n);
    let q = shifted_samples(ss, &grid, inverse_kappa(kappa))?;
    Ok(MarginProblem { grid, q, kappa })
}

impl MarginProblem {
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// `Re(q_l z_l^j)`.
    pub fn coefficient(&self, l: usize, j: usize) -> f64 {
        (self.q[l] * self.grid.power(l, j as i64)).re
    }

    /// `c_l = Σ_j α_j z_l^j`, i.e. `√N V α`.
    pub fn node_values(&self, alpha: &[f64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|l| {
                (0..n)
                    .map(|j| self.grid.power(l, j as i64) * alpha[j])
                    .sum()
            })
            .collect()
    }

    /// `Re(q_l (1 − c_l))` for each node.
    pub fn constraint_values(&self, alpha: &[f64]) -> Vec<f64> {
        let c = self.node_values(alpha);
        (0..self.n())
            .map(|l| (self.q[l] * (Complex64::new(1.0, 0.0) - c[l])).re)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub t_star: f64,
    pub alpha: Vec<f64>,
    /// `Re(q_l (1 − c_l))` per constraint; all `≤ −t_star`.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub mu: Vec<f64>,
    pub eta: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSolution {
    pub primal: PrimalSolution,
    pub dual: DualCertificate,
    /// `t* = 0` confirmed in exact rational arithmetic on the sampled data.
    pub certified_zero: bool,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub struct MarginOptions {
    /// Always run the exact-rational recheck.
    pub exact: bool,
    /// Below this value of `t*` the exact recheck runs.
    pub zero_threshold: f64,
    pub simplex: SimplexOptions,
}

impl Default for MarginOptions {
    fn default() -> Self {
        Self {
            exact: false,
            zero_threshold: 1e-9,
            simplex: SimplexOptions::default(),
        }
    }
}

pub(crate) struct DualFormResult {
    pub t: f64,
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: f64,
    pub certified_zero: bool,
    pub pivots: usize,
}

/// Solves `min Σ_r μ_r (−Re q_r) + η` over `μ ≥ 0, η ≥ 0`, `Σμ = 1`,
/// `Σ_r μ_r coeff[r][j] ≤ η`. The multipliers of the last family are `−α`.
pub(crate) fn solve_dual_form(
    re_q: &[f64],
    coeff: &[Vec<f64>],
    opts: &MarginOptions,
) -> Result<DualFormResult> {
    let rows = re_q.len();
    let n = coeff.first().map_or(0, |c| c.len());
    let mut obj: Vec<f64> = re_q.iter().map(|x| -x).collect();
    obj.push(1.0);
    let mut lp = LinearProgram::new(obj);
    let mut ones = vec![1.0; rows];
    ones.push(0.0);
    lp.push(ones, Relation::Eq, 1.0);
    for j in 0..n {
        let mut row: Vec<f64> = (0..rows).map(|r| coeff[r][j]).collect();
        row.push(-1.0);
        lp.push(row, Relation::Le, 0.0);
    }
    let sol = simplex::solve(&lp, &opts.simplex)?;
    let mut out = DualFormResult {
        t: sol.objective,
        alpha: (0..n).map(|j| -sol.duals[1 + j]).collect(),
        mu: sol.x[..rows].to_vec(),
        eta: sol.x[rows],
        certified_zero: false,
        pivots: sol.pivots,
    };
    if opts.exact || out.t < opts.zero_threshold {
        let ex = simplex::solve_exact(&lp, Some(&sol.basis))?;
        out.certified_zero = ex.objective.is_zero();
        out.t = simplex::rational_to_f64(&ex.objective);
        out.alpha = (0..n)
            .map(|j| -simplex::rational_to_f64(&ex.duals[1 + j]))
            .collect();
        out.mu = ex.x[..rows].iter().map(simplex::rational_to_f64).collect();
        out.eta = simplex::rational_to_f64(&ex.x[rows]);
        out.pivots += ex.pivots;
    }
    for a in &mut out.alpha {
        *a = a.max(0.0);
    }
    for m in &mut out.mu {
        *m = m.max(0.0);
    }
    let s: f64 = out.mu.iter().sum();
    for m in &mut out.mu {
        *m /= s;
    }
    out.eta = out.eta.max(0.0);
    Ok(out)
}

pub fn solve_margin_lp(p: &MarginProblem) -> Result<MarginSolution> {
    solve_margin_lp_with(p, &MarginOptions::default())
}

pub fn solve_margin_lp_with(p: &MarginProblem, opts: &MarginOptions) -> Result<MarginSolution> {
    let n = p.n();
    let re_q: Vec<f64> = p.q.iter().map(|z| z.re).collect();
    let coeff: Vec<Vec<f64>> = (0..n)
        .map(|l| (0..n).map(|j| p.coefficient(l, j)).collect())
        .collect();
    let r = solve_dual_form(&re_q, &coeff, opts)?;
    let margins = p.constraint_values(&r.alpha);
    let t_primal = margins.iter().fold(f64::INFINITY, |m, &v| m.min(-v));
    let t_dual = r.eta - r.mu.iter().zip(&re_q).map(|(m, q)| m * q).sum::<f64>();
    let t_star = if r.certified_zero { 0.0 } else { r.t };
    let dual = symmetrize_dual(
        &DualCertificate {
            mu: r.mu,
            eta: r.eta,
            gap: (t_dual - t_primal).abs(),
        },
        p,
        t_star,
    )?;
    Ok(MarginSolution {
        primal: PrimalSolution {
            t_star,
            alpha: r.alpha,
            margins,
        },
        dual,
        certified_zero: r.certified_zero,
        pivots: r.pivots,
    })
}

/// Largest violation of the dual feasibility and strong-duality relations.
pub fn dual_violation(cert: &DualCertificate, p: &MarginProblem, t_star: f64) -> f64 {
    let n = p.n();
    let mut worst = (cert.mu.iter().sum::<f64>() - 1.0).abs();
    worst = worst
        .max(-cert.eta)
        .max(cert.mu.iter().fold(0.0f64, |w, &m| w.max(-m)));
    for j in 0..n {
        let s: f64 = (0..n).map(|l| cert.mu[l] * p.coefficient(l, j)).sum();
        worst = worst.max(s - cert.eta);
    }
    let val = cert.eta - cert.mu.iter().zip(&p.q).map(|(m, q)| m * q.re).sum::<f64>();
    worst.max((val - t_star).abs())
}

/// Averages `μ` with its mirror image `μ_{N−j}`.
pub fn symmetrize_dual(
    cert: &DualCertificate,
    p: &MarginProblem,
    t_star: f64,
) -> Result<DualCertificate> {
    let n = cert.mu.len();
    let mut mu: Vec<f64> = (0..n)
        .map(|j| 0.5 * (cert.mu[j] + cert.mu[(n - j) % n]))
        .collect();
    for j in 1..n {
        // bitwise mirror
        if j > n - j {
            mu[j] = mu[n - j];
        }
    }
    let s: f64 = mu.iter().sum();
    for m in &mut mu {
        *m /= s;
    }
    let out = DualCertificate {
        mu,
        eta: cert.eta,
        gap: cert.gap,
    };
    let before = dual_violation(cert, p, t_star);
    let after = dual_violation(&out, p, t_star);
    if after > before.max(1e-8) {
        return Err(Error::AsymmetricPlantData(after));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    /// `Σ μ_j q_j`.
    pub base: f64,
    /// `Σ μ_j q_j z_j^k` for each `k`.
    pub shifted: Vec<f64>,
    /// Largest violation of `−t ≤ base` and `shifted_k ≤ base + t`.
    pub worst_violation: f64,
}

pub fn check_shift_conditions(
    cert: &DualCertificate,
    p: &MarginProblem,
    t_star: f64,
) -> ShiftReport {
    let n = p.n();
    let base: f64 = (0..n).map(|j| cert.mu[j] * p.q[j].re).sum();
    let shifted: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|j| cert.mu[j] * p.coefficient(j, k)).sum())
        .collect();
    let mut worst = -t_star - base;
    for s in &shifted {
        worst = worst.max(s - base - t_star);
    }
    ShiftReport {
        base,
        shifted,
        worst_violation: worst,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZhangReport {
    pub holds: bool,
    /// `Σ_j μ_j Re(G(z_j)(1 − z_j^{−k}))` per `k`.
    pub slacks: Vec<f64>,
    pub worst_slack: f64,
    /// `Σ_j μ_j Re G(z_j)`.
    pub unbiasedness: f64,
}

pub fn check_zhang_condition(mu: &[f64], ss: &StateSpaceModel, n: usize) -> Result<ZhangReport> {
    if mu.len() != n {
        return Err(Error::Dimension(format!(
            "mu has length {} for N = {n}",
            mu.len()
        )));
    }
    if mu.iter().all(|&m| m == 0.0) || mu.iter().any(|&m| m < 0.0) {
        return Err(Error::InvalidCertificate(
            "mu must be nonnegative and nonzero".into(),
        ));
    }
    let grid = RootsGrid::new(n);
    let g = shifted_samples(ss, &grid, 0.0)?;
    let one = Complex64::new(1.0, 0.0);
    let slacks: Vec<f64> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| mu[j] * (g[j] * (one - grid.power(j, -(k as i64)))).re)
                .sum()
        })
        .collect();
    let worst_slack = slacks.iter().cloned().fold(f64::INFINITY, f64::min);
    let unbiasedness = (0..n).map(|j| mu[j] * g[j].re).sum();
    Ok(ZhangReport {
        holds: worst_slack >= -1e-10,
        slacks,
        worst_slack,
        unbiasedness,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub holds: bool,
    /// Induced number of grid points.
    pub n: usize,
    pub phase: f64,
    pub bound: f64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// `|arg G(e^{iπα/β})| ≤ π/N` with `N = 2β` for odd `α` and `N = β` otherwise.
pub fn check_phase_constraint(ss: &StateSpaceModel, alpha: i64, beta: i64) -> Result<PhaseReport> {
    if beta < 1 || alpha < 0 || alpha >= beta || gcd(alpha, beta) != 1 {
        return Err(Error::InvalidRationalRotation { alpha, beta });
    }
    let n = if alpha % 2 == 1 { 2 * beta } else { beta } as usize;
    let g = ss.eval_angle(PI * alpha as f64 / beta as f64)?;
    let phase = g.arg();
    let bound = PI / n as f64;
    Ok(PhaseReport {
        holds: phase.abs() <= bound + 1e-12,
        n,
        phase,
        bound,
    })
}
