//! Construction of a destabilizing slope-restricted nonlinearity from a dual
//! certificate of the margin LP.
//!
//! The steps are: dual vectors `y = V μ^{1/2}`, `x = T y`; the shift-averaged
//! Gram matrix `Y = Uᵀ U`; interpolation pairs `(x̄_k, ȳ_k)` from the columns of
//! `U`; a polyhedral potential whose subdifferential interpolates them
//! approximately; exact refinement onto the subdifferential graph; and the
//! inverse loop transform for finite slope bounds.

use crate::dft::CirculantMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot, jacobi_eigen};
use crate::margin::{DualCertificate, MarginProblem};
use crate::polyhedral::{GraphPoint, PolyhedralConvexFunction};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DualVectors {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// Real circulant with `x = T y`.
    pub t: CirculantMatrix,
    pub t_star: f64,
}

impl DualVectors {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// `⟨S^k x, y⟩` for `k = 0..N`.
    pub fn cross_correlations(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|k| (0..n).map(|i| self.x[(i + k) % n] * self.y[i]).sum())
            .collect()
    }

    /// Largest violation of `⟨x, y⟩ ≥ −t*` and `⟨S^k x, y⟩ ≤ ⟨x, y⟩ + t*`.
    pub fn cross_correlation_violation(&self) -> f64 {
        let c = self.cross_correlations();
        let base = c[0];
        c.iter()
            .fold(-self.t_star - base, |w, s| w.max(s - base - self.t_star))
    }
}

pub fn build_dual_vectors(
    cert: &DualCertificate,
    p: &MarginProblem,
    t_star: f64,
) -> Result<DualVectors> {
    let n = p.n();
    if cert.mu.len() != n {
        return Err(Error::Dimension(format!(
            "mu has length {} for N = {n}",
            cert.mu.len()
        )));
    }
    if cert.mu.iter().any(|&m| m < 0.0) || (cert.mu.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidCertificate(
            "mu must be a probability vector".into(),
        ));
    }
    let root: Vec<Complex64> = cert
        .mu
        .iter()
        .map(|m| Complex64::new(m.sqrt(), 0.0))
        .collect();
    let qroot: Vec<Complex64> = root.iter().zip(&p.q).map(|(r, q)| r * q).collect();
    let y = p.grid.apply_v(&root);
    let x = p.grid.apply_v(&qroot);
    let imag = y.iter().chain(&x).fold(0.0f64, |m, z| m.max(z.im.abs()));
    if imag > 1e-9 {
        return Err(Error::SymmetryViolation(imag));
    }
    let t = CirculantMatrix::from_eigenvalues(&p.grid, &p.q);
    if t.max_imag() > 1e-9 {
        return Err(Error::SymmetryViolation(t.max_imag()));
    }
    let t = CirculantMatrix::new(t.symbol.iter().map(|z| Complex64::new(z.re, 0.0)).collect());
    let dv = DualVectors {
        y: y.iter().map(|z| z.re).collect(),
        x: x.iter().map(|z| z.re).collect(),
        t,
        t_star,
    };
    let viol = dv.cross_correlation_violation();
    if viol > 1e-7 {
        return Err(Error::InconsistentDualCertificate(viol));
    }
    Ok(dv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramFactor {
    /// `Y = (1/N) Σ_k S^k y yᵀ S^{−k}`.
    pub gram: DMatrix<f64>,
    /// `d × N` with `Y = Uᵀ U`.
    pub u: DMatrix<f64>,
    pub d: usize,
}

pub fn build_gram_factor(dv: &DualVectors, rank_tol: f64) -> GramFactor {
    let n = dv.n();
    let y = &dv.y;
    let gram = DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| y[(i + k) % n] * y[(j + k) % n]).sum::<f64>() / n as f64
    });
    let eig = jacobi_eigen(&gram);
    let top = eig.values[0].max(0.0);
    let d = eig
        .values
        .iter()
        .filter(|&&v| v > rank_tol * top)
        .count()
        .max(1);
    let u = DMatrix::from_fn(d, n, |r, k| {
        eig.values[r].max(0.0).sqrt() * eig.vectors[(k, r)]
    });
    GramFactor { gram, u, d }
}

/// Pairs `(x̄_k, ȳ_k)`, `k = 0..=N`, with the appended zero pair last.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationData {
    pub xbar: Vec<Vec<f64>>,
    pub ybar: Vec<Vec<f64>>,
    pub rho: f64,
}

impl InterpolationData {
    pub fn len(&self) -> usize {
        self.xbar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xbar.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xbar[0].len()
    }

    /// `w(i → j) = ⟨ȳ_i, x̄_j − x̄_i⟩`.
    pub fn edge_weights(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| dot(&self.ybar[i], &self.xbar[j]) - dot(&self.ybar[i], &self.xbar[i]))
                    .collect()
            })
            .collect()
    }
}

/// Outcome of a cyclic-monotonicity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    /// Largest `Σ ⟨ȳ_{i_l}, x̄_{i_{l+1}} − x̄_{i_l}⟩ − len·ρ` seen.
    pub worst_excess: f64,
    pub cycles: usize,
}

/// All simple cycles up to `max_len` points, then `random` longer ones.
pub fn check_cyclic_monotonicity(
    data: &InterpolationData,
    max_len: usize,
    random: usize,
    seed: u64,
) -> CycleReport {
    let w = data.edge_weights();
    let m = data.len();
    let mut report = CycleReport {
        worst_excess: f64::NEG_INFINITY,
        cycles: 0,
    };
    // cycles are enumerated from their smallest index
    fn dfs(
        w: &[Vec<f64>],
        rho: f64,
        path: &mut Vec<usize>,
        used: &mut [bool],
        sum: f64,
        max_len: usize,
        rep: &mut CycleReport,
    ) {
        let start = path[0];
        let last = *path.last().unwrap();
        let closed = sum + w[last][start] - rho * path.len() as f64;
        rep.worst_excess = rep.worst_excess.max(closed);
        rep.cycles += 1;
        if path.len() == max_len {
            return;
        }
        for next in (start + 1)..w.len() {
            if !used[next] {
                used[next] = true;
                path.push(next);
                dfs(w, rho, path, used, sum + w[last][next], max_len, rep);
                path.pop();
                used[next] = false;
            }
        }
    }
    let mut used = vec![false; m];
    for s in 0..m {
        used[s] = true;
        let mut path = vec![s];
        dfs(
            &w,
            data.rho,
            &mut path,
            &mut used,
            0.0,
            max_len.min(m),
            &mut report,
        );
        used[s] = false;
    }
    if m > max_len {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random {
            let len = rng.gen_range(max_len + 1..=m);
            let mut idx: Vec<usize> = (0..m).collect();
            for i in 0..len {
                let j = rng.gen_range(i..m);
                idx.swap(i, j);
            }
            let s: f64 = (0..len).map(|l| w[idx[l]][idx[(l + 1) % len]]).sum();
            report.worst_excess = report.worst_excess.max(s - data.rho * len as f64);
            report.cycles += 1;
        }
    }
    report
}

pub fn build_interpolation(gf: &GramFactor, dv: &DualVectors) -> Result<InterpolationData> {
    let n = dv.n();
    if dv.y.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput("dual vector y is zero".into()));
    }
    let d = gf.d;
    let tm = dv.t.to_real_matrix();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|k| gf.u.column(k).iter().copied().collect())
        .collect();
    let mut xbar: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut v = vec![0.0; d];
            for (j, c) in cols.iter().enumerate() {
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi += tm[(k, j)] * ci;
                }
            }
            v
        })
        .collect();
    let mut ybar = cols;
    xbar.push(vec![0.0; d]);
    ybar.push(vec![0.0; d]);
    let data = InterpolationData {
        xbar,
        ybar,
        rho: dv.t_star.max(0.0) / n as f64,
    };
    let rep = check_cyclic_monotonicity(&data, 6, 10_000, 0x5eed);
    if rep.worst_excess > 1e-8 {
        return Err(Error::ConstructionInconsistency(format!(
            "cycle sum exceeds its bound by {:e}",
            rep.worst_excess
        )));
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    /// Smallest `tr(M T Y) + tr(M) t*/N` over the tested matrices.
    pub worst_slack: f64,
    pub checked: usize,
}

/// Random matrix with nonpositive off-diagonals and nonnegative row and column sums.
pub fn random_doubly_hyperdominant<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(0.4) {
                m[(i, j)] = -rng.gen_range(0.0..1.0);
            }
        }
    }
    for i in 0..n {
        let row: f64 = -m.row(i).sum();
        let col: f64 = -m.column(i).sum();
        m[(i, i)] = row.max(col) + rng.gen_range(0.0..0.5);
    }
    m
}

pub fn check_trace_inequality(
    gf: &GramFactor,
    dv: &DualVectors,
    samples: usize,
    seed: u64,
) -> TraceReport {
    let n = dv.n();
    let ty = dv.t.to_real_matrix() * &gf.gram;
    let per = dv.t_star.max(0.0) / n as f64;
    // tr(M T Y) = Σ_ab M_ba (TY)_ab
    let slack = |m: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += m[(b, a)] * ty[(a, b)];
            }
        }
        s + m.trace() * per
    };
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    let mut push = |v: f64| {
        worst = worst.min(v);
        checked += 1;
    };
    let id = DMatrix::<f64>::identity(n, n);
    push(slack(&id));
    let s = CirculantMatrix::shift(n).to_real_matrix();
    let mut sk = id.clone();
    for _ in 1..n {
        sk = &sk * &s;
        push(slack(&(&id - &sk)));
    }
    // paths through the zero pair: i alone, or i → j → zero pair
    for i in 0..n {
        for j in 0..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, i)] = 1.0;
            if i != j {
                m[(j, j)] = 1.0;
                m[(i, j)] = -1.0;
            }
            push(slack(&m));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        push(slack(&random_doubly_hyperdominant(n, &mut rng)));
    }
    TraceReport {
        worst_slack: worst,
        checked,
    }
}

/// Potential `F(x) = max_k ⟨ȳ_k, x − x̄_k⟩ + b_k` where `b_k` is the longest path
/// from `base` to `k` under the weights `w(i → j) − ρ`.
pub fn build_potential(data: &InterpolationData, base: usize) -> Result<PolyhedralConvexFunction> {
    let m = data.len();
    if base >= m {
        return Err(Error::InvalidInput(format!(
            "base index {base} out of range"
        )));
    }
    let w = data.edge_weights();
    let scale = 1.0 + w.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    let mut b = vec![f64::NEG_INFINITY; m];
    b[base] = 0.0;
    let relax = |b: &mut Vec<f64>| -> f64 {
        let mut gain = 0.0f64;
        for i in 0..m {
            if b[i] == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..m {
                let cand = b[i] + w[i][j] - data.rho;
                if cand > b[j] {
                    gain = gain.max(if b[j].is_finite() {
                        cand - b[j]
                    } else {
                        f64::INFINITY
                    });
                    b[j] = cand;
                }
            }
        }
        gain
    };
    for _ in 0..m {
        if relax(&mut b) == 0.0 {
            break;
        }
    }
    let extra = relax(&mut b);
    if extra > 1e-10 * scale {
        return Err(Error::ApproximateMonotonicityViolated(extra));
    }
    let g = data.ybar.clone();
    let offsets = (0..m)
        .map(|k| b[k] - dot(&data.ybar[k], &data.xbar[k]))
        .collect();
    let f = PolyhedralConvexFunction::new(g, offsets)?;
    // ȳ_k ∈ ∂_ρ F(x̄_k) reduces to F(x̄_k) ≤ b_k + ρ
    let worst = (0..m)
        .map(|k| f.value(&data.xbar[k]) - b[k] - data.rho)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > 1e-8 {
        return Err(Error::ConstructionInconsistency(format!(
            "interpolation pair is not a rho-subgradient (excess {worst:e})"
        )));
    }
    Ok(f)
}

/// Largest violation of `F(p) ≥ F(x̄_k) + ⟨ȳ_k, p − x̄_k⟩ − ρ` over the other
/// interpolation points and `probes` random points.
pub fn subgradient_violation(
    f: &PolyhedralConvexFunction,
    data: &InterpolationData,
    probes: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = data.dim();
    let radius = 1.0
        + data
            .xbar
            .iter()
            .flatten()
            .fold(0.0f64, |s, x| s.max(x.abs()));
    let mut pts = data.xbar.clone();
    for _ in 0..probes {
        pts.push(
            (0..d)
                .map(|_| rng.gen_range(-2.0 * radius..2.0 * radius))
                .collect(),
        );
    }
    (0..data.len())
        .map(|k| f.epsilon_subgradient_violation(&data.xbar[k], &data.ybar[k], data.rho, &pts))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Pairs on the graph of `∂F`, one per interpolation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedPairs {
    pub xhat: Vec<Vec<f64>>,
    pub yhat: Vec<Vec<f64>>,
    /// Largest `‖x̄_k − x̂_k‖²` and `‖ȳ_k − ŷ_k‖²`.
    pub worst_dist_sq: f64,
    /// Largest upper bound on the Fenchel–Young gap of `(x̂_k, ŷ_k)`.
    pub worst_gap: f64,
}

/// Moves each `ρ`-subgradient pair onto the graph of `∂F` via
/// `x̂ = prox_F(x̄ + ȳ)`, `ŷ = x̄ + ȳ − x̂`, which keeps both distances² within `ρ`.
pub fn refine_pairs(
    f: &PolyhedralConvexFunction,
    data: &InterpolationData,
) -> Result<RefinedPairs> {
    if data.rho == 0.0 {
        return Ok(RefinedPairs {
            xhat: data.xbar.clone(),
            yhat: data.ybar.clone(),
            worst_dist_sq: 0.0,
            worst_gap: 0.0,
        });
    }
    let mut out = RefinedPairs {
        xhat: Vec::new(),
        yhat: Vec::new(),
        worst_dist_sq: 0.0,
        worst_gap: 0.0,
    };
    let bound = data.rho + 1e-8;
    for k in 0..data.len() {
        let z: Vec<f64> = data.xbar[k]
            .iter()
            .zip(&data.ybar[k])
            .map(|(a, b)| a + b)
            .collect();
        let GraphPoint { x, y, weights } = f.prox(&z, 1.0)?;
        let dist = dist_sq(&x, &data.xbar[k]).max(dist_sq(&y, &data.ybar[k]));
        let gap = f.weighted_gap(&x, &weights);
        if dist > bound || gap > 1e-9 {
            return Err(Error::RefinementFailed {
                index: k,
                dist_sq: dist,
                bound,
            });
        }
        out.worst_dist_sq = out.worst_dist_sq.max(dist);
        out.worst_gap = out.worst_gap.max(gap);
        out.xhat.push(x);
        out.yhat.push(y);
    }
    Ok(out)
}

/// A nonlinearity in the slope class `[0, κ]` whose loop transform is `∂F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeNonlinearity {
    /// Origin-shifted potential with `F(0) = 0`, `0 ∈ ∂F(0)`.
    pub potential: PolyhedralConvexFunction,
    /// `f64::INFINITY` selects `f = ∂F`.
    pub kappa: f64,
    /// Certified `(input, output)` pairs used to resolve multivaluedness.
    pub anchors: Vec<(Vec<f64>, Vec<f64>)>,
}

/// A value of the nonlinearity together with the transformed input.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityValue {
    pub y: Vec<f64>,
    /// `x = z − y/κ`, a point with `y ∈ ∂F(x)`.
    pub x: Vec<f64>,
    pub active: Vec<usize>,
    pub weights: Vec<f64>,
}

pub fn finalize_nonlinearity(
    f: &PolyhedralConvexFunction,
    refined: &RefinedPairs,
    kappa: f64,
) -> SlopeNonlinearity {
    let last = refined.xhat.len() - 1;
    let potential = f.shift_origin(&refined.xhat[last], &refined.yhat[last]);
    let anchors = (0..=last)
        .map(|k| {
            let x: Vec<f64> = refined.xhat[k]
                .iter()
                .zip(&refined.xhat[last])
                .map(|(a, b)| a - b)
                .collect();
            let y: Vec<f64> = refined.yhat[k]
                .iter()
                .zip(&refined.yhat[last])
                .map(|(a, b)| a - b)
                .collect();
            let z = if kappa.is_finite() {
                x.iter().zip(&y).map(|(a, b)| a + b / kappa).collect()
            } else {
                x
            };
            (z, y)
        })
        .collect();
    SlopeNonlinearity {
        potential,
        kappa,
        anchors,
    }
}

const ACTIVE_TOL: f64 = 1e-9;
const ANCHOR_RADIUS: f64 = 1e-6;

impl SlopeNonlinearity {
    /// The zero nonlinearity on `ℝ^d`.
    pub fn zero(d: usize, kappa: f64) -> Self {
        Self {
            potential: PolyhedralConvexFunction::zero(d),
            kappa,
            anchors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn eval(&self, z: &[f64]) -> Result<NonlinearityValue> {
        if z.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "input of length {} for d = {}",
                z.len(),
                self.dim()
            )));
        }
        let f = &self.potential;
        if self.kappa.is_finite() {
            let gp = f.prox(z, self.kappa)?;
            let active = f.active(&gp.x, ACTIVE_TOL);
            return Ok(NonlinearityValue {
                y: gp.y,
                x: gp.x,
                active,
                weights: gp.weights,
            });
        }
        let active = f.active(z, ACTIVE_TOL);
        let anchor = self
            .anchors
            .iter()
            .filter(|(a, _)| dist_sq(a, z).sqrt() <= ANCHOR_RADIUS)
            .min_by(|(a, _), (b, _)| dist_sq(a, z).total_cmp(&dist_sq(b, z)));
        if let Some((_, y)) = anchor {
            return Ok(NonlinearityValue {
                y: y.clone(),
                x: z.to_vec(),
                active,
                weights: Vec::new(),
            });
        }
        let gp = f.least_norm_subgradient(z, ACTIVE_TOL)?;
        Ok(NonlinearityValue {
            y: gp.y,
            x: gp.x,
            active,
            weights: gp.weights,
        })
    }
}
