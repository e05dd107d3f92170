#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use ozf::destabilizer::{
    build_dual_vectors, build_gram_factor, build_interpolation, build_potential, DualVectors,
    GramFactor, InterpolationData,
};
use ozf::dft::RootsGrid;
use ozf::harmonics::{is_pd_sequence, PwlCircleFunction};
use ozf::lti::StateSpaceModel;
use ozf::margin::{build_margin_problem, solve_margin_lp, solve_margin_lp_with, MarginOptions};
use ozf::multiplier::{kron_fdi_equivalence, ZFMultiplier};
use ozf::plants;
use ozf::polyhedral::PolyhedralConvexFunction;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of one property suite.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub pass: bool,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{}: {} cases, worst {:.3e}",
            self.name, self.cases, self.worst
        )
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Strictly proper SISO plant with poles inside `radius`.
pub fn random_plant<R: Rng>(rng: &mut R, max_order: usize, radius: f64) -> StateSpaceModel {
    let order = rng.gen_range(1..=max_order);
    let mut den = vec![1.0];
    let mut k = 0;
    while k < order {
        if order - k >= 2 && rng.gen_bool(0.5) {
            let r = rng.gen_range(0.05..radius);
            let th = rng.gen_range(0.1..PI - 0.1);
            den = poly_mul(&den, &[1.0, -2.0 * r * th.cos(), r * r]);
            k += 2;
        } else {
            den = poly_mul(&den, &[1.0, -rng.gen_range(-radius..radius)]);
            k += 1;
        }
    }
    let mut num: Vec<f64> = (0..order).map(|_| rng.gen_range(-1.0..1.0)).collect();
    num[0] += if num[0] >= 0.0 { 0.2 } else { -0.2 };
    StateSpaceModel::from_transfer_function(&num, &den).expect("stable random plant")
}

/// Random realization with spectral radius `≤ radius`, possibly MIMO with feedthrough.
pub fn random_state_space<R: Rng>(rng: &mut R, max_order: usize, radius: f64) -> StateSpaceModel {
    let n = rng.gen_range(1..=max_order);
    let m = rng.gen_range(1..=2);
    let p = rng.gen_range(1..=2);
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let rad = a
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |s, z| s.max(z.norm()));
    if rad > 0.0 {
        a *= rng.gen_range(0.1..radius) / rad;
    }
    let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let c = DMatrix::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0));
    let d = DMatrix::from_fn(p, m, |_, _| rng.gen_range(-0.5..0.5));
    StateSpaceModel::new(a, b, c, d).expect("valid realization")
}

/// `c_m = (1/N) Σ_l λ_l ω^{lm}`, whose circulant has spectrum `λ`.
pub fn sequence_from_spectrum(lambda: &[f64]) -> Vec<Complex64> {
    let n = lambda.len();
    (0..n)
        .map(|m| {
            lambda
                .iter()
                .enumerate()
                .map(|(l, &x)| Complex64::from_polar(x, 2.0 * PI * (l * m) as f64 / n as f64))
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// A sequence that is pd (`want_pd`) or has a clearly negative eigenvalue.
pub fn random_sequence<R: Rng>(rng: &mut R, n: usize, want_pd: bool) -> Vec<Complex64> {
    let mut lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    if !want_pd {
        let j = rng.gen_range(0..n);
        lambda[j] = -rng.gen_range(0.01..1.0);
    }
    sequence_from_spectrum(&lambda)
}

pub fn circulant(c: &[Complex64]) -> DMatrix<Complex64> {
    let n = c.len();
    DMatrix::from_fn(n, n, |j, k| c[(j + n - k) % n])
}

/// Smallest eigenvalue if Hermitian to `1e-12`, else `-∞`.
pub fn hermitian_min_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let asym = (h - h.adjoint())
        .iter()
        .fold(0.0f64, |s, z| s.max(z.norm()));
    if asym > 1e-12 * (1.0 + h.iter().fold(0.0f64, |s, z| s.max(z.norm()))) {
        return f64::NEG_INFINITY;
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn hermitian_max_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn dft_suite() -> Check {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=32 {
        let v = RootsGrid::new(n).dft_matrix();
        let e = (&v * v.adjoint() - DMatrix::<Complex64>::identity(n, n))
            .iter()
            .fold(0.0f64, |s, z| s.max(z.norm()));
        worst = worst.max(e);
        let symbol: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let c = DMatrix::from_fn(n, n, |j, k| Complex64::new(symbol[(j + n - k) % n], 0.0));
        let grid = RootsGrid::new(n);
        let lam = ozf::dft::CirculantMatrix::from_real(&symbol).eigenvalues(&grid);
        let rebuilt = &v * DMatrix::from_diagonal(&DVector::from_vec(lam)) * v.adjoint();
        worst = worst.max((c - rebuilt).iter().fold(0.0f64, |s, z| s.max(z.norm())));
        cases += 1;
    }
    Check {
        name: "DFT unitarity and circulant diagonalization, N <= 32",
        cases,
        worst,
        pass: worst <= 1e-10,
    }
}

pub fn pd_suite(cases: usize) -> Check {
    let mut r = rng(12);
    let mut disagreements = 0;
    for i in 0..cases {
        let n = r.gen_range(1..=12);
        let c = match i % 3 {
            0 => random_sequence(&mut r, n, true),
            1 => random_sequence(&mut r, n, false),
            _ => (0..n)
                .map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
                .collect(),
        };
        let oracle = hermitian_min_eigenvalue(&circulant(&c)) >= -1e-9;
        if oracle != is_pd_sequence(&c).is_pd {
            disagreements += 1;
        }
    }
    Check {
        name: "pd sequence vs Hermitian eigenvalue oracle",
        cases,
        worst: disagreements as f64,
        pass: disagreements == 0,
    }
}

/// Both directions: pd nodes give nonnegative pwl Fourier coefficients and PSD
/// Gram matrices at random points; non-pd nodes give a negative coefficient and
/// an indefinite Gram matrix on the roots of unity.
pub fn positive_definite_function_suite(cases: usize) -> Check {
    let mut r = rng(13);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for i in 0..cases {
        let n = r.gen_range(1..=12);
        let pd = i % 2 == 0;
        let c = random_sequence(&mut r, n, pd);
        let f = PwlCircleFunction::new(c.clone());
        let k = 40 * n as i64;
        let coeffs = f.fourier_window(-k, k);
        let min_coeff = coeffs.iter().fold(f64::INFINITY, |s, z| s.min(z.re));
        let imag = coeffs.iter().fold(0.0f64, |s, z| s.max(z.im.abs()));
        let angles: Vec<f64> = if pd {
            (0..8).map(|_| r.gen_range(0.0..2.0 * PI)).collect()
        } else {
            (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
        };
        let gram = DMatrix::from_fn(angles.len(), angles.len(), |a, b| {
            f.eval_angle(angles[a] - angles[b])
        });
        let gram_min = hermitian_min_eigenvalue(&gram);
        let coeff_ok = min_coeff >= -1e-8 && imag <= 1e-8;
        let gram_ok = gram_min >= -1e-8;
        let lib = is_pd_sequence(&c).is_pd;
        if pd {
            worst = worst.min(min_coeff.min(gram_min));
        }
        if coeff_ok != pd || gram_ok != pd || lib != pd {
            failures += 1;
        }
    }
    Check {
        name: "pd nodes <=> nonnegative pwl coefficients <=> PSD Gram matrices",
        cases,
        worst: failures as f64,
        pass: failures == 0 && worst >= -1e-8,
    }
}

/// Largest `t` over the vertices of `{α ≥ 0, Σα ≤ 1, Re(q_l(1 − c_l)) ≤ −t}`.
pub fn vertex_enumeration_t(q: &[Complex64], grid: &RootsGrid) -> f64 {
    let n = q.len();
    // rows: a·(α, t) ≤ rhs
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut a = vec![0.0; n + 1];
        a[j] = -1.0;
        rows.push((a, 0.0));
    }
    let mut a = vec![1.0; n + 1];
    a[n] = 0.0;
    rows.push((a, 1.0));
    for l in 0..n {
        let mut a: Vec<f64> = (0..n)
            .map(|j| -(q[l] * grid.power(l, j as i64)).re)
            .collect();
        a.push(1.0);
        rows.push((a, -q[l].re));
    }
    let mut best = f64::NEG_INFINITY;
    let m = rows.len();
    let mut pick = vec![0usize; n + 1];
    fn next(pick: &mut [usize], m: usize) -> bool {
        let k = pick.len();
        for i in (0..k).rev() {
            if pick[i] < m - k + i {
                pick[i] += 1;
                for j in i + 1..k {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let a = DMatrix::from_fn(n + 1, n + 1, |i, j| rows[pick[i]].0[j]);
        let b = DVector::from_fn(n + 1, |i, _| rows[pick[i]].1);
        if a.determinant().abs() > 1e-10 {
            if let Some(x) = a.lu().solve(&b) {
                let feasible = rows.iter().all(|(r, rhs)| {
                    r.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>() <= rhs + 1e-9
                });
                if feasible {
                    best = best.max(x[n]);
                }
            }
        }
        if !next(&mut pick, m) {
            break;
        }
    }
    best
}

pub fn lp_oracle_suite(plants: usize) -> Check {
    let mut r = rng(14);
    let mut worst = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut cases = 0;
    for _ in 0..plants {
        let ss = random_plant(&mut r, 3, 0.9);
        let nyq = ozf::lti::nyquist_value(&ss, 1024).unwrap_or(1.0);
        let kappa = if nyq.is_finite() {
            nyq * r.gen_range(0.5..1.5)
        } else {
            r.gen_range(0.5..5.0)
        };
        for n in 1..=4 {
            let p = build_margin_problem(&ss, n, kappa).unwrap();
            let s = solve_margin_lp(&p).unwrap();
            let oracle = vertex_enumeration_t(&p.q, &p.grid);
            worst = worst.max((s.primal.t_star - oracle).abs());
            worst_gap = worst_gap.max(s.dual.gap / (1.0 + s.primal.t_star.abs()));
            cases += 1;
        }
    }
    Check {
        name: "margin LP vs vertex enumeration and duality gap, N <= 4",
        cases,
        worst: worst.max(worst_gap),
        pass: worst <= 1e-8 && worst_gap <= 1e-9,
    }
}

pub fn random_pd_multiplier<R: Rng>(rng: &mut R, n: usize) -> ZFMultiplier {
    let mut alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = alpha.iter().sum::<f64>() / rng.gen_range(0.2..1.0);
    for a in &mut alpha {
        *a /= s;
    }
    ZFMultiplier::from_alpha(&alpha, &RootsGrid::new(n))
}

/// Worst scalar FDI value against the largest eigenvalue of the lifted
/// Hermitian form, computed here with a dense Hermitian eigensolver.
pub fn kronecker_suite(pairs: usize) -> Check {
    let mut r = rng(15);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let grid = 64;
    for _ in 0..pairs {
        let ss = random_plant(&mut r, 3, 0.9);
        let nodes = r.gen_range(2..=9);
        let m = random_pd_multiplier(&mut r, nodes);
        let kappa = r.gen_range(0.5..4.0);
        let shift = 1.0 / kappa;
        let scalar = (0..grid)
            .map(|i| {
                let w = 2.0 * PI * i as f64 / grid as f64;
                2.0 * (m.eval_angle(w) * (ss.eval_angle(w).unwrap() - shift)).re
            })
            .fold(f64::NEG_INFINITY, f64::max);
        for d in 1..=3 {
            let lifted = ss.kron_lift(d);
            let mut lift = f64::NEG_INFINITY;
            for i in 0..grid {
                let w = 2.0 * PI * i as f64 / grid as f64;
                let z = Complex64::from_polar(1.0, w);
                let g = lifted.eval_transfer_matrix(z).unwrap()
                    - DMatrix::<Complex64>::identity(d, d) * Complex64::new(shift, 0.0);
                let form = g * m.eval_angle(w);
                lift = lift.max(hermitian_max_eigenvalue(&(&form + form.adjoint())));
            }
            let rep = kron_fdi_equivalence(&m, &ss, kappa, d, grid).unwrap();
            worst = worst
                .max((scalar - lift).abs())
                .max((rep.scalar_margin - scalar).abs())
                .max((rep.lifted_margin - lift).abs());
            cases += 1;
        }
    }
    Check {
        name: "Kronecker lifting invariance of the FDI margin, d = 1, 2, 3",
        cases,
        worst,
        pass: worst <= 1e-10,
    }
}

/// One run of the construction up to the potential.
pub struct Construction {
    pub label: String,
    pub dv: DualVectors,
    pub gf: GramFactor,
    pub data: InterpolationData,
    pub potential: PolyhedralConvexFunction,
    pub kappa: f64,
}

pub fn construct(label: &str, ss: &StateSpaceModel, kappa: f64, n: usize) -> Construction {
    let p = build_margin_problem(ss, n, kappa).unwrap();
    let s = solve_margin_lp_with(&p, &MarginOptions::default()).unwrap();
    let dv = build_dual_vectors(&s.dual, &p, s.primal.t_star).unwrap();
    let gf = build_gram_factor(&dv, 1e-10);
    let data = build_interpolation(&gf, &dv).unwrap();
    let potential = build_potential(&data, 0).unwrap();
    Construction {
        label: label.to_string(),
        dv,
        gf,
        data,
        potential,
        kappa,
    }
}

/// The constructions the certificate suites run on: the example plant at and
/// above the threshold, positive margins, and a few random plants.
pub fn constructions() -> Vec<Construction> {
    let ex = plants::example();
    let mut out = vec![
        construct("example k=1.9 N=5", &ex, 1.9, 5),
        construct("example k=2.0 N=5", &ex, 2.0, 5),
        construct("example k=2.1 N=5", &ex, 2.1, 5),
        construct("example k=1.7 N=6", &ex, 1.7, 6),
        construct("example k=1.5 N=10", &ex, 1.5, 10),
        construct("double pole k=0.3 N=9", &plants::double_pole(), 0.3, 9),
    ];
    let mut r = rng(16);
    for i in 0..6 {
        let ss = random_plant(&mut r, 4, 0.9);
        let kappa = r.gen_range(0.5..6.0);
        let n = r.gen_range(2..=8);
        out.push(construct(&format!("random plant {i} N={n}"), &ss, kappa, n));
    }
    out
}

/// Slack `tr(M T Y) + tr(M) t*/N` with `Y` recomputed from `y`.
pub fn trace_slack(c: &Construction, m: &DMatrix<f64>) -> f64 {
    let n = c.dv.n();
    let y = &c.dv.y;
    let gram = DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| y[(i + k) % n] * y[(j + k) % n]).sum::<f64>() / n as f64
    });
    let t = c.dv.t.to_real_matrix();
    (m * t * gram).trace() + m.trace() * c.dv.t_star.max(0.0) / n as f64
}

pub fn random_dhd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut m: DMatrix<f64> = DMatrix::from_fn(n, n, |i, j| {
        if i == j || rng.gen_bool(0.3) {
            0.0
        } else {
            -rng.gen_range(0.0..2.0)
        }
    });
    for i in 0..n {
        let need = (-m.row(i).sum()).max(-m.column(i).sum());
        m[(i, i)] = need * rng.gen_range(1.0..1.5);
    }
    m
}

pub fn trace_suite(per_certificate: usize) -> Check {
    let mut r = rng(17);
    let mut worst = f64::INFINITY;
    let mut cases = 0;
    for c in constructions() {
        let n = c.dv.n();
        for _ in 0..per_certificate {
            worst = worst.min(trace_slack(&c, &random_dhd(&mut r, n)));
            cases += 1;
        }
    }
    Check {
        name: "trace inequality on random doubly hyperdominant matrices",
        cases,
        worst,
        pass: worst >= -1e-8,
    }
}

/// Largest `Σ ⟨ȳ_i, x̄_next − x̄_i⟩ − len·ρ` over all cycles of distinct points
/// with length at most `max_len`.
pub fn brute_force_cycles(data: &InterpolationData, max_len: usize) -> (f64, usize) {
    let m = data.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let w = |i: usize, j: usize| {
        let diff: Vec<f64> = data.xbar[j]
            .iter()
            .zip(&data.xbar[i])
            .map(|(a, b)| a - b)
            .collect();
        dot(&data.ybar[i], &diff)
    };
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    let mut path = Vec::new();
    fn walk(
        path: &mut Vec<usize>,
        m: usize,
        max_len: usize,
        acc: f64,
        w: &dyn Fn(usize, usize) -> f64,
        rho: f64,
        worst: &mut f64,
        count: &mut usize,
    ) {
        let last = *path.last().unwrap();
        if path.len() >= 2 {
            let total = acc + w(last, path[0]) - rho * path.len() as f64;
            *worst = worst.max(total);
            *count += 1;
        }
        if path.len() == max_len {
            return;
        }
        for j in 0..m {
            if !path.contains(&j) {
                path.push(j);
                walk(path, m, max_len, acc + w(last, j), w, rho, worst, count);
                path.pop();
            }
        }
    }
    for s in 0..m {
        path.clear();
        path.push(s);
        walk(
            &mut path, m, max_len, 0.0, &w, data.rho, &mut worst, &mut count,
        );
    }
    (worst, count)
}

pub fn cycle_suite() -> Check {
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for c in constructions() {
        let (w, k) = brute_force_cycles(&c.data, 6.min(c.data.len()));
        worst = worst.max(w);
        cases += k;
    }
    Check {
        name: "cyclic monotonicity, all cycles of length <= 6",
        cases,
        worst,
        pass: worst <= 1e-8,
    }
}

pub fn random_polyhedral<R: Rng>(rng: &mut R) -> PolyhedralConvexFunction {
    let d = rng.gen_range(1..=4);
    let pieces = rng.gen_range(1..=6);
    let g = (0..pieces)
        .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let b = (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect();
    PolyhedralConvexFunction::new(g, b).unwrap()
}

/// Largest violation of `F(p) ≥ F(x) + ⟨y, p − x⟩` over the piece-wise
/// stationary probes and random points.
pub fn subgradient_defect<R: Rng>(
    f: &PolyhedralConvexFunction,
    x: &[f64],
    y: &[f64],
    rng: &mut R,
) -> f64 {
    let fx = f.value(x);
    let d = x.len();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let scale = [0.01, 0.3, 3.0][rng.gen_range(0..3)];
        let p: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-scale..scale)).collect();
        let lin: f64 = fx
            + y.iter()
                .zip(p.iter().zip(x))
                .map(|(a, (u, v))| a * (u - v))
                .sum::<f64>();
        worst = worst.max(lin - f.value(&p));
    }
    // the support-function form is exact: F(x+s·e) ≥ F(x) + s⟨y,e⟩ along coordinate axes
    for i in 0..d {
        for s in [-1e-4, 1e-4] {
            let mut p = x.to_vec();
            p[i] += s;
            worst = worst.max(fx + s * y[i] - f.value(&p));
        }
    }
    worst
}

/// ε-subgradients built from convex combinations of pieces, then refined.
pub fn refinement_suite(cases: usize) -> Check {
    let mut r = rng(18);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let f = random_polyhedral(&mut r);
        let d = f.dim();
        let pairs = r.gen_range(1..=4);
        let mut xbar = Vec::new();
        let mut ybar = Vec::new();
        let mut rho = 0.0f64;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
            let mut w: Vec<f64> = (0..f.pieces()).map(|_| r.gen_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            for v in &mut w {
                *v /= s;
            }
            let y: Vec<f64> = (0..d)
                .map(|i| (0..f.pieces()).map(|k| w[k] * f.g[k][i]).sum())
                .collect();
            let lower: f64 = (0..f.pieces()).map(|k| w[k] * f.piece_value(k, &x)).sum();
            rho = rho.max(f.value(&x) - lower);
            xbar.push(x);
            ybar.push(y);
        }
        let data = InterpolationData {
            xbar: xbar.clone(),
            ybar: ybar.clone(),
            rho,
        };
        let refined = ozf::destabilizer::refine_pairs(&f, &data).unwrap();
        for k in 0..pairs {
            let dx: f64 = refined.xhat[k]
                .iter()
                .zip(&xbar[k])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let dy: f64 = refined.yhat[k]
                .iter()
                .zip(&ybar[k])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            worst = worst.max(dx - rho).max(dy - rho);
            worst = worst.max(subgradient_defect(
                &f,
                &refined.xhat[k],
                &refined.yhat[k],
                &mut r,
            ));
        }
    }
    Check {
        name: "refinement onto the subdifferential graph within rho",
        cases,
        worst,
        pass: worst <= 1e-9,
    }
}

/// `(z, f(z))` mapped back by `x = z − y/κ` lands on the graph of `∂F`.
pub fn loop_transform_suite(points: usize) -> Check {
    let mut r = rng(19);
    let mut worst = f64::NEG_INFINITY;
    let mut fs: Vec<(PolyhedralConvexFunction, f64)> = constructions()
        .into_iter()
        .filter(|c| c.kappa.is_finite())
        .map(|c| (c.potential, c.kappa))
        .collect();
    for _ in 0..10 {
        fs.push((random_polyhedral(&mut r), r.gen_range(0.3..5.0)));
    }
    for i in 0..points {
        let (f, kappa) = &fs[i % fs.len()];
        let nl = ozf::destabilizer::SlopeNonlinearity {
            potential: f.clone(),
            kappa: *kappa,
            anchors: Vec::new(),
        };
        let d = f.dim();
        let scale = 1.0 + f.g.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        let z: Vec<f64> = (0..d)
            .map(|_| r.gen_range(-3.0 * scale..3.0 * scale))
            .collect();
        let v = nl.eval(&z).unwrap();
        let x: Vec<f64> = z.iter().zip(&v.y).map(|(a, b)| a - b / kappa).collect();
        let gap = f.fenchel_young_gap(&x, &v.y).unwrap();
        worst = worst
            .max(gap.abs())
            .max(subgradient_defect(f, &x, &v.y, &mut r));
    }
    Check {
        name: "loop transform round trip onto the subdifferential",
        cases: points,
        worst,
        pass: worst <= 1e-9,
    }
}
