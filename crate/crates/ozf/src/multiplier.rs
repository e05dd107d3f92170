//! Piecewise-linear O'Shea–Zames–Falb multipliers `M = 1 − H`: synthesis,
//! FIR truncation and frequency-domain verification.

use crate::dft::RootsGrid;
use crate::error::{Error, Result};
use crate::frequency::inverse_kappa;
use crate::harmonics::{
    is_doubly_hyperdominant, is_pd_sequence, HyperdominanceReport, PwlCircleFunction,
};
use crate::linalg;
use crate::lti::StateSpaceModel;
use crate::margin::{solve_dual_form, MarginOptions, PrimalSolution};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Fourier coefficients `h_kmin..=h_kmax` of `H` kept by an FIR truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct FirWindow {
    pub kmin: i64,
    pub kmax: i64,
    pub h: Vec<f64>,
    /// `H(1) − Σ_window h_k`, the mass of the discarded coefficients.
    pub tail_bound: f64,
}

/// `M(z) = 1 − H(z)` with `H` piecewise linear on the `N`-th roots of unity,
/// or `1 − Σ h_k z^{−k}` when an FIR window is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ZFMultiplier {
    pub h: PwlCircleFunction,
    /// `H(1)`.
    pub h1: f64,
    pub fir: Option<FirWindow>,
}

impl ZFMultiplier {
    /// `H` with nodes `c = √N V α`.
    pub fn from_alpha(alpha: &[f64], grid: &RootsGrid) -> Self {
        let n = grid.len();
        let nodes: Vec<Complex64> = (0..n)
            .map(|l| (0..n).map(|j| grid.power(l, j as i64) * alpha[j]).sum())
            .collect();
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<Complex64>) -> Self {
        let h1 = nodes[0].re;
        Self {
            h: PwlCircleFunction::new(nodes),
            h1,
            fir: None,
        }
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.h.values
    }

    /// `M(e^{iω})` in piecewise-linear form.
    pub fn eval_pwl_angle(&self, omega: f64) -> Complex64 {
        Complex64::new(1.0, 0.0) - self.h.eval_angle(omega)
    }

    /// `M(e^{iω})`, using the FIR window when present.
    pub fn eval_angle(&self, omega: f64) -> Complex64 {
        match &self.fir {
            Some(f) => {
                let mut s = Complex64::new(1.0, 0.0);
                for (i, &h) in f.h.iter().enumerate() {
                    let k = (f.kmin + i as i64) as f64;
                    s -= Complex64::from_polar(h, -k * omega);
                }
                s
            }
            None => self.eval_pwl_angle(omega),
        }
    }

    /// Toeplitz symbol of `M = I − H` over the FIR window (or `|k| ≤ 40N`).
    pub fn symbol(&self) -> (i64, Vec<f64>) {
        let (kmin, h) = match &self.fir {
            Some(f) => (f.kmin, f.h.clone()),
            None => {
                let k = 40 * self.n() as i64;
                (
                    -k,
                    self.h.fourier_window(-k, k).iter().map(|z| z.re).collect(),
                )
            }
        };
        let lo = kmin.min(0);
        let hi = (kmin + h.len() as i64 - 1).max(0);
        let mut m = vec![0.0; (hi - lo + 1) as usize];
        for (i, x) in h.iter().enumerate() {
            m[(kmin + i as i64 - lo) as usize] -= x;
        }
        m[(-lo) as usize] += 1.0;
        (lo, m)
    }

    pub fn hyperdominance(&self) -> HyperdominanceReport {
        let (kmin, m) = self.symbol();
        is_doubly_hyperdominant(kmin, &m)
    }

    pub fn is_pd(&self) -> bool {
        is_pd_sequence(self.nodes()).is_pd
    }
}

/// Multiplier from a margin-LP primal solution.
pub fn synth_pwl_multiplier(primal: &PrimalSolution, grid: &RootsGrid) -> Result<ZFMultiplier> {
    if !(primal.t_star > 0.0) {
        return Err(Error::NoMultiplier {
            n: grid.len(),
            t_star: primal.t_star,
        });
    }
    let m = ZFMultiplier::from_alpha(&primal.alpha, grid);
    if m.nodes()
        .iter()
        .all(|c| (c - Complex64::new(1.0, 0.0)).norm() <= 1e-12)
    {
        return Err(Error::DegenerateMultiplier);
    }
    Ok(m)
}

/// Margin `−max_l Re(q_l M(z_l))` on the multiplier's own nodes.
pub fn construction_grid_margin(m: &ZFMultiplier, ss: &StateSpaceModel, kappa: f64) -> Result<f64> {
    let grid = RootsGrid::new(m.n());
    let q = crate::frequency::shifted_samples(ss, &grid, inverse_kappa(kappa))?;
    let one = Complex64::new(1.0, 0.0);
    Ok(q.iter()
        .zip(m.nodes())
        .map(|(q, c)| -(q * (one - c)).re)
        .fold(f64::INFINITY, f64::min))
}

/// Result of an FDI check, on the scale `2·Re(M(z)(G(z) − 1/κ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdiReport {
    pub grid: usize,
    /// Largest sampled value.
    pub worst_margin: f64,
    /// Proven upper bound on the value over the whole circle (equal to
    /// `worst_margin` for plain grid checks).
    pub certified_margin: f64,
    pub pass: bool,
    pub arg_z: Complex64,
}

fn fdi_value(m: &ZFMultiplier, ss: &StateSpaceModel, shift: f64, omega: f64) -> Result<f64> {
    let g = ss.eval_angle(omega)? - shift;
    Ok(2.0 * (m.eval_angle(omega) * g).re)
}

/// `max 2·Re(M(z)(G(z) − 1/κ))` over `grid_size` equispaced points.
pub fn verify_fdi_grid(
    m: &ZFMultiplier,
    ss: &StateSpaceModel,
    kappa: f64,
    grid_size: usize,
) -> Result<FdiReport> {
    let shift = inverse_kappa(kappa);
    let mut worst = f64::NEG_INFINITY;
    let mut arg = 0.0;
    for i in 0..grid_size {
        let w = 2.0 * PI * i as f64 / grid_size as f64;
        let v = fdi_value(m, ss, shift, w)?;
        if v > worst {
            worst = v;
            arg = w;
        }
    }
    Ok(FdiReport {
        grid: grid_size,
        worst_margin: worst,
        certified_margin: worst,
        pass: worst < 0.0,
        arg_z: Complex64::from_polar(1.0, arg),
    })
}

/// Continuity certificate: the pwl multiplier is sampled at the `n_eval`-th
/// roots of unity (a multiple of its node count) and every arc value is bounded
/// by the grid value plus `4·osc`, with `osc = 1.5 · arc · sup|G'|` from a
/// resolvent bound.
pub fn certify_global_fdi(
    m: &ZFMultiplier,
    ss: &StateSpaceModel,
    kappa: f64,
    n_eval: usize,
) -> Result<FdiReport> {
    if n_eval == 0 || n_eval % m.n() != 0 {
        return Err(Error::InvalidInput(format!(
            "evaluation grid {n_eval} is not a multiple of the multiplier's {} nodes",
            m.n()
        )));
    }
    ss.ensure_schur_stable()?;
    let shift = inverse_kappa(kappa);
    let arc = 2.0 * PI / n_eval as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut arg = 0.0;
    let mut sup_d1 = 0.0f64;
    for i in 0..n_eval {
        let w = arc * i as f64;
        let g = ss.eval_angle(w)? - shift;
        let v = 2.0 * (m.eval_pwl_angle(w) * g).re;
        if v > worst {
            worst = v;
            arg = w;
        }
        sup_d1 = sup_d1.max(ss.arc_derivative_bound(w, w + arc)?);
    }
    let osc = 1.5 * arc * sup_d1;
    // 2·Re(M q) moves by at most 2·|M|·osc along an arc, and |M| ≤ 2
    let certified = worst + 4.0 * osc;
    Ok(FdiReport {
        grid: n_eval,
        worst_margin: worst,
        certified_margin: certified,
        pass: certified < 0.0,
        arg_z: Complex64::from_polar(1.0, arg),
    })
}

#[derive(Debug, Clone)]
pub struct AdaptiveOptions {
    /// Initial subintervals per arc.
    pub initial_split: usize,
    /// Hard cap on examined intervals.
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            initial_split: 4,
            max_intervals: 20_000_000,
        }
    }
}

/// Adaptive certificate for the pwl form: on each interval `[a, b]` inside an
/// arc, `φ(ω) = 2·Re(M q)` satisfies `φ ≤ max(φ(a), φ(b)) + (b−a)²/8 · sup|φ''|`,
/// with `sup|φ''|` bounded through resolvent bounds on `G'` and `G''`.
/// Intervals are split until the bound is at most half the sampled endpoint
/// maximum. `certified_margin` is the largest accepted bound.
pub fn certify_fdi_adaptive(
    m: &ZFMultiplier,
    ss: &StateSpaceModel,
    kappa: f64,
    opts: &AdaptiveOptions,
) -> Result<FdiReport> {
    ss.ensure_schur_stable()?;
    let shift = inverse_kappa(kappa);
    let n = m.n();
    let h = 2.0 * PI / n as f64;
    let mut certified = f64::NEG_INFINITY;
    let mut worst = f64::NEG_INFINITY;
    let mut arg = 0.0;
    let mut examined = 0usize;
    let fail = |w: f64, v: f64, g: usize| FdiReport {
        grid: g,
        worst_margin: v,
        certified_margin: v.max(0.0),
        pass: false,
        arg_z: Complex64::from_polar(1.0, w),
    };
    for l in 0..n {
        let a0 = l as f64 * h;
        let ml = Complex64::new(1.0, 0.0) - m.nodes()[l];
        let mr = Complex64::new(1.0, 0.0) - m.nodes()[(l + 1) % n];
        let slope = (mr - ml) / h;
        let mval = |w: f64| ml + slope * (w - a0);
        let phi = |w: f64| -> Result<f64> { Ok(2.0 * (mval(w) * (ss.eval_angle(w)? - shift)).re) };
        let k = opts.initial_split.max(1);
        let pts: Vec<f64> = (0..=k).map(|i| a0 + h * i as f64 / k as f64).collect();
        let vals: Vec<f64> = pts.iter().map(|&w| phi(w)).collect::<Result<_>>()?;
        let mut stack: Vec<(f64, f64, f64, f64)> = (0..k)
            .map(|i| (pts[i], pts[i + 1], vals[i], vals[i + 1]))
            .collect();
        while let Some((a, b, fa, fb)) = stack.pop() {
            examined += 1;
            let (top, wtop) = if fa >= fb { (fa, a) } else { (fb, b) };
            if top > worst {
                worst = top;
                arg = wtop;
            }
            if top >= 0.0 || examined > opts.max_intervals {
                return Ok(fail(wtop, top, examined));
            }
            let mid = 0.5 * (a + b);
            let radius = 2.0 * ((b - a) / 4.0).sin();
            let bound = match ss.disk_bounds(Complex64::from_polar(1.0, mid), radius)? {
                Some(bd) => {
                    let mabs = mval(a).norm().max(mval(b).norm());
                    let d2phi = 2.0 * (2.0 * slope.norm() * bd.d1 + mabs * (bd.d1 + bd.d2));
                    top + (b - a) * (b - a) / 8.0 * d2phi
                }
                None => f64::INFINITY,
            };
            if bound <= 0.5 * top {
                certified = certified.max(bound);
            } else {
                if b - a < 1e-13 {
                    return Ok(fail(wtop, top, examined));
                }
                let fm = phi(mid)?;
                stack.push((a, mid, fa, fm));
                stack.push((mid, b, fm, fb));
            }
        }
    }
    Ok(FdiReport {
        grid: examined,
        worst_margin: worst,
        certified_margin: certified,
        pass: certified < 0.0,
        arg_z: Complex64::from_polar(1.0, arg),
    })
}

/// Multiplier from the margin LP with `oversample` constraint points per arc
/// (the pwl values between nodes are linear in `α`). Returns the multiplier and
/// the optimal sampled margin.
pub fn synth_oversampled(
    ss: &StateSpaceModel,
    kappa: f64,
    n: usize,
    oversample: usize,
    opts: &MarginOptions,
) -> Result<(ZFMultiplier, f64)> {
    ss.ensure_schur_stable()?;
    let grid = RootsGrid::new(n);
    let shift = inverse_kappa(kappa);
    let k = oversample.max(1);
    let mut re_q = Vec::with_capacity(n * k);
    let mut coeff = Vec::with_capacity(n * k);
    for l in 0..n {
        for r in 0..k {
            let tau = r as f64 / k as f64;
            let w = grid.angle(l) + tau * 2.0 * PI / n as f64;
            let q = if r == 0 {
                ss.eval_transfer(grid.node(l))? - shift
            } else {
                ss.eval_angle(w)? - shift
            };
            re_q.push(q.re);
            coeff.push(
                (0..n)
                    .map(|j| {
                        let phi = grid.power(l, j as i64) * (1.0 - tau)
                            + grid.power(l + 1, j as i64) * tau;
                        (q * phi).re
                    })
                    .collect(),
            );
        }
    }
    // synthesis only needs a positive margin, so skip the rational recheck
    let mut fast = opts.clone();
    if !opts.exact {
        fast.zero_threshold = f64::NEG_INFINITY;
    }
    let r = solve_dual_form(&re_q, &coeff, &fast)?;
    if !opts.exact && r.t < opts.zero_threshold {
        return Err(Error::NoMultiplier { n, t_star: r.t });
    }
    let primal = PrimalSolution {
        t_star: r.t,
        alpha: r.alpha,
        margins: Vec::new(),
    };
    let m = synth_pwl_multiplier(&primal, &grid)?;
    Ok((m, r.t))
}

/// Attaches the Fourier coefficients `h_kmin..=h_kmax` of `H`.
pub fn fir_truncate(m: &ZFMultiplier, kmin: i64, kmax: i64) -> ZFMultiplier {
    let h: Vec<f64> =
        m.h.fourier_window(kmin, kmax)
            .iter()
            .map(|z| z.re)
            .collect();
    let tail_bound = m.h1 - h.iter().sum::<f64>();
    ZFMultiplier {
        h: m.h.clone(),
        h1: m.h1,
        fir: Some(FirWindow {
            kmin,
            kmax,
            h,
            tail_bound,
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KronReport {
    pub equal: bool,
    pub scalar_margin: f64,
    pub lifted_margin: f64,
}

/// Compares the worst FDI value of `(G, M)` with the largest eigenvalue of the
/// lifted Hermitian form `M(G⊗I − I/κ) + (·)*` over the same grid.
pub fn kron_fdi_equivalence(
    m: &ZFMultiplier,
    ss: &StateSpaceModel,
    kappa: f64,
    d: usize,
    grid_size: usize,
) -> Result<KronReport> {
    let shift = inverse_kappa(kappa);
    let lifted = ss.kron_lift(d);
    let eye = DMatrix::<Complex64>::identity(d, d);
    let mut scalar = f64::NEG_INFINITY;
    let mut lift = f64::NEG_INFINITY;
    for i in 0..grid_size {
        let w = 2.0 * PI * i as f64 / grid_size as f64;
        let z = Complex64::from_polar(1.0, w);
        let mv = m.eval_angle(w);
        scalar = scalar.max(2.0 * (mv * (ss.eval_transfer(z)? - shift)).re);
        let gd = lifted.eval_transfer_matrix(z)? - &eye * Complex64::new(shift, 0.0);
        let form = &gd * mv;
        let herm = &form + form.adjoint();
        lift = lift.max(linalg::hermitian_max_eigenvalue(&herm));
    }
    Ok(KronReport {
        equal: (scalar - lift).abs() <= 1e-10,
        scalar_margin: scalar,
        lifted_margin: lift,
    })
}

/// One row of Nyquist-style plot data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub omega: f64,
    pub m: Complex64,
    pub gm: Complex64,
}

/// `M` and `G·M` on `points` equispaced frequencies in `[0, 2π)`.
pub fn plot_data(m: &ZFMultiplier, ss: &StateSpaceModel, points: usize) -> Result<Vec<PlotRow>> {
    (0..points)
        .map(|i| {
            let w = 2.0 * PI * i as f64 / points as f64;
            let mv = m.eval_angle(w);
            Ok(PlotRow {
                omega: w,
                m: mv,
                gm: ss.eval_angle(w)? * mv,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margin::{build_margin_problem, solve_margin_lp};

    fn example() -> StateSpaceModel {
        StateSpaceModel::from_transfer_function(&[1.1, 0.6], &[1.0, 1.8, 0.9]).unwrap()
    }

    #[test]
    fn trivial_multipliers() {
        let g = RootsGrid::new(4);
        let m = ZFMultiplier::from_alpha(&[0.0; 4], &g);
        assert!(m.nodes().iter().all(|c| c.norm() == 0.0));
        assert_eq!(m.eval_angle(0.3), Complex64::new(1.0, 0.0));
        let p = PrimalSolution {
            t_star: 0.1,
            alpha: vec![1.0, 0.0, 0.0, 0.0],
            margins: vec![],
        };
        assert!(matches!(
            synth_pwl_multiplier(&p, &g),
            Err(Error::DegenerateMultiplier)
        ));
        let p = PrimalSolution {
            t_star: 0.0,
            alpha: vec![0.0; 4],
            margins: vec![],
        };
        assert!(matches!(
            synth_pwl_multiplier(&p, &g),
            Err(Error::NoMultiplier { .. })
        ));
    }

    #[test]
    fn static_fdi_values() {
        let m = ZFMultiplier::from_alpha(&[0.0; 3], &RootsGrid::new(3));
        let r =
            verify_fdi_grid(&m, &StateSpaceModel::static_gain(-1.0), f64::INFINITY, 64).unwrap();
        assert_eq!(r.worst_margin, -2.0);
        assert!(r.pass);
        let r = verify_fdi_grid(&m, &StateSpaceModel::static_gain(1.0), f64::INFINITY, 64).unwrap();
        assert_eq!(r.worst_margin, 2.0);
        assert!(!r.pass);
        let c =
            certify_global_fdi(&m, &StateSpaceModel::static_gain(-1.0), f64::INFINITY, 6).unwrap();
        assert_eq!(c.certified_margin, c.worst_margin);
    }

    #[test]
    fn construction_margin_matches_t_star() {
        let g = example();
        let p = build_margin_problem(&g, 10, 1.5).unwrap();
        let s = solve_margin_lp(&p).unwrap();
        let m = synth_pwl_multiplier(&s.primal, &p.grid).unwrap();
        let cm = construction_grid_margin(&m, &g, 1.5).unwrap();
        assert!((cm - s.primal.t_star).abs() < 1e-8);
        assert!(m.is_pd());
        assert!(m.hyperdominance().is_dhd);
    }

    #[test]
    fn triangle_fir() {
        let m = ZFMultiplier::from_nodes(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let f = fir_truncate(&m, -1, 1);
        let w = f.fir.as_ref().unwrap();
        let c = 4.0 / (PI * PI);
        assert!(w.h[1].abs() < 1e-15 && (w.h[0] - c).abs() < 1e-15 && (w.h[2] - c).abs() < 1e-15);
        assert!((w.tail_bound - (1.0 - 8.0 / (PI * PI))).abs() < 1e-14);
        let zero = fir_truncate(
            &ZFMultiplier::from_alpha(&[0.0; 3], &RootsGrid::new(3)),
            -5,
            5,
        );
        assert!(zero.fir.unwrap().h.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn oversampled_multiplier_certifies_at_one_eight() {
        let g = example();
        let (m, t) = synth_oversampled(&g, 1.8, 40, 8, &MarginOptions::default()).unwrap();
        assert!(t > 0.0);
        assert!(m.is_pd() && m.hyperdominance().is_dhd);
        let grid = verify_fdi_grid(&m, &g, 1.8, 1 << 14).unwrap();
        assert!(grid.pass);
        let r = certify_fdi_adaptive(&m, &g, 1.8, &AdaptiveOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.certified_margin >= grid.worst_margin);
    }

    #[test]
    fn kron_lift_margins() {
        let g = example();
        let (m, _) = synth_oversampled(&g, 1.8, 10, 2, &MarginOptions::default()).unwrap();
        for d in 1..=3 {
            let r = kron_fdi_equivalence(&m, &g, 1.8, d, 256).unwrap();
            assert!(r.equal, "{r:?}");
        }
    }
}
