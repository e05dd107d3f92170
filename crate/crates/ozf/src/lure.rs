//! The lifted Lur'e loop `e2 = (G ⊗ I_d) e1 + u2`, `e1 − u1 ∈ f(e2)` driven by a
//! constructed nonlinearity: certificate assembly, independent verification,
//! forward simulation and power-based gain bounds.

use crate::destabilizer::{
    build_dual_vectors, build_gram_factor, build_interpolation, build_potential,
    check_trace_inequality, finalize_nonlinearity, refine_pairs, InterpolationData, RefinedPairs,
    SlopeNonlinearity,
};
use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::margin::{build_margin_problem, solve_margin_lp_with, MarginOptions};
use crate::polyhedral::PolyhedralConvexFunction;
use crate::signal::{signal_power, Signal};
use nalgebra::DVector;

/// A periodic oscillation of the lifted loop with its construction data.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopCertificate {
    pub plant: StateSpaceModel,
    pub kappa: f64,
    pub period: usize,
    pub d: usize,
    pub t_star: f64,
    pub rho: f64,
    pub mu: Vec<f64>,
    pub base_index: usize,
    pub data: InterpolationData,
    pub refined: RefinedPairs,
    /// Potential before the origin shift.
    pub potential: PolyhedralConvexFunction,
    pub nonlinearity: SlopeNonlinearity,
    /// `ŵ_k = ŷ_k − ŷ_N`.
    pub w_hat: Signal,
    /// `ẑ_k = x̂_k − x̂_N`.
    pub z_hat: Signal,
    /// `x̃_k = ẑ_k − x̄_k`.
    pub x_res: Signal,
    /// `ỹ_k = ȳ_k − ŵ_k`.
    pub y_res: Signal,
    pub y_bar: Signal,
    /// State of `G ⊗ I_d` whose response to the periodic `ȳ` is periodic.
    pub xi0: DVector<f64>,
}

fn periodic(rows: &[Vec<f64>]) -> Signal {
    Signal::periodic(rows.iter().map(|r| DVector::from_column_slice(r)).collect())
}

fn combine(a: &Signal, b: &Signal, scale: f64) -> Signal {
    Signal::periodic((0..a.len()).map(|k| a.at(k) + b.at(k) * scale).collect())
}

impl LoopCertificate {
    fn inv_kappa(&self) -> f64 {
        if self.kappa.is_finite() {
            1.0 / self.kappa
        } else {
            0.0
        }
    }

    /// Plant input `e1 = ȳ`.
    pub fn e1(&self) -> Signal {
        self.y_bar.clone()
    }

    /// Nonlinearity input `e2 = ẑ + ŵ/κ`.
    pub fn e2(&self) -> Signal {
        combine(&self.z_hat, &self.w_hat, self.inv_kappa())
    }

    /// `u1 = ỹ`.
    pub fn u1(&self) -> Signal {
        self.y_res.clone()
    }

    /// `u2 = x̃ − ỹ/κ`.
    pub fn u2(&self) -> Signal {
        combine(&self.x_res, &self.y_res, -self.inv_kappa())
    }

    /// `t̃_k = C A^k ξ0` on the lifted plant: the gap between the zero-state and
    /// periodic responses to `ȳ`.
    pub fn transient(&self, horizon: usize) -> Signal {
        let lifted = self.plant.kron_lift(self.d);
        let mut x = self.xi0.clone();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            out.push(&lifted.c * &x);
            x = &lifted.a * x;
        }
        Signal::new(out)
    }
}

impl LoopCertificate {
    /// Derives the loop signals from the pairs without checking any bound.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        ss: &StateSpaceModel,
        kappa: f64,
        mu: Vec<f64>,
        t_star: f64,
        data: InterpolationData,
        refined: RefinedPairs,
        potential: PolyhedralConvexFunction,
        base_index: usize,
        xi0: DVector<f64>,
    ) -> Self {
        let n = data.len() - 1;
        let diff =
            |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        let w: Vec<Vec<f64>> = (0..n)
            .map(|k| diff(&refined.yhat[k], &refined.yhat[n]))
            .collect();
        let z: Vec<Vec<f64>> = (0..n)
            .map(|k| diff(&refined.xhat[k], &refined.xhat[n]))
            .collect();
        let xr: Vec<Vec<f64>> = (0..n).map(|k| diff(&z[k], &data.xbar[k])).collect();
        let yr: Vec<Vec<f64>> = (0..n).map(|k| diff(&data.ybar[k], &w[k])).collect();
        let nonlinearity = finalize_nonlinearity(&potential, &refined, kappa);
        Self {
            plant: ss.clone(),
            kappa,
            period: n,
            d: data.dim(),
            t_star,
            rho: data.rho,
            mu,
            base_index,
            y_bar: periodic(&data.ybar[..n]),
            data,
            refined,
            potential,
            nonlinearity,
            w_hat: periodic(&w),
            z_hat: periodic(&z),
            x_res: periodic(&xr),
            y_res: periodic(&yr),
            xi0,
        }
    }
}

/// Builds the certificate and enforces the norm identity and residual power bounds.
pub fn assemble_certificate(
    ss: &StateSpaceModel,
    kappa: f64,
    mu: Vec<f64>,
    t_star: f64,
    data: InterpolationData,
    refined: RefinedPairs,
    potential: PolyhedralConvexFunction,
) -> Result<LoopCertificate> {
    let n = data.len() - 1;
    let y_bar = periodic(&data.ybar[..n]);
    let xi0 = ss
        .kron_lift(data.dim())
        .periodic_initial_state(&y_bar.samples)?;
    let c = LoopCertificate::from_parts(ss, kappa, mu, t_star, data, refined, potential, 0, xi0);
    let norm = n as f64 * signal_power(&c.y_bar, n).powi(2);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::ConstructionFault(format!(
            "norm identity N pow(ybar)^2 = {norm}"
        )));
    }
    let bound = 4.0 * t_star.max(0.0) / n as f64 + 1e-8;
    for (name, s) in [("pow(x_res)^2", &c.x_res), ("pow(y_res)^2", &c.y_res)] {
        let p = signal_power(s, n).powi(2);
        if p > bound {
            return Err(Error::ConstructionFault(format!(
                "{name} = {p:e} exceeds 4 t*/N"
            )));
        }
    }
    Ok(c)
}

#[derive(Debug, Clone)]
pub struct DestabilizeOptions {
    /// Largest acceptable `t*`.
    pub eps: f64,
    /// Node counts `1..=nmax` are tried in order.
    pub nmax: usize,
    /// Use exactly this node count.
    pub n: Option<usize>,
    pub rank_tol: f64,
    /// Random doubly hyperdominant matrices in the trace check.
    pub trace_samples: usize,
    pub seed: u64,
    pub margin: MarginOptions,
}

impl Default for DestabilizeOptions {
    fn default() -> Self {
        Self {
            eps: 0.0,
            nmax: 12,
            n: None,
            rank_tol: 1e-10,
            trace_samples: 100,
            seed: 0x0ddba11,
            margin: MarginOptions::default(),
        }
    }
}

/// Runs the full construction at the first node count with `t* ≤ eps`.
pub fn destabilize(
    ss: &StateSpaceModel,
    kappa: f64,
    opts: &DestabilizeOptions,
) -> Result<LoopCertificate> {
    let range: Vec<usize> = match opts.n {
        Some(n) => vec![n],
        None => (1..=opts.nmax).collect(),
    };
    let mut best = f64::INFINITY;
    for n in range.iter().copied() {
        let p = build_margin_problem(ss, n, kappa)?;
        let sol = solve_margin_lp_with(&p, &opts.margin)?;
        let t_star = sol.primal.t_star;
        best = best.min(t_star);
        if t_star > opts.eps {
            continue;
        }
        let dv = build_dual_vectors(&sol.dual, &p, t_star)?;
        let gf = build_gram_factor(&dv, opts.rank_tol);
        let trace = check_trace_inequality(&gf, &dv, opts.trace_samples, opts.seed);
        if trace.worst_slack < -1e-8 {
            return Err(Error::ConstructionInconsistency(format!(
                "trace inequality violated by {:e}",
                -trace.worst_slack
            )));
        }
        let data = build_interpolation(&gf, &dv)?;
        let potential = build_potential(&data, 0)?;
        let refined = refine_pairs(&potential, &data)?;
        return assemble_certificate(ss, kappa, sol.dual.mu, t_star, data, refined, potential);
    }
    Err(Error::NoDestabilizingCertificate {
        t_star: best,
        nmax: *range.last().unwrap_or(&0),
        eps: opts.eps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    /// `max ‖(G ⊗ I) e1 + u2 − e2‖` over three periods from `ξ0`.
    pub lti_residual: f64,
    /// Largest Fenchel–Young gap of `(ẑ_k, ŵ_k)` for the shifted potential.
    pub graph_gap: f64,
    /// Largest `‖f(e2_k) − (e1_k − u1_k)‖`.
    pub eval_residual: f64,
    /// `N pow(ȳ)² − 1`.
    pub norm_identity: f64,
    /// `pow(x̃)² − 4t*/N` and `pow(ỹ)² − 4t*/N`.
    pub power_excess: [f64; 2],
    /// All signals vanish.
    pub trivial: bool,
    pub worst_residual: f64,
    pub pass: bool,
}

pub fn verify_certificate(c: &LoopCertificate) -> Result<VerifyReport> {
    let n = c.period;
    let (e1, e2, u1, u2) = (c.e1(), c.e2(), c.u1(), c.u2());
    let lifted = c.plant.kron_lift(c.d);
    let inputs = e1.truncate(3 * n);
    let out = lifted.simulate(&c.xi0, &inputs);
    let lti_residual = (0..3 * n)
        .map(|k| (&out[k] + u2.at(k) - e2.at(k)).amax())
        .fold(0.0f64, f64::max);
    let f = &c.nonlinearity.potential;
    let mut graph_gap = 0.0f64;
    let mut eval_residual = 0.0f64;
    for k in 0..n {
        let z: Vec<f64> = c.z_hat.at(k).iter().copied().collect();
        let w: Vec<f64> = c.w_hat.at(k).iter().copied().collect();
        graph_gap = graph_gap.max(f.fenchel_young_gap(&z, &w)?.abs());
        let e2k: Vec<f64> = e2.at(k).iter().copied().collect();
        let v = c.nonlinearity.eval(&e2k)?;
        let target = e1.at(k) - u1.at(k);
        eval_residual = eval_residual.max((DVector::from_vec(v.y) - target).amax());
    }
    let norm_identity = n as f64 * signal_power(&c.y_bar, n).powi(2) - 1.0;
    let bound = 4.0 * c.t_star.max(0.0) / n as f64;
    let power_excess = [
        signal_power(&c.x_res, n).powi(2) - bound,
        signal_power(&c.y_res, n).powi(2) - bound,
    ];
    let trivial = c
        .w_hat
        .samples
        .iter()
        .chain(&c.y_bar.samples)
        .all(|v| v.amax() == 0.0);
    let worst_residual = lti_residual
        .max(graph_gap)
        .max(eval_residual)
        .max(norm_identity.abs());
    let pass = lti_residual <= 1e-8
        && graph_gap <= 1e-9
        && eval_residual <= 1e-8
        && norm_identity.abs() <= 1e-8
        && power_excess.iter().all(|&e| e <= 1e-8)
        && !trivial;
    Ok(VerifyReport {
        lti_residual,
        graph_gap,
        eval_residual,
        norm_identity,
        power_excess,
        trivial,
        worst_residual,
        pass,
    })
}

/// Forward simulation of the lifted loop from `xi0`.
///
/// Strictly proper plants are stepped explicitly; otherwise each step solves
/// the algebraic loop by damped fixed-point iteration.
pub fn simulate_lifted_loop(
    ss: &StateSpaceModel,
    nl: &SlopeNonlinearity,
    u1: &Signal,
    u2: &Signal,
    xi0: &DVector<f64>,
    steps: usize,
) -> Result<(Signal, Signal)> {
    let d = nl.dim();
    let lifted = ss.kron_lift(d);
    if xi0.len() != lifted.order() {
        return Err(Error::Dimension(format!(
            "initial state of length {} for order {}",
            xi0.len(),
            lifted.order()
        )));
    }
    let explicit = lifted.d.amax() == 0.0;
    let eval = |z: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(DVector::from_vec(nl.eval(z.as_slice())?.y))
    };
    let mut x = xi0.clone();
    let (mut e1s, mut e2s) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    let mut guess = DVector::zeros(d);
    for k in 0..steps {
        let free = &lifted.c * &x + u2.at(k);
        let (e1, e2) = if explicit {
            let e1 = u1.at(k) + eval(&free)?;
            (e1, free)
        } else {
            let mut e1: DVector<f64> = guess.clone();
            let mut converged = false;
            for _ in 0..100 {
                let e2 = &free + &lifted.d * &e1;
                let next = u1.at(k) + eval(&e2)?;
                let delta = (&next - &e1).amax();
                e1 = &e1 * 0.5 + next * 0.5;
                if delta <= 1e-12 * (1.0 + e1.amax()) {
                    converged = true;
                    break;
                }
            }
            let e2 = &free + &lifted.d * &e1;
            let resid = (u1.at(k) + eval(&e2)? - &e1).amax();
            if !converged || resid > 1e-9 {
                return Err(Error::WellPosedness { step: k });
            }
            (e1, e2)
        };
        x = &lifted.a * &x + &lifted.b * &e1;
        guess = e1.clone();
        e1s.push(e1);
        e2s.push(e2);
    }
    Ok((Signal::new(e1s), Signal::new(e2s)))
}

/// Lower bound on the loop gain from output `ȳ` and inputs `(x̃ + t̃, ỹ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEstimate {
    pub pow_output: f64,
    /// Asymptotic input power; the transient does not contribute in the limit.
    pub pow_input: f64,
    /// `pow_output / pow_input`, infinite when `pow_input = 0`.
    pub lower_bound: f64,
    pub horizon: usize,
    /// Input power over the horizon with the transient included.
    pub horizon_pow_input: f64,
    pub horizon_lower_bound: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn gain_lower_bound(c: &LoopCertificate, horizon: usize) -> Result<GainEstimate> {
    let n = c.period;
    if horizon == 0 || horizon % n != 0 {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} is not a positive multiple of N = {n}"
        )));
    }
    let pow_output = signal_power(&c.y_bar, horizon);
    let pow_input = (signal_power(&c.x_res, n).powi(2) + signal_power(&c.y_res, n).powi(2)).sqrt();
    let tr = c.transient(horizon);
    let with_transient = Signal::new((0..horizon).map(|k| c.x_res.at(k) + tr.at(k)).collect());
    let horizon_pow_input = (signal_power(&with_transient, horizon).powi(2)
        + signal_power(&c.y_res, horizon).powi(2))
    .sqrt();
    Ok(GainEstimate {
        pow_output,
        pow_input,
        lower_bound: ratio(pow_output, pow_input),
        horizon,
        horizon_pow_input,
        horizon_lower_bound: ratio(pow_output, horizon_pow_input),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> StateSpaceModel {
        StateSpaceModel::from_transfer_function(&[1.1, 0.6], &[1.0, 1.8, 0.9]).unwrap()
    }

    #[test]
    fn example_oscillation() {
        let c = destabilize(&example(), 2.0, &DestabilizeOptions::default()).unwrap();
        assert_eq!(c.period, 5);
        assert!(c.d <= 5);
        assert_eq!(c.rho, 0.0);
        assert!(c
            .x_res
            .samples
            .iter()
            .chain(&c.y_res.samples)
            .all(|v| v.amax() == 0.0));
        assert!(c.w_hat.samples.iter().any(|v| v.amax() > 1e-3));
        let r = verify_certificate(&c).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(gain_lower_bound(&c, 50).unwrap().lower_bound, f64::INFINITY);
    }

    #[test]
    fn sustained_simulation() {
        let c = destabilize(&example(), 2.0, &DestabilizeOptions::default()).unwrap();
        let steps = 10 * c.period;
        let (e1, e2) =
            simulate_lifted_loop(&c.plant, &c.nonlinearity, &c.u1(), &c.u2(), &c.xi0, steps)
                .unwrap();
        let (p1, p2) = (c.e1(), c.e2());
        let drift = (0..steps)
            .map(|k| {
                (e1.at(k) - p1.at(k))
                    .amax()
                    .max((e2.at(k) - p2.at(k)).amax())
            })
            .fold(0.0f64, f64::max);
        assert!(drift <= 1e-7, "{drift}");
    }

    #[test]
    fn scaled_oscillation_detected() {
        let mut c = destabilize(&example(), 2.0, &DestabilizeOptions::default()).unwrap();
        for v in &mut c.w_hat.samples {
            *v *= 1.01;
        }
        c.y_bar = c.w_hat.clone();
        let r = verify_certificate(&c).unwrap();
        assert!(r.lti_residual > 1e-4 && !r.pass);
    }

    #[test]
    fn refuses_without_certificate() {
        let g = StateSpaceModel::static_gain(-1.0);
        let e = destabilize(&g, f64::INFINITY, &DestabilizeOptions::default()).unwrap_err();
        assert!(
            matches!(e, Error::NoDestabilizingCertificate { t_star, .. } if (t_star - 1.0).abs() < 1e-12)
        );
    }

    #[test]
    fn perturbed_pairs_rejected() {
        let c = destabilize(&example(), 2.0, &DestabilizeOptions::default()).unwrap();
        let mut refined = c.refined.clone();
        refined.xhat[0][0] += 0.1;
        let e = assemble_certificate(
            &c.plant,
            2.0,
            c.mu.clone(),
            0.0,
            c.data.clone(),
            refined,
            c.potential.clone(),
        )
        .unwrap_err();
        assert!(e.to_string().contains("pow(x_res)^2"), "{e}");
    }

    #[test]
    fn zero_certificate_is_trivial() {
        let mut c = destabilize(&example(), 2.0, &DestabilizeOptions::default()).unwrap();
        for s in [&mut c.w_hat, &mut c.z_hat, &mut c.y_bar] {
            for v in &mut s.samples {
                v.fill(0.0);
            }
        }
        c.xi0.fill(0.0);
        let r = verify_certificate(&c).unwrap();
        assert!(r.trivial && !r.pass && r.lti_residual == 0.0);
    }

    #[test]
    fn open_loop_impulse() {
        let g = example();
        let nl = SlopeNonlinearity::zero(2, 2.0);
        let mut u2 = vec![DVector::zeros(2); 8];
        u2[0] = DVector::from_vec(vec![1.0, -2.0]);
        let zero = Signal::zeros(8, 2);
        let (e1, e2) = simulate_lifted_loop(
            &g,
            &nl,
            &zero,
            &Signal::new(u2.clone()),
            &DVector::zeros(4),
            8,
        )
        .unwrap();
        assert!(e1.samples.iter().all(|v| v.amax() == 0.0));
        assert_eq!(e2.samples, u2);
        let (_, e2) = simulate_lifted_loop(&g, &nl, &zero, &zero, &DVector::zeros(4), 8).unwrap();
        assert!(e2.samples.iter().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn positive_margin_gain() {
        let opts = DestabilizeOptions {
            eps: 0.1,
            n: Some(6),
            ..Default::default()
        };
        let c = destabilize(&example(), 1.7, &opts).unwrap();
        assert!(c.t_star > 0.0);
        let r = verify_certificate(&c).unwrap();
        assert!(r.pass, "{r:?}");
        let g = gain_lower_bound(&c, 6 * 200).unwrap();
        assert!(
            g.lower_bound >= (1.0 - 1e-4) / (8.0 * c.t_star).sqrt(),
            "{g:?}"
        );
        // the transient has finite energy: h (pow_h² − pow²) settles to a constant
        let excess = |m: usize| {
            let g = gain_lower_bound(&c, 6 * m).unwrap();
            (6 * m) as f64 * (g.horizon_pow_input.powi(2) - g.pow_input.powi(2))
        };
        let (a, b) = (excess(200), excess(400));
        assert!(a > 0.0 && ((a - b) / a).abs() < 1e-9, "{a} {b}");
    }
}
