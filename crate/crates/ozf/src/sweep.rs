//! Threshold search over the slope bound `κ`.
//!
//! A value of `κ` is *refuted* when the margin LP has a certified `t* = 0` at
//! some small `N`, and *certified* when an oversampled pwl multiplier passes
//! the adaptive global FDI certificate. Both properties are monotone in `κ`
//! (the shifted samples `G − 1/κ` increase with `κ` and `Re M ≥ 0`), so the
//! threshold is located by bisection on a `0.01` grid.

use crate::error::Result;
use crate::lti::{nyquist_value, StateSpaceModel};
use crate::margin::{build_margin_problem, solve_margin_lp_with, MarginOptions};
use crate::multiplier::{
    certify_fdi_adaptive, synth_oversampled, AdaptiveOptions, FdiReport, ZFMultiplier,
};
use crate::Error;

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Largest `N` tried when looking for a certified `t* = 0`.
    pub refute_nmax: usize,
    /// Node counts tried for synthesis, in order.
    pub ladder: Vec<usize>,
    /// Constraint points per arc in the synthesis LP.
    pub oversample: usize,
    /// Grid spacing of the search.
    pub step: f64,
    /// Further bisection down to `1e−3` inside the final bracket.
    pub refine: bool,
    pub margin: MarginOptions,
    pub adaptive: AdaptiveOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            refute_nmax: 12,
            ladder: vec![10, 20, 40, 80, 160, 320],
            oversample: 4,
            step: 0.01,
            refine: false,
            margin: MarginOptions::default(),
            adaptive: AdaptiveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Certified {
        n: usize,
        multiplier: ZFMultiplier,
        report: FdiReport,
        lp_margin: f64,
    },
    Refuted {
        n: usize,
    },
    Undecided,
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified { .. })
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }
}

/// Smallest `N ≤ nmax` with a certified `t* = 0`.
pub fn first_degenerate_n(
    ss: &StateSpaceModel,
    kappa: f64,
    nmax: usize,
    opts: &MarginOptions,
) -> Result<Option<usize>> {
    for n in 1..=nmax {
        let p = build_margin_problem(ss, n, kappa)?;
        if solve_margin_lp_with(&p, opts)?.certified_zero {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Certified multiplier along the ladder, if one is found.
pub fn certify_kappa(
    ss: &StateSpaceModel,
    kappa: f64,
    opts: &SweepOptions,
) -> Result<Option<Verdict>> {
    for &n in &opts.ladder {
        let (m, t) = match synth_oversampled(ss, kappa, n, opts.oversample, &opts.margin) {
            Ok(v) => v,
            Err(Error::NoMultiplier { .. }) | Err(Error::DegenerateMultiplier) => continue,
            Err(e) => return Err(e),
        };
        let report = certify_fdi_adaptive(&m, ss, kappa, &opts.adaptive)?;
        if report.pass {
            return Ok(Some(Verdict::Certified {
                n,
                multiplier: m,
                report,
                lp_margin: t,
            }));
        }
    }
    Ok(None)
}

pub fn assess_kappa(ss: &StateSpaceModel, kappa: f64, opts: &SweepOptions) -> Result<Verdict> {
    if let Some(n) = first_degenerate_n(ss, kappa, opts.refute_nmax, &opts.margin)? {
        return Ok(Verdict::Refuted { n });
    }
    Ok(certify_kappa(ss, kappa, opts)?.unwrap_or(Verdict::Undecided))
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    /// Largest examined `κ` with a certified multiplier.
    pub largest_certified: f64,
    /// Smallest examined `κ` with a certified `t* = 0`, if any.
    pub smallest_refuted: Option<f64>,
    /// Midpoint of the final bracket.
    pub threshold: f64,
    /// Every examined `κ` with its verdict, in evaluation order.
    pub evaluations: Vec<(f64, Verdict)>,
}

/// Bisection for the multiplier-existence threshold on the `step` grid.
pub fn kappa_threshold(ss: &StateSpaceModel, opts: &SweepOptions) -> Result<ThresholdResult> {
    let nyq = nyquist_value(ss, 1 << 14)?;
    let step = opts.step;
    let mut evaluations = Vec::new();
    let grid_kappa = |i: i64| (i as f64 * step * 1e6).round() / 1e6;

    // upper end: at or above the Nyquist value no multiplier exists
    let mut hi = if nyq.is_finite() {
        (nyq / step).ceil() as i64
    } else {
        (100.0 / step) as i64
    };
    let mut hi_refuted = false;
    let mut lo = 1i64;
    let v = assess_kappa(ss, grid_kappa(hi), opts)?;
    hi_refuted |= v.is_refuted();
    let hi_certified = v.is_certified();
    evaluations.push((grid_kappa(hi), v));
    if hi_certified {
        lo = hi;
    } else {
        let v = assess_kappa(ss, grid_kappa(lo), opts)?;
        let ok = v.is_certified();
        evaluations.push((grid_kappa(lo), v));
        if !ok {
            return Ok(ThresholdResult {
                largest_certified: 0.0,
                smallest_refuted: hi_refuted.then(|| grid_kappa(hi)),
                threshold: 0.0,
                evaluations,
            });
        }
    }
    let mut smallest_refuted = hi_refuted.then(|| grid_kappa(hi));
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let v = assess_kappa(ss, grid_kappa(mid), opts)?;
        if v.is_certified() {
            lo = mid;
        } else {
            if v.is_refuted() {
                smallest_refuted = Some(grid_kappa(mid));
            }
            hi = mid;
        }
        evaluations.push((grid_kappa(mid), v));
    }
    let mut lo_k = grid_kappa(lo);
    let mut hi_k = grid_kappa(hi);
    if opts.refine && lo < hi {
        let (mut a, mut b) = (0i64, 10i64);
        while b - a > 1 {
            let mid = (a + b) / 2;
            let k = lo_k + (hi_k - lo_k) * mid as f64 / 10.0;
            let v = assess_kappa(ss, k, opts)?;
            if v.is_certified() {
                a = mid;
            } else {
                if v.is_refuted() {
                    smallest_refuted = Some(smallest_refuted.map_or(k, |s: f64| s.min(k)));
                }
                b = mid;
            }
            evaluations.push((k, v));
        }
        let base = lo_k;
        let width = hi_k - lo_k;
        lo_k = base + width * a as f64 / 10.0;
        hi_k = base + width * b as f64 / 10.0;
    }
    Ok(ThresholdResult {
        largest_certified: lo_k,
        smallest_refuted,
        threshold: 0.5 * (lo_k + hi_k),
        evaluations,
    })
}
