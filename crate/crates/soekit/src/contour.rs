//! SOE construction by trapezoidal quadrature of the contour-deformed
//! Fourier integral.
//!
//! Each analytic segment is mapped to [-1, 1] and the change of variables
//! ω = tanh z turns the Fourier integral into an integral over the real
//! line of
//!
//! ```text
//!     g(z; t) = J_eff(tanh z) e^{-i t tanh z} / cosh² z ,
//! ```
//!
//! which is evaluated on the shifted uniform grid z_n = n h − i y₂,
//! |n h| ≤ M. Every node becomes one SOE term with pole tanh(z_n) (strictly
//! decaying, since Im tanh(x − iy) < 0) and weight h·J̃_eff(tanh z_n)/cosh² z_n.
//! Step h and truncation M are selected from the segment's endpoint
//! singularity order; an optional refinement loop verifies the result
//! against the real-axis oracle and densifies the grid geometrically.

use crate::error::{Error, Result};
use crate::oracle::BcfOracle;
use crate::soe::{error_in_norm_from_samples, Norm, Provenance, SoeRepresentation, SoeTerm};
use crate::spectral::{AnalyticSegment, Beta, SpectralModel, Statistics};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Contour and grid parameters for one segment build.
///
/// y₂ = (θ₁ + π/4 − θ₀)/2 and the strip half-width a = (π/4 − θ₀ − θ₁)/2
/// are derived quantities; the discretization decay constant is c = 2πa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureParams {
    pub theta0: f64,
    pub theta1: f64,
    /// Calibration prefactor standing in for the non-computable constants
    /// C_J·A_α of the error bound.
    pub kappa: f64,
    /// Grid step in the strip coordinate (0 < h < 1).
    pub h: f64,
    /// Grid truncation: nodes satisfy |n h| ≤ M.
    pub big_m: f64,
    /// Dimensionless validity horizon recorded at selection time.
    pub t_horizon: f64,
}

impl QuadratureParams {
    pub fn with_grid(theta0: f64, theta1: f64, kappa: f64, h: f64, big_m: f64) -> Result<Self> {
        let p = Self {
            theta0,
            theta1,
            kappa,
            h,
            big_m,
            t_horizon: f64::INFINITY,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta0 > 0.0 && self.theta1 > 0.0 && self.theta0 + self.theta1 < PI / 4.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < θ₁ < π/4 − θ₀ with θ₀ > 0, got θ₀ = {}, θ₁ = {}",
                self.theta0, self.theta1
            )));
        }
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "h must lie in (0, 1), got {}",
                self.h
            )));
        }
        if !(self.big_m > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "M must exceed 1, got {}",
                self.big_m
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParameter("κ must be positive".into()));
        }
        Ok(())
    }

    /// Contour depth y₂ = (θ₁ + π/4 − θ₀)/2.
    pub fn y2(&self) -> f64 {
        0.5 * (self.theta1 + PI / 4.0 - self.theta0)
    }

    /// Strip half-width a = (π/4 − θ₀ − θ₁)/2.
    pub fn strip_half_width(&self) -> f64 {
        0.5 * (PI / 4.0 - self.theta0 - self.theta1)
    }

    /// Discretization decay constant c = 2πa.
    pub fn decay_constant(&self) -> f64 {
        2.0 * PI * self.strip_half_width()
    }

    pub fn node_count(&self) -> usize {
        2 * (self.big_m / self.h).floor() as usize + 1
    }

    /// One geometric refinement round: grid densified 1.5×, truncation
    /// extended 1.25×, so each round costs less than twice the previous.
    pub fn refined(&self) -> Self {
        Self {
            h: self.h / 1.5,
            big_m: self.big_m * 1.25,
            ..*self
        }
    }
}

fn clamp_grid(inv_h: f64, big_m: f64) -> (f64, f64) {
    let h = (1.0 / inv_h.max(1.0 + 1e-9)).min(0.999);
    (h, big_m.max(1.0 + 1e-9))
}

/// Grid selection for an L¹ target on [0, T] (both dimensionless), per
/// endpoint order class:
///
/// - α > 0:          M = (1/α)·log(2(α+1)K/(αε)),   1/h = (1/c)·log(2K/(αε))
/// - α = 0 (or log): M = log(2KT/ε),                1/h = (1/c)·log(2K log²(2+T)/ε)
/// - −1 < α < 0:     M = (1/(α+1))·log(2KT/ε),      1/h = (1/c)·log(2K(1+T)^{|α|}/(|α|ε))
///
/// with K = κ and c = 2πa.
pub fn select_params(
    alpha: f64,
    log_flag: bool,
    eps: f64,
    t_horizon: f64,
    theta0: f64,
    theta1: f64,
    kappa: f64,
) -> Result<QuadratureParams> {
    if alpha <= -1.0 {
        return Err(Error::InvalidParameter(format!(
            "singularity order must exceed -1, got {alpha}"
        )));
    }
    if !(eps > 0.0) || !(t_horizon > 0.0) {
        return Err(Error::InvalidParameter("ε and T must be positive".into()));
    }
    let probe = QuadratureParams::with_grid(theta0, theta1, kappa, 0.5, 2.0)?;
    let c = probe.decay_constant();
    let k = kappa;
    let (big_m, inv_h) = if alpha > 0.0 && !log_flag {
        (
            (2.0 * (alpha + 1.0) * k / (alpha * eps)).ln() / alpha,
            (2.0 * k / (alpha * eps)).ln() / c,
        )
    } else if alpha == 0.0 || log_flag {
        (
            (2.0 * k * t_horizon / eps).ln(),
            (2.0 * k * (2.0 + t_horizon).ln().powi(2) / eps).ln() / c,
        )
    } else {
        (
            (2.0 * k * t_horizon / eps).ln() / (alpha + 1.0),
            (2.0 * k * (1.0 + t_horizon).powf(alpha.abs()) / (alpha.abs() * eps)).ln() / c,
        )
    };
    let (h, big_m) = clamp_grid(inv_h, big_m);
    Ok(QuadratureParams {
        theta0,
        theta1,
        kappa,
        h,
        big_m,
        t_horizon,
    })
}

/// Grid selection for an L∞ target; T-independent for every order:
///
/// - α ≠ 0: M = (1/(α+1))·log(2K/ε∞),  1/h = (1/c)·log(2K/ε∞)
/// - α = 0: M = log(2K/ε∞),            1/h = (1/c)·log(2K/ε∞)
pub fn select_params_linf(
    alpha: f64,
    log_flag: bool,
    eps_inf: f64,
    theta0: f64,
    theta1: f64,
    kappa: f64,
) -> Result<QuadratureParams> {
    if alpha <= -1.0 {
        return Err(Error::InvalidParameter(format!(
            "singularity order must exceed -1, got {alpha}"
        )));
    }
    if !(eps_inf > 0.0) {
        return Err(Error::InvalidParameter("ε∞ must be positive".into()));
    }
    let probe = QuadratureParams::with_grid(theta0, theta1, kappa, 0.5, 2.0)?;
    let c = probe.decay_constant();
    let arg = (2.0 * kappa / eps_inf).ln();
    let big_m = if alpha == 0.0 || log_flag {
        arg
    } else {
        arg / (alpha + 1.0)
    };
    let (h, big_m) = clamp_grid(arg / c, big_m);
    Ok(QuadratureParams {
        theta0,
        theta1,
        kappa,
        h,
        big_m,
        t_horizon: f64::INFINITY,
    })
}

/// Quadrature of one segment into an SOE, on the default contour depth y₂.
pub fn build_segment_soe(
    segment: &AnalyticSegment,
    params: &QuadratureParams,
) -> Result<SoeRepresentation> {
    build_segment_soe_with_y2(segment, params, params.y2())
}

/// Same build on a custom contour depth y₂ ∈ (θ₁, π/4 − θ₀). The contour
/// deformation freedom means any depth in the window yields the same Δ(t)
/// up to the quadrature error.
pub fn build_segment_soe_with_y2(
    segment: &AnalyticSegment,
    params: &QuadratureParams,
    y2: f64,
) -> Result<SoeRepresentation> {
    params.validate()?;
    if !(y2 > params.theta1 && y2 < PI / 4.0 - params.theta0) {
        return Err(Error::InvalidParameter(format!(
            "y₂ = {y2} outside (θ₁, π/4 − θ₀)"
        )));
    }
    let w_half = segment.half_width();
    let omega_mid = segment.midpoint();
    let n_max = (params.big_m / params.h).floor() as i64;
    let mut terms = Vec::with_capacity((2 * n_max + 1) as usize);
    for n in -n_max..=n_max {
        let z = Complex64::new(n as f64 * params.h, -y2);
        let w_unit = z.tanh();
        let j_tilde = w_half * segment.eval_complex(segment.from_unit(w_unit));
        if !j_tilde.is_finite() {
            return Err(Error::EvaluatorFailure {
                omega: segment.from_unit(w_unit),
            });
        }
        let cosh = z.cosh();
        let weight = j_tilde * params.h / (cosh * cosh);
        if !weight.is_finite() {
            return Err(Error::NonFiniteWeight {
                index: (n + n_max) as usize,
            });
        }
        terms.push(SoeTerm {
            c: weight,
            z: w_unit * w_half + omega_mid,
        });
    }
    let horizon = if params.t_horizon.is_finite() {
        params.t_horizon / w_half
    } else {
        1e300
    };
    SoeRepresentation::new(terms, horizon, Provenance::Quadrature)
}

/// Options for a full model build.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Target error: time units for L¹, dimensionless for L∞.
    pub eps: f64,
    /// Validity horizon in time units.
    pub t_max: f64,
    pub norm: Norm,
    pub theta0: f64,
    pub theta1: f64,
    pub kappa: f64,
    /// Verify against the oracle and densify geometrically until the
    /// target is met (up to [`MAX_REFINE_ROUNDS`] rounds).
    pub refine: bool,
}

impl BuildOptions {
    pub fn new(eps: f64, t_max: f64) -> Self {
        Self {
            eps,
            t_max,
            norm: Norm::L1,
            theta0: PI / 12.0,
            theta1: PI / 12.0,
            kappa: 1.0,
            refine: true,
        }
    }

    pub fn norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn refine(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }

    pub fn kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn angles(mut self, theta0: f64, theta1: f64) -> Self {
        self.theta0 = theta0;
        self.theta1 = theta1;
        self
    }
}

pub const MAX_REFINE_ROUNDS: usize = 8;
/// Cap on measurement-grid points for the refinement loop.
const MEASURE_POINTS_CAP: usize = 200_000;

/// Result of a model build.
#[derive(Debug, Clone)]
pub struct BcfBuild {
    pub soe: SoeRepresentation,
    pub refine_rounds: usize,
    pub segment_count: usize,
    /// Measured error when refinement ran (also recorded on the SOE).
    pub measured_error: Option<f64>,
}

/// Measurement step: the protocol value 0.01 where affordable, kept below
/// the oscillation-resolution bound 0.1/ω and above the point-count cap.
pub fn measurement_dt(omega_scale: f64, t_max: f64) -> f64 {
    let dt = (0.01f64).min(0.1 / omega_scale.max(1e-12));
    dt.max(t_max / MEASURE_POINTS_CAP as f64)
}

/// Build the SOE of a model's BCF: weight, segment, select per-segment
/// grids (ε split equally across segments), quadrate, merge; optionally
/// refine against the oracle until the target holds.
pub fn build_bcf_soe(model: &SpectralModel, opts: &BuildOptions) -> Result<BcfBuild> {
    if !(opts.eps > 0.0) || !(opts.t_max > 0.0) {
        return Err(Error::InvalidParameter("ε and T must be positive".into()));
    }
    // Truncation budget: a tenth of the target, with the finite-temperature
    // log(1+T)/β factor applied for low orders at ω → 0.
    let has_tail = model.base.tail().is_some();
    let mut eps_tail = 0.1 * opts.eps;
    if has_tail {
        if let (Statistics::Boson, Beta::Finite(beta)) = (model.statistics, model.beta) {
            let gamma0 = model.base.pieces()[0].alpha_lo;
            if gamma0 <= 1.0 {
                eps_tail /= (1.0 + opts.t_max).ln().max(1.0) / beta;
            }
        }
    }
    let segments = crate::spectral::effective_segments(model, opts.theta0, eps_tail)?;
    let eps_build = if has_tail { 0.9 * opts.eps } else { opts.eps };
    let eps_per_segment = eps_build / segments.len() as f64;

    let params: Vec<QuadratureParams> = segments
        .iter()
        .map(|seg| match opts.norm {
            Norm::L1 => select_params(
                seg.alpha(),
                seg.has_log_order(),
                seg.half_width() * eps_per_segment,
                seg.half_width() * opts.t_max,
                opts.theta0,
                opts.theta1,
                opts.kappa,
            ),
            Norm::Linf => select_params_linf(
                seg.alpha(),
                seg.has_log_order(),
                eps_per_segment,
                opts.theta0,
                opts.theta1,
                opts.kappa,
            ),
        })
        .collect::<Result<_>>()?;

    let assemble = |params: &[QuadratureParams]| -> Result<SoeRepresentation> {
        let mut merged: Option<SoeRepresentation> = None;
        for (seg, p) in segments.iter().zip(params) {
            let mut p = *p;
            if !p.t_horizon.is_finite() {
                p.t_horizon = seg.half_width() * opts.t_max;
            }
            let soe = build_segment_soe(seg, &p)?;
            merged = Some(match merged {
                None => soe,
                Some(acc) => acc.merge(&soe)?,
            });
        }
        Ok(merged.expect("effective_segments returns at least one segment"))
    };

    let mut current = params;
    let mut soe = assemble(&current)?;
    if !opts.refine {
        return Ok(BcfBuild {
            segment_count: segments.len(),
            soe,
            refine_rounds: 0,
            measured_error: None,
        });
    }

    let oracle = BcfOracle::for_model(model)?;
    let omega_scale = segments
        .iter()
        .map(|s| s.lo().abs().max(s.hi().abs()))
        .fold(0.0, f64::max);
    let dt = measurement_dt(omega_scale, opts.t_max);
    let reference = oracle.reference_grid(opts.t_max, dt, (opts.eps * 1e-2).min(1e-6))?;
    let mut rounds = 0;
    loop {
        let err = error_in_norm_from_samples(&soe, &reference.values, dt, opts.norm)?;
        if err <= opts.eps {
            let soe = soe.with_achieved(opts.norm, err);
            return Ok(BcfBuild {
                soe,
                refine_rounds: rounds,
                segment_count: segments.len(),
                measured_error: Some(err),
            });
        }
        if rounds >= MAX_REFINE_ROUNDS {
            return Err(Error::RefinementFailed {
                target: opts.eps,
                achieved: err,
                rounds,
                best: Box::new(soe.with_achieved(opts.norm, err)),
            });
        }
        current = current.iter().map(|p| p.refined()).collect();
        soe = assemble(&current)?;
        rounds += 1;
    }
}
