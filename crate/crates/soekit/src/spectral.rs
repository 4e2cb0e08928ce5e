//! Spectral densities, quantum-statistics weighting, analytic segmentation
//! and frequency truncation.
//!
//! A [`BaseDensity`] is a piecewise-analytic J(ω) ≥ 0. A [`SpectralModel`]
//! attaches statistics (Bose/Fermi), inverse temperature β, chemical
//! potential μ and a branch. [`effective_segments`] turns the model into
//! finite [`AnalyticSegment`]s of the effective density J_eff, each carrying
//! its endpoint singularity orders, ready for contour quadrature or
//! real-axis reference integration.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Complex evaluator of a density (or effective density) on one analytic
/// piece. Returns NaN to signal a guarded failure (e.g. a near-pole hit);
/// consumers turn non-finite values into errors.
pub type ComplexEval = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// One analytic piece of a base density.
#[derive(Clone)]
pub struct DensityPiece {
    pub lo: f64,
    /// `f64::INFINITY` on a tail piece.
    pub hi: f64,
    pub eval: ComplexEval,
    pub alpha_lo: f64,
    /// For a tail piece this is the order produced at the truncation point
    /// (the cutoff χ_W vanishes linearly, so 1.0 for the Ohmic family).
    pub alpha_hi: f64,
    pub log_lo: bool,
    pub log_hi: bool,
}

/// Exponential-tail descriptor: |J(ω)| ≲ C ω^γ e^{-ω/ω_c} for large ω.
#[derive(Debug, Clone, Copy)]
pub struct ExpTail {
    pub omega_c: f64,
    pub algebraic_exponent: f64,
}

/// Piecewise-analytic, non-negative spectral density.
#[derive(Clone)]
pub struct BaseDensity {
    pieces: Vec<DensityPiece>,
    tail: Option<ExpTail>,
    omega_c: f64,
}

impl BaseDensity {
    pub fn new(pieces: Vec<DensityPiece>, tail: Option<ExpTail>, omega_c: f64) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("density needs pieces".into()));
        }
        for w in pieces.windows(2) {
            if w[1].lo < w[0].hi - 1e-12 {
                return Err(Error::InvalidParameter(
                    "piece intervals must be disjoint and nondecreasing".into(),
                ));
            }
        }
        if let Some(tail) = &tail {
            if !pieces.last().unwrap().hi.is_infinite() {
                return Err(Error::InvalidParameter(
                    "tail descriptor requires the last piece to extend to +inf".into(),
                ));
            }
            if tail.omega_c <= 0.0 {
                return Err(Error::InvalidParameter("tail rate must be positive".into()));
            }
        }
        let density = Self {
            pieces,
            tail,
            omega_c,
        };
        density.check_nonnegative()?;
        density.check_tail_bound()?;
        Ok(density)
    }

    fn check_nonnegative(&self) -> Result<()> {
        for piece in &self.pieces {
            let hi = if piece.hi.is_finite() {
                piece.hi
            } else {
                piece.lo + 20.0 * self.omega_c
            };
            for k in 1..64 {
                let w = piece.lo + (hi - piece.lo) * k as f64 / 64.0;
                let v = (piece.eval)(Complex64::new(w, 0.0));
                if !v.is_finite() {
                    return Err(Error::EvaluatorFailure {
                        omega: Complex64::new(w, 0.0),
                    });
                }
                if v.re < -1e-10 * (1.0 + v.norm()) || v.im.abs() > 1e-10 * (1.0 + v.norm()) {
                    return Err(Error::ModelInvariant(format!(
                        "J({w}) = {v} is not non-negative real"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_tail_bound(&self) -> Result<()> {
        let Some(tail) = &self.tail else {
            return Ok(());
        };
        let piece = self.pieces.last().unwrap();
        // C from a moderate reference point, then sampled far out
        let w_ref = piece.lo.max(0.0) + 5.0 * tail.omega_c;
        let j_ref = (piece.eval)(Complex64::new(w_ref, 0.0)).norm();
        let envelope =
            |w: f64| w.powf(tail.algebraic_exponent) * (-w / tail.omega_c).exp();
        let c = 4.0 * j_ref / envelope(w_ref).max(f64::MIN_POSITIVE);
        for k in 1..=8 {
            let w = w_ref * (1.0 + k as f64);
            let j = (piece.eval)(Complex64::new(w, 0.0)).norm();
            if j > c * envelope(w) + 1e-300 {
                return Err(Error::ModelInvariant(format!(
                    "sampled tail J({w}) = {j} exceeds the declared exponential envelope"
                )));
            }
        }
        Ok(())
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    pub fn tail(&self) -> Option<&ExpTail> {
        self.tail.as_ref()
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn support_lo(&self) -> f64 {
        self.pieces.first().unwrap().lo
    }

    pub fn support_hi(&self) -> f64 {
        self.pieces.last().unwrap().hi
    }

    /// J(ω) on the real axis; zero outside the support.
    pub fn eval_real(&self, omega: f64) -> f64 {
        for piece in &self.pieces {
            if omega >= piece.lo && (omega <= piece.hi || piece.hi.is_infinite()) {
                return (piece.eval)(Complex64::new(omega, 0.0)).re;
            }
        }
        0.0
    }
}

/// Model density families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// J(ω) = ω^γ ω_c^{-(γ+1)} e^{-ω/ω_c} on [0, ∞), γ > 0.
    Ohmic { gamma: f64, omega_c: f64 },
    /// m √(ω_D² − ω²) on |ω| < ω_D (harmonic-chain spectrum).
    Semicircle { omega_d: f64, m: f64 },
    /// (ω−a)^{-1/2} (b−ω)^{-1/2} / π on (a, b); ∫ J = 1.
    InverseSqrtEdges { a: f64, b: f64 },
    /// log((b−a)/|ω−(a+b)/2|) on [a, b]; logarithmic peak at the midpoint.
    LogModel { a: f64, b: f64 },
    /// Indicator of [a, b].
    Step { a: f64, b: f64 },
    /// 2 γ_ν sin(πν/2) |ω|^{ν-1} on the unit-bandwidth window [-1, 1].
    Fractional { gamma_nu: f64, nu: f64 },
}

impl Preset {
    pub fn from_name_params(name: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| -> Result<()> {
            if params.len() != n {
                Err(Error::InvalidParameter(format!(
                    "preset `{name}` takes {n} parameters, got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "ohmic" => {
                need(2)?;
                Ok(Preset::Ohmic {
                    gamma: params[0],
                    omega_c: params[1],
                })
            }
            "semicircle" => {
                need(2)?;
                Ok(Preset::Semicircle {
                    omega_d: params[0],
                    m: params[1],
                })
            }
            "inverse_sqrt_edges" => {
                need(2)?;
                Ok(Preset::InverseSqrtEdges {
                    a: params[0],
                    b: params[1],
                })
            }
            "log_model" => {
                need(2)?;
                Ok(Preset::LogModel {
                    a: params[0],
                    b: params[1],
                })
            }
            "step" => {
                need(2)?;
                Ok(Preset::Step {
                    a: params[0],
                    b: params[1],
                })
            }
            "fractional" => {
                need(2)?;
                Ok(Preset::Fractional {
                    gamma_nu: params[0],
                    nu: params[1],
                })
            }
            other => Err(Error::UnknownPreset(other.into())),
        }
    }
}

/// Build a model density. Endpoint orders follow the family: Ohmic has
/// order γ at 0; the semicircle order 1/2 at both edges; inverse-sqrt
/// −1/2; log/step 0 (flagged); fractional ν−1 at 0.
pub fn make_preset(preset: Preset) -> Result<BaseDensity> {
    match preset {
        Preset::Ohmic { gamma, omega_c } => {
            if gamma <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "ohmic exponent must be positive, got {gamma}"
                )));
            }
            if omega_c <= 0.0 {
                return Err(Error::InvalidParameter("ω_c must be positive".into()));
            }
            let norm = omega_c.powf(-(gamma + 1.0));
            let eval: ComplexEval = Arc::new(move |z: Complex64| {
                z.powc(Complex64::new(gamma, 0.0)) * norm * (-z / omega_c).exp()
            });
            BaseDensity::new(
                vec![DensityPiece {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    eval,
                    alpha_lo: gamma,
                    alpha_hi: 1.0,
                    log_lo: false,
                    log_hi: false,
                }],
                Some(ExpTail {
                    omega_c,
                    algebraic_exponent: gamma,
                }),
                omega_c,
            )
        }
        Preset::Semicircle { omega_d, m } => {
            if omega_d <= 0.0 || m <= 0.0 {
                return Err(Error::InvalidParameter(
                    "semicircle needs ω_D > 0 and m > 0".into(),
                ));
            }
            // m √(ω_D−z) √(ω_D+z): analytic off (−∞,−ω_D] ∪ [ω_D,∞),
            // matches m√(ω_D²−ω²) on the segment.
            let eval: ComplexEval =
                Arc::new(move |z: Complex64| m * (omega_d - z).sqrt() * (omega_d + z).sqrt());
            BaseDensity::new(
                vec![DensityPiece {
                    lo: -omega_d,
                    hi: omega_d,
                    eval,
                    alpha_lo: 0.5,
                    alpha_hi: 0.5,
                    log_lo: false,
                    log_hi: false,
                }],
                None,
                omega_d,
            )
        }
        Preset::InverseSqrtEdges { a, b } => {
            check_interval(a, b)?;
            let eval: ComplexEval =
                Arc::new(move |z: Complex64| 1.0 / (PI * (z - a).sqrt() * (b - z).sqrt()));
            BaseDensity::new(
                vec![DensityPiece {
                    lo: a,
                    hi: b,
                    eval,
                    alpha_lo: -0.5,
                    alpha_hi: -0.5,
                    log_lo: false,
                    log_hi: false,
                }],
                None,
                (b - a) / 2.0,
            )
        }
        Preset::LogModel { a, b } => {
            check_interval(a, b)?;
            let mid = 0.5 * (a + b);
            let width = b - a;
            // log(width/|ω−mid|) ≥ log 2 on [a,b]; the midpoint is an
            // interior analyticity breakpoint, so two pieces.
            let left: ComplexEval = Arc::new(move |z: Complex64| {
                Complex64::new(width.ln(), 0.0) - (Complex64::new(mid, 0.0) - z).ln()
            });
            let right: ComplexEval = Arc::new(move |z: Complex64| {
                Complex64::new(width.ln(), 0.0) - (z - Complex64::new(mid, 0.0)).ln()
            });
            BaseDensity::new(
                vec![
                    DensityPiece {
                        lo: a,
                        hi: mid,
                        eval: left,
                        alpha_lo: 0.0,
                        alpha_hi: 0.0,
                        log_lo: true,
                        log_hi: true,
                    },
                    DensityPiece {
                        lo: mid,
                        hi: b,
                        eval: right,
                        alpha_lo: 0.0,
                        alpha_hi: 0.0,
                        log_lo: true,
                        log_hi: true,
                    },
                ],
                None,
                (b - a) / 2.0,
            )
        }
        Preset::Step { a, b } => {
            check_interval(a, b)?;
            let eval: ComplexEval = Arc::new(|_z: Complex64| Complex64::new(1.0, 0.0));
            BaseDensity::new(
                vec![DensityPiece {
                    lo: a,
                    hi: b,
                    eval,
                    alpha_lo: 0.0,
                    alpha_hi: 0.0,
                    log_lo: true,
                    log_hi: true,
                }],
                None,
                (b - a) / 2.0,
            )
        }
        Preset::Fractional { gamma_nu, nu } => {
            if !(0.0 < nu && nu < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "fractional exponent ν must lie in (0,1), got {nu}"
                )));
            }
            if gamma_nu <= 0.0 {
                return Err(Error::InvalidParameter("γ_ν must be positive".into()));
            }
            let amp = 2.0 * gamma_nu * (PI * nu / 2.0).sin();
            let expo = Complex64::new(nu - 1.0, 0.0);
            let neg: ComplexEval = Arc::new(move |z: Complex64| amp * (-z).powc(expo));
            let pos: ComplexEval = Arc::new(move |z: Complex64| amp * z.powc(expo));
            BaseDensity::new(
                vec![
                    DensityPiece {
                        lo: -1.0,
                        hi: 0.0,
                        eval: neg,
                        alpha_lo: 0.0,
                        alpha_hi: nu - 1.0,
                        log_lo: true,
                        log_hi: false,
                    },
                    DensityPiece {
                        lo: 0.0,
                        hi: 1.0,
                        eval: pos,
                        alpha_lo: nu - 1.0,
                        alpha_hi: 0.0,
                        log_lo: false,
                        log_hi: true,
                    },
                ],
                None,
                1.0,
            )
        }
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a >= b {
        Err(Error::InvalidParameter(format!(
            "interval requires a < b, got [{a}, {b}]"
        )))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Boson,
    Fermion,
}

/// Inverse temperature; β = ∞ is represented exactly so statistics factors
/// become their pointwise limits instead of near-pole evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn is_finite(&self) -> bool {
        matches!(self, Beta::Finite(_))
    }
}

impl Serialize for Beta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(v) => s.serialize_f64(*v),
            Beta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Beta::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Beta::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "beta must be a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Lesser,
    Greater,
    Total,
}

/// Serializable description of a spectral model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub density: DensitySpec,
    pub statistics: Statistics,
    pub beta: Beta,
    #[serde(default)]
    pub mu: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensitySpec {
    pub preset: String,
    pub params: Vec<f64>,
}

/// A base density with statistics weighting attached.
#[derive(Clone)]
pub struct SpectralModel {
    pub base: BaseDensity,
    pub statistics: Statistics,
    pub beta: Beta,
    pub mu: f64,
    pub branch: Branch,
}

impl SpectralModel {
    pub fn new(
        base: BaseDensity,
        statistics: Statistics,
        beta: Beta,
        mu: f64,
        branch: Branch,
    ) -> Result<Self> {
        if let Beta::Finite(b) = beta {
            if b <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "β must be positive, got {b}"
                )));
            }
        }
        match statistics {
            Statistics::Boson => {
                if branch != Branch::Total {
                    return Err(Error::ModelInvariant(
                        "bosonic baths use the total branch".into(),
                    ));
                }
                if mu != 0.0 {
                    return Err(Error::ModelInvariant("bosonic baths take μ = 0".into()));
                }
                if base.support_lo() < -1e-12 {
                    return Err(Error::ModelInvariant(
                        "bosonic support must lie in [0, ∞)".into(),
                    ));
                }
            }
            Statistics::Fermion => {
                if branch == Branch::Total {
                    return Err(Error::ModelInvariant(
                        "the total branch is bosonic; fermions use lesser/greater".into(),
                    ));
                }
            }
        }
        Ok(Self {
            base,
            statistics,
            beta,
            mu,
            branch,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let preset = Preset::from_name_params(&spec.density.preset, &spec.density.params)?;
        let base = make_preset(preset)?;
        Self::new(base, spec.statistics, spec.beta, spec.mu, spec.branch)
    }

    /// Effective density on the real axis (β = ∞ limits applied exactly).
    pub fn effective_real(&self, omega: f64) -> f64 {
        let j = |w: f64| self.base.eval_real(w);
        match self.statistics {
            Statistics::Fermion => {
                let occ = match self.beta {
                    Beta::Infinite => {
                        if omega < self.mu {
                            1.0
                        } else if omega > self.mu {
                            0.0
                        } else {
                            0.5
                        }
                    }
                    Beta::Finite(beta) => 1.0 / ((beta * (omega - self.mu)).exp() + 1.0),
                };
                match self.branch {
                    Branch::Lesser => j(omega) * occ,
                    Branch::Greater => j(omega) * (1.0 - occ),
                    Branch::Total => unreachable!(),
                }
            }
            Statistics::Boson => match self.beta {
                Beta::Infinite => {
                    if omega > 0.0 {
                        j(omega)
                    } else {
                        0.0
                    }
                }
                Beta::Finite(beta) => {
                    if omega == 0.0 {
                        0.0
                    } else {
                        omega.signum() * j(omega.abs()) / (1.0 - (-beta * omega).exp())
                    }
                }
            },
        }
    }
}

/// One analytic segment of an effective spectral density, with declared
/// endpoint singularity orders (`log_*` flags mark the order-0 log/jump
/// class) and the largest contour angle the evaluator is certified for.
#[derive(Clone)]
pub struct AnalyticSegment {
    lo: f64,
    hi: f64,
    eval: ComplexEval,
    alpha_lo: f64,
    alpha_hi: f64,
    pub log_lo: bool,
    pub log_hi: bool,
    pub theta0_max: f64,
}

impl AnalyticSegment {
    pub fn new(
        lo: f64,
        hi: f64,
        eval: ComplexEval,
        alpha_lo: f64,
        alpha_hi: f64,
        log_lo: bool,
        log_hi: bool,
        theta0_max: f64,
    ) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "segment interval [{lo}, {hi}] must be finite and nonempty"
            )));
        }
        if alpha_lo <= -1.0 || alpha_hi <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "endpoint orders must exceed -1, got ({alpha_lo}, {alpha_hi})"
            )));
        }
        if !(theta0_max > 0.0 && theta0_max < PI / 4.0) {
            return Err(Error::InvalidParameter(
                "θ₀ must lie in (0, π/4)".into(),
            ));
        }
        let segment = Self {
            lo,
            hi,
            eval,
            alpha_lo,
            alpha_hi,
            log_lo,
            log_hi,
            theta0_max,
        };
        segment.probe()?;
        Ok(segment)
    }

    /// Finiteness probe on a grid inside the semi-ellipse Ω(θ₀_max),
    /// endpoints excluded.
    fn probe(&self) -> Result<()> {
        let y_max = PI / 4.0 - self.theta0_max;
        for &x in &[-3.0, -1.5, -0.5, 0.0, 0.5, 1.5, 3.0] {
            for k in 1..=4 {
                let y = y_max * k as f64 / 4.0;
                let omega = self.from_unit(Complex64::new(x, -y).tanh());
                let v = (self.eval)(omega);
                if !v.is_finite() {
                    return Err(Error::EvaluatorFailure { omega });
                }
            }
        }
        Ok(())
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn alpha_lo(&self) -> f64 {
        self.alpha_lo
    }

    pub fn alpha_hi(&self) -> f64 {
        self.alpha_hi
    }

    /// Overall singularity order min(α_lo, α_hi).
    pub fn alpha(&self) -> f64 {
        self.alpha_lo.min(self.alpha_hi)
    }

    pub fn has_log_order(&self) -> bool {
        (self.log_lo && self.alpha_lo <= self.alpha_hi)
            || (self.log_hi && self.alpha_hi <= self.alpha_lo)
    }

    /// Map the unit interval [-1, 1] onto [lo, hi].
    pub fn from_unit(&self, w: Complex64) -> Complex64 {
        w * self.half_width() + self.midpoint()
    }

    pub fn eval_complex(&self, omega: Complex64) -> Complex64 {
        (self.eval)(omega)
    }

    pub fn eval_real(&self, omega: f64) -> Complex64 {
        (self.eval)(Complex64::new(omega, 0.0))
    }
}

/// Guaranteed lower bound (π/β)·sin(2θ₀) on the distance from the contour
/// region Ω(θ₀) to the nearest Matsubara pole. The zero-temperature limit
/// is reported as 0 (fermions then use the sharp split at μ instead).
pub fn matsubara_margin(beta: Beta, _mu: f64, theta0: f64) -> f64 {
    match beta {
        Beta::Infinite => 0.0,
        Beta::Finite(b) => PI / b * (2.0 * theta0).sin(),
    }
}

/// Distance from βz to the nearest pole of the Fermi factor (poles at
/// i·π(2n+1)) or the Bose factor (poles at i·2πn), divided by β.
fn pole_distance(z: Complex64, beta: f64, fermi: bool, exclude_origin: bool) -> f64 {
    let w = z * beta;
    let two_pi = 2.0 * PI;
    let target = if fermi { PI } else { 0.0 };
    // fold Im w into [-π, π) around the nearest pole rung
    let mut im = (w.im - target) % two_pi;
    if im > PI {
        im -= two_pi;
    }
    if im < -PI {
        im += two_pi;
    }
    if !fermi && exclude_origin {
        // the n = 0 pole sits at a segment endpoint and is accounted for
        // by the declared order; measure against the n = ±1 rungs only
        let d0 = (w.im.abs() - two_pi).abs().hypot(w.re);
        return d0 / beta;
    }
    im.hypot(w.re) / beta
}

fn fermi_factor(z: Complex64, beta: f64, mu: f64, guard: f64) -> Complex64 {
    if guard > 0.0 && pole_distance(z - mu, beta, true, false) < guard {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    let w = beta * (z - mu);
    // stable in both half-planes
    if w.re > 0.0 {
        let e = (-w).exp();
        e / (1.0 + e)
    } else {
        1.0 / (w.exp() + 1.0)
    }
}

fn bose_factor(z: Complex64, beta: f64, guard: f64) -> Complex64 {
    if guard > 0.0 && pole_distance(z, beta, false, true) < guard {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    1.0 / (1.0 - (-beta * z).exp())
}

/// Split the model into finite analytic segments of J_eff.
///
/// Pipeline: statistics weighting, a split at μ (fermions) or 0 (bosons,
/// which adds the mirrored ω < 0 segment at finite β), splits at every
/// interior breakpoint of the base density, and replacement of an
/// exponential tail by [·, W] under the cutoff
/// χ_W(ω) = (1 − e^{−(W−ω)/ω_c})/(1 − e^{−W/ω_c}), with W sized from the
/// e^{−W/2ω_c} tail-bound rate so the truncation budget ε_tail is met.
pub fn effective_segments(
    model: &SpectralModel,
    theta0: f64,
    eps_tail: f64,
) -> Result<Vec<AnalyticSegment>> {
    if !(theta0 > 0.0 && theta0 < PI / 4.0) {
        return Err(Error::InvalidParameter("θ₀ must lie in (0, π/4)".into()));
    }
    if !(eps_tail > 0.0) {
        return Err(Error::InvalidParameter("ε_tail must be positive".into()));
    }

    // pole guard distance: a small fraction of the guaranteed margin
    let guard = match model.beta {
        Beta::Finite(b) => 1e-3 * matsubara_margin(Beta::Finite(b), model.mu, theta0),
        Beta::Infinite => 0.0,
    };

    let pieces = truncate_tail(model, eps_tail)?;

    let mut segments = Vec::new();
    match model.statistics {
        Statistics::Fermion => {
            let mu = model.mu;
            for piece in &pieces {
                for part in split_at(piece, mu) {
                    let below = part.hi <= mu + 1e-15;
                    let keep = match (model.branch, model.beta) {
                        // at β = ∞ the occupation is the exact indicator
                        (Branch::Lesser, Beta::Infinite) => below,
                        (Branch::Greater, Beta::Infinite) => !below,
                        _ => true,
                    };
                    if !keep {
                        continue;
                    }
                    let eval: ComplexEval = match model.beta {
                        Beta::Infinite => part.eval.clone(),
                        Beta::Finite(beta) => {
                            let base = part.eval.clone();
                            let lesser = model.branch == Branch::Lesser;
                            Arc::new(move |z: Complex64| {
                                let f = fermi_factor(z, beta, mu, guard);
                                // 1 − f_FD(ω−μ) = f_FD(μ−ω)
                                let occ = if lesser { f } else { 1.0 - f };
                                base(z) * occ
                            })
                        }
                    };
                    segments.push(AnalyticSegment::new(
                        part.lo, part.hi, eval, part.alpha_lo, part.alpha_hi, part.log_lo,
                        part.log_hi, theta0,
                    )?);
                }
            }
        }
        Statistics::Boson => {
            for piece in &pieces {
                match model.beta {
                    Beta::Infinite => {
                        segments.push(AnalyticSegment::new(
                            piece.lo,
                            piece.hi,
                            piece.eval.clone(),
                            piece.alpha_lo,
                            piece.alpha_hi,
                            piece.log_lo,
                            piece.log_hi,
                            theta0,
                        )?);
                    }
                    Beta::Finite(beta) => {
                        let touches_zero = piece.lo.abs() < 1e-12;
                        // order drops by one where the Bose factor diverges
                        let alpha_lo = if touches_zero {
                            let a = piece.alpha_lo - 1.0;
                            if a <= -1.0 {
                                return Err(Error::ModelInvariant(format!(
                                    "Bose factor lowers the ω→0 order to {a} ≤ -1; J must vanish faster at 0"
                                )));
                            }
                            a
                        } else {
                            piece.alpha_lo
                        };
                        let base = piece.eval.clone();
                        let pos: ComplexEval = Arc::new(move |z: Complex64| {
                            base(z) * bose_factor(z, beta, guard)
                        });
                        segments.push(AnalyticSegment::new(
                            piece.lo, piece.hi, pos, alpha_lo, piece.alpha_hi, piece.log_lo,
                            piece.log_hi, theta0,
                        )?);
                        // mirror segment: −J(−ω)/(1 − e^{−βω}) on [−hi, −lo],
                        // the per-segment analytic continuation (no complex
                        // sign function is evaluated)
                        let base = piece.eval.clone();
                        let neg: ComplexEval = Arc::new(move |z: Complex64| {
                            -base(-z) * bose_factor(z, beta, guard)
                        });
                        segments.push(AnalyticSegment::new(
                            -piece.hi,
                            -piece.lo,
                            neg,
                            piece.alpha_hi,
                            alpha_lo,
                            piece.log_hi,
                            piece.log_lo,
                            theta0,
                        )?);
                    }
                }
            }
        }
    }

    segments.retain(|s| s.hi - s.lo > 1e-14);
    if segments.is_empty() {
        return Err(Error::ModelInvariant(
            "effective support is empty for this branch".into(),
        ));
    }
    segments.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    Ok(segments)
}

/// Replace an infinite tail piece by [lo, W]·χ_W. W is chosen from the
/// tail-bound rate e^{−W/2ω_c} with the constant estimated as 10× the
/// integrand at ω = 10 ω_c, clamped to W ≥ 10 ω_c; the caller downstream
/// verifies the budget through the oracle.
fn truncate_tail(model: &SpectralModel, eps_tail: f64) -> Result<Vec<DensityPiece>> {
    let mut pieces: Vec<DensityPiece> = Vec::with_capacity(model.base.pieces().len());
    for piece in model.base.pieces() {
        if piece.hi.is_finite() {
            pieces.push(piece.clone());
            continue;
        }
        let tail = model.base.tail().ok_or_else(|| {
            Error::ModelInvariant("infinite piece without a tail descriptor".into())
        })?;
        let omega_c = tail.omega_c;
        let w0 = 10.0 * omega_c;
        let magnitude = model.effective_real(w0).abs();
        let c_hat = 10.0 * magnitude.max(f64::MIN_POSITIVE);
        let w_cut = (2.0 * omega_c * (10.0 * c_hat / eps_tail).ln()).max(w0);
        let base = piece.eval.clone();
        let eval: ComplexEval = Arc::new(move |z: Complex64| {
            let chi = (1.0 - ((z - w_cut) / omega_c).exp()) / (1.0 - (-w_cut / omega_c).exp());
            base(z) * chi
        });
        pieces.push(DensityPiece {
            lo: piece.lo,
            hi: w_cut,
            eval,
            alpha_lo: piece.alpha_lo,
            alpha_hi: piece.alpha_hi, // χ_W vanishes linearly at W
            log_lo: piece.log_lo,
            log_hi: false,
        });
    }
    Ok(pieces)
}

fn split_at(piece: &DensityPiece, at: f64) -> Vec<DensityPiece> {
    if at <= piece.lo + 1e-15 || at >= piece.hi - 1e-15 {
        return vec![piece.clone()];
    }
    let mut left = piece.clone();
    left.hi = at;
    // the cut point is regular for the base density
    left.alpha_hi = 0.0;
    left.log_hi = true;
    let mut right = piece.clone();
    right.lo = at;
    right.alpha_lo = 0.0;
    right.log_lo = true;
    vec![left, right]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ohmic11() -> BaseDensity {
        make_preset(Preset::Ohmic {
            gamma: 1.0,
            omega_c: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn preset_point_values() {
        let j = ohmic11();
        let v = j.eval_real(1.0);
        assert!((v - 0.367879441171442322).abs() < 1e-15, "got {v}");

        let semi = make_preset(Preset::Semicircle {
            omega_d: 2.0,
            m: 1.0,
        })
        .unwrap();
        assert!(semi.eval_real(2.0).abs() < 1e-12);
        assert!((semi.eval_real(0.0) - 2.0).abs() < 1e-14);

        let step = make_preset(Preset::Step { a: -1.0, b: 1.0 }).unwrap();
        assert!((step.eval_real(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn preset_rejects_bad_parameters() {
        assert!(make_preset(Preset::Ohmic {
            gamma: 0.0,
            omega_c: 1.0
        })
        .is_err());
        assert!(make_preset(Preset::Fractional {
            gamma_nu: 1.0,
            nu: 1.2
        })
        .is_err());
        assert!(make_preset(Preset::Step { a: 1.0, b: 1.0 }).is_err());
        assert!(Preset::from_name_params("no_such_family", &[1.0]).is_err());
    }

    #[test]
    fn fermion_step_lesser_at_zero_is_half() {
        let base = make_preset(Preset::Step { a: -1.0, b: 1.0 }).unwrap();
        let model = SpectralModel::new(
            base,
            Statistics::Fermion,
            Beta::Finite(2.0),
            0.0,
            Branch::Lesser,
        )
        .unwrap();
        let segments = effective_segments(&model, PI / 12.0, 1e-8).unwrap();
        // split at μ = 0 gives [-1,0] and [0,1]
        assert_eq!(segments.len(), 2);
        let upper = segments.iter().find(|s| s.lo() >= -1e-12).unwrap();
        let v = upper.eval_real(0.0);
        assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-14, "got {v}");
    }

    #[test]
    fn bose_total_weight_at_one() {
        let model = SpectralModel::new(
            ohmic11(),
            Statistics::Boson,
            Beta::Finite(1.0),
            0.0,
            Branch::Total,
        )
        .unwrap();
        let segments = effective_segments(&model, PI / 12.0, 1e-8).unwrap();
        let pos = segments.iter().find(|s| s.lo() >= -1e-12).unwrap();
        let v = pos.eval_real(1.0);
        assert!(
            (v - Complex64::new(0.581976706869326424, 0.0)).norm() < 1e-12,
            "got {v}"
        );
        // mirror side present and matches the direct weighting
        let negv = model.effective_real(-1.0);
        let neg = segments.iter().find(|s| s.hi() <= 1e-12).unwrap();
        assert!((neg.eval_real(-1.0).re - negv).abs() < 1e-12);
    }

    #[test]
    fn bose_zero_temperature_single_segment() {
        let model = SpectralModel::new(
            ohmic11(),
            Statistics::Boson,
            Beta::Infinite,
            0.0,
            Branch::Total,
        )
        .unwrap();
        let segments = effective_segments(&model, PI / 12.0, 1e-6).unwrap();
        assert_eq!(segments.len(), 1);
        let seg = &segments[0];
        assert!(seg.lo().abs() < 1e-14);
        // evaluator equals J itself away from the cutoff
        let diff = (seg.eval_real(1.0).re - model.base.eval_real(1.0)).abs();
        assert!(diff < 1e-9, "diff {diff}");
        assert!((seg.alpha() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matsubara_margin_values() {
        let m = matsubara_margin(Beta::Finite(PI), 0.0, PI / 4.0);
        assert!((m - 1.0).abs() < 1e-15);
        let m = matsubara_margin(Beta::Finite(1.0), 0.0, PI / 12.0);
        assert!((m - 1.570796326794896619).abs() < 1e-14);
        assert_eq!(matsubara_margin(Beta::Infinite, 0.0, PI / 12.0), 0.0);
    }

    #[test]
    fn boson_rejects_two_sided_support_and_wrong_branch() {
        let step = make_preset(Preset::Step { a: -1.0, b: 1.0 }).unwrap();
        assert!(SpectralModel::new(
            step,
            Statistics::Boson,
            Beta::Finite(1.0),
            0.0,
            Branch::Total
        )
        .is_err());
        assert!(SpectralModel::new(
            ohmic11(),
            Statistics::Boson,
            Beta::Finite(1.0),
            0.0,
            Branch::Lesser
        )
        .is_err());
        let step = make_preset(Preset::Step { a: -1.0, b: 1.0 }).unwrap();
        assert!(SpectralModel::new(
            step,
            Statistics::Fermion,
            Beta::Finite(1.0),
            0.0,
            Branch::Total
        )
        .is_err());
    }

    #[test]
    fn model_spec_json_round_trip() {
        let text = r#"{
            "density": {"preset": "ohmic", "params": [1.0, 1.0]},
            "statistics": "boson",
            "beta": "inf",
            "mu": 0.0,
            "branch": "total"
        }"#;
        let spec: ModelSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.beta, Beta::Infinite);
        let model = SpectralModel::from_spec(&spec).unwrap();
        assert_eq!(model.statistics, Statistics::Boson);
        let back = serde_json::to_string(&spec).unwrap();
        let respec: ModelSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(respec.branch, Branch::Total);

        let finite = r#"{
            "density": {"preset": "step", "params": [-1.0, 1.0]},
            "statistics": "fermion",
            "beta": 10.0,
            "mu": 0.0,
            "branch": "lesser"
        }"#;
        let spec: ModelSpec = serde_json::from_str(finite).unwrap();
        assert_eq!(spec.beta, Beta::Finite(10.0));
        SpectralModel::from_spec(&spec).unwrap();
    }

    #[test]
    fn endpoint_order_slope_matches_declared() {
        // log–log slope of |J_eff| toward the endpoint within ±0.1
        let cases: Vec<(BaseDensity, f64, f64)> = vec![
            (ohmic11(), 0.0, 1.0),
            (
                make_preset(Preset::Semicircle {
                    omega_d: 2.0,
                    m: 1.0,
                })
                .unwrap(),
                2.0,
                0.5,
            ),
            (
                make_preset(Preset::InverseSqrtEdges { a: -1.0, b: 1.0 }).unwrap(),
                1.0,
                -0.5,
            ),
            (
                make_preset(Preset::Fractional {
                    gamma_nu: 1.0,
                    nu: 0.5,
                })
                .unwrap(),
                0.0,
                -0.5,
            ),
            (
                make_preset(Preset::Step { a: -1.0, b: 1.0 }).unwrap(),
                1.0,
                0.0,
            ),
            (
                make_preset(Preset::LogModel { a: 0.0, b: 2.0 }).unwrap(),
                1.0,
                0.0,
            ),
        ];
        for (density, endpoint, alpha) in cases {
            let into = if endpoint > 0.5 { -1.0 } else { 1.0 };
            let d1 = 1e-6;
            let d2 = 1e-7;
            let j1 = density.eval_real(endpoint + into * d1).abs();
            let j2 = density.eval_real(endpoint + into * d2).abs();
            let slope = (j1.ln() - j2.ln()) / (d1.ln() - d2.ln());
            assert!(
                (slope - alpha).abs() < 0.1,
                "declared α {alpha}, measured slope {slope}"
            );
        }
    }

    #[test]
    fn fermi_factor_bounded_uniformly_in_beta() {
        // probe |f_FD| over a grid inside Ω(θ₀); the sup must not grow with β
        let theta0 = PI / 12.0;
        let bound = 1.0 + 1.0 / (PI * (2.0 * theta0).sin());
        let mut sups = Vec::new();
        for beta in [1.0, 10.0, 100.0, 1000.0] {
            let mut sup: f64 = 0.0;
            for i in -20..=20 {
                let x = i as f64 * 0.3;
                for k in 1..=6 {
                    let y = (PI / 4.0 - theta0) * k as f64 / 6.0;
                    // Ω for the segment [0, 1]
                    let w = Complex64::new(x, -y).tanh() * 0.5 + 0.5;
                    let f = fermi_factor(w, beta, 0.0, 0.0);
                    sup = sup.max(f.norm());
                }
            }
            assert!(
                sup <= 2.0 * bound.max(1.0),
                "β = {beta}: sup {sup} exceeds C·max(1, 1/(π sin 2θ₀)) = {bound}"
            );
            sups.push(sup);
        }
        let first = sups[0];
        for (i, s) in sups.iter().enumerate().skip(1) {
            assert!(
                *s <= first * 1.05 + 1e-12,
                "sup grew with β: {sups:?} at index {i}"
            );
        }
    }

    #[test]
    fn bose_temperature_part_is_bounded_by_j_over_beta_omega() {
        let beta = 3.0;
        let model = SpectralModel::new(
            ohmic11(),
            Statistics::Boson,
            Beta::Finite(beta),
            0.0,
            Branch::Total,
        )
        .unwrap();
        for k in 1..40 {
            let w = 0.1 * k as f64;
            let j = model.base.eval_real(w);
            let diff = (model.effective_real(w) - j).abs();
            assert!(
                diff <= j / (beta * w) + 1e-14,
                "at ω = {w}: diff {diff} vs bound {}",
                j / (beta * w)
            );
        }
    }

    #[test]
    fn segment_union_reproduces_weighted_density() {
        let base = make_preset(Preset::Step { a: -1.0, b: 1.0 }).unwrap();
        let model = SpectralModel::new(
            base,
            Statistics::Fermion,
            Beta::Finite(7.0),
            0.25,
            Branch::Greater,
        )
        .unwrap();
        let segments = effective_segments(&model, PI / 12.0, 1e-8).unwrap();
        for &w in &[-0.9, -0.4, 0.1, 0.2499, 0.26, 0.7, 0.99] {
            let direct = model.effective_real(w);
            let summed: f64 = segments
                .iter()
                .filter(|s| w >= s.lo() && w <= s.hi())
                .map(|s| s.eval_real(w).re)
                .sum();
            assert!(
                (summed - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                "ω = {w}: {summed} vs {direct}"
            );
        }
    }

    #[test]
    fn segment_rejects_order_at_minus_one() {
        // step density against a finite-β Bose factor: order 0 − 1 = −1
        let base = make_preset(Preset::Step { a: 0.0, b: 1.0 }).unwrap();
        let model = SpectralModel::new(
            base,
            Statistics::Boson,
            Beta::Finite(1.0),
            0.0,
            Branch::Total,
        )
        .unwrap();
        assert!(effective_segments(&model, PI / 12.0, 1e-8).is_err());
    }

    #[test]
    fn truncation_point_grows_with_budget() {
        let model = SpectralModel::new(
            ohmic11(),
            Statistics::Boson,
            Beta::Infinite,
            0.0,
            Branch::Total,
        )
        .unwrap();
        let coarse = effective_segments(&model, PI / 12.0, 1e-3).unwrap();
        let fine = effective_segments(&model, PI / 12.0, 1e-9).unwrap();
        assert!(fine[0].hi() > coarse[0].hi());
        assert!(coarse[0].hi() >= 10.0);
    }

    #[test]
    fn pole_guard_distance() {
        // fermionic pole rung at i·π/β
        let d = pole_distance(Complex64::new(0.0, -PI / 2.0), 2.0, true, false);
        assert!(d < 1e-12, "on-pole distance should vanish, got {d}");
        let d = pole_distance(Complex64::new(0.3, 0.0), 2.0, true, false);
        assert!((d - (0.6_f64).hypot(PI) / 2.0).abs() < 1e-12);
        // bosonic guard excludes the origin pole
        let d = pole_distance(Complex64::new(0.0, -1e-9), 5.0, false, true);
        assert!(d > 1.0, "origin must be excluded, got {d}");
    }
}
