//! Sum-of-exponentials representation Δ(t) ≈ Σ_j c_j e^{-i z_j t} with
//! evaluation, affine rescaling, merging and grid error metrics.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Error norm used by builds and metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    Linf,
}

/// Where a representation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Quadrature,
    Esprit,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AchievedError {
    pub norm: Norm,
    pub value: f64,
}

/// One exponential mode: weight `c`, pole `z` (rad/time), contributing
/// `c e^{-i z t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoeTerm {
    pub c: Complex64,
    pub z: Complex64,
}

/// Modes must not grow on t ≥ 0.
pub const IM_TOLERANCE: f64 = 1e-12;

/// Sum of complex exponentials valid on t ∈ [0, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct SoeRepresentation {
    terms: Vec<SoeTerm>,
    horizon: f64,
    pub provenance: Provenance,
    pub achieved_error: Option<AchievedError>,
}

impl SoeRepresentation {
    /// Terms are canonicalized to descending |c| so evaluation accumulates
    /// large contributions first.
    pub fn new(terms: Vec<SoeTerm>, horizon: f64, provenance: Provenance) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "an SOE needs at least one term".into(),
            ));
        }
        for (i, t) in terms.iter().enumerate() {
            if !t.c.is_finite() {
                return Err(Error::NonFiniteWeight { index: i });
            }
            if !t.z.is_finite() || t.z.im > IM_TOLERANCE {
                return Err(Error::InvalidParameter(format!(
                    "pole {i} has Im z = {} > {IM_TOLERANCE} (growing mode)",
                    t.z.im
                )));
            }
            if provenance == Provenance::Quadrature && t.z.im >= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "quadrature pole {i} must decay strictly, got Im z = {}",
                    t.z.im
                )));
            }
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        let mut terms = terms;
        terms.sort_by(|a, b| b.c.norm().total_cmp(&a.c.norm()));
        Ok(Self {
            terms,
            horizon,
            provenance,
            achieved_error: None,
        })
    }

    pub fn terms(&self) -> &[SoeTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // N ≥ 1 is enforced at construction
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_achieved(mut self, norm: Norm, value: f64) -> Self {
        self.achieved_error = Some(AchievedError { norm, value });
        self
    }

    /// Σ c_j e^{-i z_j t}, accumulated in descending-|c| order with
    /// compensated summation.
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eval requires t ≥ 0, got {t}"
            )));
        }
        let mut acc = CompensatedSum::new();
        for term in &self.terms {
            acc.add(term.c * (-Complex64::i() * term.z * t).exp());
        }
        Ok(acc.value())
    }

    /// Evaluate on a nondecreasing grid of times.
    ///
    /// Uniform grids use a per-term phase recurrence (one complex multiply
    /// per step) resynchronized to the exact exponential every
    /// [`RESYNC_STRIDE`] steps, keeping drift below ~1e-12 relative.
    pub fn eval_grid(&self, t_grid: &[f64]) -> Result<Vec<Complex64>> {
        if t_grid.is_empty() {
            return Err(Error::InvalidParameter("empty evaluation grid".into()));
        }
        if t_grid[0] < 0.0 {
            return Err(Error::InvalidParameter("grid must start at t ≥ 0".into()));
        }
        if t_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("grid must be nondecreasing".into()));
        }
        if let Some(dt) = uniform_step(t_grid) {
            Ok(self.eval_uniform(t_grid[0], dt, t_grid.len()))
        } else {
            t_grid.iter().map(|&t| self.eval(t)).collect()
        }
    }

    /// Evaluate on {t0 + k dt : k = 0..n-1}.
    pub fn eval_uniform(&self, t0: f64, dt: f64, n: usize) -> Vec<Complex64> {
        let mut values = vec![Complex64::default(); n];
        // Parallel over time blocks; each block walks every term.
        let terms = &self.terms;
        values
            .par_chunks_mut(GRID_CHUNK)
            .enumerate()
            .for_each(|(chunk_idx, chunk)| {
                let k0 = chunk_idx * GRID_CHUNK;
                let mut comps = vec![Complex64::default(); chunk.len()];
                for term in terms {
                    let step = (-Complex64::i() * term.z * dt).exp();
                    let mut phase = (-Complex64::i() * term.z * (t0 + k0 as f64 * dt)).exp();
                    for (k, (v, comp)) in chunk.iter_mut().zip(comps.iter_mut()).enumerate() {
                        if k % RESYNC_STRIDE == 0 && k > 0 {
                            phase =
                                (-Complex64::i() * term.z * (t0 + (k0 + k) as f64 * dt)).exp();
                        }
                        // Kahan update of *v with carry in *comp
                        let y = term.c * phase - *comp;
                        let t = *v + y;
                        *comp = (t - *v) - y;
                        *v = t;
                        phase *= step;
                    }
                }
            });
        values
    }

    /// Poles map z → s·z + d, weights unchanged, horizon → horizon / s.
    /// Evaluations satisfy Δ'(t) = e^{-i d t} Δ(s t).
    pub fn affine_rescale(&self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| SoeTerm {
                c: t.c,
                z: t.z * scale + Complex64::new(shift, 0.0),
            })
            .collect();
        let mut out = Self::new(terms, self.horizon / scale, self.provenance)?;
        out.achieved_error = self.achieved_error;
        Ok(out)
    }

    /// Concatenate term lists; horizons combine by min. Poles closer than
    /// 1e-14 are consolidated by adding weights.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut terms: Vec<SoeTerm> = self.terms.clone();
        for t in &other.terms {
            if let Some(existing) = terms.iter_mut().find(|e| (e.z - t.z).norm() < 1e-14) {
                existing.c += t.c;
            } else {
                terms.push(*t);
            }
        }
        Self::new(terms, self.horizon.min(other.horizon), self.provenance)
    }
}

/// Steps per exact-phase resynchronization in [`SoeRepresentation::eval_uniform`].
pub const RESYNC_STRIDE: usize = 1024;
const GRID_CHUNK: usize = 16384;

fn uniform_step(t_grid: &[f64]) -> Option<f64> {
    if t_grid.len() < 2 {
        return Some(1.0);
    }
    let dt = t_grid[1] - t_grid[0];
    let scale = t_grid.last().unwrap().abs().max(1.0);
    for (k, w) in t_grid.windows(2).enumerate() {
        let expected = t_grid[0] + (k as f64 + 1.0) * dt - w[1];
        if expected.abs() > 1e-12 * scale {
            return None;
        }
    }
    Some(dt)
}

/// Number of grid points for the Riemann metrics: k = 0..=⌊T/Δt⌋.
pub fn grid_len(t_max: f64, dt: f64) -> usize {
    (t_max / dt + 1e-9).floor() as usize + 1
}

/// Riemann-sum L¹ error Σ_k |ref(kΔt) − soe(kΔt)|·Δt over k = 0..=⌊T/Δt⌋.
pub fn l1_error<F>(soe: &SoeRepresentation, reference: F, t_max: f64, dt: f64) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    check_grid(t_max, dt)?;
    let n = grid_len(t_max, dt);
    let samples: Vec<Complex64> = (0..n).map(|k| reference(k as f64 * dt)).collect();
    l1_error_from_samples(soe, &samples, dt)
}

/// L¹ error against precomputed uniform samples starting at t = 0.
pub fn l1_error_from_samples(
    soe: &SoeRepresentation,
    samples: &[Complex64],
    dt: f64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empty sample set".into()));
    }
    let vals = soe.eval_uniform(0.0, dt, samples.len());
    let total: f64 = vals
        .par_iter()
        .zip(samples.par_iter())
        .map(|(v, r)| (v - r).norm())
        .sum();
    Ok(total * dt)
}

/// Max-norm error over the same grid as [`l1_error`].
pub fn linf_error<F>(soe: &SoeRepresentation, reference: F, t_max: f64, dt: f64) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    check_grid(t_max, dt)?;
    let n = grid_len(t_max, dt);
    let samples: Vec<Complex64> = (0..n).map(|k| reference(k as f64 * dt)).collect();
    linf_error_from_samples(soe, &samples, dt)
}

pub fn linf_error_from_samples(
    soe: &SoeRepresentation,
    samples: &[Complex64],
    dt: f64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empty sample set".into()));
    }
    let vals = soe.eval_uniform(0.0, dt, samples.len());
    Ok(vals
        .par_iter()
        .zip(samples.par_iter())
        .map(|(v, r)| (v - r).norm())
        .reduce(|| 0.0, f64::max))
}

pub fn error_in_norm<F>(
    soe: &SoeRepresentation,
    reference: F,
    t_max: f64,
    dt: f64,
    norm: Norm,
) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    match norm {
        Norm::L1 => l1_error(soe, reference, t_max, dt),
        Norm::Linf => linf_error(soe, reference, t_max, dt),
    }
}

pub fn error_in_norm_from_samples(
    soe: &SoeRepresentation,
    samples: &[Complex64],
    dt: f64,
    norm: Norm,
) -> Result<f64> {
    match norm {
        Norm::L1 => l1_error_from_samples(soe, samples, dt),
        Norm::Linf => linf_error_from_samples(soe, samples, dt),
    }
}

fn check_grid(t_max: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("Δt must be > 0, got {dt}")));
    }
    if t_max < dt {
        return Err(Error::InvalidParameter(format!(
            "T = {t_max} must be at least Δt = {dt}"
        )));
    }
    Ok(())
}

/// Protocol step size for error grids (nondimensional time).
pub const PROTOCOL_DT: f64 = 0.01;

// --- serialization -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermRepr {
    c: [f64; 2],
    z: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct MetaRepr {
    provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    achieved_error: Option<AchievedError>,
}

#[derive(Serialize, Deserialize)]
struct SoeRepr {
    terms: Vec<TermRepr>,
    horizon: f64,
    meta: MetaRepr,
}

impl Serialize for SoeRepresentation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SoeRepr {
            terms: self
                .terms
                .iter()
                .map(|t| TermRepr {
                    c: [t.c.re, t.c.im],
                    z: [t.z.re, t.z.im],
                })
                .collect(),
            horizon: self.horizon,
            meta: MetaRepr {
                provenance: self.provenance,
                achieved_error: self.achieved_error,
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SoeRepresentation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SoeRepr::deserialize(d)?;
        let terms = repr
            .terms
            .iter()
            .map(|t| SoeTerm {
                c: Complex64::new(t.c[0], t.c[1]),
                z: Complex64::new(t.z[0], t.z[1]),
            })
            .collect();
        let mut soe = SoeRepresentation::new(terms, repr.horizon, repr.meta.provenance)
            .map_err(serde::de::Error::custom)?;
        soe.achieved_error = repr.meta.achieved_error;
        Ok(soe)
    }
}

/// CSV rows (t, Re Δ, Im Δ) on the uniform grid k·Δt, k = 0..=⌊T/Δt⌋.
pub fn write_csv<W: Write>(
    soe: &SoeRepresentation,
    mut w: W,
    t_max: f64,
    dt: f64,
) -> Result<()> {
    check_grid(t_max, dt)?;
    let n = grid_len(t_max, dt);
    let vals = soe.eval_uniform(0.0, dt, n);
    writeln!(w, "t,re,im")?;
    for (k, v) in vals.iter().enumerate() {
        writeln!(w, "{},{:.17e},{:.17e}", k as f64 * dt, v.re, v.im)?;
    }
    Ok(())
}
