//! Mutual information of the unit-variance AWGN channel for uniform and
//! discrete inputs, by adaptive quadrature of the output entropy.
//!
//! For independent inputs `U_i` uniform on `[-√P_i, √P_i]`, the output
//! `Y = Σ U_i + N` has the closed-form density
//!
//! ```text
//! p(y) = Π_i 1/(2a_i) · Σ_{σ∈{±1}^K} (Π σ_i) · J_{K-1}(y + Σ σ_i a_i)
//! ```
//!
//! where `a_i = √P_i` and `J_m(x) = E[(x - Z)_+^m] / m!` for standard normal
//! `Z`, obeying `J_{-1} = φ`, `J_0 = Φ`, `J_m = (x·J_{m-1} + J_{m-2}) / m`.

use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::half_log2_1p;
use crate::quadrature::integrate;
use crate::regions::epi_constant;

/// Target accuracy of every mutual-information value, in bits.
pub const MI_TOLERANCE_BITS: f64 = 1e-4;

/// Integration range beyond the input support, in noise standard deviations.
pub const TAIL_SIGMAS: f64 = 8.0;

/// Half-widths below this are treated as point masses at zero.
const MIN_HALF_WIDTH: f64 = 1e-4;

const QUAD_TOL_NATS: f64 = 1e-9;
const MAX_PANELS: usize = 50_000;

/// Channel input description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// Independent users, user `i` uniform on `[-√P_i, √P_i]`.
    Uniform { powers: Vec<f64> },
    /// A single discrete input with the given support and pmf.
    Discrete { points: Vec<f64>, pmf: Vec<f64> },
}

impl InputSpec {
    pub fn mutual_information(&self) -> Result<f64> {
        match self {
            InputSpec::Uniform { powers } => sum_uniform_awgn_mi(powers),
            InputSpec::Discrete { points, pmf } => mixture_awgn_mi(points, pmf),
        }
    }
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `J_m(x)` for `m >= 0`.
fn gaussian_ramp(m: usize, x: f64) -> f64 {
    let mut prev = normal_pdf(x);
    let mut cur = normal_cdf(x);
    for k in 1..=m {
        let next = (x * cur + prev) / k as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Output density of `Σ U_i + N`, `U_i` uniform on `[-a_i, a_i]`.
pub fn uniform_sum_density(half_widths: &[f64], y: f64) -> f64 {
    let widths: Vec<f64> = half_widths
        .iter()
        .copied()
        .filter(|&a| a >= MIN_HALF_WIDTH)
        .collect();
    uniform_density_filtered(&widths, y)
}

fn uniform_density_filtered(widths: &[f64], y: f64) -> f64 {
    let k = widths.len();
    if k == 0 {
        return normal_pdf(y);
    }
    // The density is even; evaluating on the left half keeps the Gaussian
    // tail terms accurate.
    let y = -y.abs();
    let scale: f64 = widths.iter().map(|a| 0.5 / a).product();
    let mut total = 0.0;
    for signs in 0..1usize << k {
        let mut shift = 0.0;
        let mut parity = 1.0;
        for (i, &a) in widths.iter().enumerate() {
            if signs >> i & 1 == 1 {
                shift -= a;
                parity = -parity;
            } else {
                shift += a;
            }
        }
        total += parity * gaussian_ramp(k - 1, y + shift);
    }
    (scale * total).max(0.0)
}

/// Output density of `X + N` for discrete `X`.
pub fn mixture_density(points: &[f64], pmf: &[f64], y: f64) -> f64 {
    points
        .iter()
        .zip(pmf)
        .map(|(&x, &p)| p * normal_pdf(y - x))
        .sum()
}

#[inline]
fn neg_p_ln_p(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Upper bound (bits) on `∫ -p log₂ p` over `|y| > spread + t` when
/// `p(y) <= φ(|y| - spread)` there.
fn tail_entropy_bound(t: f64) -> f64 {
    let q = normal_cdf(-t);
    2.0 * (0.5 * (2.0 * PI).log2() * q + (t * normal_pdf(t) + q) / (2.0 * LN_2))
}

fn noise_entropy_bits() -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E).log2()
}

/// `I(ΣU_i; ΣU_i + N)` in bits for `U_i` uniform on `[-√P_i, √P_i]` and
/// `N ~ N(0, 1)`.
pub fn sum_uniform_awgn_mi(powers: &[f64]) -> Result<f64> {
    if let Some(p) = powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidArgument(format!("powers must be >= 0, got {p}")));
    }
    let widths: Vec<f64> = powers
        .iter()
        .map(|p| p.sqrt())
        .filter(|&a| a >= MIN_HALF_WIDTH)
        .collect();
    if widths.is_empty() {
        return Ok(0.0);
    }
    let spread: f64 = widths.iter().sum();
    let end = spread + TAIL_SIGMAS;
    let panels = (end.ceil() as usize).clamp(8, 2000);
    let breaks: Vec<f64> = (0..=panels).map(|j| end * j as f64 / panels as f64).collect();
    let half = integrate(
        |y| neg_p_ln_p(uniform_density_filtered(&widths, y)),
        &breaks,
        QUAD_TOL_NATS,
        MAX_PANELS,
    )?;
    let error_bits = 2.0 * half.error / LN_2 + tail_entropy_bound(TAIL_SIGMAS);
    if error_bits > MI_TOLERANCE_BITS {
        return Err(Error::Quadrature {
            estimate: error_bits,
            tolerance: MI_TOLERANCE_BITS,
        });
    }
    let h_y = 2.0 * half.value / LN_2;
    Ok((h_y - noise_entropy_bits()).max(0.0))
}

/// `I(X; X + N)` in bits for a discrete input.
pub fn mixture_awgn_mi(points: &[f64], pmf: &[f64]) -> Result<f64> {
    if points.is_empty() || points.len() != pmf.len() {
        return Err(Error::InvalidArgument(
            "discrete input needs matching nonempty points and pmf".into(),
        ));
    }
    if points.iter().any(|x| !x.is_finite()) || pmf.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidArgument("invalid discrete input".into()));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("pmf sums to {total}, not 1")));
    }
    let lo = points.iter().cloned().fold(f64::INFINITY, f64::min) - TAIL_SIGMAS;
    let hi = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + TAIL_SIGMAS;
    let panels = ((hi - lo).ceil() as usize).clamp(8, 2000);
    let mut breaks: Vec<f64> = (0..=panels)
        .map(|j| lo + (hi - lo) * j as f64 / panels as f64)
        .collect();
    breaks.extend(points.iter().copied());
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let h = integrate(
        |y| neg_p_ln_p(mixture_density(points, pmf, y)),
        &breaks,
        QUAD_TOL_NATS,
        MAX_PANELS,
    )?;
    // p(y) <= φ(dist(y, support)) outside the support hull.
    let error_bits = h.error / LN_2 + tail_entropy_bound(TAIL_SIGMAS);
    if error_bits > MI_TOLERANCE_BITS {
        return Err(Error::Quadrature {
            estimate: error_bits,
            tolerance: MI_TOLERANCE_BITS,
        });
    }
    Ok((h.value / LN_2 - noise_entropy_bits()).max(0.0))
}

/// The two forms of the uniform-input lower bound at total power `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpiBound {
    /// `½·log₂(1 + 2P/(πe))`.
    pub tight: f64,
    /// `½·log₂(1 + P) - ½·log₂(πe/2)`, never above `tight`.
    pub loose: f64,
}

pub fn epi_lower_bound(total_power: f64) -> Result<EpiBound> {
    if !(total_power >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total power must be >= 0, got {total_power}"
        )));
    }
    let tight = half_log2_1p(2.0 * total_power / (PI * std::f64::consts::E));
    let loose = half_log2_1p(total_power) - epi_constant();
    if loose > tight + 1e-12 {
        return Err(Error::Structural(format!(
            "loose bound {loose} exceeds tight bound {tight} at P = {total_power}"
        )));
    }
    Ok(EpiBound { tight, loose })
}
