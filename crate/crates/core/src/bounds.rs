//! Closed-form estimates of the scale-of-spaces construction: existence
//! horizons, the optimal scale parameter, operator-norm and Picard
//! majorants, the scale ladder, and envelope diagnostics against measured
//! hierarchy norms.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hierarchy::{CorrelationVector, NormSample};
use crate::kernels::KernelModel;

/// Relative slack allowed by [`envelope_check`] for truncation effects.
pub const ENVELOPE_SLACK: f64 = 0.05;
/// Tolerance on `‖k₀‖_ϑ ≤ 1` when locating `ϑ₀`.
pub const THETA0_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonParams {
    pub theta0: f64,
    pub theta: f64,
    pub omega: f64,
    pub mean_b: f64,
    pub sup_b: f64,
}

impl HorizonParams {
    pub fn new(theta0: f64, theta: f64, omega: f64, mean_b: f64, sup_b: f64) -> Result<Self> {
        if !(theta0.is_finite() && theta.is_finite() && theta > theta0) {
            return Err(Error::param(format!(
                "need finite ϑ > ϑ₀, got ϑ = {theta}, ϑ₀ = {theta0}"
            )));
        }
        for (name, v) in [("ω", omega), ("⟨b⟩", mean_b), ("b̄", sup_b)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(omega + 2.0 * mean_b > 0.0) {
            return Err(Error::param("ω + 2⟨b⟩ must be > 0"));
        }
        Ok(Self {
            theta0,
            theta,
            omega,
            mean_b,
            sup_b,
        })
    }

    /// Parameters with `⟨b⟩` and `b̄` taken from the model tables.
    pub fn for_model(model: &KernelModel, theta0: f64, theta: f64, omega: f64) -> Result<Self> {
        Self::new(theta0, theta, omega, model.mean_b, model.sup_b)
    }

    fn rate(&self) -> f64 {
        self.omega + 2.0 * self.mean_b
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.theta0, theta, self.omega, self.mean_b, self.sup_b)
    }
}

/// `T(ϑ, ϑ₀) = (ϑ − ϑ₀) e^{−ϑ} / (ω + 2⟨b⟩)`.
pub fn horizon(p: &HorizonParams) -> f64 {
    (p.theta - p.theta0) * (-p.theta).exp() / p.rate()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimal {
    pub theta_star: f64,
    pub tau: f64,
}

/// Maximizer `ϑ* = ϑ₀ + 1` of `T(·, ϑ₀)` and `τ(ϑ₀) = T(ϑ*, ϑ₀)`.
pub fn optimal(theta0: f64, omega: f64, mean_b: f64) -> Result<Optimal> {
    let p = HorizonParams::new(theta0, theta0 + 1.0, omega, mean_b, 0.0)?;
    Ok(Optimal {
        theta_star: p.theta,
        tau: (-theta0).exp() / (std::f64::consts::E * p.rate()),
    })
}

/// `T / (T − t)`; an infinite horizon gives 1.
pub fn q_norm_bound(t: f64, horizon: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param(format!("t must be >= 0, got {t}")));
    }
    if horizon == f64::INFINITY {
        return Ok(1.0);
    }
    if !(t < horizon) {
        return Err(Error::Horizon { t, horizon });
    }
    Ok(horizon / (horizon - t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorNormBounds {
    /// `‖L‖_{ϑϑ''}`.
    pub l: f64,
    /// `‖C^{ω}‖_{ϑϑ''}`.
    pub c: f64,
    /// `‖D‖_{ϑϑ''}`.
    pub d: f64,
}

pub fn operator_norm_bounds(p: &HorizonParams, theta_pp: f64) -> Result<OperatorNormBounds> {
    let sigma = p.theta - theta_pp;
    if !(sigma > 0.0) {
        return Err(Error::param(format!(
            "need ϑ'' < ϑ, got ϑ'' = {theta_pp}, ϑ = {}",
            p.theta
        )));
    }
    let e = std::f64::consts::E;
    Ok(OperatorNormBounds {
        l: 2.0 * ((1.0 + p.mean_b) / (e * sigma) + 4.0 * p.sup_b / (e * e * sigma * sigma)),
        c: (p.omega + p.mean_b) * p.theta.exp() / (e * sigma),
        d: p.mean_b * p.theta.exp() / (e * sigma),
    })
}

/// The `2l + 2` scale parameters `ϑ⁰ < … < ϑ^{2l+1}` interleaving `l + 1`
/// steps of width `δ/(l+1)` with `l` steps of width `ε = (θ − ϑ₁ − δ)/l`.
pub fn ladder(theta1: f64, theta: f64, l: usize, delta: f64) -> Result<Vec<f64>> {
    if l == 0 {
        return Err(Error::param("ladder needs l >= 1"));
    }
    if !(delta > 0.0 && delta < theta - theta1) {
        return Err(Error::param(format!(
            "need 0 < δ < θ − ϑ₁, got δ = {delta}, θ − ϑ₁ = {}",
            theta - theta1
        )));
    }
    let eps = (theta - theta1 - delta) / l as f64;
    let step = delta / (l + 1) as f64;
    let mut out = Vec::with_capacity(2 * l + 2);
    for s in 0..=l {
        let sf = s as f64;
        out.push(theta1 + sf * step + sf * eps);
        out.push(theta1 + (sf + 1.0) * step + sf * eps);
    }
    out[0] = theta1;
    out[2 * l + 1] = theta;
    Ok(out)
}

/// `T_δ = (θ − ϑ₁ − δ) e^{−ϑ₂} / (ω + 2⟨b⟩)`.
pub fn t_delta(
    theta1: f64,
    theta: f64,
    theta2: f64,
    delta: f64,
    omega: f64,
    mean_b: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < theta - theta1) {
        return Err(Error::param(format!(
            "need 0 < δ < θ − ϑ₁, got δ = {delta}, θ − ϑ₁ = {}",
            theta - theta1
        )));
    }
    if !(theta <= theta2) {
        return Err(Error::param(format!(
            "need θ <= ϑ₂, got θ = {theta}, ϑ₂ = {theta2}"
        )));
    }
    let rate = omega + 2.0 * mean_b;
    if !(rate > 0.0) {
        return Err(Error::param("ω + 2⟨b⟩ must be > 0"));
    }
    Ok((theta - theta1 - delta) * (-theta2).exp() / rate)
}

/// `(1/n!) (n/e)ⁿ (T/T_δ)ⁿ` for `n = 1..=n_max`.
pub fn majorant_terms(t: f64, t_delta: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(t > 0.0 && t < t_delta) {
        return Err(Error::param(format!(
            "majorant needs 0 < T < T_δ, got T = {t}, T_δ = {t_delta}"
        )));
    }
    let q = (t / t_delta).ln();
    Ok((1..=n_max)
        .map(|n| {
            let nf = n as f64;
            (nf * (nf.ln() - 1.0 + q) - ln_gamma(nf + 1.0)).exp()
        })
        .collect())
}

/// Least `ϑ` with `‖k‖_ϑ ≤ 1 + 10⁻¹²`, by bisection.
pub fn theta0_of(k: &CorrelationVector) -> Result<f64> {
    let ok = |th: f64| k.norm_theta(th) <= 1.0 + THETA0_TOLERANCE;
    if k.orders[0][0].abs() > 1.0 + THETA0_TOLERANCE {
        return Err(Error::param("k⁽⁰⁾ exceeds 1; no scale parameter bounds it"));
    }
    if k.orders[1..].iter().flatten().all(|v| *v == 0.0) {
        return Err(Error::param(
            "all orders above zero vanish; ϑ₀ is unbounded below",
        ));
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while ok(lo) {
        lo *= 2.0;
    }
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::param("no finite ϑ bounds the initial state"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub theta: f64,
    pub horizon: f64,
    /// `max_t ‖k_t‖_ϑ / (T/(T−t) ‖k₀‖_{ϑ₀})`.
    pub max_ratio: f64,
    pub worst_time: f64,
    pub samples: usize,
    /// Samples beyond `0.9 T`, excluded from the ratio.
    pub skipped: usize,
    pub slack: f64,
    pub flagged: bool,
    /// `None` when no dual-flow series was supplied.
    pub dual_nonincreasing: Option<bool>,
}

impl EnvelopeReport {
    pub fn status(&self) -> &'static str {
        if self.flagged || self.dual_nonincreasing == Some(false) {
            "FLAG"
        } else {
            "PASS"
        }
    }
}

/// Compares measured norms (at `theta`) against `T/(T−t) ‖k₀‖_{ϑ₀}` on
/// `t ≤ 0.9 T`. `dual_flow` is an optional `(t, |G_t|)` series of the
/// `A + B` predual flow, checked for monotone decay up to round-off.
pub fn envelope_check(
    series: &[NormSample],
    theta: f64,
    k0_norm: f64,
    horizon: f64,
    dual_flow: Option<&[(f64, f64)]>,
) -> Result<EnvelopeReport> {
    if !(k0_norm > 0.0) {
        return Err(Error::param("‖k₀‖_{ϑ₀} must be > 0"));
    }
    let mut report = EnvelopeReport {
        theta,
        horizon,
        max_ratio: 0.0,
        worst_time: 0.0,
        samples: 0,
        skipped: 0,
        slack: ENVELOPE_SLACK,
        flagged: false,
        dual_nonincreasing: None,
    };
    for s in series.iter().filter(|s| s.theta == theta) {
        if s.time > 0.9 * horizon {
            report.skipped += 1;
            continue;
        }
        let ratio = s.norm / (q_norm_bound(s.time, horizon)? * k0_norm);
        report.samples += 1;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst_time = s.time;
        }
    }
    report.flagged = report.max_ratio > 1.0 + ENVELOPE_SLACK;
    report.dual_nonincreasing = dual_flow.map(|f| {
        f.windows(2)
            .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12) + 1e-15)
    });
    Ok(report)
}
