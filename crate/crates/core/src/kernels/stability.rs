//! Stability of the attraction/repulsion balance:
//! `Φ₊(η) ≤ Φ₋(η) + ω|η|` for all finite configurations.
//!
//! Three routes, tried in order:
//! 1. pointwise `φ₋ ≥ φ₊` on the grid, which gives `ω = 0`;
//! 2. the Fourier criterion `(1 − α̂)(κ̂₁ − κ̂₂) ≥ 0`: the potential
//!    `φ₋ − φ₊` is then positive definite, hence stable with constant
//!    `ω = φ₋(0) − φ₊(0)` (diagonal terms of the Bochner sum);
//! 3. random and clustered configurations, which only give a lower bound
//!    for `ω` or evidence that no finite `ω` exists.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Influence, KernelModel};
use crate::configurations::{big_phi, FiniteConfiguration, Sign};
use crate::grid::Point;

/// Positivity tolerance for the Fourier criterion.
pub const FOURIER_TOLERANCE: f64 = 1e-10;
/// `ω̂(n)` growing faster than this fraction of `b̄` per particle means
/// quadratic growth of `Φ₊ − Φ₋`.
pub const UNBOUNDED_SLOPE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaSource {
    /// All kernels vanish.
    Degenerate,
    /// `φ₋ ≥ φ₊` pointwise.
    Pointwise,
    /// Positive-definite potential, certified.
    Fourier,
    /// Sampled lower bound only.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Omega {
    Finite { value: f64, source: OmegaSource },
    Unbounded,
}

impl Omega {
    pub fn value(&self) -> Option<f64> {
        match self {
            Omega::Finite { value, .. } => Some(*value),
            Omega::Unbounded => None,
        }
    }

    pub fn is_empirical(&self) -> bool {
        matches!(
            self,
            Omega::Finite {
                source: OmegaSource::Empirical,
                ..
            }
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    /// Total number of sampled configurations on the empirical path.
    pub sample_budget: usize,
    pub max_config_size: usize,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            sample_budget: 20_000,
            max_config_size: 20,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub fourier_ok: bool,
    /// `min_p (1 − α̂(p))(κ̂₁(p) − κ̂₂(p))` (or `min_p (φ̂₋ − φ̂₊)(p)` for a
    /// tabulated influence kernel).
    pub min_product: f64,
    /// Largest imaginary part among the transforms; zero up to roundoff
    /// for symmetric tables.
    pub max_imaginary: f64,
    pub omega: Omega,
    pub pointwise_ok: bool,
    /// `min_s (φ₋ − φ₊)(s)`.
    pub pointwise_min_gap: f64,
    /// `(n, ω̂(n))` from the empirical path.
    pub omega_by_size: Vec<(usize, f64)>,
    /// Least-squares slope of `ω̂(n)` in `n`.
    pub growth_slope: Option<f64>,
    /// Worst configuration found and its `Φ₊ − Φ₋`.
    pub evidence: Option<(FiniteConfiguration, f64)>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        matches!(self.omega, Omega::Finite { .. })
    }

    /// Machine-readable `key = value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let (omega, source) = match self.omega {
            Omega::Finite { value, source } => (
                format!("{value:.16e}"),
                format!("{source:?}").to_lowercase(),
            ),
            Omega::Unbounded => ("\"unbounded\"".to_string(), "empirical".to_string()),
        };
        s += &format!("fourier_ok = {}\n", self.fourier_ok);
        s += &format!("min_product = {:.16e}\n", self.min_product);
        s += &format!("max_imaginary = {:.16e}\n", self.max_imaginary);
        s += &format!("omega = {omega}\n");
        s += &format!("omega_source = \"{source}\"\n");
        s += &format!("omega_is_lower_bound = {}\n", self.omega.is_empirical());
        s += &format!("pointwise_ok = {}\n", self.pointwise_ok);
        s += &format!("pointwise_min_gap = {:.16e}\n", self.pointwise_min_gap);
        if let Some(slope) = self.growth_slope {
            s += &format!("growth_slope = {slope:.16e}\n");
        }
        if let Some((cfg, excess)) = &self.evidence {
            s += &format!("evidence_excess = {excess:.16e}\n");
            s += &format!("evidence_points = {}\n", cfg.to_flat_string());
        }
        s
    }

    pub fn summary(&self) -> String {
        let verdict = match self.omega {
            Omega::Finite { value, source } => match source {
                OmegaSource::Empirical => format!("stable (empirical lower bound ω ≥ {value:.6})"),
                _ => format!("stable with ω = {value:.6} ({source:?})"),
            },
            Omega::Unbounded => "UNBOUNDED: Φ₊ − Φ₋ grows quadratically with |η|".to_string(),
        };
        format!(
            "Fourier criterion: {} (min product {:.3e})\nPointwise φ₋ ≥ φ₊: {} (min gap {:.3e})\nVerdict: {verdict}\n",
            if self.fourier_ok { "holds" } else { "fails" },
            self.min_product,
            if self.pointwise_ok { "holds" } else { "fails" },
            self.pointwise_min_gap,
        )
    }
}

pub fn stability_check(model: &KernelModel, options: &StabilityOptions) -> StabilityReport {
    let d = &model.domain;
    let (min_product, max_imaginary) = fourier_products(model);
    let fourier_ok = min_product >= -FOURIER_TOLERANCE;
    let pointwise_min_gap = model
        .phi_minus
        .iter()
        .zip(&model.phi_plus)
        .map(|(m, p)| m - p)
        .fold(f64::INFINITY, f64::min);
    let pointwise_ok = pointwise_min_gap >= -FOURIER_TOLERANCE;

    let mut report = StabilityReport {
        fourier_ok,
        min_product,
        max_imaginary,
        omega: Omega::Unbounded,
        pointwise_ok,
        pointwise_min_gap,
        omega_by_size: Vec::new(),
        growth_slope: None,
        evidence: None,
    };

    if model.is_free() {
        report.omega = Omega::Finite {
            value: 0.0,
            source: OmegaSource::Degenerate,
        };
        return report;
    }
    if pointwise_ok {
        report.omega = Omega::Finite {
            value: 0.0,
            source: OmegaSource::Pointwise,
        };
        return report;
    }
    if fourier_ok {
        let at_origin = model.phi_minus[0] - model.phi_plus[0];
        report.omega = Omega::Finite {
            value: at_origin.max(0.0),
            source: OmegaSource::Fourier,
        };
        return report;
    }

    // empirical path
    let max_n = options.max_config_size.max(2);
    let sizes: Vec<usize> = (2..=max_n).collect();
    let per_size = (options.sample_budget / sizes.len()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut worst: Option<(FiniteConfiguration, f64, f64)> = None;
    for &n in &sizes {
        let mut best = 0.0f64;
        let mut candidates = vec![FiniteConfiguration::new(vec![[0.0, 0.0]; n])];
        for k in 0..per_size {
            candidates.push(random_configuration(d, n, k % 2 == 1, &mut rng));
        }
        for cfg in candidates {
            let excess = big_phi(model, &cfg, Sign::Plus) - big_phi(model, &cfg, Sign::Minus);
            let per = excess / n as f64;
            best = best.max(per);
            if worst.as_ref().map_or(true, |w| per > w.2) {
                worst = Some((cfg, excess, per));
            }
        }
        report.omega_by_size.push((n, best));
    }
    let slope = least_squares_slope(&report.omega_by_size);
    report.growth_slope = Some(slope);
    report.evidence = worst.map(|(c, e, _)| (c, e));
    report.omega = if slope > UNBOUNDED_SLOPE_FRACTION * model.sup_b {
        Omega::Unbounded
    } else {
        Omega::Finite {
            value: report
                .omega_by_size
                .iter()
                .map(|(_, w)| *w)
                .fold(0.0, f64::max),
            source: OmegaSource::Empirical,
        }
    };
    report
}

/// Uniform i.i.d. points, or points clustered within a random radius of a
/// random centre.
fn random_configuration(
    d: &crate::grid::TorusDomain,
    n: usize,
    clustered: bool,
    rng: &mut ChaCha8Rng,
) -> FiniteConfiguration {
    let dim = d.dimension;
    let uniform_point = |rng: &mut ChaCha8Rng| -> Point {
        let mut p = [0.0; 2];
        for pk in p.iter_mut().take(dim) {
            *pk = rng.random::<f64>() * d.length;
        }
        p
    };
    if !clustered {
        return FiniteConfiguration::new((0..n).map(|_| uniform_point(rng)).collect());
    }
    let centre = uniform_point(rng);
    let u: f64 = rng.random();
    let radius = u * u * d.length / 4.0;
    let points = (0..n)
        .map(|_| {
            let mut p = centre;
            for pk in p.iter_mut().take(dim) {
                *pk += radius * (2.0 * rng.random::<f64>() - 1.0);
            }
            d.wrap(p)
        })
        .collect();
    FiniteConfiguration::new(points)
}

fn least_squares_slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|(x, _)| *x as f64).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| *y).sum::<f64>() / n;
    let sxy: f64 = points
        .iter()
        .map(|(x, y)| (*x as f64 - mx) * (y - my))
        .sum();
    let sxx: f64 = points.iter().map(|(x, _)| (*x as f64 - mx).powi(2)).sum();
    sxy / sxx
}

/// `(min product, max |imaginary part|)` over the discrete frequencies.
fn fourier_products(model: &KernelModel) -> (f64, f64) {
    let d = &model.domain;
    let alpha_hat = d.fourier_transform(&model.alpha.values);
    let mut max_im = alpha_hat.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let min = match &model.influence {
        Influence::Factorized { kappa1, kappa2, .. } => {
            let k1 = d.fourier_transform(&kappa1.values);
            let k2 = d.fourier_transform(&kappa2.values);
            for c in k1.iter().chain(&k2) {
                max_im = max_im.max(c.im.abs());
            }
            (0..d.sites())
                .map(|p| (1.0 - alpha_hat[p].re) * (k1[p].re - k2[p].re))
                .fold(f64::INFINITY, f64::min)
        }
        Influence::Tabulated { .. } => {
            let diff: Vec<f64> = model
                .phi_minus
                .iter()
                .zip(&model.phi_plus)
                .map(|(m, p)| m - p)
                .collect();
            let t = d.fourier_transform(&diff);
            for c in &t {
                max_im = max_im.max(c.im.abs());
            }
            t.iter().map(|c| c.re).fold(f64::INFINITY, f64::min)
        }
    };
    (min, max_im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusDomain;
    use crate::kernels::{ModelSpec, RadialProfile};

    fn model(s1: Option<f64>, s2: Option<f64>) -> KernelModel {
        let d = TorusDomain::new(1, 20.0, 512).unwrap();
        let p = |s: Option<f64>| s.map_or(RadialProfile::zero(), RadialProfile::gaussian);
        KernelModel::new(ModelSpec::factorized(
            d,
            RadialProfile::gaussian(1.0),
            p(s1),
            p(s2),
        ))
        .unwrap()
    }

    #[test]
    fn gaussian_pair_passes_fourier_with_certified_omega() {
        let m = model(Some(0.5), Some(1.0));
        let r = stability_check(&m, &StabilityOptions::default());
        assert!(r.fourier_ok);
        assert!(r.min_product >= -FOURIER_TOLERANCE);
        assert!(r.max_imaginary <= 1e-10);
        assert!(!r.pointwise_ok);
        let Omega::Finite { value, source } = r.omega else {
            panic!()
        };
        assert_eq!(source, OmegaSource::Fourier);
        assert!((value - 0.324212).abs() < 1e-5, "{value}");
    }

    #[test]
    fn pure_attraction_is_unbounded() {
        let m = model(None, Some(1.0));
        let opts = StabilityOptions {
            sample_budget: 2_000,
            ..Default::default()
        };
        let r = stability_check(&m, &opts);
        assert!(!r.fourier_ok);
        assert_eq!(r.omega, Omega::Unbounded);
        let (cfg, excess) = r.evidence.unwrap();
        // all points coincident: n(n−1)(κ₂(0) − (α∗κ₂)(0))
        let n = cfg.len() as f64;
        let per_pair = m.phi_plus[0] - m.phi_minus[0];
        assert!(excess >= n * (n - 1.0) * per_pair - 1e-9);
        assert!(r.growth_slope.unwrap() > 0.1 * m.sup_b);
    }

    #[test]
    fn repulsion_only_passes() {
        let m = model(Some(1.0), None);
        let r = stability_check(&m, &StabilityOptions::default());
        assert!(r.fourier_ok);
        assert!(r.is_stable());
    }

    #[test]
    fn equal_split_is_pointwise_stable() {
        let m = model(Some(0.7), Some(0.7));
        let r = stability_check(&m, &StabilityOptions::default());
        assert!(r.pointwise_ok);
        assert_eq!(
            r.omega,
            Omega::Finite {
                value: 0.0,
                source: OmegaSource::Pointwise
            }
        );
    }

    #[test]
    fn degenerate_model_reports_zero() {
        let m = model(None, None);
        let r = stability_check(&m, &StabilityOptions::default());
        assert_eq!(r.omega.value(), Some(0.0));
    }

    #[test]
    fn non_positive_definite_repulsion_gives_empirical_finite_omega() {
        // tophat κ₁ has a sign-changing transform, κ₂ = 0
        let d = TorusDomain::new(1, 20.0, 512).unwrap();
        let m = KernelModel::new(ModelSpec::factorized(
            d,
            RadialProfile::gaussian(0.3),
            RadialProfile::Tophat {
                radius: 1.0,
                mass: 1.0,
            },
            RadialProfile::zero(),
        ))
        .unwrap();
        let r = stability_check(
            &m,
            &StabilityOptions {
                sample_budget: 2_000,
                ..Default::default()
            },
        );
        assert!(!r.fourier_ok);
        assert!(r.omega.is_empirical());
        assert!(r.to_key_values().contains("omega_is_lower_bound = true"));
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(usize, f64)> = (2..10).map(|n| (n, 0.5 * n as f64 + 1.0)).collect();
        assert!((least_squares_slope(&pts) - 0.5).abs() < 1e-12);
    }
}
