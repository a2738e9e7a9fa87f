//! Radially symmetric profiles, periodized onto the torus.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::{norm, Point, TorusDomain};

/// Images are summed until the profile mass beyond them drops below this.
pub const IMAGE_TAIL_MASS: f64 = 1e-12;
const MAX_IMAGES: usize = 64;

fn one() -> f64 {
    1.0
}

/// A radial profile `f(|x|) ≥ 0`. Analytic families are normalized so that
/// `∫ f = mass` on `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum RadialProfile {
    Gaussian {
        sigma: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// `∝ exp(-|x|/sigma)`.
    Exponential {
        sigma: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// Uniform on the ball of the given radius.
    Tophat {
        radius: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// Values on the torus grid, indexed by site offset from the origin.
    Tabulated { values: Vec<f64> },
}

impl RadialProfile {
    pub fn gaussian(sigma: f64) -> Self {
        RadialProfile::Gaussian { sigma, mass: 1.0 }
    }

    pub fn zero() -> Self {
        RadialProfile::Gaussian {
            sigma: 1.0,
            mass: 0.0,
        }
    }

    pub fn validate(&self, domain: &TorusDomain) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg_mass = |m: f64| {
            if m >= 0.0 && m.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("mass must be >= 0, got {m}")))
            }
        };
        match self {
            RadialProfile::Gaussian { sigma, mass }
            | RadialProfile::Exponential { sigma, mass } => {
                positive("sigma", *sigma)?;
                nonneg_mass(*mass)
            }
            RadialProfile::Tophat { radius, mass } => {
                positive("radius", *radius)?;
                nonneg_mass(*mass)
            }
            RadialProfile::Tabulated { values } => {
                if values.len() != domain.sites() {
                    return Err(Error::param(format!(
                        "tabulated profile needs {} values, got {}",
                        domain.sites(),
                        values.len()
                    )));
                }
                if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(Error::param(format!(
                        "tabulated profile entries must be finite and >= 0, found {v}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Nominal mass `∫ f` (grid quadrature for tabulated profiles).
    pub fn nominal_mass(&self, domain: &TorusDomain) -> f64 {
        match self {
            RadialProfile::Gaussian { mass, .. }
            | RadialProfile::Exponential { mass, .. }
            | RadialProfile::Tophat { mass, .. } => *mass,
            RadialProfile::Tabulated { values } => domain.integrate(values),
        }
    }

    /// Whether the family is smooth enough that point sampling on the grid
    /// is spectrally accurate.
    pub fn is_smooth(&self) -> bool {
        matches!(self, RadialProfile::Gaussian { .. })
    }

    /// Unperiodized profile value at radius `r` in dimension `d`.
    pub fn radial_value(&self, r: f64, d: usize) -> f64 {
        use std::f64::consts::PI;
        match *self {
            RadialProfile::Gaussian { sigma, mass } => {
                let var = sigma * sigma;
                mass * (2.0 * PI * var).powf(-(d as f64) / 2.0) * (-r * r / (2.0 * var)).exp()
            }
            RadialProfile::Exponential { sigma, mass } => {
                let c = if d == 1 {
                    1.0 / (2.0 * sigma)
                } else {
                    1.0 / (2.0 * PI * sigma * sigma)
                };
                mass * c * (-r / sigma).exp()
            }
            RadialProfile::Tophat { radius, mass } => {
                if r <= radius {
                    let vol = if d == 1 {
                        2.0 * radius
                    } else {
                        PI * radius * radius
                    };
                    mass / vol
                } else {
                    0.0
                }
            }
            RadialProfile::Tabulated { .. } => f64::NAN,
        }
    }

    /// Fraction of the mass lying outside the ball of radius `r`.
    pub fn tail_fraction(&self, r: f64, d: usize) -> f64 {
        match *self {
            RadialProfile::Gaussian { sigma, .. } => {
                if d == 1 {
                    erfc(r / (sigma * std::f64::consts::SQRT_2))
                } else {
                    (-r * r / (2.0 * sigma * sigma)).exp()
                }
            }
            RadialProfile::Exponential { sigma, .. } => {
                let x = r / sigma;
                if d == 1 {
                    (-x).exp()
                } else {
                    (1.0 + x) * (-x).exp()
                }
            }
            RadialProfile::Tophat { radius, .. } => {
                if r >= radius {
                    0.0
                } else {
                    1.0
                }
            }
            RadialProfile::Tabulated { .. } => 0.0,
        }
    }

    /// Number of image shells summed in each direction.
    pub fn image_count(&self, domain: &TorusDomain) -> usize {
        let d = domain.dimension;
        (0..MAX_IMAGES)
            .find(|&k| self.tail_fraction((k as f64 + 0.5) * domain.length, d) < IMAGE_TAIL_MASS)
            .unwrap_or(MAX_IMAGES)
    }

    /// Wrapped-image sum at a displacement. Components are folded to their
    /// absolute values first, so the result is exactly even in `disp`.
    pub fn periodized(&self, domain: &TorusDomain, disp: Point, images: usize) -> f64 {
        let d = domain.dimension;
        let l = domain.length;
        let mut a = [0.0; 2];
        for k in 0..d {
            let v = disp[k] - l * (disp[k] / l).round();
            a[k] = v.abs();
        }
        let k = images as i64;
        let mut sum = 0.0;
        if d == 1 {
            for n in -k..=k {
                sum += self.radial_value((a[0] + n as f64 * l).abs(), 1);
            }
        } else {
            for n in -k..=k {
                for m in -k..=k {
                    let v = [a[0] + n as f64 * l, a[1] + m as f64 * l];
                    sum += self.radial_value(norm(v, 2), 2);
                }
            }
        }
        sum
    }
}

/// A profile sampled on the grid together with the scale used for
/// off-grid evaluation.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub profile: RadialProfile,
    pub values: Vec<f64>,
    /// `h^d Σ values`.
    pub grid_mass: f64,
    /// Grid mass of the raw point samples before any rescaling.
    pub raw_grid_mass: f64,
    /// Factor applied to the analytic periodized value.
    pub scale: f64,
    pub images: usize,
    /// Largest table value; the exact rejection envelope for unimodal profiles.
    pub max_value: f64,
}

impl ProfileTable {
    /// Samples the periodized profile on every site. Non-smooth analytic
    /// families are rescaled so that their grid mass equals the nominal mass.
    pub fn build(profile: &RadialProfile, domain: &TorusDomain) -> Result<Self> {
        profile.validate(domain)?;
        let (raw, images) = match profile {
            RadialProfile::Tabulated { values } => (values.clone(), 0),
            _ => {
                let images = profile.image_count(domain);
                let raw = (0..domain.sites())
                    .map(|s| profile.periodized(domain, domain.site_displacement(s), images))
                    .collect();
                (raw, images)
            }
        };
        let raw_grid_mass = domain.integrate(&raw);
        let nominal = profile.nominal_mass(domain);
        let scale = if profile.is_smooth() || matches!(profile, RadialProfile::Tabulated { .. }) {
            1.0
        } else if nominal == 0.0 {
            1.0
        } else {
            let rel = (raw_grid_mass / nominal - 1.0).abs();
            if !(rel <= 0.05) {
                return Err(Error::Resolution(format!(
                    "{profile:?} is not resolved by grid spacing {} (grid mass {raw_grid_mass}, nominal {nominal})",
                    domain.spacing()
                )));
            }
            nominal / raw_grid_mass
        };
        let values: Vec<f64> = raw.iter().map(|v| v * scale).collect();
        let grid_mass = domain.integrate(&values);
        let max_value = values.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            profile: profile.clone(),
            values,
            grid_mass,
            raw_grid_mass,
            scale,
            images,
            max_value,
        })
    }

    /// Rescales to unit grid mass; used for the jump kernel.
    pub(crate) fn normalize_to_unit_mass(&mut self, domain: &TorusDomain) {
        let f = 1.0 / self.grid_mass;
        self.scale *= f;
        for v in &mut self.values {
            *v *= f;
        }
        // exact by construction up to one rounding of the sum
        debug_assert!((domain.integrate(&self.values) - 1.0).abs() < 1e-12);
        self.grid_mass = 1.0;
        self.max_value *= f;
    }

    /// Value at an arbitrary displacement: analytic periodized sum for
    /// analytic families, multilinear interpolation for tabulated ones.
    pub fn eval(&self, domain: &TorusDomain, disp: Point) -> f64 {
        match self.profile {
            RadialProfile::Tabulated { .. } => domain.interpolate(&self.values, disp),
            _ => self.scale * self.profile.periodized(domain, disp, self.images),
        }
    }

    /// Draws a displacement with density proportional to this profile
    /// (analytic families exactly; tabulated ones from the interpolant).
    pub fn sample<R: Rng + ?Sized>(&self, domain: &TorusDomain, rng: &mut R, cdf: &[f64]) -> Point {
        let d = domain.dimension;
        let mut p = [0.0; 2];
        match self.profile {
            RadialProfile::Gaussian { sigma, .. } => {
                for pk in p.iter_mut().take(d) {
                    let z: f64 = StandardNormal.sample(rng);
                    *pk = sigma * z;
                }
            }
            RadialProfile::Exponential { sigma, .. } => {
                if d == 1 {
                    let e: f64 = -(1.0 - rng.random::<f64>()).ln() * sigma;
                    p[0] = if rng.random::<bool>() { e } else { -e };
                } else {
                    let r: f64 = Gamma::new(2.0, sigma).expect("valid gamma").sample(rng);
                    let th = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                    p = [r * th.cos(), r * th.sin()];
                }
            }
            RadialProfile::Tophat { radius, .. } => {
                if d == 1 {
                    p[0] = radius * (2.0 * rng.random::<f64>() - 1.0);
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let th = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                    p = [r * th.cos(), r * th.sin()];
                }
            }
            RadialProfile::Tabulated { .. } => {
                // site ∝ value, then a hat-distributed offset: exact for the
                // multilinear interpolant
                let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                let site = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                let base = domain.site_displacement(site);
                let h = domain.spacing();
                for k in 0..d {
                    let t = rng.random::<f64>() + rng.random::<f64>() - 1.0;
                    p[k] = base[k] + t * h;
                }
            }
        }
        p
    }

    /// Cumulative table used by [`ProfileTable::sample`] for tabulated profiles.
    pub fn sampling_cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(l: f64, m: usize) -> TorusDomain {
        TorusDomain::new(1, l, m).unwrap()
    }

    #[test]
    fn gaussian_peak_matches_closed_form() {
        let d = dom(20.0, 512);
        let t = ProfileTable::build(&RadialProfile::gaussian(1.0), &d).unwrap();
        let peak = t.eval(&d, [0.0, 0.0]);
        let exact = (2.0 * std::f64::consts::PI).powf(-0.5);
        assert!((peak - exact).abs() < 1e-12, "{peak} vs {exact}");
    }

    #[test]
    fn wrapped_sum_oracle_small_box() {
        // brute-force image sum with many more images than the truncation rule
        let d = dom(3.0, 16);
        let p = RadialProfile::gaussian(1.0);
        let k = p.image_count(&d);
        for x in [0.0, 0.4, 1.1, 1.5] {
            let brute: f64 = (-200..=200)
                .map(|n| p.radial_value((x + n as f64 * 3.0_f64).abs(), 1))
                .sum();
            let got = p.periodized(&d, [x, 0.0], k);
            assert!((brute - got).abs() < 1e-12 * brute.max(1.0));
        }
    }

    #[test]
    fn periodized_is_exactly_even() {
        let d = TorusDomain::new(2, 5.0, 16).unwrap();
        let p = RadialProfile::Exponential {
            sigma: 0.7,
            mass: 1.0,
        };
        let k = p.image_count(&d);
        for v in [[0.3, -1.7], [2.2, 0.9], [-2.4, 2.4]] {
            let a = p.periodized(&d, v, k);
            let b = p.periodized(&d, [-v[0], -v[1]], k);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn non_smooth_families_rescaled_to_nominal_mass() {
        let d = dom(20.0, 256);
        for p in [
            RadialProfile::Tophat {
                radius: 1.3,
                mass: 2.0,
            },
            RadialProfile::Exponential {
                sigma: 0.8,
                mass: 0.5,
            },
        ] {
            let t = ProfileTable::build(&p, &d).unwrap();
            assert!((t.grid_mass - p.nominal_mass(&d)).abs() < 1e-12);
        }
    }

    #[test]
    fn unresolved_tophat_rejected() {
        let d = dom(20.0, 16);
        let p = RadialProfile::Tophat {
            radius: 0.3,
            mass: 1.0,
        };
        assert!(matches!(
            ProfileTable::build(&p, &d),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn tabulated_validation() {
        let d = dom(8.0, 8);
        let bad = RadialProfile::Tabulated {
            values: vec![1.0; 7],
        };
        assert!(bad.validate(&d).is_err());
        let neg = RadialProfile::Tabulated {
            values: vec![-1.0; 8],
        };
        assert!(neg.validate(&d).is_err());
    }

    #[test]
    fn tabulated_sampler_follows_interpolant() {
        use rand::SeedableRng;
        let d = dom(8.0, 8);
        let mut values = vec![0.0; 8];
        values[0] = 1.0;
        values[1] = 0.5;
        values[7] = 0.5;
        let t = ProfileTable::build(&RadialProfile::Tabulated { values }, &d).unwrap();
        let cdf = t.sampling_cdf();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut inside = 0usize;
        for _ in 0..n {
            let x = t.sample(&d, &mut rng, &cdf)[0];
            if x.abs() < 0.5 {
                inside += 1;
            }
        }
        // mass of the interpolant on |x| < 0.5: ∫ (1 - |x|/2) dx over (-0.5, 0.5)
        // = 1 - 0.125, out of total 2.0
        let expected = 0.875 / 2.0;
        let frac = inside as f64 / n as f64;
        assert!((frac - expected).abs() < 0.005, "{frac} vs {expected}");
    }
}
