//! Jump kernel `a`, influence kernel `b`, derived rates `φ±` and the
//! stability analysis of the model.
//!
//! All kernels are translation invariant and radially symmetric, so every
//! kernel is stored as a table over site offsets of the torus grid. The
//! factorized influence `b(x,y|z) = κ₁(x−z) + κ₂(y−z)` takes the FFT path;
//! a general translation-invariant `b` is accepted as a table
//! `β(x−z, y−z)` and handled by direct quadrature.

mod profile;
mod stability;

pub use profile::{ProfileTable, RadialProfile, IMAGE_TAIL_MASS};
pub use stability::{
    stability_check, Omega, OmegaSource, StabilityOptions, StabilityReport, FOURIER_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Point, TorusDomain};

/// Quadrature tolerance for mass identities.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// Allowed relative deviation of a convolution's mass from the product of
/// the factors' nominal masses.
pub const CONVOLUTION_MASS_TOLERANCE: f64 = 1e-6;

/// How the influence kernel `b` is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InfluenceSpec {
    Factorized {
        kappa1: RadialProfile,
        kappa2: RadialProfile,
    },
    /// `β(p, q)` at site offsets `p = x − z`, `q = y − z`, flattened as
    /// `p + sites · q`.
    Tabulated { values: Vec<f64> },
}

/// Everything needed to (re)build a [`KernelModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub domain: TorusDomain,
    pub alpha: RadialProfile,
    pub influence: InfluenceSpec,
}

impl ModelSpec {
    pub fn factorized(
        domain: TorusDomain,
        alpha: RadialProfile,
        kappa1: RadialProfile,
        kappa2: RadialProfile,
    ) -> Self {
        Self {
            domain,
            alpha,
            influence: InfluenceSpec::Factorized { kappa1, kappa2 },
        }
    }

    /// The same model on a box scaled by an integer factor, keeping the
    /// grid spacing fixed. Tabulated kernels cannot be rescaled.
    pub fn scaled_box(&self, factor: usize) -> Result<Self> {
        let domain = TorusDomain::new(
            self.domain.dimension,
            self.domain.length * factor as f64,
            self.domain.resolution * factor,
        )?;
        let tabulated = matches!(self.alpha, RadialProfile::Tabulated { .. })
            || matches!(self.influence, InfluenceSpec::Tabulated { .. })
            || matches!(
                &self.influence,
                InfluenceSpec::Factorized { kappa1, kappa2 }
                    if matches!(kappa1, RadialProfile::Tabulated { .. })
                        || matches!(kappa2, RadialProfile::Tabulated { .. })
            );
        if tabulated {
            return Err(Error::param(
                "tabulated kernels cannot be moved to a larger box",
            ));
        }
        Ok(Self {
            domain,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone)]
pub enum Influence {
    Factorized {
        kappa1: ProfileTable,
        kappa2: ProfileTable,
        /// `α ∗ κ₁`
        alpha_kappa1: Vec<f64>,
        /// `α ∗ κ₂`
        alpha_kappa2: Vec<f64>,
    },
    Tabulated {
        values: Vec<f64>,
        /// `∫ b(x, y | z) dz` as a function of `x − y`.
        z_integral: Vec<f64>,
    },
}

/// The model input data `(a, b)` with all derived quantities. Immutable
/// after construction and shared read-only by every consumer.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub spec: ModelSpec,
    pub domain: TorusDomain,
    pub alpha: ProfileTable,
    pub influence: Influence,
    /// `⟨b⟩ = sup_{x,y} ∫ b(x,y|z) dz`.
    pub mean_b: f64,
    /// `b̄ = sup b`.
    pub sup_b: f64,
    /// `m_a = ∫ a(x, y) dy` (unit by construction).
    pub m_a: f64,
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
}

impl KernelModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let domain = spec.domain;
        let mut alpha = ProfileTable::build(&spec.alpha, &domain)?;
        let nominal = spec.alpha.nominal_mass(&domain);
        if matches!(spec.alpha, RadialProfile::Tabulated { .. }) {
            if (nominal - 1.0).abs() > 1e-6 {
                return Err(Error::param(format!(
                    "jump kernel must have unit mass, tabulated mass is {nominal}"
                )));
            }
        } else if (nominal - 1.0).abs() > 0.0 {
            return Err(Error::param(format!(
                "jump kernel must have unit mass, got mass = {nominal}"
            )));
        }
        if spec.alpha.is_smooth() && (alpha.raw_grid_mass - 1.0).abs() > QUADRATURE_TOLERANCE {
            return Err(Error::Resolution(format!(
                "jump kernel grid mass {} deviates from 1 by more than {QUADRATURE_TOLERANCE}",
                alpha.raw_grid_mass
            )));
        }
        alpha.normalize_to_unit_mass(&domain);
        let m_a = alpha.grid_mass;

        let (influence, mean_b, sup_b, phi_plus, phi_minus) = match &spec.influence {
            InfluenceSpec::Factorized { kappa1, kappa2 } => {
                let k1 = ProfileTable::build(kappa1, &domain)?;
                let k2 = ProfileTable::build(kappa2, &domain)?;
                let alpha_hat = domain.dft(&alpha.values);
                let mut c1 = domain.convolve_with_spectrum(&alpha_hat, &k1.values);
                let mut c2 = domain.convolve_with_spectrum(&alpha_hat, &k2.values);
                // both factors are non-negative; drop FFT round-off
                c1.iter_mut()
                    .chain(c2.iter_mut())
                    .for_each(|v| *v = v.max(0.0));
                for (conv, kappa) in [(&c1, kappa1), (&c2, kappa2)] {
                    let expected = kappa.nominal_mass(&domain);
                    let got = domain.integrate(conv);
                    if (got - expected).abs() > CONVOLUTION_MASS_TOLERANCE * expected.max(1.0) {
                        return Err(Error::Resolution(format!(
                            "convolution mass {got} deviates from {expected} (profile {kappa:?}, spacing {})",
                            domain.spacing()
                        )));
                    }
                }
                let phi_plus: Vec<f64> = c1.iter().zip(&k2.values).map(|(a, b)| a + b).collect();
                let phi_minus: Vec<f64> = k1.values.iter().zip(&c2).map(|(a, b)| a + b).collect();
                let mean_b = k1.grid_mass + k2.grid_mass;
                let sup_b = k1.max_value + k2.max_value;
                (
                    Influence::Factorized {
                        kappa1: k1,
                        kappa2: k2,
                        alpha_kappa1: c1,
                        alpha_kappa2: c2,
                    },
                    mean_b,
                    sup_b,
                    phi_plus,
                    phi_minus,
                )
            }
            InfluenceSpec::Tabulated { values } => {
                let n = domain.sites();
                if values.len() != n * n {
                    return Err(Error::param(format!(
                        "tabulated influence kernel needs {} values, got {}",
                        n * n,
                        values.len()
                    )));
                }
                if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(Error::param(format!(
                        "influence table entries must be finite and >= 0, found {v}"
                    )));
                }
                let (phi_plus, phi_minus) = tabulated_phi(&domain, &alpha.values, values);
                let hv = domain.cell_volume();
                // ∫ β(x−z, y−z) dz with s = x − y: Σ_p β(p, p − s)
                let z_integral: Vec<f64> = (0..n)
                    .map(|s| {
                        (0..n)
                            .map(|p| values[p + n * domain.site_sub(p, s)])
                            .sum::<f64>()
                            * hv
                    })
                    .collect();
                let mean_b = z_integral.iter().cloned().fold(0.0, f64::max);
                let sup_b = values.iter().cloned().fold(0.0, f64::max);
                (
                    Influence::Tabulated {
                        values: values.clone(),
                        z_integral,
                    },
                    mean_b,
                    sup_b,
                    phi_plus,
                    phi_minus,
                )
            }
        };

        let slack = sup_b + QUADRATURE_TOLERANCE;
        if let Some(v) = phi_plus
            .iter()
            .chain(&phi_minus)
            .find(|v| **v > slack || **v < -QUADRATURE_TOLERANCE)
        {
            return Err(Error::Resolution(format!(
                "rate table value {v} violates 0 <= φ± <= b̄ = {sup_b}"
            )));
        }

        Ok(Self {
            spec,
            domain,
            alpha,
            influence,
            mean_b,
            sup_b,
            m_a,
            phi_plus,
            phi_minus,
        })
    }

    pub fn is_factorized(&self) -> bool {
        matches!(self.influence, Influence::Factorized { .. })
    }

    /// `a(x, y) = α(y − x)`; exactly symmetric.
    pub fn eval_a(&self, x: Point, y: Point) -> f64 {
        self.alpha.eval(&self.domain, self.domain.min_image(x, y))
    }

    /// `b(x, y | z)`.
    pub fn eval_b(&self, x: Point, y: Point, z: Point) -> f64 {
        let d = &self.domain;
        match &self.influence {
            Influence::Factorized { kappa1, kappa2, .. } => {
                kappa1.eval(d, d.min_image(z, x)) + kappa2.eval(d, d.min_image(z, y))
            }
            Influence::Tabulated { values, .. } => {
                interpolate_pair(d, values, d.min_image(z, x), d.min_image(z, y))
            }
        }
    }

    /// `α(s)` at a grid offset.
    #[inline]
    pub fn alpha_site(&self, s: usize) -> f64 {
        self.alpha.values[s]
    }

    /// `b(x, y | z)` for grid sites.
    #[inline]
    pub fn b_sites(&self, x: usize, y: usize, z: usize) -> f64 {
        let d = &self.domain;
        match &self.influence {
            Influence::Factorized { kappa1, kappa2, .. } => {
                kappa1.values[d.site_sub(x, z)] + kappa2.values[d.site_sub(y, z)]
            }
            Influence::Tabulated { values, .. } => {
                values[d.site_sub(x, z) + d.sites() * d.site_sub(y, z)]
            }
        }
    }

    /// `∫ b(x, y | z) dz` as a function of the grid offset `x − y`.
    #[inline]
    pub fn b_z_integral(&self, s: usize) -> f64 {
        match &self.influence {
            Influence::Factorized { .. } => self.mean_b,
            Influence::Tabulated { z_integral, .. } => z_integral[s],
        }
    }

    /// `φ₊(x, y)` by interpolation of the separation table.
    pub fn phi_plus_at(&self, x: Point, y: Point) -> f64 {
        self.domain
            .interpolate(&self.phi_plus, self.domain.min_image(y, x))
    }

    /// `φ₋(x, y)` by interpolation of the separation table.
    pub fn phi_minus_at(&self, x: Point, y: Point) -> f64 {
        self.domain
            .interpolate(&self.phi_minus, self.domain.min_image(y, x))
    }

    /// `(φ₊, φ₋)` as separation tables.
    pub fn compute_phi(&self) -> (&[f64], &[f64]) {
        (&self.phi_plus, &self.phi_minus)
    }

    /// True when every kernel contribution of `b` vanishes.
    pub fn is_free(&self) -> bool {
        self.sup_b == 0.0
    }
}

/// Direct quadrature of `φ±` for a tabulated `β`:
/// `φ₊(s) = h^d Σ_u α(s − u) β(u, s)`, `φ₋(s) = h^d Σ_u α(u − s) β(s, u)`.
fn tabulated_phi(domain: &TorusDomain, alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = domain.sites();
    let hv = domain.cell_volume();
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for s in 0..n {
        let mut p = 0.0;
        let mut m = 0.0;
        for u in 0..n {
            p += alpha[domain.site_sub(s, u)] * beta[u + n * s];
            m += alpha[domain.site_sub(u, s)] * beta[s + n * u];
        }
        plus[s] = p * hv;
        minus[s] = m * hv;
    }
    (plus, minus)
}

/// Multilinear interpolation of a pair table `β(p, q)` at off-grid offsets.
fn interpolate_pair(domain: &TorusDomain, values: &[f64], p: Point, q: Point) -> f64 {
    let n = domain.sites();
    // interpolate along q for each neighbouring p-site, then along p
    let m = domain.resolution;
    let h = domain.spacing();
    let dim = domain.dimension;
    let corners = |x: Point| -> Vec<(usize, f64)> {
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for k in 0..dim {
            let u = (x[k] / h).rem_euclid(m as f64);
            let f = u.floor();
            base[k] = (f as usize) % m;
            frac[k] = u - f;
        }
        if dim == 1 {
            vec![(base[0], 1.0 - frac[0]), ((base[0] + 1) % m, frac[0])]
        } else {
            let (i0, j0) = (base[0], base[1]);
            let (i1, j1) = ((i0 + 1) % m, (j0 + 1) % m);
            let (fx, fy) = (frac[0], frac[1]);
            vec![
                (i0 + m * j0, (1.0 - fx) * (1.0 - fy)),
                (i1 + m * j0, fx * (1.0 - fy)),
                (i0 + m * j1, (1.0 - fx) * fy),
                (i1 + m * j1, fx * fy),
            ]
        }
    };
    let cp = corners(p);
    let cq = corners(q);
    let mut sum = 0.0;
    for &(sp, wp) in &cp {
        for &(sq, wq) in &cq {
            sum += wp * wq * values[sp + n * sq];
        }
    }
    sum
}
