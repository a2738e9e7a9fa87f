//! Finite point configurations and the configuration functionals
//! `Φ±`, `Ψ`, `Ψ_ω`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::kernels::KernelModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// An ordered list of torus points; the order carries no meaning and
/// coincident points are allowed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteConfiguration {
    pub points: Vec<Point>,
}

impl FiniteConfiguration {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `[[x, y], ...]` with 17 significant digits.
    pub fn to_flat_string(&self) -> String {
        let items: Vec<String> = self
            .points
            .iter()
            .map(|p| format!("[{:.16e}, {:.16e}]", p[0], p[1]))
            .collect();
        format!("[{}]", items.join(", "))
    }

    /// Parses the output of [`FiniteConfiguration::to_flat_string`] (or any
    /// flat list of 1- or 2-element coordinate lists).
    pub fn from_flat_str(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrapper {
            points: Vec<Vec<f64>>,
        }
        let w: Wrapper = toml::from_str(&format!("points = {s}"))
            .map_err(|e| Error::Config(format!("configuration list: {e}")))?;
        let points = w
            .points
            .into_iter()
            .map(|c| match c.as_slice() {
                [x] => Ok([*x, 0.0]),
                [x, y] => Ok([*x, *y]),
                _ => Err(Error::Config(format!("point with {} coordinates", c.len()))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points })
    }
}

/// `Φ±(η) = Σ_{x∈η} Σ_{y∈η∖x} φ±(x, y)` over ordered pairs, with `φ±` read
/// from the separation grid by linear interpolation.
pub fn big_phi(model: &KernelModel, eta: &FiniteConfiguration, sign: Sign) -> f64 {
    let table = match sign {
        Sign::Plus => &model.phi_plus,
        Sign::Minus => &model.phi_minus,
    };
    let d = &model.domain;
    let pts = &eta.points;
    let mut sum = 0.0;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i != j {
                sum += d.interpolate(table, d.min_image(pts[j], pts[i]));
            }
        }
    }
    sum
}

/// `Ψ(η) = |η| m_a + Φ₋(η)`.
pub fn psi(model: &KernelModel, eta: &FiniteConfiguration) -> f64 {
    eta.len() as f64 * model.m_a + big_phi(model, eta, Sign::Minus)
}

/// `Ψ_ω(η) = ω|η| + Ψ(η)`.
pub fn psi_omega(model: &KernelModel, eta: &FiniteConfiguration, omega: f64) -> f64 {
    omega * eta.len() as f64 + psi(model, eta)
}

/// `Φ±` for a configuration of grid sites (no interpolation).
pub fn big_phi_sites(model: &KernelModel, sites: &[usize], sign: Sign) -> f64 {
    let table = match sign {
        Sign::Plus => &model.phi_plus,
        Sign::Minus => &model.phi_minus,
    };
    let d = &model.domain;
    let mut sum = 0.0;
    for (i, &x) in sites.iter().enumerate() {
        for (j, &y) in sites.iter().enumerate() {
            if i != j {
                sum += table[d.site_sub(x, y)];
            }
        }
    }
    sum
}
