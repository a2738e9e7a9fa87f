//! Density and pair-correlation estimators with replica standard errors.

use std::f64::consts::PI;

use serde::Serialize;

use crate::configurations::FiniteConfiguration;
use crate::grid::TorusDomain;

/// Ordered-pair distance histogram of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PairHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl PairHistogram {
    /// Bins cover every minimum-image distance: `[0, L/2]` in d = 1 and
    /// `[0, L/√2]` in d = 2.
    pub fn edges(domain: &TorusDomain, bins: usize) -> Vec<f64> {
        let r_max = max_distance(domain);
        (0..=bins).map(|k| r_max * k as f64 / bins as f64).collect()
    }

    pub fn collect(domain: &TorusDomain, config: &FiniteConfiguration, bins: usize) -> Self {
        let edges = Self::edges(domain, bins);
        let width = edges[bins] / bins as f64;
        let mut counts = vec![0u64; bins];
        let pts = &config.points;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let r = domain.distance(pts[i], pts[j]);
                let k = ((r / width) as usize).min(bins - 1);
                counts[k] += 2;
            }
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn max_distance(domain: &TorusDomain) -> f64 {
    if domain.dimension == 1 {
        domain.length / 2.0
    } else {
        domain.length / 2.0 * 2f64.sqrt()
    }
}

/// Area of the disc of radius `r` clipped to the square `[-a, a]²`.
fn clipped_disc_area(r: f64, a: f64) -> f64 {
    if r <= a {
        PI * r * r
    } else if r >= a * 2f64.sqrt() {
        4.0 * a * a
    } else {
        let segment = r * r * (a / r).acos() - a * (r * r - a * a).sqrt();
        PI * r * r - 4.0 * segment
    }
}

/// Volume of minimum-image displacements with length in `[lo, hi)`.
pub fn pair_shell_volume(domain: &TorusDomain, lo: f64, hi: f64) -> f64 {
    if domain.dimension == 1 {
        2.0 * (hi.min(domain.length / 2.0) - lo)
    } else {
        let a = domain.length / 2.0;
        clipped_disc_area(hi, a) - clipped_disc_area(lo, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    /// Mean ordered-pair count per replica.
    pub count: f64,
    /// `ĝ(r)`: estimate of `k⁽²⁾` at separation `r`.
    pub g: f64,
    pub g_se: f64,
}

/// Replica-aggregated estimate at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub time: f64,
    pub density: f64,
    pub density_se: f64,
    pub bins: Vec<HistogramBin>,
    pub replicas: usize,
}

impl CorrelationEstimate {
    /// Aggregates per-replica configurations observed at `time`.
    pub fn from_samples(
        domain: &TorusDomain,
        time: f64,
        samples: &[&FiniteConfiguration],
        bins: usize,
    ) -> Self {
        let v = domain.volume();
        let densities: Vec<f64> = samples.iter().map(|c| c.len() as f64 / v).collect();
        let (density, density_se) = mean_se(&densities);
        let hists: Vec<PairHistogram> = samples
            .iter()
            .map(|c| PairHistogram::collect(domain, c, bins))
            .collect();
        let edges = PairHistogram::edges(domain, bins);
        let bins = (0..bins)
            .map(|k| {
                let shell = pair_shell_volume(domain, edges[k], edges[k + 1]);
                let counts: Vec<f64> = hists.iter().map(|h| h.counts[k] as f64).collect();
                let gs: Vec<f64> = counts.iter().map(|c| c / (v * shell)).collect();
                let (g, g_se) = mean_se(&gs);
                HistogramBin {
                    left: edges[k],
                    right: edges[k + 1],
                    count: counts.iter().sum::<f64>() / counts.len().max(1) as f64,
                    g,
                    g_se,
                }
            })
            .collect();
        Self {
            time,
            density,
            density_se,
            bins,
            replicas: samples.len(),
        }
    }
}

/// Sample mean and its standard error (NaN for fewer than two samples).
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
