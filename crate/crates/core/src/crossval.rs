//! Monte Carlo `ĝ(r)` against the hierarchy's `k⁽²⁾` on shared radial bins.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::CorrelationVector;
use crate::simulator::CorrelationEstimate;

/// Fraction of bins that must agree for a passing comparison.
pub const REQUIRED_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparedBin {
    pub left: f64,
    pub right: f64,
    pub mc_g: f64,
    pub mc_se: f64,
    pub hierarchy_g: f64,
    /// `|ĝ − k⁽²⁾| / se`; infinite when `se = 0` and the values differ.
    pub z: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub time: f64,
    pub threshold: f64,
    pub bins: Vec<ComparedBin>,
    pub fraction_within: f64,
    pub max_z: f64,
    pub pass: bool,
}

/// Compares each bin of `mc` with the mean of `k⁽²⁾` over grid separations
/// in that bin. Bins containing no grid separation are skipped.
pub fn compare_pair(
    mc: &CorrelationEstimate,
    k: &CorrelationVector,
    threshold: f64,
) -> Result<Comparison> {
    if k.max_order() < 2 {
        return Err(Error::param("hierarchy state carries no pair function"));
    }
    if mc.replicas < 2 {
        return Err(Error::param("standard errors need at least two replicas"));
    }
    let bins: Vec<ComparedBin> = mc
        .bins
        .iter()
        .filter_map(|b| {
            let h = k.pair_bin_average(b.left, b.right)?;
            let diff = (b.g - h).abs();
            let z = if b.g_se > 0.0 {
                diff / b.g_se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Some(ComparedBin {
                left: b.left,
                right: b.right,
                mc_g: b.g,
                mc_se: b.g_se,
                hierarchy_g: h,
                z,
                within: z <= threshold,
            })
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::param("no histogram bin contains a grid separation"));
    }
    let within = bins.iter().filter(|b| b.within).count();
    let fraction_within = within as f64 / bins.len() as f64;
    Ok(Comparison {
        time: mc.time,
        threshold,
        max_z: bins.iter().map(|b| b.z).fold(0.0, f64::max),
        pass: fraction_within >= REQUIRED_FRACTION,
        bins,
        fraction_within,
    })
}
