use serde::{Deserialize, Serialize};

use crate::area::{graph_point, Graph};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::geom::NearHorizontalPlane;

pub use crate::area::ZERO_EXCESS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub radius: f64,
    pub plane: NearHorizontalPlane,
    pub excess: f64,
    /// E(B_r)/E(B_{2r}); absent on the first row.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub center: Vec<f64>,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of log E against log r.
    pub slope: Option<f64>,
    pub exact_zero: bool,
}

impl DecayTable {
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.ratio).reduce(f64::max)
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Optimal-plane spherical excess of gr(u) in 𝐁_{r₀2^{−j}}(p), j = 0..=depth,
/// with p = (x, u(x)).
pub fn excess_decay_sweep(u: &GridField, x: &[f64], r0: f64, depth: usize) -> Result<DecayTable> {
    if !(r0 > 0.0) {
        return Err(Error::Precondition(format!("radius {r0} must be positive")));
    }
    let graph = Graph::new(u)?;
    let p = graph_point(u, x)?;
    let mut rows: Vec<DecayRow> = Vec::with_capacity(depth + 1);
    let mut seed: Option<Vec<f64>> = None;
    for j in 0..=depth {
        let r = r0 * 0.5f64.powi(j as i32);
        let (plane, report) = graph.optimal_plane(&p, r, seed.as_deref())?;
        seed = Some(plane.slope().to_vec());
        let ratio = rows.last().map(|prev| {
            if prev.excess > 0.0 {
                report.value / prev.excess
            } else {
                0.0
            }
        });
        rows.push(DecayRow {
            radius: r,
            plane,
            excess: report.value,
            ratio,
        });
    }
    let exact_zero = rows.iter().all(|r| r.excess < ZERO_EXCESS);
    let slope = if rows.iter().any(|r| r.excess < ZERO_EXCESS) {
        None
    } else {
        let lx: Vec<f64> = rows.iter().map(|r| r.radius.ln()).collect();
        let ly: Vec<f64> = rows.iter().map(|r| r.excess.ln()).collect();
        fit_slope(&lx, &ly)
    };
    Ok(DecayTable {
        center: p,
        rows,
        slope,
        exact_zero,
    })
}
