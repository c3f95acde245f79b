//! Dyadic cubes, per-cube interpolating functions and their glued interpolation.

pub mod glue;
pub mod grid;
pub mod package;
pub mod params;
pub mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use glue::{glued_interpolation, needed_cubes, sample_grid};
pub use grid::{build_grid, DyadicCube, Hierarchy, Level};
pub use package::{cube_package, CmContext, CubeDiagnostics, CubePackage};
pub use params::Params;
pub use report::{cm_norm_report, cube_estimate_report, EstimateReport, NormReport};

use crate::error::{Error, Result};
use crate::field::{unit_ball_volume, GridField, Region};

/// Vol(gr(u, B₁)) − ω_m, with roundoff-sized values set to zero.
pub fn graph_excess(u: &GridField) -> Result<f64> {
    let zero = vec![0.0; u.m()];
    let e = crate::area::area(u, &Region::ball(&zero, 1.0))? - unit_ball_volume(u.m());
    Ok(if e.abs() < crate::area::ZERO_EXCESS { 0.0 } else { e })
}

pub struct LevelRun {
    pub k: u32,
    pub packages: BTreeMap<usize, CubePackage>,
    pub zeta: GridField,
    pub partition_deviation: f64,
    pub norms: NormReport,
}

pub struct CmRun {
    pub params: Params,
    pub excess: f64,
    /// u on the sample grid over [−σ,σ]ᵐ.
    pub u_samples: GridField,
    pub hierarchy: Hierarchy,
    pub levels: Vec<LevelRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmSummary {
    pub params: Params,
    pub excess: f64,
    pub cube_counts: Vec<(u32, usize)>,
    pub partition_deviation: f64,
    pub norms: Vec<NormReport>,
    /// ‖ζ_{k+1} − ζ_k‖_{C⁰} for consecutive levels.
    pub level_gaps: Vec<f64>,
}

impl CmRun {
    pub fn level(&self, k: u32) -> Option<&LevelRun> {
        self.levels.iter().find(|l| l.k == k)
    }

    pub fn level_gaps(&self) -> Result<Vec<f64>> {
        self.levels
            .windows(2)
            .map(|w| {
                let d = w[1].zeta.combine(1.0, &w[0].zeta, -1.0)?;
                Ok(d.values()
                    .chunks(d.n())
                    .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max))
            })
            .collect()
    }

    pub fn estimates(&self) -> Result<EstimateReport> {
        let levels: Vec<(u32, &BTreeMap<usize, CubePackage>)> = self.levels.iter().map(|l| (l.k, &l.packages)).collect();
        let h = &self.hierarchy;
        let neighbors = |k: u32, key: usize| h.level(k).map_or(Vec::new(), |l| l.neighbors[key].clone());
        let father = |k: u32, key: usize| h.level(k).and_then(|l| l.father[key]);
        cube_estimate_report(&levels, &neighbors, &father, self.excess, &self.params)
    }

    pub fn summary(&self) -> Result<CmSummary> {
        Ok(CmSummary {
            params: self.params.clone(),
            excess: self.excess,
            cube_counts: self.levels.iter().map(|l| (l.k, l.packages.len())).collect(),
            partition_deviation: self.levels.iter().map(|l| l.partition_deviation).fold(0.0, f64::max),
            norms: self.levels.iter().map(|l| l.norms.clone()).collect(),
            level_gaps: self.level_gaps()?,
        })
    }
}

/// Packages for every level-k cube whose bump reaches a node of [−σ,σ]ᵐ,
/// glued into ζ_k, for k = N₀..=k_max.
pub fn run_center_manifold(u: &GridField, params: Params) -> Result<CmRun> {
    let ctx = CmContext::new(u, params)?;
    let params = ctx.params.clone();
    let excess = graph_excess(u)?;
    let samples = sample_grid(u, &params)?;
    let hierarchy = build_grid(&params)?;
    let mut levels = Vec::new();
    for level in &hierarchy.levels {
        let k = level.k;
        let mut packages = BTreeMap::new();
        for key in needed_cubes(&params, k, &samples) {
            packages.insert(key, cube_package(&ctx, &level.cubes[key], false)?);
        }
        let (zeta, partition_deviation) = glued_interpolation(&params, k, &packages, &samples)?;
        if partition_deviation > 1e-12 {
            return Err(Error::Certificate {
                clause: format!("partition of unity at level {k}"),
                measured: partition_deviation,
                bound: 1e-12,
            });
        }
        let norms = cm_norm_report(&zeta, &samples, excess, &params, k)?;
        levels.push(LevelRun {
            k,
            packages,
            zeta,
            partition_deviation,
            norms,
        });
    }
    Ok(CmRun {
        params,
        excess,
        u_samples: samples,
        hierarchy,
        levels,
    })
}
