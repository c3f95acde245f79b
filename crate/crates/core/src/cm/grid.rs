use serde::{Deserialize, Serialize};

use super::params::Params;
use crate::error::{Error, Result};

/// Closed cube of 𝒞_k: [−σ,σ]ᵐ split into 2^k cubes per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: Vec<i64>,
    pub center: Vec<f64>,
    pub side: f64,
}

impl DyadicCube {
    pub fn new(params: &Params, level: u32, index: Vec<i64>) -> Result<Self> {
        let per_axis = 1i64 << level;
        if index.len() != params.m || index.iter().any(|&i| i < 0 || i >= per_axis) {
            return Err(Error::Precondition(format!("cube index {index:?} outside level {level}")));
        }
        let side = params.side(level);
        let center = index.iter().map(|&i| -params.sigma + (i as f64 + 0.5) * side).collect();
        Ok(DyadicCube {
            level,
            index,
            center,
            side,
        })
    }

    pub fn father_index(&self) -> Option<Vec<i64>> {
        (self.level > 0).then(|| self.index.iter().map(|i| i >> 1).collect())
    }

    pub fn children_indices(&self) -> Vec<Vec<i64>> {
        let m = self.index.len();
        (0..1usize << m)
            .map(|bits| (0..m).map(|a| 2 * self.index[a] + ((bits >> (m - 1 - a)) & 1) as i64).collect())
            .collect()
    }

    /// Same-level cubes sharing at least a point with this one.
    pub fn neighbor_indices(&self) -> Vec<Vec<i64>> {
        let m = self.index.len();
        let per_axis = 1i64 << self.level;
        let mut out = Vec::new();
        for t in 0..3usize.pow(m as u32) {
            let mut rem = t;
            let mut idx = Vec::with_capacity(m);
            for a in 0..m {
                let o = (rem % 3) as i64 - 1;
                rem /= 3;
                idx.push(self.index[a] + o);
            }
            if idx == self.index || idx.iter().any(|&i| i < 0 || i >= per_axis) {
                continue;
            }
            out.push(idx);
        }
        out.sort();
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center)
            .all(|(a, c)| (a - c).abs() <= 0.5 * self.side * (1.0 + 1e-12))
    }

    /// Row-major position within its level.
    pub fn flat(&self) -> usize {
        flat_index(&self.index, self.level)
    }
}

pub fn flat_index(index: &[i64], level: u32) -> usize {
    let per_axis = 1usize << level;
    index.iter().fold(0usize, |acc, &i| acc * per_axis + i as usize)
}

fn unflat_index(mut p: usize, m: usize, level: u32) -> Vec<i64> {
    let per_axis = 1usize << level;
    let mut idx = vec![0i64; m];
    for a in (0..m).rev() {
        idx[a] = (p % per_axis) as i64;
        p /= per_axis;
    }
    idx
}

/// One level of the hierarchy with flat links into the neighbouring levels.
#[derive(Clone, Debug)]
pub struct Level {
    pub k: u32,
    pub cubes: Vec<DyadicCube>,
    /// Position of the father in the previous level, None at N₀.
    pub father: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub neighbors: Vec<Vec<usize>>,
}

/// All levels N₀..=k_max.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub n0: u32,
    pub levels: Vec<Level>,
}

impl Hierarchy {
    pub fn level(&self, k: u32) -> Option<&Level> {
        k.checked_sub(self.n0).and_then(|i| self.levels.get(i as usize))
    }
}

pub fn build_grid(params: &Params) -> Result<Hierarchy> {
    if params.k_max < params.n0 {
        return Err(Error::Params(format!("k_max = {} below N0 = {}", params.k_max, params.n0)));
    }
    let m = params.m;
    let mut levels = Vec::new();
    for k in params.n0..=params.k_max {
        let count = 1usize << (m as u32 * k);
        let cubes = (0..count)
            .map(|p| DyadicCube::new(params, k, unflat_index(p, m, k)))
            .collect::<Result<Vec<_>>>()?;
        let father = cubes
            .iter()
            .map(|c| (k > params.n0).then(|| flat_index(&c.father_index().unwrap(), k - 1)))
            .collect();
        let children = if k < params.k_max {
            cubes
                .iter()
                .map(|c| c.children_indices().iter().map(|i| flat_index(i, k + 1)).collect())
                .collect()
        } else {
            vec![Vec::new(); count]
        };
        let neighbors = cubes
            .iter()
            .map(|c| c.neighbor_indices().iter().map(|i| flat_index(i, k)).collect())
            .collect();
        levels.push(Level {
            k,
            cubes,
            father,
            children,
            neighbors,
        });
    }
    Ok(Hierarchy {
        n0: params.n0,
        levels,
    })
}
