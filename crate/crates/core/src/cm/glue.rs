use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use super::grid::DyadicCube;
use super::package::CubePackage;
use super::params::Params;
use crate::error::{Error, Result};
use crate::field::{CubicSpline, GridField, Interpolant};

/// Half-width of the bump support in units of ℓ(L)/2.
pub const BUMP_REACH: f64 = 9.0 / 8.0;

fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// One-dimensional profile: 1 on [−1,1], 0 outside (−9/8, 9/8), C^∞ in between.
pub fn bump_1d(t: f64) -> f64 {
    smooth_step((BUMP_REACH - t.abs()) / (BUMP_REACH - 1.0))
}

/// ϑ(y) = Πₐ bump(yₐ).
pub fn bump(y: &[f64]) -> f64 {
    y.iter().map(|&t| bump_1d(t)).product()
}

/// ϑ_L(x) = ϑ(2(x − x_L)/ℓ(L)).
pub fn cube_bump(cube: &DyadicCube, x: &[f64]) -> f64 {
    let y: Vec<f64> = x.iter().zip(&cube.center).map(|(a, c)| 2.0 * (a - c) / cube.side).collect();
    bump(&y)
}

/// Per axis, the cube indices at level k whose bump support contains coordinate x.
fn candidate_range(params: &Params, k: u32, x: f64) -> std::ops::RangeInclusive<i64> {
    let side = params.side(k);
    let per_axis = 1i64 << k;
    let t = (x + params.sigma) / side - 0.5;
    let half = 0.5 * BUMP_REACH;
    let lo = ((t - half).floor() as i64).max(0);
    let hi = ((t + half).ceil() as i64).min(per_axis - 1);
    lo..=hi
}

/// Level-k cubes whose bump is nonzero at x, as index vectors.
pub fn active_cubes(params: &Params, k: u32, x: &[f64]) -> Vec<Vec<i64>> {
    let ranges: Vec<Vec<i64>> = x.iter().map(|&v| candidate_range(params, k, v).collect()).collect();
    let mut out = vec![Vec::new()];
    for r in &ranges {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                r.iter().map(move |&i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out.retain(|idx| {
        let cube = DyadicCube::new(params, k, idx.clone()).expect("index in range");
        cube_bump(&cube, x) > 0.0
    });
    out
}

/// Nodes of `u` inside [−σ,σ]ᵐ, subsampled to roughly `params.sample_spacing`.
pub fn sample_grid(u: &GridField, params: &Params) -> Result<GridField> {
    let h = u.spacing();
    let stride = ((params.sample_spacing / h) * (1.0 + 1e-9)).floor().max(1.0) as usize;
    let tol = 1e-9 * h;
    let mut start = Vec::new();
    let mut dims = Vec::new();
    for a in 0..u.m() {
        let first = ((-params.sigma - u.origin()[a] - tol) / h).ceil().max(0.0) as usize;
        let last = ((params.sigma - u.origin()[a] + tol) / h).floor() as usize;
        if last >= u.dims()[a] || last < first {
            return Err(Error::DomainEscape("base grid does not cover [−σ,σ]ᵐ".into()));
        }
        // centre the strided nodes in the window
        let span = last - first;
        let count = span / stride;
        start.push(first + (span - count * stride) / 2);
        dims.push(count + 1);
    }
    let span: Vec<usize> = dims.iter().map(|d| (d - 1) * stride + 1).collect();
    let win = u.window(&start, &span)?;
    if stride == 1 {
        return Ok(win);
    }
    let n = u.n();
    let mut values = Vec::with_capacity(dims.iter().product::<usize>() * n);
    let total: usize = dims.iter().product();
    let mut idx = vec![0usize; u.m()];
    for p in 0..total {
        let mut rem = p;
        for a in (0..u.m()).rev() {
            idx[a] = (rem % dims[a]) * stride;
            rem /= dims[a];
        }
        values.extend_from_slice(win.value(win.flat(&idx)));
    }
    GridField::new(u.m(), n, dims, win.origin().to_vec(), h * stride as f64, values)
}

/// Flat indices of the level-k cubes needed by the glued interpolation on `samples`.
pub fn needed_cubes(params: &Params, k: u32, samples: &GridField) -> Vec<usize> {
    let mut set = std::collections::BTreeSet::new();
    let mut x = vec![0.0; samples.m()];
    for p in 0..samples.len() {
        samples.point_into(p, &mut x);
        for idx in active_cubes(params, k, &x) {
            set.insert(super::grid::flat_index(&idx, k));
        }
    }
    set.into_iter().collect()
}

/// ζ_k = Σ ϑ_L g_L / Σ ϑ_L on the nodes of `samples`, and the largest
/// deviation of Σθ_L from 1.
pub fn glued_interpolation(
    params: &Params,
    k: u32,
    packages: &BTreeMap<usize, CubePackage>,
    samples: &GridField,
) -> Result<(GridField, f64)> {
    let n = params.n;
    let mut splines: BTreeMap<usize, CubicSpline> = BTreeMap::new();
    let mut zeta = samples.zeros_like(n);
    let mut x = vec![0.0; samples.m()];
    let mut gv = vec![0.0; n];
    let mut pou_dev = 0.0f64;
    for p in 0..samples.len() {
        samples.point_into(p, &mut x);
        let mut weights = Vec::new();
        for idx in active_cubes(params, k, &x) {
            let key = super::grid::flat_index(&idx, k);
            let pkg = packages
                .get(&key)
                .ok_or_else(|| Error::Empty(format!("no package for cube {k}:{idx:?}")))?;
            weights.push((key, cube_bump(&pkg.cube, &x)));
        }
        let den: f64 = weights.iter().map(|w| w.1).sum();
        if den < 1.0 - 1e-12 {
            return Err(Error::Certificate {
                clause: format!("partition denominator at {x:?}"),
                measured: den,
                bound: 1.0,
            });
        }
        let mut acc = vec![0.0; n];
        let mut theta_sum = 0.0;
        for (key, w) in weights {
            let theta = w / den;
            theta_sum += theta;
            let spline = match splines.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(packages[&key].g_spline()?),
            };
            spline.value(&x, &mut gv)?;
            for c in 0..n {
                acc[c] += theta * gv[c];
            }
        }
        pou_dev = pou_dev.max((theta_sum - 1.0).abs());
        zeta.value_mut(p).copy_from_slice(&acc);
    }
    Ok((zeta, pou_dev))
}
