use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::package::CubePackage;
use super::params::Params;
use crate::error::Result;
use crate::field::{derivative, holder_seminorm, CubicSpline, GridField, Interpolant, Region};
use crate::geom::slope_gap;

/// A zero scale only arises from a flat input, whose numerators are roundoff.
fn safe_div(num: f64, den: f64) -> f64 {
    if num == 0.0 || den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn max_abs(f: &GridField) -> f64 {
    let k = f.n();
    f.values()
        .chunks(k)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Norms of ζ_k on [−σ,σ]ᵐ; the `_scaled` entries are divided by E^{1/2}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub level: u32,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub holder_d3: f64,
    pub dist_u: f64,
    /// ‖Dζ‖_{C^{2,β}} = ‖Dζ‖ + ‖D²ζ‖ + ‖D³ζ‖ + [D³ζ]_β.
    pub c2beta: f64,
    pub c2beta_scaled: f64,
    pub holder_scaled: f64,
    pub dist_scaled: f64,
}

pub fn cm_norm_report(zeta: &GridField, u: &GridField, excess: f64, params: &Params, level: u32) -> Result<NormReport> {
    zeta.check_same_grid(u)?;
    let d1 = max_abs(&derivative(zeta, 1)?);
    let d2 = max_abs(&derivative(zeta, 2)?);
    let d3 = max_abs(&derivative(zeta, 3)?);
    let h = zeta.spacing();
    let holder_d3 = holder_seminorm(zeta, 3, params.beta, (h, 2.0 * params.sigma), &Region::Whole)?;
    let dist_u = max_abs(&zeta.combine(1.0, u, -1.0)?);
    let c2beta = d1 + d2 + d3 + holder_d3;
    let root = excess.sqrt();
    Ok(NormReport {
        level,
        d1,
        d2,
        d3,
        holder_d3,
        dist_u,
        c2beta,
        c2beta_scaled: safe_div(c2beta, root),
        holder_scaled: safe_div(holder_d3, root),
        dist_scaled: safe_div(dist_u, root),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeRow {
    pub level: u32,
    pub index: Vec<i64>,
    pub excess_l: f64,
    pub tilt: f64,
    /// |π⃗_L − π⃗_father|, 0 at N₀.
    pub tilt_father: f64,
    /// ‖Dⁱg_L‖/E^{1/2} for i = 1..3, then ‖D⁴g_L‖/(2^{(1−β)k}E^{1/2}).
    pub g_ratios: [f64; 4],
    /// ‖z_L − f_L‖_{L¹}/(E·ℓ^{m+3+2β}).
    pub zf_ratio: f64,
    /// ‖Δz_L‖_{C⁰}/(E·ℓ^{1+2β}).
    pub lap_ratio: f64,
    pub bad_measure: f64,
    pub lip_on_k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Father,
    Neighbor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub kind: PairKind,
    pub level: u32,
    pub index: Vec<i64>,
    pub other: Vec<i64>,
    /// ‖Dⁱ(g_L − g_K)‖·2^{(3+β−i)k}/E^{1/2} for i = 0..3 on the common domain.
    pub d_ratios: [f64; 4],
    /// ‖g_L − g_K‖_{L¹}/(E·ℓ^{m+3+β}).
    pub l1_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub level: u32,
    pub count: usize,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub name: String,
    pub max: f64,
    pub median: f64,
    pub per_level: Vec<LevelStat>,
}

fn summarize(name: &str, rows: &[(u32, f64)]) -> RatioSummary {
    let all: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mut levels: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for &(k, v) in rows {
        levels.entry(k).or_default().push(v);
    }
    RatioSummary {
        name: name.to_string(),
        max: all.iter().copied().fold(0.0, f64::max),
        median: median(&all),
        per_level: levels
            .into_iter()
            .map(|(level, v)| LevelStat {
                level,
                count: v.len(),
                median: median(&v),
                max: v.iter().copied().fold(0.0, f64::max),
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub excess: f64,
    pub beta: f64,
    pub cubes: Vec<CubeRow>,
    pub pairs: Vec<PairRow>,
    pub summaries: Vec<RatioSummary>,
    /// Fitted exponent of the per-level median E(L) against ℓ.
    pub excess_l_exponent: f64,
    /// max E(L)/(E·ℓ^{2−2δ}).
    pub excess_l_constant: f64,
    /// max |π⃗_L − π⃗₀|/E^{1/2}.
    pub tilt_constant: f64,
    /// max |π⃗_L − π⃗_father|/(E^{1/2}·ℓ^{1−δ}).
    pub tilt_father_constant: f64,
}

impl EstimateReport {
    pub fn summary(&self, name: &str) -> Option<&RatioSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    /// Largest ratio among the pair summaries.
    pub fn max_pair_ratio(&self) -> f64 {
        self.summaries
            .iter()
            .filter(|s| s.name.starts_with("father") || s.name.starts_with("neighbor"))
            .map(|s| s.max)
            .fold(0.0, f64::max)
    }
}

/// g_L − g_K on a box, sampled at spacing `h` with both maps interpolated.
fn difference_on_box(
    a: &CubicSpline,
    b: &CubicSpline,
    lo: &[f64],
    hi: &[f64],
    h: f64,
    n: usize,
) -> Result<GridField> {
    let dims: Vec<usize> = lo.iter().zip(hi).map(|(l, u)| ((u - l) / h).round() as usize + 1).collect();
    let mut va = vec![0.0; n];
    let mut vb = vec![0.0; n];
    let mut out = GridField::new(lo.len(), n, dims.clone(), lo.to_vec(), h, vec![0.0; dims.iter().product::<usize>() * n])?;
    let mut x = vec![0.0; lo.len()];
    for p in 0..out.len() {
        out.point_into(p, &mut x);
        for (xa, (l, u)) in x.iter_mut().zip(lo.iter().zip(hi)) {
            *xa = xa.clamp(*l, *u);
        }
        a.value(&x, &mut va)?;
        b.value(&x, &mut vb)?;
        for c in 0..n {
            out.value_mut(p)[c] = va[c] - vb[c];
        }
    }
    Ok(out)
}

fn pair_row(
    kind: PairKind,
    l: &CubePackage,
    k: &CubePackage,
    sl: &CubicSpline,
    sk: &CubicSpline,
    excess: f64,
    params: &Params,
) -> Result<PairRow> {
    let m = params.m;
    let ell = l.cube.side;
    let lo: Vec<f64> = (0..m)
        .map(|a| (l.cube.center[a] - ell).max(k.cube.center[a] - k.cube.side))
        .collect();
    let hi: Vec<f64> = (0..m)
        .map(|a| (l.cube.center[a] + ell).min(k.cube.center[a] + k.cube.side))
        .collect();
    let h = l.g_l.spacing();
    let diff = difference_on_box(sl, sk, &lo, &hi, h, params.n)?;
    let root = excess.sqrt();
    let j = l.cube.level as i32;
    let mut d_ratios = [0.0; 4];
    for (i, slot) in d_ratios.iter_mut().enumerate() {
        let norm = if i == 0 { max_abs(&diff) } else { max_abs(&derivative(&diff, i)?) };
        *slot = safe_div(norm * 2f64.powf((3.0 + params.beta - i as f64) * j as f64), root);
    }
    let l1: f64 = diff
        .weights(&Region::Whole)?
        .into_iter()
        .map(|(p, w)| w * diff.value(p).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    let l1_ratio = safe_div(l1, excess * ell.powf(m as f64 + 3.0 + params.beta));
    Ok(PairRow {
        kind,
        level: l.cube.level,
        index: l.cube.index.clone(),
        other: k.cube.index.clone(),
        d_ratios,
        l1_ratio,
    })
}

/// Scaled per-cube and per-pair estimates over all computed levels.
pub fn cube_estimate_report(
    levels: &[(u32, &BTreeMap<usize, CubePackage>)],
    neighbors: &dyn Fn(u32, usize) -> Vec<usize>,
    father: &dyn Fn(u32, usize) -> Option<usize>,
    excess: f64,
    params: &Params,
) -> Result<EstimateReport> {
    let (m, n) = (params.m, params.n);
    let root = excess.sqrt();
    let beta = params.beta;
    let by_level: BTreeMap<u32, &BTreeMap<usize, CubePackage>> = levels.iter().copied().collect();
    let mut splines: BTreeMap<(u32, usize), CubicSpline> = BTreeMap::new();
    for (&k, pkgs) in &by_level {
        for (&key, pkg) in pkgs.iter() {
            splines.insert((k, key), pkg.g_spline()?);
        }
    }
    let mut cubes = Vec::new();
    let mut pairs = Vec::new();
    for (&k, pkgs) in &by_level {
        for (&key, pkg) in pkgs.iter() {
            let ell = pkg.cube.side;
            let dg = &pkg.diagnostics;
            let mut g_ratios = [0.0; 4];
            for i in 0..3 {
                g_ratios[i] = safe_div(dg.g_norms[i], root);
            }
            g_ratios[3] = safe_div(dg.g_norms[3], 2f64.powf((1.0 - beta) * k as f64) * root);
            let parent = father(k, key).and_then(|f| by_level.get(&(k - 1)).and_then(|p| p.get(&f)));
            let tilt_father = parent.map_or(0.0, |f| slope_gap(pkg.plane.slope(), f.plane.slope(), n, m).sqrt());
            cubes.push(CubeRow {
                level: k,
                index: pkg.cube.index.clone(),
                excess_l: pkg.excess_l,
                tilt: pkg.tilt,
                tilt_father,
                g_ratios,
                zf_ratio: safe_div(dg.zf_l1, excess * ell.powf(m as f64 + 3.0 + 2.0 * beta)),
                lap_ratio: safe_div(dg.lap_z, excess * ell.powf(1.0 + 2.0 * beta)),
                bad_measure: pkg.bad_measure,
                lip_on_k: pkg.lip_on_k,
            });
            if let Some(fpkg) = parent {
                let fkey = father(k, key).unwrap();
                pairs.push(pair_row(
                    PairKind::Father,
                    pkg,
                    fpkg,
                    &splines[&(k, key)],
                    &splines[&(k - 1, fkey)],
                    excess,
                    params,
                )?);
            }
            for nb in neighbors(k, key) {
                if nb <= key {
                    continue;
                }
                if let Some(other) = pkgs.get(&nb) {
                    pairs.push(pair_row(
                        PairKind::Neighbor,
                        pkg,
                        other,
                        &splines[&(k, key)],
                        &splines[&(k, nb)],
                        excess,
                        params,
                    )?);
                }
            }
        }
    }

    let mut summaries = Vec::new();
    for i in 0..4 {
        let rows: Vec<(u32, f64)> = cubes.iter().map(|c| (c.level, c.g_ratios[i])).collect();
        summaries.push(summarize(&format!("g_d{}", i + 1), &rows));
    }
    summaries.push(summarize(
        "zf_l1",
        &cubes.iter().map(|c| (c.level, c.zf_ratio)).collect::<Vec<_>>(),
    ));
    summaries.push(summarize(
        "lap_z",
        &cubes.iter().map(|c| (c.level, c.lap_ratio)).collect::<Vec<_>>(),
    ));
    for (kind, label) in [(PairKind::Father, "father"), (PairKind::Neighbor, "neighbor")] {
        let sel: Vec<&PairRow> = pairs.iter().filter(|p| p.kind == kind).collect();
        if sel.is_empty() {
            continue;
        }
        for i in 0..4 {
            let rows: Vec<(u32, f64)> = sel.iter().map(|p| (p.level, p.d_ratios[i])).collect();
            summaries.push(summarize(&format!("{label}_d{i}"), &rows));
        }
        let rows: Vec<(u32, f64)> = sel.iter().map(|p| (p.level, p.l1_ratio)).collect();
        summaries.push(summarize(&format!("{label}_l1"), &rows));
    }

    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &k in by_level.keys() {
        let v: Vec<f64> = cubes.iter().filter(|c| c.level == k).map(|c| c.excess_l).collect();
        let med = median(&v);
        if med > 0.0 {
            lx.push(params.side(k).ln());
            ly.push(med.ln());
        }
    }
    let excess_l_exponent = if lx.len() >= 2 { fit_slope(&lx, &ly) } else { f64::NAN };
    let excess_l_constant = cubes
        .iter()
        .map(|c| safe_div(c.excess_l, excess * params.side(c.level).powf(2.0 - 2.0 * params.delta)))
        .fold(0.0, f64::max);
    let tilt_constant = cubes.iter().map(|c| safe_div(c.tilt, root)).fold(0.0, f64::max);
    let tilt_father_constant = cubes
        .iter()
        .map(|c| safe_div(c.tilt_father, root * params.side(c.level).powf(1.0 - params.delta)))
        .fold(0.0, f64::max);
    Ok(EstimateReport {
        excess,
        beta,
        cubes,
        pairs,
        summaries,
        excess_l_exponent,
        excess_l_constant,
        tilt_constant,
        tilt_father_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        assert!((fit_slope(&x, &y) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn norm_report_of_a_quadratic() {
        let p = Params::new(2, 1).validate().unwrap();
        let z = GridField::from_fn(1, vec![41, 41], vec![-0.4, -0.4], 0.02, |x, o| {
            o[0] = x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1]
        })
        .unwrap();
        let r = cm_norm_report(&z, &z, 0.04, &p, 4).unwrap();
        assert_eq!(r.dist_u, 0.0);
        // one-sided and central second-order stencils are exact on quadratics
        let d2 = (4.0f64 + 4.0 + 4.0).sqrt();
        assert!((r.d2 - d2).abs() < 1e-9, "{}", r.d2);
        assert!(r.d3 < 1e-8 && r.holder_d3 < 1e-6);
        let shifted = z.map_values(|v| v + 1e-3);
        assert!((cm_norm_report(&shifted, &z, 0.04, &p, 4).unwrap().dist_u - 1e-3).abs() < 1e-15);
        assert!((r.c2beta_scaled - r.c2beta / 0.2).abs() < 1e-12);
    }
}
