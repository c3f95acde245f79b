//! Maximal-function truncation and the McShane extension: the Eᵞ-Lipschitz
//! approximation of a graph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{cell_ball_measure, dirichlet_energy, gradient, lipschitz_constant, unflatten, GridField, Region};

/// 2h, 4h, 8h, … below `r_max`, then `r_max` itself.
pub fn radius_ladder(h: f64, r_max: f64) -> Result<Vec<f64>> {
    if r_max < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("r_max = {r_max} below two grid spacings ({h})")));
    }
    let mut out = Vec::new();
    let mut r = 2.0 * h;
    while r < r_max * (1.0 - 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out.push(r_max);
    Ok(out)
}

/// sup over the dyadic ladder of r⁻ᵐ∫_{B_r(y)} g.
pub fn maximal_function(g: &GridField, r_max: f64) -> Result<GridField> {
    let radii = radius_ladder(g.spacing(), r_max)?;
    maximal_function_over(g, &radii)
}

/// sup over the given radii of r⁻ᵐ∫_{B_r(y)} g, disks clipped to the grid.
pub fn maximal_function_over(g: &GridField, radii: &[f64]) -> Result<GridField> {
    let nodes: Vec<usize> = (0..g.len()).filter(|&p| g.is_active(p)).collect();
    let vals = maximal_function_at(g, radii, &nodes)?;
    let mut out = vec![0.0f64; g.len()];
    for (&p, v) in nodes.iter().zip(vals) {
        out[p] = v;
    }
    let res = GridField::new(g.m(), 1, g.dims().to_vec(), g.origin().to_vec(), g.spacing(), out)?;
    match g.mask() {
        Some(mk) => res.with_mask(mk.to_vec()),
        None => Ok(res),
    }
}

/// The maximal function at the listed nodes only, in the same order.
pub fn maximal_function_at(g: &GridField, radii: &[f64], nodes: &[usize]) -> Result<Vec<f64>> {
    if g.n() != 1 {
        return Err(Error::Precondition("maximal function needs a scalar field".into()));
    }
    if g.values().iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("maximal function needs g ≥ 0".into()));
    }
    let m = g.m();
    let h = g.spacing();
    let dims = g.dims().to_vec();
    let strides = g.strides();
    let lo = g.origin().to_vec();
    let up = g.upper();
    let vals = g.values();
    let mut out = vec![0.0f64; nodes.len()];
    let mut idx = vec![0usize; m];
    let mut qi = vec![0usize; m];
    let mut clo = vec![0.0; m];
    let mut chi = vec![0.0; m];
    let mut y = vec![0.0; m];
    for &r in radii {
        let reach = (r / h + 1.0).ceil() as i64;
        let side = (2 * reach + 1) as usize;
        let box_dims = vec![side; m];
        let zero = vec![0.0; m];
        // unclipped dual-cell weights around a node at the origin
        let mut stencil: Vec<(Vec<i64>, isize, f64)> = Vec::new();
        let mut t_idx = vec![0usize; m];
        for t in 0..side.pow(m as u32) {
            unflatten(t, &box_dims, &mut t_idx);
            let off: Vec<i64> = t_idx.iter().map(|&i| i as i64 - reach).collect();
            for a in 0..m {
                clo[a] = (off[a] as f64 - 0.5) * h;
                chi[a] = (off[a] as f64 + 0.5) * h;
            }
            let w = cell_ball_measure(&clo, &chi, &zero, r);
            if w > 0.0 {
                let flat: isize = off.iter().zip(&strides).map(|(o, s)| *o as isize * *s as isize).sum();
                stencil.push((off, flat, w));
            }
        }
        let norm = r.powi(m as i32);
        for (slot, &p) in out.iter_mut().zip(nodes) {
            if !g.is_active(p) {
                continue;
            }
            unflatten(p, &dims, &mut idx);
            // stencil strictly inside the grid: no clipping, no bounds checks
            let interior = (0..m).all(|a| idx[a] as i64 - reach > 0 && idx[a] as i64 + reach < dims[a] as i64 - 1);
            let mut s = 0.0;
            if interior && g.mask().is_none() {
                for (_, flat, w) in &stencil {
                    s += w * vals[(p as isize + flat) as usize];
                }
            } else {
                g.point_into(p, &mut y);
                'stencil: for (off, _, w) in &stencil {
                    let mut q = 0usize;
                    let mut edge = false;
                    for a in 0..m {
                        let j = idx[a] as i64 + off[a];
                        if j < 0 || j >= dims[a] as i64 {
                            continue 'stencil;
                        }
                        qi[a] = j as usize;
                        edge |= j == 0 || j + 1 == dims[a] as i64;
                        q += qi[a] * strides[a];
                    }
                    if !g.is_active(q) {
                        continue;
                    }
                    let wt = if edge {
                        for a in 0..m {
                            let x = lo[a] + qi[a] as f64 * h;
                            clo[a] = (x - 0.5 * h).max(lo[a]);
                            chi[a] = (x + 0.5 * h).min(up[a]);
                        }
                        cell_ball_measure(&clo, &chi, &y, r)
                    } else {
                        *w
                    };
                    s += wt * vals[q];
                }
            }
            *slot = slot.max(s / norm);
        }
    }
    Ok(out)
}

/// |{M > t}|·t / ∫g, the measured weak-L¹ constant; Vitali covering bounds it by 5ᵐω_m.
pub fn weak_l1_constant(g: &GridField, maximal: &GridField, t: f64) -> Result<f64> {
    g.check_same_grid(maximal)?;
    let w = g.weights(&Region::Whole)?;
    let total: f64 = w.iter().map(|&(p, wt)| wt * g.values()[p]).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let level: f64 = w.iter().filter(|&&(p, _)| maximal.values()[p] > t).map(|&(_, wt)| wt).sum();
    Ok(level * t / total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipApproxParams {
    pub gamma: f64,
    /// Truncation exponent; the good set is {M|Dv|² ≤ E^{2λ}}.
    pub lambda: f64,
    /// Largest admissible excess.
    pub eps_bar: f64,
    /// Largest radius of the maximal function; defaults to r/2.
    pub r_max: Option<f64>,
}

impl Default for LipApproxParams {
    fn default() -> Self {
        LipApproxParams {
            gamma: 1.0 / 16.0,
            lambda: 1.0 / 16.0,
            eps_bar: 0.05,
            r_max: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LipApproxResult {
    /// 1 on the good set K, 0 elsewhere.
    pub k_mask: GridField,
    pub w: GridField,
    pub excess_e: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub threshold: f64,
    /// |B_ρ \ K|.
    pub bad_measure: f64,
    pub lip_on_k: f64,
    pub lip_w: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub rho: f64,
    /// ½∫_{B_ρ}|Dw|².
    pub half_energy_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipApproxSummary {
    pub excess_e: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub threshold: f64,
    pub bad_measure: f64,
    pub bad_measure_ratio: f64,
    pub lip_on_k: f64,
    pub lip_w: f64,
    pub k_points: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub rho: f64,
    pub half_energy_w: f64,
}

impl LipApproxResult {
    pub fn k_points(&self) -> usize {
        self.k_mask.values().iter().filter(|&&v| v == 1.0).count()
    }

    /// |B_ρ \ K| / (rᵐ E^{1+γ}).
    pub fn bad_measure_ratio(&self) -> f64 {
        let m = self.w.m() as i32;
        self.bad_measure / (self.radius.powi(m) * self.excess_e.powf(1.0 + self.gamma))
    }

    pub fn summary(&self) -> LipApproxSummary {
        LipApproxSummary {
            excess_e: self.excess_e,
            gamma: self.gamma,
            lambda: self.lambda,
            threshold: self.threshold,
            bad_measure: self.bad_measure,
            bad_measure_ratio: self.bad_measure_ratio(),
            lip_on_k: self.lip_on_k,
            lip_w: self.lip_w,
            k_points: self.k_points(),
            center: self.center.clone(),
            radius: self.radius,
            rho: self.rho,
            half_energy_w: self.half_energy_w,
        }
    }
}

/// Lipschitz constant of `f` restricted to `nodes`, over all pairs.
pub fn lipschitz_on(f: &GridField, nodes: &[usize]) -> f64 {
    let n = f.n();
    let pts: Vec<Vec<f64>> = nodes.iter().map(|&p| f.point(p)).collect();
    let mut best: f64 = 0.0;
    for i in 0..nodes.len() {
        let vi = f.value(nodes[i]);
        for j in i + 1..nodes.len() {
            let vj = f.value(nodes[j]);
            let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let g2: f64 = (0..n).map(|c| (vi[c] - vj[c]) * (vi[c] - vj[c])).sum();
            // compare squares to skip the square roots
            if g2 > best * best * d2 {
                best = (g2 / d2).sqrt();
            }
        }
    }
    best
}

/// Componentwise McShane extension min_{y∈K}(v(y) + L|x − y|) onto the grid of `v`.
pub fn mcshane_extension(v: &GridField, nodes: &[usize], lip: f64) -> Result<GridField> {
    mcshane_window(v, nodes, lip, &vec![0; v.m()], v.dims())
}

/// The McShane extension evaluated on the sub-grid `start..start+dims` of `v` only.
pub fn mcshane_window(v: &GridField, nodes: &[usize], lip: f64, start: &[usize], dims: &[usize]) -> Result<GridField> {
    if nodes.is_empty() {
        return Err(Error::Empty("McShane extension from an empty set".into()));
    }
    let n = v.n();
    let mut in_k = vec![false; v.len()];
    for &p in nodes {
        in_k[p] = true;
    }
    let pts: Vec<Vec<f64>> = nodes.iter().map(|&p| v.point(p)).collect();
    let mut out = v.window(start, dims)?;
    let m = v.m();
    let mut idx = vec![0usize; m];
    let mut best = vec![0.0; n];
    let mut x = vec![0.0; m];
    for t in 0..out.len() {
        unflatten(t, dims, &mut idx);
        idx.iter_mut().zip(start).for_each(|(i, s)| *i += s);
        let p = v.flat(&idx);
        if in_k[p] {
            continue;
        }
        v.point_into(p, &mut x);
        best.iter_mut().for_each(|b| *b = f64::INFINITY);
        for (k, &q) in nodes.iter().enumerate() {
            let d: f64 = x.iter().zip(&pts[k]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let vq = v.value(q);
            for c in 0..n {
                best[c] = best[c].min(vq[c] + lip * d);
            }
        }
        out.value_mut(t).copy_from_slice(&best);
    }
    Ok(out)
}

/// The good set K of the approximation, before extension.
#[derive(Clone, Debug)]
pub struct GoodSet {
    pub nodes: Vec<usize>,
    pub excess_e: f64,
    pub threshold: f64,
    pub rho: f64,
    pub bad_measure: f64,
    pub lip_on_k: f64,
}

/// K := {M|Dv|² ≤ E^{2λ}} ∩ B_ρ(x) with ρ = r(1 − Eᵞ), together with |B_ρ \ K|
/// and Lip(v|_K) over all pairs.
pub fn good_set(v: &GridField, center: &[f64], r: f64, excess: f64, params: &LipApproxParams) -> Result<GoodSet> {
    if !(excess >= 0.0) || excess > params.eps_bar {
        return Err(Error::Precondition(format!(
            "excess {excess:e} outside [0, ε̄ = {:e}]",
            params.eps_bar
        )));
    }
    if v.mask().is_some() {
        return Err(Error::Precondition("Lipschitz approximation needs an unmasked grid".into()));
    }
    let lip_v = lipschitz_constant(v);
    if lip_v > 2.0 {
        return Err(Error::Precondition(format!("Lip(v) = {lip_v:.4} exceeds 2")));
    }
    let rho = r * (1.0 - excess.powf(params.gamma));
    let threshold = excess.powf(2.0 * params.lambda);
    let grad = gradient(v)?;
    let g2 = grad.pointwise_norm().map_values(|x| x * x);
    let radii = radius_ladder(v.spacing(), params.r_max.unwrap_or(0.5 * r))?;
    let weights = v.weights(&Region::ball(center, rho))?;
    let mut candidates: Vec<usize> = weights.iter().map(|&(p, _)| p).collect();
    let mut x = vec![0.0; v.m()];
    for p in 0..v.len() {
        v.point_into(p, &mut x);
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 <= rho * rho {
            candidates.push(p);
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    let maximal = maximal_function_at(&g2, &radii, &candidates)?;
    let mut m_at = vec![f64::NAN; v.len()];
    for (&p, val) in candidates.iter().zip(maximal) {
        m_at[p] = val;
    }
    let bad_measure: f64 = weights.iter().filter(|&&(p, _)| m_at[p] > threshold).fold(0.0, |acc, &(_, wt)| acc + wt);
    let nodes: Vec<usize> = candidates
        .into_iter()
        .filter(|&p| {
            v.point_into(p, &mut x);
            let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 <= rho * rho && m_at[p] <= threshold
        })
        .collect();
    if nodes.is_empty() {
        return Err(Error::Empty("good set K is empty".into()));
    }
    let lip_on_k = lipschitz_on(v, &nodes);
    Ok(GoodSet {
        nodes,
        excess_e: excess,
        threshold,
        rho,
        bad_measure,
        lip_on_k,
    })
}

/// K := {M|Dv|² ≤ E^{2λ}} ∩ B_ρ(x) with ρ = r(1 − Eᵞ), and the McShane
/// extension of v|_K with L = Lip(v|_K).
pub fn lipschitz_approximation(
    v: &GridField,
    center: &[f64],
    r: f64,
    excess: f64,
    params: &LipApproxParams,
) -> Result<LipApproxResult> {
    let k = good_set(v, center, r, excess, params)?;
    let w = mcshane_extension(v, &k.nodes, k.lip_on_k)?;
    let mut kv = vec![0.0; v.len()];
    for &p in &k.nodes {
        kv[p] = 1.0;
    }
    let k_mask = GridField::new(v.m(), 1, v.dims().to_vec(), v.origin().to_vec(), v.spacing(), kv)?;
    let half_energy_w = 0.5 * dirichlet_energy(&w, &Region::ball(center, k.rho))?;
    let lip_w = lipschitz_constant(&w);
    Ok(LipApproxResult {
        k_mask,
        w,
        excess_e: excess,
        gamma: params.gamma,
        lambda: params.lambda,
        threshold: k.threshold,
        bad_measure: k.bad_measure,
        lip_on_k: k.lip_on_k,
        lip_w,
        center: center.to_vec(),
        radius: r,
        rho: k.rho,
        half_energy_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::unit_ball_volume;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(samples: usize, half: f64, func: impl Fn(&[f64], &mut [f64])) -> GridField {
        let h = 2.0 * half / (samples - 1) as f64;
        GridField::from_fn(1, vec![samples; 2], vec![-half; 2], h, func).unwrap()
    }

    /// r⁻ᵐ∫_{B_r(y)} g through the field's own ball weights.
    fn brute_average(g: &GridField, y: &[f64], r: f64) -> f64 {
        g.weights(&Region::ball(y, r))
            .unwrap()
            .into_iter()
            .map(|(p, w)| w * g.values()[p])
            .sum::<f64>()
            / r.powi(g.m() as i32)
    }

    #[test]
    fn ladder_is_dyadic_and_capped() {
        let l = radius_ladder(0.1, 1.0).unwrap();
        assert_eq!(l.len(), 4);
        assert!((l[0] - 0.2).abs() < 1e-15 && (l[2] - 0.8).abs() < 1e-15 && l[3] == 1.0);
        assert_eq!(radius_ladder(0.1, 0.8).unwrap().len(), 3);
        assert!(radius_ladder(0.1, 0.1).is_err());
    }

    #[test]
    fn constant_gives_unit_ball_volume() {
        let c = 0.7;
        let g = grid(41, 1.0, |_, o| o[0] = c);
        let mf = maximal_function(&g, 0.3).unwrap();
        for p in 0..g.len() {
            let x = g.point(p);
            if x.iter().all(|v| v.abs() <= 0.7) {
                assert!((mf.values()[p] - c * PI).abs() < 1e-12);
            }
        }
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
    }

    #[test]
    fn far_spike_does_not_reach() {
        let g = grid(41, 1.0, |x, o| o[0] = if (x[0] - 0.9).abs() < 0.03 && (x[1] - 0.9).abs() < 0.03 { 5.0 } else { 0.0 });
        let mf = maximal_function(&g, 0.2).unwrap();
        for p in 0..g.len() {
            let x = g.point(p);
            if (x[0] - 0.9).hypot(x[1] - 0.9) > 0.2 + 0.1 {
                assert_eq!(mf.values()[p], 0.0);
            }
        }
    }

    #[test]
    fn dense_ladder_within_five_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..4 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..3.0)).collect();
            let g = grid(33, 1.0, |x, o| {
                o[0] = 1.5 + (a[0] * x[0]).sin() * (a[1] * x[1]).cos() + 0.3 * (a[2] * x[0] + a[3] * x[1]).sin()
            });
            let r_max = 0.5;
            let mf = maximal_function(&g, r_max).unwrap();
            let h = g.spacing();
            for _ in 0..20 {
                // interior nodes, where every disk of the ladder stays on the grid
                let idx = [rng.gen_range(8..25), rng.gen_range(8..25)];
                let p = g.flat(&idx);
                let y = g.point(p);
                let mut dense: f64 = 0.0;
                let mut k = 2;
                while k as f64 * h <= r_max + 1e-12 {
                    dense = dense.max(brute_average(&g, &y, k as f64 * h));
                    k += 1;
                }
                assert!(mf.values()[p] <= dense * (1.0 + 1e-12));
                assert!(mf.values()[p] >= 0.95 * dense, "{} vs {dense}", mf.values()[p]);
            }
        }
    }

    #[test]
    fn ladder_matches_brute_force_exactly() {
        let g = grid(25, 1.0, |x, o| o[0] = (x[0] + 2.0 * x[1]).cos().powi(2));
        let radii = radius_ladder(g.spacing(), 0.4).unwrap();
        let mf = maximal_function(&g, 0.4).unwrap();
        for p in [g.flat(&[7, 7]), g.flat(&[12, 12]), g.flat(&[17, 9]), g.flat(&[10, 16])] {
            let y = g.point(p);
            let want = radii.iter().map(|&r| brute_average(&g, &y, r)).fold(0.0, f64::max);
            assert!((mf.values()[p] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_input_keeps_everything() {
        let e: f64 = 1e-3;
        let params = LipApproxParams::default();
        // |Dv|² ≤ E^{2λ}/ω_m everywhere
        let s = (e.powf(2.0 * params.lambda) / PI).sqrt() * 0.9;
        let v = grid(41, 1.0, |x, o| o[0] = s * x[0]);
        let res = lipschitz_approximation(&v, &[0.0, 0.0], 0.8, e, &params).unwrap();
        assert_eq!(res.bad_measure, 0.0);
        for p in 0..v.len() {
            if v.point(p).iter().map(|a| a * a).sum::<f64>().sqrt() <= res.rho {
                assert_eq!(res.k_mask.values()[p], 1.0);
                assert_eq!(res.w.values()[p], v.values()[p]);
            }
        }
        assert!(res.lip_on_k <= e.powf(params.gamma));
        assert!((res.rho - 0.8 * (1.0 - e.powf(1.0 / 16.0))).abs() < 1e-15);
    }

    #[test]
    fn spike_is_excluded_and_extension_is_lipschitz() {
        let e = 1e-3;
        let params = LipApproxParams {
            eps_bar: 0.1,
            ..Default::default()
        };
        let spike = |x: &[f64]| {
            let d = (x[0] - 0.2).hypot(x[1] + 0.1);
            (0.05 - d).max(0.0)
        };
        let v = grid(81, 1.0, |x, o| o[0] = 0.01 * (x[0] * 2.0).sin() * x[1] + spike(x));
        let res = lipschitz_approximation(&v, &[0.0, 0.0], 0.9, e, &params).unwrap();
        // the spike top is outside K
        let top = v.flat(&[48, 36]);
        assert!((v.point(top)[0] - 0.2).abs() < 1e-12 && (v.point(top)[1] + 0.1).abs() < 1e-12);
        assert_eq!(res.k_mask.values()[top], 0.0);
        // bad set agrees with the brute-force maximal function
        let g2 = gradient(&v).unwrap().pointwise_norm().map_values(|x| x * x);
        let radii = radius_ladder(v.spacing(), 0.45).unwrap();
        let mut bad = 0.0;
        for (p, wt) in v.weights(&Region::ball(&[0.0, 0.0], res.rho)).unwrap() {
            let y = v.point(p);
            let mx = radii.iter().map(|&r| brute_average(&g2, &y, r)).fold(0.0, f64::max);
            if mx > res.threshold {
                bad += wt;
            }
        }
        assert!((bad - res.bad_measure).abs() < 1e-12);
        assert!(res.bad_measure > PI * 0.05 * 0.05);
        for p in 0..v.len() {
            if res.k_mask.values()[p] == 1.0 {
                assert_eq!(res.w.values()[p], v.values()[p]);
            }
        }
        let k: Vec<usize> = (0..v.len()).collect();
        assert!(lipschitz_on(&res.w, &k) <= res.lip_on_k * (1.0 + 1e-9));
    }

    #[test]
    fn mcshane_respects_sqrt_n_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1.0 / 12.0;
        let v = GridField::from_fn(2, vec![13, 13], vec![0.0; 2], h, |_, o| {
            o[0] = rng.gen_range(-0.1..0.1);
            o[1] = rng.gen_range(-0.1..0.1);
        })
        .unwrap();
        let nodes: Vec<usize> = (0..v.len()).filter(|p| p % 3 == 0).collect();
        let lk = lipschitz_on(&v, &nodes);
        let w = mcshane_extension(&v, &nodes, lk).unwrap();
        let all: Vec<usize> = (0..v.len()).collect();
        assert!(lipschitz_on(&w, &all) <= 2f64.sqrt() * lk * (1.0 + 1e-9));
        for &p in &nodes {
            assert_eq!(w.value(p), v.value(p));
        }
    }

    #[test]
    fn weak_type_constant_below_vitali_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let g = grid(41, 1.0, |x, o| o[0] = (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / 0.01).exp() + c[2].abs() * 0.01);
            let mf = maximal_function(&g, 0.5).unwrap();
            for t in [0.05, 0.2, 0.5] {
                let k = weak_l1_constant(&g, &mf, t).unwrap();
                assert!(k <= 25.0 * PI, "{k}");
            }
        }
    }

    #[test]
    fn raising_lambda_enlarges_the_bad_set() {
        let v = grid(41, 1.0, |x, o| o[0] = 0.05 * (3.0 * x[0]).sin() * (2.0 * x[1]).cos());
        let e = 1e-2;
        let bad = |lambda: f64| {
            let params = LipApproxParams {
                lambda,
                ..Default::default()
            };
            lipschitz_approximation(&v, &[0.0, 0.0], 0.8, e, &params).unwrap().bad_measure
        };
        let (b1, b2, b3) = (bad(0.1), bad(0.2), bad(0.3));
        assert!(b1 <= b2 && b2 <= b3 && b1 < b3);
    }

    #[test]
    fn guards() {
        let v = grid(21, 1.0, |x, o| o[0] = 0.1 * x[0]);
        let p = LipApproxParams::default();
        assert!(matches!(lipschitz_approximation(&v, &[0.0, 0.0], 0.5, 0.5, &p), Err(Error::Precondition(_))));
        let steep = grid(21, 1.0, |x, o| o[0] = 3.0 * x[0]);
        assert!(matches!(lipschitz_approximation(&steep, &[0.0, 0.0], 0.5, 1e-3, &p), Err(Error::Precondition(_))));
        let wild = grid(21, 1.0, |x, o| o[0] = 1.5 * x[0]);
        assert!(matches!(lipschitz_approximation(&wild, &[0.0, 0.0], 0.5, 1e-3, &p), Err(Error::Empty(_))));
    }
}
