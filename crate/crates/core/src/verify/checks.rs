use serde::{Deserialize, Serialize};

use super::decay::{fit_slope, ZERO_EXCESS};
use crate::area::{graph_point, Graph};
use crate::error::{Error, Result};
use crate::field::poisson::harmonic_extension;
use crate::field::{
    gradient, holder_seminorm, laplacian, lipschitz_constant, nodes_in, GridField, Interpolant, Multilinear, Region,
};
use crate::geom::NearHorizontalPlane;

/// (Df)_{x,r} and ∫_{B_r(x)}|Df − (Df)_{x,r}|² from a gradient field.
fn oscillation(grad: &GridField, x: &[f64], r: f64) -> Result<(Vec<f64>, f64)> {
    let w = grad.weights(&Region::ball(x, r))?;
    let k = grad.n();
    let mut avg = vec![0.0; k];
    let mut tot = 0.0;
    for &(p, wt) in &w {
        tot += wt;
        for (a, v) in avg.iter_mut().zip(grad.value(p)) {
            *a += wt * v;
        }
    }
    if tot <= 0.0 {
        return Err(Error::Empty(format!("ball of radius {r} carries no quadrature weight")));
    }
    avg.iter_mut().for_each(|a| *a /= tot);
    let osc = w
        .iter()
        .map(|&(p, wt)| wt * grad.value(p).iter().zip(&avg).map(|(g, a)| (g - a).powi(2)).sum::<f64>())
        .sum();
    Ok((avg, osc))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub x: Vec<f64>,
    pub r: f64,
    /// ∫_{B_r(x)}|Du − (Du)_{x,r}|².
    pub lhs: f64,
    /// Optimal-plane spherical excess in 𝐁_{4r}(p).
    pub excess: f64,
    /// lhs/(rᵐ·excess).
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub rows: Vec<OscillationRow>,
    /// Smallest C for which every row holds.
    pub constant: f64,
}

/// Mean oscillation of Du on B_r(x) against the excess in 𝐁_{4r}(x, u(x)),
/// over a battery of (x, r).
pub fn mean_oscillation_check(u: &GridField, configs: &[(Vec<f64>, f64)]) -> Result<OscillationReport> {
    let lip = lipschitz_constant(u);
    if lip > 1.0 {
        return Err(Error::Precondition(format!("Lip(u) = {lip} exceeds 1")));
    }
    let graph = Graph::new(u)?;
    let m = u.m() as i32;
    let mut rows = Vec::with_capacity(configs.len());
    for (x, r) in configs {
        let (avg, lhs) = oscillation(graph.gradient(), x, *r)?;
        let p = graph_point(u, x)?;
        let (_, rep) = graph.optimal_plane(&p, 4.0 * r, Some(&avg))?;
        let ratio = if rep.value < ZERO_EXCESS { 0.0 } else { lhs / (r.powi(m) * rep.value) };
        rows.push(OscillationRow {
            x: x.clone(),
            r: *r,
            lhs,
            excess: rep.value,
            ratio,
        });
    }
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(OscillationReport { rows, constant })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyReport {
    pub x: Vec<f64>,
    pub radii: Vec<f64>,
    /// (Du)_{x,r} per radius.
    pub averages: Vec<Vec<f64>>,
    /// |(Du)_{x,rᵢ₊₁} − (Du)_{x,rᵢ}|.
    pub gaps: Vec<f64>,
    /// Slope of log gap against log r.
    pub gap_exponent: Option<f64>,
    /// r^{−m}∫_{B_r}|Du − (Du)_{x,r}|² per radius.
    pub oscillations: Vec<f64>,
    /// Half the slope of log oscillation against log r.
    pub alpha: Option<f64>,
    /// |Du(x) − (Du)_{x,r}| per radius.
    pub lebesgue: Vec<f64>,
    /// [Du]_α over B_{r₀}(x), with α = `alpha` (1 when undefined).
    pub holder: f64,
}

/// Dyadic averages of Du at x and the Hölder data they imply.
pub fn morrey_iteration(u: &GridField, x: &[f64], radii: &[f64]) -> Result<MorreyReport> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] < w[0])) || radii[radii.len() - 1] <= 0.0 {
        return Err(Error::Precondition("radii must be positive and strictly decreasing".into()));
    }
    let grad = gradient(u)?;
    let m = u.m() as i32;
    let mut at_x = vec![0.0; grad.n()];
    Multilinear::new(&grad).value(x, &mut at_x)?;
    let mut averages = Vec::new();
    let mut oscillations = Vec::new();
    let mut lebesgue = Vec::new();
    for &r in radii {
        let (avg, osc) = oscillation(&grad, x, r)?;
        lebesgue.push(dist(&avg, &at_x));
        oscillations.push(osc / r.powi(m));
        averages.push(avg);
    }
    let gaps: Vec<f64> = averages.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let log_fit = |rs: &[f64], ys: &[f64]| -> Option<f64> {
        if ys.iter().any(|&v| v <= 1e-300) {
            return None;
        }
        let lx: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
        fit_slope(&lx, &ly)
    };
    let gap_exponent = log_fit(&radii[1..], &gaps);
    let alpha = if oscillations.iter().all(|&v| v < ZERO_EXCESS * ZERO_EXCESS) {
        None
    } else {
        log_fit(radii, &oscillations).map(|s| 0.5 * s)
    };
    let exponent = alpha.unwrap_or(1.0).clamp(1e-3, 1.0);
    let h = u.spacing();
    let holder = holder_seminorm(u, 1, exponent, (h, radii[0]), &Region::ball(x, radii[0]))?;
    Ok(MorreyReport {
        x: x.to_vec(),
        radii: radii.to_vec(),
        averages,
        gaps,
        gap_exponent,
        oscillations,
        alpha,
        lebesgue,
        holder,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Largest |Δₕh| over the grid nodes whose stencil lies in the ball.
pub const HARMONIC_RESIDUAL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDecay {
    /// ∫_{B_ρ(x)}|Dh − (Dh)_{x,ρ}|².
    pub lhs: f64,
    /// ∫_{B_r(x)}|Dh|².
    pub energy: f64,
    pub ratio: f64,
    /// ratio/(ρ/r)^{m+2}.
    pub scaled: f64,
    pub residual: f64,
}

pub fn harmonic_decay_check(h: &GridField, x: &[f64], rho: f64, r: f64) -> Result<HarmonicDecay> {
    if !(0.0 < rho && rho <= r) {
        return Err(Error::Precondition(format!("need 0 < ρ ≤ r, got ρ = {rho}, r = {r}")));
    }
    let lap = laplacian(h)?;
    let residual = nodes_in(&lap, &Region::ball(x, r))
        .into_iter()
        .flat_map(|p| lap.value(p).to_vec())
        .fold(0.0, |a: f64, v| a.max(v.abs()));
    if residual > HARMONIC_RESIDUAL {
        return Err(Error::Precondition(format!("input not harmonic: discrete Laplacian {residual:e}")));
    }
    let grad = gradient(h)?;
    let (_, lhs) = oscillation(&grad, x, rho)?;
    let energy: f64 = grad
        .weights(&Region::ball(x, r))?
        .into_iter()
        .map(|(p, w)| w * grad.value(p).iter().map(|v| v * v).sum::<f64>())
        .sum();
    let ratio = if energy > 0.0 { lhs / energy } else { 0.0 };
    let scaled = ratio / (rho / r).powi(h.m() as i32 + 2);
    Ok(HarmonicDecay {
        lhs,
        energy,
        ratio,
        scaled,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    /// ‖f − h‖_{W^{1,2}} over the region.
    pub w12_gap: f64,
    /// ½∫|Df|² over the region.
    pub half_energy: f64,
    pub average: Vec<f64>,
}

/// f = (v − avg)/E^{1/2} on the nodes of a box region, and the discrete
/// harmonic h with h = f on the boundary of that box.
pub fn harmonic_blowup_compare(v: &GridField, excess: f64, region: &Region) -> Result<(GridField, GridField, BlowupReport)> {
    let Region::Box { lo, hi } = region else {
        return Err(Error::Precondition("blow-up comparison needs a box region".into()));
    };
    if !(excess > 0.0) {
        return Err(Error::Precondition(format!("excess {excess} must be positive")));
    }
    let h = v.spacing();
    let tol = 1e-9 * h;
    let mut start = Vec::new();
    let mut dims = Vec::new();
    for a in 0..v.m() {
        let first = ((lo[a] - v.origin()[a] - tol) / h).ceil().max(0.0) as usize;
        let last = (((hi[a] - v.origin()[a] + tol) / h).floor() as usize).min(v.dims()[a] - 1);
        if last < first + 2 {
            return Err(Error::DomainEscape("box holds fewer than three nodes per axis".into()));
        }
        start.push(first);
        dims.push(last - first + 1);
    }
    let win = v.window(&start, &dims)?;
    let vol: f64 = win.weights(&Region::Whole)?.iter().map(|(_, w)| w).sum();
    let average: Vec<f64> = win.integrate(&Region::Whole)?.into_iter().map(|s| s / vol).collect();
    let scale = excess.sqrt();
    let n = win.n();
    let mut f = win.clone();
    for p in 0..f.len() {
        for c in 0..n {
            f.value_mut(p)[c] = (win.value(p)[c] - average[c]) / scale;
        }
    }
    let harm = harmonic_extension(&f)?;
    let diff = f.combine(1.0, &harm, -1.0)?;
    let dd = gradient(&diff)?;
    let df = gradient(&f)?;
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mut energy = 0.0;
    for (p, w) in f.weights(&Region::Whole)? {
        l2 += w * diff.value(p).iter().map(|x| x * x).sum::<f64>();
        h1 += w * dd.value(p).iter().map(|x| x * x).sum::<f64>();
        energy += w * df.value(p).iter().map(|x| x * x).sum::<f64>();
    }
    let report = BlowupReport {
        w12_gap: (l2 + h1).sqrt(),
        half_energy: 0.5 * energy,
        average,
    };
    Ok((f, harm, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    /// 𝐄(gr(w), 𝐂_{1/2}, π⃗) for the plane of A = (Dw)_{0,1/2}.
    pub lhs: f64,
    /// ½∫_{B_{1/2}}|Dw − A|².
    pub oscillation: f64,
    pub lip: f64,
    /// ∫_{B_{1/2}}|Dw|².
    pub energy: f64,
    /// Smallest C with lhs ≤ oscillation + C·Lip(w)·energy.
    pub constant: f64,
}

pub fn taylor_excess_bound_check(w: &GridField) -> Result<TaylorReport> {
    let lip = lipschitz_constant(w);
    if lip > 2.0 {
        return Err(Error::Precondition(format!("Lip(w) = {lip} exceeds 2")));
    }
    let (m, n) = (w.m(), w.n());
    let zero = vec![0.0; m];
    let graph = Graph::new(w)?;
    let (a, osc) = oscillation(graph.gradient(), &zero, 0.5)?;
    let energy: f64 = w
        .weights(&Region::ball(&zero, 0.5))?
        .into_iter()
        .map(|(p, wt)| wt * graph.gradient().value(p).iter().map(|v| v * v).sum::<f64>())
        .sum();
    let plane = NearHorizontalPlane::new(m, n, vec![0.0; m + n], a)?;
    let lhs = graph.cylindrical_excess(&zero, 0.5, &plane)?.value;
    let oscillation = 0.5 * osc;
    let excess_over = (lhs - oscillation).max(0.0);
    let constant = if excess_over == 0.0 { 0.0 } else { excess_over / (lip * energy) };
    Ok(TaylorReport {
        lhs,
        oscillation,
        lip,
        energy,
        constant,
    })
}
