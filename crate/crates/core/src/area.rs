//! Area functional, cylindrical and spherical excess, optimal planes, and the
//! plane-comparison estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    average_gradient, cell_ball_measure, gradient, gradient_where_defined, lipschitz_constant, unit_ball_volume, GridField, Interpolant,
    Multilinear, Region,
};
use crate::geom::{
    self, area_factor, reparametrize_graph, slope_gap, wedge_coordinates, NearHorizontalPlane, OutputGrid,
    ReparamOptions,
};
use crate::linalg;
use crate::optim::{bfgs, central_gradient, newton_polish, BfgsOptions};

/// Excesses below this are treated as exact zeros (affine graphs).
pub const ZERO_EXCESS: f64 = 1e-14;

/// Area integrand √(1 + |G|² + Σ_{k≥2} minors²), enumerating every minor of [Id; G].
pub fn area_integrand(slope: &[f64], n: usize, m: usize) -> f64 {
    wedge_coordinates(slope, n, m).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// √det(Id + GᵀG).
pub fn gram_integrand(slope: &[f64], n: usize, m: usize) -> f64 {
    area_factor(slope, n, m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcessKind {
    Cylindrical,
    Spherical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub kind: ExcessKind,
    pub center: Vec<f64>,
    pub radius: f64,
    pub plane: NearHorizontalPlane,
    pub value: f64,
    pub quadrature_h: f64,
    /// Set when a small negative quadrature value was clamped to 0.
    pub clamped: bool,
}

fn clamp_value(v: f64) -> (f64, bool) {
    if v < 0.0 {
        (0.0, true)
    } else {
        (v, false)
    }
}

/// A sampled graph together with its nodal gradient.
pub struct Graph<'a> {
    f: &'a GridField,
    grad: GridField,
}

impl<'a> Graph<'a> {
    pub fn new(f: &'a GridField) -> Result<Self> {
        Ok(Graph { f, grad: gradient(f)? })
    }

    /// Uses the supplied nodal gradient (n·m components on the grid of `f`).
    pub fn with_gradient(f: &'a GridField, grad: GridField) -> Result<Self> {
        if grad.dims() != f.dims() || grad.n() != f.n() * f.m() {
            return Err(Error::GridMismatch("gradient grid differs from the graph grid".into()));
        }
        Ok(Graph { f, grad })
    }

    pub fn field(&self) -> &GridField {
        self.f
    }

    pub fn gradient(&self) -> &GridField {
        &self.grad
    }

    pub fn area(&self, region: &Region) -> Result<f64> {
        let (m, n) = (self.f.m(), self.f.n());
        Ok(self
            .f
            .weights(region)?
            .into_iter()
            .map(|(p, w)| w * area_integrand(self.grad.value(p), n, m))
            .sum())
    }

    pub fn cylindrical_excess(&self, center: &[f64], r: f64, plane: &NearHorizontalPlane) -> Result<ExcessReport> {
        let (m, n) = (self.f.m(), self.f.n());
        let a = plane.slope();
        let v: f64 = self
            .f
            .weights(&Region::ball(center, r))?
            .into_iter()
            .map(|(p, w)| {
                let g = self.grad.value(p);
                w * area_factor(g, n, m) * slope_gap(g, a, n, m)
            })
            .sum::<f64>()
            * 0.5;
        let (value, clamped) = clamp_value(v);
        Ok(ExcessReport {
            kind: ExcessKind::Cylindrical,
            center: center.to_vec(),
            radius: r,
            plane: plane.clone(),
            value,
            quadrature_h: self.f.spacing(),
            clamped,
        })
    }

    /// Graph-volume and m-vector moments of gr(f) ∩ 𝐁_r(p). Cells entirely
    /// inside the ball count fully; rim cells by the fraction of a k^m
    /// sub-sample that falls inside, using the nodal tangent plane.
    pub fn ball_moments(&self, p: &[f64], r: f64, sub: usize) -> Result<BallMoments> {
        let f = self.f;
        let (m, n) = (f.m(), f.n());
        if p.len() != m + n {
            return Err(Error::Precondition("ball center must lie in ℝ^{m+n}".into()));
        }
        let (px, py) = p.split_at(m);
        let up = f.upper();
        let h = f.spacing();
        for a in 0..m {
            if px[a] - r < f.origin()[a] - 1e-9 * h || px[a] + r > up[a] + 1e-9 * h {
                return Err(Error::DomainEscape(format!(
                    "truncated graph: disk B_{r}({px:?}) leaves the domain"
                )));
            }
        }
        let combos = linalg::combinations(m + n, m).len();
        let mut total = 0.0;
        let mut sum = vec![0.0; combos];
        let r2 = r * r;
        // nodes whose dual cell meets the disk's bounding box
        let mut first = vec![0usize; m];
        let mut count = vec![0usize; m];
        for a in 0..m {
            let i0 = ((px[a] - r - f.origin()[a]) / h - 0.5).floor().max(0.0) as usize;
            let i1 = (((px[a] + r - f.origin()[a]) / h + 0.5).ceil() as usize).min(f.dims()[a] - 1);
            first[a] = i0;
            count[a] = i1 + 1 - i0;
        }
        let cells: usize = count.iter().product();
        let mut idx = vec![0usize; m];
        let mut node = vec![0usize; m];
        let mut x = vec![0.0; m];
        let mut clo = vec![0.0; m];
        let mut chi = vec![0.0; m];
        let mut q = vec![0.0; m];
        let corners = 1usize << m;
        let subs = sub.pow(m as u32);
        let psi = |q: &[f64], x: &[f64], fv: &[f64], g: &[f64]| -> f64 {
            let mut s = 0.0;
            for a in 0..m {
                s += (q[a] - px[a]).powi(2);
            }
            for c in 0..n {
                let mut v = fv[c] - py[c];
                for a in 0..m {
                    v += g[c * m + a] * (q[a] - x[a]);
                }
                s += v * v;
            }
            s
        };
        for t in 0..cells {
            field_unflatten(t, &count, &mut idx);
            let mut near = 0.0;
            for a in 0..m {
                node[a] = first[a] + idx[a];
                x[a] = f.origin()[a] + node[a] as f64 * h;
                clo[a] = (x[a] - 0.5 * h).max(f.origin()[a]);
                chi[a] = (x[a] + 0.5 * h).min(up[a]);
                let dn = if clo[a] > px[a] {
                    clo[a] - px[a]
                } else if chi[a] < px[a] {
                    px[a] - chi[a]
                } else {
                    0.0
                };
                near += dn * dn;
            }
            if near >= r2 {
                continue;
            }
            let pnode = f.flat(&node);
            let fv = f.value(pnode);
            let g = self.grad.value(pnode);
            let vol: f64 = (0..m).map(|a| chi[a] - clo[a]).product();
            let mut all_in = true;
            for c in 0..corners {
                for a in 0..m {
                    q[a] = if c >> a & 1 == 1 { chi[a] } else { clo[a] };
                }
                if psi(&q, &x, fv, g) > r2 {
                    all_in = false;
                    break;
                }
            }
            let frac = if all_in {
                1.0
            } else {
                let mut inside = 0usize;
                for s in 0..subs {
                    let mut k = s;
                    for a in 0..m {
                        let j = k % sub;
                        k /= sub;
                        q[a] = clo[a] + (j as f64 + 0.5) / sub as f64 * (chi[a] - clo[a]);
                    }
                    if psi(&q, &x, fv, g) < r2 {
                        inside += 1;
                    }
                }
                inside as f64 / subs as f64
            };
            if frac == 0.0 {
                continue;
            }
            if !f.is_active(pnode) {
                return Err(Error::MaskedOut { index: node.clone() });
            }
            let w = vol * frac;
            let wc = wedge_coordinates(g, n, m);
            total += w * wc.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (s, v) in sum.iter_mut().zip(&wc) {
                *s += w * v;
            }
        }
        Ok(BallMoments {
            m,
            n,
            center: p.to_vec(),
            radius: r,
            h,
            volume: total,
            sum,
        })
    }

    pub fn spherical_excess(&self, p: &[f64], r: f64, plane: &NearHorizontalPlane) -> Result<ExcessReport> {
        self.ball_moments(p, r, DEFAULT_SUBSAMPLE)?.report(plane)
    }

    /// Plane through `p` minimizing the spherical excess in 𝐁_r(p). The
    /// default seed is the average gradient over the disk B_r(x).
    pub fn optimal_plane(
        &self,
        p: &[f64],
        r: f64,
        seed: Option<&[f64]>,
    ) -> Result<(NearHorizontalPlane, ExcessReport)> {
        let mom = self.ball_moments(p, r, DEFAULT_SUBSAMPLE)?;
        let seed = match seed {
            Some(s) => s.to_vec(),
            None => average_gradient(self.f, &p[..self.f.m()], r)?,
        };
        mom.optimal_plane(&seed)
    }
}

fn field_unflatten(mut p: usize, dims: &[usize], idx: &mut [usize]) {
    for a in (0..dims.len()).rev() {
        idx[a] = p % dims[a];
        p /= dims[a];
    }
}

/// Rim sub-sample count per axis for ball clipping.
pub const DEFAULT_SUBSAMPLE: usize = 4;

/// Moments of gr(f) ∩ 𝐁_r(p): Vol and S = Σ w·J·T⃗. For any plane,
/// ∫|T⃗ − π⃗|² = 2(Vol − ⟨S, π⃗⟩).
#[derive(Clone, Debug, PartialEq)]
pub struct BallMoments {
    pub m: usize,
    pub n: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub h: f64,
    pub volume: f64,
    pub sum: Vec<f64>,
}

impl BallMoments {
    /// Spherical excess with respect to the plane of slope `a`, unclamped.
    pub fn excess(&self, a: &[f64]) -> f64 {
        let w = wedge_coordinates(a, self.n, self.m);
        let j = area_factor(a, self.n, self.m);
        let dot: f64 = self.sum.iter().zip(&w).map(|(s, v)| s * v).sum::<f64>() / j;
        2.0 * (self.volume - dot) / (unit_ball_volume(self.m) * self.radius.powi(self.m as i32))
    }

    pub fn report(&self, plane: &NearHorizontalPlane) -> Result<ExcessReport> {
        if (plane.m(), plane.n()) != (self.m, self.n) {
            return Err(Error::Precondition("plane dimensions differ from the graph".into()));
        }
        let (value, clamped) = clamp_value(self.excess(plane.slope()));
        Ok(ExcessReport {
            kind: ExcessKind::Spherical,
            center: self.center.clone(),
            radius: self.radius,
            plane: plane.clone(),
            value,
            quadrature_h: self.h,
            clamped,
        })
    }

    /// Quasi-Newton descent on the slope, central differences for the gradient.
    pub fn optimal_plane(&self, seed: &[f64]) -> Result<(NearHorizontalPlane, ExcessReport)> {
        let norm = linalg::fro_norm(seed);
        if norm > geom::SLOPE_BOUND {
            return Err(Error::SlopeBound {
                norm,
                bound: geom::SLOPE_BOUND,
            });
        }
        let obj = |a: &[f64]| self.excess(a);
        // excess values carry ~1e-15 of cancellation noise, so the gradient
        // tolerance sits well above noise/step
        let grad = |a: &[f64], out: &mut [f64]| central_gradient(&mut |b: &[f64]| self.excess(b), a, 1e-5, out);
        let opts = BfgsOptions {
            grad_tol: 1e-8,
            ..BfgsOptions::default()
        };
        let mut res = bfgs(obj, &grad, seed, &opts);
        if !res.converged {
            // line search stalled on value noise; the gradient is still informative
            let (x, norm) = newton_polish(&grad, &res.x, 1e-4, opts.grad_tol, 20);
            res.converged = norm < opts.grad_tol;
            res.grad_norm = norm;
            res.x = x;
        }
        if !res.converged {
            return Err(Error::NonConvergence {
                iterations: res.iterations,
                detail: format!("optimal plane: gradient {:e} at slope {:?}", res.grad_norm, res.x),
            });
        }
        let norm = linalg::fro_norm(&res.x);
        if norm >= geom::SLOPE_BOUND * (1.0 - 1e-9) {
            return Err(Error::SlopeBound {
                norm,
                bound: geom::SLOPE_BOUND,
            });
        }
        let plane = NearHorizontalPlane::new(self.m, self.n, self.center.clone(), res.x)?;
        let report = self.report(&plane)?;
        Ok((plane, report))
    }
}

pub fn area(f: &GridField, region: &Region) -> Result<f64> {
    Graph::new(f)?.area(region)
}

pub fn cylindrical_excess(f: &GridField, center: &[f64], r: f64, plane: &NearHorizontalPlane) -> Result<ExcessReport> {
    Graph::new(f)?.cylindrical_excess(center, r, plane)
}

pub fn spherical_excess(f: &GridField, p: &[f64], r: f64, plane: &NearHorizontalPlane) -> Result<ExcessReport> {
    Graph::new(f)?.spherical_excess(p, r, plane)
}

pub fn optimal_plane(
    f: &GridField,
    p: &[f64],
    r: f64,
    seed: Option<&[f64]>,
) -> Result<(NearHorizontalPlane, ExcessReport)> {
    Graph::new(f)?.optimal_plane(p, r, seed)
}

/// (x, f(x)) with f evaluated by multilinear interpolation.
pub fn graph_point(f: &GridField, x: &[f64]) -> Result<Vec<f64>> {
    let mut v = vec![0.0; f.n()];
    Multilinear::new(f).value(x, &mut v)?;
    let mut p = x.to_vec();
    p.extend(v);
    Ok(p)
}

/// Axis orderings of the Freudenthal (Kuhn) simplices of a unit cube.
pub(crate) fn freudenthal(m: usize) -> Vec<Vec<usize>> {
    fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            perms(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut out = Vec::new();
    perms(&mut (0..m).collect(), 0, &mut out);
    out.sort();
    out
}

/// Fraction of the cell `[lo, hi]` lying in the region.
pub(crate) fn cell_fraction(region: &Region, lo: &[f64], hi: &[f64]) -> f64 {
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    match region {
        Region::Whole => 1.0,
        Region::Box { lo: rl, hi: rh } => {
            (0..lo.len())
                .map(|a| (hi[a].min(rh[a]) - lo[a].max(rl[a])).max(0.0))
                .product::<f64>()
                / vol
        }
        Region::Ball { center, radius } => cell_ball_measure(lo, hi, center, *radius) / vol,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Compares Vol(gr f) − |region| (nodal differences, dual-cell quadrature)
/// against ½∫_{gr f}|T⃗ − π⃗₀|² (piecewise-linear interpolant on the
/// Freudenthal triangulation of the grid cells).
pub fn excess_identity_check(f: &GridField, region: &Region) -> Result<IdentityCheck> {
    let (m, n) = (f.m(), f.n());
    let g = Graph::new(f)?;
    let w = f.weights(region)?;
    let measure: f64 = w.iter().map(|(_, v)| v).sum();
    let lhs = w
        .iter()
        .map(|(p, wt)| wt * area_integrand(g.grad.value(*p), n, m))
        .sum::<f64>()
        - measure;

    let h = f.spacing();
    let strides = f.strides();
    let simplices = freudenthal(m);
    let svol = h.powi(m as i32) / simplices.len() as f64;
    let cell_dims: Vec<usize> = f.dims().iter().map(|d| d - 1).collect();
    let cells: usize = cell_dims.iter().product();
    let zero = vec![0.0; n * m];
    let mut idx = vec![0usize; m];
    let mut lo = vec![0.0; m];
    let mut hi = vec![0.0; m];
    let mut slope = vec![0.0; n * m];
    let mut rhs = 0.0;
    for t in 0..cells {
        field_unflatten(t, &cell_dims, &mut idx);
        for a in 0..m {
            lo[a] = f.origin()[a] + idx[a] as f64 * h;
            hi[a] = lo[a] + h;
        }
        let frac = cell_fraction(region, &lo, &hi);
        if frac <= 0.0 {
            continue;
        }
        let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        for order in &simplices {
            let mut v = base;
            for &axis in order {
                let next = v + strides[axis];
                if !f.is_active(v) || !f.is_active(next) {
                    return Err(Error::MaskedOut { index: f.index(next) });
                }
                for c in 0..n {
                    slope[c * m + axis] = (f.value(next)[c] - f.value(v)[c]) / h;
                }
                v = next;
            }
            let j = area_factor(&slope, n, m);
            rhs += frac * svol * 0.5 * j * slope_gap(&slope, &zero, n, m);
        }
    }
    Ok(IdentityCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// One sampled configuration for the plane-comparison estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneCheckConfig {
    /// Base point x; the ball is centered at p = (x, f(x)).
    pub x: Vec<f64>,
    /// Radius r; the tilt estimate compares 𝐁_{2r}(p) with 𝐁_ρ(p).
    pub r: f64,
    /// ρ ∈ [r, 2r].
    pub rho: f64,
    /// Optional second base point y for the two-point estimate (radius |p − q|).
    pub y: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneCheckRow {
    pub density: f64,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneCheckReport {
    /// Smallest C₁ with C₁⁻¹rᵐ ≤ Vol(gr ∩ 𝐁_r) ≤ C₁rᵐ over all configurations.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub rows: Vec<PlaneCheckRow>,
}

fn ratio(lhs: f64, rhs: f64) -> Option<f64> {
    if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs <= 1e-14 {
        None
    } else {
        Some(f64::INFINITY)
    }
}

/// Measures the constants of the density, r–2r tilt and two-point tilt
/// estimates with optimal planes.
pub fn compare_planes_checks(f: &GridField, configs: &[PlaneCheckConfig]) -> Result<PlaneCheckReport> {
    let g = Graph::new(f)?;
    let m = f.m();
    let mut rows = Vec::with_capacity(configs.len());
    let (mut c1, mut c2, mut c3): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for cfg in configs {
        if !(cfg.r <= cfg.rho && cfg.rho <= 2.0 * cfg.r) {
            return Err(Error::Precondition(format!("need r ≤ ρ ≤ 2r, got r = {}, ρ = {}", cfg.r, cfg.rho)));
        }
        let p = graph_point(f, &cfg.x)?;
        let vol = g.ball_moments(&p, cfg.r, DEFAULT_SUBSAMPLE)?.volume;
        let density = vol / cfg.r.powi(m as i32);
        c1 = c1.max(density).max(1.0 / density);

        let (p1, e1) = g.optimal_plane(&p, 2.0 * cfg.r, None)?;
        let (p2, e2) = g.optimal_plane(&p, cfg.rho, None)?;
        let r2 = ratio(geom::mvector_gap(&p1, &p2), e1.value + e2.value);
        if let Some(v) = r2 {
            c2 = c2.max(v);
        }

        let r3 = match &cfg.y {
            Some(y) => {
                let q = graph_point(f, y)?;
                let dist = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let (q1, f1) = g.optimal_plane(&p, dist, None)?;
                let (q2, f2) = g.optimal_plane(&q, dist, None)?;
                let v = ratio(geom::mvector_gap(&q1, &q2), f1.value + f2.value);
                if let Some(v) = v {
                    c3 = c3.max(v);
                }
                v
            }
            None => None,
        };
        rows.push(PlaneCheckRow {
            density,
            c2: r2,
            c3: r3,
        });
    }
    Ok(PlaneCheckReport { c1, c2, c3, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderCertificate {
    pub plane: NearHorizontalPlane,
    pub spherical_excess_flat: f64,
    pub spherical_excess: f64,
    pub lip_v: f64,
    /// max over nodes of |X − p|/r for lifted points X of gr(v).
    pub max_radius_ratio: f64,
    /// max vertical gap between lifted points of gr(v) and gr(f).
    pub graph_gap: f64,
    pub cylindrical_excess: f64,
    /// (ω_m rᵐ/2)·E_sph, which reduces to (ω_m/2)·E_sph at r = 1.
    pub excess_bound: f64,
}

/// Re-expresses gr(f) ∩ 𝐁_r(p) over its optimal plane on the disk of radius
/// (1−η)r and certifies the three conclusions of the sphere-to-cylinder comparison.
pub fn sphere_to_cylinder(
    f: &GridField,
    p: &[f64],
    r: f64,
    eta: f64,
    eps_bar: f64,
) -> Result<(GridField, CylinderCertificate)> {
    let (m, n) = (f.m(), f.n());
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Precondition(format!("η = {eta} outside (0, 1)")));
    }
    let g = Graph::new(f)?;
    let mom = g.ball_moments(p, r, DEFAULT_SUBSAMPLE)?;
    let flat = mom.excess(&vec![0.0; n * m]).max(0.0);
    if flat > eps_bar {
        return Err(Error::Precondition(format!(
            "spherical excess against the horizontal plane {flat:e} exceeds ε̄ = {eps_bar:e}"
        )));
    }
    let seed = average_gradient(f, &p[..m], r)?;
    let (plane, rep) = mom.optimal_plane(&seed)?;
    let h = f.spacing();
    let rad = (1.0 - eta) * r;
    let samples = (2.0 * (rad + 2.0 * h) / h).ceil() as usize + 1;
    let half = 0.5 * (samples - 1) as f64 * h;
    let zero = vec![0.0; m];
    let out = OutputGrid {
        origin: vec![-half; m],
        spacing: h,
        dims: vec![samples; m],
        disk: Some((zero.clone(), rad + 2.0 * h)),
    };
    let horizontal = NearHorizontalPlane::horizontal(m, n);
    let opts = ReparamOptions {
        scale: r,
        ..Default::default()
    };
    let v = reparametrize_graph(&Multilinear::new(f), &horizontal, &plane, &out, &opts)?;

    let lip_v = lipschitz_constant(&v);
    let interp = Multilinear::new(f);
    let mut max_radius_ratio: f64 = 0.0;
    let mut graph_gap: f64 = 0.0;
    let mut fx = vec![0.0; n];
    for q in 0..v.len() {
        let y = v.point(q);
        if !v.is_active(q) || y.iter().map(|a| a * a).sum::<f64>().sqrt() > rad {
            continue;
        }
        let lifted = plane.from_local(&y, v.value(q));
        let d = lifted.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        max_radius_ratio = max_radius_ratio.max(d / r);
        interp.value(&lifted[..m], &mut fx)?;
        let gap = (0..n).map(|c| (lifted[m + c] - fx[c]).powi(2)).sum::<f64>().sqrt();
        graph_gap = graph_gap.max(gap);
    }
    let cyl = Graph::with_gradient(&v, gradient_where_defined(&v)?)?
        .cylindrical_excess(&zero, rad, &horizontal)?
        .value;
    let bound = 0.5 * unit_ball_volume(m) * r.powi(m as i32) * rep.value;
    let cert = CylinderCertificate {
        plane,
        spherical_excess_flat: flat,
        spherical_excess: rep.value,
        lip_v,
        max_radius_ratio,
        graph_gap,
        cylindrical_excess: cyl,
        excess_bound: bound,
    };
    if lip_v > 2.0 {
        return Err(Error::Certificate {
            clause: "Lip(v) ≤ 2".into(),
            measured: lip_v,
            bound: 2.0,
        });
    }
    if max_radius_ratio > 1.0 || graph_gap > 1e-8 * r {
        return Err(Error::Certificate {
            clause: "gr(v) ⊂ gr(f) ∩ 𝐁_r".into(),
            measured: max_radius_ratio.max(graph_gap),
            bound: 1.0,
        });
    }
    if cyl > bound {
        return Err(Error::Certificate {
            clause: "cylindrical excess ≤ (ω_m/2)·spherical excess".into(),
            measured: cyl,
            bound,
        });
    }
    Ok((v, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn square(n: usize, half: f64, samples: usize, func: impl Fn(&[f64], &mut [f64])) -> GridField {
        let h = 2.0 * half / (samples - 1) as f64;
        GridField::from_fn(n, vec![samples; 2], vec![-half; 2], h, func).unwrap()
    }

    fn unit_square(samples: usize, func: impl Fn(&[f64], &mut [f64])) -> GridField {
        let h = 1.0 / (samples - 1) as f64;
        GridField::from_fn(1, vec![samples; 2], vec![0.0; 2], h, func).unwrap()
    }

    #[test]
    fn area_of_constant_and_affine() {
        let c = unit_square(17, |_, o| o[0] = 3.0);
        assert_relative_eq!(area(&c, &Region::Whole).unwrap(), 1.0, epsilon = 1e-14);
        let a = 0.7;
        let f = unit_square(17, |x, o| o[0] = a * x[0]);
        assert_relative_eq!(area(&f, &Region::Whole).unwrap(), (1.0 + a * a).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn minors_match_gram_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(m, n) in &[(2, 2), (3, 2), (2, 3), (3, 3), (1, 2)] {
            for _ in 0..200 {
                let mut g: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nrm = linalg::fro_norm(&g);
                if nrm > 1.0 {
                    g.iter_mut().for_each(|v| *v /= nrm);
                }
                assert!((area_integrand(&g, n, m) - gram_integrand(&g, n, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn area_exceeds_measure() {
        let f = unit_square(33, |x, o| o[0] = 0.2 * (3.0 * x[0]).sin() * x[1]);
        assert!(area(&f, &Region::Whole).unwrap() > 1.0);
        let c = unit_square(33, |_, o| o[0] = -1.0);
        assert!((area(&c, &Region::Whole).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_constant_and_affine() {
        let c = unit_square(9, |_, o| o[0] = 2.0);
        let r = excess_identity_check(&c, &Region::Whole).unwrap();
        assert_eq!((r.lhs.abs() < 1e-15, r.rhs, r.gap < 1e-15), (true, 0.0, true));
        let a = 0.4;
        let f = unit_square(9, |x, o| o[0] = a * x[0]);
        let r = excess_identity_check(&f, &Region::Whole).unwrap();
        assert!((r.lhs - ((1.0 + a * a).sqrt() - 1.0)).abs() < 1e-12);
        assert!(r.gap <= 1e-10);
    }

    #[test]
    fn identity_gap_is_second_order() {
        let gap = |samples: usize| {
            let f = square(1, 1.0, samples, |x, o| o[0] = 0.1 * x[0].sin() * x[1].sin());
            excess_identity_check(&f, &Region::Whole).unwrap().gap
        };
        let (g1, g2, g3) = (gap(33), gap(65), gap(129));
        assert!(g1 / g2 > 3.5 && g1 / g2 < 4.5, "{}", g1 / g2);
        assert!(g2 / g3 > 3.5 && g2 / g3 < 4.5, "{}", g2 / g3);
    }

    #[test]
    fn cylindrical_excess_affine() {
        let a = 0.3;
        let f = square(1, 1.0, 41, |x, o| o[0] = a * x[1] + 0.5);
        let own = NearHorizontalPlane::new(2, 1, vec![0.0, 0.0, 0.5], vec![0.0, a]).unwrap();
        let zero = cylindrical_excess(&f, &[0.1, -0.2], 0.6, &own).unwrap();
        assert!(zero.value < 1e-12);
        let flat = NearHorizontalPlane::horizontal(2, 1);
        let r = 0.6;
        let e = cylindrical_excess(&f, &[0.1, -0.2], r, &flat).unwrap();
        let s = (1.0 + a * a).sqrt();
        let want = 0.5 * (2.0 - 2.0 / s) * s * PI * r * r;
        assert_relative_eq!(e.value, want, epsilon = 1e-12);
    }

    #[test]
    fn cylindrical_excess_grows_away_from_scan_minimum() {
        let f = square(1, 1.0, 81, |x, o| o[0] = 0.1 * (x[0] + 0.3 * x[1]).sin() + 0.05 * x[1] * x[1]);
        let g = Graph::new(&f).unwrap();
        let ex = |a: f64, b: f64| {
            let p = NearHorizontalPlane::new(2, 1, vec![0.0; 3], vec![a, b]).unwrap();
            g.cylindrical_excess(&[0.0, 0.0], 0.5, &p).unwrap().value
        };
        let step = 0.005;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -40..=40 {
            for j in -40..=40 {
                let (a, b) = (i as f64 * step, j as f64 * step);
                let v = ex(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        for &(da, db) in &[(1.0, 0.0), (0.0, 1.0), (0.7, -0.7), (-0.6, -0.8)] {
            let mut prev = best.0;
            for k in 1..10 {
                let t = 0.01 * k as f64;
                let v = ex(best.1 + t * da, best.2 + t * db);
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn spherical_excess_affine() {
        let a = [0.2, -0.4];
        let f = square(1, 1.0, 129, |x, o| o[0] = a[0] * x[0] + a[1] * x[1]);
        let p = graph_point(&f, &[0.1, 0.05]).unwrap();
        let own = NearHorizontalPlane::new(2, 1, p.clone(), a.to_vec()).unwrap();
        assert!(spherical_excess(&f, &p, 0.5, &own).unwrap().value < 1e-12);
        // a flat disk of radius r inside the ball: excess = 2 − 2/J exactly in the continuum
        let flat = NearHorizontalPlane::horizontal(2, 1);
        let e = spherical_excess(&f, &p, 0.5, &flat).unwrap().value;
        let j = (1.0 + a[0] * a[0] + a[1] * a[1]).sqrt();
        assert_relative_eq!(e, 2.0 - 2.0 / j, max_relative = 2e-3);
    }

    #[test]
    fn spherical_bounded_by_cylindrical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..8 {
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let f = square(2, 1.0, 81, |x, o| {
                o[0] = c[0] * (2.0 * x[0]).sin() + c[1] * x[1];
                o[1] = c[2] * x[0] * x[1] + c[3] * (x[1] - x[0]).cos();
            });
            let g = Graph::new(&f).unwrap();
            let x = [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)];
            let p = graph_point(&f, &x).unwrap();
            let r = 0.5;
            let plane = NearHorizontalPlane::horizontal(2, 2);
            let sph = g.spherical_excess(&p, r, &plane).unwrap().value;
            let cyl = g.cylindrical_excess(&x, r, &plane).unwrap().value;
            assert!(sph <= 2.0 / (PI * r * r) * cyl, "{sph} vs {cyl}");
        }
    }

    #[test]
    fn nested_balls_monotone() {
        let f = square(2, 1.0, 101, |x, o| {
            o[0] = 0.1 * (x[0] * 2.0).sin();
            o[1] = 0.1 * x[0] * x[1];
        });
        let g = Graph::new(&f).unwrap();
        let p = graph_point(&f, &[0.0, 0.0]).unwrap();
        let tau = 0.6;
        let (plane, big) = g.optimal_plane(&p, tau, None).unwrap();
        for &(dx, sigma) in &[(0.1, 0.3), (0.2, 0.2), (0.0, 0.5), (-0.25, 0.3)] {
            let q = graph_point(&f, &[dx, 0.05]).unwrap();
            let dist = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dist + sigma <= tau);
            let small = g.spherical_excess(&q, sigma, &plane.through(q.clone()).unwrap()).unwrap().value;
            let (_, opt) = g.optimal_plane(&q, sigma, None).unwrap();
            assert!(opt.value <= small + 1e-15);
            assert!(small <= (tau / sigma).powi(2) * big.value * (1.0 + 1e-12));
        }
    }

    #[test]
    fn optimal_plane_of_affine_graph() {
        let a = [0.1, 0.2, -0.3, 0.05];
        let f = square(2, 1.0, 65, |x, o| {
            o[0] = a[0] * x[0] + a[1] * x[1];
            o[1] = a[2] * x[0] + a[3] * x[1] + 1.0;
        });
        let p = graph_point(&f, &[0.0, 0.0]).unwrap();
        let (plane, rep) = optimal_plane(&f, &p, 0.5, None).unwrap();
        for (u, v) in plane.slope().iter().zip(&a) {
            assert!((u - v).abs() < 1e-8);
        }
        assert!(rep.value < 1e-12);
    }

    #[test]
    fn optimal_plane_matches_grid_scan() {
        let f = square(2, 1.0, 129, |x, o| {
            o[0] = 0.05 * x[0].sin();
            o[1] = 0.05 * x[1].cos();
        });
        let g = Graph::new(&f).unwrap();
        let p = graph_point(&f, &[0.0, 0.0]).unwrap();
        let r = 0.5;
        let mom = g.ball_moments(&p, r, DEFAULT_SUBSAMPLE).unwrap();
        let eval = |a: &[f64]| {
            let plane = NearHorizontalPlane::new(2, 2, p.clone(), a.to_vec()).unwrap();
            g.spherical_excess(&p, r, &plane).unwrap().value
        };
        let _ = &mom;
        // coarse scan on [−0.2, 0.2]⁴ at 0.02, then 10⁻³ refinement around the coarse minimum
        let scan = |center: &[f64], half: i32, step: f64, eval: &dyn Fn(&[f64]) -> f64| {
            let mut best = (f64::INFINITY, vec![0.0; 4]);
            let mut a = vec![0.0; 4];
            for i in -half..=half {
                for j in -half..=half {
                    for k in -half..=half {
                        for l in -half..=half {
                            a[0] = center[0] + i as f64 * step;
                            a[1] = center[1] + j as f64 * step;
                            a[2] = center[2] + k as f64 * step;
                            a[3] = center[3] + l as f64 * step;
                            let v = eval(&a);
                            if v < best.0 {
                                best = (v, a.clone());
                            }
                        }
                    }
                }
            }
            best
        };
        let fast = |a: &[f64]| mom.excess(a);
        let coarse = scan(&[0.0; 4], 10, 0.02, &fast);
        let fine = scan(&coarse.1, 20, 0.001, &fast);
        assert!((fine.0 - eval(&fine.1)).abs() < 1e-12);
        let (plane, rep) = g.optimal_plane(&p, r, None).unwrap();
        for (u, v) in plane.slope().iter().zip(&fine.1) {
            assert!((u - v).abs() <= 2e-3, "{:?} vs {:?}", plane.slope(), fine.1);
        }
        assert!(rep.value <= fine.0 + 1e-6);
    }

    #[test]
    fn scaling_invariance() {
        let func = |x: &[f64], o: &mut [f64]| {
            o[0] = 0.2 * (x[0] * 1.5).sin() * x[1];
            o[1] = 0.1 * (x[1] - 0.5 * x[0]).cos();
        };
        let f = square(2, 1.0, 129, func);
        let h = f.spacing();
        let x0 = [16.0 * h, -8.0 * h];
        let fx0: Vec<f64> = {
            let mut o = vec![0.0; 2];
            func(&x0, &mut o);
            o
        };
        let s = 0.5;
        let mut vals = f.values().to_vec();
        for (k, v) in vals.iter_mut().enumerate() {
            *v = (*v - fx0[k % 2]) / s;
        }
        let origin: Vec<f64> = f.origin().iter().zip(&x0).map(|(o, c)| (o - c) / s).collect();
        let fs = GridField::new(2, 2, f.dims().to_vec(), origin, h / s, vals).unwrap();
        let p = graph_point(&f, &x0).unwrap();
        let rho = 0.4;
        let (pl, e1) = optimal_plane(&f, &p, rho, None).unwrap();
        let (ps, e2) = optimal_plane(&fs, &[0.0; 4], rho / s, None).unwrap();
        assert!((e1.value - e2.value).abs() < 1e-8);
        for (a, b) in pl.slope().iter().zip(ps.slope()) {
            assert!((a - b).abs() < 1e-6);
        }
        // vertical translation
        let shifted = f.map_values(|v| v + 0.3);
        let mut q = p.clone();
        q[2] += 0.3;
        q[3] += 0.3;
        let (_, e3) = optimal_plane(&shifted, &q, rho, None).unwrap();
        assert!((e1.value - e3.value).abs() < 1e-12);
    }

    #[test]
    fn plane_checks_affine_density_and_refinement() {
        let a = 0.3;
        let f = square(1, 1.0, 65, |x, o| o[0] = a * x[0]);
        let cfgs: Vec<PlaneCheckConfig> = [0.2, 0.3, 0.4]
            .iter()
            .map(|&r| PlaneCheckConfig {
                x: vec![0.0, 0.0],
                r,
                rho: 1.5 * r,
                y: None,
            })
            .collect();
        let rep = compare_planes_checks(&f, &cfgs).unwrap();
        for row in &rep.rows {
            assert_relative_eq!(row.density, PI, max_relative = 5e-3);
            assert!(row.c2.is_none());
        }
        let measured = |samples: usize| {
            let f = square(1, 1.0, samples, |x, o| o[0] = 0.2 * (x[0] * 2.0).sin() + 0.3 * x[0] * x[1]);
            let cfgs = vec![
                PlaneCheckConfig {
                    x: vec![0.0, 0.1],
                    r: 0.2,
                    rho: 0.3,
                    y: Some(vec![0.2, 0.0]),
                },
                PlaneCheckConfig {
                    x: vec![-0.1, 0.0],
                    r: 0.15,
                    rho: 0.3,
                    y: Some(vec![0.1, 0.2]),
                },
            ];
            compare_planes_checks(&f, &cfgs).unwrap()
        };
        let (r1, r2) = (measured(129), measured(257));
        assert!((r1.c2 / r2.c2 - 1.0).abs() < 0.2 && (r1.c3 / r2.c3 - 1.0).abs() < 0.2);
        assert!(r1.c1.is_finite() && r1.c2.is_finite() && r1.c3.is_finite());
    }

    #[test]
    fn sphere_to_cylinder_affine_and_guard() {
        let a = [0.1, -0.05];
        let f = square(1, 1.5, 121, |x, o| o[0] = a[0] * x[0] + a[1] * x[1]);
        let p = graph_point(&f, &[0.0, 0.0]).unwrap();
        let (v, cert) = sphere_to_cylinder(&f, &p, 1.0, 0.1, 0.05).unwrap();
        assert!(v.values().iter().all(|x| x.abs() < 1e-10));
        assert!(cert.cylindrical_excess < 1e-12 && cert.spherical_excess < 1e-12);
        assert!(cert.graph_gap < 1e-10);
        let steep = square(1, 1.5, 121, |x, o| o[0] = 0.9 * x[0]);
        let err = sphere_to_cylinder(&steep, &graph_point(&steep, &[0.0, 0.0]).unwrap(), 1.0, 0.1, 0.05).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
