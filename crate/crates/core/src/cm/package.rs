use serde::{Deserialize, Serialize};

use super::grid::DyadicCube;
use super::params::Params;
use crate::area::{Graph, DEFAULT_SUBSAMPLE};
use crate::error::{Error, Result};
use crate::field::{
    derivative, l1_distance, laplacian, mollify, CubicSpline, GridField, Interpolant, Mollifier,
    Multilinear, Region,
};
use crate::geom::{reparametrize_graph, slope_gap, NearHorizontalPlane, OutputGrid, ReparamOptions};
use crate::lipapprox::{good_set, mcshane_window};

/// Shared per-run state: the base map, its spline and its sampled graph.
pub struct CmContext<'a> {
    pub params: Params,
    pub u: &'a GridField,
    spline: CubicSpline,
    graph: Graph<'a>,
}

impl<'a> CmContext<'a> {
    pub fn new(u: &'a GridField, params: Params) -> Result<Self> {
        let params = params.validate()?;
        if (u.m(), u.n()) != (params.m, params.n) {
            return Err(Error::Precondition(format!(
                "field is {}→{} but parameters say {}→{}",
                u.m(),
                u.n(),
                params.m,
                params.n
            )));
        }
        if u.mask().is_some() {
            return Err(Error::Precondition("center manifold needs an unmasked base field".into()));
        }
        let need = params.required_half_side();
        let up = u.upper();
        for a in 0..params.m {
            if u.origin()[a] > -need + 1e-12 || up[a] < need - 1e-12 {
                return Err(Error::DomainEscape(format!(
                    "base grid must cover [−{need:.4}, {need:.4}]ᵐ so that every ball 𝐁_L fits"
                )));
            }
        }
        Ok(CmContext {
            spline: CubicSpline::new(u)?,
            graph: Graph::new(u)?,
            params,
            u,
        })
    }

    pub fn spline(&self) -> &CubicSpline {
        &self.spline
    }
}

/// Per-cube measurements feeding the estimate reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeDiagnostics {
    /// ‖Dⁱg_L‖_{C⁰(L′)} for i = 1..4.
    pub g_norms: [f64; 4],
    /// ‖z_L − f_L‖_{L¹(B_{4M₀ℓ})}.
    pub zf_l1: f64,
    /// ‖Δz_L‖_{C⁰(B_{4M₀ℓ})}.
    pub lap_z: f64,
}

#[derive(Clone, Debug)]
pub struct CubePackage {
    pub cube: DyadicCube,
    pub p_l: Vec<f64>,
    pub plane: NearHorizontalPlane,
    /// ℓ^{−m}·E_cyl of the chart graph over B_{8M₀ℓ}.
    pub excess_l: f64,
    /// The same excess normalized by the chart radius, as fed to the Lipschitz approximation.
    pub chart_excess: f64,
    /// |π⃗_L − π⃗₀|.
    pub tilt: f64,
    pub good_points: usize,
    /// |B_ρ \ K| in chart coordinates.
    pub bad_measure: f64,
    pub rho: f64,
    pub lip_on_k: f64,
    pub f_l: Option<GridField>,
    pub z_l: Option<GridField>,
    pub g_l: GridField,
    pub diagnostics: CubeDiagnostics,
}

impl CubePackage {
    pub fn g_spline(&self) -> Result<CubicSpline> {
        CubicSpline::new(&self.g_l)
    }
}

fn nearest_gradient(graph: &Graph, x: &[f64]) -> Vec<f64> {
    let g = graph.gradient();
    let idx: Vec<usize> = (0..g.m())
        .map(|a| (((x[a] - g.origin()[a]) / g.spacing()).round().max(0.0) as usize).min(g.dims()[a] - 1))
        .collect();
    g.value(g.flat(&idx)).to_vec()
}

fn max_norm(f: &GridField, keep: impl Fn(&[f64]) -> bool) -> f64 {
    let k = f.n();
    let mut x = vec![0.0; f.m()];
    let mut best = 0.0f64;
    for p in 0..f.len() {
        f.point_into(p, &mut x);
        if keep(&x) {
            let v = f.values()[p * k..(p + 1) * k].iter().map(|v| v * v).sum::<f64>().sqrt();
            best = best.max(v);
        }
    }
    best
}

/// π_L, f_L, z_L and g_L for one cube. With `keep_fields` the chart maps
/// f_L and z_L are retained.
pub fn cube_package(ctx: &CmContext, cube: &DyadicCube, keep_fields: bool) -> Result<CubePackage> {
    build(ctx, cube, keep_fields).map_err(|e| Error::Cube {
        level: cube.level as usize,
        index: cube.index.clone(),
        source: Box::new(e),
    })
}

fn build(ctx: &CmContext, cube: &DyadicCube, keep_fields: bool) -> Result<CubePackage> {
    let prm = &ctx.params;
    let (m, n) = (prm.m, prm.n);
    let ell = cube.side;
    let x_l = &cube.center;
    let mut ux = vec![0.0; n];
    Multilinear::new(ctx.u).value(x_l, &mut ux)?;
    let p_l: Vec<f64> = x_l.iter().chain(&ux).copied().collect();

    let big = 32.0 * prm.m0 * ell;
    let seed = nearest_gradient(&ctx.graph, x_l);
    let (plane, _) = ctx.graph.ball_moments(&p_l, big, DEFAULT_SUBSAMPLE)?.optimal_plane(&seed)?;
    let horizontal = NearHorizontalPlane::horizontal(m, n);
    let tilt = slope_gap(plane.slope(), &vec![0.0; n * m], n, m).sqrt();

    // chart over π_L centred at p_L
    let r = 8.0 * prm.m0 * ell;
    let zero = vec![0.0; m];
    let chart = OutputGrid::centered(&zero, r, 2 * prm.chart_samples + 1);
    let opts = ReparamOptions {
        scale: ell,
        ..ReparamOptions::default()
    };
    let v = reparametrize_graph(&ctx.spline, &horizontal, &plane, &chart, &opts)?;
    let inner = 4.0 * prm.m0 * ell;
    let e_cyl = Graph::new(&v)?.cylindrical_excess(&zero, r, &horizontal)?.value;
    let chart_excess = e_cyl / r.powi(m as i32);
    let excess_l = e_cyl / ell.powi(m as i32);

    let good = good_set(&v, &zero, r, chart_excess, &prm.lipapprox())?;
    // f_L only where the mollification of B_{4M₀ℓ} and its Laplacian reach
    let s = v.spacing();
    let reach = (ell / s * (1.0 - 1e-12)).ceil() as usize;
    let half_nodes = ((inner / s) * (1.0 - 1e-12)).ceil() as usize + reach + 1;
    let mid = prm.chart_samples;
    if half_nodes > mid {
        return Err(Error::InsufficientMargin("chart too small for the mollification window".into()));
    }
    let f = mcshane_window(&v, &good.nodes, good.lip_on_k, &vec![mid - half_nodes; m], &vec![2 * half_nodes + 1; m])?;
    let z = mollify(&f, &Mollifier::new(ell))?;
    let cut = (f.dims()[0] - z.dims()[0]) / 2;
    let f_on_z = f.window(&vec![cut; m], z.dims())?;
    let zf_l1 = l1_distance(&z, &f_on_z, &Region::ball(&zero, inner))?;
    let lap = laplacian(&z)?;
    let lap_z = max_norm(&lap, |x| x.iter().map(|v| v * v).sum::<f64>().sqrt() <= inner * (1.0 + 1e-12));

    let back = OutputGrid::centered(x_l, ell, prm.g_samples);
    let g = reparametrize_graph(&CubicSpline::new(&z)?, &plane, &horizontal, &back, &opts)?;
    let mut g_norms = [0.0; 4];
    for (i, slot) in g_norms.iter_mut().enumerate() {
        *slot = max_norm(&derivative(&g, i + 1)?, |_| true);
    }

    Ok(CubePackage {
        cube: cube.clone(),
        p_l,
        plane,
        excess_l,
        chart_excess,
        tilt,
        good_points: good.nodes.len(),
        bad_measure: good.bad_measure,
        rho: good.rho,
        lip_on_k: good.lip_on_k,
        f_l: keep_fields.then_some(f),
        z_l: keep_fields.then_some(z),
        g_l: g,
        diagnostics: CubeDiagnostics { g_norms, zf_l1, lap_z },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(m: usize, n: usize, half: f64, samples: usize) -> GridField {
        let a = [0.3, -0.2, 0.1, 0.25];
        let b = [0.7, -0.4];
        let mut f = GridField::centered(m, n, half, samples).unwrap();
        for p in 0..f.len() {
            let x = f.point(p);
            for c in 0..n {
                f.value_mut(p)[c] = b[c] + (0..m).map(|j| a[c * m + j] * x[j]).sum::<f64>();
            }
        }
        f
    }

    #[test]
    fn affine_chain_is_exact() {
        let prm = Params::new(2, 2);
        let u = affine(2, 2, 1.6, 129);
        let ctx = CmContext::new(&u, prm.clone()).unwrap();
        for (k, index) in [(5u32, vec![0i64, 31]), (6, vec![20, 33]), (8, vec![255, 128])] {
            let cube = DyadicCube::new(&ctx.params, k, index).unwrap();
            let pkg = cube_package(&ctx, &cube, true).unwrap();
            assert!(pkg.excess_l < 1e-18, "E(L) = {:e}", pkg.excess_l);
            let s = pkg.plane.slope();
            let a = [0.3, -0.2, 0.1, 0.25];
            for (x, y) in s.iter().zip(a) {
                assert!((x - y).abs() < 1e-6);
            }
            let f = pkg.f_l.as_ref().unwrap();
            assert!(f.values().iter().all(|v| v.abs() < 1e-10));
            let mut err = 0.0f64;
            for p in 0..pkg.g_l.len() {
                let x = pkg.g_l.point(p);
                let want = [0.7 + 0.3 * x[0] - 0.2 * x[1], -0.4 + 0.1 * x[0] + 0.25 * x[1]];
                for c in 0..2 {
                    err = err.max((pkg.g_l.value(p)[c] - want[c]).abs());
                }
            }
            assert!(err < 1e-10, "g_L error {err:e}");
            assert!(pkg.diagnostics.g_norms[1] < 1e-6);
            assert!(pkg.diagnostics.lap_z < 1e-6);
        }
    }

    #[test]
    fn rejects_small_base_domain() {
        let u = affine(2, 1, 1.0, 65);
        assert!(matches!(CmContext::new(&u, Params::new(2, 1)), Err(Error::DomainEscape(_))));
    }
}
