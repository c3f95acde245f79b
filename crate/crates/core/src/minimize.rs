//! Discrete area minimization for graphs over a box, with first-variation
//! audits.
//!
//! The discrete area is the P1 area averaged over the reflected Kuhn
//! triangulations of every grid cell, so it is invariant under the symmetries
//! of the cube. Descent is a damped Newton method whose linear systems are
//! solved by conjugate gradients preconditioned with the fast Dirichlet
//! Laplacian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::area::area;
use crate::error::{Error, Result};
use crate::field::poisson::{harmonic_extension, DirichletSolver};
use crate::field::{dirichlet_energy, unflatten, GridField, Region};
use crate::geom::area_factor;
use crate::linalg;

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    /// Stop once the discrete first variation (max nodal force per unit volume) drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub boundary_lip: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: 1e-9,
            max_iter: 10_000,
            boundary_lip: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub solution: GridField,
    /// The prescribed data, masked to the boundary nodes.
    pub boundary: GridField,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub energy_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSummary {
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub energy_history: Vec<f64>,
}

impl MinimizeResult {
    pub fn summary(&self) -> MinimizeSummary {
        MinimizeSummary {
            iterations: self.iterations,
            final_gradient_norm: self.final_gradient_norm,
            energy_history: self.energy_history.clone(),
        }
    }
}

struct Simplex {
    /// m + 1 vertex offsets (flat) from the cell's lower corner.
    verts: Vec<usize>,
    /// Step k goes from verts[k] to verts[k + 1] along axes[k] in direction signs[k].
    axes: Vec<usize>,
    signs: Vec<f64>,
}

/// The averaged P1 area on a box grid.
pub(crate) struct Mesh {
    m: usize,
    n: usize,
    h: f64,
    weight: f64,
    cells: Vec<usize>,
    simplices: Vec<Simplex>,
    boundary: Vec<bool>,
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

impl Mesh {
    pub(crate) fn new(f: &GridField) -> Result<Self> {
        if f.mask().is_some() {
            return Err(Error::Precondition("area minimization needs an unmasked box".into()));
        }
        let (m, n) = (f.m(), f.n());
        let dims = f.dims().to_vec();
        if let Some(axis) = dims.iter().position(|&d| d < 3) {
            return Err(Error::TooFewSamples {
                axis,
                needed: 3,
                found: dims[axis],
            });
        }
        let strides = f.strides();
        let mut simplices = Vec::new();
        // flip patterns modulo the global flip: the last axis is never flipped
        for flips in 0..1usize << (m - 1) {
            for perm in crate::area::freudenthal(m) {
                let mut corner: Vec<usize> = (0..m).map(|a| flips >> a & 1).collect();
                let flat = |c: &[usize]| c.iter().zip(&strides).map(|(i, s)| i * s).sum::<usize>();
                let mut verts = vec![flat(&corner)];
                let mut signs = Vec::with_capacity(m);
                for &a in &perm {
                    if corner[a] == 1 {
                        corner[a] = 0;
                        signs.push(-1.0);
                    } else {
                        corner[a] = 1;
                        signs.push(1.0);
                    }
                    verts.push(flat(&corner));
                }
                simplices.push(Simplex {
                    verts,
                    axes: perm,
                    signs,
                });
            }
        }
        let cell_dims: Vec<usize> = dims.iter().map(|d| d - 1).collect();
        let total: usize = cell_dims.iter().product();
        let mut idx = vec![0usize; m];
        let cells = (0..total)
            .map(|t| {
                unflatten(t, &cell_dims, &mut idx);
                idx.iter().zip(&strides).map(|(i, s)| i * s).sum()
            })
            .collect();
        let boundary = (0..f.len())
            .map(|p| {
                unflatten(p, &dims, &mut idx);
                idx.iter().zip(&dims).any(|(&i, &d)| i == 0 || i + 1 == d)
            })
            .collect();
        let h = f.spacing();
        let weight = h.powi(m as i32) / factorial(m) as f64 / (1usize << (m - 1)) as f64;
        Ok(Mesh {
            m,
            n,
            h,
            weight,
            cells,
            simplices,
            boundary,
        })
    }

    fn local_gradient(&self, u: &[f64], base: usize, s: &Simplex, g: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        for k in 0..m {
            let (p, q) = (base + s.verts[k], base + s.verts[k + 1]);
            let a = s.axes[k];
            for c in 0..n {
                g[c * m + a] = s.signs[k] * (u[q * n + c] - u[p * n + c]) / self.h;
            }
        }
    }

    /// Adds `w · P : D(e_node)` for every vertex, i.e. the transpose of `local_gradient`.
    fn scatter(&self, out: &mut [f64], base: usize, s: &Simplex, p: &[f64], w: f64) {
        let (m, n) = (self.m, self.n);
        for k in 0..m {
            let (lo, hi) = (base + s.verts[k], base + s.verts[k + 1]);
            let a = s.axes[k];
            let f = w * s.signs[k] / self.h;
            for c in 0..n {
                let v = f * p[c * m + a];
                out[hi * n + c] += v;
                out[lo * n + c] -= v;
            }
        }
    }

    pub(crate) fn energy(&self, u: &[f64]) -> f64 {
        let mut g = vec![0.0; self.n * self.m];
        let mut e = 0.0;
        for &b in &self.cells {
            for s in &self.simplices {
                self.local_gradient(u, b, s, &mut g);
                e += area_factor(&g, self.n, self.m);
            }
        }
        e * self.weight
    }

    /// Gradient of the discrete area with respect to every nodal value.
    pub(crate) fn force(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut g = vec![0.0; self.n * self.m];
        for &b in &self.cells {
            for s in &self.simplices {
                self.local_gradient(u, b, s, &mut g);
                let d = integrand_derivative(&g, self.n, self.m);
                self.scatter(out, b, s, &d, self.weight);
            }
        }
    }

    fn hessians(&self, u: &[f64]) -> Vec<f64> {
        let k = self.n * self.m;
        let mut out = Vec::with_capacity(self.cells.len() * self.simplices.len() * k * k);
        let mut g = vec![0.0; k];
        for &b in &self.cells {
            for s in &self.simplices {
                self.local_gradient(u, b, s, &mut g);
                out.extend(integrand_hessian(&g, self.n, self.m));
            }
        }
        out
    }

    fn hess_vec(&self, hs: &[f64], v: &[f64], out: &mut [f64]) {
        let k = self.n * self.m;
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut g = vec![0.0; k];
        let mut w = vec![0.0; k];
        let mut t = 0;
        for &b in &self.cells {
            for s in &self.simplices {
                self.local_gradient(v, b, s, &mut g);
                let hm = &hs[t * k * k..(t + 1) * k * k];
                for i in 0..k {
                    w[i] = (0..k).map(|j| hm[i * k + j] * g[j]).sum();
                }
                self.scatter(out, b, s, &w, self.weight);
                t += 1;
            }
        }
        self.clear_boundary(out);
    }

    fn clear_boundary(&self, v: &mut [f64]) {
        for (p, &b) in self.boundary.iter().enumerate() {
            if b {
                v[p * self.n..(p + 1) * self.n].iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    /// Max nodal force per unit cell volume over interior nodes.
    fn force_norm(&self, force: &[f64]) -> f64 {
        let vol = self.h.powi(self.m as i32);
        force
            .chunks(self.n)
            .zip(&self.boundary)
            .filter(|(_, &b)| !b)
            .flat_map(|(c, _)| c.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()))
            / vol
    }

    /// Max Frobenius norm of the simplex gradients.
    fn max_gradient(&self, u: &[f64]) -> f64 {
        let mut g = vec![0.0; self.n * self.m];
        let mut best: f64 = 0.0;
        for &b in &self.cells {
            for s in &self.simplices {
                self.local_gradient(u, b, s, &mut g);
                best = best.max(linalg::fro_norm(&g));
            }
        }
        best
    }
}

/// DF(G) = F·G·(I + GᵀG)⁻¹.
pub fn integrand_derivative(g: &[f64], n: usize, m: usize) -> Vec<f64> {
    let (f, gm) = metric_terms(g, n, m);
    gm.into_iter().map(|v| f * v).collect()
}

fn metric_terms(g: &[f64], n: usize, m: usize) -> (f64, Vec<f64>) {
    let mut metric = linalg::tmatmul(g, g, n, m, m);
    for a in 0..m {
        metric[a * m + a] += 1.0;
    }
    let f = linalg::det(&metric, m).sqrt();
    let inv = linalg::inverse(&metric, m).expect("I + GᵀG is positive definite");
    (f, linalg::matmul(g, &inv, n, m, m))
}

/// Second derivative of the area integrand as an (nm)×(nm) matrix:
/// D²F(G)[X] = F·(⟨GM⁻¹, X⟩·GM⁻¹ + XM⁻¹ − GM⁻¹(XᵀG + GᵀX)M⁻¹).
pub fn integrand_hessian(g: &[f64], n: usize, m: usize) -> Vec<f64> {
    let k = n * m;
    let mut metric = linalg::tmatmul(g, g, n, m, m);
    for a in 0..m {
        metric[a * m + a] += 1.0;
    }
    let f = linalg::det(&metric, m).sqrt();
    let inv = linalg::inverse(&metric, m).expect("I + GᵀG is positive definite");
    let gm = linalg::matmul(g, &inv, n, m, m);
    let mut out = vec![0.0; k * k];
    let mut x = vec![0.0; k];
    for j in 0..k {
        x.iter_mut().for_each(|v| *v = 0.0);
        x[j] = 1.0;
        let dot: f64 = gm.iter().zip(&x).map(|(a, b)| a * b).sum();
        let xm = linalg::matmul(&x, &inv, n, m, m);
        let xtg = linalg::tmatmul(&x, g, n, m, m);
        let mut sym = xtg.clone();
        for a in 0..m {
            for b in 0..m {
                sym[a * m + b] += xtg[b * m + a];
            }
        }
        let tail = linalg::matmul(&linalg::matmul(&gm, &sym, n, m, m), &inv, n, m, m);
        for i in 0..k {
            out[i * k + j] = f * (dot * gm[i] + xm[i] - tail[i]);
        }
    }
    out
}

struct Preconditioner {
    solver: DirichletSolver,
    nodes: Vec<usize>,
    n: usize,
    scale: f64,
}

impl Preconditioner {
    fn new(f: &GridField) -> Self {
        let inner: Vec<usize> = f.dims().iter().map(|d| d - 2).collect();
        Preconditioner {
            solver: DirichletSolver::new(&inner, f.spacing()),
            nodes: crate::field::poisson::interior_nodes(f.dims()),
            n: f.n(),
            scale: 1.0 / f.spacing().powi(f.m() as i32),
        }
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = self.n;
        for c in 0..n {
            let rhs: Vec<f64> = self.nodes.iter().map(|&p| r[p * n + c]).collect();
            let z = self.solver.solve(&rhs);
            for (&p, v) in self.nodes.iter().zip(z) {
                out[p * n + c] = v * self.scale;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Approximately solves H d = −g; returns a descent direction.
fn newton_direction(mesh: &Mesh, pre: &Preconditioner, hs: &[f64], g: &[f64], rel_tol: f64) -> Vec<f64> {
    let len = g.len();
    let mut x = vec![0.0; len];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut z = vec![0.0; len];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let r0 = dot(&r, &r).sqrt();
    let mut ap = vec![0.0; len];
    for it in 0..500 {
        mesh.hess_vec(hs, &p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            if it == 0 {
                return z;
            }
            break;
        }
        let alpha = rz / pap;
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * r0 {
            break;
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..len {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

fn boundary_lipschitz(f: &GridField, boundary: &[bool]) -> f64 {
    let m = f.m();
    let strides = f.strides();
    let dims = f.dims();
    let mut idx = vec![0usize; m];
    let mut best: f64 = 0.0;
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(m as u32))
        .map(|t| (0..m).map(|a| (t / 3usize.pow(a as u32) % 3) as i64 - 1).collect::<Vec<i64>>())
        .filter(|o| o.iter().find(|&&v| v != 0) == Some(&1))
        .collect();
    for p in 0..f.len() {
        if !boundary[p] {
            continue;
        }
        unflatten(p, dims, &mut idx);
        'next: for o in &offsets {
            let mut q = p as i64;
            for a in 0..m {
                let j = idx[a] as i64 + o[a];
                if j < 0 || j >= dims[a] as i64 {
                    continue 'next;
                }
                q += o[a] * strides[a] as i64;
            }
            let q = q as usize;
            if !boundary[q] {
                continue;
            }
            let dist = f.spacing() * (o.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
            let gap: f64 = f
                .value(p)
                .iter()
                .zip(f.value(q))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.max(gap / dist);
        }
    }
    best
}

/// Minimizes the discrete area with the boundary values of `data` fixed;
/// interior values of `data` are ignored.
pub fn minimize_area(data: &GridField, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    let mesh = Mesh::new(data)?;
    let lip = boundary_lipschitz(data, &mesh.boundary);
    if lip > opts.boundary_lip {
        return Err(Error::Precondition(format!(
            "boundary data has Lipschitz constant {lip:.4} > {}",
            opts.boundary_lip
        )));
    }
    let start = harmonic_extension(data)?;
    let mut u = start.values().to_vec();
    let pre = Preconditioner::new(data);
    let len = u.len();
    let mut force = vec![0.0; len];
    mesh.force(&u, &mut force);
    mesh.clear_boundary(&mut force);
    let mut gnorm = mesh.force_norm(&force);
    let mut energy = mesh.energy(&u);
    let mut history = vec![energy];
    let mut iterations = 0;
    let mut trial = vec![0.0; len];
    let mut trial_force = vec![0.0; len];
    while gnorm >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                detail: format!("first variation {gnorm:e} above {:e}", opts.tol),
            });
        }
        iterations += 1;
        let hs = mesh.hessians(&u);
        let mut d = newton_direction(&mesh, &pre, &hs, &force, gnorm.sqrt().min(0.1));
        let mut slope = dot(&force, &d);
        if slope >= 0.0 {
            pre.apply(&force, &mut d);
            d.iter_mut().for_each(|v| *v = -*v);
            slope = dot(&force, &d);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            for i in 0..len {
                trial[i] = u[i] + t * d[i];
            }
            let e = mesh.energy(&trial);
            let armijo = e <= energy + 1e-4 * t * slope;
            // below roundoff the energy cannot rank steps; fall back to the force
            let flat = (energy - e).abs() <= 1e-13 * energy.abs().max(1.0);
            let mut ok = armijo;
            if !ok && flat {
                mesh.force(&trial, &mut trial_force);
                mesh.clear_boundary(&mut trial_force);
                ok = mesh.force_norm(&trial_force) < gnorm;
            }
            if ok {
                accepted = true;
                energy = e;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations,
                detail: format!("line search failed at first variation {gnorm:e}"),
            });
        }
        std::mem::swap(&mut u, &mut trial);
        history.push(energy);
        mesh.force(&u, &mut force);
        mesh.clear_boundary(&mut force);
        gnorm = mesh.force_norm(&force);
    }
    let solution = GridField::new(data.m(), data.n(), data.dims().to_vec(), data.origin().to_vec(), data.spacing(), u)?;
    let boundary = data.clone().with_mask(mesh.boundary.clone())?;
    Ok(MinimizeResult {
        solution,
        boundary,
        iterations,
        final_gradient_norm: gnorm,
        energy_history: history,
    })
}

/// Discrete area of `f` over its whole box, as minimized by [`minimize_area`].
pub fn discrete_area(f: &GridField) -> Result<f64> {
    Ok(Mesh::new(f)?.energy(f.values()))
}

/// max over κ of |⟨δ gr(f), κ⟩| / ‖Dκ‖_{C⁰}, the first variation paired with
/// each compactly supported test field through the same P1 discretization.
pub fn first_variation_residual(f: &GridField, tests: &[GridField]) -> Result<f64> {
    let mesh = Mesh::new(f)?;
    if tests.is_empty() {
        return Err(Error::Empty("no test fields".into()));
    }
    let mut force = vec![0.0; f.values().len()];
    mesh.force(f.values(), &mut force);
    let mut worst: f64 = 0.0;
    for k in tests {
        f.check_same_grid(k)?;
        if k.n() != f.n() {
            return Err(Error::GridMismatch(format!("test field has n = {}, graph n = {}", k.n(), f.n())));
        }
        let kv = k.values();
        let on_boundary = mesh
            .boundary
            .iter()
            .enumerate()
            .any(|(p, &b)| b && kv[p * f.n()..(p + 1) * f.n()].iter().any(|v| *v != 0.0));
        if on_boundary {
            return Err(Error::Precondition("test field is not compactly supported".into()));
        }
        let norm = mesh.max_gradient(kv);
        if norm == 0.0 {
            continue;
        }
        worst = worst.max(dot(&force, kv).abs() / norm);
    }
    Ok(worst)
}

/// `count` smooth bumps (1 − |x − c|²/s²)³₊ times random unit vectors,
/// supported strictly inside the box.
pub fn test_field_battery(f: &GridField, count: usize, seed: u64) -> Result<Vec<GridField>> {
    let (m, n) = (f.m(), f.n());
    let lo = f.origin().to_vec();
    let hi = f.upper();
    let half = (0..m).map(|a| hi[a] - lo[a]).fold(f64::INFINITY, f64::min) / 2.0;
    let margin = 2.0 * f.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let s = rng.gen_range(0.2..0.6) * (half - margin);
        let c: Vec<f64> = (0..m)
            .map(|a| rng.gen_range(lo[a] + s + margin..hi[a] - s - margin))
            .collect();
        let mut dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = linalg::fro_norm(&dir).max(1e-12);
        dir.iter_mut().for_each(|v| *v /= nrm);
        let k = GridField::from_fn(n, f.dims().to_vec(), lo.clone(), f.spacing(), |x, o| {
            let t = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (s * s);
            let b = if t < 1.0 { (1.0 - t).powi(3) } else { 0.0 };
            for (v, d) in o.iter_mut().zip(&dir) {
                *v = b * d;
            }
        })?;
        out.push(k);
    }
    Ok(out)
}

/// area − |region| − ½∫|Df|², the remainder of the quadratic expansion.
pub fn linearization_gap(f: &GridField, region: &Region) -> Result<f64> {
    let measure: f64 = f.weights(region)?.into_iter().map(|(_, w)| w).sum();
    Ok(area(f, region)? - measure - 0.5 * dirichlet_energy(f, region)?)
}

/// Boundary-data presets on the square [−half, half]^m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Preset {
    /// x ↦ slope·x + offset, slope row-major n×m.
    Affine { slope: Vec<f64>, offset: Vec<f64> },
    /// ε·cos(kθ) for n = 1, ε·(cos kθ, sin kθ) for n = 2, θ the angle in the (x₁, x₂) plane.
    Trig { eps: f64, mode: u32 },
    /// ε·(x₁² − x₂²) and, for a second component, ε·x₁x₂.
    Harmonic { eps: f64 },
    /// ε·zᵏ with z = x₁ + i x₂, as a map into ℝ².
    Holomorphic { eps: f64, power: u32 },
}

impl Preset {
    pub fn sample(&self, m: usize, n: usize, half: f64, samples: usize) -> Result<GridField> {
        match self {
            Preset::Affine { slope, offset } => {
                if slope.len() != n * m || offset.len() != n {
                    return Err(Error::Params(format!("affine preset needs {} slopes and {n} offsets", n * m)));
                }
            }
            Preset::Trig { .. } | Preset::Harmonic { .. } => {
                if m < 2 || n > 2 {
                    return Err(Error::Params("trig and harmonic presets need m ≥ 2 and n ≤ 2".into()));
                }
            }
            Preset::Holomorphic { .. } => {
                if m != 2 || n != 2 {
                    return Err(Error::Params("holomorphic preset needs m = n = 2".into()));
                }
            }
        }
        let h = 2.0 * half / (samples - 1) as f64;
        GridField::from_fn(n, vec![samples; m], vec![-half; m], h, |x, o| self.eval(x, o))
    }

    pub fn eval(&self, x: &[f64], o: &mut [f64]) {
        match self {
            Preset::Affine { slope, offset } => {
                let m = x.len();
                for (c, v) in o.iter_mut().enumerate() {
                    *v = offset[c] + (0..m).map(|a| slope[c * m + a] * x[a]).sum::<f64>();
                }
            }
            Preset::Trig { eps, mode } => {
                let th = x[1].atan2(x[0]) * *mode as f64;
                o[0] = eps * th.cos();
                if o.len() > 1 {
                    o[1] = eps * th.sin();
                }
            }
            Preset::Harmonic { eps } => {
                o[0] = eps * (x[0] * x[0] - x[1] * x[1]);
                if o.len() > 1 {
                    o[1] = eps * x[0] * x[1];
                }
            }
            Preset::Holomorphic { eps, power } => {
                let (mut re, mut im) = (1.0, 0.0);
                for _ in 0..*power {
                    let t = re * x[0] - im * x[1];
                    im = re * x[1] + im * x[0];
                    re = t;
                }
                o[0] = eps * re;
                o[1] = eps * im;
            }
        }
    }
}
