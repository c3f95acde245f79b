//! Near-horizontal m-planes in ℝ^{m+n}, their orienting m-vectors, rotations
//! between them, and graphs re-expressed over tilted planes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridField, Interpolant};
use crate::linalg;

/// Default bound on the Hilbert–Schmidt norm of a plane slope.
pub const SLOPE_BOUND: f64 = 4.0;
/// Default bound c₀ on |Q − Id| for rotations.
pub const ROTATION_BOUND: f64 = 0.2;
/// Measured constant C in Lip(f′) ≤ Lip(f) + C·|Q − Id| (Hilbert–Schmidt deviation).
pub const ROTATION_LIP_CONSTANT: f64 = 6.0;

/// The m-plane through `basepoint` spanned by the columns of [Id; A].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneRepr", into = "PlaneRepr")]
pub struct NearHorizontalPlane {
    m: usize,
    n: usize,
    basepoint: Vec<f64>,
    slope: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PlaneRepr {
    m: usize,
    n: usize,
    basepoint: Vec<f64>,
    slope: Vec<f64>,
}

impl TryFrom<PlaneRepr> for NearHorizontalPlane {
    type Error = Error;
    fn try_from(r: PlaneRepr) -> Result<Self> {
        NearHorizontalPlane::new(r.m, r.n, r.basepoint, r.slope)
    }
}

impl From<NearHorizontalPlane> for PlaneRepr {
    fn from(p: NearHorizontalPlane) -> Self {
        PlaneRepr {
            m: p.m,
            n: p.n,
            basepoint: p.basepoint,
            slope: p.slope,
        }
    }
}

impl NearHorizontalPlane {
    /// `slope` is n×m row-major; `basepoint` has m+n entries.
    pub fn new(m: usize, n: usize, basepoint: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        Self::with_bound(m, n, basepoint, slope, SLOPE_BOUND)
    }

    pub fn with_bound(m: usize, n: usize, basepoint: Vec<f64>, slope: Vec<f64>, bound: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Precondition("plane dimensions must be positive".into()));
        }
        if basepoint.len() != m + n || slope.len() != n * m {
            return Err(Error::Precondition(format!(
                "plane data sizes {} and {} do not match m = {m}, n = {n}",
                basepoint.len(),
                slope.len()
            )));
        }
        if basepoint.iter().chain(&slope).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite plane data".into()));
        }
        let norm = linalg::fro_norm(&slope);
        if norm > bound {
            return Err(Error::SlopeBound { norm, bound });
        }
        Ok(NearHorizontalPlane {
            m,
            n,
            basepoint,
            slope,
        })
    }

    /// π₀ through the origin.
    pub fn horizontal(m: usize, n: usize) -> Self {
        NearHorizontalPlane {
            m,
            n,
            basepoint: vec![0.0; m + n],
            slope: vec![0.0; n * m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn basepoint(&self) -> &[f64] {
        &self.basepoint
    }
    pub fn slope(&self) -> &[f64] {
        &self.slope
    }
    pub fn slope_norm(&self) -> f64 {
        linalg::fro_norm(&self.slope)
    }

    /// Same plane direction through another point.
    pub fn through(&self, basepoint: Vec<f64>) -> Result<Self> {
        NearHorizontalPlane::with_bound(self.m, self.n, basepoint, self.slope.clone(), f64::INFINITY)
    }

    /// Orthonormal tangent frame, (m+n)×m, from Gram–Schmidt on the columns of [Id; A].
    pub fn tangent_frame(&self) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut a = vec![0.0; (m + n) * m];
        for j in 0..m {
            a[j * m + j] = 1.0;
        }
        for i in 0..n {
            for j in 0..m {
                a[(m + i) * m + j] = self.slope[i * m + j];
            }
        }
        linalg::gram_schmidt(&a, m + n, m)
    }

    /// Orthonormal normal frame, (m+n)×n, from Gram–Schmidt on the columns of [−Aᵀ; Id].
    pub fn normal_frame(&self) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut a = vec![0.0; (m + n) * n];
        for j in 0..m {
            for i in 0..n {
                a[j * n + i] = -self.slope[i * m + j];
            }
        }
        for i in 0..n {
            a[(m + i) * n + i] = 1.0;
        }
        linalg::gram_schmidt(&a, m + n, n)
    }

    /// [E N] as an (m+n)×(m+n) orthogonal matrix.
    pub fn frame(&self) -> Vec<f64> {
        let d = self.m + self.n;
        let e = self.tangent_frame();
        let nf = self.normal_frame();
        let mut f = vec![0.0; d * d];
        for r in 0..d {
            for j in 0..self.m {
                f[r * d + j] = e[r * self.m + j];
            }
            for i in 0..self.n {
                f[r * d + self.m + i] = nf[r * self.n + i];
            }
        }
        f
    }

    /// Coordinates of the unit m-vector in the basis e_S, S over
    /// `linalg::combinations(m+n, m)`.
    pub fn mvector(&self) -> Vec<f64> {
        let mut w = wedge_coordinates(&self.slope, self.n, self.m);
        let j = area_factor(&self.slope, self.n, self.m);
        w.iter_mut().for_each(|v| *v /= j);
        w
    }

    /// Splits X − p into tangent and normal coordinates.
    pub fn to_local(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.m + self.n;
        let diff: Vec<f64> = x.iter().zip(&self.basepoint).map(|(a, b)| a - b).collect();
        let e = self.tangent_frame();
        let nf = self.normal_frame();
        (
            linalg::tmatmul(&e, &diff, d, self.m, 1),
            linalg::tmatmul(&nf, &diff, d, self.n, 1),
        )
    }

    /// p + E·t + N·s.
    pub fn from_local(&self, t: &[f64], s: &[f64]) -> Vec<f64> {
        let d = self.m + self.n;
        let e = self.tangent_frame();
        let nf = self.normal_frame();
        let a = linalg::matmul(&e, t, d, self.m, 1);
        let b = linalg::matmul(&nf, s, d, self.n, 1);
        (0..d).map(|r| self.basepoint[r] + a[r] + b[r]).collect()
    }
}

/// √det(Id + AᵀA) for an n×m slope.
pub fn area_factor(slope: &[f64], n: usize, m: usize) -> f64 {
    let mut g = linalg::tmatmul(slope, slope, n, m, m);
    for j in 0..m {
        g[j * m + j] += 1.0;
    }
    linalg::det(&g, m).sqrt()
}

/// All m×m minors of [Id; A] (unnormalized wedge coordinates of the
/// columns), ordered as `linalg::combinations(m+n, m)`.
pub fn wedge_coordinates(slope: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut full = vec![0.0; (m + n) * m];
    for j in 0..m {
        full[j * m + j] = 1.0;
    }
    full[m * m..].copy_from_slice(slope);
    let cols: Vec<usize> = (0..m).collect();
    linalg::combinations(m + n, m)
        .iter()
        .map(|rows| linalg::minor(&full, m, rows, &cols))
        .collect()
}

/// ⟨π⃗_G, π⃗_A⟩ for the planes of slopes G and A, as det(Id + GᵀA)/(J_G J_A).
pub fn slope_inner(g: &[f64], a: &[f64], n: usize, m: usize) -> f64 {
    let mut k = linalg::tmatmul(g, a, n, m, m);
    for j in 0..m {
        k[j * m + j] += 1.0;
    }
    linalg::det(&k, m) / (area_factor(g, n, m) * area_factor(a, n, m))
}

/// ⟨π⃗_P, π⃗_Q⟩ = det(E_Pᵀ E_Q).
pub fn mvector_inner(p: &NearHorizontalPlane, q: &NearHorizontalPlane) -> f64 {
    assert_eq!((p.m, p.n), (q.m, q.n), "planes of different dimensions");
    let d = p.m + p.n;
    let g = linalg::tmatmul(&p.tangent_frame(), &q.tangent_frame(), d, p.m, p.m);
    linalg::det(&g, p.m)
}

/// |π⃗_P − π⃗_Q|².
pub fn mvector_gap(p: &NearHorizontalPlane, q: &NearHorizontalPlane) -> f64 {
    (2.0 - 2.0 * mvector_inner(p, q)).max(0.0)
}

/// |T⃗ − π⃗_P|² where T is the tangent plane of slope `du` (n×m).
/// Summed over wedge coordinates, so small gaps keep full relative precision.
pub fn tangent_mvector_gap(du: &[f64], plane: &NearHorizontalPlane) -> Result<f64> {
    let norm = linalg::fro_norm(du);
    if norm > SLOPE_BOUND {
        return Err(Error::SlopeBound {
            norm,
            bound: SLOPE_BOUND,
        });
    }
    Ok(slope_gap(du, &plane.slope, plane.n, plane.m))
}

/// |π⃗_G − π⃗_A|² from wedge coordinates, without bound checks.
pub fn slope_gap(g: &[f64], a: &[f64], n: usize, m: usize) -> f64 {
    let wg = wedge_coordinates(g, n, m);
    let wa = wedge_coordinates(a, n, m);
    let jg = area_factor(g, n, m);
    let ja = area_factor(a, n, m);
    wg.iter().zip(&wa).map(|(x, y)| (x / jg - y / ja).powi(2)).sum()
}

/// Orthogonal Q with Q·π_from = π_to (frames mapped onto frames).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    dim: usize,
    q: Vec<f64>,
    deviation: f64,
}

impl Rotation {
    pub fn between(from: &NearHorizontalPlane, to: &NearHorizontalPlane) -> Result<Self> {
        Self::between_with_bound(from, to, ROTATION_BOUND)
    }

    pub fn between_with_bound(from: &NearHorizontalPlane, to: &NearHorizontalPlane, c0: f64) -> Result<Self> {
        let d = from.m + from.n;
        let ft = linalg::transpose(&from.frame(), d, d);
        let q = linalg::matmul(&to.frame(), &ft, d, d, d);
        let deviation = (0..d * d)
            .map(|k| {
                let id = if k / d == k % d { 1.0 } else { 0.0 };
                (q[k] - id).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        if deviation > c0 {
            return Err(Error::Precondition(format!("rotation deviation {deviation} exceeds c0 = {c0}")));
        }
        Ok(Rotation { dim: d, q, deviation })
    }

    pub fn matrix(&self) -> &[f64] {
        &self.q
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// |Q − Id| in the Hilbert–Schmidt norm.
    pub fn deviation(&self) -> f64 {
        self.deviation
    }
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        linalg::matmul(&self.q, v, self.dim, self.dim, 1)
    }
}

/// Certified Lip(f′) ≤ Lip(f) + C·|Q − Id| for a graph rotated by Q.
pub fn lipschitz_bound_after_rotation(lip_f: f64, deviation: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&lip_f) {
        return Err(Error::Precondition(format!("Lip(f) = {lip_f} outside [0, 2]")));
    }
    if !(0.0..=ROTATION_BOUND).contains(&deviation) {
        return Err(Error::Precondition(format!(
            "rotation deviation {deviation} outside [0, {ROTATION_BOUND}]"
        )));
    }
    Ok(lip_f + ROTATION_LIP_CONSTANT * deviation)
}

/// Target grid for a reparametrization, in orthonormal coordinates of the target plane.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputGrid {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub dims: Vec<usize>,
    /// When set, only nodes within this closed disk are solved; the rest are masked out.
    pub disk: Option<(Vec<f64>, f64)>,
}

impl OutputGrid {
    pub fn centered(center: &[f64], half: f64, samples: usize) -> Self {
        OutputGrid {
            origin: center.iter().map(|c| c - half).collect(),
            spacing: 2.0 * half / (samples - 1) as f64,
            dims: vec![samples; center.len()],
            disk: None,
        }
    }

    pub fn with_disk(mut self, center: &[f64], radius: f64) -> Self {
        self.disk = Some((center.to_vec(), radius));
        self
    }
}

#[derive(Clone, Debug)]
pub struct ReparamOptions {
    /// Local length scale ℓ; the accepted residual is 10⁻¹⁰·ℓ.
    pub scale: f64,
    pub max_iter: usize,
    /// Lipschitz constant of the source map, checked against the tilt when given.
    pub lip: Option<f64>,
}

impl Default for ReparamOptions {
    fn default() -> Self {
        ReparamOptions {
            scale: 1.0,
            max_iter: 50,
            lip: None,
        }
    }
}

/// Re-expresses gr(f) over `source` as a graph over `target`.
///
/// A source point x (tangent coordinates of `source`) lifts to
/// X = p_S + E_S x + N_S f(x). Each output node y is solved for by Newton on
/// E_Tᵀ(X(x) − p_T) = y, and the output value is N_Tᵀ(X(x) − p_T).
pub fn reparametrize_graph(
    f: &dyn Interpolant,
    source: &NearHorizontalPlane,
    target: &NearHorizontalPlane,
    out: &OutputGrid,
    opts: &ReparamOptions,
) -> Result<GridField> {
    let (m, n) = (source.m, source.n);
    if (target.m, target.n) != (m, n) || f.m() != m || f.n() != n {
        return Err(Error::Precondition("source, target and map dimensions disagree".into()));
    }
    if out.dims.len() != m {
        return Err(Error::Precondition("output grid has the wrong dimension".into()));
    }
    if let Some(lip) = opts.lip {
        let tilt: f64 = source
            .slope
            .iter()
            .zip(&target.slope)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if lip * tilt >= 0.5 {
            return Err(Error::Precondition(format!(
                "Lip(f)·tilt = {lip}·{tilt} not below 1/2; projection may fold"
            )));
        }
    }
    let d = m + n;
    let (es, ns) = (source.tangent_frame(), source.normal_frame());
    let (et, nt) = (target.tangent_frame(), target.normal_frame());
    let shift: Vec<f64> = source.basepoint.iter().zip(&target.basepoint).map(|(a, b)| a - b).collect();
    let c = linalg::tmatmul(&et, &shift, d, m, 1);
    let dn = linalg::tmatmul(&nt, &shift, d, n, 1);
    let a1 = linalg::tmatmul(&et, &es, d, m, m);
    let a2 = linalg::tmatmul(&et, &ns, d, m, n);
    let b1 = linalg::tmatmul(&nt, &es, d, n, m);
    let b2 = linalg::tmatmul(&nt, &ns, d, n, n);
    let a1_inv = linalg::inverse(&a1, m).ok_or_else(|| Error::Precondition("target plane is vertical relative to source".into()))?;

    let total: usize = out.dims.iter().product();
    let grid = GridField::new(m, n, out.dims.clone(), out.origin.clone(), out.spacing, vec![0.0; total * n])?;
    let tol = 1e-10 * opts.scale;
    let lo = f.lower().to_vec();
    let hi = f.upper().to_vec();

    let mut values = vec![0.0; total * n];
    let mut y = vec![0.0; m];
    let mut y_prev = vec![0.0; m];
    let mut x = vec![0.0; m];
    let mut fx = vec![0.0; n];
    let mut jac = vec![0.0; n * m];
    let mut jinv = a1_inv.clone();
    let mut first = true;

    // Φ(x) = c + A1 x + A2 f(x) − y
    let residual = |x: &[f64], y: &[f64], fx: &mut [f64], jac: &mut [f64], r: &mut [f64]| -> Result<f64> {
        f.eval(x, fx, Some(jac))?;
        for i in 0..m {
            let mut s = c[i] - y[i];
            for j in 0..m {
                s += a1[i * m + j] * x[j];
            }
            for k in 0..n {
                s += a2[i * n + k] * fx[k];
            }
            r[i] = s;
        }
        Ok(r.iter().map(|v| v * v).sum::<f64>().sqrt())
    };
    let clamp = |x: &mut [f64]| {
        for j in 0..m {
            x[j] = x[j].clamp(lo[j], hi[j]);
        }
    };

    let mut r = vec![0.0; m];
    let mut trial = vec![0.0; m];
    let mut r_trial = vec![0.0; m];
    let mut step = vec![0.0; m];
    let mut mask = out.disk.as_ref().map(|_| vec![false; total]);
    for p in 0..total {
        grid.point_into(p, &mut y);
        if let (Some((c0, rad)), Some(mk)) = (out.disk.as_ref(), mask.as_mut()) {
            let d2: f64 = y.iter().zip(c0).map(|(a, b)| (a - b).powi(2)).sum();
            if d2.sqrt() > *rad {
                continue;
            }
            mk[p] = true;
        }
        // predictor: x ≈ x_prev + J⁻¹ (y − y_prev)
        if first {
            let rhs: Vec<f64> = (0..m).map(|i| y[i] - c[i]).collect();
            x = linalg::matmul(&a1_inv, &rhs, m, m, 1);
            first = false;
        } else {
            let dy: Vec<f64> = (0..m).map(|i| y[i] - y_prev[i]).collect();
            let dx = linalg::matmul(&jinv, &dy, m, m, 1);
            for j in 0..m {
                x[j] += dx[j];
            }
        }
        clamp(&mut x);
        let mut res = residual(&x, &y, &mut fx, &mut jac, &mut r)?;
        let mut iters = 0;
        while res > 1e-14 * (1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max)) && iters < opts.max_iter {
            iters += 1;
            let mut jm = a1.clone();
            for i in 0..m {
                for j in 0..m {
                    for k in 0..n {
                        jm[i * m + j] += a2[i * n + k] * jac[k * m + j];
                    }
                }
            }
            step.copy_from_slice(&r);
            if linalg::solve(&jm, &mut step, m).is_none() {
                break;
            }
            if let Some(inv) = linalg::inverse(&jm, m) {
                jinv = inv;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                for j in 0..m {
                    trial[j] = x[j] - t * step[j];
                }
                clamp(&mut trial);
                let rt = residual(&trial, &y, &mut fx, &mut jac, &mut r_trial)?;
                if rt < res {
                    x.copy_from_slice(&trial);
                    r.copy_from_slice(&r_trial);
                    res = rt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // fx and jac must correspond to the final x
        res = residual(&x, &y, &mut fx, &mut jac, &mut r)?;
        if res > tol {
            let at_edge = (0..m).any(|j| x[j] <= lo[j] || x[j] >= hi[j]);
            if at_edge {
                return Err(Error::DomainEscape(format!(
                    "target point {y:?} has no preimage inside the source domain"
                )));
            }
            return Err(Error::NonConvergence {
                iterations: iters,
                detail: format!("target point {y:?}: residual {res:e} above {tol:e}"),
            });
        }
        let out_val = &mut values[p * n..(p + 1) * n];
        for k in 0..n {
            let mut s = dn[k];
            for j in 0..m {
                s += b1[k * m + j] * x[j];
            }
            for l in 0..n {
                s += b2[k * n + l] * fx[l];
            }
            out_val[k] = s;
        }
        y_prev.copy_from_slice(&y);
    }
    let g = GridField::new(m, n, out.dims.clone(), out.origin.clone(), out.spacing, values)?;
    match mask {
        Some(mk) => g.with_mask(mk),
        None => Ok(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{c0_distance, lipschitz_constant, Multilinear, Region};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(m: usize, n: usize, slope: Vec<f64>) -> NearHorizontalPlane {
        NearHorizontalPlane::new(m, n, vec![0.0; m + n], slope).unwrap()
    }

    fn random_slope(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    /// Wedge coordinate of columns of a (rows×m) matrix on row set S by the
    /// Leibniz permutation expansion.
    fn leibniz(a: &[f64], m: usize, rows: &[usize]) -> f64 {
        fn perms(k: usize) -> Vec<(Vec<usize>, f64)> {
            if k == 1 {
                return vec![(vec![0], 1.0)];
            }
            let mut out = Vec::new();
            for (p, s) in perms(k - 1) {
                for pos in 0..k {
                    let mut q = p.clone();
                    q.insert(pos, k - 1);
                    // moving k−1 from the end to `pos` takes k−1−pos transpositions
                    let sign = if (k - 1 - pos).is_multiple_of(2) { s } else { -s };
                    out.push((q, sign));
                }
            }
            out
        }
        perms(m)
            .into_iter()
            .map(|(p, s)| s * (0..m).map(|j| a[rows[p[j]] * m + j]).product::<f64>())
            .sum()
    }

    #[test]
    fn horizontal_inner_is_one() {
        let p = NearHorizontalPlane::horizontal(2, 2);
        assert_eq!(mvector_inner(&p, &p), 1.0);
    }

    #[test]
    fn single_entry_slope() {
        for &(m, n) in &[(1, 1), (2, 1), (2, 2), (3, 2)] {
            for &a in &[0.1, 0.5, 1.3, -2.0] {
                let mut s = vec![0.0; n * m];
                s[n * m - 1] = a;
                let p = plane(m, n, s.clone());
                let h = NearHorizontalPlane::horizontal(m, n);
                let want = 1.0 / (1.0 + a * a).sqrt();
                assert_relative_eq!(mvector_inner(&h, &p), want, epsilon = 1e-14);
                assert_relative_eq!(tangent_mvector_gap(&s, &h).unwrap(), 2.0 - 2.0 * want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gram_determinant_matches_wedge_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows = linalg::combinations(4, 2);
        for _ in 0..100 {
            let p = plane(2, 2, random_slope(&mut rng, 4, 1.0));
            let q = plane(2, 2, random_slope(&mut rng, 4, 1.0));
            let (ep, eq) = (p.tangent_frame(), q.tangent_frame());
            let brute: f64 = rows.iter().map(|s| leibniz(&ep, 2, s) * leibniz(&eq, 2, s)).sum();
            assert!((mvector_inner(&p, &q) - brute).abs() < 1e-12);
            assert!((slope_inner(p.slope(), q.slope(), 2, 2) - brute).abs() < 1e-12);
            // unit m-vector coordinates agree with the orthonormal-frame expansion
            for (s, v) in rows.iter().zip(p.mvector()) {
                assert!((leibniz(&ep, 2, s) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frames_are_orthonormal_and_span_the_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, n) in &[(1, 1), (2, 1), (2, 2), (3, 2)] {
            let p = plane(m, n, random_slope(&mut rng, n * m, 1.5));
            let f = p.frame();
            let d = m + n;
            let g = linalg::tmatmul(&f, &f, d, d, d);
            for i in 0..d {
                for j in 0..d {
                    let id = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i * d + j] - id).abs() < 1e-12);
                }
            }
            // tangent columns satisfy lower = A·upper
            let e = p.tangent_frame();
            for j in 0..m {
                for i in 0..n {
                    let lin: f64 = (0..m).map(|k| p.slope()[i * m + k] * e[k * m + j]).sum();
                    assert!((e[(m + i) * m + j] - lin).abs() < 1e-12);
                }
            }
            let (t, s) = p.to_local(&p.from_local(&vec![0.3; m], &vec![-0.2; n]));
            assert!(t.iter().all(|v| (v - 0.3).abs() < 1e-14));
            assert!(s.iter().all(|v| (v + 0.2).abs() < 1e-14));
        }
    }

    #[test]
    fn slope_bound_is_enforced() {
        let err = NearHorizontalPlane::new(1, 1, vec![0.0, 0.0], vec![5.0]).unwrap_err();
        assert!(matches!(err, Error::SlopeBound { .. }));
        let h = NearHorizontalPlane::horizontal(1, 1);
        assert!(tangent_mvector_gap(&[4.5], &h).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = NearHorizontalPlane::new(2, 1, vec![0.1, 0.2, 0.3], vec![0.5, -0.25]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"slope\":[0.5,-0.25]"));
        let q: NearHorizontalPlane = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<NearHorizontalPlane>(r#"{"m":1,"n":1,"basepoint":[0,0],"slope":[9]}"#).is_err());
    }

    #[test]
    fn small_slope_remainder_is_quartic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g0 = random_slope(&mut rng, 4, 1.0);
            let a0 = random_slope(&mut rng, 4, 1.0);
            let rem = |s: f64| {
                let g: Vec<f64> = g0.iter().map(|v| v * s).collect();
                let a: Vec<f64> = a0.iter().map(|v| v * s).collect();
                let quad: f64 = g.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum();
                let scale = linalg::fro_norm(&g).powi(4) + linalg::fro_norm(&a).powi(4);
                ((slope_gap(&g, &a, 2, 2) - quad) / scale, slope_gap(&g, &a, 2, 2) - quad)
            };
            for &s in &[0.1, 0.05] {
                assert!(rem(s).0.abs() < 2.0);
            }
            // halving the slopes divides the remainder by ≈ 16
            let (r1, r2) = (rem(0.05).1, rem(0.025).1);
            if r1.abs() > 1e-10 {
                let ratio = r1 / r2;
                assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
            }
        }
    }

    proptest! {
        #[test]
        fn comparable_to_slope_distance(g in prop::collection::vec(-0.5f64..0.5, 4),
                                        a in prop::collection::vec(-0.5f64..0.5, 4)) {
            let gap = slope_gap(&g, &a, 2, 2);
            let d2: f64 = g.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!(gap >= 0.25 * d2 - 1e-15);
            prop_assert!((slope_inner(&g, &a, 2, 2) - slope_inner(&a, &g, 2, 2)).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_maps_frames() {
        let p = plane(2, 2, vec![0.03, -0.02, 0.01, 0.04]);
        let q = plane(2, 2, vec![-0.01, 0.02, 0.05, 0.0]);
        let r = Rotation::between(&p, &q).unwrap();
        let qm = r.matrix();
        let qtq = linalg::tmatmul(qm, qm, 4, 4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[i * 4 + j] - id).abs() < 1e-12);
            }
        }
        assert!((linalg::det(qm, 4) - 1.0).abs() < 1e-12);
        let mapped = linalg::matmul(qm, &p.tangent_frame(), 4, 4, 2);
        for (a, b) in mapped.iter().zip(q.tangent_frame()) {
            assert!((a - b).abs() < 1e-12);
        }
        let far = plane(2, 2, vec![0.5, 0.0, 0.0, 0.5]);
        assert!(Rotation::between(&p, &far).is_err());
    }

    #[test]
    fn lipschitz_bound_basics() {
        assert_eq!(lipschitz_bound_after_rotation(0.7, 0.0).unwrap(), 0.7);
        assert!(lipschitz_bound_after_rotation(0.7, 0.1).unwrap() < lipschitz_bound_after_rotation(0.8, 0.1).unwrap());
        assert!(lipschitz_bound_after_rotation(0.7, 0.05).unwrap() < lipschitz_bound_after_rotation(0.7, 0.1).unwrap());
        assert!(lipschitz_bound_after_rotation(2.5, 0.0).is_err());
        assert!(lipschitz_bound_after_rotation(1.0, 0.3).is_err());
    }

    fn smooth(samples: usize, half: f64, n: usize, coef: &[f64]) -> GridField {
        let h = 2.0 * half / (samples - 1) as f64;
        GridField::from_fn(n, vec![samples; 2], vec![-half; 2], h, |x, o| {
            for c in 0..n {
                let k = &coef[c * 4..c * 4 + 4];
                o[c] = k[0] * (1.3 * x[0] + k[1]).sin() + k[2] * (0.9 * x[1] - k[3] * x[0]).cos();
            }
        })
        .unwrap()
    }

    #[test]
    fn identity_reparametrization() {
        let f = smooth(41, 1.0, 2, &[0.2, 0.1, 0.3, 0.5, -0.1, 0.4, 0.2, 0.7]);
        let h = NearHorizontalPlane::horizontal(2, 2);
        let out = OutputGrid {
            origin: f.origin().to_vec(),
            spacing: f.spacing(),
            dims: f.dims().to_vec(),
            disk: None,
        };
        let g = reparametrize_graph(&Multilinear::new(&f), &h, &h, &out, &ReparamOptions::default()).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn affine_over_its_own_plane_is_zero() {
        let a = [0.3, -0.1, 0.05, 0.2];
        let f = GridField::from_fn(2, vec![21, 21], vec![-1.0, -1.0], 0.1, |x, o| {
            o[0] = a[0] * x[0] + a[1] * x[1] + 0.4;
            o[1] = a[2] * x[0] + a[3] * x[1] - 0.2;
        })
        .unwrap();
        let h = NearHorizontalPlane::horizontal(2, 2);
        let own = NearHorizontalPlane::new(2, 2, vec![0.0, 0.0, 0.4, -0.2], a.to_vec()).unwrap();
        let out = OutputGrid::centered(&[0.0, 0.0], 0.6, 13);
        let g = reparametrize_graph(&Multilinear::new(&f), &h, &own, &out, &ReparamOptions::default()).unwrap();
        assert!(g.values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn round_trip_error_is_second_order() {
        let coef = [0.2, 0.1, 0.3, 0.5, -0.1, 0.4, 0.2, 0.7];
        let h0 = NearHorizontalPlane::horizontal(2, 2);
        let tilt = NearHorizontalPlane::new(2, 2, vec![0.0; 4], vec![0.1, 0.0, 0.0, -0.1]).unwrap();
        let err = |samples: usize| {
            let f = smooth(samples, 1.0, 2, &coef);
            let hs = f.spacing();
            let mid = OutputGrid::centered(&[0.0, 0.0], 0.75, (1.5 / hs).round() as usize + 1);
            let g = reparametrize_graph(&Multilinear::new(&f), &h0, &tilt, &mid, &ReparamOptions::default()).unwrap();
            let back = OutputGrid::centered(&[0.0, 0.0], 0.5, (1.0 / hs).round() as usize + 1);
            let r = reparametrize_graph(&Multilinear::new(&g), &tilt, &h0, &back, &ReparamOptions::default()).unwrap();
            let exact = smooth(back.dims[0], 0.5, 2, &coef);
            c0_distance(&r, &exact, &Region::Whole).unwrap()
        };
        let (e1, e2, e3) = (err(41), err(81), err(161));
        // single halvings wobble with node alignment; two halvings give ≈ 16
        let q = e1 / e3;
        assert!(e3 < 1e-4);
        assert!(q > 12.0 && q < 20.0, "ratios {} {}", e1 / e2, e2 / e3);
    }

    #[test]
    fn reparametrized_points_lie_on_the_graph() {
        let coef = [0.15, 0.3, 0.2, -0.4, 0.05, 0.1, -0.2, 0.9];
        let f = smooth(161, 1.0, 2, &coef);
        let h0 = NearHorizontalPlane::horizontal(2, 2);
        let tilt = NearHorizontalPlane::new(2, 2, vec![0.05, -0.02, 0.1, 0.0], vec![0.08, 0.02, -0.05, 0.06]).unwrap();
        let out = OutputGrid::centered(&[0.0, 0.0], 0.6, 25);
        let g = reparametrize_graph(&Multilinear::new(&f), &h0, &tilt, &out, &ReparamOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for p in 0..g.len() {
            let y = g.point(p);
            let x = tilt.from_local(&y, g.value(p));
            let mut v = [0.0; 2];
            let xm = [x[0], x[1]];
            for c in 0..2 {
                let k = &coef[c * 4..c * 4 + 4];
                v[c] = k[0] * (1.3 * xm[0] + k[1]).sin() + k[2] * (0.9 * xm[1] - k[3] * xm[0]).cos();
            }
            worst = worst.max(((x[2] - v[0]).powi(2) + (x[3] - v[1]).powi(2)).sqrt());
        }
        let h = f.spacing();
        assert!(worst < 0.5 * h * h, "vertical distance {worst}");
    }

    #[test]
    fn folding_tilt_rejected_and_escape_reported() {
        let f = smooth(21, 1.0, 2, &[0.2, 0.1, 0.3, 0.5, -0.1, 0.4, 0.2, 0.7]);
        let h0 = NearHorizontalPlane::horizontal(2, 2);
        let tilt = NearHorizontalPlane::new(2, 2, vec![0.0; 4], vec![0.1, 0.0, 0.0, 0.1]).unwrap();
        let opts = ReparamOptions {
            lip: Some(4.0),
            ..Default::default()
        };
        let out = OutputGrid::centered(&[0.0, 0.0], 0.5, 5);
        assert!(matches!(
            reparametrize_graph(&Multilinear::new(&f), &h0, &tilt, &out, &opts),
            Err(Error::Precondition(_))
        ));
        let wide = OutputGrid::centered(&[0.0, 0.0], 1.5, 5);
        assert!(matches!(
            reparametrize_graph(&Multilinear::new(&f), &h0, &tilt, &wide, &ReparamOptions::default()),
            Err(Error::DomainEscape(_))
        ));
    }

    #[test]
    fn rotated_lipschitz_within_certified_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h0 = NearHorizontalPlane::horizontal(2, 2);
        for _ in 0..12 {
            let coef = random_slope(&mut rng, 8, 0.6);
            let f = smooth(81, 1.0, 2, &coef);
            let lip = lipschitz_constant(&f);
            let slope = random_slope(&mut rng, 4, 0.05);
            let tilt = NearHorizontalPlane::new(2, 2, vec![0.0; 4], slope).unwrap();
            let rot = Rotation::between(&h0, &tilt).unwrap();
            let out = OutputGrid::centered(&[0.0, 0.0], 0.6, 49);
            let g = reparametrize_graph(&Multilinear::new(&f), &h0, &tilt, &out, &ReparamOptions::default()).unwrap();
            let bound = lipschitz_bound_after_rotation(lip, rot.deviation()).unwrap();
            assert!(lipschitz_constant(&g) <= bound, "{} > {bound}", lipschitz_constant(&g));
        }
    }
}
