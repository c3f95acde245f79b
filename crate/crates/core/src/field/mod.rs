//! Uniform grids carrying maps ℝᵐ → ℝⁿ, with quadrature over boxes and disks.

mod calculus;
pub mod io;
mod mollifier;
pub mod poisson;
mod spline;

pub use calculus::{
    average_gradient, c0_distance, derivative, dirichlet_energy, gradient, gradient_where_defined, holder_seminorm,
    l1_distance, l2_distance, laplacian, lipschitz_constant, mollify, nodes_in, resample,
};
pub use mollifier::Mollifier;
pub use spline::{CubicSpline, Interpolant, Multilinear};

use crate::error::{Error, Result};

/// Sampled map on a uniform grid. Values are stored row-major over grid points
/// (axis 0 slowest), then over the `n` components.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    m: usize,
    n: usize,
    dims: Vec<usize>,
    origin: Vec<f64>,
    spacing: f64,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

/// Integration domain for quadrature queries.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// The full grid box.
    Whole,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn cube(center: &[f64], half_side: f64) -> Self {
        Region::Box {
            lo: center.iter().map(|c| c - half_side).collect(),
            hi: center.iter().map(|c| c + half_side).collect(),
        }
    }

    /// Lebesgue measure in dimension `m`; `Whole` needs the grid, so it is `None`.
    pub fn measure(&self, m: usize) -> Option<f64> {
        match self {
            Region::Whole => None,
            Region::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(a, b)| (b - a).max(0.0)).product()),
            Region::Ball { radius, .. } => Some(unit_ball_volume(m) * radius.powi(m as i32)),
        }
    }
}

/// Volume of the unit ball in ℝᵐ, π^{m/2}/Γ(m/2+1).
pub fn unit_ball_volume(m: usize) -> f64 {
    // Γ(m/2+1) by the half-integer recursion, exact for every m.
    let mut v = if m.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = m;
    while k >= 2 {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k -= 2;
    }
    v
}

impl GridField {
    pub fn new(
        m: usize,
        n: usize,
        dims: Vec<usize>,
        origin: Vec<f64>,
        spacing: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let f = GridField {
            m,
            n,
            dims,
            origin,
            spacing,
            values,
            mask: None,
        };
        f.validate()?;
        Ok(f)
    }

    /// Samples `func(x, out)` at every grid point.
    pub fn from_fn<F>(n: usize, dims: Vec<usize>, origin: Vec<f64>, spacing: f64, mut func: F) -> Result<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let m = dims.len();
        let total: usize = dims.iter().product();
        let mut values = vec![0.0; total * n];
        let mut x = vec![0.0; m];
        let mut idx = vec![0usize; m];
        for p in 0..total {
            unflatten(p, &dims, &mut idx);
            for a in 0..m {
                x[a] = origin[a] + idx[a] as f64 * spacing;
            }
            func(&x, &mut values[p * n..(p + 1) * n]);
        }
        GridField::new(m, n, dims, origin, spacing, values)
    }

    /// Square grid `[-half, half]^m` with `samples` points per axis.
    pub fn centered(m: usize, n: usize, half: f64, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::TooFewSamples {
                axis: 0,
                needed: 2,
                found: samples,
            });
        }
        let h = 2.0 * half / (samples - 1) as f64;
        GridField::new(
            m,
            n,
            vec![samples; m],
            vec![-half; m],
            h,
            vec![0.0; samples.pow(m as u32) * n],
        )
    }

    /// Zero field on the same grid with `n` components.
    pub fn zeros_like(&self, n: usize) -> GridField {
        GridField {
            m: self.m,
            n,
            dims: self.dims.clone(),
            origin: self.origin.clone(),
            spacing: self.spacing,
            values: vec![0.0; self.len() * n],
            mask: self.mask.clone(),
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::InvalidField(format!(
                "mask has {} entries for {} grid points",
                mask.len(),
                self.len()
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidField("m and n must be positive".into()));
        }
        if self.dims.len() != self.m || self.origin.len() != self.m {
            return Err(Error::InvalidField("dims/origin length differs from m".into()));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidField(format!("spacing {} must be positive", self.spacing)));
        }
        for (axis, &d) in self.dims.iter().enumerate() {
            if d < 2 {
                return Err(Error::TooFewSamples {
                    axis,
                    needed: 2,
                    found: d,
                });
            }
        }
        let expect = self.len() * self.n;
        if self.values.len() != expect {
            return Err(Error::InvalidField(format!(
                "values length {} != n·∏dims = {}",
                self.values.len(),
                expect
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at flat index {i}")));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidField("non-finite origin".into()));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_active(&self, p: usize) -> bool {
        self.mask.as_ref().is_none_or(|mk| mk[p])
    }

    pub fn value(&self, p: usize) -> &[f64] {
        &self.values[p * self.n..(p + 1) * self.n]
    }

    pub fn value_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.values[p * n..(p + 1) * n]
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn index(&self, p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.m];
        unflatten(p, &self.dims, &mut idx);
        idx
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        self.point_into(p, &mut x);
        x
    }

    pub fn point_into(&self, p: usize, x: &mut [f64]) {
        let mut rem = p;
        for a in (0..self.m).rev() {
            let i = rem % self.dims[a];
            rem /= self.dims[a];
            x[a] = self.origin[a] + i as f64 * self.spacing;
        }
    }

    /// Upper corner of the grid box.
    pub fn upper(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.dims)
            .map(|(o, &d)| o + (d - 1) as f64 * self.spacing)
            .collect()
    }

    /// True when the grid point lies on the outer face of the grid box.
    pub fn on_boundary(&self, p: usize) -> bool {
        let mut rem = p;
        for a in (0..self.m).rev() {
            let i = rem % self.dims[a];
            rem /= self.dims[a];
            if i == 0 || i + 1 == self.dims[a] {
                return true;
            }
        }
        false
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let tol = 1e-12 * self.spacing;
        let up = self.upper();
        x.iter()
            .zip(self.origin.iter().zip(&up))
            .all(|(xi, (lo, hi))| *xi >= lo - tol && *xi <= hi + tol)
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.m == other.m
            && self.dims == other.dims
            && self.origin == other.origin
            && self.spacing == other.spacing
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "dims {:?}/{:?}, origin {:?}/{:?}, spacing {}/{}",
                self.dims, other.dims, self.origin, other.origin, self.spacing, other.spacing
            )))
        }
    }

    /// Pointwise map over values, keeping grid and mask.
    pub fn map_values<F: Fn(f64) -> f64>(&self, f: F) -> GridField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Linear combination `a·self + b·other` on a common grid.
    pub fn combine(&self, a: f64, other: &GridField, b: f64) -> Result<GridField> {
        self.check_same_grid(other)?;
        if self.n != other.n {
            return Err(Error::GridMismatch(format!("n = {} vs {}", self.n, other.n)));
        }
        let mut out = self.clone();
        for (o, w) in out.values.iter_mut().zip(&other.values) {
            *o = a * *o + b * w;
        }
        out.mask = merge_masks(self.mask.as_deref(), other.mask.as_deref());
        Ok(out)
    }

    /// Copy of a single component as a scalar field.
    pub fn component(&self, c: usize) -> GridField {
        let values = (0..self.len()).map(|p| self.values[p * self.n + c]).collect();
        GridField {
            m: self.m,
            n: 1,
            dims: self.dims.clone(),
            origin: self.origin.clone(),
            spacing: self.spacing,
            values,
            mask: self.mask.clone(),
        }
    }

    /// Pointwise Euclidean norm of the value vector.
    pub fn pointwise_norm(&self) -> GridField {
        let values = (0..self.len())
            .map(|p| self.value(p).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        GridField {
            m: self.m,
            n: 1,
            dims: self.dims.clone(),
            origin: self.origin.clone(),
            spacing: self.spacing,
            values,
            mask: self.mask.clone(),
        }
    }

    /// Sub-grid of nodes `start..start+dims` along every axis.
    pub fn window(&self, start: &[usize], dims: &[usize]) -> Result<GridField> {
        for a in 0..self.m {
            if start[a] + dims[a] > self.dims[a] {
                return Err(Error::DomainEscape(format!(
                    "window {:?}+{:?} exceeds dims {:?}",
                    start, dims, self.dims
                )));
            }
        }
        let total: usize = dims.iter().product();
        let mut values = Vec::with_capacity(total * self.n);
        let mut mask = self.mask.as_ref().map(|_| Vec::with_capacity(total));
        let mut idx = vec![0; self.m];
        let mut src = vec![0; self.m];
        for p in 0..total {
            unflatten(p, dims, &mut idx);
            for a in 0..self.m {
                src[a] = start[a] + idx[a];
            }
            let q = self.flat(&src);
            values.extend_from_slice(self.value(q));
            if let (Some(mk), Some(own)) = (mask.as_mut(), self.mask.as_ref()) {
                mk.push(own[q]);
            }
        }
        let origin = (0..self.m)
            .map(|a| self.origin[a] + start[a] as f64 * self.spacing)
            .collect();
        let mut out = GridField::new(self.m, self.n, dims.to_vec(), origin, self.spacing, values)?;
        out.mask = mask;
        Ok(out)
    }

    /// Quadrature weights `(node, weight)` for `region`: each node carries the
    /// measure of its dual cell `x ± h/2` intersected with the region and the grid box.
    pub fn weights(&self, region: &Region) -> Result<Vec<(usize, f64)>> {
        let up = self.upper();
        let h = self.spacing;
        let tol = 1e-9 * h;
        let (lo, hi) = match region {
            Region::Whole => (self.origin.clone(), up.clone()),
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        };
        if lo.len() != self.m || hi.len() != self.m {
            return Err(Error::InvalidField("region dimension differs from m".into()));
        }
        for a in 0..self.m {
            if lo[a] < self.origin[a] - tol || hi[a] > up[a] + tol {
                return Err(Error::DomainEscape(format!(
                    "region [{:?}, {:?}] leaves grid box [{:?}, {:?}]",
                    lo, hi, self.origin, up
                )));
            }
        }
        // index range of nodes whose dual cell can meet the bounding box
        let mut first = vec![0usize; self.m];
        let mut count = vec![0usize; self.m];
        for a in 0..self.m {
            let i0 = ((lo[a] - self.origin[a]) / h - 0.5).floor().max(0.0) as usize;
            let i1 = (((hi[a] - self.origin[a]) / h + 0.5).ceil() as usize).min(self.dims[a] - 1);
            first[a] = i0;
            count[a] = i1 + 1 - i0;
        }
        let total: usize = count.iter().product();
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.m];
        let mut node = vec![0usize; self.m];
        let mut clo = vec![0.0; self.m];
        let mut chi = vec![0.0; self.m];
        for t in 0..total {
            unflatten(t, &count, &mut idx);
            for a in 0..self.m {
                node[a] = first[a] + idx[a];
                let x = self.origin[a] + node[a] as f64 * h;
                clo[a] = (x - 0.5 * h).max(self.origin[a]);
                chi[a] = (x + 0.5 * h).min(up[a]);
            }
            let w = match region {
                Region::Whole | Region::Box { .. } => (0..self.m)
                    .map(|a| (chi[a].min(hi[a]) - clo[a].max(lo[a])).max(0.0))
                    .product(),
                Region::Ball { center, radius } => cell_ball_measure(&clo, &chi, center, *radius),
            };
            if w > 0.0 {
                let p = self.flat(&node);
                if !self.is_active(p) {
                    return Err(Error::MaskedOut { index: node.clone() });
                }
                out.push((p, w));
            }
        }
        Ok(out)
    }

    /// ∫_region f by nodal quadrature, per component.
    pub fn integrate(&self, region: &Region) -> Result<Vec<f64>> {
        let w = self.weights(region)?;
        let mut acc = vec![0.0; self.n];
        for (p, wt) in w {
            for (a, v) in acc.iter_mut().zip(self.value(p)) {
                *a += wt * v;
            }
        }
        Ok(acc)
    }
}

pub(crate) fn merge_masks(a: Option<&[bool]>, b: Option<&[bool]>) -> Option<Vec<bool>> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x.to_vec()),
        (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(p, q)| *p && *q).collect()),
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * dims[a + 1];
    }
    s
}

pub(crate) fn unflatten(mut p: usize, dims: &[usize], idx: &mut [usize]) {
    for a in (0..dims.len()).rev() {
        idx[a] = p % dims[a];
        p /= dims[a];
    }
}

/// Measure of the box `[lo, hi]` intersected with the ball `B_r(c)`.
/// Exact for m ≤ 2; a 4ᵐ midpoint sub-sample otherwise.
pub fn cell_ball_measure(lo: &[f64], hi: &[f64], c: &[f64], r: f64) -> f64 {
    let m = lo.len();
    if (0..m).any(|a| hi[a] <= lo[a]) {
        return 0.0;
    }
    // quick accept/reject by nearest and farthest corner
    let mut near = 0.0;
    let mut far = 0.0;
    for a in 0..m {
        let d0 = lo[a] - c[a];
        let d1 = hi[a] - c[a];
        let dn = if d0 > 0.0 {
            d0
        } else if d1 < 0.0 {
            -d1
        } else {
            0.0
        };
        near += dn * dn;
        far += d0.abs().max(d1.abs()).powi(2);
    }
    let r2 = r * r;
    let vol: f64 = (0..m).map(|a| hi[a] - lo[a]).product();
    if near >= r2 {
        return 0.0;
    }
    if far <= r2 {
        return vol;
    }
    match m {
        1 => (hi[0].min(c[0] + r) - lo[0].max(c[0] - r)).max(0.0),
        2 => {
            let (x0, x1) = (lo[0] - c[0], hi[0] - c[0]);
            let (y0, y1) = (lo[1] - c[1], hi[1] - c[1]);
            quadrant_area(x1, y1, r) - quadrant_area(x0, y1, r) - quadrant_area(x1, y0, r)
                + quadrant_area(x0, y0, r)
        }
        _ => {
            let k = 4usize;
            let total = k.pow(m as u32);
            let mut idx = vec![0usize; m];
            let dims = vec![k; m];
            let mut inside = 0usize;
            for t in 0..total {
                unflatten(t, &dims, &mut idx);
                let d2: f64 = (0..m)
                    .map(|a| {
                        let s = lo[a] + (idx[a] as f64 + 0.5) / k as f64 * (hi[a] - lo[a]);
                        (s - c[a]).powi(2)
                    })
                    .sum();
                if d2 < r2 {
                    inside += 1;
                }
            }
            vol * inside as f64 / total as f64
        }
    }
}

/// Signed area of `{(s,t) ∈ disk_r : s between 0 and x, t between 0 and y}`.
fn quadrant_area(x: f64, y: f64, r: f64) -> f64 {
    let sign = x.signum() * y.signum();
    let (x, y) = (x.abs().min(r), y.abs().min(r));
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    if x * x + y * y <= r * r {
        return sign * x * y;
    }
    // the circle crosses height y at s = ts
    let ts = (r * r - y * y).max(0.0).sqrt();
    let prim = |s: f64| 0.5 * (s * (r * r - s * s).max(0.0).sqrt() + r * r * (s / r).clamp(-1.0, 1.0).asin());
    sign * (y * ts + prim(x) - prim(ts))
}
