//! Fast Dirichlet Poisson solves on boxes by sine transforms.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::{unflatten, GridField};
use crate::error::{Error, Result};

/// Solver for (−Δ_h) u = f on the interior nodes of a box, u = 0 outside.
pub struct DirichletSolver {
    dims: Vec<usize>,
    h: f64,
    ffts: Vec<Arc<dyn Fft<f64>>>,
    eig: Vec<Vec<f64>>,
}

impl DirichletSolver {
    /// `dims` counts interior unknowns per axis.
    pub fn new(dims: &[usize], h: f64) -> Self {
        let mut planner = FftPlanner::new();
        let ffts = dims.iter().map(|&d| planner.plan_fft_forward(2 * (d + 1))).collect();
        let eig = dims
            .iter()
            .map(|&d| {
                (1..=d)
                    .map(|k| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / (d + 1) as f64).cos()) / (h * h))
                    .collect()
            })
            .collect();
        DirichletSolver {
            dims: dims.to_vec(),
            h,
            ffts,
            eig,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Unnormalized DST-I along one axis, in place.
    fn dst(&self, data: &mut [f64], axis: usize) {
        let dims = &self.dims;
        let d = dims[axis];
        let strides = super::strides(dims);
        let mut other = dims.clone();
        other[axis] = 1;
        let lines: usize = other.iter().product();
        let len = 2 * (d + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        let mut idx = vec![0usize; dims.len()];
        for l in 0..lines {
            unflatten(l, &other, &mut idx);
            let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for j in 0..d {
                let v = data[base + j * strides[axis]];
                buf[j + 1] = Complex::new(v, 0.0);
                buf[len - j - 1] = Complex::new(-v, 0.0);
            }
            self.ffts[axis].process(&mut buf);
            for k in 0..d {
                data[base + k * strides[axis]] = -0.5 * buf[k + 1].im;
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut u = rhs.to_vec();
        let m = self.dims.len();
        for a in 0..m {
            self.dst(&mut u, a);
        }
        let mut idx = vec![0usize; m];
        for (p, v) in u.iter_mut().enumerate() {
            unflatten(p, &self.dims, &mut idx);
            let lam: f64 = (0..m).map(|a| self.eig[a][idx[a]]).sum();
            *v /= lam;
        }
        for a in 0..m {
            self.dst(&mut u, a);
        }
        let scale: f64 = self.dims.iter().map(|&d| 2.0 / (d + 1) as f64).product();
        u.iter_mut().for_each(|v| *v *= scale);
        u
    }
}

/// Interior indices of a box grid as (flat index in the full grid) in
/// row-major order of the interior block.
pub(crate) fn interior_nodes(dims: &[usize]) -> Vec<usize> {
    let inner: Vec<usize> = dims.iter().map(|d| d - 2).collect();
    let strides = super::strides(dims);
    let total: usize = inner.iter().product();
    let mut idx = vec![0usize; dims.len()];
    (0..total)
        .map(|t| {
            unflatten(t, &inner, &mut idx);
            idx.iter().zip(&strides).map(|(i, s)| (i + 1) * s).sum()
        })
        .collect()
}

/// Discrete harmonic extension of the boundary values of `f`, per component;
/// boundary nodes are copied bit-exactly.
pub fn harmonic_extension(f: &GridField) -> Result<GridField> {
    if f.mask().is_some() {
        return Err(Error::Precondition("harmonic extension needs an unmasked box".into()));
    }
    let dims = f.dims().to_vec();
    if dims.iter().any(|&d| d < 3) {
        return Err(Error::TooFewSamples {
            axis: dims.iter().position(|&d| d < 3).unwrap(),
            needed: 3,
            found: *dims.iter().min().unwrap(),
        });
    }
    let m = f.m();
    let n = f.n();
    let h = f.spacing();
    let inner: Vec<usize> = dims.iter().map(|d| d - 2).collect();
    let solver = DirichletSolver::new(&inner, h);
    let nodes = interior_nodes(&dims);
    let strides = f.strides();
    let mut out = f.clone();
    let mut is_inner = vec![false; f.len()];
    for &p in &nodes {
        is_inner[p] = true;
    }
    for c in 0..n {
        // boundary neighbours move to the right-hand side
        let rhs: Vec<f64> = nodes
            .iter()
            .map(|&p| {
                let mut s = 0.0;
                for a in 0..m {
                    for q in [p - strides[a], p + strides[a]] {
                        if !is_inner[q] {
                            s += f.value(q)[c];
                        }
                    }
                }
                s / (h * h)
            })
            .collect();
        let u = solver.solve(&rhs);
        for (&p, v) in nodes.iter().zip(u) {
            out.value_mut(p)[c] = v;
        }
    }
    Ok(out)
}
