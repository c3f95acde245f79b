use super::{unflatten, GridField};
use crate::error::{Error, Result};

/// Continuous evaluation of a sampled map together with its Jacobian.
pub trait Interpolant {
    fn m(&self) -> usize;
    fn n(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];

    fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-9 * (self.upper()[0] - self.lower()[0]).abs().max(1e-300);
        x.iter()
            .zip(self.lower().iter().zip(self.upper()))
            .all(|(v, (a, b))| *v >= a - tol && *v <= b + tol)
    }

    /// Value at `x`, plus the n×m Jacobian (row-major) when requested.
    fn eval(&self, x: &[f64], val: &mut [f64], jac: Option<&mut [f64]>) -> Result<()>;

    fn value(&self, x: &[f64], val: &mut [f64]) -> Result<()> {
        self.eval(x, val, None)
    }
}

/// Cell index and fractional offset along one axis, snapping to nodes.
fn locate(x: f64, origin: f64, h: f64, d: usize, axis: usize) -> Result<(usize, f64)> {
    let t = (x - origin) / h;
    let tol = 1e-9;
    if t < -tol || t > (d - 1) as f64 + tol {
        return Err(Error::DomainEscape(format!(
            "coordinate {x} on axis {axis} outside [{origin}, {}]",
            origin + (d - 1) as f64 * h
        )));
    }
    let r = t.round();
    let t = if (t - r).abs() < tol { r } else { t };
    let i = (t.floor().max(0.0) as usize).min(d - 2);
    Ok((i, t - i as f64))
}

/// Piecewise multilinear interpolation; exact on affine maps.
pub struct Multilinear<'a> {
    f: &'a GridField,
    upper: Vec<f64>,
}

impl<'a> Multilinear<'a> {
    pub fn new(f: &'a GridField) -> Self {
        Multilinear { f, upper: f.upper() }
    }
}

impl Interpolant for Multilinear<'_> {
    fn m(&self) -> usize {
        self.f.m
    }
    fn n(&self) -> usize {
        self.f.n
    }
    fn lower(&self) -> &[f64] {
        &self.f.origin
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn eval(&self, x: &[f64], val: &mut [f64], mut jac: Option<&mut [f64]>) -> Result<()> {
        let f = self.f;
        let (m, n) = (f.m, f.n);
        let h = f.spacing;
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut cell_v = vec![0usize; m];
        let mut frac_v = vec![0.0; m];
        let (cell, frac): (&mut [usize], &mut [f64]) = if m <= 3 {
            (&mut cell[..m], &mut frac[..m])
        } else {
            (&mut cell_v[..], &mut frac_v[..])
        };
        for a in 0..m {
            let (i, s) = locate(x[a], f.origin[a], h, f.dims[a], a)?;
            cell[a] = i;
            frac[a] = s;
        }
        val.iter_mut().for_each(|v| *v = 0.0);
        if let Some(j) = jac.as_deref_mut() {
            j.iter_mut().for_each(|v| *v = 0.0);
        }
        for corner in 0..(1usize << m) {
            let mut w = 1.0;
            let mut p = 0usize;
            for a in 0..m {
                let bit = (corner >> (m - 1 - a)) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                p = p * f.dims[a] + cell[a] + bit;
            }
            let needed = w != 0.0 || jac.is_some();
            if needed && !f.is_active(p) {
                return Err(Error::MaskedOut { index: f.index(p) });
            }
            let v = &f.values[p * n..(p + 1) * n];
            if w != 0.0 {
                for c in 0..n {
                    val[c] += w * v[c];
                }
            }
            if let Some(j) = jac.as_deref_mut() {
                for b in 0..m {
                    let mut dw = 1.0 / h;
                    for a in 0..m {
                        let bit = (corner >> (m - 1 - a)) & 1;
                        if a == b {
                            dw *= if bit == 1 { 1.0 } else { -1.0 };
                        } else {
                            dw *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                        }
                    }
                    for c in 0..n {
                        j[c * m + b] += dw * v[c];
                    }
                }
            }
        }
        Ok(())
    }
}

/// Tensor-product natural cubic B-spline interpolant: C², interpolates the
/// nodes and reproduces affine maps.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    m: usize,
    n: usize,
    dims: Vec<usize>,
    origin: Vec<f64>,
    upper: Vec<f64>,
    h: f64,
    // coefficients on the grid extended by one ghost node per side
    coef: Vec<f64>,
    cdims: Vec<usize>,
}

fn bspline_weights(s: f64) -> ([f64; 4], [f64; 4]) {
    let t = 1.0 - s;
    let s2 = s * s;
    let s3 = s2 * s;
    (
        [
            t * t * t / 6.0,
            (3.0 * s3 - 6.0 * s2 + 4.0) / 6.0,
            (-3.0 * s3 + 3.0 * s2 + 3.0 * s + 1.0) / 6.0,
            s3 / 6.0,
        ],
        [
            -0.5 * t * t,
            0.5 * (3.0 * s2 - 4.0 * s),
            0.5 * (-3.0 * s2 + 2.0 * s + 1.0),
            0.5 * s2,
        ],
    )
}

/// Solves c_{i−1} + 4c_i + c_{i+1} = 6f_i on the interior with c = f at both
/// ends, then fills the ghosts from the natural end condition. `line` holds
/// d+2 entries, the data in positions 1..=d.
fn solve_line(line: &mut [f64], scratch: &mut [f64]) {
    let d = line.len() - 2;
    let f = |i: usize| line[i + 1];
    if d >= 3 {
        let k = d - 2;
        // Thomas algorithm on unknowns c_1..c_{d-2}
        let rhs: Vec<f64> = (1..=k)
            .map(|i| {
                let mut r = 6.0 * f(i);
                if i == 1 {
                    r -= f(0);
                }
                if i == k {
                    r -= f(d - 1);
                }
                r
            })
            .collect();
        let cp = &mut scratch[..k];
        let mut dp = vec![0.0; k];
        cp[0] = 1.0 / 4.0;
        dp[0] = rhs[0] / 4.0;
        for i in 1..k {
            let den = 4.0 - cp[i - 1];
            cp[i] = 1.0 / den;
            dp[i] = (rhs[i] - dp[i - 1]) / den;
        }
        let mut c = vec![0.0; k];
        c[k - 1] = dp[k - 1];
        for i in (0..k - 1).rev() {
            c[i] = dp[i] - cp[i] * c[i + 1];
        }
        line[2..k + 2].copy_from_slice(&c[..k]);
    }
    line[0] = 2.0 * line[1] - line[2];
    line[d + 1] = 2.0 * line[d] - line[d - 1];
}

impl CubicSpline {
    pub fn new(f: &GridField) -> Result<Self> {
        if f.mask.is_some() {
            return Err(Error::Precondition("cubic spline needs an unmasked grid".into()));
        }
        let (m, n) = (f.m, f.n);
        let cdims: Vec<usize> = f.dims.iter().map(|d| d + 2).collect();
        let ctotal: usize = cdims.iter().product();
        let cstrides = super::strides(&cdims);
        let mut coef = vec![0.0; ctotal * n];
        let mut idx = vec![0usize; m];
        for p in 0..f.len() {
            unflatten(p, &f.dims, &mut idx);
            let q: usize = idx.iter().zip(&cstrides).map(|(i, s)| (i + 1) * s).sum();
            coef[q * n..(q + 1) * n].copy_from_slice(f.value(p));
        }
        let maxd = *cdims.iter().max().unwrap();
        let mut line = vec![0.0; maxd];
        let mut scratch = vec![0.0; maxd];
        for a in 0..m {
            let len = cdims[a];
            let mut other = cdims.clone();
            other[a] = 1;
            let lines: usize = other.iter().product();
            let mut oidx = vec![0usize; m];
            for l in 0..lines {
                unflatten(l, &other, &mut oidx);
                let base: usize = oidx.iter().zip(&cstrides).map(|(i, s)| i * s).sum();
                for c in 0..n {
                    for i in 0..len {
                        line[i] = coef[(base + i * cstrides[a]) * n + c];
                    }
                    solve_line(&mut line[..len], &mut scratch);
                    for i in 0..len {
                        coef[(base + i * cstrides[a]) * n + c] = line[i];
                    }
                }
            }
        }
        Ok(CubicSpline {
            m,
            n,
            dims: f.dims.clone(),
            origin: f.origin.clone(),
            upper: f.upper(),
            h: f.spacing,
            coef,
            cdims,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }
}

impl Interpolant for CubicSpline {
    fn m(&self) -> usize {
        self.m
    }
    fn n(&self) -> usize {
        self.n
    }
    fn lower(&self) -> &[f64] {
        &self.origin
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn eval(&self, x: &[f64], val: &mut [f64], mut jac: Option<&mut [f64]>) -> Result<()> {
        let (m, n) = (self.m, self.n);
        let mut base = [0usize; 3];
        let mut w = [[0.0f64; 4]; 3];
        let mut dw = [[0.0f64; 4]; 3];
        if m > 3 {
            return Err(Error::Precondition("cubic spline supports m ≤ 3".into()));
        }
        for a in 0..m {
            let (i, s) = locate(x[a], self.origin[a], self.h, self.dims[a], a)?;
            base[a] = i;
            let (wa, da) = bspline_weights(s);
            w[a] = wa;
            dw[a] = da;
        }
        val.iter_mut().for_each(|v| *v = 0.0);
        if let Some(j) = jac.as_deref_mut() {
            j.iter_mut().for_each(|v| *v = 0.0);
        }
        let inv_h = 1.0 / self.h;
        let taps = 4usize.pow(m as u32);
        for t in 0..taps {
            let mut q = 0usize;
            let mut wt = 1.0;
            let mut rem = t;
            let mut digits = [0usize; 3];
            for a in (0..m).rev() {
                digits[a] = rem % 4;
                rem /= 4;
            }
            for a in 0..m {
                q = q * self.cdims[a] + base[a] + digits[a];
                wt *= w[a][digits[a]];
            }
            let c = &self.coef[q * n..(q + 1) * n];
            for k in 0..n {
                val[k] += wt * c[k];
            }
            if let Some(j) = jac.as_deref_mut() {
                for b in 0..m {
                    let mut g = inv_h;
                    for a in 0..m {
                        g *= if a == b { dw[a][digits[a]] } else { w[a][digits[a]] };
                    }
                    for k in 0..n {
                        j[k * m + b] += g * c[k];
                    }
                }
            }
        }
        Ok(())
    }
}
