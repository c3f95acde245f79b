use super::{merge_masks, unflatten, GridField, Interpolant, Mollifier, Region};
use crate::error::{Error, Result};

/// Derivative of component data along `axis` at node `p`; central in the
/// interior, one-sided second order where a neighbour is missing or masked.
fn axis_derivative(f: &GridField, p: usize, idx: &[usize], axis: usize, stride: usize, out: &mut [f64]) -> Result<()> {
    let n = f.n;
    let d = f.dims[axis];
    let i = idx[axis];
    let inv = 1.0 / f.spacing;
    let ok = |q: usize| f.is_active(q);
    let v = &f.values;
    if i >= 1 && i + 1 < d && ok(p - stride) && ok(p + stride) {
        for c in 0..n {
            out[c] = 0.5 * inv * (v[(p + stride) * n + c] - v[(p - stride) * n + c]);
        }
    } else if i + 2 < d && ok(p + stride) && ok(p + 2 * stride) {
        for c in 0..n {
            out[c] = 0.5
                * inv
                * (-3.0 * v[p * n + c] + 4.0 * v[(p + stride) * n + c] - v[(p + 2 * stride) * n + c]);
        }
    } else if i >= 2 && ok(p - stride) && ok(p - 2 * stride) {
        for c in 0..n {
            out[c] = 0.5
                * inv
                * (3.0 * v[p * n + c] - 4.0 * v[(p - stride) * n + c] + v[(p - 2 * stride) * n + c]);
        }
    } else {
        return Err(Error::TooFewSamples {
            axis,
            needed: 3,
            found: d,
        });
    }
    Ok(())
}

/// Df as a field with n·m components, entry (c, j) = ∂_j f_c at index c·m + j.
pub fn gradient(f: &GridField) -> Result<GridField> {
    gradient_impl(f, false)
}

/// Like [`gradient`], but nodes without a usable stencil along some axis
/// are masked out of the result instead of failing.
pub fn gradient_where_defined(f: &GridField) -> Result<GridField> {
    gradient_impl(f, true)
}

fn gradient_impl(f: &GridField, lenient: bool) -> Result<GridField> {
    let (m, n) = (f.m, f.n);
    for (axis, &d) in f.dims.iter().enumerate() {
        if d < 3 {
            return Err(Error::TooFewSamples {
                axis,
                needed: 3,
                found: d,
            });
        }
    }
    let strides = f.strides();
    let mut out = vec![0.0; f.len() * n * m];
    let mut idx = vec![0usize; m];
    let mut buf = vec![0.0; n];
    let mut mask = f.mask.clone();
    for p in 0..f.len() {
        if !f.is_active(p) {
            continue;
        }
        unflatten(p, &f.dims, &mut idx);
        for a in 0..m {
            match axis_derivative(f, p, &idx, a, strides[a], &mut buf) {
                Ok(()) => {
                    for c in 0..n {
                        out[p * n * m + c * m + a] = buf[c];
                    }
                }
                Err(_) if lenient => {
                    mask.get_or_insert_with(|| vec![true; f.len()])[p] = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut g = GridField::new(m, n * m, f.dims.clone(), f.origin.clone(), f.spacing, out)?;
    g.mask = mask;
    Ok(g)
}

/// Dʲf by iterated differencing; component (c, a₁, …, a_j) sits at c·mʲ + a₁·mʲ⁻¹ + … + a_j.
pub fn derivative(f: &GridField, order: usize) -> Result<GridField> {
    let mut g = f.clone();
    for _ in 0..order {
        g = gradient(&g)?;
    }
    Ok(g)
}

/// Discrete Laplacian with the (2m+1)-point stencil on interior nodes; the
/// result lives on the grid shrunk by one node per side.
pub fn laplacian(f: &GridField) -> Result<GridField> {
    let (m, n) = (f.m, f.n);
    for (axis, &d) in f.dims.iter().enumerate() {
        if d < 3 {
            return Err(Error::TooFewSamples {
                axis,
                needed: 3,
                found: d,
            });
        }
    }
    let dims: Vec<usize> = f.dims.iter().map(|d| d - 2).collect();
    let origin: Vec<f64> = f.origin.iter().map(|o| o + f.spacing).collect();
    let strides = f.strides();
    let total: usize = dims.iter().product();
    let mut values = vec![0.0; total * n];
    let mut mask = f.mask.as_ref().map(|_| vec![true; total]);
    let mut idx = vec![0usize; m];
    let inv2 = 1.0 / (f.spacing * f.spacing);
    for t in 0..total {
        unflatten(t, &dims, &mut idx);
        let p: usize = idx.iter().zip(&strides).map(|(i, s)| (i + 1) * s).sum();
        let active = f.is_active(p) && (0..m).all(|a| f.is_active(p - strides[a]) && f.is_active(p + strides[a]));
        if let Some(mk) = mask.as_mut() {
            mk[t] = active;
        }
        if !active {
            continue;
        }
        for c in 0..n {
            let mut s = -2.0 * m as f64 * f.values[p * n + c];
            for a in 0..m {
                s += f.values[(p - strides[a]) * n + c] + f.values[(p + strides[a]) * n + c];
            }
            values[t * n + c] = s * inv2;
        }
    }
    let mut out = GridField::new(m, n, dims, origin, f.spacing, values)?;
    out.mask = mask;
    Ok(out)
}

/// f ∗ φ on the grid shrunk by the kernel radius. Output nodes whose stencil
/// touches a masked-out input node are masked out.
pub fn mollify(f: &GridField, phi: &Mollifier) -> Result<GridField> {
    let h = f.spacing;
    if phi.radius() < 2.0 * h * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "mollifier radius {} below twice the spacing {}",
            phi.radius(),
            h
        )));
    }
    let stencil = phi.stencil(f.m, h);
    let reach = stencil
        .iter()
        .flat_map(|(o, _)| o.iter().map(|v| v.unsigned_abs() as usize))
        .max()
        .unwrap_or(0);
    let m = f.m;
    let n = f.n;
    if f.dims.iter().any(|&d| d < 2 * reach + 2) {
        return Err(Error::InsufficientMargin(format!(
            "grid {:?} cannot host a kernel of reach {} nodes",
            f.dims, reach
        )));
    }
    let dims: Vec<usize> = f.dims.iter().map(|d| d - 2 * reach).collect();
    let origin: Vec<f64> = f.origin.iter().map(|o| o + reach as f64 * h).collect();
    let strides = f.strides();
    let offsets: Vec<(isize, f64)> = stencil
        .iter()
        .map(|(o, w)| {
            let off: isize = o.iter().zip(&strides).map(|(k, s)| *k as isize * *s as isize).sum();
            (off, *w)
        })
        .collect();
    let total: usize = dims.iter().product();
    let mut values = vec![0.0; total * n];
    let mut mask = f.mask.as_ref().map(|_| vec![true; total]);
    let mut idx = vec![0usize; m];
    for t in 0..total {
        unflatten(t, &dims, &mut idx);
        let p: usize = idx.iter().zip(&strides).map(|(i, s)| (i + reach) * s).sum();
        let out = &mut values[t * n..(t + 1) * n];
        let mut active = true;
        for &(off, w) in &offsets {
            let q = (p as isize + off) as usize;
            if !f.is_active(q) {
                active = false;
                break;
            }
            for c in 0..n {
                out[c] += w * f.values[q * n + c];
            }
        }
        if !active {
            out.iter_mut().for_each(|v| *v = 0.0);
            if let Some(mk) = mask.as_mut() {
                mk[t] = false;
            }
        }
    }
    let mut g = GridField::new(m, n, dims, origin, h, values)?;
    g.mask = mask;
    Ok(g)
}

pub(crate) fn region_contains(region: &Region, x: &[f64], tol: f64) -> bool {
    match region {
        Region::Whole => true,
        Region::Box { lo, hi } => x
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(v, (a, b))| *v >= a - tol && *v <= b + tol),
        Region::Ball { center, radius } => {
            let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() <= radius + tol
        }
    }
}

/// Active nodes lying in the closed region.
pub fn nodes_in(f: &GridField, region: &Region) -> Vec<usize> {
    let tol = 1e-12 * f.spacing;
    let mut x = vec![0.0; f.m];
    (0..f.len())
        .filter(|&p| {
            f.point_into(p, &mut x);
            f.is_active(p) && region_contains(region, &x, tol)
        })
        .collect()
}

/// sup |Dʲf(x) − Dʲf(y)| / |x−y|^β over node pairs of the region with
/// `r_min ≤ |x−y| ≤ r_max`.
pub fn holder_seminorm(
    f: &GridField,
    order: usize,
    beta: f64,
    pair_range: (f64, f64),
    region: &Region,
) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Precondition(format!("exponent {beta} outside (0, 1]")));
    }
    let d = derivative(f, order)?;
    let nodes = nodes_in(&d, region);
    let (r_min, r_max) = pair_range;
    let h = f.spacing;
    let reach = (r_max / h).floor() as isize;
    let m = f.m;
    let k = d.n;
    let mut inside = vec![false; d.len()];
    for &p in &nodes {
        inside[p] = true;
    }
    // offsets with positive lexicographic sign, so every pair is visited once
    let side = (2 * reach + 1) as usize;
    let mut offs: Vec<(Vec<isize>, f64)> = Vec::new();
    let mut idx = vec![0usize; m];
    for t in 0..side.pow(m as u32) {
        unflatten(t, &vec![side; m], &mut idx);
        let o: Vec<isize> = idx.iter().map(|&i| i as isize - reach).collect();
        if o.iter().find(|&&v| v != 0).is_none_or(|&v| v < 0) {
            continue;
        }
        let r = o.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt() * h;
        if r >= r_min * (1.0 - 1e-12) && r <= r_max * (1.0 + 1e-12) {
            offs.push((o, r.powf(beta)));
        }
    }
    let mut best: Option<f64> = None;
    let mut pidx = vec![0usize; m];
    for &p in &nodes {
        unflatten(p, &d.dims, &mut pidx);
        'off: for (o, denom) in &offs {
            let mut q = 0usize;
            for a in 0..m {
                let j = pidx[a] as isize + o[a];
                if j < 0 || j >= d.dims[a] as isize {
                    continue 'off;
                }
                q = q * d.dims[a] + j as usize;
            }
            if !inside[q] {
                continue;
            }
            let diff: f64 = (0..k)
                .map(|c| (d.values[p * k + c] - d.values[q * k + c]).powi(2))
                .sum::<f64>()
                .sqrt();
            let r = diff / denom;
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.ok_or_else(|| Error::Empty(format!("no node pairs with distance in [{r_min}, {r_max}]")))
}

/// Quadrature mean of Df over the disk, row-major n×m.
pub fn average_gradient(f: &GridField, center: &[f64], r: f64) -> Result<Vec<f64>> {
    let g = gradient(f)?;
    let w = f.weights(&Region::ball(center, r))?;
    let mut acc = vec![0.0; f.n * f.m];
    let mut tot = 0.0;
    for (p, wt) in w {
        tot += wt;
        for (a, v) in acc.iter_mut().zip(g.value(p)) {
            *a += wt * v;
        }
    }
    if tot <= 0.0 {
        return Err(Error::Empty("disk carries no quadrature weight".into()));
    }
    acc.iter_mut().for_each(|a| *a /= tot);
    Ok(acc)
}

/// ∫_region |Df|².
pub fn dirichlet_energy(f: &GridField, region: &Region) -> Result<f64> {
    let g = gradient(f)?;
    let w = f.weights(region)?;
    Ok(w
        .into_iter()
        .map(|(p, wt)| wt * g.value(p).iter().map(|v| v * v).sum::<f64>())
        .sum())
}

fn check_pair(f: &GridField, g: &GridField) -> Result<()> {
    f.check_same_grid(g)?;
    if f.n != g.n {
        return Err(Error::GridMismatch(format!("n = {} vs {}", f.n, g.n)));
    }
    Ok(())
}

fn pointwise_gap(f: &GridField, g: &GridField, p: usize) -> f64 {
    node_gap(f, g, p, p)
}

fn node_gap(f: &GridField, g: &GridField, p: usize, q: usize) -> f64 {
    f.value(p)
        .iter()
        .zip(g.value(q))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn l1_distance(f: &GridField, g: &GridField, region: &Region) -> Result<f64> {
    check_pair(f, g)?;
    let mut fm = f.clone();
    fm.mask = merge_masks(f.mask(), g.mask());
    Ok(fm.weights(region)?.into_iter().map(|(p, w)| w * pointwise_gap(f, g, p)).sum())
}

pub fn l2_distance(f: &GridField, g: &GridField, region: &Region) -> Result<f64> {
    check_pair(f, g)?;
    let mut fm = f.clone();
    fm.mask = merge_masks(f.mask(), g.mask());
    Ok(fm
        .weights(region)?
        .into_iter()
        .map(|(p, w)| w * pointwise_gap(f, g, p).powi(2))
        .sum::<f64>()
        .sqrt())
}

pub fn c0_distance(f: &GridField, g: &GridField, region: &Region) -> Result<f64> {
    check_pair(f, g)?;
    let mut fm = f.clone();
    fm.mask = merge_masks(f.mask(), g.mask());
    let nodes = nodes_in(&fm, region);
    if nodes.is_empty() {
        return Err(Error::Empty("region contains no active nodes".into()));
    }
    Ok(nodes.into_iter().map(|p| pointwise_gap(f, g, p)).fold(0.0, f64::max))
}

/// Largest difference quotient |f(x)−f(y)|/|x−y| over active node pairs that
/// are adjacent in the 3ᵐ neighbourhood (axis and diagonal steps).
pub fn lipschitz_constant(f: &GridField) -> f64 {
    let m = f.m;
    let strides = f.strides();
    // offsets in {-1,0,1}^m whose first nonzero entry is +1, so each pair is seen once
    let mut offsets = Vec::new();
    for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        let off: Vec<i64> = (0..m)
            .map(|_| {
                let v = (c % 3) as i64 - 1;
                c /= 3;
                v
            })
            .collect();
        if off.iter().find(|&&v| v != 0) == Some(&1) {
            offsets.push(off);
        }
    }
    let mut idx = vec![0usize; m];
    let mut best: f64 = 0.0;
    for p in 0..f.len() {
        if !f.is_active(p) {
            continue;
        }
        unflatten(p, &f.dims, &mut idx);
        for off in &offsets {
            let inside = (0..m).all(|a| {
                let j = idx[a] as i64 + off[a];
                j >= 0 && j < f.dims[a] as i64
            });
            if !inside {
                continue;
            }
            let q = (0..m).fold(p as i64, |acc, a| acc + off[a] * strides[a] as i64) as usize;
            if !f.is_active(q) {
                continue;
            }
            let dist = f.spacing * (off.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
            best = best.max(node_gap(f, f, p, q) / dist);
        }
    }
    best
}

/// Multilinear resampling onto a new grid. Target coordinates within 10⁻⁹·h of
/// a source node take that node's value unchanged.
pub fn resample(f: &GridField, new_origin: &[f64], new_spacing: f64, new_dims: &[usize]) -> Result<GridField> {
    let interp = super::Multilinear::new(f);
    let m = f.m;
    let n = f.n;
    let target = GridField::new(
        m,
        n,
        new_dims.to_vec(),
        new_origin.to_vec(),
        new_spacing,
        vec![0.0; new_dims.iter().product::<usize>() * n],
    )?;
    let mut values = vec![0.0; target.len() * n];
    let mut x = vec![0.0; m];
    for p in 0..target.len() {
        target.point_into(p, &mut x);
        if !f.contains_point(&x) {
            return Err(Error::DomainEscape(format!("resample target {x:?} outside source grid")));
        }
        interp.value(&x, &mut values[p * n..(p + 1) * n])?;
    }
    GridField::new(m, n, new_dims.to_vec(), new_origin.to_vec(), new_spacing, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit_square(samples: usize, func: impl Fn(&[f64]) -> f64) -> GridField {
        let h = 1.0 / (samples - 1) as f64;
        GridField::from_fn(1, vec![samples; 2], vec![0.0, 0.0], h, |x, o| o[0] = func(x)).unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let f = unit_square(9, |_| 3.5);
        let g = gradient(&f).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_exact_on_linear() {
        let f = unit_square(11, |x| 0.7 * x[0]);
        let g = gradient(&f).unwrap();
        for p in 0..g.len() {
            assert_relative_eq!(g.value(p)[0], 0.7, epsilon = 1e-12);
            assert!(g.value(p)[1].abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_second_order() {
        let err = |samples: usize| {
            let f = unit_square(samples, |x| x[0].sin());
            let g = gradient(&f).unwrap();
            (0..g.len())
                .map(|p| (g.value(p)[0] - f.point(p)[0].cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(33) / err(65);
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_where_defined_drops_isolated_nodes() {
        let mut mask = vec![true; 25];
        // node (0, 2) keeps only its axis-0 neighbour chain
        mask[1] = false;
        mask[3] = false;
        let f = GridField::from_fn(1, vec![5, 5], vec![0.0; 2], 0.25, |x, o| o[0] = x[0] + 2.0 * x[1])
            .unwrap()
            .with_mask(mask)
            .unwrap();
        assert!(gradient(&f).is_err());
        let g = gradient_where_defined(&f).unwrap();
        assert!(!g.is_active(2));
        assert!((g.value(12)[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_needs_three_samples() {
        let f = GridField::new(2, 1, vec![2, 5], vec![0.0; 2], 0.1, vec![0.0; 10]).unwrap();
        assert!(matches!(gradient(&f), Err(Error::TooFewSamples { axis: 0, .. })));
    }

    #[test]
    fn gradient_avoids_masked_neighbours() {
        let f = unit_square(9, |x| 2.0 * x[0] - x[1]);
        let mut mask = vec![true; 81];
        mask[4 * 9 + 4] = false;
        let f = f.with_mask(mask).unwrap();
        let g = gradient(&f).unwrap();
        let p = 4 * 9 + 5;
        assert_relative_eq!(g.value(p)[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(g.value(p)[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn laplacian_of_quadratic() {
        let f = unit_square(9, |x| x[0] * x[0] + 3.0 * x[1] * x[1]);
        let l = laplacian(&f).unwrap();
        assert_eq!(l.dims(), &[7, 7]);
        for v in l.values() {
            assert_relative_eq!(*v, 8.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn mollify_constant_and_affine() {
        let phi = Mollifier::new(0.1);
        let c = unit_square(41, |_| 2.25);
        let mc = mollify(&c, &phi).unwrap();
        for v in mc.values() {
            assert_relative_eq!(*v, 2.25, epsilon = 1e-14);
        }
        let a = unit_square(41, |x| 0.3 * x[0] - 1.2 * x[1] + 0.5);
        let ma = mollify(&a, &phi).unwrap();
        for p in 0..ma.len() {
            let x = ma.point(p);
            assert_relative_eq!(ma.value(p)[0], 0.3 * x[0] - 1.2 * x[1] + 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn mollify_shrinks_domain() {
        let phi = Mollifier::new(0.1);
        let f = unit_square(41, |_| 0.0);
        let g = mollify(&f, &phi).unwrap();
        assert_eq!(g.dims(), &[35, 35]);
        assert_relative_eq!(g.origin()[0], 0.075, epsilon = 1e-15);
    }

    #[test]
    fn mollify_rejects_narrow_kernel() {
        let f = unit_square(41, |_| 0.0);
        assert!(mollify(&f, &Mollifier::new(0.04)).is_err());
        let small = unit_square(5, |_| 0.0);
        assert!(matches!(mollify(&small, &Mollifier::new(1.0)), Err(Error::InsufficientMargin(_))));
    }

    /// Dense quadrature of the continuous convolution at a single point.
    fn dense_convolution(func: impl Fn(&[f64]) -> f64, x: &[f64], phi: &Mollifier, k: usize) -> f64 {
        let r = phi.radius();
        let h = 2.0 * r / k as f64;
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                let y = [-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h];
                let w = phi.kernel(&y);
                acc += w * func(&[x[0] - y[0], x[1] - y[1]]) * h * h;
            }
        }
        acc
    }

    #[test]
    fn mollify_sin_matches_dense_oracle() {
        let phi = Mollifier::new(0.1);
        let err = |samples: usize| {
            let f = unit_square(samples, |x| x[0].sin());
            let g = mollify(&f, &phi).unwrap();
            let mut e: f64 = 0.0;
            for p in (0..g.len()).step_by(97) {
                let x = g.point(p);
                let oracle = dense_convolution(|y| y[0].sin(), &x, &phi, 400);
                e = e.max((g.value(p)[0] - oracle).abs());
            }
            e
        };
        let (e1, e2) = (err(41), err(81));
        assert!(e1 < 1e-5, "{e1}");
        assert!(e2 <= e1, "{e1} {e2}");
    }

    #[test]
    fn mollify_is_linear() {
        let phi = Mollifier::new(0.1);
        let f = unit_square(41, |x| (3.0 * x[0]).sin() * x[1]);
        let g = unit_square(41, |x| (x[0] * x[1]).exp());
        let lhs = mollify(&f.combine(0.7, &g, -1.3).unwrap(), &phi).unwrap();
        let rhs = mollify(&f, &phi)
            .unwrap()
            .combine(0.7, &mollify(&g, &phi).unwrap(), -1.3)
            .unwrap();
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mollify_does_not_increase_sup_or_lipschitz() {
        let phi = Mollifier::new(0.1);
        let f = unit_square(41, |x| ((7.0 * x[0]).sin() + (5.0 * x[1]).cos()) * 0.3);
        let g = mollify(&f, &phi).unwrap();
        let sup = |h: &GridField| h.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(sup(&g) <= sup(&f) + 1e-14);
        let lip = |h: &GridField| holder_seminorm(h, 0, 1.0, (0.024, 0.026), &Region::Whole).unwrap();
        assert!(lip(&g) <= lip(&f) + 1e-12);
    }

    #[test]
    fn gradient_commutes_with_mollify() {
        let phi = Mollifier::new(0.15);
        let gap = |samples: usize| {
            let f = unit_square(samples, |x| (2.0 * x[0]).sin() * (3.0 * x[1]).cos());
            let a = gradient(&mollify(&f, &phi).unwrap()).unwrap();
            let gf = gradient(&f).unwrap();
            let b = mollify(&gf, &phi).unwrap();
            // compare away from the one-sided rims
            let inner = Region::cube(&[0.5, 0.5], 0.2);
            c0_distance(&a, &b, &inner).unwrap()
        };
        // interior differencing and discrete convolution commute exactly
        let (g1, g2) = (gap(41), gap(81));
        assert!(g1 < 1e-12 && g2 < 1e-12, "{g1} {g2}");
    }

    #[test]
    fn holder_of_constant_is_zero() {
        let f = unit_square(9, |_| 1.0);
        assert_eq!(holder_seminorm(&f, 0, 0.5, (0.2, 2.0), &Region::Whole).unwrap(), 0.0);
    }

    #[test]
    fn holder_lipschitz_of_coordinate() {
        let f = unit_square(11, |x| x[0]);
        let v = holder_seminorm(&f, 0, 1.0, (0.2, 2.0), &Region::Whole).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn holder_empty_pair_set() {
        let f = unit_square(5, |x| x[0]);
        assert!(matches!(
            holder_seminorm(&f, 0, 1.0, (0.01, 0.02), &Region::Whole),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn holder_beta_one_bounded_by_next_derivative() {
        let phi = Mollifier::new(0.1);
        let f = unit_square(61, |x| (4.0 * x[0]).sin() * (3.0 * x[1]).cos() * 0.2);
        let z = mollify(&f, &phi).unwrap();
        let h = z.spacing();
        let sem = holder_seminorm(&z, 1, 1.0, (2.0 * h, 1.0), &Region::Whole).unwrap();
        let d2 = derivative(&z, 2).unwrap();
        // operator norm of D²f bounded by its Hilbert–Schmidt norm
        let hs = (0..d2.len())
            .map(|p| d2.value(p).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!(sem <= 1.05 * hs, "{sem} {hs}");
    }

    #[test]
    fn average_gradient_cases() {
        let samples = 129;
        let h = 2.0 / (samples - 1) as f64;
        let make = |func: fn(&[f64]) -> f64| {
            GridField::from_fn(1, vec![samples; 2], vec![-1.0, -1.0], h, |x, o| o[0] = func(x)).unwrap()
        };
        let aff = make(|x| 0.4 * x[0] - 0.9 * x[1]);
        let a = average_gradient(&aff, &[0.1, 0.05], 0.5).unwrap();
        assert_relative_eq!(a[0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(a[1], -0.9, epsilon = 1e-12);
        let sq = make(|x| x[0] * x[0]);
        let a = average_gradient(&sq, &[0.0, 0.0], 0.5).unwrap();
        assert!(a[0].abs() < 1e-13 && a[1].abs() < 1e-13);
        let a = average_gradient(&sq, &[0.2, -0.1], 0.5).unwrap();
        assert_relative_eq!(a[0], 0.4, epsilon = 1e-4);
        assert!(a[1].abs() < 1e-12);
        assert!(average_gradient(&sq, &[0.8, 0.0], 0.5).is_err());
    }

    #[test]
    fn dirichlet_energy_of_linear() {
        let f = unit_square(17, |x| 1.5 * x[0]);
        assert_relative_eq!(dirichlet_energy(&f, &Region::Whole).unwrap(), 2.25, epsilon = 1e-12);
    }

    #[test]
    fn distances_reject_mismatch() {
        let f = unit_square(9, |_| 0.0);
        let g = unit_square(11, |_| 0.0);
        assert!(matches!(l1_distance(&f, &g, &Region::Whole), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn distances_vanish_on_equal() {
        let f = unit_square(9, |x| x[0] * x[1]);
        assert_eq!(l1_distance(&f, &f, &Region::Whole).unwrap(), 0.0);
        assert_eq!(l2_distance(&f, &f, &Region::Whole).unwrap(), 0.0);
        assert_eq!(c0_distance(&f, &f, &Region::Whole).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn distances_triangle(seed in 0u64..1000) {
            let s = seed as f64;
            let f = unit_square(9, |x| (s + x[0] * 3.0).sin());
            let g = unit_square(9, |x| (s * 0.5 + x[1]).cos());
            let h = unit_square(9, |x| x[0] * x[1] * s.sin());
            for d in [l1_distance, l2_distance, c0_distance] {
                let fg = d(&f, &g, &Region::Whole).unwrap();
                let gh = d(&g, &h, &Region::Whole).unwrap();
                let fh = d(&f, &h, &Region::Whole).unwrap();
                prop_assert!(fh <= fg + gh + 1e-12);
            }
        }

        #[test]
        fn holder_subsample_bounded_by_full(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..49).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = GridField::new(2, 1, vec![7, 7], vec![0.0, 0.0], 1.0 / 6.0, vals).unwrap();
            let full = holder_seminorm(&f, 0, 0.5, (0.1, 2.0), &Region::Whole).unwrap();
            let sub = holder_seminorm(&f, 0, 0.5, (0.1, 2.0), &Region::cube(&[0.5, 0.5], 0.3)).unwrap();
            prop_assert!(sub <= full);
            let same = holder_seminorm(&f, 0, 0.5, (0.1, 2.0), &Region::cube(&[0.5, 0.5], 0.5)).unwrap();
            prop_assert_eq!(same, full);
        }
    }

    #[test]
    fn resample_identity_is_bit_exact() {
        let f = unit_square(13, |x| (x[0] * 7.1).sin() + x[1].exp());
        let g = resample(&f, f.origin(), f.spacing(), f.dims()).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn resample_exact_on_affine() {
        let f = unit_square(9, |x| 0.3 - 2.0 * x[0] + 0.25 * x[1]);
        let g = resample(&f, &[0.0371, 0.1123], 0.0917, &[8, 9]).unwrap();
        for p in 0..g.len() {
            let x = g.point(p);
            assert_relative_eq!(g.value(p)[0], 0.3 - 2.0 * x[0] + 0.25 * x[1], epsilon = 1e-13);
        }
    }

    #[test]
    fn resample_second_order() {
        let err = |samples: usize| {
            let f = unit_square(samples, |x| (PI * x[0]).sin() * x[1]);
            let g = resample(&f, &[0.013, 0.017], 0.0131, &[70, 70]).unwrap();
            (0..g.len())
                .map(|p| {
                    let x = g.point(p);
                    (g.value(p)[0] - (PI * x[0]).sin() * x[1]).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(17) / err(33);
        assert!((3.0..5.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn resample_escape() {
        let f = unit_square(9, |_| 0.0);
        assert!(matches!(resample(&f, &[0.5, 0.5], 0.1, &[8, 2]), Err(Error::DomainEscape(_))));
    }

    #[test]
    fn lipschitz_constant_of_linear_maps() {
        let f = unit_square(11, |x| 0.7 * x[0] - 0.7 * x[1]);
        assert_relative_eq!(lipschitz_constant(&f), 0.7 * 2f64.sqrt(), epsilon = 1e-12);
        let g = unit_square(11, |x| 3.0 * x[1]);
        assert_relative_eq!(lipschitz_constant(&g), 3.0, epsilon = 1e-12);
    }
}
