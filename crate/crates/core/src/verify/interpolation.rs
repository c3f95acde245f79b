use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{derivative, holder_seminorm, nodes_in, GridField, Region};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationRow {
    pub order: usize,
    /// ‖Dʲf‖_{C⁰(B_r)}.
    pub lhs: f64,
    /// r^{−m−j}‖f‖_{L¹(B_s)}.
    pub l1_term: f64,
    /// r^{3+κ−j}[D³f]_{κ,B_s}.
    pub holder_term: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub r: f64,
    pub s: f64,
    pub kappa: f64,
    pub rows: Vec<InterpolationRow>,
    /// Smallest C for which all four inequalities hold.
    pub constant: f64,
}

/// Both sides of ‖Dʲf‖_{C⁰(B_r)} ≤ C r^{−m−j}‖f‖_{L¹(B_s)} + C r^{3+κ−j}[D³f]_{κ,B_s}
/// for j = 0..=3, with balls centred at the origin.
pub fn interpolation_inequality_check(f: &GridField, r: f64, s: f64, kappa: f64) -> Result<InterpolationReport> {
    if !(0.0 < r && r < s) {
        return Err(Error::Precondition(format!("need 0 < r < s, got r = {r}, s = {s}")));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Precondition(format!("κ = {kappa} outside (0, 1]")));
    }
    let m = f.m();
    let zero = vec![0.0; m];
    let small = Region::ball(&zero, r);
    let big = Region::ball(&zero, s);
    let l1: f64 = f
        .weights(&big)?
        .into_iter()
        .map(|(p, w)| w * f.value(p).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    let h = f.spacing();
    let seminorm = holder_seminorm(f, 3, kappa, (h, 2.0 * s), &big)?;
    let mut rows = Vec::with_capacity(4);
    for j in 0..=3usize {
        let d = derivative(f, j)?;
        let lhs = nodes_in(&d, &small)
            .into_iter()
            .map(|p| d.value(p).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let l1_term = r.powi(-(m as i32) - j as i32) * l1;
        let holder_term = r.powf(3.0 + kappa - j as f64) * seminorm;
        let den = l1_term + holder_term;
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / den };
        rows.push(InterpolationRow {
            order: j,
            lhs,
            l1_term,
            holder_term,
            ratio,
        });
    }
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(InterpolationReport {
        r,
        s,
        kappa,
        rows,
        constant,
    })
}

/// A scalar test function on ℝ²: a cubic polynomial plus a small smooth perturbation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryMember {
    /// Coefficients of 1, x, y, x², xy, y², x³, x²y, xy², y³.
    pub cubic: Vec<f64>,
    /// Terms amplitude·sin(k·x + phase).
    pub noise: Vec<(f64, [f64; 2], f64)>,
}

impl BatteryMember {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        let mono = [1.0, a, b, a * a, a * b, b * b, a * a * a, a * a * b, a * b * b, b * b * b];
        let poly: f64 = self.cubic.iter().zip(mono).map(|(c, v)| c * v).sum();
        let noise: f64 = self
            .noise
            .iter()
            .map(|(amp, k, ph)| amp * (k[0] * a + k[1] * b + ph).sin())
            .sum();
        poly + noise
    }

    pub fn without_noise(&self) -> Self {
        BatteryMember {
            cubic: self.cubic.clone(),
            noise: Vec::new(),
        }
    }

    pub fn sample(&self, half: f64, samples: usize) -> Result<GridField> {
        let h = 2.0 * half / (samples - 1) as f64;
        GridField::from_fn(1, vec![samples; 2], vec![-half; 2], h, |x, o| o[0] = self.eval(x))
    }
}

/// `count` random cubics with unit-scale coefficients, each perturbed by three
/// sine modes of total amplitude `noise`.
pub fn polynomial_battery(count: usize, noise: f64, seed: u64) -> Vec<BatteryMember> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let cubic = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noise = (0..3)
                .map(|_| {
                    let k = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                    (noise / 3.0, k, rng.gen_range(0.0..std::f64::consts::TAU))
                })
                .collect();
            BatteryMember { cubic, noise }
        })
        .collect()
}
