use super::unit_ball_volume;

/// Radial bump φ_r(x) = c·r⁻ᵐ·ψ(|x|/r) with ψ(t) = exp(−1/(1−t²)) on t < 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    radius: f64,
    // profile mass for m = 1, 2, 3
    mass: [f64; 3],
}

fn profile(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// ∫_{ℝᵐ} ψ(|x|) dx = m·ω_m ∫₀¹ ψ(t) t^{m−1} dt, by composite Simpson.
/// The integrand is flat to all orders at t = 1, so the rule converges fast.
fn profile_mass(m: usize) -> f64 {
    let k = 4096;
    let h = 1.0 / k as f64;
    let g = |t: f64| profile(t) * t.powi(m as i32 - 1);
    let mut s = g(0.0) + g(1.0);
    for i in 1..k {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(i as f64 * h);
    }
    m as f64 * unit_ball_volume(m) * s * h / 3.0
}

impl Mollifier {
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0, "mollifier radius must be positive");
        Mollifier {
            radius,
            mass: [profile_mass(1), profile_mass(2), profile_mass(3)],
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Continuous kernel value, integrating to 1 over ℝᵐ.
    pub fn kernel(&self, x: &[f64]) -> f64 {
        let m = x.len();
        let t = x.iter().map(|v| v * v).sum::<f64>().sqrt() / self.radius;
        let mass = if (1..=3).contains(&m) { self.mass[m - 1] } else { profile_mass(m) };
        profile(t) / (mass * self.radius.powi(m as i32))
    }

    /// Sampled kernel on a grid of spacing `h`: node offsets and weights,
    /// renormalized so the weights sum to exactly 1.
    pub fn stencil(&self, m: usize, h: f64) -> Vec<(Vec<i64>, f64)> {
        let reach = (self.radius / h).ceil() as i64;
        let side = (2 * reach + 1) as usize;
        let mut out = Vec::new();
        let mut idx = vec![0usize; m];
        for t in 0..side.pow(m as u32) {
            super::unflatten(t, &vec![side; m], &mut idx);
            let o: Vec<i64> = idx.iter().map(|&i| i as i64 - reach).collect();
            let r = o.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt() * h / self.radius;
            let w = profile(r);
            if w > 0.0 {
                out.push((o, w));
            }
        }
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        for (_, w) in out.iter_mut() {
            *w /= total;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn continuous_kernel_integrates_to_one() {
        for m in 1..=3 {
            let phi = Mollifier::new(0.3);
            // radial quadrature independent of the Simpson rule: midpoint on shells
            let k = 200_000;
            let h = 0.3 / k as f64;
            let surf = m as f64 * unit_ball_volume(m);
            let mut s = 0.0;
            for i in 0..k {
                let r = (i as f64 + 0.5) * h;
                let mut x = vec![0.0; m];
                x[0] = r;
                s += phi.kernel(&x) * surf * r.powi(m as i32 - 1) * h;
            }
            assert_relative_eq!(s, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn stencil_sums_to_one_and_is_radial() {
        let phi = Mollifier::new(0.1);
        let st = phi.stencil(2, 0.02);
        let total: f64 = st.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let first: f64 = st.iter().map(|(o, w)| o[0] as f64 * w).sum();
        assert!(first.abs() < 1e-15);
        let find = |a: i64, b: i64| st.iter().find(|(o, _)| o[0] == a && o[1] == b).unwrap().1;
        assert_eq!(find(3, 1), find(-1, 3));
        assert_eq!(find(2, -2), find(-2, 2));
        assert!(st.iter().all(|(o, _)| ((o[0] * o[0] + o[1] * o[1]) as f64).sqrt() * 0.02 < 0.1));
    }

    #[test]
    fn sampled_kernel_mass_converges() {
        let phi = Mollifier::new(0.1);
        let mass = |h: f64| {
            let reach = (0.1 / h).ceil() as i64;
            let mut s = 0.0;
            for i in -reach..=reach {
                for j in -reach..=reach {
                    s += phi.kernel(&[i as f64 * h, j as f64 * h]) * h * h;
                }
            }
            (s - 1.0).abs()
        };
        let (e1, e2) = (mass(0.01), mass(0.0025));
        assert!(e1 < 1e-3 && e2 < 1e-8, "{e1} {e2}");
    }
}
