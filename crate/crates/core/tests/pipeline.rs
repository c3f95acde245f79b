use cmlab::area::Graph;
use cmlab::cm::graph_excess;
use cmlab::field::io::{read_field, write_field};
use cmlab::lipapprox::{lipschitz_approximation, LipApproxParams};
use cmlab::minimize::{minimize_area, MinimizeOptions, Preset};
use cmlab::verify::excess_decay_sweep;
use cmlab::{GridField, NearHorizontalPlane};
use proptest::prelude::*;

fn trig(eps: f64, half: f64, samples: usize) -> GridField {
    let data = Preset::Trig { eps, mode: 2 }.sample(2, 1, half, samples).unwrap();
    minimize_area(&data, &MinimizeOptions::default()).unwrap().solution
}

#[test]
fn minimal_graph_survives_a_file_round_trip() {
    let u = trig(0.1, 1.0, 65);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.json");
    write_field(&u, &path).unwrap();
    let back = read_field(&path).unwrap();
    assert_eq!(back, u);
    assert_eq!(graph_excess(&back).unwrap(), graph_excess(&u).unwrap());
}

#[test]
fn lipschitz_approximation_of_a_minimal_graph() {
    let u = trig(0.05, 1.2, 97);
    let horizontal = NearHorizontalPlane::horizontal(2, 1);
    let e = Graph::new(&u).unwrap().cylindrical_excess(&[0.0, 0.0], 1.0, &horizontal).unwrap().value;
    let params = LipApproxParams::default();
    let res = lipschitz_approximation(&u, &[0.0, 0.0], 1.0, e, &params).unwrap();
    let bound = e.powf(params.gamma);
    assert!(res.lip_on_k <= bound, "{} > {bound}", res.lip_on_k);
    assert!(res.lip_w <= bound * 1.01);
    assert!(res.bad_measure >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn decay_table_ignores_vertical_translation(a in 0.01f64..0.05, c in -1.0f64..1.0) {
        let field = |shift: f64| {
            GridField::from_fn(1, vec![129, 129], vec![-1.0, -1.0], 1.0 / 64.0, |x, o| {
                o[0] = a * (x[0] * x[0] - x[1] * x[1]) + shift
            })
            .unwrap()
        };
        let t0 = excess_decay_sweep(&field(0.0), &[0.0, 0.0], 0.8, 2).unwrap();
        let t1 = excess_decay_sweep(&field(c), &[0.0, 0.0], 0.8, 2).unwrap();
        for (r0, r1) in t0.rows.iter().zip(&t1.rows) {
            prop_assert!((r0.excess - r1.excess).abs() <= 1e-9 * r0.excess);
        }
        for row in &t0.rows[1..] {
            prop_assert!((row.ratio.unwrap() - 0.25).abs() < 0.02);
        }
    }
}
