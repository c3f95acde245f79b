use std::fs;

use cmlab::area::{graph_point, Graph};
use cmlab::cm::{graph_excess, run_center_manifold, Params};
use cmlab::field::io::write_field;
use cmlab::minimize::{first_variation_residual, minimize_area, test_field_battery, MinimizeOptions};
use cmlab::verify::excess_decay_sweep;
use cmlab::{lipapprox, GridField, NearHorizontalPlane};
use serde_json::json;

use crate::config::InputSpec;
use crate::{Ctx, Failure};

fn prepare_out(ctx: &Ctx) -> Result<(), Failure> {
    fs::create_dir_all(&ctx.out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", ctx.out.display())))
}

fn field_and_params(ctx: &Ctx) -> Result<(GridField, Params), Failure> {
    let u = ctx.cfg.load_field()?;
    let params = ctx.cfg.params(u.m(), u.n(), &ctx.flags)?;
    Ok((u, params))
}

fn center(ctx: &Ctx, m: usize) -> Result<Vec<f64>, Failure> {
    let c = ctx.cfg.center.clone().unwrap_or_else(|| vec![0.0; m]);
    if c.len() != m {
        return Err(Failure::Config(format!("center has {} coordinates, expected {m}", c.len())));
    }
    Ok(c)
}

pub fn generate(ctx: &Ctx) -> Result<(), Failure> {
    let InputSpec::Preset {
        preset,
        m,
        n,
        half,
        samples,
    } = ctx.cfg.input()?
    else {
        return Err(Failure::Config("generate needs a preset input".into()));
    };
    let params = ctx.cfg.params(*m, *n, &ctx.flags)?;
    let data = preset.sample(*m, *n, *half, *samples)?;
    let res = minimize_area(&data, &MinimizeOptions::default())?;
    let tests = test_field_battery(&res.solution, ctx.cfg.tests.unwrap_or(10), ctx.seed)?;
    let residual = first_variation_residual(&res.solution, &tests)?;
    let excess = if *m == 2 && *half >= 1.0 {
        Some(graph_excess(&res.solution)?)
    } else {
        None
    };
    prepare_out(ctx)?;
    write_field(&res.solution, &ctx.path("field.json"))?;
    ctx.write_json(
        "generate.json",
        &json!({
            "params": params,
            "seed": ctx.seed,
            "preset": preset,
            "half": half,
            "samples": samples,
            "result": res.summary(),
            "first_variation_residual": residual,
            "excess": excess,
        }),
    )
}

pub fn excess(ctx: &Ctx) -> Result<(), Failure> {
    let (u, params) = field_and_params(ctx)?;
    let x = center(ctx, u.m())?;
    let r = ctx.cfg.radius.unwrap_or(1.0);
    let graph = Graph::new(&u)?;
    let cyl = graph.cylindrical_excess(&x, r, &NearHorizontalPlane::horizontal(u.m(), u.n()))?;
    let p = graph_point(&u, &x)?;
    let (plane, sph) = graph.optimal_plane(&p, r, None)?;
    prepare_out(ctx)?;
    ctx.write_json(
        "excess.json",
        &json!({
            "params": params,
            "center": x,
            "radius": r,
            "cylindrical_horizontal": cyl,
            "spherical_optimal": sph,
            "optimal_plane": plane,
        }),
    )
}

pub fn decay(ctx: &Ctx) -> Result<(), Failure> {
    let (u, params) = field_and_params(ctx)?;
    let x = center(ctx, u.m())?;
    let table = excess_decay_sweep(&u, &x, ctx.cfg.radius.unwrap_or(1.0), ctx.cfg.depth.unwrap_or(3))?;
    prepare_out(ctx)?;
    let mut csv = String::from("radius,excess,ratio\n");
    for row in &table.rows {
        let ratio = row.ratio.map(|q| format!("{q:e}")).unwrap_or_default();
        csv.push_str(&format!("{:e},{:e},{ratio}\n", row.radius, row.excess));
    }
    ctx.write_text("decay.csv", &csv)?;
    ctx.write_json("decay.json", &json!({"params": params, "table": table}))
}

pub fn lipapprox(ctx: &Ctx) -> Result<(), Failure> {
    let (u, params) = field_and_params(ctx)?;
    let x = center(ctx, u.m())?;
    let r = ctx.cfg.radius.unwrap_or(1.0);
    let plane = NearHorizontalPlane::horizontal(u.m(), u.n());
    let e = Graph::new(&u)?.cylindrical_excess(&x, r, &plane)?.value / r.powi(u.m() as i32);
    let res = lipapprox::lipschitz_approximation(&u, &x, r, e, &params.lipapprox())?;
    prepare_out(ctx)?;
    write_field(&res.w, &ctx.path("w.json"))?;
    write_field(&res.k_mask, &ctx.path("k_mask.json"))?;
    ctx.write_json("lipapprox.json", &json!({"params": params, "result": res.summary()}))
}

pub fn cm(ctx: &Ctx) -> Result<(), Failure> {
    let (u, params) = field_and_params(ctx)?;
    if let Some(k) = ctx.level {
        if k < params.n0 || k > params.k_max {
            return Err(Failure::Config(format!("level {k} outside {}..={}", params.n0, params.k_max)));
        }
    }
    let run = run_center_manifold(&u, params)?;
    let summary = run.summary()?;
    let est = run.estimates()?;
    prepare_out(ctx)?;
    for l in &run.levels {
        if ctx.level.is_none_or(|k| k == l.k) {
            write_field(&l.zeta, &ctx.path(&format!("zeta_{}.json", l.k)))?;
        }
    }
    let mut csv = String::from("level,index,excess_l,tilt,tilt_father,g1,g2,g3,g4,zf_ratio,lap_ratio,bad_measure,lip_on_k\n");
    for c in &est.cubes {
        let index: Vec<String> = c.index.iter().map(|i| i.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            c.level,
            index.join(" "),
            c.excess_l,
            c.tilt,
            c.tilt_father,
            c.g_ratios[0],
            c.g_ratios[1],
            c.g_ratios[2],
            c.g_ratios[3],
            c.zf_ratio,
            c.lap_ratio,
            c.bad_measure,
            c.lip_on_k
        ));
    }
    ctx.write_text("cubes.csv", &csv)?;
    ctx.write_json(
        "cm.json",
        &json!({
            "params": summary.params,
            "summary": summary,
            "summaries": est.summaries,
            "excess_l_exponent": est.excess_l_exponent,
            "excess_l_constant": est.excess_l_constant,
            "tilt_constant": est.tilt_constant,
            "tilt_father_constant": est.tilt_father_constant,
        }),
    )
}

pub fn verify_all(ctx: &Ctx) -> Result<(), Failure> {
    let mut config = ctx.cfg.acceptance.clone().unwrap_or_default();
    config.seed = ctx.seed;
    config.params = ctx.cfg.params(2, 1, &ctx.flags)?;
    prepare_out(ctx)?;
    let report = cmlab::verify::verify_all(&config, &mut |msg| eprintln!("{msg}"))?;
    ctx.write_json("verify.json", &report)?;
    ctx.write_text("verify.csv", &report.to_csv())?;
    for c in &report.criteria {
        println!("{} {:>2} {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.check);
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
        Err(Failure::Assertion(format!("criteria {} failed", failed.join(", "))))
    }
}
