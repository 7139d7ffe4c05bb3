use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, Context, Result};
use stiffcal::compensator::{
    equivalent_joint_stiffness, eta_curve as tabulate_eta, linspace, CompensatorElastics, CompensatorGeometry,
    CompensatorParams,
};
use stiffcal::config::load_config;
use stiffcal::doe::{
    optimize_plan, read_plan_csv, test_pose_accuracy, write_plan_csv, CalibrationPlan, NoiseModel, PlanEntry,
};
use stiffcal::elasto::{
    confidence_intervals_elasto, identify_elastostatics, read_records_csv, write_records_csv, Column, ParameterLayout,
};
use stiffcal::geometry::{identify_compensator_geometry, read_marker_csv, write_marker_csv};
use stiffcal::model::{pose_error, Joints, Wrench};
use stiffcal::sim::{
    simulate_deflection_records, simulate_geometry_dataset, simulate_linear_records, GeometryCell, GroundTruth,
};
use stiffcal::stiffness::{cartesian_stiffness, solve_equilibrium, EquilibriumOptions, ToolLoading};

use crate::files::{parse_doe, GeometryFile};
use crate::manifest::Manifest;
use crate::report::{long_csv, rows_csv, table, Row};
use crate::{DoeArgs, ElastoIdentArgs, EtaCurveArgs, GeomIdentArgs, Output, PredictArgs, SimKind, SimulateArgs};

/// rad/(N·mm) to µrad/(N·m).
const COMPLIANCE_SCALE: f64 = 1e9;
const COMPLIANCE_UNIT: &str = "µrad/(N·m)";

fn start(subcommand: &str, output: &Output, seed: Option<u64>) -> Result<Manifest> {
    fs::create_dir_all(&output.out)
        .with_context(|| format!("cannot create output directory {}", output.out.display()))?;
    Ok(Manifest::new(subcommand, &output.out, seed))
}

fn read_geometry_file(m: &mut Manifest, path: &std::path::Path) -> Result<CompensatorGeometry> {
    let text = m.read_input_text(path)?;
    let file: GeometryFile = toml::from_str(&text).with_context(|| format!("{}", path.display()))?;
    file.geometry().with_context(|| format!("{}", path.display()))
}

pub fn geom_ident(a: &GeomIdentArgs) -> Result<()> {
    let mut m = start("geom-ident", &a.output, Some(a.seed))?;
    m.option("data", a.data.display());
    m.option("samples", a.samples);
    let bytes = m.read_input(&a.data)?;
    let data = read_marker_csv(bytes.as_slice()).with_context(|| format!("{}", a.data.display()))?;
    let est = identify_compensator_geometry(&data, a.samples, a.seed)?;
    let rows = vec![
        Row::new("L", "mm", est.l, est.ci[0]),
        Row::new("a_x", "mm", est.ax, est.ci[1]),
        Row::new("a_y", "mm", est.ay, est.ci[2]),
    ];
    let mut text = table("Compensator geometry (±3σ)", &rows);
    writeln!(text, "\nposes: {}, satellite markers: {}", data.len(), data.satellites().len())?;
    writeln!(text, "crank fit rms: {:.4} mm", est.crank_fit.rms)?;
    writeln!(text, "arc fit rms: {:.4} mm", est.arc_fit.rms)?;
    writeln!(
        text,
        "angle map: q_c = {:+} * q2 + {:.3} deg",
        est.direction,
        est.phase.to_degrees().rem_euclid(360.0)
    )?;
    let geometry = GeometryFile {
        L_mm: est.l,
        ax_mm: est.ax,
        ay_mm: est.ay,
        q2_sign: est.direction,
        q2_offset_deg: est.phase.to_degrees().rem_euclid(360.0),
    };
    m.write_output("geometry_report.txt", text.as_bytes())?;
    m.write_output("geometry.csv", rows_csv(&rows).as_bytes())?;
    m.write_output("compensator_geometry.toml", toml::to_string(&geometry)?.as_bytes())?;
    m.finish()?;
    print!("{text}");
    Ok(())
}

pub fn elasto_ident(a: &ElastoIdentArgs) -> Result<()> {
    let mut m = start("elasto-ident", &a.output, Some(a.seed))?;
    m.option("records", a.records.display());
    m.option("model", a.model.display());
    if let Some(g) = &a.geometry {
        m.option("geometry", g.display());
    }
    m.option("joints", format!("{:?}", a.joints));
    m.option("bucket_tol_deg", a.bucket_tol_deg);
    m.option("samples", a.samples);

    let config = load_config(&m.read_input_text(&a.model)?).with_context(|| format!("{}", a.model.display()))?;
    let geometry = match &a.geometry {
        Some(path) => Some(read_geometry_file(&mut m, path)?),
        None => config.compensator.map(|c| c.geometry),
    };
    let bytes = m.read_input(&a.records)?;
    let records = read_records_csv(bytes.as_slice()).with_context(|| format!("{}", a.records.display()))?;

    let tol = a.bucket_tol_deg.to_radians();
    let buckets = if a.joints.contains(&2) {
        ParameterLayout::buckets_from_angles(records.iter().map(|r| r.q[1]), tol)
    } else {
        Vec::new()
    };
    let layout = ParameterLayout::new(&a.joints, buckets, tol)?;
    let est = identify_elastostatics(&records, &layout, &config.model, geometry.as_ref())?;
    let ci = confidence_intervals_elasto(&records, &layout, &config.model, geometry.as_ref(), &est, a.samples, a.seed)?;

    let mut rows = Vec::new();
    for (c, column) in layout.columns().iter().enumerate() {
        let name = match column {
            Column::Bucket(b) => format!("k2 (q2 = {:.2}°)", layout.buckets()[*b].to_degrees()),
            Column::Joint(_) => layout.label(c),
        };
        rows.push(Row::new(
            name,
            COMPLIANCE_UNIT,
            est.fit.k[c] * COMPLIANCE_SCALE,
            ci.compliances[c] * COMPLIANCE_SCALE,
        ));
    }
    let mut curve = None;
    if let (Some(sep), Some(geom), Some(sci)) = (&est.separation, &geometry, &ci.separation) {
        let al = geom.a() * geom.l();
        rows.push(Row::new(
            "k2 (bare)",
            COMPLIANCE_UNIT,
            COMPLIANCE_SCALE / sep.k0,
            ci.bare_k2.unwrap_or(0.0) * COMPLIANCE_SCALE,
        ));
        rows.push(Row::new("K_c", "N/mm", sep.kc, sci[1]));
        rows.push(Row::new("s0", "mm", sep.s0, sci[2]));
        let kc_compliance = COMPLIANCE_SCALE / (sep.kc * al);
        rows.push(Row::new(
            "k_c = 1/(K_c·a·L)",
            COMPLIANCE_UNIT,
            kc_compliance,
            kc_compliance * sci[1] / sep.kc,
        ));
        if let Ok(elastics) = CompensatorElastics::new(sep.kc, sep.s0) {
            curve = Some((
                CompensatorParams {
                    geometry: *geom,
                    elastics,
                },
                sep.k0,
            ));
        }
    }

    let mut text = table("Elastostatic parameters (±3σ)", &rows);
    writeln!(text, "\nrecords: {}, equations: {}", records.len(), est.fit.equations)?;
    writeln!(text, "residual rms: {:.4} mm, sigma estimate: {:.4} mm", est.fit.rms, est.fit.sigma2.sqrt())?;
    if let Some(sep) = &est.separation {
        writeln!(text, "separation condition number: {:.3e}", sep.condition_number)?;
    }
    if ci.rejected > 0 {
        writeln!(text, "resamples rejected (non-physical separation): {}", ci.rejected)?;
    }
    for w in &est.warnings {
        writeln!(text, "warning: {w}")?;
    }

    m.write_output("elasto_report.txt", text.as_bytes())?;
    m.write_output("elasto.csv", rows_csv(&rows).as_bytes())?;
    if let Some((params, k0)) = curve {
        let grid = linspace(-140.0, 0.0, 141);
        let mut points = Vec::new();
        for q in &grid {
            let k = equivalent_joint_stiffness(&params, k0, q.to_radians()).stiffness;
            points.push((*q, "k2_equivalent".to_string(), COMPLIANCE_SCALE / k));
        }
        for q in &grid {
            points.push((*q, "k2_bare".to_string(), COMPLIANCE_SCALE / k0));
        }
        for (b, q) in layout.buckets().iter().enumerate() {
            let c = layout.bucket_column(b).unwrap();
            points.push((q.to_degrees(), "k2_identified".to_string(), est.fit.k[c] * COMPLIANCE_SCALE));
        }
        m.write_output("k2_equivalent.csv", long_csv(points).as_bytes())?;
    }
    m.finish()?;
    print!("{text}");
    Ok(())
}

pub fn doe(a: &DoeArgs) -> Result<()> {
    let mut m = start("doe", &a.output, Some(a.seed))?;
    m.option("model", a.model.display());
    m.option("constraints", a.constraints.display());
    let model = load_config(&m.read_input_text(&a.model)?)
        .with_context(|| format!("{}", a.model.display()))?
        .model;
    let setup = parse_doe(&m.read_input_text(&a.constraints)?, &model)
        .with_context(|| format!("{}", a.constraints.display()))?;
    let opt = optimize_plan(
        &model,
        &setup.layout,
        &setup.test,
        &setup.constraints,
        setup.per_bucket,
        a.seed,
        &setup.search,
    )?;
    let noise = NoiseModel::new(setup.sigma)?;
    let acc = test_pose_accuracy(&opt.plan, &model, &setup.layout, &setup.test, &noise)?;

    let mut text = String::from("Calibration plan\n\n");
    writeln!(text, "entries: {}, buckets: {}", opt.plan.entries.len(), setup.layout.buckets().len().max(1))?;
    writeln!(text, "score rho0^2/sigma^2: {:.6e}", acc.score)?;
    writeln!(text, "rho0 at sigma = {} mm: {:.6} mm", setup.sigma, acc.rms)?;
    for (b, v) in acc.per_bucket.iter().enumerate() {
        writeln!(text, "  bucket {}: {:.6e} mm^2", b, v)?;
    }
    let finite: Vec<f64> = opt.start_scores.iter().copied().filter(|s| s.is_finite()).collect();
    let best_random = finite.iter().copied().fold(f64::INFINITY, f64::min);
    writeln!(text, "best random start score: {best_random:.6e}")?;
    writeln!(text, "winning start: {} of {}", opt.best_start, opt.start_scores.len())?;
    if !acc.compensator_identifiable {
        writeln!(text, "warning: fewer than 3 q2 buckets; compensator parameters not identifiable")?;
    }
    if let Some(d) = &opt.diagnostic {
        writeln!(text, "note: {d}")?;
    }
    let mut csv = Vec::new();
    write_plan_csv(&opt.plan, &mut csv)?;
    m.write_output("plan.csv", &csv)?;
    m.write_output("doe_report.txt", text.as_bytes())?;
    m.finish()?;
    print!("{text}");
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut m = start("simulate", &a.output, Some(a.seed))?;
    m.option("kind", format!("{:?}", a.kind).to_lowercase());
    m.option("model", a.model.display());
    m.option("sigma_mm", a.sigma_mm);
    let config = load_config(&m.read_input_text(&a.model)?).with_context(|| format!("{}", a.model.display()))?;
    let compensator = config
        .compensator
        .ok_or_else(|| anyhow!("{}: ground truth needs a [compensator] block", a.model.display()))?;
    let truth = GroundTruth::new(config.model, compensator, a.sigma_mm, a.seed)?;
    match a.kind {
        SimKind::Geometry => {
            m.option("q2_deg", format!("{:?}", a.q2_deg));
            let data = simulate_geometry_dataset(&truth, &a.q2_deg, &GeometryCell::standard())?;
            let mut out = Vec::new();
            write_marker_csv(&data, &mut out)?;
            m.write_output("markers.csv", &out)?;
        }
        SimKind::Deflection => {
            let path = a
                .plan
                .as_ref()
                .ok_or_else(|| anyhow!("--plan is required for --kind deflection"))?;
            m.option("plan", path.display());
            m.option("repeats", a.repeats);
            m.option("linear", a.linear);
            m.option("gravity", !a.no_gravity);
            let bytes = m.read_input(path)?;
            let plan = read_plan_csv(bytes.as_slice()).with_context(|| format!("{}", path.display()))?;
            let records = if a.linear {
                simulate_linear_records(&truth, &plan.entries, a.repeats)?
            } else {
                simulate_deflection_records(&truth, &plan.entries, a.repeats, &equilibrium_options(a.no_gravity))?
            };
            let mut out = Vec::new();
            write_records_csv(&records, &mut out)?;
            m.write_output("records.csv", &out)?;
        }
    }
    m.finish()
}

fn equilibrium_options(no_gravity: bool) -> EquilibriumOptions {
    if no_gravity {
        EquilibriumOptions::without_gravity()
    } else {
        EquilibriumOptions::default()
    }
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let mut m = start("predict", &a.output, None)?;
    m.option("model", a.model.display());
    m.option("gravity", !a.no_gravity);
    let config = load_config(&m.read_input_text(&a.model)?).with_context(|| format!("{}", a.model.display()))?;
    let plan = match (&a.loads, &a.q_deg, &a.wrench) {
        (Some(path), _, _) => {
            m.option("loads", path.display());
            let bytes = m.read_input(path)?;
            read_plan_csv(bytes.as_slice()).with_context(|| format!("{}", path.display()))?
        }
        (None, Some(q), Some(w)) => {
            if q.len() != 6 || w.len() != 6 {
                return Err(anyhow!("--q-deg and --wrench take exactly 6 comma-separated values"));
            }
            m.option("q_deg", format!("{q:?}"));
            m.option("wrench", format!("{w:?}"));
            CalibrationPlan::new(vec![PlanEntry {
                q: Joints::from_iterator(q.iter().map(|v| v.to_radians())),
                wrench: Wrench::from_column_slice(w),
                bucket: 0,
            }])
        }
        _ => return Err(anyhow!("give either --loads or both --q-deg and --wrench")),
    };
    let options = equilibrium_options(a.no_gravity);
    let comp = config.compensator.as_ref();
    let mut deflections = String::from(
        "case,q1_deg,q2_deg,q3_deg,q4_deg,q5_deg,q6_deg,Fx_N,Fy_N,Fz_N,Mx_Nmm,My_Nmm,Mz_Nmm,\
         dx_mm,dy_mm,dz_mm,rx_rad,ry_rad,rz_rad\n",
    );
    let mut stiffness = String::from("case,row,c1,c2,c3,c4,c5,c6\n");
    for (i, e) in plan.entries.iter().enumerate() {
        let case = i + 1;
        let solve = |w: Wrench| {
            solve_equilibrium(&config.model, comp, &e.q, ToolLoading::Wrench(w), &options)
                .and_then(|s| s.into_converged())
                .with_context(|| format!("case {case}"))
        };
        let before = solve(Wrench::zeros())?;
        let after = solve(e.wrench)?;
        let d = pose_error(&after.pose, &before.pose);
        let kc = cartesian_stiffness(&config.model, comp, &after).with_context(|| format!("case {case}"))?;
        write!(deflections, "{case}")?;
        for v in e.q.iter() {
            write!(deflections, ",{:.4}", v.to_degrees())?;
        }
        for v in e.wrench.iter() {
            write!(deflections, ",{v:.3}")?;
        }
        for v in d.iter() {
            write!(deflections, ",{v:.9e}")?;
        }
        deflections.push('\n');
        for r in 0..6 {
            write!(stiffness, "{case},{}", r + 1)?;
            for c in 0..6 {
                write!(stiffness, ",{:.9e}", kc.0[(r, c)])?;
            }
            stiffness.push('\n');
        }
    }
    m.write_output("prediction.csv", deflections.as_bytes())?;
    m.write_output("cartesian_stiffness.csv", stiffness.as_bytes())?;
    m.finish()?;
    print!("{deflections}");
    Ok(())
}

pub fn eta_curve(a: &EtaCurveArgs) -> Result<()> {
    let mut m = start("eta-curve", &a.output, None)?;
    m.option("s0_mm", format!("{:?}", a.s0_mm));
    m.option("q2_from_deg", a.q2_from_deg);
    m.option("q2_to_deg", a.q2_to_deg);
    m.option("points", a.points);
    let geometry = match (&a.model, &a.geometry) {
        (_, Some(path)) => {
            m.option("geometry", path.display());
            read_geometry_file(&mut m, path)?
        }
        (Some(path), None) => {
            m.option("model", path.display());
            load_config(&m.read_input_text(path)?)
                .with_context(|| format!("{}", path.display()))?
                .compensator
                .ok_or_else(|| anyhow!("{}: no [compensator] block", path.display()))?
                .geometry
        }
        (None, None) => return Err(anyhow!("give --model or --geometry")),
    };
    let grid: Vec<f64> = linspace(a.q2_from_deg, a.q2_to_deg, a.points)
        .iter()
        .map(|d| d.to_radians())
        .collect();
    let samples = tabulate_eta(&geometry, &a.s0_mm, &grid)?;
    let csv = long_csv(
        samples
            .iter()
            .map(|s| (s.q2.to_degrees(), format!("s0={}", s.s0), s.eta)),
    );
    m.write_output("eta_curve.csv", csv.as_bytes())?;
    m.finish()
}
