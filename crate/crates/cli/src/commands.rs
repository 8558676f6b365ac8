use std::path::{Path, PathBuf};

use rand::Rng;
use serde_json::{json, Value};
use starwalk::ballwalk::{mixing_plan, plan_for_body, sample_uniform, MixingPlan, SampleRun, WarmStart};
use starwalk::constructions::density_table;
use starwalk::diagnostics::{
    coupling_overlap, iso1_check, iso2_check, partition_conductance, random_slabs, s_r_fraction, var_mixture_identity,
};
use starwalk::geometry::{CountingBody, KernelView, SharedBody};
use starwalk::hardness::{make_clique_body, Graph};
use starwalk::isotropy::{estimate_moments, round_kernel};
use starwalk::rng::{purpose, stream, unit_direction};
use starwalk::spec::one_of_two_squares;
use starwalk::thinpart::{thin_decompose, Cell, StarPolygon, Vertex};
use starwalk::volume::{body_volume, estimate_eta};
use starwalk::{BodySpec, Error, StarBody, VERSION};

use crate::output::{parse_json, read_input, sidecar_path, write_csv, write_json, CliError, CliResult};
use crate::{
    Check, Command, ConstructArgs, Construction, DecomposeArgs, DiagnoseArgs, ReduceCliqueArgs, RoundArgs, SampleArgs,
    VolumeArgs,
};

pub struct Context {
    pub seed: u64,
    pub meta: Option<PathBuf>,
}

pub fn run(ctx: &Context, command: Command) -> CliResult<()> {
    match command {
        Command::Sample(a) => sample(ctx, a),
        Command::Volume(a) => volume(ctx, a),
        Command::Diagnose(a) => diagnose(ctx, a),
        Command::Construct(a) => construct(ctx, a),
        Command::Decompose(a) => decompose(ctx, a),
        Command::Round(a) => round(ctx, a),
        Command::ReduceClique(a) => reduce_clique(ctx, a),
    }
}

type Counted = CountingBody<SharedBody>;

fn load_body(path: &Path) -> CliResult<(BodySpec, Counted)> {
    let spec = BodySpec::from_json(&read_input(path)?)?;
    let body = spec.build().map_err(|e| CliError::spec(format!("{}: {e}", path.display())))?;
    Ok((spec, CountingBody::new(body)))
}

fn oracle_calls(body: &Counted) -> Value {
    json!({ "membership": body.membership_calls(), "kernel": body.kernel_calls() })
}

fn write_meta(ctx: &Context, out: Option<&Path>, command: &str, mut fields: Value) -> CliResult<()> {
    let Some(path) = sidecar_path(ctx.meta.as_deref(), out) else {
        return Ok(());
    };
    let obj = fields.as_object_mut().expect("metadata is an object");
    obj.insert("command".into(), json!(command));
    obj.insert("version".into(), json!(VERSION));
    obj.insert("seed".into(), json!(ctx.seed));
    write_json(Some(&path), &fields)
}

fn check_eps(eps: f64) -> CliResult<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--eps {eps} must lie in (0, 1)")))
    }
}

const ETA_PILOT: usize = 500;
const THEORY_STEP_BUDGET: f64 = 1e10;

/// Practical plan plus the theoretical plan for the given (or estimated) η.
fn plan<B: StarBody>(
    body: &B,
    eta: Option<f64>,
    eps: f64,
    seed: u64,
) -> CliResult<(MixingPlan, WarmStart, f64, &'static str)> {
    let (practical, warm) = plan_for_body(body, 1.0, eps, seed)?;
    let (eta, source) = match eta {
        Some(e) if e > 0.0 && e <= 1.0 => (e, "given"),
        Some(e) => return Err(CliError::usage(format!("--eta {e} must lie in (0, 1]"))),
        None => {
            let pilot = sample_uniform(body, ETA_PILOT, &practical, &warm, seed ^ (purpose::ETA << 24))?;
            (estimate_eta(body, &pilot.points)?.0, "pilot")
        }
    };
    let mut plan = mixing_plan(body.dimension(), body.diameter_bound(), 1.0 / eta, eta, eps)?;
    plan.practical = practical.practical;
    Ok((plan, warm, eta, source))
}

fn header(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn run_summary(run: &SampleRun) -> Value {
    json!({
        "delta": run.delta,
        "steps": run.steps,
        "proposals": run.proposals,
        "accepts": run.accepts,
        "acceptance_rate": run.acceptance_rate,
        "warm_start": run.warm_start,
    })
}

fn sample(ctx: &Context, a: SampleArgs) -> CliResult<()> {
    check_eps(a.eps)?;
    if a.count == 0 {
        return Err(CliError::usage("--count must be at least 1".into()));
    }
    let (spec, body) = load_body(&a.body)?;
    let (mut plan, warm, eta, eta_source) = plan(&body, a.eta, a.eps, ctx.seed)?;
    if a.theoretical_m {
        plan.practical = None;
        if plan.m * a.count as f64 > THEORY_STEP_BUDGET {
            return Err(Error::TooLarge(format!(
                "theoretical m = {:.3e} steps per sample exceeds the budget of {THEORY_STEP_BUDGET:.0e} total steps",
                plan.m
            ))
            .into());
        }
    }
    let run = sample_uniform(&body, a.count, &plan, &warm, ctx.seed)?;
    write_csv(a.out.as_deref(), &header(body.dimension()), &run.points)?;
    write_meta(
        ctx,
        a.out.as_deref(),
        "sample",
        json!({
            "parameters": { "count": a.count, "eps": a.eps, "eta": eta, "eta_source": eta_source, "theoretical_m": a.theoretical_m },
            "body": spec,
            "plan": plan,
            "run": run_summary(&run),
            "oracle_calls": oracle_calls(&body),
        }),
    )
}

fn volume(ctx: &Context, a: VolumeArgs) -> CliResult<()> {
    check_eps(a.eps)?;
    let (spec, body) = load_body(&a.body)?;
    let v = body_volume(&body, a.eps, ctx.seed)?;
    let report = json!({
        "volume": v.volume,
        "ci_low": v.ci_low,
        "ci_high": v.ci_high,
        "eta_hat": v.eta_hat,
        "eta_se": v.eta_se,
        "kernel_volume": v.kernel.volume,
        "budgets": {
            "eps": a.eps,
            "samples_per_phase": v.kernel.samples_per_phase,
            "phases": v.kernel.phases.len(),
            "base_radius": v.kernel.base_radius,
            "eta_samples": v.eta_samples,
            "walk_delta": v.walk_delta,
            "walk_steps": v.walk_steps,
        },
        "phases": v.kernel.phases,
        "oracle_calls": oracle_calls(&body),
    });
    write_json(a.out.as_deref(), &report)?;
    write_meta(
        ctx,
        a.out.as_deref(),
        "volume",
        json!({ "parameters": { "eps": a.eps }, "body": spec, "oracle_calls": oracle_calls(&body) }),
    )
}

fn draw<B: StarBody>(body: &B, count: usize, seed: u64) -> CliResult<SampleRun> {
    let (plan, warm) = plan_for_body(body, 1.0, 0.1, seed)?;
    Ok(sample_uniform(body, count, &plan, &warm, seed)?)
}

fn diagnose(ctx: &Context, a: DiagnoseArgs) -> CliResult<()> {
    if a.samples < 100 {
        return Err(CliError::usage("--samples must be at least 100".into()));
    }
    let (spec, body) = load_body(&a.body)?;
    let n = body.dimension();
    let run = draw(&body, a.samples, ctx.seed)?;
    let pts = &run.points;
    let (eta, eta_se) = estimate_eta(&body, pts)?;
    let diameter = body.diameter_bound();
    let slab_seed = ctx.seed ^ purpose::SLABS;
    let report = match a.check {
        Check::Iso1 => {
            let rs = random_slabs(pts, a.slabs, slab_seed)
                .iter()
                .map(|p| iso1_check(eta, diameter, p, pts))
                .collect::<Result<Vec<_>, _>>()?;
            let min_ratio = rs.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
            json!({ "check": "iso1", "all_hold": rs.iter().all(|r| !r.violated), "min_ratio": min_ratio, "slabs": rs })
        }
        Check::Iso2 => {
            let m_s = estimate_moments(pts)?.mean_squared_distance();
            let rs = random_slabs(pts, a.slabs, slab_seed)
                .iter()
                .map(|p| iso2_check(eta, m_s, p, pts))
                .collect::<Result<Vec<_>, _>>()?;
            json!({ "check": "iso2", "mean_sq_distance": m_s, "all_hold": rs.iter().all(|r| r.disjunction_holds), "slabs": rs })
        }
        Check::Localcond => {
            let kernel = KernelView(&body);
            let kernel_run = draw(&kernel, a.samples, ctx.seed ^ purpose::WARM_START)?;
            let rep = s_r_fraction(&body, a.r, pts, &kernel_run.points, a.trials, ctx.seed ^ purpose::DIAGNOSTIC);
            let ok = rep.body.mean_ok() && rep.body.s_r_ok() && rep.kernel.mean_ok() && rep.kernel.s_r_ok();
            json!({ "check": "localcond", "all_hold": ok, "report": rep })
        }
        Check::Coupling => {
            if n != 2 {
                return Err(CliError::usage("coupling check needs a planar body".into()));
            }
            let mut rng = stream(ctx.seed, purpose::DIAGNOSTIC, 1);
            let mut reports = Vec::with_capacity(a.slabs);
            while reports.len() < a.slabs {
                let u = &pts[rng.random_range(0..pts.len())];
                let r = diameter * rng.random_range(0.02..0.1);
                let t: f64 = rng.random_range(0.05..1.0);
                let dir = unit_direction(&mut rng, 2);
                let v = [u[0] + dir[0] * t * r / 2f64.sqrt(), u[1] + dir[1] * t * r / 2f64.sqrt()];
                if !body.contains(&v) {
                    continue;
                }
                reports.push(coupling_overlap(&body, u, &v, r, 400)?);
            }
            json!({ "check": "coupling", "all_hold": reports.iter().all(|r| r.holds), "pairs": reports })
        }
        Check::Conductance => {
            let s = 1.0 / 16.0;
            let r = s / (4.0 * (n as f64).sqrt());
            let rs = random_slabs(pts, a.slabs, slab_seed)
                .iter()
                .enumerate()
                .map(|(i, p)| partition_conductance(&body, &p.normal, p.t1, r, pts, s, eta, ctx.seed ^ i as u64))
                .collect::<Result<Vec<_>, _>>()?;
            let min_margin = rs.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
            json!({ "check": "conductance", "r": r, "s": s, "all_hold": rs.iter().all(|c| c.holds), "min_margin": min_margin, "partitions": rs })
        }
        Check::Varmix => {
            let half = pts.len() / 2;
            let (mixture, rest) = pts.split_at(half);
            let mut rows = Vec::new();
            for p in random_slabs(rest, a.slabs, slab_seed) {
                let (lo, hi): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rest
                    .iter()
                    .cloned()
                    .partition(|x| x.iter().zip(&p.normal).map(|(a, b)| a * b).sum::<f64>() <= p.t1);
                if lo.len() < 2 || hi.len() < 2 {
                    continue;
                }
                let w = lo.len() as f64 / rest.len() as f64;
                rows.push(var_mixture_identity(&[(w, lo), (1.0 - w, hi)], mixture)?);
            }
            json!({ "check": "varmix", "all_hold": rows.iter().all(|r| r.z.abs() <= 4.0), "splits": rows })
        }
    };
    let mut report = report;
    let obj = report.as_object_mut().expect("report is an object");
    obj.insert("eta_hat".into(), json!(eta));
    obj.insert("eta_se".into(), json!(eta_se));
    obj.insert("diameter".into(), json!(diameter));
    obj.insert("sampling".into(), run_summary(&run));
    write_json(a.out.as_deref(), &report)?;
    write_meta(
        ctx,
        a.out.as_deref(),
        "diagnose",
        json!({
            "parameters": { "check": format!("{:?}", a.check).to_lowercase(), "samples": a.samples, "slabs": a.slabs, "r": a.r, "trials": a.trials },
            "body": spec,
            "oracle_calls": oracle_calls(&body),
        }),
    )
}

fn construct(ctx: &Context, a: ConstructArgs) -> CliResult<()> {
    let spec = match a.kind {
        Construction::GluedCones => BodySpec::GluedCones { n: a.n, eta: a.eta, axis_scale: a.axis_scale },
        Construction::Ball => BodySpec::Ball { n: a.n, radius: a.radius },
        Construction::Cube => BodySpec::Cube { n: a.n, half_width: a.radius },
        Construction::OneOfTwoSquares => one_of_two_squares(),
    };
    spec.build().map_err(|e| CliError::spec(e.to_string()))?;
    if let Some(table) = &a.table {
        if a.kind != Construction::GluedCones {
            return Err(CliError::usage("--table is only available for glued cones".into()));
        }
        let rows: Vec<Vec<f64>> = density_table(a.n, a.eta, a.points)?.iter().map(|r| r.to_vec()).collect();
        let head = ["x", "f_n", "f_n_kernel", "f_eta", "f_eta_kernel"].map(String::from);
        write_csv(Some(table), &head, &rows)?;
    }
    write_json(a.out.as_deref(), &spec)?;
    write_meta(
        ctx,
        a.out.as_deref(),
        "construct",
        json!({ "parameters": { "type": spec.kind(), "table": a.table, "points": a.points }, "body": spec }),
    )
}

fn decompose(ctx: &Context, a: DecomposeArgs) -> CliResult<()> {
    let vertices: Vec<Vertex> = parse_json(&a.region)?;
    let region = StarPolygon::new(vertices)?;
    let s1: Vec<Cell> = parse_json(&a.s1)?;
    let s2: Vec<Cell> = parse_json(&a.s2)?;
    let dec = thin_decompose(&region, &s1, &s2, a.eps)?;
    write_json(a.out.as_deref(), &dec)?;
    write_meta(
        ctx,
        a.out.as_deref(),
        "decompose",
        json!({
            "parameters": { "eps": a.eps, "region": a.region, "s1": a.s1, "s2": a.s2 },
            "pieces": dec.pieces.len(),
            "cuts": dec.cuts.len(),
            "worst_balance": dec.worst_balance(),
        }),
    )
}

fn round(ctx: &Context, a: RoundArgs) -> CliResult<()> {
    if a.samples < 2 {
        return Err(CliError::usage("--samples must be at least 2".into()));
    }
    let (spec, body) = load_body(&a.body)?;
    let rounding = round_kernel(&body, a.samples, ctx.seed)?;
    let rounded =
        BodySpec::Affine { body: Box::new(spec.clone()), matrix: rounding.map.clone(), shift: rounding.shift.clone() };
    rounded.build()?;
    write_json(a.out.as_deref(), &rounded)?;
    let report_path = a.report.clone().or_else(|| {
        a.out.as_ref().map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".report.json");
            PathBuf::from(s)
        })
    });
    if let Some(p) = &report_path {
        write_json(Some(p), &rounding)?;
    }
    write_meta(
        ctx,
        a.out.as_deref(),
        "round",
        json!({ "parameters": { "samples": a.samples }, "body": spec, "report": report_path, "moments": rounding.moments, "oracle_calls": oracle_calls(&body) }),
    )
}

fn reduce_clique(ctx: &Context, a: ReduceCliqueArgs) -> CliResult<()> {
    let graph: Graph = read_input(&a.graph)?.parse()?;
    let body = make_clique_body(graph.clone(), a.k, a.a)?;
    let spec = BodySpec::CliqueReduction { graph, k: a.k, a: a.a };
    write_json(a.out.as_deref(), &spec)?;
    write_meta(
        ctx,
        a.out.as_deref(),
        "reduce-clique",
        json!({
            "parameters": { "graph": a.graph, "k": a.k, "a": body.a() },
            "vertices": body.graph().vertex_count(),
            "edges": body.graph().edges().len(),
            "block_threshold": body.block_threshold(),
        }),
    )
}
