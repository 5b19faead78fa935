use std::fs;
use std::path::{Path, PathBuf};

use hedgefront::learning::{run_experiment, Band, CurveRow, ExperimentConfig, LearnerBox, RegressionTask, Scale};
use hedgefront::probe::{default_t_nodes, probe_record, recover_path, BlackBox, ExternalBox, SolverBox};
use hedgefront::{
    effective_loss_grid, f_mutual_information, geometric_grid, indifference_residual, optimal_perturbation, project,
    solve_f, tail_bound, trace, Channel, DiscreteProblem, Generator, SolveConfig, TailQuery, Table,
};
use serde_json::{json, Value};

use crate::output::{num, OutDir};
use crate::{CliError, GenArgs};

pub struct Ctx {
    pub out: PathBuf,
    pub seed: u64,
}

pub struct ProbeArgs {
    pub bbox: String,
    pub problem: Option<PathBuf>,
    pub controls: Vec<f64>,
    pub t_nodes: usize,
    pub anchor: Option<f64>,
    pub samples: Option<usize>,
    pub codes: usize,
    pub pilot: usize,
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<DiscreteProblem<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn generator(args: &GenArgs) -> Result<Generator<f64>, CliError> {
    Generator::from_id(&args.generator, args.gamma).map_err(|e| CliError::from_core("--generator", e))
}

fn gen_json(args: &GenArgs) -> Value {
    json!({ "generator": args.generator, "gamma": args.gamma })
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn channel_rows(problem: &DiscreteProblem<f64>, channel: &Channel<f64>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["stimulus".to_string()];
    header.extend(problem.action_names());
    let rows = problem
        .stimulus_names()
        .into_iter()
        .enumerate()
        .map(|(s, name)| {
            let mut r = vec![name];
            r.extend((0..channel.n_actions()).map(|a| num(channel.get(s, a))));
            r
        })
        .collect();
    (header, rows)
}

fn core(context: &str) -> impl Fn(hedgefront::Error) -> CliError + '_ {
    move |e| CliError::from_core(context, e)
}

pub fn solve(ctx: &Ctx, problem: &Path, gen: &GenArgs, beta: f64, tol: f64, max_iters: usize) -> Result<(), CliError> {
    let g = generator(gen)?;
    let p = load_problem(problem)?;
    positive("--beta", beta)?;
    let config = SolveConfig::new(beta).with_tol(tol).with_max_iters(max_iters);
    config.validate().map_err(core("solve"))?;
    let report = solve_f(&g, &p, &config).map_err(core("solve"))?;
    let out = OutDir::create(&ctx.out)?;
    let (header, rows) = channel_rows(&p, &report.channel);
    out.csv("channel.csv", &header, &rows)?;
    out.json("report.json", &report)?;
    let mut cfg = json!({ "problem": p, "beta": beta, "tol": tol, "max_iters": max_iters });
    merge(&mut cfg, gen_json(gen));
    out.manifest("solve", &cfg, ctx.seed)?;
    if !report.converged {
        return Err(CliError::Numeric(format!(
            "solver did not converge in {} iterations (residual {:e})",
            report.iters, report.residual
        )));
    }
    Ok(())
}

pub fn hedge(ctx: &Ctx, problem: &Path, gen: &GenArgs, beta: f64, tol: f64) -> Result<(), CliError> {
    let g = generator(gen)?;
    let p = load_problem(problem)?;
    positive("--beta", beta)?;
    let config = SolveConfig::new(beta).with_tol(tol);
    config.validate().map_err(core("hedge"))?;
    let report = solve_f(&g, &p, &config).map_err(core("solve"))?;
    let channel = &report.channel;
    let table = optimal_perturbation(&g, &p, channel, beta).map_err(core("perturbation"))?;
    let residual = indifference_residual(&p, channel, &table).map_err(core("indifference"))?;
    let loss = hedgefront::expected_loss(&p, channel).map_err(core("loss"))?;
    let info = f_mutual_information(&g, &p, channel).map_err(core("information"))?.to_float();
    let cert = hedgefront::certificate(&g, &p, channel, beta).map_err(core("certificate"))?;

    let out = OutDir::create(&ctx.out)?;
    let mut header = vec!["stimulus".to_string()];
    header.extend(p.action_names());
    let rows: Vec<Vec<String>> = p
        .stimulus_names()
        .into_iter()
        .enumerate()
        .map(|(s, name)| {
            let mut r = vec![name];
            r.extend((0..p.n_actions()).map(|a| num(table.values.get(s, a).to_float())));
            r
        })
        .collect();
    out.csv("perturbation.csv", &header, &rows)?;
    let direct = loss + info / beta;
    out.json(
        "certificate.json",
        &json!({
            "beta": beta,
            "loss": loss,
            "info": info,
            "certificate": cert,
            "loss_plus_info_over_beta": direct,
            "identity_residual": (cert - direct).abs(),
            "penalty": table.penalty.to_float(),
            "unused_actions": table.unused_actions,
            "converged": report.converged,
        }),
    )?;
    out.json(
        "residual.json",
        &json!({
            "residual": residual.residual(),
            "worst_on_support": residual.worst_on_support(),
            "worst_off_support": residual.worst_off_support(),
            "report": residual,
        }),
    )?;
    let mut cfg = json!({ "problem": p, "beta": beta, "tol": tol });
    merge(&mut cfg, gen_json(gen));
    out.manifest("hedge", &cfg, ctx.seed)?;
    if !report.converged {
        return Err(CliError::Numeric(format!("solver did not converge (residual {:e})", report.residual)));
    }
    Ok(())
}

pub fn hedge_grid(ctx: &Ctx, problem: &Path, gen: &GenArgs, beta: (f64, f64, usize), adv: (f64, f64, usize)) -> Result<(), CliError> {
    let g = generator(gen)?;
    let p = load_problem(problem)?;
    let betas = geometric_grid(beta.0, beta.1, beta.2).map_err(core("beta grid"))?;
    let advs = geometric_grid(adv.0, adv.1, adv.2).map_err(core("adversary grid"))?;
    let grid = effective_loss_grid(&g, &p, &betas, &advs, &SolveConfig::new(betas[0])).map_err(core("hedge grid"))?;
    let out = OutDir::create(&ctx.out)?;
    let mut header = vec!["beta".to_string()];
    header.extend(advs.iter().map(|b| format!("adv_{}", num(*b))));
    let rows: Vec<Vec<String>> = betas
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let mut r = vec![num(b)];
            r.extend((0..advs.len()).map(|j| num(grid.get(i, j))));
            r
        })
        .collect();
    out.csv("grid.csv", &header, &rows)?;
    let mut cfg = json!({
        "problem": p,
        "beta_min": beta.0, "beta_max": beta.1, "points": beta.2,
        "adv_min": adv.0, "adv_max": adv.1, "adv_points": adv.2,
    });
    merge(&mut cfg, gen_json(gen));
    out.manifest("hedge-grid", &cfg, ctx.seed)
}

pub fn frontier(
    ctx: &Ctx,
    problem: &Path,
    gen: &GenArgs,
    beta_min: f64,
    beta_max: f64,
    points: usize,
    projections: &[String],
) -> Result<(), CliError> {
    let g = generator(gen)?;
    let p = load_problem(problem)?;
    let refs = projections
        .iter()
        .map(|id| Generator::from_id(id, gen.gamma).map_err(|e| CliError::from_core("--project", e)))
        .collect::<Result<Vec<_>, _>>()?;
    let betas = geometric_grid(beta_min, beta_max, points).map_err(core("beta grid"))?;
    let mut curve = trace(&g, &p, &betas, &SolveConfig::new(betas[0]), !refs.is_empty()).map_err(core("frontier"))?;
    for r in &refs {
        curve = project(&curve, &p, r).map_err(core("projection"))?;
    }

    let out = OutDir::create(&ctx.out)?;
    let mut header: Vec<String> = ["beta", "I_native", "L", "L_adv", "converged"].map(String::from).to_vec();
    header.extend(refs.iter().map(|r| format!("I_projected_{}", r.id())));
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|pt| {
            let mut r = vec![num(pt.beta), num(pt.info_native), num(pt.loss), num(pt.certificate), pt.converged.to_string()];
            // an infinite reference divergence is written as inf
            r.extend(refs.iter().map(|g| num(pt.info_projected.get(g.id()).copied().flatten().unwrap_or(f64::INFINITY))));
            r
        })
        .collect();
    out.csv("curve.csv", &header, &rows)?;
    out.json("curve.json", &curve)?;
    let mut cfg = json!({
        "problem": p,
        "beta_min": beta_min, "beta_max": beta_max, "points": points,
        "project": projections,
    });
    merge(&mut cfg, gen_json(gen));
    out.manifest("frontier", &cfg, ctx.seed)?;
    if !curve.failures.is_empty() {
        let (b, e) = &curve.failures[0];
        return Err(CliError::Numeric(format!("{} grid points failed; first at beta {b}: {e}", curve.failures.len())));
    }
    Ok(())
}

pub fn tails(ctx: &Ctx, gen: &GenArgs, beta: f64, u: f64, phi: f64, info: f64) -> Result<(), CliError> {
    let g = generator(gen)?;
    let query = TailQuery { gen: g, u, info, phi, beta };
    let bound = tail_bound(&query, None).map_err(core("tails"))?;
    let value = json!({ "q_bar": bound.q_bar, "delta": bound.delta });
    println!("{value}");
    let out = OutDir::create(&ctx.out)?;
    out.json("tails.json", &value)?;
    let mut cfg = json!({ "beta": beta, "u": u, "phi": phi, "info": info });
    merge(&mut cfg, gen_json(gen));
    out.manifest("tails", &cfg, ctx.seed)
}

enum BoxKind {
    Solver(String),
    Learner(String),
    External(Vec<String>),
}

fn parse_box(spec: &str) -> Result<BoxKind, CliError> {
    if let Some(id) = spec.strip_prefix("builtin:") {
        match id {
            "kernel_ridge" | "mlp" => Ok(BoxKind::Learner(id.into())),
            _ => Ok(BoxKind::Solver(id.into())),
        }
    } else if let Some(cmd) = spec.strip_prefix("external:") {
        let parts: Vec<String> = cmd.split_whitespace().map(String::from).collect();
        if parts.is_empty() {
            return Err(CliError::Config("external box needs a command".into()));
        }
        Ok(BoxKind::External(parts))
    } else {
        Err(CliError::Config(format!(
            "unknown box `{spec}`; use builtin:<generator id>, builtin:kernel_ridge, builtin:mlp or external:<command>"
        )))
    }
}

pub fn probe(ctx: &Ctx, args: &ProbeArgs) -> Result<(), CliError> {
    if args.controls.len() < 2 {
        return Err(CliError::Config("--controls needs at least two values".into()));
    }
    if args.t_nodes < 2 {
        return Err(CliError::Config("--t-nodes must be at least 2".into()));
    }
    let ts = default_t_nodes(args.t_nodes);
    let need_problem = || {
        args.problem
            .as_deref()
            .ok_or_else(|| CliError::Config("--problem is required for this box".into()))
            .and_then(load_problem)
    };
    let (bb, loss, default_anchor, problem_json): (Box<dyn BlackBox>, Table<f64>, f64, Value) = match parse_box(&args.bbox)? {
        BoxKind::Solver(id) => {
            let g = Generator::from_id(&id, None).map_err(|e| CliError::from_core("--box", e))?;
            let p = need_problem()?;
            let mut b = SolverBox::new(g, p.clone()).map_err(core("--box"))?;
            if let Some(n) = args.samples {
                b = b.with_samples(n);
            }
            let anchor = *args.controls.last().unwrap();
            (Box::new(b), p.loss().clone(), anchor, serde_json::to_value(&p).unwrap_or(Value::Null))
        }
        BoxKind::Learner(name) => {
            let learner = ExperimentConfig::for_scale(Scale::Desk)
                .learners
                .into_iter()
                .find(|l| l.name() == name)
                .ok_or_else(|| CliError::Config(format!("no default settings for learner {name}")))?;
            let b = LearnerBox::new(
                learner,
                RegressionTask::default(),
                args.samples.unwrap_or(50),
                args.pilot,
                args.codes,
                &args.controls,
                &ts,
                ctx.seed,
            )
            .map_err(core("learner box"))?;
            let loss = b.reference_loss().clone();
            (Box::new(b), loss, 1.0, Value::Null)
        }
        BoxKind::External(cmd) => {
            let p = need_problem()?;
            let b = ExternalBox::spawn(&cmd[0], &cmd[1..], p.prior().to_vec(), p.n_actions()).map_err(core("external box"))?;
            (Box::new(b), p.loss().clone(), 1.0, serde_json::to_value(&p).unwrap_or(Value::Null))
        }
    };
    let anchor = args.anchor.unwrap_or(default_anchor);
    positive("--anchor", anchor)?;
    let records = args
        .controls
        .iter()
        .enumerate()
        .map(|(i, &c)| probe_record(bb.as_ref(), &loss, c, &ts, hedgefront::seed::derive(ctx.seed, &[i as u64])))
        .collect::<Result<Vec<_>, _>>()
        .map_err(core("probe"))?;
    let path = recover_path(&records, anchor).map_err(core("path recovery"))?;

    let out = OutDir::create(&ctx.out)?;
    let header = ["control", "L", "L_adv", "gap", "beta_hat", "I_native"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = path
        .iter()
        .map(|r| vec![num(r.control), num(r.loss_hat), num(r.certificate_hat), num(r.gap()), num(r.beta_hat), num(r.info_hat)])
        .collect();
    out.csv("probe.csv", &header, &rows)?;
    out.json("probe.json", &path)?;
    let cfg = json!({
        "box": args.bbox,
        "problem": problem_json,
        "controls": args.controls,
        "t_nodes": args.t_nodes,
        "anchor": anchor,
        "samples": args.samples,
        "codes": args.codes,
        "pilot": args.pilot,
    });
    out.manifest("probe", &cfg, ctx.seed)
}

/// Top-level keys of `overlay` replace those of `base`; nested objects merge.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn parse_scale(s: &str) -> Result<Scale, CliError> {
    serde_json::from_value(Value::String(s.into()))
        .map_err(|_| CliError::Config(format!("unknown scale `{s}`; valid scales: desk, paper")))
}

fn band_cells(b: &Band) -> [String; 4] {
    [num(b.p05), num(b.p10), num(b.p90), num(b.p95)]
}

fn curve_csv(out: &OutDir, curves: &[CurveRow]) -> Result<(), CliError> {
    let mut header: Vec<String> = ["learner", "control", "beta_hat", "I_native", "I_shannon_per_n", "L", "L_adv"]
        .map(String::from)
        .to_vec();
    for q in ["beta_hat", "I_native", "I_shannon_per_n", "L", "L_adv"] {
        for p in ["p05", "p10", "p90", "p95"] {
            header.push(format!("{q}_{p}"));
        }
    }
    let rows: Vec<Vec<String>> = curves
        .iter()
        .map(|c| {
            let mut r = vec![
                c.learner.clone(),
                num(c.control),
                num(c.beta_hat),
                num(c.i_native),
                num(c.i_shannon_per_n),
                num(c.loss),
                num(c.certificate),
            ];
            for b in [&c.beta_band, &c.native_band, &c.shannon_band, &c.loss_band, &c.certificate_band] {
                r.extend(band_cells(b));
            }
            r
        })
        .collect();
    out.csv("curves.csv", &header, &rows)
}

pub fn experiment(ctx: &Ctx, config: Option<&Path>, scale: &str, seed: Option<u64>) -> Result<(), CliError> {
    let file = config.map(read_json).transpose()?;
    let scale = parse_scale(scale)?;
    let mut value = serde_json::to_value(ExperimentConfig::for_scale(scale)).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(f) = file {
        if !f.is_object() {
            return Err(CliError::Config("experiment config must be a JSON object".into()));
        }
        // a file that names its own scale starts from that scale's defaults
        if let Some(s) = f.get("scale").and_then(Value::as_str) {
            value = serde_json::to_value(ExperimentConfig::for_scale(parse_scale(s)?)).map_err(|e| CliError::Config(e.to_string()))?;
        }
        merge(&mut value, f);
    }
    if let Some(s) = seed {
        value["seed"] = json!(s);
    }
    let cfg: ExperimentConfig = serde_json::from_value(value.clone()).map_err(|e| CliError::Config(format!("experiment config: {e}")))?;
    cfg.validate().map_err(core("experiment config"))?;

    let out = OutDir::create(&ctx.out)?;
    out.manifest("experiment", &value, cfg.seed)?;
    match run_experiment(&cfg) {
        Ok(report) => {
            curve_csv(&out, &report.curves)?;
            out.json("report.json", &report)
        }
        Err(failure) => {
            curve_csv(&out, &failure.partial.curves)?;
            out.json(
                "report.json",
                &json!({ "failed_stage": failure.stage, "error": failure.error.to_string(), "partial": failure.partial }),
            )?;
            Err(CliError::Numeric(failure.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_replaces_and_descends() {
        let mut a = json!({ "x": 1, "o": { "p": 1, "q": 2 }, "l": [1, 2] });
        merge(&mut a, json!({ "o": { "q": 3 }, "l": [9], "y": true }));
        assert_eq!(a, json!({ "x": 1, "o": { "p": 1, "q": 3 }, "l": [9], "y": true }));
    }

    #[test]
    fn unknown_box_is_a_config_error() {
        assert!(matches!(parse_box("nope"), Err(CliError::Config(_))));
        assert!(matches!(parse_box("external:"), Err(CliError::Config(_))));
    }
}
