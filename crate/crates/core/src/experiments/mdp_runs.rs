use super::config::ExperimentConfig;
use super::ntk_runs::ok_outputs;
use super::output::{Check, SeedOutput, SeedRecord, Table};
use crate::error::{Error, Result};
use crate::mdp::{
    fqi, generate_gridworld, noisy_target_experiment, q_dataset, q_iteration, supervised_qfit, Cell, GridWorld,
    StateEncoding, TabularQ, DEFAULT_TOL, NUM_ACTIONS,
};
use crate::nets::{fit_regression_with, mse_loss, resolve_matches, NetKind, NetSpec};
use crate::numerics::{Matrix, RngStream};

struct World {
    gw: GridWorld,
    qstar: TabularQ,
    enc: StateEncoding,
    specs: Vec<NetSpec>,
}

fn world(cfg: &ExperimentConfig, root: &RngStream, seed: u64) -> Result<World> {
    let env = &cfg.env;
    let mut gw = generate_gridworld(&mut root.substream(0), env.height, env.width, env.lava_frac, env.wall_frac)?;
    gw.slip_prob = env.slip;
    gw.gamma = env.gamma;
    gw.seed = Some(seed);
    let qstar = q_iteration(&gw, DEFAULT_TOL, 1_000_000)?.q;
    let enc = StateEncoding::new(&gw, env.encoding, &mut root.substream(1))?;
    let specs = resolve_matches(&cfg.nets, enc.dim(), NUM_ACTIONS)?;
    Ok(World { gw, qstar, enc, specs })
}

fn label_of(cfg: &ExperimentConfig, kind: NetKind) -> String {
    cfg.net(kind).map(|n| n.label.clone()).unwrap_or_default()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-seed values of metric `name`.
fn per_seed(outs: &[&SeedOutput], name: &str) -> Vec<f64> {
    outs.iter().map(|o| o.metric(name).unwrap_or(f64::NAN)).collect()
}

pub(crate) fn needs_lff_and_mlp(cfg: &ExperimentConfig) -> Result<()> {
    cfg.net(NetKind::Lff)?;
    cfg.net(NetKind::Mlp)?;
    Ok(())
}

// ---------------------------------------------------------------- noise-filter

pub(crate) fn noise_filter(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let root = RngStream::new(seed);
    let w = world(cfg, &root, seed)?;
    let fits = noisy_target_experiment(&w.gw, &w.qstar, &w.enc, cfg.env.noise_std, &w.specs, &cfg.fit, &root.substream(2))?;
    let mut out = SeedOutput::default();
    let mut curve = Table::new("curve", &["net", "step", "clean_mse", "noisy_mse"]);
    let mut fin = Table::new("final", &["net", "parameters", "clean_mse", "noisy_mse"]);
    for f in &fits {
        for &(step, c, z) in &f.curve {
            curve.push(vec![f.label.as_str().into(), step.into(), c.into(), z.into()]);
        }
        fin.push(vec![f.label.as_str().into(), f.parameters.into(), f.clean_mse.into(), f.noisy_mse.into()]);
        out.set(format!("{}_clean_mse", f.label), f.clean_mse);
        out.set(format!("{}_noisy_mse", f.label), f.noisy_mse);
        out.set(format!("{}_parameters", f.label), f.parameters as f64);
    }
    out.tables.push(curve);
    out.tables.push(fin);
    Ok(out)
}

pub(crate) fn judge_noise_filter(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    if outs.is_empty() {
        return Vec::new();
    }
    let (lff, mlp) = (label_of(cfg, NetKind::Lff), label_of(cfg, NetKind::Mlp));
    let lff_clean = mean(&per_seed(&outs, &format!("{lff}_clean_mse")));
    let mlp_clean = mean(&per_seed(&outs, &format!("{mlp}_clean_mse")));
    let mlp_noisy = mean(&per_seed(&outs, &format!("{mlp}_noisy_mse")));
    vec![
        Check::assert(
            "LFF filters target noise",
            lff_clean <= 0.5 * mlp_clean,
            format!("mean clean MSE {lff} {lff_clean:.4} vs {mlp} {mlp_clean:.4} (ratio {:.3} <= 0.5)", lff_clean / mlp_clean),
        ),
        Check::assert(
            "MLP fits the noise",
            mlp_noisy < mlp_clean,
            format!("{mlp} noisy MSE {mlp_noisy:.4} < clean MSE {mlp_clean:.4}"),
        ),
    ]
}

// ---------------------------------------------------------- gridworld-underfit

pub(crate) fn gridworld_underfit(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let root = RngStream::new(seed);
    let w = world(cfg, &root, seed)?;
    let mut out = SeedOutput::default();
    let mut curve = Table::new("curve", &["net", "step", "mse"]);
    let mut fin = Table::new("final", &["net", "parameters", "mse"]);
    let mut maps = Vec::new();
    for spec in &w.specs {
        let fit = supervised_qfit(&w.gw, &w.qstar, &w.enc, spec, &cfg.fit, &mut root.substream(2))?;
        for &(step, mse) in &fit.curve {
            curve.push(vec![spec.label.as_str().into(), step.into(), mse.into()]);
        }
        fin.push(vec![spec.label.as_str().into(), fit.net.parameter_count().into(), fit.clean_mse.into()]);
        out.set(format!("{}_mse", spec.label), fit.clean_mse);
        maps.push((spec.label.clone(), fit.v_map));
    }
    let mut header = vec!["row".to_string(), "col".into(), "cell".into(), "v_star".into()];
    header.extend(maps.iter().map(|(l, _)| format!("v_{l}")));
    let mut vmap = Table {
        name: "vmap".into(),
        header,
        rows: Vec::new(),
    };
    let v_star = w.qstar.values_v();
    for s in 0..w.gw.num_cells() {
        let (r, c) = w.gw.coords(s);
        let cell = w.gw.cell(s);
        let vs = if cell == Cell::Wall { f64::NAN } else { v_star[s] };
        let mut row = vec![r.into(), c.into(), cell.symbol().to_string().into(), vs.into()];
        row.extend(maps.iter().map(|(_, m)| m[(r, c)].into()));
        vmap.push(row);
    }
    out.tables.push(curve);
    out.tables.push(fin);
    out.tables.push(vmap);
    out.files.push(("grid.txt".into(), w.gw.to_text()));
    Ok(out)
}

pub(crate) fn judge_underfit(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    if outs.is_empty() {
        return Vec::new();
    }
    let (lff, mlp) = (label_of(cfg, NetKind::Lff), label_of(cfg, NetKind::Mlp));
    let a = per_seed(&outs, &format!("{lff}_mse"));
    let b = per_seed(&outs, &format!("{mlp}_mse"));
    let wins = a.iter().zip(&b).filter(|(x, y)| x < y).count();
    vec![Check::assert(
        "LFF fits Q* better than MLP",
        wins == outs.len() && outs.len() == records.len(),
        format!("{wins}/{} seeds; mean MSE {lff} {:.4} vs {mlp} {:.4}", records.len(), mean(&a), mean(&b)),
    )]
}

// --------------------------------------------------------------- fqi-stability

pub(crate) fn fqi_stability(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let root = RngStream::new(seed);
    let w = world(cfg, &root, seed)?;
    let mut out = SeedOutput::default();
    let mut diag = Table::new(
        "diagnostics",
        &["net", "iteration", "mean_abs_q", "q_ratio", "mean_target", "normalized_return", "srank", "sigma_max", "sigma_min"],
    );
    let mut fin = Table::new("final", &["net", "peak_ratio", "diverged_at", "final_return", "final_srank"]);
    for spec in &w.specs {
        let run = fqi(&w.gw, &w.enc, spec, &cfg.fqi, &mut root.substream(2))?;
        let d = &run.diagnostics;
        for i in 0..d.len() {
            diag.push(vec![
                spec.label.as_str().into(),
                (i + 1).into(),
                d.mean_abs_q[i].into(),
                (d.mean_abs_q[i] / d.mean_abs_q_star).into(),
                d.mean_target[i].into(),
                d.normalized_return[i].into(),
                d.srank[i].into(),
                d.sigma_max[i].into(),
                d.sigma_min[i].into(),
            ]);
        }
        let last_ret = d.normalized_return.last().copied().unwrap_or(f64::NAN);
        let last_srank = d.srank.last().map_or(f64::NAN, |&s| s as f64);
        fin.push(vec![
            spec.label.as_str().into(),
            d.peak_ratio().into(),
            d.diverged_at.into(),
            last_ret.into(),
            last_srank.into(),
        ]);
        out.set(format!("{}_peak_ratio", spec.label), d.peak_ratio());
        out.set(format!("{}_final_return", spec.label), last_ret);
        out.set(format!("{}_diverged", spec.label), if d.diverged_at.is_some() { 1.0 } else { 0.0 });
    }
    out.set("mean_abs_q_star", q_dataset(&w.gw, &w.qstar, &w.enc).2.map(f64::abs).mean());
    out.tables.push(diag);
    out.tables.push(fin);
    Ok(out)
}

pub(crate) fn judge_fqi(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    if outs.is_empty() {
        return Vec::new();
    }
    let (lff, mlp) = (label_of(cfg, NetKind::Lff), label_of(cfg, NetKind::Mlp));
    let a = per_seed(&outs, &format!("{lff}_peak_ratio"));
    let b = per_seed(&outs, &format!("{mlp}_peak_ratio"));
    let joint = a.iter().zip(&b).filter(|(l, m)| **m > 10.0 && **l <= 3.0).count();
    let pairs: Vec<String> = a.iter().zip(&b).map(|(l, m)| format!("{m:.2}/{l:.2}")).collect();
    vec![Check::assert(
        "MLP overestimates while LFF stays bounded",
        2 * joint > records.len(),
        format!(
            "{joint}/{} seeds with {mlp} peak > 10 and {lff} peak <= 3 (peaks {mlp}/{lff}: {})",
            records.len(),
            pairs.join(" ")
        ),
    )]
}

// --------------------------------------------------------- loguniform-ablation

pub(crate) fn loguniform_ablation(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let root = RngStream::new(seed);
    let w = world(cfg, &root, seed)?;
    let fits = noisy_target_experiment(&w.gw, &w.qstar, &w.enc, cfg.env.noise_std, &w.specs, &cfg.fit, &root.substream(2))?;
    let mut out = SeedOutput::default();
    let mut fin = Table::new("final", &["net", "parameters", "clean_mse", "noisy_mse"]);
    let mut curve = Table::new("curve", &["net", "step", "clean_mse", "noisy_mse"]);
    for f in &fits {
        fin.push(vec![f.label.as_str().into(), f.parameters.into(), f.clean_mse.into(), f.noisy_mse.into()]);
        for &(step, c, z) in &f.curve {
            curve.push(vec![f.label.as_str().into(), step.into(), c.into(), z.into()]);
        }
        out.set(format!("{}_clean_mse", f.label), f.clean_mse);
    }
    out.tables.push(curve);
    out.tables.push(fin);
    Ok(out)
}

pub(crate) fn judge_info_per_net(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    if outs.is_empty() {
        return Vec::new();
    }
    cfg.nets
        .iter()
        .map(|n| {
            let v = mean(&per_seed(&outs, &format!("{}_clean_mse", n.label)));
            Check::info(&n.label, format!("mean clean MSE {v:.4} over {} seeds", outs.len()))
        })
        .collect()
}

// ---------------------------------------------------------------- basis-drift

pub(crate) fn basis_drift(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let root = RngStream::new(seed);
    let w = world(cfg, &root, seed)?;
    let (_, xs, clean) = q_dataset(&w.gw, &w.qstar, &w.enc);
    let mut noise = root.substream(3);
    let std = cfg.env.noise_std;
    let noisy = Matrix::from_fn(clean.rows(), clean.cols(), |r, c| clean[(r, c)] + std * noise.normal());
    let mut out = SeedOutput::default();
    let mut drift = Table::new("drift", &["net", "step", "basis_stddev", "clean_mse"]);
    for spec in w.specs.iter().filter(|s| s.kind == NetKind::Lff) {
        let mut rng = root.substream(2);
        let mut net = spec.build(w.enc.dim(), NUM_ACTIONS, &mut rng)?;
        let start = net.basis_stddev().unwrap_or(f64::NAN);
        drift.push(vec![spec.label.as_str().into(), 0usize.into(), start.into(), f64::NAN.into()]);
        let every = cfg.fit.eval_every;
        fit_regression_with(&mut net, &xs, &noisy, cfg.fit.steps, &cfg.fit.optimizer, cfg.fit.batch_size, &mut rng, |step, n, _| {
            if every > 0 && (step + 1) % every == 0 {
                let sd = n.basis_stddev().unwrap_or(f64::NAN);
                let mse = n.predict(&xs).and_then(|p| mse_loss(&p, &clean)).map_or(f64::NAN, |l| l.0);
                drift.push(vec![spec.label.as_str().into(), (step + 1).into(), sd.into(), mse.into()]);
            }
        })?;
        let end = net.basis_stddev().unwrap_or(f64::NAN);
        out.set(format!("{}_initial_stddev", spec.label), start);
        out.set(format!("{}_final_stddev", spec.label), end);
        out.set(format!("{}_sigma", spec.label), spec.sigma);
    }
    if drift.rows.is_empty() {
        return Err(Error::Config("basis-drift needs at least one lff net".into()));
    }
    out.tables.push(drift);
    Ok(out)
}

pub(crate) fn judge_drift(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    if outs.is_empty() {
        return Vec::new();
    }
    cfg.nets
        .iter()
        .filter(|n| n.kind == NetKind::Lff)
        .map(|n| {
            let a = mean(&per_seed(&outs, &format!("{}_initial_stddev", n.label)));
            let b = mean(&per_seed(&outs, &format!("{}_final_stddev", n.label)));
            Check::info(
                &n.label,
                format!("basis std {a:.4} -> {b:.4} (sigma {}, trainable {})", n.sigma, n.trainable),
            )
        })
        .collect()
}
