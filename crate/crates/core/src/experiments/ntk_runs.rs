use super::config::ExperimentConfig;
use super::output::{Check, Field, SeedOutput, SeedRecord, Table};
use crate::error::{contract, Error, Result};
use crate::ntk::{
    analytic_kernel_matrix, analytic_lff_kernel_angle, circulant_spectrum, contraction_check, deep_fourier_model,
    deep_ntk_kernel, empirical_ntk, flow_residual, frequency_magnitudes, integrate_residual_rk4,
    lazy_training_check, lff_circle_log_spectrum, min_separation, ntk_relu_model, sigma_contraction_bound,
    sphere_sample, two_layer_fourier_model, CircleDataset, LazyTrainingReport,
};
use crate::numerics::{jacobi_eig, Matrix, RngStream};

pub(crate) fn ok_outputs(records: &[SeedRecord]) -> Vec<&SeedOutput> {
    records.iter().filter_map(|r| r.result.as_ref().ok()).collect()
}

fn col(t: &Table, row: &[Field], name: &str) -> f64 {
    t.column_index(name).and_then(|i| row[i].as_f64()).unwrap_or(f64::NAN)
}

/// Mean over outputs of `value` in table `table` for rows matching every
/// `(column, text)` key, in row order of the first output.
fn seed_mean(outs: &[&SeedOutput], table: &str, keys: &[(&str, String)], value: &str) -> Vec<f64> {
    let mut sums: Vec<f64> = Vec::new();
    for out in outs {
        let Some(t) = out.table(table) else { continue };
        let rows: Vec<_> = t
            .rows
            .iter()
            .filter(|r| keys.iter().all(|(k, v)| t.column_index(k).is_some_and(|i| r[i].to_string() == *v)))
            .collect();
        if sums.is_empty() {
            sums = vec![0.0; rows.len()];
        }
        for (s, r) in sums.iter_mut().zip(rows) {
            *s += col(t, r, value);
        }
    }
    let n = outs.len() as f64;
    sums.into_iter().map(|s| s / n).collect()
}

fn largest_multiset_gap(dft: &[f64], k: &Matrix) -> Result<f64> {
    let mut a = dft.to_vec();
    let mut b = jacobi_eig(k)?.eigenvalues;
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

// ---------------------------------------------------------------- ntk-compare

pub(crate) fn ntk_compare(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let k = &cfg.kernel;
    let root = RngStream::new(seed);
    let data = CircleDataset::new(k.compare_points);
    let offsets = data.offsets();
    let mut table = Table::new("kernel", &["sigma", "width", "offset", "theta", "analytic", "empirical"]);
    let mut out = SeedOutput::default();
    for (si, &sigma) in k.sigmas.iter().enumerate() {
        for (wi, &width) in k.widths.iter().enumerate() {
            let mut rng = root.substream((si * 64 + wi) as u64);
            let mut net = two_layer_fourier_model(&mut rng, 2, width, sigma)?;
            let emp = empirical_ntk(&mut net, &data.points)?;
            let mut worst = 0.0f64;
            for (j, &theta) in offsets.iter().enumerate() {
                let analytic = analytic_lff_kernel_angle(theta, sigma);
                worst = worst.max((emp[(0, j)] - analytic).abs());
                table.push(vec![sigma.into(), width.into(), j.into(), theta.into(), analytic.into(), emp[(0, j)].into()]);
            }
            out.set(format!("max_deviation_sigma{sigma}_width{width}"), worst);
        }
    }
    out.tables.push(table);
    Ok(out)
}

pub(crate) fn judge_ntk_compare(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    let k = &cfg.kernel;
    let mut checks = Vec::new();
    if outs.is_empty() {
        return checks;
    }
    let widest = *k.widths.iter().max().expect("validated");
    for &sigma in &k.sigmas {
        let mut devs = Vec::new();
        for &width in &k.widths {
            let keys = [("sigma", sigma.to_string()), ("width", width.to_string())];
            let emp = seed_mean(&outs, "kernel", &keys, "empirical");
            let ana = seed_mean(&outs, "kernel", &keys, "analytic");
            let dev = emp.iter().zip(&ana).map(|(e, a)| (e - a).abs()).fold(0.0, f64::max);
            devs.push((width, dev));
        }
        let dev = devs.iter().find(|(w, _)| *w == widest).map_or(f64::NAN, |d| d.1);
        checks.push(Check::assert(
            &format!("mean kernel sigma={sigma} width={widest}"),
            dev < 0.1,
            format!("max |mean empirical - analytic| = {dev:.4} over {} seeds (< 0.1)", outs.len()),
        ));
        if devs.len() > 1 {
            let mut by_width = devs.clone();
            by_width.sort_by_key(|d| d.0);
            let shrinking = by_width.windows(2).all(|w| w[1].1 < w[0].1);
            let trail: Vec<String> = by_width.iter().map(|(w, d)| format!("{w}:{d:.4}")).collect();
            let trend = if shrinking { "shrinking" } else { "not monotone" };
            checks.push(Check::info(
                &format!("deviation by width sigma={sigma}"),
                format!("{} ({trend})", trail.join(" ")),
            ));
        }
    }
    checks
}

// --------------------------------------------------------------- ntk-spectrum

pub(crate) fn ntk_spectrum(cfg: &ExperimentConfig, _seed: u64) -> Result<SeedOutput> {
    let k = &cfg.kernel;
    let data = CircleDataset::new(k.points);
    let mut table = Table::new(
        "spectrum",
        &["frequency", "eigenvalue", "sigma", "depth", "log_eigenvalue", "dft_eigenvalue"],
    );
    let mut out = SeedOutput::default();
    for &sigma in &k.sigmas {
        let logs = lff_circle_log_spectrum(k.points, sigma)?;
        let km = analytic_kernel_matrix(&data.points, sigma)?;
        let spec = circulant_spectrum(&km)?;
        for &(freq, log) in &logs {
            let dft = spec.eigenvalue_at(freq).unwrap_or(f64::NAN);
            table.push(vec![freq.into(), log.exp().into(), sigma.into(), 1usize.into(), log.into(), dft.into()]);
        }
        out.set(format!("dft_jacobi_gap_sigma{sigma}"), largest_multiset_gap(&spec.eigenvalues, &km)?);
    }
    out.tables.push(table);
    Ok(out)
}

/// Checks `value(σ)` strictly increasing in σ at every frequency in
/// `[k_min, n/2]`; returns the worst (smallest) consecutive gap.
fn ordering_gap(t: &Table, kind: Option<&str>, sigmas: &[f64], value: &str, k_min: usize) -> (bool, f64) {
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let series: Vec<Vec<(usize, f64)>> = sorted
        .iter()
        .map(|s| {
            t.rows
                .iter()
                .filter(|r| col(t, r, "sigma") == *s)
                .filter(|r| kind.is_none_or(|k| t.column_index("kind").is_some_and(|i| r[i].to_string() == k)))
                .map(|r| (col(t, r, "frequency") as usize, col(t, r, value)))
                .filter(|(f, _)| *f >= k_min)
                .collect()
        })
        .collect();
    let mut ok = !series.is_empty() && series.iter().all(|s| !s.is_empty());
    let mut worst = f64::INFINITY;
    for pair in series.windows(2) {
        for ((fa, a), (fb, b)) in pair[0].iter().zip(&pair[1]) {
            if fa != fb {
                ok = false;
            }
            worst = worst.min(b - a);
            ok &= b > a;
        }
    }
    (ok, worst)
}

pub(crate) fn judge_ntk_spectrum(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    let Some(out) = outs.first() else { return Vec::new() };
    let k = &cfg.kernel;
    let t = out.table("spectrum").expect("spectrum table");
    let k_min = k.points / 8;
    let (ok, gap) = ordering_gap(t, None, &k.sigmas, "log_eigenvalue", k_min);
    let mut checks = vec![Check::assert(
        "2-layer spectrum increasing in sigma",
        ok,
        format!("k >= {k_min}: smallest log-eigenvalue gap {gap:.3}"),
    )];
    let worst = out
        .metrics
        .iter()
        .filter(|(n, _)| n.starts_with("dft_jacobi_gap"))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    checks.push(Check::assert("DFT matches Jacobi", worst <= 1e-8, format!("largest eigenvalue gap {worst:.2e} (<= 1e-8)")));
    checks
}

// -------------------------------------------------------------- deep-spectrum

pub(crate) fn deep_spectrum(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let k = &cfg.kernel;
    let root = RngStream::new(seed);
    let data = CircleDataset::new(k.points);
    let mut out = SeedOutput::default();
    let mut spectra = Table::new("spectrum", &["frequency", "eigenvalue", "sigma", "depth", "kind"]);
    let mut runs: Vec<(Option<f64>, &str)> = k.sigmas.iter().map(|&s| (Some(s), "lff")).collect();
    runs.push((None, "mlp"));
    for (sigma, kind) in runs {
        let km = deep_ntk_kernel(k.depth, sigma.unwrap_or(0.0), &data.points, sigma.is_some())?;
        let spec = circulant_spectrum(&km)?;
        for &(freq, lambda) in &spec.by_frequency {
            let s: Field = sigma.map_or_else(|| "".into(), Field::from);
            spectra.push(vec![freq.into(), lambda.into(), s, k.depth.into(), kind.into()]);
        }
        let label = sigma.map_or_else(|| "mlp".to_string(), |s| format!("sigma{s}"));
        out.set(format!("dft_jacobi_gap_{label}"), largest_multiset_gap(&spec.eigenvalues, &km)?);
    }
    let compare = CircleDataset::new(k.compare_points);
    let offsets = compare.offsets();
    let mut finite = Table::new("finite", &["sigma", "offset", "theta", "infinite", "empirical"]);
    for (si, &sigma) in k.finite_sigmas.iter().enumerate() {
        let mut rng = root.substream(si as u64);
        let width = *k.widths.last().expect("validated");
        let mut net = deep_fourier_model(&mut rng, 2, width, &k.hidden, sigma)?;
        let emp = empirical_ntk(&mut net, &compare.points)?;
        let inf = deep_ntk_kernel(k.depth, sigma, &compare.points, true)?;
        for (j, &theta) in offsets.iter().enumerate() {
            finite.push(vec![sigma.into(), j.into(), theta.into(), inf[(0, j)].into(), emp[(0, j)].into()]);
        }
    }
    out.tables.push(spectra);
    out.tables.push(finite);
    Ok(out)
}

pub(crate) fn validate_deep(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.kernel.hidden.len() + 1 != cfg.kernel.depth {
        return Err(Error::Config(format!(
            "kernel.depth = {} must equal len(kernel.hidden) + 1 = {}",
            cfg.kernel.depth,
            cfg.kernel.hidden.len() + 1
        )));
    }
    if cfg.kernel.widths.is_empty() {
        return Err(Error::Config("kernel.widths must not be empty".into()));
    }
    Ok(())
}

pub(crate) fn judge_deep_spectrum(cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    let Some(first) = outs.first() else { return Vec::new() };
    let k = &cfg.kernel;
    let t = first.table("spectrum").expect("spectrum table");
    let k_min = k.points / 8;
    let (ok, gap) = ordering_gap(t, Some("lff"), &k.sigmas, "eigenvalue", k_min);
    let mut checks = vec![Check::assert(
        &format!("depth-{} spectrum increasing in sigma", k.depth),
        ok,
        format!("k >= {k_min}: smallest eigenvalue gap {gap:.3e}"),
    )];
    let worst = first
        .metrics
        .iter()
        .filter(|(n, _)| n.starts_with("dft_jacobi_gap"))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    checks.push(Check::assert("DFT matches Jacobi", worst <= 1e-8, format!("largest eigenvalue gap {worst:.2e} (<= 1e-8)")));
    let limit = 1.5f64.ln();
    for &sigma in &k.finite_sigmas {
        let keys = [("sigma", sigma.to_string())];
        let emp = seed_mean(&outs, "finite", &keys, "empirical");
        let inf = seed_mean(&outs, "finite", &keys, "infinite");
        let worst = emp
            .iter()
            .zip(&inf)
            .map(|(e, i)| if *e > 0.0 && *i > 0.0 { (e / i).ln().abs() } else { f64::INFINITY })
            .fold(0.0, f64::max);
        checks.push(Check::assert(
            &format!("finite deep kernel sigma={sigma}"),
            worst <= limit,
            format!("max |log(empirical / infinite)| = {worst:.4} over {} seeds (<= ln 1.5)", outs.len()),
        ));
    }
    checks
}

// -------------------------------------------------------------- flow-residual

fn steps_to_fraction(residual: &[f64], fraction: f64) -> Option<usize> {
    let start = *residual.first()?;
    residual.iter().position(|&r| r <= fraction * start)
}

fn push_lazy(lazy: &mut Table, curve: &mut Table, model: &str, report: &LazyTrainingReport) {
    for fit in &report.fits {
        lazy.push(vec![
            model.into(),
            fit.frequency.into(),
            fit.kernel_eigenvalue.into(),
            fit.predicted_half_life.into(),
            fit.observed_half_life.into(),
            steps_to_fraction(&fit.residual, 0.1).into(),
        ]);
        for (step, r) in fit.residual.iter().enumerate() {
            curve.push(vec![model.into(), fit.frequency.into(), step.into(), (*r).into()]);
        }
    }
}

pub(crate) fn flow_residual_run(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let k = &cfg.kernel;
    let root = RngStream::new(seed);
    let data = CircleDataset::new(k.points);
    let mut out = SeedOutput::default();
    let mut table = Table::new(
        "residual",
        &["time", "frequency", "residual_magnitude", "sigma", "predicted_magnitude", "rk4_magnitude"],
    );
    let (mut rk4_err, mut mode_err) = (0.0f64, 0.0f64);
    for &sigma in &k.sigmas {
        let km = analytic_kernel_matrix(&data.points, sigma)?;
        let spec = circulant_spectrum(&km)?;
        for &freq in &k.frequencies {
            let y = data.cosine(freq);
            let f0 = vec![0.0; y.len()];
            let closed = flow_residual(&km, &f0, &y, k.eta, &k.times)?;
            let r0: Vec<f64> = f0.iter().zip(&y).map(|(a, b)| a - b).collect();
            let rk4 = integrate_residual_rk4(&km, &r0, k.eta, &k.times, k.rk4_dt)?;
            let lambda = spec.eigenvalue_at(freq).unwrap_or(f64::NAN);
            let m0 = frequency_magnitudes(&r0)[freq];
            for (ti, &t) in k.times.iter().enumerate() {
                let mag = frequency_magnitudes(&closed.residuals[ti])[freq];
                let predicted = m0 * (-k.eta * lambda * t).exp();
                let rk_mag = frequency_magnitudes(&rk4[ti])[freq];
                let sup = closed.residuals[ti].iter().zip(&rk4[ti]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                // Everything outside mode `freq` must stay at zero.
                let total: f64 = closed.residuals[ti].iter().map(|v| v * v).sum::<f64>().sqrt();
                let leak = (total * total - mag * mag).max(0.0).sqrt();
                rk4_err = rk4_err.max(sup);
                mode_err = mode_err.max((mag - predicted).abs() / m0).max(leak / m0);
                table.push(vec![t.into(), freq.into(), mag.into(), sigma.into(), predicted.into(), rk_mag.into()]);
            }
        }
    }
    out.set("rk4_sup_error", rk4_err);
    out.set("pure_mode_error", mode_err);

    let lazy_points = CircleDataset::new(k.compare_points);
    let width = *k.widths.last().expect("validated");
    let mut lazy = Table::new(
        "lazy",
        &["model", "frequency", "kernel_eigenvalue", "predicted_half_life", "observed_half_life", "steps_to_10pct"],
    );
    let mut curve = Table::new("lazy_curve", &["model", "frequency", "step", "residual_magnitude"]);
    let lff = two_layer_fourier_model(&mut root.substream(1), 2, width, k.lazy_sigma)?;
    let report = lazy_training_check(&lff, &lazy_points, &k.frequencies, k.steps, k.lr)?;
    out.set("order_matches", if report.order_matches { 1.0 } else { 0.0 });
    push_lazy(&mut lazy, &mut curve, &format!("lff_sigma{}", k.lazy_sigma), &report);

    let top = *k.frequencies.iter().max().expect("validated");
    let sharp = two_layer_fourier_model(&mut root.substream(2), 2, width, k.contrast_sigma)?;
    let sharp_report = lazy_training_check(&sharp, &lazy_points, &[top], k.steps, k.lr)?;
    let relu = ntk_relu_model(&mut root.substream(3), 2, &[width])?;
    let relu_report = lazy_training_check(&relu, &lazy_points, &[top], k.steps, k.lr)?;
    let to10 = |r: &LazyTrainingReport| steps_to_fraction(&r.fits[0].residual, 0.1).map_or(f64::INFINITY, |s| s as f64);
    out.set("lff_contrast_steps_to_10pct", to10(&sharp_report));
    out.set("mlp_steps_to_10pct", to10(&relu_report));
    push_lazy(&mut lazy, &mut curve, &format!("lff_sigma{}", k.contrast_sigma), &sharp_report);
    push_lazy(&mut lazy, &mut curve, "mlp", &relu_report);
    out.tables.push(table);
    out.tables.push(lazy);
    out.tables.push(curve);
    Ok(out)
}

pub(crate) fn validate_flow(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.kernel.frequencies.is_empty() || cfg.kernel.widths.is_empty() || cfg.kernel.times.is_empty() {
        return Err(Error::Config("flow-residual needs kernel.frequencies, kernel.widths and kernel.times".into()));
    }
    Ok(())
}

pub(crate) fn judge_flow(_cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    if outs.is_empty() {
        return Vec::new();
    }
    let max = |name: &str| outs.iter().filter_map(|o| o.metric(name)).fold(0.0, f64::max);
    let rk4 = max("rk4_sup_error");
    let mode = max("pure_mode_error");
    let ordered = outs.iter().filter(|o| o.metric("order_matches") == Some(1.0)).count();
    let faster = outs
        .iter()
        .filter(|o| {
            let a = o.metric("lff_contrast_steps_to_10pct").unwrap_or(f64::INFINITY);
            let b = o.metric("mlp_steps_to_10pct").unwrap_or(f64::INFINITY);
            a.is_finite() && a < b
        })
        .count();
    vec![
        Check::assert("closed form matches RK4", rk4 <= 1e-6, format!("sup-norm gap {rk4:.2e} (<= 1e-6)")),
        Check::assert(
            "residual stays in its mode",
            mode <= 1e-6,
            format!("largest relative deviation from |r_k(0)|e^(-eta lambda_k t) {mode:.2e} (<= 1e-6)"),
        ),
        Check::assert(
            "half-lives follow eigenvalue order",
            ordered == outs.len(),
            format!("{ordered}/{} seeds ordered", outs.len()),
        ),
        Check::assert(
            "high-sigma LFF beats ReLU net to 10% residual",
            faster == outs.len(),
            format!("{faster}/{} seeds", outs.len()),
        ),
    ]
}

// ---------------------------------------------------------------- contraction

/// Greedy rejection sampling of `count` unit vectors in `d` dimensions with
/// pairwise `xᵢᵀxⱼ <= 1 - δ`.
pub fn separated_sphere_points(count: usize, d: usize, delta: f64, rng: &mut RngStream) -> Result<Matrix> {
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while kept.len() < count {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(contract(
                "separated_sphere_points",
                format!("placed only {} of {count} points with separation {delta} in {d} dimensions", kept.len()),
            ));
        }
        let p = sphere_sample(1, d, rng).row(0).to_vec();
        if kept.iter().all(|q| crate::numerics::dot(q, &p) <= 1.0 - delta) {
            kept.push(p);
        }
    }
    Matrix::from_rows(&kept)
}

pub(crate) fn contraction_run(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let k = &cfg.kernel;
    let mut rng = RngStream::new(seed);
    let points = separated_sphere_points(k.points, k.dim, k.delta, &mut rng)?;
    let n = k.points - 1;
    let bound = sigma_contraction_bound(n, k.gamma, k.delta)?;
    let rho = vec![1.0 / k.points as f64; k.points];
    let mut out = SeedOutput::default();
    let mut table = Table::new("conditions", &["sigma2", "index", "step_margin", "dominance_margin"]);
    out.set("sigma2_bound", bound);
    out.set("reference_bound_n100_g0.99_d0.1", sigma_contraction_bound(100, 0.99, 0.1)?);
    out.set("min_separation", min_separation(&points));
    for (label, sigma2) in [("bound", bound), ("quarter", bound / 4.0)] {
        let km = analytic_kernel_matrix(&points, sigma2.sqrt())?;
        let top = (0..k.points).map(|i| km[(i, i)] * rho[i]).fold(0.0, f64::max);
        let report = contraction_check(&km, &rho, 0.5 / top, k.gamma)?;
        for r in &report.rows {
            table.push(vec![sigma2.into(), r.index.into(), r.step_margin.into(), r.dominance_margin.into()]);
        }
        out.set(format!("{label}_step_condition"), if report.step_condition { 1.0 } else { 0.0 });
        out.set(format!("{label}_dominance_condition"), if report.dominance_condition { 1.0 } else { 0.0 });
        out.set(format!("{label}_worst_dominance_margin"), report.worst_dominance_margin());
    }
    out.tables.push(table);
    Ok(out)
}

pub(crate) fn judge_contraction(_cfg: &ExperimentConfig, records: &[SeedRecord]) -> Vec<Check> {
    let outs = ok_outputs(records);
    if outs.is_empty() {
        return Vec::new();
    }
    let all = |name: &str, want: f64| outs.iter().all(|o| o.metric(name) == Some(want));
    let reference = outs[0].metric("reference_bound_n100_g0.99_d0.1").unwrap_or(f64::NAN);
    let bound = outs[0].metric("sigma2_bound").unwrap_or(f64::NAN);
    vec![
        Check::assert(
            "reference bound",
            (reference - 98.47).abs() <= 0.01,
            format!("N=100, gamma=0.99, delta=0.1 gives {reference:.4} (98.47 +- 0.01)"),
        ),
        Check::assert(
            "bound satisfies both conditions",
            all("bound_step_condition", 1.0) && all("bound_dominance_condition", 1.0),
            format!("sigma^2 = {bound:.4}"),
        ),
        Check::assert(
            "quarter bound breaks dominance",
            all("quarter_dominance_condition", 0.0),
            format!("sigma^2 = {:.4}", bound / 4.0),
        ),
    ]
}

pub(crate) fn validate_widths(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.kernel.widths.is_empty() {
        return Err(Error::Config("kernel.widths must not be empty".into()));
    }
    Ok(())
}

pub(crate) fn nothing_extra(_cfg: &ExperimentConfig) -> Result<()> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_points_respect_delta() {
        let p = separated_sphere_points(30, 4, 0.1, &mut RngStream::new(1)).unwrap();
        assert!(min_separation(&p) >= 0.1 - 1e-12);
    }

    #[test]
    fn fraction_steps() {
        assert_eq!(steps_to_fraction(&[1.0, 0.5, 0.09], 0.1), Some(2));
        assert_eq!(steps_to_fraction(&[1.0, 0.5], 0.1), None);
    }
}
