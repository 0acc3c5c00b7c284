use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{EncodingMode, FitConfig, FqiConfig};
use crate::nets::NetSpec;

/// Gridworld and target settings. Defaults are the 64×64 world with 25% lava and 10% walls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub height: usize,
    pub width: usize,
    pub lava_frac: f64,
    pub wall_frac: f64,
    pub slip: f64,
    pub gamma: f64,
    pub encoding: EncodingMode,
    /// Std of the Gaussian noise added to `Q*` targets.
    pub noise_std: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            lava_frac: 0.25,
            wall_frac: 0.1,
            slip: 0.2,
            gamma: 0.9,
            encoding: EncodingMode::NormalizedCoords,
            noise_std: 0.0,
        }
    }
}

/// Settings for the kernel and gradient-flow experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Points on the circle for spectra and flows.
    pub points: usize,
    /// Points on the circle for finite-width kernel comparisons.
    pub compare_points: usize,
    pub sigmas: Vec<f64>,
    /// Basis scales for the finite-vs-infinite deep kernel comparison.
    pub finite_sigmas: Vec<f64>,
    /// Basis scale of the lazily trained 2-layer model.
    pub lazy_sigma: f64,
    /// Basis scale of the LFF raced against a plain ReLU net.
    pub contrast_sigma: f64,
    /// Fourier widths of the finite 2-layer models.
    pub widths: Vec<usize>,
    /// Hidden widths of the finite deep models.
    pub hidden: Vec<usize>,
    /// Affine layers after the embedding in the deep recursion.
    pub depth: usize,
    pub frequencies: Vec<usize>,
    pub eta: f64,
    pub times: Vec<f64>,
    pub rk4_dt: f64,
    /// Gradient-descent steps and learning rate for lazy training.
    pub steps: usize,
    pub lr: f64,
    pub samples: usize,
    pub gamma: f64,
    pub delta: f64,
    /// Sphere dimension for the contraction data set.
    pub dim: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            points: 256,
            compare_points: 64,
            sigmas: vec![0.3, 1.0, 3.0],
            finite_sigmas: vec![0.01, 0.1, 1.0],
            lazy_sigma: 0.1,
            contrast_sigma: 3.0,
            widths: vec![1024],
            hidden: vec![1024, 1024],
            depth: 3,
            frequencies: vec![1, 8],
            eta: 1.0,
            times: vec![0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
            rk4_dt: 1e-3,
            steps: 200,
            lr: 0.5,
            samples: 1_000_000,
            gamma: 0.99,
            delta: 0.1,
            dim: 4,
        }
    }
}

/// A fully resolved experiment description.
///
/// Config files only need the keys they change: the file is merged over
/// the named experiment's preset before validation. Arrays (`seeds`,
/// `nets`, ...) replace the preset's array; tables merge key by key, except
/// tagged tables (`optimizer`, `encoding`, `buffer`) whose tag changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    /// Worker threads for seed-level parallelism (0: one per core).
    pub workers: usize,
    pub nets: Vec<NetSpec>,
    pub fit: FitConfig,
    pub fqi: FqiConfig,
    pub env: EnvConfig,
    pub kernel: KernelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            seeds: vec![0],
            out_dir: None,
            workers: 0,
            nets: Vec::new(),
            fit: FitConfig::default(),
            fqi: FqiConfig::default(),
            env: EnvConfig::default(),
            kernel: KernelConfig::default(),
        }
    }
}

const TAGS: [&str; 2] = ["kind", "mode"];

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() && !retagged(slot, &v) => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn retagged(base: &toml::Value, over: &toml::Value) -> bool {
    TAGS.iter().any(|t| match over.get(t) {
        Some(tag) => base.get(t) != Some(tag),
        None => false,
    })
}

impl ExperimentConfig {
    /// Parses a config file, merges it over the experiment's preset and
    /// validates the result. Errors carry the offending line or field.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if raw.experiment.is_empty() {
            return Err(Error::Config("missing required key `experiment`".into()));
        }
        let def = super::registry::find(&raw.experiment).ok_or_else(|| {
            Error::Config(format!(
                "unknown experiment `{}` (try `lff-lab list`)",
                raw.experiment
            ))
        })?;
        let mut base = toml::Value::try_from((def.preset)()).map_err(|e| Error::Config(e.to_string()))?;
        let over: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, over);
        let cfg: ExperimentConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        super::registry::find(name)
            .map(|d| (d.preset)())
            .ok_or_else(|| Error::Config(format!("unknown experiment `{name}`")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if super::registry::find(&self.experiment).is_none() {
            return bad(format!("unknown experiment `{}`", self.experiment));
        }
        if self.seeds.is_empty() {
            return bad("`seeds` must list at least one seed".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("`seeds` contains duplicates".into());
        }
        for (i, net) in self.nets.iter().enumerate() {
            if net.label.is_empty() {
                return bad(format!("nets[{i}].label is empty"));
            }
            if self.nets.iter().filter(|n| n.label == net.label).count() > 1 {
                return bad(format!("duplicate net label `{}`", net.label));
            }
            if !(net.sigma >= 0.0) {
                return bad(format!("nets[{i}].sigma must be >= 0"));
            }
            if net.d_fourier % 2 != 0 {
                return bad(format!("nets[{i}].d_fourier must be even"));
            }
            if let Some(target) = &net.match_params {
                if !self.nets.iter().any(|n| &n.label == target) {
                    return bad(format!("nets[{i}].match_params names unknown net `{target}`"));
                }
            }
        }
        if self.fit.steps == 0 || self.fit.batch_size == 0 {
            return bad("fit.steps and fit.batch_size must be positive".into());
        }
        if self.fqi.iterations == 0 || self.fqi.batch_size == 0 {
            return bad("fqi.iterations and fqi.batch_size must be positive".into());
        }
        if !(self.fqi.srank_delta > 0.0 && self.fqi.srank_delta < 1.0) {
            return bad("fqi.srank_delta must lie in (0, 1)".into());
        }
        let env = &self.env;
        if env.height == 0 || env.width == 0 || env.height * env.width < 2 {
            return bad("env grid needs at least two cells".into());
        }
        if !(env.lava_frac >= 0.0 && env.wall_frac >= 0.0 && env.lava_frac + env.wall_frac < 1.0) {
            return bad("env.lava_frac and env.wall_frac must be >= 0 and sum below 1".into());
        }
        if !(0.0..=1.0).contains(&env.slip) || !(0.0..1.0).contains(&env.gamma) {
            return bad("env.slip must lie in [0, 1] and env.gamma in [0, 1)".into());
        }
        if !(env.noise_std >= 0.0) {
            return bad("env.noise_std must be >= 0".into());
        }
        let k = &self.kernel;
        if k.points < 2 || k.compare_points < 2 {
            return bad("kernel.points and kernel.compare_points must be >= 2".into());
        }
        if k.sigmas.iter().chain(&k.finite_sigmas).chain([&k.lazy_sigma, &k.contrast_sigma]).any(|s| !(*s >= 0.0)) {
            return bad("kernel.sigmas must be >= 0".into());
        }
        if k.widths.iter().any(|&w| w == 0) || k.hidden.iter().any(|&w| w == 0) {
            return bad("kernel widths must be positive".into());
        }
        if k.depth == 0 {
            return bad("kernel.depth must be >= 1".into());
        }
        if k.frequencies.iter().any(|&f| f > k.points.min(k.compare_points) / 2) {
            return bad("kernel.frequencies must not exceed points / 2".into());
        }
        if !(k.eta > 0.0 && k.rk4_dt > 0.0 && k.lr > 0.0) {
            return bad("kernel.eta, kernel.rk4_dt and kernel.lr must be positive".into());
        }
        if k.times.iter().any(|t| !(*t >= 0.0)) {
            return bad("kernel.times must be >= 0".into());
        }
        if !(0.0..1.0).contains(&k.gamma) || !(k.delta > 0.0 && k.delta <= 2.0) || k.dim < 2 {
            return bad("kernel.gamma in [0, 1), kernel.delta in (0, 2], kernel.dim >= 2".into());
        }
        (super::registry::find(&self.experiment).expect("checked").validate)(self)
    }

    /// First net of the given kind; experiments that compare an LFF with an
    /// MLP look their nets up this way.
    pub fn net(&self, kind: crate::nets::NetKind) -> Result<&NetSpec> {
        self.nets
            .iter()
            .find(|n| n.kind == kind)
            .ok_or_else(|| Error::Config(format!("experiment `{}` needs a {kind:?} net", self.experiment)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::OptimizerConfig;

    #[test]
    fn file_overrides_preset_keys() {
        let cfg = ExperimentConfig::parse("experiment = \"noise-filter\"\nseeds = [4]\n[fit]\nsteps = 7\n").unwrap();
        let preset = ExperimentConfig::preset("noise-filter").unwrap();
        assert_eq!(cfg.seeds, vec![4]);
        assert_eq!(cfg.fit.steps, 7);
        assert_eq!(cfg.fit.batch_size, preset.fit.batch_size);
        assert_eq!(cfg.nets, preset.nets);
    }

    #[test]
    fn retagged_optimizer_replaces_the_table() {
        let cfg = ExperimentConfig::parse(
            "experiment = \"noise-filter\"\n[fit.optimizer]\nkind = \"sgd\"\nlr = 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.fit.optimizer, OptimizerConfig::Sgd { lr: 0.05 });
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = ExperimentConfig::parse("experiment = \"contraction\"\n[kernel]\nsigmaz = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sigmaz") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_experiment_is_a_config_error() {
        assert!(matches!(ExperimentConfig::parse("experiment = \"nope\"\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("seeds = [1]\n"), Err(Error::Config(_))));
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for def in super::super::registry::EXPERIMENTS {
            let preset = (def.preset)();
            let text = preset.to_toml().unwrap();
            assert_eq!(ExperimentConfig::parse(&text).unwrap(), preset, "{}", def.name);
        }
    }
}
