use super::config::{EnvConfig, ExperimentConfig, KernelConfig};
use super::output::{Check, SeedOutput, SeedRecord};
use super::{mdp_runs, ntk_runs};
use crate::error::Result;
use crate::mdp::{BufferSpec, EncodingMode, FitConfig, FqiConfig};
use crate::nets::{BasisInit, NetSpec, OptimizerConfig};

/// A named experiment: defaults, extra validation, per-seed work and the
/// assertions judged over all seeds.
pub struct ExperimentDef {
    pub name: &'static str,
    pub description: &'static str,
    pub preset: fn() -> ExperimentConfig,
    pub validate: fn(&ExperimentConfig) -> Result<()>,
    pub run_seed: fn(&ExperimentConfig, u64) -> Result<SeedOutput>,
    pub judge: fn(&ExperimentConfig, &[SeedRecord]) -> Vec<Check>,
}

pub static EXPERIMENTS: &[ExperimentDef] = &[
    ExperimentDef {
        name: "ntk-compare",
        description: "finite-width empirical NTK of the 2-layer Fourier model vs the closed-form kernel",
        preset: ntk_compare,
        validate: ntk_runs::validate_widths,
        run_seed: ntk_runs::ntk_compare,
        judge: ntk_runs::judge_ntk_compare,
    },
    ExperimentDef {
        name: "ntk-spectrum",
        description: "exact circle spectrum of the 2-layer kernel for several sigma, checked against Jacobi",
        preset: ntk_spectrum,
        validate: ntk_runs::nothing_extra,
        run_seed: ntk_runs::ntk_spectrum,
        judge: ntk_runs::judge_ntk_spectrum,
    },
    ExperimentDef {
        name: "deep-spectrum",
        description: "infinite-width deep ReLU NTK spectrum with Fourier and plain inputs, plus finite-width agreement",
        preset: deep_spectrum,
        validate: ntk_runs::validate_deep,
        run_seed: ntk_runs::deep_spectrum,
        judge: ntk_runs::judge_deep_spectrum,
    },
    ExperimentDef {
        name: "flow-residual",
        description: "per-frequency residual decay under kernel gradient flow and under real training",
        preset: flow_residual,
        validate: ntk_runs::validate_flow,
        run_seed: ntk_runs::flow_residual_run,
        judge: ntk_runs::judge_flow,
    },
    ExperimentDef {
        name: "noise-filter",
        description: "regression onto noisy Q* targets: small-sigma LFF vs parameter-matched MLP",
        preset: noise_filter,
        validate: mdp_runs::needs_lff_and_mlp,
        run_seed: mdp_runs::noise_filter,
        judge: mdp_runs::judge_noise_filter,
    },
    ExperimentDef {
        name: "gridworld-underfit",
        description: "supervised Q* fit on the 64x64 grid: high-sigma LFF vs parameter-matched MLP",
        preset: gridworld_underfit,
        validate: mdp_runs::needs_lff_and_mlp,
        run_seed: mdp_runs::gridworld_underfit,
        judge: mdp_runs::judge_underfit,
    },
    ExperimentDef {
        name: "fqi-stability",
        description: "fitted Q-iteration Q-value growth, return and srank for LFF vs MLP",
        preset: fqi_stability,
        validate: mdp_runs::needs_lff_and_mlp,
        run_seed: mdp_runs::fqi_stability,
        judge: mdp_runs::judge_fqi,
    },
    ExperimentDef {
        name: "contraction",
        description: "sigma^2 bound for contraction checked on a separated synthetic buffer",
        preset: contraction,
        validate: ntk_runs::nothing_extra,
        run_seed: ntk_runs::contraction_run,
        judge: ntk_runs::judge_contraction,
    },
    ExperimentDef {
        name: "loguniform-ablation",
        description: "Gaussian, log-uniform and frozen Fourier bases vs MLP on noisy Q* regression",
        preset: loguniform_ablation,
        validate: mdp_runs::needs_lff_and_mlp,
        run_seed: mdp_runs::loguniform_ablation,
        judge: mdp_runs::judge_info_per_net,
    },
    ExperimentDef {
        name: "basis-drift",
        description: "standard deviation of a trainable Fourier basis over training",
        preset: basis_drift,
        validate: ntk_runs::nothing_extra,
        run_seed: mdp_runs::basis_drift,
        judge: mdp_runs::judge_drift,
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentDef> {
    EXPERIMENTS.iter().find(|d| d.name == name)
}

fn base(name: &str, seeds: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: name.into(),
        seeds: (0..seeds).collect(),
        ..ExperimentConfig::default()
    }
}

fn ntk_compare() -> ExperimentConfig {
    ExperimentConfig {
        kernel: KernelConfig {
            compare_points: 64,
            widths: vec![64, 256, 1024],
            ..KernelConfig::default()
        },
        ..base("ntk-compare", 10)
    }
}

fn ntk_spectrum() -> ExperimentConfig {
    base("ntk-spectrum", 1)
}

fn deep_spectrum() -> ExperimentConfig {
    ExperimentConfig {
        kernel: KernelConfig {
            compare_points: 32,
            ..KernelConfig::default()
        },
        ..base("deep-spectrum", 3)
    }
}

fn flow_residual() -> ExperimentConfig {
    ExperimentConfig {
        kernel: KernelConfig {
            points: 32,
            compare_points: 32,
            steps: 500,
            ..KernelConfig::default()
        },
        ..base("flow-residual", 1)
    }
}

fn contraction() -> ExperimentConfig {
    ExperimentConfig {
        kernel: KernelConfig {
            points: 101,
            ..KernelConfig::default()
        },
        ..base("contraction", 1)
    }
}

fn small_grid() -> EnvConfig {
    EnvConfig {
        height: 16,
        width: 16,
        ..EnvConfig::default()
    }
}

fn matched_mlp(hidden: Vec<usize>) -> NetSpec {
    NetSpec {
        match_params: Some("lff".into()),
        ..NetSpec::mlp("mlp", hidden)
    }
}

fn noise_filter() -> ExperimentConfig {
    ExperimentConfig {
        nets: vec![
            NetSpec {
                trainable: false,
                ..NetSpec::lff("lff", vec![64, 64], 64, 0.01)
            },
            matched_mlp(vec![64, 64, 64]),
        ],
        fit: FitConfig {
            steps: 2000,
            optimizer: OptimizerConfig::adam(1e-3),
            batch_size: 100_000,
            eval_every: 100,
        },
        env: EnvConfig {
            noise_std: 3.0,
            ..small_grid()
        },
        ..base("noise-filter", 5)
    }
}

fn gridworld_underfit() -> ExperimentConfig {
    ExperimentConfig {
        nets: vec![NetSpec::lff("lff", vec![64, 64], 64, 3.0), matched_mlp(vec![64, 64, 64])],
        fit: FitConfig {
            steps: 2000,
            optimizer: OptimizerConfig::adam(1e-3),
            batch_size: 256,
            eval_every: 100,
        },
        ..base("gridworld-underfit", 3)
    }
}

fn fqi_stability() -> ExperimentConfig {
    ExperimentConfig {
        nets: vec![NetSpec::lff("lff", vec![32, 32], 32, 0.01), matched_mlp(vec![32, 32, 32])],
        fqi: FqiConfig {
            iterations: 60,
            grad_steps: 300,
            optimizer: OptimizerConfig::adam(3e-3),
            batch_size: 256,
            buffer: BufferSpec::Sampled { size: 1024 },
            srank_delta: 0.01,
        },
        env: EnvConfig {
            gamma: 0.99,
            encoding: EncodingMode::SmoothRandom {
                dim: 32,
                length_scale: 2.0,
            },
            ..small_grid()
        },
        ..base("fqi-stability", 5)
    }
}

fn loguniform_ablation() -> ExperimentConfig {
    let mut cfg = noise_filter();
    cfg.experiment = "loguniform-ablation".into();
    cfg.seeds = (0..3).collect();
    cfg.nets = vec![
        NetSpec::lff("lff", vec![64, 64], 64, 0.01),
        NetSpec {
            init: BasisInit::Loguniform,
            ..NetSpec::lff("lff_loguniform", vec![64, 64], 64, 0.01)
        },
        NetSpec {
            trainable: false,
            ..NetSpec::lff("lff_frozen", vec![64, 64], 64, 0.01)
        },
        matched_mlp(vec![64, 64, 64]),
    ];
    cfg
}

fn basis_drift() -> ExperimentConfig {
    let mut cfg = noise_filter();
    cfg.experiment = "basis-drift".into();
    cfg.seeds = (0..3).collect();
    cfg.nets = [0.001, 0.01, 0.1, 1.0]
        .iter()
        .map(|&s| NetSpec::lff(&format!("lff_sigma{s}"), vec![64, 64], 64, s))
        .collect();
    cfg
}
