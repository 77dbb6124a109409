//! Built-in configurations, sized to finish in seconds on one core.

/// `(name, description, TOML)`.
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "free_coherence",
        "c = 0: the coherent state follows the classical field exactly",
        r#"schema_version = 1
scenario = "free_coherence"

[model]
sites = 6
spacing = 1.0
coupling = 0.0
n_max = 4

[field]
kind = "bright"
eta = 1.0
profile_coupling = -1.0
velocity = 0.5
peak_alpha = 0.1

[evolve]
dt = 1e-3
t_final = 5.0
samples = 26
"#,
    ),
    (
        "slope_check",
        "short-time slope of r(t) against -i(c/Δ)Σ|α|⁴",
        r#"schema_version = 1
scenario = "slope_check"

[model]
sites = 6
spacing = 1.0
coupling = -0.1
n_max = 4

[field]
kind = "bright"
eta = 1.0
profile_coupling = -1.0
peak_alpha = 0.1

[propagator]
tolerance = 1e-12

[slope]
dts = [1e-3, 2e-3, 4e-3]
"#,
    ),
    (
        "soliton_decay",
        "attractive coupling: |r(t)| leaves 1",
        r#"schema_version = 1
scenario = "soliton_decay"

[model]
sites = 6
spacing = 1.0
coupling = -0.1
n_max = 4

[field]
kind = "bright"
eta = 1.0
profile_coupling = -1.0
peak_alpha = 0.6

[evolve]
dt = 1e-3
t_final = 10.0
samples = 21

[truncation]
max_tail = 1e-4
"#,
    ),
    (
        "classical_only",
        "split-step evolution of a bright soliton, no quantum part",
        r#"schema_version = 1
scenario = "classical_only"

[model]
sites = 128
length = 32.0
coupling = -1.0
n_max = 1

[field]
kind = "bright"
eta = 1.0
velocity = 1.0

[evolve]
dt = 1e-3
t_final = 1.0
classical_mode = "split_step"
snapshot_stride = 100
"#,
    ),
    (
        "engine_xcheck",
        "dense and Krylov propagators on a random state",
        r#"schema_version = 1
scenario = "engine_xcheck"
seed = 7

[model]
sites = 6
spacing = 1.0
coupling = -0.3
n_max = 3

[evolve]
t_final = 1.0
"#,
    ),
    (
        "sweep_coupling",
        "slope_check over c; Im s₁ must be linear in c",
        r#"schema_version = 1
scenario = "slope_check"

[model]
sites = 6
spacing = 1.0
coupling = -0.1
n_max = 4

[field]
kind = "bright"
eta = 1.0
profile_coupling = -1.0
peak_alpha = 0.1

[propagator]
tolerance = 1e-12

[slope]
dts = [1e-3, 2e-3, 4e-3]

[sweep]
parameter = "coupling"
values = [-0.2, -0.1, 0.0, 0.1, 0.2]
"#,
    ),
    (
        "sweep_n_max",
        "free_coherence over n_max; 1 - |r| must shrink as the cutoff grows",
        r#"schema_version = 1
scenario = "free_coherence"

[model]
sites = 6
spacing = 1.0
coupling = 0.0
n_max = 2

[field]
kind = "bright"
eta = 1.0
profile_coupling = -1.0
peak_alpha = 0.5

[evolve]
dt = 1e-3
t_final = 2.0
samples = 11

[sweep]
parameter = "n_max"
values = [2, 3, 4, 5]
"#,
    ),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::RunConfig;

    #[test]
    fn every_preset_validates() {
        for (name, _, text) in PRESETS {
            let cfg = RunConfig::from_toml_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("slope_check").is_some());
        assert!(preset("nope").is_none());
    }
}
