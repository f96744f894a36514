//! Run configuration: CLI flags or a JSON document with the same fields.
//! Unknown JSON fields are rejected before any computation starts.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use coagfrag::{ConvolutionMode, InitialData};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Equilibrium(EquilibriumConfig),
    Hj(HjConfig),
    Verify(VerifyConfig),
    Bench(BenchConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub mass: f64,
    /// `monodisperse:<size>`, `geometric:<ratio>`, or `explicit:<d1,d2,...>`.
    pub init: String,
    pub n: usize,
    pub t_end: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_mode")]
    pub mode: ConvolutionMode,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default = "default_density_columns")]
    pub density_columns: usize,
    /// Report gelation onset against this gel-mass fraction.
    #[serde(default = "default_gel_threshold")]
    pub gel_threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub mass: f64,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HjForm {
    G,
    F,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjConfig {
    pub mass: f64,
    pub form: HjForm,
    pub t_end: f64,
    /// Grid spacing (dz in [0,1) for the g form, dx on [0, x_max] for f).
    #[serde(default = "default_grid_dz")]
    pub grid_dz: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_cutoff_n")]
    pub cutoff_n: u32,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Initial data spec as in simulate; its transform seeds the grid.
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default = "default_init_n")]
    pub init_n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_suite")]
    pub suite: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub direct_only: bool,
}

fn default_rtol() -> f64 {
    1e-9
}
fn default_atol() -> f64 {
    1e-12
}
fn default_mode() -> ConvolutionMode {
    ConvolutionMode::Auto
}
fn default_stride() -> usize {
    16
}
fn default_density_columns() -> usize {
    32
}
fn default_gel_threshold() -> f64 {
    0.01
}
fn default_grid_dz() -> f64 {
    1e-3
}
fn default_x_max() -> f64 {
    15.0
}
fn default_cutoff_n() -> u32 {
    10_000
}
fn default_cfl() -> f64 {
    0.9
}
fn default_init() -> String {
    "monodisperse:1".to_string()
}
fn default_init_n() -> usize {
    512
}
fn default_suite() -> String {
    "all".to_string()
}
fn default_reps() -> usize {
    9
}

/// Parses `kind:params` into initial data carrying the given total mass.
pub fn parse_init(spec: &str, mass: f64) -> Result<InitialData> {
    if !(mass > 0.0) {
        bail!("mass must be positive, got {mass}");
    }
    let (kind, params) = spec
        .split_once(':')
        .ok_or_else(|| anyhow!("init spec must be kind:params, got {spec:?}"))?;
    match kind {
        "monodisperse" => {
            let size: usize = params
                .parse()
                .with_context(|| format!("monodisperse size {params:?}"))?;
            if size == 0 {
                bail!("monodisperse size must be >= 1");
            }
            Ok(InitialData::Monodisperse {
                size,
                density: mass / size as f64,
            })
        }
        "geometric" => {
            let ratio: f64 = params
                .parse()
                .with_context(|| format!("geometric ratio {params:?}"))?;
            Ok(InitialData::Geometric { ratio, mass })
        }
        "explicit" => {
            let densities: Vec<f64> = params
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("explicit densities {params:?}"))?;
            let data = InitialData::Explicit { densities };
            let declared = data.declared_mass();
            if (declared - mass).abs() > 1e-9 * mass.max(1.0) {
                bail!(
                    "explicit list carries mass {declared}, but --mass says {mass}"
                );
            }
            Ok(data)
        }
        other => bail!("unknown init kind {other:?} (monodisperse|geometric|explicit)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_monodisperse_splits_density() {
        let init = parse_init("monodisperse:2", 0.6).unwrap();
        assert_eq!(
            init,
            InitialData::Monodisperse { size: 2, density: 0.3 }
        );
    }

    #[test]
    fn parse_rejects_conflicting_explicit_mass() {
        assert!(parse_init("explicit:0.5,0.25", 0.3).is_err());
        assert!(parse_init("explicit:0.5,0.25", 1.0).is_ok());
    }

    #[test]
    fn json_rejects_unknown_fields() {
        let json = r#"{"command":"equilibrium","mass":0.3,"length":64,"bogus":1}"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_err());
        let json = r#"{"command":"equilibrium","mass":0.3,"length":64}"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_ok());
    }
}
