//! Scenario configuration files: a JSON description of the plant, the
//! controller (command set plus the per-command network table), the safety
//! geometry and the initial-set partition. Unknown keys are rejected.

use reachloop::controller::ControllerError;
use reachloop::network::NetworkError;
use reachloop::{
    CommandSet, ControllerSpec, PartitionParams, PlantModel, PrePostKind, ReluNetwork, ScenarioSpec,
};
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    plant: PlantConfig,
    period: f64,
    horizon_steps: usize,
    commands: Vec<Vec<f64>>,
    pre_post: PrePostConfig,
    /// Network file per command, index-aligned with `commands`.
    networks: Vec<String>,
    collision_radius_ft: f64,
    sensor_radius_ft: f64,
    partition: PartitionConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind")]
enum PlantConfig {
    #[serde(rename = "acasxu-kinematics")]
    AcasXu,
    #[serde(rename = "linear-test")]
    Linear { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

#[derive(Debug, Deserialize)]
enum PrePostConfig {
    #[serde(rename = "acasxu")]
    AcasXu,
    #[serde(rename = "identity")]
    Identity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionConfig {
    arc_count: usize,
    heading_bin_count: usize,
    #[serde(default = "default_cone_span")]
    heading_cone_span_rad: f64,
    own_speed_ftps: f64,
    intruder_speed_ftps: f64,
    #[serde(default)]
    initial_command: usize,
}

fn default_cone_span() -> f64 {
    std::f64::consts::PI
}

/// Tunables supplied on the command line rather than in the scenario file.
#[derive(Clone, Copy, Debug)]
pub struct SolverParams {
    pub integration_steps: usize,
    /// Symbolic-set cardinality cap; defaults to the command count.
    pub gamma: Option<usize>,
    pub taylor_order: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            integration_steps: 10,
            gamma: None,
            taylor_order: 4,
        }
    }
}

/// Load and validate a scenario file; network paths resolve against
/// `networks_dir`.
pub fn load_scenario(
    path: &Path,
    networks_dir: &Path,
    params: SolverParams,
) -> Result<(ScenarioSpec, PartitionParams), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text)?;

    let commands = CommandSet::new(file.commands).map_err(ConfigError::Controller)?;
    if file.networks.len() != commands.len() {
        return Err(ConfigError::Validation(format!(
            "selection table lists {} networks for {} commands",
            file.networks.len(),
            commands.len()
        )));
    }
    let networks: Vec<ReluNetwork> = file
        .networks
        .iter()
        .map(|name| ReluNetwork::load_file(&networks_dir.join(name)))
        .collect::<Result<_, _>>()?;

    let plant = match file.plant {
        PlantConfig::AcasXu => PlantModel::AcasXu,
        PlantConfig::Linear { a, b } => PlantModel::Linear { a, b },
    };
    let kind = match file.pre_post {
        PrePostConfig::AcasXu => PrePostKind::AcasXu,
        PrePostConfig::Identity => PrePostKind::Identity,
    };
    if kind == PrePostKind::AcasXu && plant.state_dim() != 5 {
        return Err(ConfigError::Validation(
            "the acasxu pre-processing needs the 5-dimensional encounter state".into(),
        ));
    }
    if plant.state_dim() != 5 {
        return Err(ConfigError::Validation(format!(
            "the initial partition produces 5-dimensional cells (x, y, heading, two speeds); \
             the plant has state dimension {}",
            plant.state_dim()
        )));
    }
    if commands.dim() != plant.command_dim() {
        return Err(ConfigError::Validation(format!(
            "commands are {}-dimensional but the plant takes {}",
            commands.dim(),
            plant.command_dim()
        )));
    }
    if file.period.is_nan() || file.period <= 0.0 {
        return Err(ConfigError::Validation("period must be positive".into()));
    }
    if file.horizon_steps == 0 {
        return Err(ConfigError::Validation(
            "horizon must be at least one step".into(),
        ));
    }
    if file.collision_radius_ft.is_nan()
        || file.sensor_radius_ft.is_nan()
        || file.collision_radius_ft <= 0.0
        || file.collision_radius_ft >= file.sensor_radius_ft
    {
        return Err(ConfigError::Validation(
            "need 0 < collision radius < sensor radius".into(),
        ));
    }
    let gamma = params.gamma.unwrap_or(commands.len());
    if gamma < commands.len() {
        return Err(ConfigError::Validation(format!(
            "resize threshold {gamma} below the command count {}",
            commands.len()
        )));
    }
    if params.integration_steps == 0 {
        return Err(ConfigError::Validation(
            "need at least one integration step".into(),
        ));
    }
    if !(1..=6).contains(&params.taylor_order) {
        return Err(ConfigError::Validation(
            "Taylor order must be in 1..=6".into(),
        ));
    }
    if file.partition.initial_command >= commands.len() {
        return Err(ConfigError::Validation(
            "initial command out of range".into(),
        ));
    }

    let controller = ControllerSpec::new(commands, networks, file.period, kind)
        .map_err(ConfigError::Controller)?;

    let partition = PartitionParams {
        sensor_radius: file.sensor_radius_ft,
        arc_count: file.partition.arc_count,
        heading_bin_count: file.partition.heading_bin_count,
        heading_cone_span: file.partition.heading_cone_span_rad,
        own_speed: file.partition.own_speed_ftps,
        intruder_speed: file.partition.intruder_speed_ftps,
        initial_command: file.partition.initial_command,
    };
    partition
        .validate()
        .map_err(|e| ConfigError::Validation(e.to_string()))?;

    let spec = ScenarioSpec {
        plant,
        controller,
        horizon_steps: file.horizon_steps,
        integration_steps: params.integration_steps,
        taylor_order: params.taylor_order,
        resize_threshold: gamma,
        collision_radius: file.collision_radius_ft,
        sensor_radius: file.sensor_radius_ft,
        radial_dims: vec![0, 1],
        split_dims: vec![0, 1, 2],
    };
    Ok((spec, partition))
}
