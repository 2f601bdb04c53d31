//! TOML scenario schema. Every table rejects unknown keys; paths are
//! resolved against the scenario file's directory.

use std::path::{Path, PathBuf};

use boomclimb::footstep::{GoalRegion, PlannerConfig, Stance};
use boomclimb::geometry::{Point3, TriMesh};
use boomclimb::grasp::GraspScenario;
use boomclimb::limit_surface::{MonteCarloConfig, Statistic};
use boomclimb::model::{Anchor, AnchorId, BodyPose, CollisionGeometry, Environment, RobotModel, SphereObstacle, Tunnel, N_BOOMS};
use boomclimb::nalgebra::UnitQuaternion;
use boomclimb::perception::{CloudFormat, MsacConfig};
use boomclimb::reach::ReachConfig;
use boomclimb::scp::{ScpConfig, SeedConfig};
use boomclimb::synthetic::{corridor, short_reach_model};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub robot: RobotBlock,
    #[serde(default)]
    pub environment: EnvironmentBlock,
    #[serde(default)]
    pub grasp: GraspBlock,
    #[serde(default)]
    pub limit_surface: LimitSurfaceBlock,
    pub plan: Option<PlanBlock>,
    #[serde(default)]
    pub perception: PerceptionBlock,
    #[serde(default)]
    pub reach: ReachBlock,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotPreset {
    #[default]
    Default,
    ShortReach,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotBlock {
    #[serde(default)]
    pub preset: RobotPreset,
    pub mass_body: Option<f64>,
    pub mass_gripper: Option<f64>,
    pub gravity: Option<f64>,
    pub min_tension: Option<f64>,
    pub collision_margin: Option<f64>,
    pub pan_range_deg: Option<[f64; 2]>,
    pub tilt_range_deg: Option<[f64; 2]>,
    pub extension_range: Option<[f64; 2]>,
    pub prismatic_force_range: Option<[f64; 2]>,
    pub moment_range: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunnelBlock {
    pub axis_point: [f64; 3],
    pub axis_direction: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereBlock {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorBlock {
    pub id: AnchorId,
    pub position: [f64; 3],
    pub limit_surface_ref: Option<String>,
}

/// Synthetic wall anchors: the default stance at the origin plus one spare
/// per `[boom, dx]` entry, placed where that boom would point from a body
/// shifted `dx` along the tunnel.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorBlock {
    #[serde(default)]
    pub spares: Vec<(usize, f64)>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    pub tunnel: Option<TunnelBlock>,
    #[serde(default)]
    pub spheres: Vec<SphereBlock>,
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub anchors: Vec<AnchorBlock>,
    pub corridor: Option<CorridorBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartBlock {
    pub assignment: [AnchorId; N_BOOMS],
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalBlock {
    pub center: [f64; 3],
    pub radius: f64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBlock {
    /// Required unless the environment is a corridor, which supplies one.
    pub start: Option<StartBlock>,
    pub goal: GoalBlock,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub scp: ScpConfig,
    #[serde(default)]
    pub seed_path: SeedConfig,
    /// Optimize the body and gripper motion of every transition.
    #[serde(default = "yes")]
    pub trajectories: bool,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspPreset {
    #[default]
    FieldTest,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspBlock {
    #[serde(default)]
    pub preset: GraspPreset,
    pub alpha_deg: Option<[f64; 3]>,
    pub rock_radius: Option<f64>,
    pub wrist_offset: Option<f64>,
    pub link_length: Option<f64>,
    pub mu: Option<f64>,
    pub stiffness_normal: Option<f64>,
    pub stiffness_tangential: Option<f64>,
    pub stiffness_circumferential: Option<f64>,
    pub n_spines: Option<[usize; 3]>,
    pub internal_force: Option<f64>,
    pub spine_strength: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatName {
    #[default]
    Mean,
    P5,
    P50,
}

impl From<StatName> for Statistic {
    fn from(s: StatName) -> Self {
        match s {
            StatName::Mean => Statistic::Mean,
            StatName::P5 => Statistic::P5,
            StatName::P50 => Statistic::P50,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloBlock {
    pub n_grid: usize,
    pub n_mc: usize,
    pub force_step: Option<f64>,
    pub resolution: Option<f64>,
    pub force_cap: Option<f64>,
}

impl MonteCarloBlock {
    fn new(n_grid: usize, n_mc: usize) -> Self {
        Self { n_grid, n_mc, force_step: None, resolution: None, force_cap: None }
    }

    pub fn config(&self, seed: u64) -> Result<MonteCarloConfig, CliError> {
        let mut c = MonteCarloConfig::new(self.n_grid, self.n_mc, seed);
        c.force_step = self.force_step.unwrap_or(c.force_step);
        c.resolution = self.resolution.unwrap_or(c.resolution);
        c.force_cap = self.force_cap.unwrap_or(c.force_cap);
        c.validate().map_err(schema)?;
        Ok(c)
    }
}

fn default_mc() -> MonteCarloBlock {
    MonteCarloBlock::new(12, 200)
}
fn default_cross_points() -> usize {
    31
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSurfaceBlock {
    #[serde(default = "default_mc")]
    pub monte_carlo: MonteCarloBlock,
    /// Grasp forces for the cross-section files; empty means the grasp
    /// block's own value.
    #[serde(default)]
    pub internal_forces: Vec<f64>,
    #[serde(default)]
    pub cross_section_phi_deg: f64,
    #[serde(default = "default_cross_points")]
    pub cross_section_points: usize,
    #[serde(default)]
    pub statistic: StatName,
}

impl Default for LimitSurfaceBlock {
    fn default() -> Self {
        Self {
            monte_carlo: default_mc(),
            internal_forces: Vec::new(),
            cross_section_phi_deg: 0.0,
            cross_section_points: default_cross_points(),
            statistic: StatName::Mean,
        }
    }
}

fn default_voxel() -> f64 {
    0.005
}
fn default_knn() -> usize {
    30
}
fn default_axis() -> [f64; 3] {
    [0.0, 0.0, -1.0]
}
fn default_window() -> [f64; 2] {
    [25.0, 85.0]
}
fn default_site_mc() -> MonteCarloBlock {
    MonteCarloBlock::new(6, 40)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionBlock {
    pub cloud: Option<PathBuf>,
    pub format: Option<CloudFormat>,
    /// Voxel edge for downsampling, m; zero disables it.
    #[serde(default = "default_voxel")]
    pub voxel: f64,
    #[serde(default)]
    pub msac: MsacConfig,
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(default)]
    pub viewpoint: [f64; 3],
    /// Unit vector from the rock towards the approaching gripper.
    #[serde(default = "default_axis")]
    pub gripper_axis: [f64; 3],
    #[serde(default = "default_window")]
    pub alpha_window_deg: [f64; 2],
    #[serde(default)]
    pub pull_beta_deg: f64,
    #[serde(default)]
    pub pull_phi_deg: f64,
    #[serde(default)]
    pub statistic: StatName,
    #[serde(default = "default_site_mc")]
    pub monte_carlo: MonteCarloBlock,
}

impl Default for PerceptionBlock {
    fn default() -> Self {
        toml::from_str("").expect("all perception fields have defaults")
    }
}

fn default_patch() -> f64 {
    0.03
}
fn default_lateral() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachBlock {
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub finger: ReachConfig,
    /// Point the gripper is placed over; defaults to the highest vertex.
    pub target: Option<[f64; 3]>,
    #[serde(default = "default_patch")]
    pub patch_radius: f64,
    #[serde(default = "default_lateral")]
    pub lateral: [f64; 3],
}

impl Default for ReachBlock {
    fn default() -> Self {
        toml::from_str("").expect("all reach fields have defaults")
    }
}

fn schema(msg: impl std::fmt::Display) -> CliError {
    CliError::Schema(msg.to_string())
}

fn v3(a: [f64; 3]) -> Point3 {
    Point3::from(a)
}

fn range_deg(r: [f64; 2]) -> (f64, f64) {
    (r[0].to_radians(), r[1].to_radians())
}

impl Scenario {
    pub fn load(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut scn: Scenario = toml::from_str(text).map_err(|e| schema(format!("{}: {e}", path.display())))?;
        if scn.schema_version != SCHEMA_VERSION {
            return Err(schema(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", scn.schema_version)));
        }
        scn.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        scn.check_files()?;
        Ok(scn)
    }

    /// Defaults for commands run without a scenario file.
    pub fn empty() -> Self {
        Self { schema_version: SCHEMA_VERSION, ..Default::default() }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_files(&self) -> Result<(), CliError> {
        let paths = [&self.environment.mesh, &self.perception.cloud, &self.reach.mesh];
        for p in paths.into_iter().flatten() {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(schema(format!("referenced file {} does not exist", full.display())));
            }
        }
        Ok(())
    }

    pub fn robot(&self) -> Result<RobotModel, CliError> {
        let r = &self.robot;
        let mut m = match r.preset {
            RobotPreset::Default => RobotModel::default(),
            RobotPreset::ShortReach => short_reach_model(),
        };
        m.mass_body = r.mass_body.unwrap_or(m.mass_body);
        m.mass_gripper = r.mass_gripper.unwrap_or(m.mass_gripper);
        m.gravity = r.gravity.unwrap_or(m.gravity);
        m.min_tension = r.min_tension.unwrap_or(m.min_tension);
        m.collision_margin = r.collision_margin.unwrap_or(m.collision_margin);
        let j = &mut m.joint_limits;
        j.pan_range = r.pan_range_deg.map(range_deg).unwrap_or(j.pan_range);
        j.tilt_range = r.tilt_range_deg.map(range_deg).unwrap_or(j.tilt_range);
        j.extension_range = r.extension_range.map(|e| (e[0], e[1])).unwrap_or(j.extension_range);
        let a = &mut m.actuation_limits;
        a.prismatic_force_range = r.prismatic_force_range.map(|e| (e[0], e[1])).unwrap_or(a.prismatic_force_range);
        a.moment_range = r.moment_range.map(|e| (e[0], e[1])).unwrap_or(a.moment_range);
        m.validate().map_err(schema)?;
        Ok(m)
    }

    /// The environment and, for corridors, the stance the corridor was
    /// built around.
    pub fn environment(&self, model: &RobotModel) -> Result<(Environment, Option<Stance>), CliError> {
        let e = &self.environment;
        let tunnel = e.tunnel.as_ref().map(|t| Tunnel {
            axis_point: v3(t.axis_point),
            axis_direction: v3(t.axis_direction),
            radius: t.radius,
        });
        if let Some(t) = &tunnel {
            if !(t.radius > 0.0) || t.axis_direction.norm() == 0.0 {
                return Err(schema("tunnel needs a positive radius and a nonzero axis"));
            }
        }
        let mut anchors: Vec<Anchor> = e
            .anchors
            .iter()
            .map(|a| Anchor { id: a.id, position: v3(a.position), limit_surface_ref: a.limit_surface_ref.clone() })
            .collect();
        let mut start = None;
        if let Some(c) = &e.corridor {
            let t = tunnel.as_ref().ok_or_else(|| schema("a corridor needs a tunnel"))?;
            if let Some(&(b, _)) = c.spares.iter().find(|(b, _)| *b >= N_BOOMS) {
                return Err(schema(format!("corridor spare names boom {b}; booms are 0..{N_BOOMS}")));
            }
            if !anchors.is_empty() {
                return Err(schema("a corridor cannot be combined with an explicit anchor list"));
            }
            let (generated, stance) =
                corridor(model, t, &c.spares).ok_or_else(|| schema("corridor booms do not reach the tunnel wall"))?;
            anchors = generated;
            start = Some(stance);
        }
        let collision = CollisionGeometry {
            tunnel,
            spheres: e.spheres.iter().map(|s| SphereObstacle { center: v3(s.center), radius: s.radius }).collect(),
            mesh: None,
        };
        let collision = match &e.mesh {
            Some(p) => collision.with_mesh(self.load_mesh(p)?),
            None => collision,
        };
        let env = Environment::new(anchors, collision).map_err(schema)?;
        Ok((env, start))
    }

    pub fn load_mesh(&self, p: &Path) -> Result<TriMesh, CliError> {
        let full = self.resolve(p);
        TriMesh::load(&full).map_err(|e| schema(format!("{}: {e}", full.display())))
    }

    pub fn grasp(&self) -> Result<GraspScenario, CliError> {
        let g = &self.grasp;
        let mut s = match g.preset {
            GraspPreset::FieldTest => GraspScenario::field_test(),
        };
        if let Some(a) = g.alpha_deg {
            s.alpha = a.map(f64::to_radians);
        }
        s.rock_radius = g.rock_radius.unwrap_or(s.rock_radius);
        s.wrist_offset = g.wrist_offset.unwrap_or(s.wrist_offset);
        s.link_length = g.link_length.unwrap_or(s.link_length);
        s.mu = g.mu.unwrap_or(s.mu);
        s.stiffness_normal = g.stiffness_normal.unwrap_or(s.stiffness_normal);
        s.stiffness_tangential = g.stiffness_tangential.unwrap_or(s.stiffness_tangential);
        s.stiffness_circumferential = g.stiffness_circumferential.unwrap_or(s.stiffness_circumferential);
        s.n_spines = g.n_spines.unwrap_or(s.n_spines);
        s.internal_force = g.internal_force.unwrap_or(s.internal_force);
        s.spine_strength = g.spine_strength.unwrap_or(s.spine_strength);
        s.validate().map_err(schema)?;
        Ok(s)
    }

    pub fn plan_block(&self) -> Result<&PlanBlock, CliError> {
        self.plan.as_ref().ok_or_else(|| schema("scenario has no [plan] table"))
    }

    pub fn cloud_format(&self, path: &Path) -> Result<CloudFormat, CliError> {
        self.perception
            .format
            .or_else(|| CloudFormat::from_path(path))
            .ok_or_else(|| schema(format!("cannot tell the format of {}; set perception.format", path.display())))
    }
}

impl StartBlock {
    pub fn stance(&self) -> Stance {
        let q = UnitQuaternion::from_euler_angles(0.0, 0.0, self.yaw_deg.to_radians());
        Stance { assignment: self.assignment, pose: BodyPose::new(v3(self.position), q) }
    }
}

impl GoalBlock {
    pub fn region(&self) -> GoalRegion {
        GoalRegion { center: v3(self.center), radius: self.radius }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Scenario::load(Path::new("s.toml"), "schema_version = 1\n[grasp]\nmu = 0.3\nmoo = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Schema(m) if m.contains("moo")));
    }

    #[test]
    fn wrong_version_is_rejected() {
        assert!(matches!(Scenario::load(Path::new("s.toml"), "schema_version = 2\n"), Err(CliError::Schema(_))));
    }

    #[test]
    fn grasp_overrides_apply_in_degrees() {
        let s = Scenario::load(Path::new("s.toml"), "schema_version = 1\n[grasp]\nalpha_deg = [30, 30, 30]\n").unwrap();
        let g = s.grasp().unwrap();
        assert!((g.alpha[0] - 30f64.to_radians()).abs() < 1e-15);
        assert_eq!(g.mu, GraspScenario::field_test().mu);
    }

    #[test]
    fn missing_referenced_file_is_a_schema_error() {
        let err = Scenario::load(Path::new("/nonexistent/s.toml"), "schema_version = 1\n[reach]\nmesh = \"m.obj\"\n").unwrap_err();
        assert!(matches!(err, CliError::Schema(m) if m.contains("does not exist")));
    }

    #[test]
    fn corridor_supplies_a_start() {
        let s = Scenario::load(
            Path::new("s.toml"),
            "schema_version = 1\n[robot]\npreset = \"short_reach\"\n[environment]\ntunnel = { axis_point = [0, 0, 0], axis_direction = [1, 0, 0], radius = 2.0 }\ncorridor = { spares = [[6, 1.0]] }\n",
        )
        .unwrap();
        let m = s.robot().unwrap();
        let (env, start) = s.environment(&m).unwrap();
        assert_eq!(env.anchors.len(), 9);
        assert!(start.is_some());
    }
}
