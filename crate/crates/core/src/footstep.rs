//! Contact-before-motion stance planning.
//!
//! A stance pairs every boom with a distinct anchor. Two stances are adjacent
//! when they differ in one boom, and the edge between them exists when a
//! single body pose holds both 8-stances and both intermediate 7-stances
//! (moving gripper held at its old and at its new anchor).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{UnitQuaternion, Vector3};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::geometry::Point3;
use crate::model::{
    inverse_joint_solve, pose_feasible, AnchorId, BodyPose, BoomState, Environment, FeasibilityCertificate, RobotModel,
    N_BOOMS,
};
use crate::rng::rng_for;

pub type StanceId = [AnchorId; N_BOOMS];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stance {
    pub assignment: StanceId,
    pub pose: BodyPose,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCost {
    #[default]
    Transitions,
    /// Body travel from one representative pose through the transition pose
    /// to the next.
    BodyTravel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    #[serde(default = "default_n_pose")]
    pub n_pose: usize,
    #[serde(default = "default_sigma_position")]
    pub sigma_position: f64,
    /// Degrees.
    #[serde(default = "default_sigma_orientation")]
    pub sigma_orientation: f64,
    #[serde(default)]
    pub cost: EdgeCost,
    #[serde(default = "default_max_vertices")]
    pub max_vertices: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_pose() -> usize {
    200
}
fn default_sigma_position() -> f64 {
    0.3
}
fn default_sigma_orientation() -> f64 {
    10.0
}
fn default_max_vertices() -> usize {
    20_000
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_pose: default_n_pose(),
            sigma_position: default_sigma_position(),
            sigma_orientation: default_sigma_orientation(),
            cost: EdgeCost::default(),
            max_vertices: default_max_vertices(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub center: Point3,
    pub radius: f64,
}

impl GoalRegion {
    pub fn contains(&self, p: &Point3) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

/// A certified edge. `certificates` holds the allocations for the four
/// checks in order: old 8-stance, held at old anchor, held at new anchor,
/// new 8-stance. A zero move carries only the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub boom: Option<usize>,
    pub from: Option<AnchorId>,
    pub to: Option<AnchorId>,
    pub pose: BodyPose,
    pub certificates: Vec<FeasibilityCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootstepPlan {
    pub stances: Vec<Stance>,
    pub transitions: Vec<Transition>,
    pub cost: f64,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("stances differ in more than one boom")]
    NotAdjacent,
    #[error("no pose satisfied all transition checks within the sample budget")]
    NoFeasiblePose,
    #[error("anchor {0} is not in the environment")]
    UnknownAnchor(AnchorId),
    #[error("anchor {0} is assigned to more than one boom")]
    RepeatedAnchor(AnchorId),
    #[error("start stance is infeasible: {0}")]
    StartInfeasible(String),
    #[error("no stance sequence reaches the goal")]
    NoPath,
    #[error("search exceeded {0} stances")]
    SearchLimit(usize),
}

/// Shared inputs for pose sampling. Candidate body positions are anchor
/// centroids shifted by the start stance's body-to-centroid offset, since
/// the body hangs below its anchors rather than at their centroid.
pub struct PlannerContext<'a> {
    pub model: &'a RobotModel,
    pub env: &'a Environment,
    pub cfg: PlannerConfig,
    offset: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
    positions: HashMap<AnchorId, Point3>,
}

impl<'a> PlannerContext<'a> {
    pub fn new(model: &'a RobotModel, env: &'a Environment, cfg: PlannerConfig, start: &Stance) -> Result<Self, PlanError> {
        let positions: HashMap<AnchorId, Point3> = env.anchors.iter().map(|a| (a.id, a.position)).collect();
        let mut ctx = Self {
            model,
            env,
            cfg,
            offset: Vector3::zeros(),
            orientation: start.pose.orientation,
            positions,
        };
        ctx.check_assignment(&start.assignment)?;
        ctx.offset = start.pose.position - ctx.centroid(&start.assignment);
        Ok(ctx)
    }

    fn check_assignment(&self, s: &StanceId) -> Result<(), PlanError> {
        for (i, id) in s.iter().enumerate() {
            if !self.positions.contains_key(id) {
                return Err(PlanError::UnknownAnchor(*id));
            }
            if s[..i].contains(id) {
                return Err(PlanError::RepeatedAnchor(*id));
            }
        }
        Ok(())
    }

    pub fn position(&self, id: AnchorId) -> Point3 {
        self.positions[&id]
    }

    fn centroid(&self, ids: &[AnchorId]) -> Point3 {
        ids.iter().map(|id| self.position(*id)).sum::<Point3>() / ids.len() as f64
    }

    /// Boom states of `s` with `held` (if any) detached at its anchor.
    pub fn boom_states(&self, s: &StanceId, held: Option<usize>) -> [BoomState; N_BOOMS] {
        std::array::from_fn(|i| {
            let p = self.position(s[i]);
            if held == Some(i) {
                BoomState::Held(p)
            } else {
                BoomState::Attached(p)
            }
        })
    }

    /// The sampled pose sequence: shifted centroid of `ids`, then
    /// `n_pose` Gaussian perturbations of it drawn from a stream keyed by
    /// `key`.
    fn candidates(&self, ids: &[AnchorId], key: &[u64]) -> impl Iterator<Item = BodyPose> + '_ {
        let base = BodyPose::new(self.centroid(ids) + self.offset, self.orientation);
        let mut rng = rng_for(self.cfg.seed, key);
        let pos = Normal::new(0.0, self.cfg.sigma_position).expect("positive sigma");
        let rot = Normal::new(0.0, self.cfg.sigma_orientation.to_radians()).expect("positive sigma");
        std::iter::once(base).chain((0..self.cfg.n_pose).map(move |_| {
            let dp = Vector3::new(pos.sample(&mut rng), pos.sample(&mut rng), pos.sample(&mut rng));
            let dr = Vector3::new(rot.sample(&mut rng), rot.sample(&mut rng), rot.sample(&mut rng));
            BodyPose::new(base.position + dp, UnitQuaternion::from_scaled_axis(dr) * base.orientation)
        }))
    }

    /// First sampled pose that holds stance `s`.
    pub fn representative_pose(&self, s: &StanceId) -> Option<BodyPose> {
        let key: Vec<u64> = std::iter::once(0).chain(s.iter().map(|&a| a as u64)).collect();
        self.candidates(s, &key)
            .find(|p| pose_feasible(self.model, p, &self.boom_states(s, None), &self.env.collision).is_ok())
    }
}

fn differing_boom(a: &StanceId, b: &StanceId) -> Result<Option<usize>, PlanError> {
    let diff: Vec<usize> = (0..N_BOOMS).filter(|&i| a[i] != b[i]).collect();
    match diff.len() {
        0 => Ok(None),
        1 => Ok(Some(diff[0])),
        _ => Err(PlanError::NotAdjacent),
    }
}

/// Runs the four checks at one pose; returns the certificates or `None` at
/// the first failure.
pub fn certify_transition_pose(
    ctx: &PlannerContext,
    a: &StanceId,
    b: &StanceId,
    pose: &BodyPose,
) -> Result<Option<Vec<FeasibilityCertificate>>, PlanError> {
    let moving = differing_boom(a, b)?;
    let checks: Vec<[BoomState; N_BOOMS]> = match moving {
        None => vec![ctx.boom_states(a, None)],
        Some(i) => vec![
            ctx.boom_states(a, None),
            ctx.boom_states(a, Some(i)),
            ctx.boom_states(b, Some(i)),
            ctx.boom_states(b, None),
        ],
    };
    let mut certs = Vec::with_capacity(checks.len());
    for booms in &checks {
        match pose_feasible(ctx.model, pose, booms, &ctx.env.collision) {
            Ok(c) => certs.push(c),
            Err(_) => return Ok(None),
        }
    }
    Ok(Some(certs))
}

/// Searches for a pose certifying the move from `a` to `b`. The stances'
/// representative poses are tried first, then the shifted centroid of the
/// union of their anchors and its perturbations.
pub fn transition_feasible(ctx: &PlannerContext, a: &Stance, b: &Stance) -> Result<Transition, PlanError> {
    let moving = differing_boom(&a.assignment, &b.assignment)?;
    let mut union: Vec<AnchorId> = a.assignment.to_vec();
    if let Some(i) = moving {
        union.push(b.assignment[i]);
    }
    let key: Vec<u64> = std::iter::once(1)
        .chain(a.assignment.iter().chain(&b.assignment).map(|&x| x as u64))
        .collect();
    let seeds = [a.pose, b.pose];
    for pose in seeds.into_iter().chain(ctx.candidates(&union, &key)) {
        if let Some(certificates) = certify_transition_pose(ctx, &a.assignment, &b.assignment, &pose)? {
            return Ok(Transition {
                boom: moving,
                from: moving.map(|i| a.assignment[i]),
                to: moving.map(|i| b.assignment[i]),
                pose,
                certificates,
            });
        }
    }
    Err(PlanError::NoFeasiblePose)
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub to: StanceId,
    pub transition: Transition,
}

/// Lazily expanded stance graph. Vertices are stances with a representative
/// pose; a vertex's out-edges are certified (in parallel) on first request.
pub struct StanceGraph<'a> {
    pub ctx: PlannerContext<'a>,
    pub exec: Exec,
    poses: HashMap<StanceId, BodyPose>,
    edges: HashMap<StanceId, Vec<Edge>>,
    pub start: StanceId,
}

pub fn build_stance_graph<'a>(
    model: &'a RobotModel,
    env: &'a Environment,
    start: &Stance,
    cfg: PlannerConfig,
    exec: Exec,
) -> Result<StanceGraph<'a>, PlanError> {
    let ctx = PlannerContext::new(model, env, cfg, start)?;
    pose_feasible(model, &start.pose, &ctx.boom_states(&start.assignment, None), &env.collision)
        .map_err(|v| PlanError::StartInfeasible(v.to_string()))?;
    let mut poses = HashMap::new();
    poses.insert(start.assignment, start.pose);
    Ok(StanceGraph {
        ctx,
        exec,
        poses,
        edges: HashMap::new(),
        start: start.assignment,
    })
}

impl<'a> StanceGraph<'a> {
    pub fn stance(&self, id: &StanceId) -> Option<Stance> {
        self.poses.get(id).map(|p| Stance { assignment: *id, pose: *p })
    }

    pub fn n_vertices(&self) -> usize {
        self.poses.len()
    }

    pub fn n_expanded(&self) -> usize {
        self.edges.len()
    }

    /// Single-boom reassignments to free anchors that the boom can reach,
    /// within joint limits, from the representative pose. Ordered by boom,
    /// then anchor id.
    pub fn candidate_moves(&self, id: &StanceId) -> Vec<StanceId> {
        let pose = self.poses[id];
        let mut free: Vec<AnchorId> = self
            .ctx
            .env
            .anchors
            .iter()
            .map(|a| a.id)
            .filter(|a| !id.contains(a))
            .collect();
        free.sort_unstable();
        let mut out = Vec::new();
        for boom in 0..N_BOOMS {
            for &anchor in &free {
                if inverse_joint_solve(self.ctx.model, &pose, &self.ctx.position(anchor), boom).is_ok() {
                    let mut next = *id;
                    next[boom] = anchor;
                    out.push(next);
                }
            }
        }
        out
    }

    /// Certified out-edges of a known vertex.
    pub fn neighbors(&mut self, id: &StanceId) -> &[Edge] {
        if !self.edges.contains_key(id) {
            let from = self.stance(id).expect("vertex is known");
            let moves = self.candidate_moves(id);
            let ctx = &self.ctx;
            let known = &self.poses;
            let results = self.exec.map_slice(&moves, |next| {
                let pose = match known.get(next) {
                    Some(p) => *p,
                    None => ctx.representative_pose(next)?,
                };
                let to = Stance { assignment: *next, pose };
                transition_feasible(ctx, &from, &to).ok().map(|t| (to, t))
            });
            let mut edges = Vec::new();
            for (to, transition) in results.into_iter().flatten() {
                self.poses.entry(to.assignment).or_insert(to.pose);
                edges.push(Edge { to: to.assignment, transition });
            }
            self.edges.insert(*id, edges);
        }
        &self.edges[id]
    }

    fn edge_cost(&self, from: &StanceId, e: &Edge) -> f64 {
        match self.ctx.cfg.cost {
            EdgeCost::Transitions => 1.0,
            EdgeCost::BodyTravel => {
                let p = e.transition.pose.position;
                (p - self.poses[from].position).norm() + (self.poses[&e.to].position - p).norm()
            }
        }
    }

    fn is_goal(&self, id: &StanceId, goal: &GoalRegion) -> bool {
        goal.contains(&self.poses[id].position)
    }
}

#[derive(PartialEq)]
struct Queued {
    cost: f64,
    id: StanceId,
}

impl Eq for Queued {}

impl Ord for Queued {
    // reversed: BinaryHeap pops the cheapest, then the lexicographically
    // smallest stance
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the lazily expanded graph from its start vertex to the first
/// settled stance whose representative pose lies in `goal`.
pub fn plan_footsteps(graph: &mut StanceGraph, goal: &GoalRegion) -> Result<FootstepPlan, PlanError> {
    let start = graph.start;
    let mut dist: HashMap<StanceId, f64> = HashMap::from([(start, 0.0)]);
    let mut parent: HashMap<StanceId, (StanceId, Transition)> = HashMap::new();
    let mut settled = std::collections::HashSet::new();
    let mut heap = BinaryHeap::from([Queued { cost: 0.0, id: start }]);
    while let Some(Queued { cost, id }) = heap.pop() {
        if !settled.insert(id) {
            continue;
        }
        if graph.is_goal(&id, goal) {
            return Ok(reconstruct(graph, &parent, id, cost));
        }
        if settled.len() > graph.ctx.cfg.max_vertices {
            return Err(PlanError::SearchLimit(graph.ctx.cfg.max_vertices));
        }
        let edges = graph.neighbors(&id).to_vec();
        for e in edges {
            if settled.contains(&e.to) {
                continue;
            }
            let c = cost + graph.edge_cost(&id, &e);
            if dist.get(&e.to).map_or(true, |&d| c < d) {
                dist.insert(e.to, c);
                parent.insert(e.to, (id, e.transition.clone()));
                heap.push(Queued { cost: c, id: e.to });
            }
        }
    }
    Err(PlanError::NoPath)
}

fn reconstruct(
    graph: &StanceGraph,
    parent: &HashMap<StanceId, (StanceId, Transition)>,
    goal: StanceId,
    cost: f64,
) -> FootstepPlan {
    let mut ids = vec![goal];
    let mut transitions = Vec::new();
    let mut cur = goal;
    while let Some((prev, t)) = parent.get(&cur) {
        transitions.push(t.clone());
        ids.push(*prev);
        cur = *prev;
    }
    ids.reverse();
    transitions.reverse();
    FootstepPlan {
        stances: ids.iter().map(|id| graph.stance(id).expect("known vertex")).collect(),
        transitions,
        cost,
    }
}
