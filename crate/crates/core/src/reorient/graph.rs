use std::collections::VecDeque;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feasibility::{check_rotation_feasibility, rotation_capacity, FeasibilityOptions, Witness};
use super::{rotation_spec, VehicleParams};
use crate::error::{Error, Result};
use crate::geometry::{face_stability, FaceKind, FaceStability, StructureModel};

/// A feasible rotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceEdge {
    pub from: usize,
    pub to: usize,
    /// Largest mass addable at the centre of mass, kg.
    pub capacity: f64,
    pub witness: Witness,
    /// Worst witness violation under the exact constraints.
    pub violation: f64,
}

/// Capacity of every neighbouring rotation, feasible or not.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationCapacity {
    pub from: usize,
    pub to: usize,
    /// kg; `None` when infeasible for any non-negative vehicle mass.
    pub capacity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceGraph {
    pub faces: usize,
    pub edges: Vec<FaceEdge>,
    pub capacities: Vec<RotationCapacity>,
    pub goal_faces: Vec<usize>,
    /// Non-goal faces without any outgoing edge.
    pub stranded: Vec<usize>,
}

/// All-string face whose outward normal is most opposed to the thrust
/// axis (lowest index on ties) and the face opposite to it.
pub fn default_goal_faces(model: &StructureModel, vehicle: &VehicleParams) -> Result<Vec<usize>> {
    let stability = face_stability(model)?;
    let thrust = vehicle.mount_rotation.inverse() * Vector3::z();
    let candidates: Vec<usize> = (0..model.faces.len())
        .filter(|&f| model.faces[f].kind == FaceKind::AllString && stability[f] == FaceStability::Stable)
        .collect();
    let first = candidates
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let (da, db) = (model.faces[a].normal.dot(&thrust), model.faces[b].normal.dot(&thrust));
            if (da - db).abs() <= 1e-9 { a.cmp(&b) } else { da.total_cmp(&db) }
        })
        .ok_or_else(|| Error::InvalidModel("no stable all-string face".into()))?;
    let n = model.faces[first].normal;
    let opposite = candidates
        .iter()
        .copied()
        .filter(|&f| f != first)
        .min_by(|&a, &b| (model.faces[a].normal + n).norm().total_cmp(&(model.faces[b].normal + n).norm()))
        .ok_or_else(|| Error::InvalidModel("no opposite goal face".into()))?;
    let mut goals = vec![first, opposite];
    goals.sort_unstable();
    Ok(goals)
}

fn neighbor_pairs(model: &StructureModel) -> Vec<(usize, usize)> {
    (0..model.faces.len())
        .flat_map(|a| model.face_neighbors(a).into_iter().map(move |b| (a, b)))
        .collect()
}

/// Feasibility and payload capacity of every neighbouring rotation.
pub fn build_face_graph(
    model: &StructureModel,
    vehicle: &VehicleParams,
    mu: f64,
    goal_faces: &[usize],
    opts: &FeasibilityOptions,
) -> Result<FaceGraph> {
    if goal_faces.is_empty() || goal_faces.iter().any(|&g| g >= model.faces.len()) {
        return Err(Error::InvalidInput("goal faces must be non-empty valid face indices".into()));
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidInput("friction coefficient must be non-negative".into()));
    }
    let pairs = neighbor_pairs(model);
    let results: Vec<Result<(RotationCapacity, Option<FaceEdge>)>> = pairs
        .par_iter()
        .map(|&(from, to)| {
            let spec = rotation_spec(model, &vehicle.mount_rotation, from, to)?;
            let capacity = rotation_capacity(&spec, vehicle, mu, opts)?;
            let feas = check_rotation_feasibility(&spec, vehicle, mu, opts)?;
            let edge = match (feas.witness, feas.violation) {
                (Some(witness), Some(violation)) => Some(FaceEdge {
                    from,
                    to,
                    capacity: capacity.unwrap_or(0.0).max(0.0),
                    witness,
                    violation,
                }),
                _ => None,
            };
            Ok((RotationCapacity { from, to, capacity }, edge))
        })
        .collect();
    let mut edges = Vec::new();
    let mut capacities = Vec::new();
    for r in results {
        let (c, e) = r?;
        capacities.push(c);
        edges.extend(e);
    }
    let stranded = (0..model.faces.len())
        .filter(|f| !goal_faces.contains(f) && !edges.iter().any(|e| e.from == *f))
        .collect();
    let mut goal_faces = goal_faces.to_vec();
    goal_faces.sort_unstable();
    goal_faces.dedup();
    Ok(FaceGraph { faces: model.faces.len(), edges, capacities, goal_faces, stranded })
}

/// Shortest rotation sequences to the nearest goal face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReorientPlan {
    /// Faces visited after the start, ending at a goal; empty for goal faces;
    /// `None` if unreachable.
    pub paths: Vec<Option<Vec<usize>>>,
    pub unreachable: Vec<usize>,
}

impl ReorientPlan {
    pub fn length(&self, face: usize) -> Option<usize> {
        self.paths[face].as_ref().map(Vec::len)
    }
}

/// Distance to the goal set over the given directed edges.
fn goal_distances(faces: usize, edges: &[(usize, usize)], goals: &[usize]) -> Vec<Option<usize>> {
    let mut incoming = vec![Vec::new(); faces];
    for &(a, b) in edges {
        incoming[b].push(a);
    }
    let mut dist = vec![None; faces];
    let mut queue = VecDeque::new();
    for &g in goals {
        dist[g] = Some(0);
        queue.push_back(g);
    }
    while let Some(f) = queue.pop_front() {
        let d = dist[f].unwrap_or(0);
        for &p in &incoming[f] {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

/// Breadth-first shortest paths; ties go to the lowest face index.
pub fn plan_paths(graph: &FaceGraph) -> ReorientPlan {
    let edges: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.from, e.to)).collect();
    let dist = goal_distances(graph.faces, &edges, &graph.goal_faces);
    let paths: Vec<Option<Vec<usize>>> = (0..graph.faces)
        .map(|start| {
            dist[start]?;
            let mut path = Vec::new();
            let mut f = start;
            while dist[f] != Some(0) {
                let d = dist[f]?;
                f = edges
                    .iter()
                    .filter(|&&(a, b)| a == f && dist[b] == Some(d - 1))
                    .map(|&(_, b)| b)
                    .min()?;
                path.push(f);
            }
            Some(path)
        })
        .collect();
    let unreachable = (0..graph.faces).filter(|&f| paths[f].is_none()).collect();
    ReorientPlan { paths, unreachable }
}

/// True when every face reaches the goal set using the given edges.
pub fn reaches_goals(faces: usize, edges: &[(usize, usize)], goals: &[usize]) -> bool {
    goal_distances(faces, edges, goals).iter().all(Option::is_some)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadMargin {
    /// Largest added mass keeping every face connected to the goals, kg;
    /// `None` if some face is stranded for any mass.
    pub margin: Option<f64>,
    /// Rotation whose capacity sets the margin.
    pub bottleneck: Option<(usize, usize)>,
    pub zero_sum: bool,
}

/// Maximin bottleneck over rotation capacities: the largest threshold for
/// which the rotations at or above it still connect every face to the goals.
pub fn payload_margin(
    model: &StructureModel,
    vehicle: &VehicleParams,
    mu: f64,
    goal_faces: &[usize],
    opts: &FeasibilityOptions,
) -> Result<PayloadMargin> {
    let graph = build_face_graph(model, vehicle, mu, goal_faces, opts)?;
    let caps: Vec<(usize, usize, f64)> =
        graph.capacities.iter().filter_map(|c| Some((c.from, c.to, c.capacity?))).collect();
    let mut levels: Vec<f64> = caps.iter().map(|c| c.2).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let ok = |t: f64| {
        let e: Vec<(usize, usize)> = caps.iter().filter(|c| c.2 >= t).map(|c| (c.0, c.1)).collect();
        reaches_goals(graph.faces, &e, &graph.goal_faces)
    };
    let none = PayloadMargin { margin: None, bottleneck: None, zero_sum: opts.zero_sum };
    if levels.is_empty() {
        let trivially = reaches_goals(graph.faces, &[], &graph.goal_faces);
        return Ok(if trivially { PayloadMargin { margin: Some(f64::INFINITY), ..none } } else { none });
    }
    if !ok(levels[0]) {
        return Ok(none);
    }
    // Largest index whose level keeps the goals reachable (monotone in t).
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if ok(levels[mid]) { lo = mid } else { hi = mid - 1 }
    }
    let margin = levels[lo];
    let bottleneck = caps.iter().find(|c| c.2 == margin).map(|c| (c.0, c.1));
    Ok(PayloadMargin { margin: Some(margin), bottleneck, zero_sum: opts.zero_sum })
}
