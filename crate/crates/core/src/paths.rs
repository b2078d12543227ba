//! Boundary-value extremals: polygonal paths from a source to a target
//! through obstacle corners, with stationary segment times and their action.

use crate::error::{Error, Result};
use crate::geometry::{strictly_between, turn_sign, ConstraintSet, Vec2, EPS_ACTIVE};

/// Which bends at a corner make a polygon admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathRule {
    /// Locally shortest polygons: a bend is admitted only where the obstacle
    /// lies inside the turn, so the path cannot be straightened.
    #[default]
    Taut,
    /// Every path engages at least one corner, bending in any direction.
    /// The direct segment is used only in scenes without corners.
    CornerContact,
}

impl PathRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathRule::Taut => "taut",
            PathRule::CornerContact => "corner_contact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "taut" => Some(PathRule::Taut),
            "corner_contact" => Some(PathRule::CornerContact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalPath {
    /// `q_0 = source, …, q_N = target`; interior vertices are corners.
    pub vertices: Vec<Vec2>,
    /// Corner indices of the interior vertices.
    pub corners: Vec<usize>,
    /// Durations of the `N` segments; empty until times are allocated.
    pub segment_times: Vec<f64>,
    pub length: f64,
    /// Action under `segment_times`, zero until times are allocated.
    pub action: f64,
}

impl PolygonalPath {
    pub fn new(vertices: Vec<Vec2>, corners: Vec<usize>) -> Self {
        let length = vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Self { vertices, corners, segment_times: Vec::new(), length, action: 0.0 }
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn n_segments(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn n_corners(&self) -> usize {
        self.corners.len()
    }
}

/// Source, corners and target with their mutually visible pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityGraph {
    /// Node 0 is the source, the last node the target, the rest are corners.
    pub nodes: Vec<Vec2>,
    pub corner_of_node: Vec<Option<usize>>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl VisibilityGraph {
    pub fn build(cs: &ConstraintSet, src: &Vec2, dst: &Vec2) -> Self {
        let mut nodes = vec![*src];
        let mut corner_of_node = vec![None];
        for (i, c) in cs.corners().iter().enumerate() {
            if (c.position - src).norm() <= EPS_ACTIVE || (c.position - dst).norm() <= EPS_ACTIVE {
                continue;
            }
            nodes.push(c.position);
            corner_of_node.push(Some(i));
        }
        nodes.push(*dst);
        corner_of_node.push(None);
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if cs.segment_feasible(&nodes[i], &nodes[j]) {
                    let d = (nodes[j] - nodes[i]).norm();
                    adjacency[i].push((j, d));
                    adjacency[j].push((i, d));
                }
            }
        }
        Self { nodes, corner_of_node, adjacency }
    }

    pub fn target(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Whether the bend `prev → at → next` at corner `corner` is admitted by `rule`.
pub fn bend_admissible(cs: &ConstraintSet, corner: usize, prev: &Vec2, at: &Vec2, next: &Vec2, rule: PathRule) -> bool {
    if !cs.corners()[corner].same_sector(&(prev - at), &(next - at)) {
        return false;
    }
    match rule {
        PathRule::CornerContact => true,
        PathRule::Taut => {
            let turn = turn_sign(prev, at, next);
            let u = at - prev;
            let w = next - at;
            if turn.abs() <= 1e-12 * u.norm() * w.norm() {
                return false;
            }
            let back = -u;
            cs.corners()[corner]
                .edge_directions
                .iter()
                .any(|e| strictly_between(&w, &back, e, turn > 0.0))
        }
    }
}

/// All admissible simple polygons from `src` to `dst` with at most
/// `max_corners` interior corners, sorted by length.
pub fn enumerate_paths(
    cs: &ConstraintSet,
    src: &Vec2,
    dst: &Vec2,
    max_corners: usize,
    rule: PathRule,
) -> Result<Vec<PolygonalPath>> {
    let graph = VisibilityGraph::build(cs, src, dst);
    let target = graph.target();
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut stack = vec![0usize];
    let mut visited = vec![false; graph.nodes.len()];
    visited[0] = true;
    extend(cs, &graph, rule, max_corners, &mut stack, &mut visited, &mut found);

    let scene_has_corners = !cs.corners().is_empty();
    let mut paths: Vec<PolygonalPath> = found
        .into_iter()
        .filter(|nodes| !(rule == PathRule::CornerContact && scene_has_corners && nodes.len() == 2))
        .map(|nodes| {
            let vertices = nodes.iter().map(|&k| graph.nodes[k]).collect();
            let corners = nodes[1..nodes.len() - 1].iter().filter_map(|&k| graph.corner_of_node[k]).collect();
            PolygonalPath::new(vertices, corners)
        })
        .collect();
    debug_assert!(paths.iter().all(|p| p.vertices.last() == Some(&graph.nodes[target])));
    paths.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| a.corners.cmp(&b.corners)));
    paths.dedup_by(|a, b| a.vertices == b.vertices);
    if paths.is_empty() {
        return Err(Error::NoPath);
    }
    Ok(paths)
}

fn extend(
    cs: &ConstraintSet,
    graph: &VisibilityGraph,
    rule: PathRule,
    max_corners: usize,
    stack: &mut Vec<usize>,
    visited: &mut [bool],
    found: &mut Vec<Vec<usize>>,
) {
    let last = *stack.last().unwrap();
    let target = graph.target();
    let corners_so_far = stack.len() - 1;
    for &(next, _) in &graph.adjacency[last] {
        if visited[next] {
            continue;
        }
        if next != target && corners_so_far >= max_corners {
            continue;
        }
        // the bend at `last` is decided once its successor is known
        if stack.len() >= 2 {
            let prev = graph.nodes[stack[stack.len() - 2]];
            let corner = graph.corner_of_node[last].expect("interior nodes are corners");
            if !bend_admissible(cs, corner, &prev, &graph.nodes[last], &graph.nodes[next], rule) {
                continue;
            }
        }
        if next == target {
            let mut p = stack.clone();
            p.push(target);
            found.push(p);
            continue;
        }
        stack.push(next);
        visited[next] = true;
        extend(cs, graph, rule, max_corners, stack, visited, found);
        visited[next] = false;
        stack.pop();
    }
}

/// Constant-speed segment times `Δt_i = T L_i / L`, the stationary point of
/// the action at fixed total time. The last entry absorbs rounding so the
/// times sum to `T` exactly.
pub fn allocate_times(path: &PolygonalPath, total_time: f64, mass: f64) -> Result<PolygonalPath> {
    if total_time <= 0.0 {
        return Err(Error::InvalidArgument("total time must be positive".into()));
    }
    let n = path.n_segments();
    if n == 0 {
        return Err(Error::InvalidArgument("path has no segments".into()));
    }
    let lengths = path.segment_lengths();
    let total: f64 = lengths.iter().sum();
    let mut times = Vec::with_capacity(n);
    if total == 0.0 {
        if n > 1 {
            return Err(Error::ZeroLength { segments: n });
        }
        times.push(total_time);
    } else {
        let mut acc = 0.0;
        for l in &lengths[..n - 1] {
            let dt = total_time * l / total;
            acc += dt;
            times.push(dt);
        }
        times.push(total_time - acc);
    }
    let mut out = path.clone();
    out.segment_times = times;
    out.action = path_action(&out, mass);
    Ok(out)
}

/// `(m/2) Σ |q_i - q_{i-1}|² / Δt_i` under the stored segment times.
pub fn path_action(path: &PolygonalPath, mass: f64) -> f64 {
    path.segment_lengths()
        .iter()
        .zip(&path.segment_times)
        .map(|(l, dt)| if *l == 0.0 { 0.0 } else { l * l / dt })
        .sum::<f64>()
        * 0.5
        * mass
}
