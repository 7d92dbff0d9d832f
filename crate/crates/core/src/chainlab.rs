//! Brute-force `(ε, T)`-chain oracle on a lattice.
//!
//! Nodes are the points of a regular grid in a box. For every node `x` and
//! every control `u` of a finite family, the RK4 endpoint `z = φ(T, x, u)` is
//! computed; if `z` lies in the box there is an edge `x → y` to every node
//! with `‖z - y‖ < ε`. Paths in this graph are controlled `(ε, T)`-chains with
//! all jump times equal to `T`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::PCWControl;
use crate::convex::AffineSetSum;
use crate::linalg::spectral_norm;
use crate::ode::{rk4_error_estimate, rk4_flow, rk4_integrate, AffineMap};
use crate::spectral::{induced_block, matrix_exp, SpectralSplit};
use crate::system::{ControlRange, LinearSystem};
use crate::{Error, Result};

/// Largest admissible node count.
pub const MAX_NODES: usize = 1_000_000;
/// Initial RK4 steps per jump.
pub const DEFAULT_STEPS: usize = 256;
const MAX_STEPS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(box_lo: Vec<f64>, box_hi: Vec<f64>, spacing: f64) -> Result<Self> {
        let g = Self {
            box_lo,
            box_hi,
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.box_lo.is_empty() || self.box_lo.len() != self.box_hi.len() {
            return Err(Error::InvalidGrid("box bounds must be nonempty and of equal length".into()));
        }
        if self.box_lo.iter().chain(&self.box_hi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("box bounds must be finite".into()));
        }
        if self.box_lo.iter().zip(&self.box_hi).any(|(l, h)| l >= h) {
            return Err(Error::InvalidGrid("box_lo must be below box_hi".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidGrid("spacing must be positive".into()));
        }
        let mut total: f64 = 1.0;
        for (l, h) in self.box_lo.iter().zip(&self.box_hi) {
            total *= ((h - l) / self.spacing + 1e-9).floor() + 1.0;
        }
        if total > MAX_NODES as f64 {
            return Err(Error::GridTooLarge(total.min(usize::MAX as f64) as usize));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.box_lo.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.box_lo
            .iter()
            .zip(&self.box_hi)
            .map(|(l, h)| ((h - l) / self.spacing + 1e-9).floor() as usize + 1)
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.counts().iter().product()
    }

    /// Lattice multi-index of a node (row-major, last axis fastest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let counts = self.counts();
        let mut out = vec![0; counts.len()];
        for k in (0..counts.len()).rev() {
            out[k] = idx % counts[k];
            idx /= counts[k];
        }
        out
    }

    pub fn rank(&self, multi: &[usize]) -> usize {
        let counts = self.counts();
        multi.iter().zip(&counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        self.box_lo[axis] + i as f64 * self.spacing
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.coord(k, i))
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.node_count()).map(|i| self.node(i)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.box_lo.iter().zip(&self.box_hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Node closest to `x`, if `x` lies in the box.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() || !self.contains(x) {
            return None;
        }
        let counts = self.counts();
        let multi: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(k, v)| (((v - self.box_lo[k]) / self.spacing).round() as usize).min(counts[k] - 1))
            .collect();
        Some(self.rank(&multi))
    }

    /// Euclidean distance from `x` to the box boundary (0 outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.box_lo.iter().zip(&self.box_hi))
            .map(|(v, (l, h))| (v - l).min(h - v))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { self.box_hi[i] } else { self.box_lo[i] })
                    .collect()
            })
            .collect()
    }

    /// Nodes with `‖node - z‖ < eps`, in increasing index order.
    fn nodes_near(&self, z: &[f64], eps: f64, counts: &[usize], out: &mut Vec<u32>) {
        let n = self.dim();
        let mut lo = vec![0usize; n];
        let mut hi = vec![0usize; n];
        for k in 0..n {
            let a = ((z[k] - eps - self.box_lo[k]) / self.spacing).ceil();
            let b = ((z[k] + eps - self.box_lo[k]) / self.spacing).floor();
            if b < 0.0 || a > (counts[k] - 1) as f64 {
                return;
            }
            lo[k] = a.max(0.0) as usize;
            hi[k] = (b as usize).min(counts[k] - 1);
            if lo[k] > hi[k] {
                return;
            }
        }
        let mut cur = lo.clone();
        loop {
            let d2: f64 = (0..n)
                .map(|k| {
                    let diff = self.coord(k, cur[k]) - z[k];
                    diff * diff
                })
                .sum();
            if d2.sqrt() < eps {
                out.push(self.rank(&cur) as u32);
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
            }
        }
    }
}

/// Which controls make up the default family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ControlFamily {
    /// Constant controls at the vertices of `U`, at 0 and at vertex midpoints.
    #[default]
    Constant,
    /// The constant family plus every two-piece control switching at `T/2`
    /// between two distinct constant values.
    TwoPiece,
    /// The constant family plus constants on a uniform lattice of `U` with
    /// the given number of levels per axis (bounding box, clipped to `U`).
    Lattice(usize),
}

fn canonical(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| (x + 0.0).to_bits()).collect()
}

/// Constant values of the default family: vertices, 0, vertex midpoints;
/// duplicates removed, first occurrence kept.
pub fn default_control_values(range: &ControlRange) -> Vec<Vec<f64>> {
    let verts = range.vertices();
    let m = range.dim();
    let mut vals: Vec<Vec<f64>> = verts.clone();
    vals.push(vec![0.0; m]);
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            vals.push(verts[i].iter().zip(&verts[j]).map(|(a, b)| 0.5 * (a + b)).collect());
        }
    }
    let mut seen = std::collections::HashSet::new();
    vals.into_iter()
        .map(|v| v.iter().map(|x| x + 0.0).collect::<Vec<f64>>())
        .filter(|v| seen.insert(canonical(v)))
        .collect()
}

/// Points of a uniform lattice with `levels` points per axis on the
/// bounding box of `U`, kept if they lie in `U`.
pub fn lattice_control_values(range: &ControlRange, levels: usize) -> Vec<Vec<f64>> {
    let verts = range.vertices();
    let m = range.dim();
    if levels < 2 || m == 0 {
        return vec![vec![0.0; m]];
    }
    let lo: Vec<f64> = (0..m).map(|i| verts.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..m).map(|i| verts.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let total = levels.saturating_pow(m as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; m];
            for k in (0..m).rev() {
                let i = idx % levels;
                idx /= levels;
                p[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (levels - 1) as f64;
            }
            p
        })
        .filter(|p| range.contains(p, 1e-12))
        .collect()
}

pub fn default_controls(range: &ControlRange, jump_t: f64, family: ControlFamily) -> Vec<PCWControl> {
    let mut vals = default_control_values(range);
    if let ControlFamily::Lattice(levels) = family {
        let mut seen: std::collections::HashSet<Vec<u64>> = vals.iter().map(|v| canonical(v)).collect();
        for v in lattice_control_values(range, levels) {
            let v: Vec<f64> = v.iter().map(|x| x + 0.0).collect();
            if seen.insert(canonical(&v)) {
                vals.push(v);
            }
        }
    }
    let mut out: Vec<PCWControl> = vals.iter().cloned().map(PCWControl::constant).collect();
    if family == ControlFamily::TwoPiece {
        for a in &vals {
            for b in &vals {
                if a != b {
                    out.push(PCWControl {
                        breakpoints: vec![0.5 * jump_t],
                        values: vec![a.clone(), b.clone()],
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// (node, control) pairs whose endpoint left the box.
    pub escapes: usize,
    /// Step-doubling RK4 error estimate at the box corners and the origin.
    pub integration_error: f64,
}

/// Lattice chain graph. `reversed` graphs describe chains of the
/// time-reversed system: an edge `y → x` there is an edge `x → y` of the
/// forward system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGraph {
    pub system: LinearSystem,
    pub grid: GridSpec,
    pub controls: Vec<PCWControl>,
    pub epsilon: f64,
    pub jump_t: f64,
    pub steps: usize,
    pub reversed: bool,
    /// Sorted successor lists indexed by lattice rank.
    pub edges: Vec<Vec<u32>>,
    pub stats: GraphStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GraphOptions {
    pub family: ControlFamily,
    /// RK4 steps per jump; `None` chooses them from the error estimate.
    pub steps: Option<usize>,
}

fn check_inputs(
    sys: &LinearSystem,
    grid: &GridSpec,
    controls: &[PCWControl],
    epsilon: f64,
    jump_t: f64,
) -> Result<()> {
    grid.validate()?;
    if grid.dim() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.state_dim(),
            got: grid.dim(),
        });
    }
    if !(epsilon > 0.5 * grid.spacing) || !epsilon.is_finite() {
        return Err(Error::EpsilonTooSmall {
            epsilon,
            spacing: grid.spacing,
        });
    }
    if !(jump_t > 0.0 && jump_t.is_finite()) {
        return Err(Error::InvalidGrid("jump time must be positive".into()));
    }
    if controls.is_empty() {
        return Err(Error::InvalidControl("empty control family".into()));
    }
    for u in controls {
        u.validate_in(&sys.range)?;
    }
    Ok(())
}

/// Smallest step count `N = 256·2^k` with step-doubling error at most
/// `epsilon/10` for every control, probed at the box corners and origin.
pub fn choose_steps(sys: &LinearSystem, grid: &GridSpec, controls: &[PCWControl], epsilon: f64, jump_t: f64) -> (usize, f64) {
    let mut probes = grid.corners();
    probes.push(vec![0.0; grid.dim()]);
    let mut steps = DEFAULT_STEPS;
    loop {
        let err = controls
            .iter()
            .map(|u| rk4_error_estimate(sys, u, jump_t, steps, &probes))
            .fold(0.0, f64::max);
        if err <= epsilon / 10.0 || steps >= MAX_STEPS {
            if err > epsilon / 10.0 {
                log::warn!("RK4 error estimate {err:e} exceeds epsilon/10 at {steps} steps");
            }
            return (steps, err);
        }
        steps *= 2;
    }
}

fn integration_error(sys: &LinearSystem, grid: &GridSpec, controls: &[PCWControl], jump_t: f64, steps: usize) -> f64 {
    let mut probes = grid.corners();
    probes.push(vec![0.0; grid.dim()]);
    controls
        .iter()
        .map(|u| rk4_error_estimate(sys, u, jump_t, steps, &probes))
        .fold(0.0, f64::max)
}

/// Adjacency from per-control endpoint maps: `x → y` iff `‖F(x) - y‖ < ε`
/// and `F(x)` in the box. Returns `(edges, escapes)`.
fn lattice_edges(grid: &GridSpec, flows: &[AffineMap], epsilon: f64) -> (Vec<Vec<u32>>, usize) {
    let counts = grid.counts();
    let results: Vec<(Vec<u32>, usize)> = (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let mut out = Vec::new();
            let mut escapes = 0;
            for f in flows {
                let z = f.apply_slice(&x);
                if !grid.contains(&z) {
                    escapes += 1;
                    continue;
                }
                grid.nodes_near(&z, epsilon, &counts, &mut out);
            }
            out.sort_unstable();
            out.dedup();
            (out, escapes)
        })
        .collect();
    let escapes = results.iter().map(|r| r.1).sum();
    (results.into_iter().map(|r| r.0).collect(), escapes)
}

fn stats(edges: &[Vec<u32>], escapes: usize, integration_error: f64) -> GraphStats {
    GraphStats {
        node_count: edges.len(),
        edge_count: edges.iter().map(Vec::len).sum(),
        escapes,
        integration_error,
    }
}

/// Chain graph of `sys`; `controls = None` uses the default family.
pub fn build_chain_graph(
    sys: &LinearSystem,
    grid: &GridSpec,
    controls: Option<Vec<PCWControl>>,
    epsilon: f64,
    jump_t: f64,
) -> Result<ChainGraph> {
    build_chain_graph_with(sys, grid, controls, epsilon, jump_t, GraphOptions::default())
}

pub fn build_chain_graph_with(
    sys: &LinearSystem,
    grid: &GridSpec,
    controls: Option<Vec<PCWControl>>,
    epsilon: f64,
    jump_t: f64,
    opts: GraphOptions,
) -> Result<ChainGraph> {
    let controls = controls.unwrap_or_else(|| default_controls(&sys.range, jump_t, opts.family));
    check_inputs(sys, grid, &controls, epsilon, jump_t)?;
    let (steps, err) = match opts.steps {
        Some(s) => (s.max(1), integration_error(sys, grid, &controls, jump_t, s.max(1))),
        None => choose_steps(sys, grid, &controls, epsilon, jump_t),
    };
    let flows: Vec<AffineMap> = controls
        .iter()
        .map(|u| rk4_flow(sys, u, 0.0, jump_t, steps))
        .collect();
    let (edges, escapes) = lattice_edges(grid, &flows, epsilon);
    Ok(ChainGraph {
        system: sys.clone(),
        grid: grid.clone(),
        controls,
        epsilon,
        jump_t,
        steps,
        reversed: false,
        stats: stats(&edges, escapes, err),
        edges,
    })
}

/// Direct construction of the chain graph of a time-reversed system
/// `rev = (-A, -B)`, with links "jump, then flow": `y → x` iff some control
/// carries a point within `ε` of `y` to `x` along the flow of `rev`. The
/// candidate points are found by integrating `rev` backwards from every node
/// `x`.
pub fn build_time_reversed_graph(
    rev: &LinearSystem,
    grid: &GridSpec,
    controls: &[PCWControl],
    epsilon: f64,
    jump_t: f64,
    steps: usize,
) -> Result<ChainGraph> {
    check_inputs(rev, grid, controls, epsilon, jump_t)?;
    let flows: Vec<AffineMap> = controls
        .iter()
        .map(|u| rk4_flow(rev, &u.reflect(), 0.0, -jump_t, steps))
        .collect();
    let (back, escapes) = lattice_edges(grid, &flows, epsilon);
    let forward = LinearSystem {
        a: -&rev.a,
        b: -&rev.b,
        range: rev.range.clone(),
    };
    let err = integration_error(&forward, grid, controls, jump_t, steps);
    let edges = transpose(&back);
    Ok(ChainGraph {
        system: rev.clone(),
        grid: grid.clone(),
        controls: controls.to_vec(),
        epsilon,
        jump_t,
        steps,
        reversed: true,
        stats: stats(&edges, escapes, err),
        edges,
    })
}

/// Edge reversal of an adjacency list.
pub fn transpose(edges: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); edges.len()];
    for (i, succ) in edges.iter().enumerate() {
        for &j in succ {
            out[j as usize].push(i as u32);
        }
    }
    // pushes happen in increasing source order, so lists are already sorted
    out
}

/// Chain graph of the time-reversed system, obtained by reversing every
/// edge of `g`.
pub fn reverse_graph(g: &ChainGraph) -> ChainGraph {
    let edges = transpose(&g.edges);
    ChainGraph {
        system: g.system.time_reversed(),
        grid: g.grid.clone(),
        controls: g.controls.clone(),
        epsilon: g.epsilon,
        jump_t: g.jump_t,
        steps: g.steps,
        reversed: !g.reversed,
        stats: GraphStats {
            edge_count: g.stats.edge_count,
            ..g.stats
        },
        edges,
    }
}

fn bfs(edges: &[Vec<u32>], x0: usize) -> Vec<bool> {
    let mut seen = vec![false; edges.len()];
    let mut queue = VecDeque::new();
    for &y in &edges[x0] {
        if !seen[y as usize] {
            seen[y as usize] = true;
            queue.push_back(y as usize);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &y in &edges[x] {
            if !seen[y as usize] {
                seen[y as usize] = true;
                queue.push_back(y as usize);
            }
        }
    }
    seen
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Nodes reachable from `x0` by at least one edge, sorted.
pub fn chain_reachable_from(g: &ChainGraph, x0: usize) -> Vec<usize> {
    indices(&bfs(&g.edges, x0))
}

/// Nodes from which `x0` is reachable by at least one edge, sorted.
pub fn backward_reachable(g: &ChainGraph, x0: usize) -> Vec<usize> {
    indices(&bfs(&transpose(&g.edges), x0))
}

/// `{y : x0 ⇝ y and y ⇝ x0}`, sorted.
pub fn chain_component_of(g: &ChainGraph, x0: usize) -> Vec<usize> {
    let fwd = bfs(&g.edges, x0);
    let bwd = bfs(&transpose(&g.edges), x0);
    (0..fwd.len()).filter(|&i| fwd[i] && bwd[i]).collect()
}

/// Nodes on a cycle (an SCC with more than one node, or a self-edge).
pub fn recurrent_nodes(g: &ChainGraph) -> Vec<usize> {
    let n = g.edges.len();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, g.stats.edge_count);
    for _ in 0..n {
        graph.add_node(());
    }
    for (i, succ) in g.edges.iter().enumerate() {
        for &j in succ {
            graph.add_edge((i as u32).into(), j.into(), ());
        }
    }
    let mut rec = vec![false; n];
    for scc in tarjan_scc(&graph) {
        if scc.len() > 1 {
            for v in scc {
                rec[v.index()] = true;
            }
        } else {
            let v = scc[0].index();
            if g.edges[v].binary_search(&(v as u32)).is_ok() {
                rec[v] = true;
            }
        }
    }
    indices(&rec)
}

/// Chain graph of `ẋ = Ax` (no input) and its recurrent nodes.
pub fn autonomous_chain_recurrent_set(
    a: &DMatrix<f64>,
    grid: &GridSpec,
    epsilon: f64,
    jump_t: f64,
    steps: Option<usize>,
) -> Result<(ChainGraph, Vec<usize>)> {
    let sys = LinearSystem::autonomous(a.clone())?;
    let g = build_chain_graph_with(
        &sys,
        grid,
        Some(vec![PCWControl::constant(vec![0.0])]),
        epsilon,
        jump_t,
        GraphOptions {
            steps,
            ..Default::default()
        },
    )?;
    let rec = recurrent_nodes(&g);
    Ok((g, rec))
}

/// A controlled chain `x₀ → … → x_k` with link controls and times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainWitness {
    pub points: Vec<Vec<f64>>,
    pub controls: Vec<PCWControl>,
    pub times: Vec<f64>,
    /// RK4 steps per link used when the witness was built.
    pub steps: usize,
}

impl ChainWitness {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// `self` followed by `other`; the last point of `self` must be the
    /// first point of `other`.
    pub fn concat(&self, other: &ChainWitness) -> Option<ChainWitness> {
        if self.points.last() != other.points.first() {
            return None;
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().skip(1).cloned());
        let mut controls = self.controls.clone();
        controls.extend(other.controls.iter().cloned());
        let mut times = self.times.clone();
        times.extend(other.times.iter().copied());
        Some(ChainWitness {
            points,
            controls,
            times,
            steps: self.steps.max(other.steps),
        })
    }
}

/// Shortest chain from node `x0` to node `y0` in a forward graph.
pub fn extract_witness(g: &ChainGraph, x0: usize, y0: usize) -> Result<ChainWitness> {
    if g.reversed {
        return Err(Error::InvalidGrid("witnesses are extracted from forward graphs".into()));
    }
    let n = g.edges.len();
    if x0 >= n || y0 >= n {
        return Err(Error::Unreachable);
    }
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for &y in &g.edges[x0] {
        let y = y as usize;
        if !seen[y] {
            seen[y] = true;
            parent[y] = x0;
            queue.push_back(y);
        }
    }
    while let Some(x) = queue.pop_front() {
        if x == y0 {
            break;
        }
        for &y in &g.edges[x] {
            let y = y as usize;
            if !seen[y] {
                seen[y] = true;
                parent[y] = x;
                queue.push_back(y);
            }
        }
    }
    if !seen[y0] {
        return Err(Error::Unreachable);
    }
    let mut path = vec![y0];
    let mut cur = y0;
    loop {
        let p = parent[cur];
        path.push(p);
        if p == x0 {
            break;
        }
        cur = p;
    }
    path.reverse();

    let flows: Vec<AffineMap> = g
        .controls
        .iter()
        .map(|u| rk4_flow(&g.system, u, 0.0, g.jump_t, g.steps))
        .collect();
    let points: Vec<Vec<f64>> = path.iter().map(|&i| g.grid.node(i)).collect();
    let mut controls = Vec::with_capacity(path.len() - 1);
    for w in points.windows(2) {
        let best = flows
            .iter()
            .enumerate()
            .map(|(k, f)| (k, dist(&f.apply_slice(&w[0]), &w[1])))
            .filter(|(_, d)| *d < g.epsilon)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or(Error::Unreachable)?;
        controls.push(g.controls[best.0].clone());
    }
    Ok(ChainWitness {
        times: vec![g.jump_t; controls.len()],
        points,
        controls,
        steps: g.steps,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Re-integrates every link with twice the witness' step count and checks
/// `‖φ(Tⱼ, xⱼ, uⱼ) - xⱼ₊₁‖ < ε` and `Tⱼ ≥ T`.
pub fn validate_witness(sys: &LinearSystem, w: &ChainWitness, epsilon: f64, t: f64) -> bool {
    let k = w.controls.len();
    if k == 0 || w.points.len() != k + 1 || w.times.len() != k {
        return false;
    }
    let n = sys.state_dim();
    if w.points.iter().any(|p| p.len() != n) {
        return false;
    }
    (0..k).all(|j| {
        let tj = w.times[j];
        if !(tj >= t) || w.controls[j].validate_in(&sys.range).is_err() {
            return false;
        }
        let z = rk4_integrate(sys, &w.points[j], &w.controls[j], 0.0, tj, 2 * w.steps.max(1));
        dist(&z, &w.points[j + 1]) < epsilon
    })
}

/// Radii used to compare oracle node sets with the formula sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collar {
    /// `ε` plus the RK4 error estimate.
    pub epsilon_eff: f64,
    /// `ε_eff (‖π⁻‖ Σ_{k≥0} ‖e^{A⁻kT}‖ + ‖π⁺‖ Σ_{k≥1} ‖e^{-A⁺kT}‖)`.
    pub accumulation_radius: f64,
    /// `ε + 2·spacing`.
    pub lattice_collar: f64,
    /// `max(accumulation_radius, lattice_collar)`.
    pub collar: f64,
    /// `ε (1 + ‖e^{AT}‖)`.
    pub boundary_band: f64,
    /// `ε + 2·spacing + boundary_band`; the collar must not exceed it.
    pub allowed: f64,
}

/// `Σ_{k≥k0} ‖E^k‖₂`, or infinity if the terms do not decay.
fn power_norm_sum(e: &DMatrix<f64>, k0: usize) -> f64 {
    let k = e.nrows();
    if k == 0 {
        return 0.0;
    }
    let mut p = DMatrix::identity(k, k);
    for _ in 0..k0 {
        p = &p * e;
    }
    let mut sum = 0.0;
    for _ in 0..200_000 {
        let term = spectral_norm(&p);
        if !term.is_finite() {
            return f64::INFINITY;
        }
        sum += term;
        if term <= 1e-16 * sum.max(1e-300) {
            return sum;
        }
        p = &p * e;
    }
    f64::INFINITY
}

pub fn collar_constants(g: &ChainGraph, split: &SpectralSplit) -> Result<Collar> {
    let sys = if g.reversed { g.system.time_reversed() } else { g.system.clone() };
    let t = g.jump_t;
    let eps_eff = g.epsilon + g.stats.integration_error;
    let m_minus = induced_block(&sys.a, &split.basis_minus);
    let m_plus = induced_block(&sys.a, &split.basis_plus);
    let s_minus = power_norm_sum(&matrix_exp(&m_minus, t)?, 0);
    let s_plus = power_norm_sum(&matrix_exp(&m_plus, -t)?, 1);
    let accumulation_radius =
        eps_eff * (spectral_norm(&split.proj_minus) * s_minus + spectral_norm(&split.proj_plus) * s_plus);
    let lattice_collar = g.epsilon + 2.0 * g.grid.spacing;
    let boundary_band = g.epsilon * (1.0 + spectral_norm(&matrix_exp(&sys.a, t)?));
    Ok(Collar {
        epsilon_eff: eps_eff,
        accumulation_radius,
        lattice_collar,
        collar: accumulation_radius.max(lattice_collar),
        boundary_band,
        allowed: lattice_collar + boundary_band,
    })
}

/// Comparison of an oracle node set with a formula set `S` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub collar: Collar,
    pub oracle_nodes: usize,
    pub formula_nodes: usize,
    pub symmetric_difference: usize,
    /// Oracle nodes farther than the collar from `S`.
    pub outside_collar: usize,
    /// Nodes of `S` missing from the oracle set, deeper than the collar and
    /// outside the boundary band.
    pub missing_interior: usize,
    pub max_outside_distance: f64,
    pub max_missing_depth: f64,
    pub passes: bool,
}

/// Checks that `oracle` and `S ∩ box` differ only inside the collar:
/// every oracle node is within `collar` of `S`, and every node of `S`
/// missing from `oracle` is within `collar` of `∂S` or within the boundary
/// band of the box.
pub fn compare_with_set(g: &ChainGraph, oracle: &[usize], s: &AffineSetSum, collar: Collar) -> Agreement {
    let n = g.grid.node_count();
    let mut in_oracle = vec![false; n];
    for &i in oracle {
        in_oracle[i] = true;
    }
    let rows: Vec<(bool, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = g.grid.node(i);
            let member = s.contains(&x, 1e-8);
            (member, s.distance(&x), s.depth(&x), g.grid.boundary_distance(&x))
        })
        .collect();
    let mut report = Agreement {
        collar,
        oracle_nodes: oracle.len(),
        formula_nodes: 0,
        symmetric_difference: 0,
        outside_collar: 0,
        missing_interior: 0,
        max_outside_distance: 0.0,
        max_missing_depth: 0.0,
        passes: false,
    };
    for (i, &(member, distance, depth, boundary)) in rows.iter().enumerate() {
        if member {
            report.formula_nodes += 1;
        }
        if member != in_oracle[i] {
            report.symmetric_difference += 1;
        }
        if in_oracle[i] && !member {
            report.max_outside_distance = report.max_outside_distance.max(distance);
            if distance > collar.collar {
                report.outside_collar += 1;
            }
        }
        if member && !in_oracle[i] && boundary > collar.boundary_band {
            report.max_missing_depth = report.max_missing_depth.max(depth);
            if depth > collar.collar {
                report.missing_interior += 1;
            }
        }
    }
    report.passes = report.outside_collar == 0
        && report.missing_interior == 0
        && collar.collar <= collar.allowed * (1.0 + 1e-12);
    report
}

/// `a ⊆ b` for sorted index lists.
pub fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> LinearSystem {
        LinearSystem::autonomous(DMatrix::from_element(1, 1, a)).unwrap()
    }

    fn saddle() -> LinearSystem {
        LinearSystem::from_rows(
            &[vec![1.0, 0.0], vec![0.0, -1.0]],
            &[vec![1.0], vec![1.0]],
            ControlRange::symmetric_box(1, 1.0),
        )
        .unwrap()
    }

    fn line_grid() -> GridSpec {
        GridSpec::new(vec![-2.0], vec![2.0], 0.05).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = GridSpec::new(vec![-1.0, 0.0], vec![1.0, 0.5], 0.5).unwrap();
        assert_eq!(g.counts(), vec![5, 2]);
        assert_eq!(g.node(0), vec![-1.0, 0.0]);
        assert_eq!(g.node(1), vec![-1.0, 0.5]);
        assert_eq!(g.node(2), vec![-0.5, 0.0]);
        assert_eq!(g.nearest(&[0.1, 0.4]), Some(5));
        assert_eq!(g.nearest(&[3.0, 0.0]), None);
        assert!(matches!(
            GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], 1e-4),
            Err(Error::GridTooLarge(_))
        ));
        assert!(GridSpec::new(vec![1.0], vec![0.0], 0.1).is_err());
    }

    #[test]
    fn scalar_contraction_edges() {
        let grid = line_grid();
        let g = build_chain_graph(&scalar(-1.0), &grid, None, 0.12, 1.0).unwrap();
        let origin = grid.nearest(&[0.0]).unwrap();
        assert!(g.edges[origin].contains(&(origin as u32)));
        let top = grid.nearest(&[2.0]).unwrap();
        let target = 2.0 * (-1f64).exp();
        for &y in &g.edges[top] {
            assert!((grid.node(y as usize)[0] - target).abs() < 0.12);
        }
        assert!(g.edges[top].contains(&(grid.nearest(&[target]).unwrap() as u32)));
    }

    #[test]
    fn epsilon_guard() {
        let r = build_chain_graph(&scalar(-1.0), &line_grid(), None, 0.02, 1.0);
        assert!(matches!(r, Err(Error::EpsilonTooSmall { .. })));
    }

    #[test]
    fn scalar_reachability_radius() {
        let grid = line_grid();
        let eps = 0.12;
        let g = build_chain_graph(&scalar(-1.0), &grid, None, eps, 1.0).unwrap();
        let reach = chain_reachable_from(&g, grid.nearest(&[2.0]).unwrap());
        let r = eps / (1.0 - (-1f64).exp());
        for &i in &reach {
            let x = grid.node(i)[0];
            // from x = 2 the chain passes through 2/e before contracting
            assert!(x.abs() <= 2.0 * (-1f64).exp() + r + 0.05 + 1e-12, "x = {x}");
        }
        let origin = grid.nearest(&[0.0]).unwrap();
        assert!(reach.contains(&origin));
    }

    #[test]
    fn control_family() {
        let vals = default_control_values(&ControlRange::symmetric_box(1, 1.0));
        assert_eq!(vals, vec![vec![-1.0], vec![1.0], vec![0.0]]);
        let two = default_controls(&ControlRange::symmetric_box(1, 1.0), 1.0, ControlFamily::TwoPiece);
        assert_eq!(two.len(), 3 + 6);
        let sq = default_control_values(&ControlRange::symmetric_box(2, 1.0));
        // 4 corners, origin, 4 edge midpoints (diagonal midpoints coincide with 0)
        assert_eq!(sq.len(), 9);
        let lat = default_controls(&ControlRange::symmetric_box(1, 1.0), 1.0, ControlFamily::Lattice(5));
        assert_eq!(lat.len(), 5);
        assert_eq!(lat[3].values[0], vec![-0.5]);
        let tri = ControlRange::Polytope {
            vertices: vec![vec![-1.0, -1.0], vec![2.0, -1.0], vec![-1.0, 2.0]],
        };
        assert!(lattice_control_values(&tri, 4).iter().all(|p| p[0] + p[1] <= 1.0 + 1e-12));
    }

    #[test]
    fn saddle_edge_from_origin() {
        let grid = GridSpec::new(vec![-2.0, -2.0], vec![2.0, 2.0], 0.05).unwrap();
        let g = build_chain_graph(
            &saddle(),
            &grid,
            Some(vec![PCWControl::constant(vec![1.0])]),
            0.1,
            1.0,
        )
        .unwrap();
        let origin = grid.nearest(&[0.0, 0.0]).unwrap();
        let e = std::f64::consts::E;
        let z = [e - 1.0, 1.0 - 1.0 / e];
        assert!(!g.edges[origin].is_empty());
        for &y in &g.edges[origin] {
            assert!(dist(&grid.node(y as usize), &z) < 0.1);
        }
    }

    #[test]
    fn reversal_matches_transpose() {
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], 0.1).unwrap();
        let sys = saddle();
        let g = build_chain_graph_with(
            &sys,
            &grid,
            None,
            0.15,
            1.0,
            GraphOptions {
                family: ControlFamily::TwoPiece,
                steps: None,
            },
        )
        .unwrap();
        let r = reverse_graph(&g);
        let direct = build_time_reversed_graph(&sys.time_reversed(), &grid, &g.controls, 0.15, 1.0, g.steps).unwrap();
        assert_eq!(r.edges, direct.edges);
        assert_eq!(reverse_graph(&r).edges, g.edges);
        let x = grid.nearest(&[0.5, 0.5]).unwrap();
        assert_eq!(chain_reachable_from(&r, x), backward_reachable(&g, x));
    }

    #[test]
    fn witness_round_trip() {
        let grid = GridSpec::new(vec![-2.0, -2.0], vec![2.0, 2.0], 0.05).unwrap();
        let sys = saddle();
        let g = build_chain_graph(&sys, &grid, None, 0.1, 1.0).unwrap();
        let x0 = grid.nearest(&[0.0, 0.0]).unwrap();
        let y0 = grid.nearest(&[0.9, 0.9]).unwrap();
        let w = extract_witness(&g, x0, y0).unwrap();
        assert!(validate_witness(&sys, &w, 0.1, 1.0));
        assert!(w.times.iter().all(|t| *t == 1.0));

        let mut bad = w.clone();
        bad.points[1][0] += 0.2;
        assert!(!validate_witness(&sys, &bad, 0.1, 1.0));
        let mut short = w.clone();
        short.times[0] = 0.5;
        assert!(!validate_witness(&sys, &short, 0.1, 1.0));

        let self_loop = extract_witness(&g, x0, x0).unwrap();
        assert_eq!(self_loop.len(), 1);
        let both = w.concat(&extract_witness(&g, y0, x0).unwrap()).unwrap();
        assert!(validate_witness(&sys, &both, 0.1, 1.0));
    }

    #[test]
    fn unreachable_pair() {
        let grid = line_grid();
        let g = build_chain_graph(&scalar(-1.0), &grid, None, 0.06, 1.0).unwrap();
        let x0 = grid.nearest(&[0.0]).unwrap();
        let y0 = grid.nearest(&[1.5]).unwrap();
        assert_eq!(extract_witness(&g, x0, y0).unwrap_err(), Error::Unreachable);
    }

    #[test]
    fn recurrence_examples() {
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], 0.1).unwrap();
        let (_, rec) = autonomous_chain_recurrent_set(&DMatrix::zeros(2, 2), &grid, 0.1, 1.0, None).unwrap();
        assert_eq!(rec.len(), grid.node_count());
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let sys = LinearSystem::autonomous(a).unwrap();
        let g = build_chain_graph(&sys, &grid, None, 0.15, 1.0).unwrap();
        let origin = grid.nearest(&[0.0, 0.0]).unwrap();
        let comp = chain_component_of(&g, origin);
        // rotation: every node inside the inscribed disc is chain equivalent
        for i in 0..grid.node_count() {
            let x = grid.node(i);
            if (x[0] * x[0] + x[1] * x[1]).sqrt() < 0.85 {
                assert!(comp.contains(&i), "{x:?}");
            }
        }
    }

    #[test]
    fn subset_helper() {
        assert!(is_subset(&[1, 3], &[0, 1, 2, 3]));
        assert!(!is_subset(&[1, 4], &[0, 1, 2, 3]));
        assert!(is_subset(&[], &[]));
    }
}
