//! The analysis verbs. Each returns a bundle and a short human summary.

use chainset::chainlab::{
    build_chain_graph_with, chain_component_of, collar_constants, compare_with_set, extract_witness,
    validate_witness, ChainGraph, ControlFamily, GraphOptions, GridSpec,
};
use chainset::poincare::{distance_to_equator, projective_chain_control_set, CloudOptions};
use chainset::reachsets::{Assembly, ReachOptions};
use chainset::spectral::lyapunov_split;
use chainset::Error;
use serde_json::{json, Value};

use crate::bundle::{input_hash, ResultBundle, SplitSummary, VERSION};
use crate::spec::LoadedSpec;
use crate::CliError;

pub struct Outcome {
    pub bundle: ResultBundle,
    pub summary: String,
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

fn bundle(command: &str, spec: &LoadedSpec, spectral: SplitSummary, options: Value, result: Value) -> ResultBundle {
    ResultBundle {
        command: command.to_string(),
        input_hash: input_hash(&spec.bytes),
        version: VERSION.to_string(),
        spectral,
        options,
        result,
    }
}

pub fn decompose(spec: &LoadedSpec) -> Result<Outcome, CliError> {
    let sys = &spec.system;
    let split = lyapunov_split(&sys.a, spec.spec.options.tol_re)?;
    let summary = SplitSummary::new(sys, &split)?;
    let result = json!({
        "basis_plus": to_value(&chainset::linalg::to_rows(&split.basis_plus))?,
        "basis_zero": to_value(&chainset::linalg::to_rows(&split.basis_zero))?,
        "basis_minus": to_value(&chainset::linalg::to_rows(&split.basis_minus))?,
    });
    let line = summary.line();
    let options = json!({ "tol_re": split.tol_re });
    Ok(Outcome {
        bundle: bundle("decompose", spec, summary, options, result),
        summary: line,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ChainSetArgs {
    pub horizon: Option<f64>,
    pub tol: Option<f64>,
}

fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn describe(set: &chainset::convex::AffineSetSum) -> String {
    let verts = set
        .ambient_vertices()
        .map(|vs| {
            let pts: Vec<String> = vs
                .iter()
                .map(|v| format!("({})", v.iter().map(|&x| fmt6(x)).collect::<Vec<_>>().join(", ")))
                .collect();
            format!("hull of {}", pts.join(" "))
        })
        .unwrap_or_else(|| format!("compact body of dimension {}", set.compact.ambient_dim));
    let sub = set.subspace_matrix();
    if sub.ncols() == 0 {
        verts
    } else {
        let cols: Vec<String> = (0..sub.ncols())
            .map(|j| format!("({})", sub.column(j).iter().map(|&x| fmt6(x)).collect::<Vec<_>>().join(", ")))
            .collect();
        format!("{verts} + span{{{}}}", cols.join(", "))
    }
}

pub fn chain_set(spec: &LoadedSpec, args: ChainSetArgs) -> Result<Outcome, CliError> {
    let sys = &spec.system;
    let o = &spec.spec.options;
    let opts = ReachOptions {
        horizon_t: args.horizon.or(o.horizon),
        quad_tol: args.tol.or(o.quad_tol).unwrap_or(ReachOptions::default().quad_tol),
        tol_re: o.tol_re,
    };
    opts.validate()?;
    let asm = Assembly::new(sys, opts)?;
    let cs = asm.control_set()?;
    let e = asm.chain_control_set()?;
    let spectral = SplitSummary::new(sys, &asm.split)?;
    let summary = format!("{}\nD0 closure: {}\nE: {}", spectral.line(), describe(&cs.d0_closure), describe(&e));
    let result = json!({
        "control_set": to_value(&cs)?,
        "E": to_value(&e)?,
        "E_vertices": to_value(&e.ambient_vertices())?,
        "D0_vertices": to_value(&cs.d0_closure.ambient_vertices())?,
    });
    Ok(Outcome {
        bundle: bundle("chain-set", spec, spectral, to_value(&opts)?, result),
        summary,
    })
}

#[derive(Debug, Clone, Default)]
pub struct OracleArgs {
    /// `[lo₁, hi₁, lo₂, hi₂, …]`.
    pub bounds: Option<Vec<f64>>,
    pub spacing: Option<f64>,
    pub epsilon: Option<f64>,
    pub jump_t: Option<f64>,
    pub family: Option<ControlFamily>,
    pub from: Option<Vec<f64>>,
    pub to: Option<Vec<f64>>,
}

pub const DEFAULT_HALF_WIDTH: f64 = 2.0;
pub const DEFAULT_SPACING: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_JUMP_T: f64 = 1.0;

fn oracle_grid(n: usize, args: &OracleArgs, file: Option<&GridSpec>) -> Result<GridSpec, CliError> {
    let spacing = args.spacing.or(file.map(|g| g.spacing)).unwrap_or(DEFAULT_SPACING);
    let (lo, hi) = match (&args.bounds, file) {
        (Some(b), _) => {
            if b.len() != 2 * n {
                return Err(CliError::Parse(format!("--box needs {} numbers (lo,hi per axis), got {}", 2 * n, b.len())));
            }
            (b.iter().step_by(2).copied().collect(), b.iter().skip(1).step_by(2).copied().collect())
        }
        (None, Some(g)) => (g.box_lo.clone(), g.box_hi.clone()),
        (None, None) => (vec![-DEFAULT_HALF_WIDTH; n], vec![DEFAULT_HALF_WIDTH; n]),
    };
    Ok(GridSpec::new(lo, hi, spacing)?)
}

fn node_at(grid: &GridSpec, x: &[f64], what: &str) -> Result<usize, CliError> {
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: x.len(),
        }
        .into());
    }
    grid.nearest(x)
        .ok_or_else(|| Error::InvalidGrid(format!("{what} point lies outside the box")).into())
}

pub fn oracle(spec: &LoadedSpec, args: &OracleArgs) -> Result<(Outcome, ChainGraph), CliError> {
    let sys = &spec.system;
    let o = &spec.spec.options;
    let grid = oracle_grid(sys.state_dim(), args, o.grid.as_ref())?;
    let epsilon = args.epsilon.or(o.epsilon).unwrap_or(DEFAULT_EPSILON);
    let jump_t = args.jump_t.or(o.jump_t).unwrap_or(DEFAULT_JUMP_T);
    let family = args.family.or(o.family).unwrap_or_default();
    let g = build_chain_graph_with(
        sys,
        &grid,
        None,
        epsilon,
        jump_t,
        GraphOptions { family, steps: None },
    )?;
    let origin = node_at(&grid, &vec![0.0; grid.dim()], "origin")?;
    let component = chain_component_of(&g, origin);

    let asm = Assembly::new(
        sys,
        ReachOptions {
            tol_re: o.tol_re,
            ..Default::default()
        },
    )?;
    let e = asm.chain_control_set()?;
    let collar = collar_constants(&g, &asm.split)?;
    let agreement = compare_with_set(&g, &component, &e, collar);

    let mut witness = Value::Null;
    let mut witness_line = String::new();
    if let (Some(from), Some(to)) = (&args.from, &args.to) {
        let x0 = node_at(&grid, from, "--from")?;
        let y0 = node_at(&grid, to, "--to")?;
        let w = extract_witness(&g, x0, y0)?;
        let valid = validate_witness(sys, &w, epsilon, jump_t);
        witness_line = format!("\nwitness: {} links, valid: {}", w.len(), if valid { "yes" } else { "no" });
        witness = json!({ "chain": to_value(&w)?, "valid": valid });
    }
    if component.is_empty() {
        return Err(CliError::Empty("the origin's chain component is empty".into()));
    }

    let spectral = SplitSummary::new(sys, &asm.split)?;
    let summary = format!(
        "nodes: {}, edges: {}, escapes: {}\norigin component: {} nodes, formula set: {} nodes, symmetric difference: {}\ncollar: {:.6} (allowed {:.6}), agreement: {}{}",
        g.stats.node_count,
        g.stats.edge_count,
        g.stats.escapes,
        agreement.oracle_nodes,
        agreement.formula_nodes,
        agreement.symmetric_difference,
        collar.collar,
        collar.allowed,
        if agreement.passes { "pass" } else { "fail" },
        witness_line
    );
    let points: Vec<Vec<f64>> = component.iter().map(|&i| grid.node(i)).collect();
    let options = json!({
        "grid": to_value(&grid)?,
        "epsilon": epsilon,
        "T": jump_t,
        "family": to_value(&family)?,
        "steps": g.steps,
        "controls": g.controls.len(),
    });
    let result = json!({
        "component": to_value(&points)?,
        "component_nodes": to_value(&component)?,
        "agreement": to_value(&agreement)?,
        "stats": to_value(&g.stats)?,
        "box_relative": true,
        "witness": witness,
    });
    Ok((
        Outcome {
            bundle: bundle("oracle", spec, spectral, options, result),
            summary,
        },
        g,
    ))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PoincareArgs {
    pub samples: Option<usize>,
    pub r_plot: Option<f64>,
    pub seed: Option<u64>,
}

pub fn poincare(spec: &LoadedSpec, args: PoincareArgs) -> Result<Outcome, CliError> {
    let sys = &spec.system;
    let o = &spec.spec.options;
    let defaults = CloudOptions::default();
    let opts = CloudOptions {
        samples: args.samples.or(o.samples).unwrap_or(defaults.samples),
        r_plot: args.r_plot.or(o.r_plot).unwrap_or(defaults.r_plot),
        seed: args.seed.or(o.seed).unwrap_or(defaults.seed),
        ..defaults
    };
    let cloud = projective_chain_control_set(sys, &opts)?;
    let split = lyapunov_split(&sys.a, o.tol_re)?;
    let spectral = SplitSummary::new(sys, &split)?;
    let min_eq = cloud
        .points
        .iter()
        .map(distance_to_equator)
        .fold(f64::INFINITY, f64::min);
    let summary = format!(
        "central fiber dimension: {}\ncloud: {} points, min distance to equator: {:.6}, max membership excess: {:e}",
        cloud.fiber_dim,
        cloud.points.len(),
        min_eq,
        cloud.max_membership_excess
    );
    let result = json!({
        "fiber_dim": cloud.fiber_dim,
        "points": to_value(&cloud.points)?,
        "preimages": to_value(&cloud.preimages)?,
        "min_equator_distance": min_eq,
        "max_membership_excess": cloud.max_membership_excess,
        "E": to_value(&cloud.chain_control_set)?,
    });
    Ok(Outcome {
        bundle: bundle("poincare", spec, spectral, to_value(&opts)?, result),
        summary,
    })
}
