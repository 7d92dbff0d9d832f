//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::PathBuf;
use std::time::Instant;

use chainset::chainlab::{
    build_chain_graph_with, build_time_reversed_graph, chain_component_of, chain_reachable_from, choose_steps,
    collar_constants, compare_with_set, default_controls, extract_witness, is_subset, recurrent_nodes, reverse_graph,
    transpose, validate_witness, Agreement, ControlFamily, GraphOptions, GridSpec,
};
use chainset::control::PCWControl;
use chainset::convex::{compact_gap, membership, AffineSetSum, ConvexBody};
use chainset::poincare::{
    bounded_solution_e0, distance_to_equator, projective_chain_control_set, proj_distance, CloudOptions, ProjPoint,
};
use chainset::reachsets::chain_control_set;
use chainset::spectral::lyapunov_split;
use chainset::{ControlRange, LinearSystem};
use chainset_cli::commands::{chain_set, ChainSetArgs};
use chainset_cli::spec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, f64, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn example(name: &str) -> LinearSystem {
    spec::load(&data(name)).unwrap().system
}

fn criterion_grid() -> GridSpec {
    GridSpec::new(vec![-2.0, -2.0], vec![2.0, 2.0], 0.05).unwrap()
}

fn compact_set(points: &[Vec<f64>], subspace: DMatrix<f64>) -> AffineSetSum {
    AffineSetSum::from_ambient_body(&ConvexBody::from_points(2, points, None).unwrap(), &subspace).unwrap()
}

fn gap(a: &AffineSetSum, b: &AffineSetSum) -> f64 {
    compact_gap(a, b).unwrap().map_or(f64::INFINITY, |h| h.value())
}

fn square() -> Vec<Vec<f64>> {
    vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]]
}

fn center_stable_sets() -> Verdict {
    let loaded = spec::load(&data("center_stable.json")).unwrap();
    let out = chain_set(&loaded, ChainSetArgs::default()).unwrap();
    let result = &out.bundle.result;
    let d0: AffineSetSum = serde_json::from_value(result["control_set"]["D0_closure"].clone()).unwrap();
    let e: AffineSetSum = serde_json::from_value(result["E"].clone()).unwrap();
    let seg = vec![vec![0.0, -1.0], vec![0.0, 1.0]];
    let g0 = gap(&d0, &compact_set(&seg, DMatrix::zeros(2, 0)));
    let ge = gap(&e, &compact_set(&seg, DMatrix::from_column_slice(2, 1, &[1.0, 0.0])));
    let horizon = result["control_set"]["metadata"]["horizon_minus"].as_f64().unwrap();
    Verdict {
        pass: g0 <= 1e-6 && ge <= 1e-6 && e.subspace_dim() == 1 && horizon >= 20.0,
        detail: format!("D0 gap {g0:.2e}, E gap {ge:.2e}, E subspace dim {}, T* {horizon:.2}", e.subspace_dim()),
    }
}

fn saddle_sets() -> Verdict {
    let loaded = spec::load(&data("saddle.json")).unwrap();
    let out = chain_set(&loaded, ChainSetArgs::default()).unwrap();
    let d0: AffineSetSum = serde_json::from_value(out.bundle.result["control_set"]["D0_closure"].clone()).unwrap();
    let e: AffineSetSum = serde_json::from_value(out.bundle.result["E"].clone()).unwrap();
    let sq = compact_set(&square(), DMatrix::zeros(2, 0));
    let (g0, ge) = (gap(&d0, &sq), gap(&e, &sq));
    Verdict {
        pass: g0 <= 1e-6 && ge <= 1e-6 && e.subspace_dim() == 0,
        detail: format!("D0 gap {g0:.2e}, E gap {ge:.2e}"),
    }
}

const EPS_LEVELS: [f64; 3] = [0.2, 0.1, 0.05];

fn summarize(a: &Agreement) -> String {
    format!(
        "{}/{} nodes, collar {:.3} <= {:.3}",
        a.oracle_nodes, a.formula_nodes, a.collar.collar, a.collar.allowed
    )
}

fn oracle_agreement() -> Verdict {
    let sys = example("saddle.json");
    let grid = criterion_grid();
    let e = chain_control_set(&sys).unwrap();
    let split = lyapunov_split(&sys.a, None).unwrap();
    let origin = grid.nearest(&[0.0, 0.0]).unwrap();
    let family = ControlFamily::Lattice(17);
    let controls = default_controls(&sys.range, 1.0, family);
    let (steps, _) = choose_steps(&sys, &grid, &controls, EPS_LEVELS[2], 1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut previous: Option<Vec<usize>> = None;
    for eps in EPS_LEVELS {
        let g = build_chain_graph_with(&sys, &grid, Some(controls.clone()), eps, 1.0, GraphOptions { family, steps: Some(steps) }).unwrap();
        let comp = chain_component_of(&g, origin);
        let a = compare_with_set(&g, &comp, &e, collar_constants(&g, &split).unwrap());
        pass &= a.passes;
        if let Some(prev) = &previous {
            pass &= is_subset(&comp, prev);
        }
        parts.push(format!("eps {eps}: {} {}", if a.passes { "ok" } else { "off" }, summarize(&a)));
        previous = Some(comp);
    }
    Verdict {
        pass,
        detail: format!("{} controls; {}; nested", controls.len(), parts.join("; ")),
    }
}

fn autonomous_recurrence() -> Verdict {
    let grid = criterion_grid();
    let mut pass = true;
    let mut parts = Vec::new();
    for diag in [[0.0, -1.0], [1.0, -1.0]] {
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&diag));
        let sys = LinearSystem::autonomous(a.clone()).unwrap();
        let split = lyapunov_split(&a, None).unwrap();
        let center = AffineSetSum::from_ambient_support(&split.basis_zero, |_| Ok(0.0)).unwrap();
        let controls = vec![PCWControl::constant(vec![0.0])];
        let (steps, _) = choose_steps(&sys, &grid, &controls, EPS_LEVELS[2], 1.0);
        let on_center: Vec<usize> = (0..grid.node_count())
            .filter(|&i| center.distance(&grid.node(i)) < 1e-12)
            .collect();
        let mut previous: Option<Vec<usize>> = None;
        let mut counts = Vec::new();
        for eps in EPS_LEVELS {
            let g = build_chain_graph_with(&sys, &grid, Some(controls.clone()), eps, 1.0, GraphOptions { steps: Some(steps), ..Default::default() }).unwrap();
            let rec = recurrent_nodes(&g);
            let agr = compare_with_set(&g, &rec, &center, collar_constants(&g, &split).unwrap());
            pass &= agr.passes && is_subset(&on_center, &rec);
            if let Some(prev) = &previous {
                pass &= is_subset(&rec, prev);
            }
            counts.push(format!("{} (max dist {:.3}, collar {:.3})", rec.len(), agr.max_outside_distance, agr.collar.collar));
            previous = Some(rec);
        }
        parts.push(format!("diag({}, {}): {}", diag[0], diag[1], counts.join(" > ")));
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn bounded_solutions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let three = LinearSystem::from_rows(
        &[vec![0.5, 1.0, 0.0], vec![-1.0, 0.5, 0.0], vec![0.3, 0.0, -2.0]],
        &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        ControlRange::Box { lo: vec![-1.0, -0.5], hi: vec![2.0, 0.5] },
    )
    .unwrap();
    for sys in [example("saddle.json"), three] {
        let split = lyapunov_split(&sys.a, None).unwrap();
        let verts = sys.range.vertices();
        for _ in 0..100 {
            let w: Vec<f64> = verts.iter().map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            let c: Vec<f64> = (0..sys.control_dim())
                .map(|k| verts.iter().zip(&w).map(|(v, wi)| v[k] * wi / s).sum())
                .collect();
            let e = bounded_solution_e0(&sys, &split, &PCWControl::constant(c.clone()), None).unwrap();
            let r = &sys.a * DVector::from_row_slice(&e.ambient) + &split.proj_h * &sys.b * DVector::from_row_slice(&c);
            worst = worst.max(r.amax());
        }
    }
    let sys = example("saddle.json");
    let split = lyapunov_split(&sys.a, None).unwrap();
    let e = bounded_solution_e0(&sys, &split, &PCWControl::constant(vec![1.0]), None).unwrap();
    let minus_e = [-e.ambient[0], -e.ambient[1]];
    let err = (minus_e[0] - 1.0).abs().max((minus_e[1] + 1.0).abs());
    let inside = membership(&chain_control_set(&sys).unwrap(), &minus_e);
    Verdict {
        pass: worst <= 1e-8 && err <= 1e-8 && inside,
        detail: format!(
            "max residual {worst:.2e} over 200 controls; -e(1,0) = ({:.9}, {:.9}), in E: {inside}",
            minus_e[0], minus_e[1]
        ),
    }
}

fn projective_layer() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut p = || {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            ProjPoint::new(&v).unwrap()
        };
        let (x, y, z) = (p(), p(), p());
        let (dxy, dyz, dxz, dyx) = (proj_distance(&x, &y), proj_distance(&y, &z), proj_distance(&x, &z), proj_distance(&y, &x));
        worst = worst
            .max(proj_distance(&x, &x))
            .max((dxy - dyx).abs())
            .max(dxz - dxy - dyz)
            .max(-dxy);
    }
    let mut excess: f64 = 0.0;
    let mut min_eq = f64::INFINITY;
    for name in ["center_stable.json", "saddle.json"] {
        let sys = example(name);
        let cloud = projective_chain_control_set(&sys, &CloudOptions::default()).unwrap();
        for x in &cloud.preimages {
            if !cloud.chain_control_set.contains(x, 1e-6) {
                excess = f64::INFINITY;
            }
        }
        excess = excess.max(cloud.max_membership_excess);
        if name == "saddle.json" {
            min_eq = cloud.points.iter().map(distance_to_equator).fold(f64::INFINITY, f64::min);
        }
    }
    Verdict {
        pass: worst <= 1e-12 && excess <= 1e-6 && min_eq >= 0.2,
        detail: format!("axiom slack {worst:.1e} on 10^4 triples, membership excess {excess:.1e}, saddle equator distance {min_eq:.4}"),
    }
}

fn duality() -> Verdict {
    let grid = criterion_grid();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["center_stable.json", "saddle.json"] {
        let sys = example(name);
        for family in [ControlFamily::Constant, ControlFamily::TwoPiece] {
            let g = build_chain_graph_with(&sys, &grid, None, 0.1, 1.0, GraphOptions { family, steps: None }).unwrap();
            let rev = reverse_graph(&g);
            let direct = build_time_reversed_graph(&sys.time_reversed(), &grid, &g.controls, 0.1, 1.0, g.steps).unwrap();
            let ok = rev.edges == direct.edges && transpose(&rev.edges) == g.edges;
            pass &= ok;
            parts.push(format!("{name} {family:?}: {} edges {}", g.stats.edge_count, if ok { "equal" } else { "DIFFER" }));
        }
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn witness_soundness() -> Verdict {
    let sys = example("saddle.json");
    let grid = criterion_grid();
    let g = build_chain_graph_with(&sys, &grid, None, 0.1, 1.0, GraphOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut tried, mut failures, mut links) = (0, 0, 0);
    while tried < 100 {
        let x0 = rng.random_range(0..grid.node_count());
        let reach = chain_reachable_from(&g, x0);
        if reach.is_empty() {
            continue;
        }
        let y0 = reach[rng.random_range(0..reach.len())];
        tried += 1;
        match extract_witness(&g, x0, y0) {
            Ok(w) => {
                links += w.len();
                if !validate_witness(&sys, &w, 0.1, 1.0) {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Verdict {
        pass: failures == 0,
        detail: format!("{tried} pairs, {links} links, {failures} failures"),
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("center-stable band", 5.0, center_stable_sets),
        ("saddle square", 5.0, saddle_sets),
        ("oracle agreement", 60.0, oracle_agreement),
        ("autonomous chain recurrence", 60.0, autonomous_recurrence),
        ("bounded solutions", f64::INFINITY, bounded_solutions),
        ("projective layer", f64::INFINITY, projective_layer),
        ("duality", f64::INFINITY, duality),
        ("witness soundness", f64::INFINITY, witness_soundness),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = v.pass && secs < *budget;
        if !pass {
            failed += 1;
        }
        let limit = if budget.is_finite() { format!(" (limit {budget} s)") } else { String::new() };
        println!(
            "criterion {}: {} {name}: {} [{secs:.2} s{limit}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
