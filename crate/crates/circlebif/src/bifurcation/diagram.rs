//! Diagram assembly: seed the saddle-node system from boundary-edge and
//! interior slice scans, trace every distinct curve, then attach cusps,
//! horizontal tangencies, intersections and boundary hits per rotation
//! number.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::family::{FamilySpec, ParamPoint};
use crate::linalg::{dist3, point_polyline_dist};
use crate::rational::Rational;
use crate::rotation::{rational_holds_at, ZERO_TOL};
use crate::scalar::{count, linspace, real, Scalar};

use super::special::{
    find_cusps, find_intersections, find_special_points, CuspPoint, IntersectionRecord,
    SpecialPoint, TangentDirection,
};
use super::trace::{trace_curve, BoxEdge, SaddleNodeCurve, StepControl, Termination};
use super::{solve_saddle_node, ContinuationSystem, Frozen, SnPoint};

/// Seeds closer than this to an already-traced curve are the same
/// component.
const SEED_SKIP: f64 = 1e-4;
/// Symmetric polyline distance below which two traced curves are merged as
/// duplicates.
const CURVE_DEDUPE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CurveEnd {
    Start,
    End,
}

/// A curve endpoint that landed on the parameter-box boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundaryHit<S> {
    pub curve: usize,
    pub end: CurveEnd,
    pub pos: [S; 3],
    pub edge: BoxEdge,
    pub near_corner: bool,
}

/// A distinguished tangent point on a traced curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TangentRef<S> {
    pub curve: usize,
    pub pos: [S; 3],
    pub tangent: [S; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BifurcationDiagram<S> {
    pub pq: Rational,
    pub curves: Vec<SaddleNodeCurve<S>>,
    pub cusps: Vec<CuspPoint<S>>,
    pub horizontal_tangents: Vec<TangentRef<S>>,
    pub intersections: Vec<IntersectionRecord<S>>,
    pub boundary_hits: Vec<BoundaryHit<S>>,
    /// Per curve: the rotation number was re-confirmed by the orbit test at
    /// a mid-curve parameter.
    pub rotation_confirmed: Vec<bool>,
}

#[derive(Clone, Copy)]
enum Axis {
    S,
    Theta,
}

/// Assembles one diagram per rotation number: seeds from the four boundary
/// edges and from interior slice scans in both axes, traced curves
/// deduplicated, special points attached.
pub fn assemble_diagram<S: Scalar>(
    spec: &FamilySpec<S>,
    pq_list: &[Rational],
    scan_grid: usize,
) -> Vec<BifurcationDiagram<S>> {
    pq_list
        .iter()
        .map(|&pq| assemble_one(spec, pq, scan_grid.max(4)))
        .collect()
}

fn assemble_one<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    scan_grid: usize,
) -> BifurcationDiagram<S> {
    let b = spec.param_box;
    let q = pq.denom() as usize;
    let n_x = (128 * q).max(128);
    let edge_free = (8 * scan_grid).max(128);
    let interior_free = (4 * scan_grid).max(48);

    // Slice jobs: the four edges plus interior slices in both directions.
    let mut jobs: Vec<(Axis, S, usize)> = vec![
        (Axis::S, b.s[0], edge_free),
        (Axis::S, b.s[1], edge_free),
        (Axis::Theta, b.theta[0], edge_free),
        (Axis::Theta, b.theta[1], edge_free),
    ];
    for (axis, range) in [(Axis::S, b.s), (Axis::Theta, b.theta)] {
        let grid = linspace(range[0], range[1], scan_grid + 2);
        for &v in &grid[1..grid.len() - 1] {
            jobs.push((axis, v, interior_free));
        }
    }
    let mut seeds: Vec<SnPoint<S>> = jobs
        .par_iter()
        .map(|&(axis, value, n_free)| slice_seeds(spec, pq, axis, value, n_free, n_x))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    seeds.sort_by(|a, b| a.pos.partial_cmp(&b.pos).unwrap_or(std::cmp::Ordering::Equal));
    seeds.dedup_by(|a, b| dist3(a.pos, b.pos) < real(1e-9));

    // Trace one curve per distinct component.
    let mut curves: Vec<SaddleNodeCurve<S>> = Vec::new();
    for seed in &seeds {
        let on_existing = curves.iter().any(|c| {
            point_polyline_dist(seed.pos, &c.positions()) < real(SEED_SKIP)
        });
        if on_existing {
            continue;
        }
        let Ok(curve) = trace_curve(spec, pq, seed, StepControl::default()) else {
            continue;
        };
        if curve.points.len() < 2 {
            continue;
        }
        let duplicate = curves.iter().any(|c| curves_identical(c, &curve));
        if !duplicate {
            curves.push(curve);
        }
    }
    sort_curves(&mut curves);

    // Cusps: an independent 3-variable Newton from the converged seeds and
    // from subsampled curve points, merged with the cusp terminations found
    // while tracing.
    let mut cusp_seeds: Vec<[S; 3]> = seeds.iter().map(|s| s.pos).collect();
    for curve in &curves {
        for p in curve.points.iter().step_by(16) {
            cusp_seeds.push(p.pos);
        }
        for t in [&curve.termination_start, &curve.termination_end] {
            if let Termination::Cusp { at, .. } = t {
                cusp_seeds.push(*at);
            }
        }
    }
    let cusps = find_cusps(spec, pq, &cusp_seeds);
    for curve in &mut curves {
        for t in [&mut curve.termination_start, &mut curve.termination_end] {
            if let Termination::Cusp { at, index } = t {
                *index = cusps
                    .iter()
                    .position(|c| dist3(c.pos, *at) < real(1e-4));
            }
        }
    }

    let mut horizontal_tangents = Vec::new();
    for (i, curve) in curves.iter().enumerate() {
        if let Ok(points) = find_special_points(spec, curve, TangentDirection::Horizontal) {
            for SpecialPoint { pos, tangent } in points {
                horizontal_tangents.push(TangentRef { curve: i, pos, tangent });
            }
        }
    }

    let intersections = find_intersections(spec, &curves);

    let mut boundary_hits = Vec::new();
    for (i, curve) in curves.iter().enumerate() {
        let ends = [
            (CurveEnd::Start, &curve.termination_start, curve.points.first()),
            (CurveEnd::End, &curve.termination_end, curve.points.last()),
        ];
        for (end, term, point) in ends {
            if let (Termination::Boundary { edge, near_corner }, Some(p)) = (term, point) {
                boundary_hits.push(BoundaryHit {
                    curve: i,
                    end,
                    pos: p.pos,
                    edge: *edge,
                    near_corner: *near_corner,
                });
            }
        }
    }

    let rotation_confirmed = curves
        .iter()
        .map(|c| {
            let mid = c.points[c.points.len() / 2].pos;
            rational_holds_at(spec, ParamPoint::new(mid[0], mid[1]), pq, real(ZERO_TOL))
        })
        .collect();

    BifurcationDiagram {
        pq,
        curves,
        cusps,
        horizontal_tangents,
        intersections,
        boundary_hits,
        rotation_confirmed,
    }
}

/// Corner-sign scan of one slice (frozen s or theta): cells of the
/// (free parameter) x (phase) grid where both H1 and H2 mix signs feed a
/// frozen-coordinate Newton.
fn slice_seeds<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    axis: Axis,
    value: S,
    n_free: usize,
    n_x: usize,
) -> Vec<SnPoint<S>> {
    let b = spec.param_box;
    let free_range = match axis {
        Axis::S => b.theta,
        Axis::Theta => b.s,
    };
    let free_grid = linspace(free_range[0], free_range[1], n_free + 1);
    let pos_of = |free: S, x: S| -> [S; 3] {
        match axis {
            Axis::S => [value, free, x],
            Axis::Theta => [free, value, x],
        }
    };
    let frozen = match axis {
        Axis::S => Frozen::S,
        Axis::Theta => Frozen::Theta,
    };

    let mut h1 = vec![vec![S::zero(); n_x + 1]; n_free + 1];
    let mut h2 = vec![vec![S::zero(); n_x + 1]; n_free + 1];
    for (i, &free) in free_grid.iter().enumerate() {
        for j in 0..=n_x {
            let x = count::<S>(j) / count::<S>(n_x);
            let sys = ContinuationSystem::at(spec, pq, pos_of(free, x));
            h1[i][j] = sys.h1;
            h2[i][j] = sys.h2;
        }
    }

    let mut seeds = Vec::new();
    for i in 0..n_free {
        for j in 0..n_x {
            let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
            let mix = |v: &Vec<Vec<S>>| {
                let s0 = v[corners[0].0][corners[0].1].signum();
                corners.iter().any(|&(a, c)| v[a][c].signum() != s0)
            };
            if !(mix(&h1) && mix(&h2)) {
                continue;
            }
            let free_mid = (free_grid[i] + free_grid[i + 1]) * real(0.5);
            let x_mid = (count::<S>(j) + real(0.5)) / count::<S>(n_x);
            if let Ok(pt) = solve_saddle_node(spec, pq, pos_of(free_mid, x_mid), frozen) {
                let wrapped = {
                    let mut p = pt.pos;
                    p[2] = p[2] - p[2].floor();
                    p
                };
                let inside = wrapped[0] >= b.s[0] - real(1e-9)
                    && wrapped[0] <= b.s[1] + real(1e-9)
                    && wrapped[1] >= b.theta[0] - real(1e-9)
                    && wrapped[1] <= b.theta[1] + real(1e-9);
                if inside {
                    seeds.push(SnPoint { pos: wrapped, ..pt });
                }
            }
        }
    }
    seeds
}

/// Two traced curves sample the same component when each endpoint pair
/// matches and a symmetric point-to-polyline pass stays below the merge
/// tolerance (padded by the sampling sagitta).
fn curves_identical<S: Scalar>(a: &SaddleNodeCurve<S>, b: &SaddleNodeCurve<S>) -> bool {
    let pa = a.positions();
    let pb = b.positions();
    if pa.is_empty() || pb.is_empty() {
        return false;
    }
    let ends_match = {
        let (a0, a1) = (pa[0], pa[pa.len() - 1]);
        let (b0, b1) = (pb[0], pb[pb.len() - 1]);
        let tol = real::<S>(1e-5);
        (dist3(a0, b0) < tol && dist3(a1, b1) < tol)
            || (dist3(a0, b1) < tol && dist3(a1, b0) < tol)
    };
    if !ends_match {
        return false;
    }
    let sagitta = sagitta_bound(&pb).max(sagitta_bound(&pa));
    let tol = real::<S>(CURVE_DEDUPE).max(sagitta * real(2.0));
    let one_sided = |from: &[[S; 3]], to: &[[S; 3]]| {
        from.iter()
            .all(|&p| point_polyline_dist(p, to) < tol)
    };
    one_sided(&pa, &pb) && one_sided(&pb, &pa)
}

/// Crude bound on the polyline's deviation from the smooth curve it
/// samples: segment length times the turn angle between neighbours.
fn sagitta_bound<S: Scalar>(points: &[[S; 3]]) -> S {
    let mut bound = S::zero();
    for w in points.windows(3) {
        let d1 = [w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]];
        let d2 = [w[2][0] - w[1][0], w[2][1] - w[1][1], w[2][2] - w[1][2]];
        let n1 = crate::linalg::norm3(d1);
        let n2 = crate::linalg::norm3(d2);
        if n1 == S::zero() || n2 == S::zero() {
            continue;
        }
        let cosang = (crate::linalg::dot3(d1, d2) / (n1 * n2)).min(S::one()).max(-S::one());
        let turn = cosang.acos();
        bound = bound.max(n1.max(n2) * turn * real(0.25));
    }
    bound
}

fn sort_curves<S: Scalar>(curves: &mut [SaddleNodeCurve<S>]) {
    curves.sort_by(|a, b| {
        let key = |c: &SaddleNodeCurve<S>| -> [S; 3] {
            let first = c.points.first().map(|p| p.pos).unwrap_or([S::zero(); 3]);
            let last = c.points.last().map(|p| p.pos).unwrap_or([S::zero(); 3]);
            if first.partial_cmp(&last) == Some(std::cmp::Ordering::Greater) {
                last
            } else {
                first
            }
        };
        key(a)
            .partial_cmp(&key(b))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}
