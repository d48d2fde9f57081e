//! The sub-Finsler norm as a Minkowski gauge of sampled unit generators.
//!
//! `‖v‖ = min Σλᵢ` over `Σλᵢ xᵢ = v, λ ≥ 0`. With finitely many samples the
//! value is an upper bound that decreases to the true gauge as the sample
//! set refines.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::cone::{ConeModel, SPAN_CUTOFF};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldPoint, TangentVector};
use crate::linalg::{dot, norm, row_space_basis};
use crate::lp::{minimize, LpStatus};

/// Relative disagreement between `samples` and `2·samples` that marks a
/// gauge value as unconverged.
pub const REFINEMENT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeResult {
    pub value: f64,
    /// `(λᵢ, generator index)` with `λᵢ > 0`.
    pub combo: Vec<(f64, usize)>,
    /// Unit generators the program was solved over (component arrays at `base`).
    pub generators: Arc<Vec<Vec<f64>>>,
    pub base: ManifoldPoint,
    /// Value recomputed with twice the samples, when that set differs.
    pub refined_value: Option<f64>,
    pub converged: bool,
}

impl GaugeResult {
    /// `Σ λᵢ xᵢ`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.base.model().comps_len();
        let mut out = vec![0.0; d];
        for &(l, i) in &self.combo {
            for (o, g) in out.iter_mut().zip(&self.generators[i]) {
                *o += l * g;
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "value": self.value,
            "combo": self.combo.iter().map(|&(l, i)| json!({
                "coefficient": l,
                "index": i,
                "generator": self.generators[i],
            })).collect::<Vec<_>>(),
            "generators_used": self.generators.len(),
            "refined_value": self.refined_value,
            "converged": self.converged,
            "point": self.base.to_json(),
        })
    }
}

struct Solved {
    value: f64,
    combo: Vec<(f64, usize)>,
    generators: Arc<Vec<Vec<f64>>>,
}

fn solve(cone: &ConeModel, p: &ManifoldPoint, v: &[f64], samples: usize) -> Result<Solved> {
    let generators = cone.generator_comps(p, samples)?;
    solve_over(&generators, v).map(|(value, combo)| Solved { value, combo, generators })
}

/// Gauge of `v` with respect to the convex hull of `generators` (and their
/// span), returning `(value, combo)`.
pub(crate) fn solve_over(generators: &[Vec<f64>], v: &[f64]) -> Result<(f64, Vec<(f64, usize)>)> {
    let vn = norm(v);
    if vn == 0.0 {
        return Ok((0.0, Vec::new()));
    }
    let d = v.len();
    // Work in an orthonormal basis of the generator span unless it is everything.
    let basis = row_space_basis(generators, d, SPAN_CUTOFF);
    let full = basis.len() == d;
    if !full {
        let mut resid = v.to_vec();
        for bv in &basis {
            let c = dot(v, bv);
            resid.iter_mut().zip(bv).for_each(|(r, x)| *r -= c * x);
        }
        let r = norm(&resid);
        if r > 1e-8 * (1.0 + vn) {
            return Err(Error::NotInSpan(r));
        }
    }
    let projected: Vec<Vec<f64>>;
    let (refs, rhs): (Vec<&[f64]>, Vec<f64>) = if full {
        (generators.iter().map(Vec::as_slice).collect(), v.to_vec())
    } else {
        let project = |x: &[f64]| -> Vec<f64> { basis.iter().map(|bv| dot(x, bv)).collect() };
        projected = generators.iter().map(|g| project(g)).collect();
        (projected.iter().map(Vec::as_slice).collect(), project(v))
    };
    let cost = vec![1.0; refs.len()];
    match minimize(&refs, &cost, &rhs)? {
        LpStatus::Optimal(sol) => {
            let value = sol.support.iter().map(|&(_, x)| x).sum();
            let combo = sol.support.into_iter().map(|(i, x)| (x, i)).collect();
            Ok((value, combo))
        }
        LpStatus::Infeasible(r) => Err(Error::NotInSpan(r)),
    }
}

/// Gauge value only, at the given sample count (no refinement check).
pub fn gauge_value(cone: &ConeModel, p: &ManifoldPoint, v: &[f64], samples: usize) -> Result<f64> {
    Ok(solve(cone, p, v, samples)?.value)
}

/// The sub-Finsler norm of `v` with its realizing combination. The value is
/// recomputed with `2·samples` generators to report convergence.
pub fn gauge_norm(cone: &ConeModel, v: &TangentVector, samples: usize) -> Result<GaugeResult> {
    let s = solve(cone, &v.base, &v.comps, samples)?;
    let finer = cone.generator_comps(&v.base, 2 * samples)?;
    let refined_value = if finer.len() != s.generators.len() {
        Some(solve_over(&finer, &v.comps)?.0)
    } else {
        None
    };
    let converged = refined_value.is_none_or(|f| (s.value - f).abs() <= REFINEMENT_TOL * s.value.max(1.0));
    let result = GaugeResult {
        value: s.value,
        combo: s.combo,
        generators: s.generators,
        base: v.base.clone(),
        refined_value,
        converged,
    };
    let recon = result.reconstruct();
    let err = norm(&recon.iter().zip(&v.comps).map(|(a, b)| a - b).collect::<Vec<_>>());
    if err > 1e-7 * (1.0 + norm(&v.comps)) {
        return Err(Error::InvalidInput(format!("gauge reconstruction error {err:e}")));
    }
    Ok(result)
}

/// Convex hull of the sampled unit generators at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPolytope {
    pub point: ManifoldPoint,
    pub vertices: Vec<Vec<f64>>,
    /// Dimension of the linear span of the vertices.
    pub span_dim: usize,
}

impl BallPolytope {
    /// Gauge of `v` with respect to this polytope.
    pub fn gauge(&self, v: &[f64]) -> Result<f64> {
        Ok(solve_over(&self.vertices, v)?.0)
    }

    pub fn to_json(&self) -> Value {
        json!({ "point": self.point.to_json(), "span_dim": self.span_dim, "vertices": self.vertices })
    }
}

/// Unit ball `conv(D_p ∩ B_g)` from the sampled generators. Every sampled
/// generator has g-norm one and the ball lies inside the strictly convex
/// g-ball, so each distinct generator is a vertex.
pub fn unit_ball(cone: &ConeModel, p: &ManifoldPoint, samples: usize) -> Result<BallPolytope> {
    let gens = cone.generator_comps(p, samples)?;
    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(gens.len());
    for g in gens.iter() {
        if !vertices.iter().any(|v| v.iter().zip(g).all(|(a, b)| (a - b).abs() < 1e-12)) {
            vertices.push(g.clone());
        }
    }
    let span_dim = row_space_basis(&vertices, p.model().comps_len(), SPAN_CUTOFF).len();
    Ok(BallPolytope { point: p.clone(), vertices, span_dim })
}

/// Two independent boundary vectors whose midpoint is also on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatSegment {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub midpoint_gauge: f64,
}

/// Minimum g-distance between the two ends of a reported flat segment, so that
/// polygon edges of a finely sampled strictly convex ball do not count.
pub const FLAT_MIN_SEPARATION: f64 = 0.3;
const FLAT_BUDGET: usize = 200_000;

/// Searches vertex pairs, most promising (largest midpoint g-norm) first, for
/// a midpoint of gauge one. Returns `None` when no pair within budget qualifies.
pub fn find_flat_segment(ball: &BallPolytope) -> Result<Option<FlatSegment>> {
    let vs = &ball.vertices;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..vs.len() {
        for j in (i + 1)..vs.len() {
            let c = dot(&vs[i], &vs[j]);
            let ni = norm(&vs[i]);
            let nj = norm(&vs[j]);
            // Separation |vi − vj|² = ni² + nj² − 2c; independence needs |c| < ni·nj.
            let sep2 = ni * ni + nj * nj - 2.0 * c;
            if sep2 < FLAT_MIN_SEPARATION * FLAT_MIN_SEPARATION || c.abs() > ni * nj * (1.0 - 1e-9) {
                continue;
            }
            let mid2 = 0.25 * (ni * ni + nj * nj + 2.0 * c);
            pairs.push((mid2, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(_, i, j) in pairs.iter().take(FLAT_BUDGET) {
        let mid: Vec<f64> = vs[i].iter().zip(&vs[j]).map(|(a, b)| 0.5 * (a + b)).collect();
        let g = ball.gauge(&mid)?;
        if (g - 1.0).abs() <= 1e-5 {
            return Ok(Some(FlatSegment { v1: vs[i].clone(), v2: vs[j].clone(), midpoint_gauge: g }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldPoint;

    fn at(x: f64, y: f64) -> ManifoldPoint {
        ManifoldPoint::euclidean(vec![x, y])
    }

    #[test]
    fn manhattan_examples() {
        let cone = ConeModel::axis(2);
        let v = TangentVector::new(at(0.0, 0.0), vec![3.0, 4.0]).unwrap();
        let g = gauge_norm(&cone, &v, 4).unwrap();
        assert!((g.value - 7.0).abs() < 1e-12);
        assert!(g.converged && g.refined_value.is_none());
        let z = gauge_norm(&cone, &TangentVector::zero(at(0.0, 0.0)), 4).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(z.combo.is_empty());
    }

    #[test]
    fn scaled_axis_discontinuity() {
        let cone = ConeModel::scaled_axis();
        let v = TangentVector::new(at(0.0, 0.0), vec![1.0, 0.0]).unwrap();
        let g = gauge_norm(&cone, &v, 6).unwrap();
        assert!((g.value - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        let v = TangentVector::new(at(-0.01, 0.0), vec![1.0, 0.0]).unwrap();
        assert!((gauge_norm(&cone, &v, 6).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn not_in_span() {
        let cone = ConeModel::parse("fields:dx;x*dy").unwrap();
        let v = TangentVector::new(at(0.0, 0.0), vec![0.0, 1.0]).unwrap();
        assert!(matches!(gauge_norm(&cone, &v, 4), Err(Error::NotInSpan(_))));
    }

    #[test]
    fn manhattan_ball_and_flat_edge() {
        let ball = unit_ball(&ConeModel::axis(2), &at(0.0, 0.0), 4).unwrap();
        assert_eq!(ball.vertices.len(), 4);
        let flat = find_flat_segment(&ball).unwrap().expect("square has flat edges");
        assert!((flat.midpoint_gauge - 1.0).abs() < 1e-12);
        assert!(dot(&flat.v1, &flat.v2).abs() < 1.0);
    }

    #[test]
    fn round_ball_is_strictly_convex() {
        let ball = unit_ball(&ConeModel::full(2), &at(0.0, 0.0), 256).unwrap();
        assert!(find_flat_segment(&ball).unwrap().is_none());
        let g = ball.gauge(&[0.6, 0.8]).unwrap();
        assert!((g - 1.0).abs() < 1e-3);
    }
}
