//! Upper bounds for the sub-Finsler and sub-conic distances, local
//! connection through the end-point map, and the comparison harness.
//!
//! The sub-Finsler bound optimizes a polyline of chords under the gauge
//! quadrature. The sub-conic bound replaces every chord by a zig-zag of the
//! cone fields realizing its gauge, then closes the remaining gap with flows
//! of generators and their brackets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cone::{ConeKind, ConeModel, SPAN_CUTOFF};
use crate::error::{Error, Result};
use crate::flows::{bracket_flow, endpoint_gap, flow, realize_vector, zigzag, AdmissiblePath, BracketExpr, FieldExpr};
use crate::gauge::gauge_value;
use crate::geometry::{log_map, move_point, tangent_basis, ManifoldPoint, Model, TangentVector};
use crate::linalg::{dot, norm, row_space_basis};
use crate::poly::PolyField;

const AIM_ROUNDS: usize = 4;
const AIM_TRIGGER: f64 = 0.1;

/// Environment variable capping the worker count of [`compare_metrics`].
pub const THREADS_ENV: &str = "SUBCONIC_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectParams {
    /// Largest chart gap `local_connect` accepts.
    pub reach: f64,
    /// Residual (chart norm) required at exit.
    pub residual: f64,
    pub max_iterations: usize,
}

impl Default for ConnectParams {
    fn default() -> Self {
        Self { reach: 1e-2, residual: 1e-7, max_iterations: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricParams {
    /// Interior node counts of the sub-Finsler polyline, refined in order.
    pub k_schedule: Vec<usize>,
    /// Zig-zag repetitions per polyline segment.
    pub n: usize,
    /// Generator samples for gauge evaluations (`None`: the cone default).
    pub samples: Option<usize>,
    /// Pattern-search sweeps per K level.
    pub max_sweeps: usize,
    /// Smallest pattern step, relative to the initial polyline length.
    pub step_tol: f64,
    /// Allowed gauge refinement disagreement when realizing, relative to
    /// the realized vector's gauge.
    pub realize_tol: f64,
    pub connect: ConnectParams,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            k_schedule: vec![4, 8, 16, 32],
            n: 64,
            samples: None,
            max_sweeps: 60,
            step_tol: 1e-4,
            realize_tol: 5e-3,
            connect: ConnectParams::default(),
        }
    }
}

impl MetricParams {
    fn samples(&self, cone: &ConeModel) -> usize {
        self.samples.unwrap_or_else(|| cone.default_samples())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "k_schedule": self.k_schedule,
            "n": self.n,
            "samples": self.samples,
            "max_sweeps": self.max_sweeps,
            "step_tol": self.step_tol,
            "realize_tol": self.realize_tol,
            "connect_reach": self.connect.reach,
            "connect_residual": self.connect.residual,
            "connect_max_iterations": self.connect.max_iterations,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    SubconicUpper,
    SubfinslerUpper,
}

impl EstimateKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateKind::SubconicUpper => "subconic_upper",
            EstimateKind::SubfinslerUpper => "subfinsler_upper",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    /// Chord polyline (sub-Finsler) or admissible flow path (sub-conic).
    pub witness: AdmissiblePath,
    /// `(K, best value so far)` for sub-Finsler, `(N, value)` for sub-conic.
    pub convergence: Vec<(usize, f64)>,
    /// Gap closed by `local_connect` (zero for sub-Finsler estimates).
    pub connect_gap: f64,
    /// Riemannian length of the connecting path.
    pub correction: f64,
    pub flags: Vec<String>,
}

impl DistanceEstimate {
    fn zero(p: &ManifoldPoint, kind: EstimateKind) -> Self {
        Self {
            value: 0.0,
            kind,
            witness: AdmissiblePath::empty(p.clone()),
            convergence: Vec::new(),
            connect_gap: 0.0,
            correction: 0.0,
            flags: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "value": self.value,
            "kind": self.kind.name(),
            "convergence": self.convergence,
            "connect_gap": self.connect_gap,
            "correction": self.correction,
            "flags": self.flags,
            "witness": self.witness.to_json(),
        })
    }
}

fn same_point(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<bool> {
    Ok(endpoint_gap(p, q)? == 0.0)
}

/// Point at fraction `s` of the chord from `a` to `b`. Chords of the sphere
/// that leave the band are pushed back inside, which is flagged.
fn interpolate(a: &ManifoldPoint, b: &ManifoldPoint, s: f64, flags: &mut Vec<String>) -> Result<ManifoldPoint> {
    let v = log_map(a, b)?;
    match (move_point(a, &v, s), a.model()) {
        (Ok(x), _) => Ok(x),
        (Err(Error::InvariantViolated(_)), Model::BandedSphere { band }) => {
            let x = a.coords();
            let speed = v.g_norm();
            let (sn, cs) = (s * speed).sin_cos();
            let y: Vec<f64> = (0..3).map(|i| cs * x[i] + sn * v.comps[i] / speed).collect();
            let z = y[2].clamp(-0.99 * band, 0.99 * band);
            let rho = (1.0 - z * z).sqrt() / (y[0] * y[0] + y[1] * y[1]).sqrt();
            flags.push(format!("node projected back into the band (|z| was {:.6})", y[2].abs()));
            ManifoldPoint::banded_sphere(band, [y[0] * rho, y[1] * rho, z])
        }
        (Err(e), _) => Err(e),
    }
}

/// Trapezoid gauge length of the chord from `a` to `b`.
fn chord_cost(cone: &ConeModel, a: &ManifoldPoint, b: &ManifoldPoint, samples: usize) -> Result<f64> {
    let ga = gauge_value(cone, a, &log_map(a, b)?.comps, samples)?;
    let gb = gauge_value(cone, b, &log_map(b, a)?.comps, samples)?;
    Ok(0.5 * (ga + gb))
}

fn chord_length(a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    Ok(0.5 * (log_map(a, b)?.g_norm() + log_map(b, a)?.g_norm()))
}

/// Nodes at equal chord-length spacing along a polyline, `k` interior ones.
fn resample(nodes: &[ManifoldPoint], k: usize, flags: &mut Vec<String>) -> Result<Vec<ManifoldPoint>> {
    let lens = nodes.windows(2).map(|w| chord_length(&w[0], &w[1])).collect::<Result<Vec<_>>>()?;
    let total: f64 = lens.iter().sum();
    let mut out = vec![nodes[0].clone()];
    let mut seg = 0;
    let mut before = 0.0;
    for j in 1..=k {
        let target = total * j as f64 / (k + 1) as f64;
        while seg + 1 < lens.len() && before + lens[seg] < target {
            before += lens[seg];
            seg += 1;
        }
        let s = if lens[seg] > 0.0 { ((target - before) / lens[seg]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(interpolate(&nodes[seg], &nodes[seg + 1], s, flags)?);
    }
    out.push(nodes.last().unwrap().clone());
    Ok(out)
}

struct Polyline<'a> {
    cone: &'a ConeModel,
    samples: usize,
    nodes: Vec<ManifoldPoint>,
    costs: Vec<f64>,
}

impl<'a> Polyline<'a> {
    fn new(cone: &'a ConeModel, samples: usize, nodes: Vec<ManifoldPoint>) -> Result<Self> {
        let costs = nodes.windows(2).map(|w| chord_cost(cone, &w[0], &w[1], samples)).collect::<Result<Vec<_>>>()?;
        Ok(Self { cone, samples, nodes, costs })
    }

    fn value(&self) -> f64 {
        self.costs.iter().sum()
    }

    /// Cyclic coordinate pattern search over the interior nodes.
    fn optimize(&mut self, step0: f64, min_step: f64, max_sweeps: usize) {
        let mut step = step0;
        let k = self.nodes.len() - 2;
        for _ in 0..max_sweeps {
            if step < min_step {
                break;
            }
            let before = self.value();
            for j in 1..=k {
                let basis = tangent_basis(&self.nodes[j]);
                for e in &basis {
                    for sign in [1.0, -1.0] {
                        let here = &self.nodes[j];
                        let dir = TangentVector { base: here.clone(), comps: e.clone() };
                        let Ok(cand) = move_point(here, &dir, sign * step) else { continue };
                        let left = chord_cost(self.cone, &self.nodes[j - 1], &cand, self.samples);
                        let right = chord_cost(self.cone, &cand, &self.nodes[j + 1], self.samples);
                        let (Ok(l), Ok(r)) = (left, right) else { continue };
                        let old = self.costs[j - 1] + self.costs[j];
                        if l + r < old - 1e-14 * old.max(1e-300) {
                            self.nodes[j] = cand;
                            self.costs[j - 1] = l;
                            self.costs[j] = r;
                        }
                    }
                }
            }
            // Negligible gains (drift along flat directions of the gauge) shrink it too.
            if before - self.value() <= 1e-5 * before {
                step *= 0.5;
            }
        }
    }

    fn into_path(self) -> Result<AdmissiblePath> {
        let mut path = AdmissiblePath::empty(self.nodes[0].clone());
        for x in self.nodes.into_iter().skip(1) {
            path.push_chord(x)?;
        }
        Ok(path)
    }
}

/// Sub-Finsler distance upper bound from an optimized chord polyline,
/// refined over `params.k_schedule`.
pub fn subfinsler_distance_upper(
    cone: &ConeModel,
    p: &ManifoldPoint,
    q: &ManifoldPoint,
    params: &MetricParams,
) -> Result<DistanceEstimate> {
    cone.check_domain(p)?;
    cone.check_domain(q)?;
    if same_point(p, q)? {
        return Ok(DistanceEstimate::zero(p, EstimateKind::SubfinslerUpper));
    }
    if params.k_schedule.is_empty() {
        return Err(Error::InvalidInput("empty K schedule".into()));
    }
    let samples = params.samples(cone);
    let mut flags = Vec::new();
    let length = chord_length(p, q)?;
    let min_step = params.step_tol * length;
    let mut nodes = vec![p.clone(), q.clone()];
    let mut best: Option<(f64, Vec<ManifoldPoint>)> = None;
    let mut convergence = Vec::new();
    for &k in &params.k_schedule {
        let start = resample(&nodes, k, &mut flags)?;
        let mut poly = Polyline::new(cone, samples, start)?;
        let spacing = length / (k + 1) as f64;
        poly.optimize(0.5 * spacing, min_step, params.max_sweeps);
        let value = poly.value();
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, poly.nodes.clone()));
        }
        let (b, bn) = best.as_ref().unwrap();
        convergence.push((k, *b));
        nodes = bn.clone();
    }
    let (value, nodes) = best.unwrap();
    let witness = Polyline { cone, samples, nodes, costs: Vec::new() }.into_path()?;
    flags.dedup();
    Ok(DistanceEstimate {
        value,
        kind: EstimateKind::SubfinslerUpper,
        witness,
        convergence,
        connect_gap: 0.0,
        correction: 0.0,
        flags,
    })
}

/// Admissible path following a polyline: each chord, taken from the current
/// point, is realized by cone fields and replaced by their zig-zag; the
/// remaining gap to the last node is closed by `local_connect`.
fn zigzag_along(cone: &ConeModel, nodes: &[ManifoldPoint], n: usize, params: &MetricParams) -> Result<DistanceEstimate> {
    let samples = params.samples(cone);
    let q = nodes.last().unwrap();
    let mut path = AdmissiblePath::empty(nodes[0].clone());
    for (i, target) in nodes.iter().enumerate().skip(1) {
        let x = path.end().clone();
        let v = log_map(&x, target)?;
        let size = v.g_norm();
        if size == 0.0 {
            continue;
        }
        // The zig-zag tracks the flow of the summed fields, which misses the
        // chord end to second order; re-aim by the miss until it is well
        // inside the local reach.
        let mut aim = v.clone();
        let mut best: Option<(f64, AdmissiblePath)> = None;
        for _ in 0..AIM_ROUNDS {
            let real = realize_vector(cone, &aim, params.realize_tol * size, samples, i - 1)?;
            let z = zigzag(&x, &real.fields(), 1.0, n)?;
            let miss = endpoint_gap(z.end(), target)?;
            let reached = log_map(&x, z.end()).ok();
            if best.as_ref().is_none_or(|(m, _)| miss < *m) {
                best = Some((miss, z));
            }
            let Some(reached) = reached.filter(|_| miss > AIM_TRIGGER * params.connect.reach) else {
                break;
            };
            let comps = aim.comps.iter().zip(&v.comps).zip(&reached.comps).map(|((a, t), r)| a + t - r).collect();
            aim = TangentVector::projected(x.clone(), comps)?;
        }
        path = path.concat(best.unwrap().1)?;
    }
    let gap = endpoint_gap(path.end(), q)?;
    let connect = local_connect(cone, path.end(), q, &params.connect)?;
    let correction = connect.riemannian_length();
    let path = path.concat(connect)?;
    Ok(DistanceEstimate {
        value: path.riemannian_length(),
        kind: EstimateKind::SubconicUpper,
        witness: path,
        convergence: vec![(n, 0.0)],
        connect_gap: gap,
        correction,
        flags: Vec::new(),
    })
    .map(|mut d| {
        d.convergence[0].1 = d.value;
        d
    })
}

/// Sub-conic distance upper bound: the optimized sub-Finsler polyline made
/// admissible by zig-zags with `params.n` repetitions per segment.
pub fn subconic_distance_upper(
    cone: &ConeModel,
    p: &ManifoldPoint,
    q: &ManifoldPoint,
    params: &MetricParams,
) -> Result<DistanceEstimate> {
    cone.check_domain(p)?;
    cone.check_domain(q)?;
    if same_point(p, q)? {
        return Ok(DistanceEstimate::zero(p, EstimateKind::SubconicUpper));
    }
    let sf = subfinsler_distance_upper(cone, p, q, params)?;
    let mut d = zigzag_along(cone, &sf.witness.nodes, params.n, params)?;
    d.flags = sf.flags;
    Ok(d)
}

/// Flows used by the end-point map at `p`: generator fields first, then
/// length-two brackets in lexicographic order when the generators alone do
/// not span.
fn connect_moves(cone: &ConeModel, p: &ManifoldPoint) -> Result<Vec<BracketExpr>> {
    let dim = p.model().tangent_dim();
    let fields: Vec<FieldExpr> = match &cone.kind {
        ConeKind::ScaledAxis | ConeKind::Generator { .. } => {
            cone.poly_fields().unwrap().into_iter().map(FieldExpr::Poly).collect()
        }
        ConeKind::Axis { dim } | ConeKind::Full { dim } => (0..*dim)
            .map(|i| {
                let mut e = vec![0.0; *dim];
                e[i] = 1.0;
                FieldExpr::Poly(PolyField::constant(&e))
            })
            .collect(),
        ConeKind::BandSphere { .. } | ConeKind::SubTwistor { .. } => {
            let gens = cone.generator_comps(p, cone.default_samples())?;
            spanning_subset(&gens, dim)
                .into_iter()
                .map(|i| cone.field_through(p, &gens[i]))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let values = fields.iter().map(|f| Ok(f.eval(p)?.comps)).collect::<Result<Vec<_>>>()?;
    let mut moves: Vec<BracketExpr> = fields.iter().cloned().map(BracketExpr::Field).collect();
    if row_space_basis(&values, p.model().comps_len(), SPAN_CUTOFF).len() < dim {
        for i in 0..fields.len() {
            for j in (i + 1)..fields.len() {
                let br = BracketExpr::bracket(BracketExpr::Field(fields[i].clone()), BracketExpr::Field(fields[j].clone()));
                if br.poly_field().is_some_and(|f| !f.is_zero()) {
                    moves.push(br);
                }
            }
        }
    }
    Ok(moves)
}

/// Greedy pivoted selection of `dim` well-conditioned vectors.
fn spanning_subset(vs: &[Vec<f64>], dim: usize) -> Vec<usize> {
    let mut resid: Vec<Vec<f64>> = vs.to_vec();
    let mut chosen = Vec::new();
    for _ in 0..dim {
        let (i, n) = resid
            .iter()
            .enumerate()
            .map(|(i, r)| (i, norm(r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        if n < 1e-9 {
            break;
        }
        chosen.push(i);
        let u: Vec<f64> = resid[i].iter().map(|x| x / n).collect();
        for r in resid.iter_mut() {
            let c = dot(r, &u);
            r.iter_mut().zip(&u).for_each(|(a, b)| *a -= c * b);
        }
    }
    chosen
}

fn run_moves(p: &ManifoldPoint, moves: &[BracketExpr], times: &[f64]) -> Result<AdmissiblePath> {
    let mut path = AdmissiblePath::empty(p.clone());
    for (m, &t) in moves.iter().zip(times) {
        if t == 0.0 {
            continue;
        }
        let piece = match m {
            BracketExpr::Field(f) => flow(path.end(), f, t, crate::flows::default_steps(t))?,
            br => bracket_flow(path.end(), br, t)?,
        };
        path = path.concat(piece)?;
    }
    Ok(path)
}

/// Connects `p` to a nearby `q` by flows of generators (and brackets) whose
/// times solve the end-point equation by damped least squares.
pub fn local_connect(cone: &ConeModel, p: &ManifoldPoint, q: &ManifoldPoint, params: &ConnectParams) -> Result<AdmissiblePath> {
    let target = log_map(p, q)?.comps;
    let gap = norm(&target);
    if gap == 0.0 {
        return Ok(AdmissiblePath::empty(p.clone()));
    }
    if gap > params.reach {
        return Err(Error::GapTooLarge { gap, reach: params.reach });
    }
    let moves = connect_moves(cone, p)?;
    let m = moves.len();
    let d = target.len();
    let residual = |t: &[f64]| -> Result<Vec<f64>> {
        let end = run_moves(p, &moves, t)?;
        Ok(log_map(p, end.end())?.comps.iter().zip(&target).map(|(a, b)| a - b).collect())
    };
    let jacobian = |t: &[f64]| -> Result<DMatrix<f64>> {
        let h = 1e-6 * gap.sqrt().max(1e-3);
        let mut j = DMatrix::zeros(d, m);
        for c in 0..m {
            let mut tp = t.to_vec();
            let mut tm = t.to_vec();
            tp[c] += h;
            tm[c] -= h;
            let rp = residual(&tp)?;
            let rm = residual(&tm)?;
            for r in 0..d {
                j[(r, c)] = (rp[r] - rm[r]) / (2.0 * h);
            }
        }
        Ok(j)
    };
    let j0 = jacobian(&vec![0.0; m])?;
    let sv = j0.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if sv.iter().filter(|s| **s > 1e-6 * smax.max(1e-300)).count() < p.model().tangent_dim() {
        return Err(Error::ChowViolated);
    }
    let mut t = vec![0.0; m];
    let mut r = residual(&t)?;
    let mut rn = norm(&r);
    let mut mu = 1e-12 * (j0.transpose() * &j0).trace() / m as f64;
    let mut j = j0;
    let mut iterations = 0;
    while rn > params.residual && iterations < params.max_iterations {
        iterations += 1;
        let jt = j.transpose();
        let a = &jt * &j + DMatrix::identity(m, m) * mu;
        let g = &jt * DVector::from_column_slice(&r);
        let Some(delta) = a.lu().solve(&g) else { break };
        let cand: Vec<f64> = t.iter().zip(delta.iter()).map(|(x, dx)| x - dx).collect();
        match residual(&cand) {
            Ok(rc) if norm(&rc) < rn => {
                t = cand;
                r = rc;
                rn = norm(&r);
                mu = (mu / 3.0).max(1e-300);
                j = jacobian(&t)?;
            }
            _ => mu = mu.max(1e-12) * 4.0,
        }
    }
    if rn > params.residual {
        return Err(Error::ConnectFailed { residual: rn, iterations });
    }
    run_moves(p, &moves, &t)
}

/// Seeded random point pairs for a cone's model: boxes `[-1, 1]ⁿ` in ℝⁿ,
/// band-interior points (|z| ≤ 0.6c) at angles in `[0.3, 2]` on the sphere,
/// and planes near `⟨e₁, e₂⟩` with partners at g-distance `[0.2, 0.5]` along
/// a retraction on the period space.
pub fn sample_pairs(cone: &ConeModel, count: usize, seed: u64) -> Result<Vec<(ManifoldPoint, ManifoldPoint)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let pair = match cone.model() {
            Model::Euclidean { dim } => {
                let mut pt = || ManifoldPoint::euclidean((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
                Some((pt(), pt()))
            }
            Model::BandedSphere { band } => {
                let mut pt = || {
                    let z: f64 = rng.gen_range(-0.6..0.6) * band;
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let r = (1.0 - z * z).sqrt();
                    ManifoldPoint::banded_sphere(band, [r * phi.cos(), r * phi.sin(), z])
                };
                let (p, q) = (pt()?, pt()?);
                let angle = endpoint_gap(&p, &q)?;
                (0.3..=2.0).contains(&angle).then_some((p, q))
            }
            Model::PeriodSpace { b } => {
                let mut basis = |k: usize| -> Vec<f64> {
                    (0..b).map(|i| 0.3 * rng.gen_range(-1.0..1.0) + if i == k { 1.0 } else { 0.0 }).collect()
                };
                let (a1, a2) = (basis(0), basis(1));
                let dir: Vec<f64> = (0..2 * (b - 2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let len = rng.gen_range(0.2..0.5) / norm(&dir);
                match ManifoldPoint::period_plane(&a1, &a2) {
                    Ok(p) => {
                        let v = TangentVector { base: p.clone(), comps: dir.iter().map(|x| x * len).collect() };
                        move_point(&p, &v, 1.0).ok().filter(|q| log_map(q, &p).is_ok()).map(|q| (p, q))
                    }
                    Err(_) => None,
                }
            }
        };
        out.extend(pair);
    }
    Ok(out)
}

/// One pair of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub index: usize,
    pub d_sf: f64,
    pub d_sf_by_k: Vec<(usize, f64)>,
    /// `(N, sub-conic upper bound)`.
    pub d_d: Vec<(usize, f64)>,
    /// `(N, (d_D − d_sF)/d_sF)`; zero when both vanish.
    pub gap: Vec<(usize, f64)>,
    pub connect_gap: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub pairs: Vec<PairReport>,
    pub n_schedule: Vec<usize>,
}

impl ComparisonReport {
    /// Largest relative gap over pairs at each N.
    pub fn max_gap_by_n(&self) -> Vec<(usize, f64)> {
        self.n_schedule
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, self.pairs.iter().map(|p| p.gap[i].1).fold(f64::NEG_INFINITY, f64::max)))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n_schedule": self.n_schedule,
            "max_gap_by_n": self.max_gap_by_n(),
            "pairs": self.pairs.iter().map(|p| json!({
                "index": p.index,
                "d_sf": p.d_sf,
                "d_sf_by_k": p.d_sf_by_k,
                "d_d": p.d_d,
                "gap": p.gap,
                "connect_gap": p.connect_gap,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Worker count from `SUBCONIC_THREADS`, defaulting to the hardware.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn compare_pair(
    cone: &ConeModel,
    index: usize,
    p: &ManifoldPoint,
    q: &ManifoldPoint,
    n_schedule: &[usize],
    params: &MetricParams,
) -> Result<PairReport> {
    let sf = subfinsler_distance_upper(cone, p, q, params)?;
    let mut d_d = Vec::new();
    let mut gap = Vec::new();
    let mut connect_gap = Vec::new();
    for &n in n_schedule {
        let (value, cg) = if sf.witness.is_empty() {
            (0.0, 0.0)
        } else {
            let d = zigzag_along(cone, &sf.witness.nodes, n, params)?;
            (d.value, d.connect_gap)
        };
        d_d.push((n, value));
        gap.push((n, if sf.value > 0.0 { (value - sf.value) / sf.value } else { 0.0 }));
        connect_gap.push((n, cg));
    }
    Ok(PairReport { index, d_sf: sf.value, d_sf_by_k: sf.convergence, d_d, gap, connect_gap })
}

/// Both estimates for every pair across the N schedule, pairs spread over
/// `worker_count()` threads and reported in input order.
pub fn compare_metrics(
    cone: &ConeModel,
    pairs: &[(ManifoldPoint, ManifoldPoint)],
    n_schedule: &[usize],
    params: &MetricParams,
) -> Result<ComparisonReport> {
    if n_schedule.is_empty() || n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("N schedule must be non-empty and ascending".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let pairs = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, (p, q))| compare_pair(cone, i, p, q, n_schedule, params))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ComparisonReport { pairs, n_schedule: n_schedule.to_vec() })
}
