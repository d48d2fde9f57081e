//! Twistor spheres in the period space: construction, exact rotations,
//! rank-one decomposition of tangents, sphere chains and chain distance.
//!
//! A positive 3-space `T` carries the 2-sphere of oriented planes inside it.
//! Planes of `T` are identified with unit normals in the coordinates of a
//! q-orthonormal triple, `(a, b, n)` right-handed for the plane basis `(a, b)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde_json::{json, Value};

use crate::cone::{fibonacci_sphere, twistor_contains, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::flows::{twistor_rotate, FieldExpr};
use crate::geometry::{adapted_frame, log_map, positive_perp, qdot, ManifoldPoint, Model, TangentVector};
use crate::linalg::{axpy, cross, dot, norm, row_space_basis};

/// Containment tolerance for planes inside a 3-space.
pub const CONTAIN_TOL: f64 = 1e-8;
/// Positivity margin of the pieces produced by [`rank1_decompose`], relative
/// to the squared norm of the split piece.
pub const DECOMPOSE_MARGIN: f64 = 0.1;

/// The twistor sphere of the positive 3-space spanned by a q-orthonormal triple.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistorSphere {
    pub triple: [Vec<f64>; 3],
}

impl TwistorSphere {
    /// q-Gram–Schmidt of three vectors; fails unless their span is positive.
    pub fn from_basis(a: &[f64], b: &[f64], c: &[f64]) -> Result<Self> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(3);
        for v in [a, b, c] {
            let mut r = v.to_vec();
            for _ in 0..2 {
                for t in &out {
                    let k = qdot(&r, t);
                    axpy(&mut r, -k, t);
                }
            }
            let qq = qdot(&r, &r);
            if qq <= 1e-10 * dot(v, v) {
                return Err(Error::InvalidInput(format!("span is not a positive 3-space (residual q {qq:e})")));
            }
            r.iter_mut().for_each(|x| *x /= qq.sqrt());
            out.push(r);
        }
        let [t1, t2, t3] = <[Vec<f64>; 3]>::try_from(out).expect("three vectors");
        Ok(Self { triple: [t1, t2, t3] })
    }

    pub fn b(&self) -> usize {
        self.triple[0].len()
    }

    /// Coordinates `q(v, tₖ)` in the triple.
    pub fn coords(&self, v: &[f64]) -> [f64; 3] {
        std::array::from_fn(|k| qdot(v, &self.triple[k]))
    }

    fn from_coords(&self, c: &[f64; 3]) -> Vec<f64> {
        let mut v = vec![0.0; self.b()];
        for k in 0..3 {
            axpy(&mut v, c[k], &self.triple[k]);
        }
        v
    }

    /// Euclidean distance from `v` to the 3-space.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let c = self.coords(v);
        let w = self.from_coords(&c);
        norm(&v.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>())
    }

    pub fn contains_plane(&self, p: &ManifoldPoint) -> bool {
        let (w1, w2) = p.plane();
        self.residual(w1) <= CONTAIN_TOL && self.residual(w2) <= CONTAIN_TOL
    }

    /// Unit normal of a contained oriented plane.
    pub fn normal(&self, p: &ManifoldPoint) -> Result<[f64; 3]> {
        if !self.contains_plane(p) {
            return Err(Error::InvalidInput("plane is not contained in the twistor 3-space".into()));
        }
        let (w1, w2) = p.plane();
        let n = cross(&self.coords(w1), &self.coords(w2));
        let l = norm(&n);
        Ok(n.map(|x| x / l))
    }

    /// The oriented plane with unit normal `n`.
    pub fn plane(&self, n: &[f64; 3]) -> Result<ManifoldPoint> {
        let l = norm(n);
        let n = n.map(|x| x / l);
        let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let mut a = cross(&helper, &n);
        let la = norm(&a);
        a.iter_mut().for_each(|x| *x /= la);
        let b = cross(&n, &a);
        ManifoldPoint::period_plane(&self.from_coords(&a), &self.from_coords(&b))
    }

    /// Whether two spheres have the same 3-space.
    pub fn same_space(&self, other: &TwistorSphere) -> bool {
        other.triple.iter().all(|t| self.residual(t) <= CONTAIN_TOL * norm(t).max(1.0))
    }

    pub fn to_json(&self) -> Value {
        json!({ "triple": self.triple })
    }
}

/// The sphere of `T = ⟨W, ℓ⟩` for a positive `ℓ` q-orthogonal to `W`.
pub fn sphere_through(p: &ManifoldPoint, l: &[f64]) -> Result<TwistorSphere> {
    let Model::PeriodSpace { b } = p.model() else {
        return Err(Error::InvalidInput("twistor spheres live on the period space".into()));
    };
    if l.len() != b {
        return Err(Error::DimensionMismatch { expected: b, got: l.len() });
    }
    let (w1, w2) = p.plane();
    let ln = norm(l);
    if ln == 0.0 {
        return Err(Error::InvalidInput("zero direction".into()));
    }
    let off = qdot(l, w1).abs().max(qdot(l, w2).abs());
    if off > 1e-8 * ln {
        return Err(Error::InvalidInput(format!("direction is not q-orthogonal to the plane (q-product {off:e})")));
    }
    let ql = qdot(l, l);
    if ql <= 1e-8 * ln * ln {
        return Err(Error::InvalidInput(format!("direction is not q-positive (q = {ql:e})")));
    }
    let l3: Vec<f64> = l.iter().map(|x| x / ql.sqrt()).collect();
    Ok(TwistorSphere { triple: [w1.to_vec(), w2.to_vec(), l3] })
}

/// The sphere tangent to a nonzero cone vector: `T = ⟨W, image⟩`.
pub fn tangent_sphere(v: &TangentVector) -> Result<TwistorSphere> {
    let Model::PeriodSpace { b } = v.base.model() else {
        return Err(Error::InvalidInput("twistor spheres live on the period space".into()));
    };
    if !twistor_contains(b, &v.comps, DEFAULT_TOLERANCE) || norm(&v.comps) == 0.0 {
        return Err(Error::InvalidInput("vector is not a nonzero sub-twistor cone vector".into()));
    }
    let w = b - 2;
    let (r1, r2) = v.comps.split_at(w);
    let image = if dot(r1, r1) >= dot(r2, r2) { r1 } else { r2 };
    let frame = adapted_frame(&v.base)?;
    sphere_through(&v.base, &frame.perp_vector(image))
}

/// Rotates a contained plane by `theta` about `axis` (triple coordinates).
pub fn rotate_in_sphere(p: &ManifoldPoint, s: &TwistorSphere, axis: &[f64; 3], theta: f64) -> Result<ManifoldPoint> {
    if !s.contains_plane(p) {
        return Err(Error::InvalidInput("plane is not contained in the twistor 3-space".into()));
    }
    let n = norm(axis);
    if n == 0.0 {
        return Err(Error::InvalidInput("zero rotation axis".into()));
    }
    twistor_rotate(p, &s.triple, &axis.map(|x| x / n), theta)
}

/// Splits a tangent into at most four sub-twistor cone vectors.
///
/// The two singular pieces of the frame matrix are kept when their image is
/// q-non-negative; otherwise `R = (R + B) − B` with `B` mapping the same input
/// direction onto a positive direction.
pub fn rank1_decompose(a: &TangentVector) -> Result<Vec<TangentVector>> {
    let Model::PeriodSpace { b } = a.base.model() else {
        return Err(Error::InvalidInput("rank-one decomposition lives on the period space".into()));
    };
    let w = b - 2;
    if a.comps.len() != 2 * w {
        return Err(Error::DimensionMismatch { expected: 2 * w, got: a.comps.len() });
    }
    let total = norm(&a.comps);
    if total == 0.0 {
        return Ok(Vec::new());
    }
    if twistor_contains(b, &a.comps, DEFAULT_TOLERANCE) {
        return Ok(vec![a.clone()]);
    }
    let m = nalgebra::DMatrix::from_row_slice(2, w, &a.comps);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("left vectors"), svd.v_t.expect("right vectors"));
    let qv = |y: &[f64]| y[0] * y[0] - y[1..].iter().map(|x| x * x).sum::<f64>();
    let outer = |uu: [f64; 2], y: &[f64]| -> Vec<f64> { [y.iter().map(|x| uu[0] * x).collect::<Vec<_>>(), y.iter().map(|x| uu[1] * x).collect()].concat() };
    let mut pieces: Vec<Vec<f64>> = Vec::new();
    for k in 0..2 {
        let sigma = svd.singular_values[k];
        if sigma <= 1e-15 * total {
            continue;
        }
        let uu = [u[(0, k)], u[(1, k)]];
        let v: Vec<f64> = vt.row(k).iter().copied().collect();
        if qv(&v) >= 0.0 {
            pieces.push(outer(uu, &v.iter().map(|x| sigma * x).collect::<Vec<_>>()));
            continue;
        }
        // Candidate positive directions: f₁ and f₁ tilted toward v's negative part.
        let neg: Vec<f64> = std::iter::once(0.0).chain(v[1..].iter().copied()).collect();
        let nn = norm(&neg);
        let mut cands = vec![unit(w, 0)];
        for tilt in [0.5, -0.5] {
            let mut l = unit(w, 0);
            axpy(&mut l, tilt / nn, &neg);
            cands.push(l);
        }
        let (mu, l) = cands
            .into_iter()
            .map(|l| (split_coefficient(&v, &l, &qv), l))
            .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
            .expect("candidates");
        let mu = mu * sigma;
        let plus: Vec<f64> = v.iter().zip(&l).map(|(x, y)| sigma * x + mu * y).collect();
        let minus: Vec<f64> = l.iter().map(|y| -mu * y).collect();
        pieces.push(outer(uu, &plus));
        pieces.push(outer(uu, &minus));
    }
    // Absorb the reconstruction rounding into the first piece's free direction.
    let mut sum = vec![0.0; 2 * w];
    for pc in &pieces {
        axpy(&mut sum, 1.0, pc);
    }
    let err = norm(&sum.iter().zip(&a.comps).map(|(x, y)| x - y).collect::<Vec<_>>());
    if err > 1e-9 * total {
        return Err(Error::InvariantViolated(format!("rank-one pieces miss the tangent by {err:e}")));
    }
    Ok(pieces.into_iter().map(|c| TangentVector { base: a.base.clone(), comps: c }).collect())
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Smallest-magnitude `μ` with `q(v + μℓ) = margin·(1 + …)` for unit `v`:
/// root of `q(ℓ)μ² + 2q(v,ℓ)μ + q(v) − margin`.
fn split_coefficient(v: &[f64], l: &[f64], qv: &dyn Fn(&[f64]) -> f64) -> f64 {
    let qll = qv(l);
    let qvl = v[0] * l[0] - v[1..].iter().zip(&l[1..]).map(|(a, b)| a * b).sum::<f64>();
    let c = qv(v) - DECOMPOSE_MARGIN;
    // c < 0 here, so the discriminant is positive and the roots have opposite signs.
    let disc = (qvl * qvl - qll * c).sqrt();
    let r1 = (-qvl + disc) / qll;
    let r2 = (-qvl - disc) / qll;
    if r1.abs() <= r2.abs() { r1 } else { r2 }
}

/// Consecutive twistor spheres joined at shared planes.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereChain {
    pub spheres: Vec<TwistorSphere>,
    /// `junctions[i]` lies in `spheres[i]` and `spheres[i + 1]`.
    pub junctions: Vec<ManifoldPoint>,
}

impl SphereChain {
    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    /// Checks the containment invariants for the endpoints `p`, `q`.
    pub fn validate(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolated(m));
        if self.spheres.is_empty() || self.junctions.len() + 1 != self.spheres.len() {
            return bad("chain needs one junction between consecutive spheres".into());
        }
        if !self.spheres[0].contains_plane(p) {
            return bad("first sphere does not contain the start plane".into());
        }
        if !self.spheres.last().unwrap().contains_plane(q) {
            return bad("last sphere does not contain the end plane".into());
        }
        for (i, j) in self.junctions.iter().enumerate() {
            if !self.spheres[i].contains_plane(j) || !self.spheres[i + 1].contains_plane(j) {
                return bad(format!("junction {i} is not in both adjacent spheres"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "length": self.len(),
            "spheres": self.spheres.iter().map(TwistorSphere::to_json).collect::<Vec<_>>(),
            "junctions": self.junctions.iter().map(ManifoldPoint::to_json).collect::<Vec<_>>(),
        })
    }
}

/// A single sphere containing both planes, when one exists.
fn common_sphere(p: &ManifoldPoint, q: &ManifoldPoint) -> Option<TwistorSphere> {
    let (p1, p2) = p.plane();
    let (q1, q2) = q.plane();
    let b = p1.len();
    let rows = vec![p1.to_vec(), p2.to_vec(), q1.to_vec(), q2.to_vec()];
    let span = row_space_basis(&rows, b, 1e-9);
    match span.len() {
        2 => {
            let l = positive_perp(p1, p2)?;
            sphere_through(p, &l).ok()
        }
        3 => {
            // Complete (p1, p2) with the span vector farthest from the plane.
            let third = span
                .iter()
                .max_by(|a, c| plane_residual(p1, p2, a).total_cmp(&plane_residual(p1, p2, c)))
                .expect("three vectors");
            let s = TwistorSphere::from_basis(p1, p2, third).ok()?;
            s.contains_plane(q).then_some(s)
        }
        _ => None,
    }
}

fn plane_residual(w1: &[f64], w2: &[f64], v: &[f64]) -> f64 {
    let mut r = v.to_vec();
    let c1 = qdot(&r, w1);
    let c2 = qdot(&r, w2);
    axpy(&mut r, -c1, w1);
    axpy(&mut r, -c2, w2);
    norm(&r)
}

/// q-projection onto `W⊥` of the plane `(w1, w2)`.
fn perp_part(w1: &[f64], w2: &[f64], v: &[f64]) -> Vec<f64> {
    let mut r = v.to_vec();
    let c1 = qdot(&r, w1);
    let c2 = qdot(&r, w2);
    axpy(&mut r, -c1, w1);
    axpy(&mut r, -c2, w2);
    r
}

/// The unit vector `x = cos φ·a₁ + sin φ·a₂` of one plane maximizing
/// `q(x⊥)` for the other plane's complement, with that maximum.
fn best_positive_direction(a: (&[f64], &[f64]), other: (&[f64], &[f64])) -> (Vec<f64>, f64) {
    let r1 = perp_part(other.0, other.1, a.0);
    let r2 = perp_part(other.0, other.1, a.1);
    let m11 = qdot(&r1, &r1);
    let m22 = qdot(&r2, &r2);
    let m12 = qdot(&r1, &r2);
    let tr = 0.5 * (m11 + m22);
    let lam = tr + (0.25 * (m11 - m22).powi(2) + m12 * m12).sqrt();
    let (c, s) = if m12.abs() > 1e-300 {
        let (x, y) = (m12, lam - m11);
        let n = (x * x + y * y).sqrt();
        (x / n, y / n)
    } else if m11 >= m22 {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let mut x = a.0.iter().map(|v| c * v).collect::<Vec<_>>();
    axpy(&mut x, s, a.1);
    (x, lam)
}

/// Two spheres `⟨W_p, u⟩` and `⟨a, W_q⟩` joined at the plane `⟨a, u⟩`.
fn two_sphere_chain(p: &ManifoldPoint, q: &ManifoldPoint) -> Option<SphereChain> {
    let (p1, p2) = p.plane();
    let (q1, q2) = q.plane();
    let (u, lu) = best_positive_direction((q1, q2), (p1, p2));
    let (a, la) = best_positive_direction((p1, p2), (q1, q2));
    if lu <= 1e-6 || la <= 1e-6 {
        return None;
    }
    let s1 = TwistorSphere::from_basis(p1, p2, &perp_part(p1, p2, &u)).ok()?;
    let s2 = TwistorSphere::from_basis(q1, q2, &perp_part(q1, q2, &a)).ok()?;
    let junction = ManifoldPoint::period_plane(&a, &u).ok()?;
    let chain = SphereChain { spheres: vec![s1, s2], junctions: vec![junction] };
    chain.validate(p, q).ok()?;
    Some(chain)
}

/// Plane halfway between two planes, their bases aligned by the polar factor
/// of the q-pairing matrix.
fn midpoint_plane(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<ManifoldPoint> {
    if let Ok(v) = log_map(p, q) {
        if let Ok(m) = crate::geometry::move_point(p, &v, 0.5) {
            return Ok(m);
        }
    }
    let (p1, p2) = p.plane();
    let (q1, q2) = q.plane();
    let c = nalgebra::Matrix2::new(qdot(p1, q1), qdot(p1, q2), qdot(p2, q1), qdot(p2, q2));
    let svd = c.svd(true, true);
    let r = svd.v_t.unwrap().transpose() * svd.u.unwrap().transpose();
    let aligned = |i: usize| -> Vec<f64> {
        let mut v = q1.iter().map(|x| r[(0, i)] * x).collect::<Vec<_>>();
        axpy(&mut v, r[(1, i)], q2);
        v
    };
    let m1: Vec<f64> = p1.iter().zip(aligned(0)).map(|(a, b)| a + b).collect();
    let m2: Vec<f64> = p2.iter().zip(aligned(1)).map(|(a, b)| a + b).collect();
    ManifoldPoint::period_plane(&m1, &m2)
}

/// Moves basis vector `idx` of the raw pair `cur` to `target` through at
/// most one intermediate plane, each step inside one positive 3-space.
fn column_move(cur: &(Vec<f64>, Vec<f64>), idx: usize, target: &[f64]) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
    let (c0, c1) = cur;
    let moving = if idx == 0 { c0 } else { c1 };
    let d: Vec<f64> = target.iter().zip(moving).map(|(a, b)| a - b).collect();
    let plane = ManifoldPoint::period_plane(c0, c1).ok()?;
    let (w1, w2) = plane.plane();
    let y = perp_part(w1, w2, &d);
    let with = |v: Vec<f64>| if idx == 0 { (v, c1.clone()) } else { (c0.clone(), v) };
    let yy = dot(&y, &y);
    if yy <= 1e-300 {
        return Some(vec![with(target.to_vec())]);
    }
    if qdot(&y, &y) > 1e-3 * yy {
        return Some(vec![with(target.to_vec())]);
    }
    let l = positive_perp(w1, w2)?;
    let qyl = qdot(&y, &l);
    let c = qdot(&y, &y) - DECOMPOSE_MARGIN * yy;
    let disc = (qyl * qyl - c).sqrt();
    let mu = if (-qyl + disc).abs() <= (-qyl - disc).abs() { -qyl + disc } else { -qyl - disc };
    let mut mid = target.to_vec();
    axpy(&mut mid, mu, &l);
    Some(vec![with(mid), with(target.to_vec())])
}

/// Chain along the chart displacement `W_q = ⟨p₁ + y₁, p₂ + y₂⟩`, moving one
/// basis vector at a time.
fn chart_chain(p: &ManifoldPoint, q: &ManifoldPoint) -> Option<SphereChain> {
    let v = log_map(p, q).ok()?;
    let frame = adapted_frame(p).ok()?;
    let w = v.comps.len() / 2;
    let (p1, p2) = p.plane();
    let mut t1 = p1.to_vec();
    axpy(&mut t1, 1.0, &frame.perp_vector(&v.comps[..w]));
    let mut t2 = p2.to_vec();
    axpy(&mut t2, 1.0, &frame.perp_vector(&v.comps[w..]));
    let mut raw = vec![(p1.to_vec(), p2.to_vec())];
    raw.extend(column_move(raw.last().unwrap(), 0, &t1)?);
    raw.extend(column_move(raw.last().unwrap(), 1, &t2)?);
    let mut planes = vec![p.clone()];
    for (a, b) in &raw[1..raw.len() - 1] {
        planes.push(ManifoldPoint::period_plane(a, b).ok()?);
    }
    planes.push(q.clone());
    let spheres = planes.windows(2).map(|x| common_sphere(&x[0], &x[1])).collect::<Option<Vec<_>>>()?;
    let chain = SphereChain { spheres, junctions: planes[1..planes.len() - 1].to_vec() };
    chain.validate(p, q).ok()?;
    Some(chain)
}

fn chain_rec(p: &ManifoldPoint, q: &ManifoldPoint, budget: usize, depth: usize) -> Result<SphereChain> {
    if budget == 0 {
        return Err(Error::ChainTooLong(0));
    }
    if let Some(s) = common_sphere(p, q) {
        return Ok(SphereChain { spheres: vec![s], junctions: Vec::new() });
    }
    if budget >= 2 {
        if let Some(c) = two_sphere_chain(p, q) {
            return Ok(c);
        }
    }
    if let Some(c) = chart_chain(p, q) {
        if c.len() <= budget {
            return Ok(c);
        }
    }
    if budget < 2 || depth > 12 {
        return Err(Error::ChainTooLong(budget));
    }
    let mid = midpoint_plane(p, q)?;
    let left = chain_rec(p, &mid, budget - 1, depth + 1)?;
    let right = chain_rec(&mid, q, budget - left.len(), depth + 1)?;
    let mut spheres = left.spheres;
    let mut junctions = left.junctions;
    junctions.push(mid);
    junctions.extend(right.junctions);
    spheres.extend(right.spheres);
    Ok(SphereChain { spheres, junctions })
}

/// Greedy chain of at most `max_len` twistor spheres from `p` to `q`.
pub fn sphere_chain(p: &ManifoldPoint, q: &ManifoldPoint, max_len: usize) -> Result<SphereChain> {
    if p.model() != q.model() || !matches!(p.model(), Model::PeriodSpace { .. }) {
        return Err(Error::InvalidInput("sphere chains join two period-space points of the same b".into()));
    }
    let chain = chain_rec(p, q, max_len, 0).map_err(|e| match e {
        Error::ChainTooLong(_) => Error::ChainTooLong(max_len),
        other => other,
    })?;
    chain.validate(p, q)?;
    Ok(chain)
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

/// Geodesic grid of a twistor sphere with induced edge lengths.
struct SphereGraph {
    nodes: Vec<[f64; 3]>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl SphereGraph {
    /// Fibonacci grid plus `extra` normals; edges join nodes within three grid
    /// spacings and weigh the rotation angle by the plane's g-speed at the
    /// edge midpoint.
    fn build(s: &TwistorSphere, resolution: usize, extra: &[[f64; 3]]) -> Result<Self> {
        let mut nodes: Vec<[f64; 3]> = fibonacci_sphere(resolution).into_iter().map(|v| [v[0], v[1], v[2]]).collect();
        nodes.extend_from_slice(extra);
        let spacing = (4.0 * std::f64::consts::PI / resolution as f64).sqrt();
        let cos_r = (3.0 * spacing).min(std::f64::consts::FRAC_PI_2).cos();
        let n = nodes.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let c = dot(&nodes[i], &nodes[j]);
                if c < cos_r {
                    continue;
                }
                let angle = c.clamp(-1.0, 1.0).acos();
                let w = if angle == 0.0 { 0.0 } else { angle * rotation_speed(s, &nodes[i], &nodes[j])? };
                adj[i].push((j, w));
                adj[j].push((i, w));
            }
        }
        Ok(Self { nodes, adj })
    }

    fn dijkstra(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Item(0.0, src));
        while let Some(Item(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for &(j, w) in &self.adj[i] {
                let nd = d + w;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Item(nd, j));
                }
            }
        }
        dist
    }
}

/// g-speed per unit angle of the rotation carrying normal `a` toward `b`,
/// evaluated at their midpoint.
fn rotation_speed(s: &TwistorSphere, a: &[f64; 3], b: &[f64; 3]) -> Result<f64> {
    let axis = cross(a, b);
    let la = norm(&axis);
    let mid = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let plane = s.plane(&mid)?;
    let field = FieldExpr::TwistorRotation { triple: s.triple.to_vec(), axis: axis.map(|x| x / la), rate: 1.0 };
    field.speed(&plane)
}

/// Inner distance from `p` to `q` through the chain's spheres. Junction
/// planes are fixed by their spheres up to orientation; both orientations
/// are tried.
pub fn chain_distance(p: &ManifoldPoint, q: &ManifoldPoint, chain: &SphereChain, resolution: usize) -> Result<f64> {
    chain.validate(p, q)?;
    if p.approx_eq(q, 0.0) {
        return Ok(0.0);
    }
    let k = chain.len();
    // Candidate normals at each stage boundary: start, junctions (±), end.
    let mut best: Vec<f64> = vec![0.0];
    let mut entries: Vec<[f64; 3]> = vec![chain.spheres[0].normal(p)?];
    for i in 0..k {
        let s = &chain.spheres[i];
        let exits: Vec<ManifoldPoint> = if i + 1 == k {
            vec![q.clone()]
        } else {
            let j = &chain.junctions[i];
            let (w1, w2) = j.plane();
            vec![j.clone(), ManifoldPoint::period_plane(w2, w1)?]
        };
        let exit_normals = exits.iter().map(|e| s.normal(e)).collect::<Result<Vec<_>>>()?;
        let mut extra = entries.clone();
        extra.extend_from_slice(&exit_normals);
        let graph = SphereGraph::build(s, resolution.max(64), &extra)?;
        let base = graph.nodes.len() - extra.len();
        let mut next = vec![f64::INFINITY; exits.len()];
        for (ei, &cost) in best.iter().enumerate() {
            if !cost.is_finite() {
                continue;
            }
            let dist = graph.dijkstra(base + ei);
            for (xi, d) in next.iter_mut().enumerate() {
                let v = cost + dist[base + entries.len() + xi];
                if v < *d {
                    *d = v;
                }
            }
        }
        if i + 1 < k {
            let ns = &chain.spheres[i + 1];
            entries = exits.iter().map(|e| ns.normal(e)).collect::<Result<Vec<_>>>()?;
        }
        best = next;
    }
    Ok(best[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn e(b: usize, i: usize) -> Vec<f64> {
        unit(b, i)
    }

    fn base(b: usize) -> ManifoldPoint {
        ManifoldPoint::period_plane(&e(b, 0), &e(b, 1)).unwrap()
    }

    fn random_plane(b: usize, rng: &mut ChaCha8Rng, spread: f64) -> ManifoldPoint {
        loop {
            let a1: Vec<f64> = (0..b).map(|i| spread * rng.gen_range(-1.0..1.0) + if i == 0 { 1.0 } else { 0.0 }).collect();
            let a2: Vec<f64> = (0..b).map(|i| spread * rng.gen_range(-1.0..1.0) + if i == 1 { 1.0 } else { 0.0 }).collect();
            if let Ok(p) = ManifoldPoint::period_plane(&a1, &a2) {
                if adapted_frame(&p).is_ok() {
                    return p;
                }
            }
        }
    }

    #[test]
    fn sphere_through_examples() {
        let s = sphere_through(&base(4), &e(4, 2)).unwrap();
        assert_eq!(s.triple, [e(4, 0), e(4, 1), e(4, 2)]);
        assert!(sphere_through(&base(4), &e(4, 3)).is_err());
        assert!(sphere_through(&base(4), &e(4, 0)).is_err());
    }

    #[test]
    fn rotation_examples() {
        let p = base(4);
        let s = sphere_through(&p, &e(4, 2)).unwrap();
        assert!(rotate_in_sphere(&p, &s, &[1.0, 0.0, 0.0], 0.0).unwrap().approx_eq(&p, 1e-15));
        let r = rotate_in_sphere(&p, &s, &[1.0, 0.0, 0.0], FRAC_PI_2).unwrap();
        let want = ManifoldPoint::period_plane(&e(4, 0), &e(4, 2)).unwrap();
        assert!(r.approx_eq(&want, 1e-12));
        assert!(rotate_in_sphere(&p, &s, &[0.3, -0.2, 0.9], TAU).unwrap().approx_eq(&p, 1e-12));
        let outside = ManifoldPoint::period_plane(&e(4, 0), &[0.0, 1.0, 0.0, 0.5]).unwrap();
        assert!(rotate_in_sphere(&outside, &s, &[1.0, 0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn rotation_velocity_is_in_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in 4..=8 {
            let cone = ConeModel::sub_twistor(b);
            for _ in 0..40 {
                let p = random_plane(b, &mut rng, 0.4);
                let frame = adapted_frame(&p).unwrap();
                let y: Vec<f64> = (0..b - 2).map(|j| if j == 0 { 2.0 } else { rng.gen_range(-1.0..1.0) }).collect();
                let s = sphere_through(&p, &frame.perp_vector(&y)).unwrap();
                let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let h = 1e-6;
                let x = rotate_in_sphere(&p, &s, &axis, h).unwrap();
                let v = log_map(&p, &x).unwrap().scaled(1.0 / h);
                let loose = ConeModel { tolerance: 1e-5, ..cone.clone() };
                assert!(loose.contains(&v).unwrap());
            }
        }
    }

    #[test]
    fn decompose_examples() {
        let p = base(4);
        assert!(rank1_decompose(&TangentVector::zero(p.clone())).unwrap().is_empty());
        let pos = TangentVector::new(p.clone(), vec![1.0, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(rank1_decompose(&pos).unwrap(), vec![pos.clone()]);
        let neg = TangentVector::new(p.clone(), vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let parts = rank1_decompose(&neg).unwrap();
        assert_eq!(parts.len(), 2);
        let cone = ConeModel::sub_twistor(4);
        for part in &parts {
            assert!(cone.contains(part).unwrap());
        }
        // Both pieces send w₁ somewhere and w₂ to zero, and they sum to A.
        for part in &parts {
            assert!(part.comps[2].abs() < 1e-15 && part.comps[3].abs() < 1e-15);
        }
        assert!((parts[0].comps[0] + parts[1].comps[0]).abs() < 1e-12);
        assert!((parts[0].comps[1] + parts[1].comps[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for b in 4..=8 {
            let cone = ConeModel::sub_twistor(b);
            for _ in 0..100 {
                let p = random_plane(b, &mut rng, 0.4);
                let a: Vec<f64> = (0..2 * (b - 2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = TangentVector::new(p, a.clone()).unwrap();
                let parts = rank1_decompose(&v).unwrap();
                assert!(parts.len() <= 4);
                let mut sum = vec![0.0; a.len()];
                for part in &parts {
                    assert!(cone.contains(part).unwrap());
                    axpy(&mut sum, 1.0, &part.comps);
                }
                let err = norm(&sum.iter().zip(&a).map(|(x, y)| x - y).collect::<Vec<_>>());
                assert!(err <= 1e-9 * norm(&a));
            }
        }
    }

    #[test]
    fn tangent_spheres_are_unique() {
        let p = base(5);
        let v1 = TangentVector::new(p.clone(), vec![1.0, 0.2, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let v2 = TangentVector::new(p.clone(), vec![1.0, 0.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
        let s1 = tangent_sphere(&v1).unwrap();
        assert!(s1.same_space(&tangent_sphere(&v1.scaled(-2.0)).unwrap()));
        assert!(!s1.same_space(&tangent_sphere(&v2).unwrap()));
    }

    #[test]
    fn chain_examples() {
        let p = base(4);
        let q = ManifoldPoint::period_plane(&e(4, 1), &e(4, 2)).unwrap();
        let c = sphere_chain(&p, &q, 8).unwrap();
        assert_eq!(c.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_plane(5, &mut rng, 1.0);
            let q = random_plane(5, &mut rng, 1.0);
            let c = sphere_chain(&p, &q, 8).unwrap();
            assert!(c.len() <= 8);
            c.validate(&p, &q).unwrap();
        }
    }

    #[test]
    fn chain_distance_single_sphere() {
        let p = base(4);
        let s = sphere_through(&p, &e(4, 2)).unwrap();
        let q = rotate_in_sphere(&p, &s, &[1.0, 0.0, 0.0], FRAC_PI_2).unwrap();
        let chain = SphereChain { spheres: vec![s], junctions: Vec::new() };
        assert_eq!(chain_distance(&p, &p, &chain, 500).unwrap(), 0.0);
        let d = chain_distance(&p, &q, &chain, 2000).unwrap();
        // Rotation path: at ⟨e₁, cos θ e₂ + sin θ e₃⟩ the plane moves at unit g-speed.
        assert!(d <= FRAC_PI_2 * 1.03 && d >= FRAC_PI_2 * 0.9, "{d}");
    }
}
