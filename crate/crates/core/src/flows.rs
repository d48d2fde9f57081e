//! Vector-field flows, zig-zags, bracket flows and path lengths.
//!
//! Flows use fixed-step classical RK4 unless the field has a closed form
//! (constant Euclidean fields, rotations). Negative times flow the negated
//! field forward.

use std::fmt;

use serde_json::{json, Value};

use crate::cone::ConeModel;
use crate::error::{Error, Result};
use crate::gauge::{gauge_norm, gauge_value};
use crate::geometry::{
    adapted_frame, log_map, period_speed_sq, qdot, sphere_east_north, ManifoldPoint, Model, TangentVector,
};
use crate::linalg::{axpy, cross, dot, norm, rotate};
use crate::poly::PolyField;

/// Substeps used by a flow of duration `t`.
pub fn default_steps(t: f64) -> usize {
    16usize.max((64.0 * t.abs()).ceil() as usize)
}

/// Closed-form vector fields on the three models.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    /// Polynomial field on ℝⁿ.
    Poly(PolyField),
    /// `y ↦ rate · axis × y` on the sphere.
    SphereRotation { axis: [f64; 3], rate: f64 },
    /// Unit field of the band cone: `heading·cos ψ e_φ + sin ψ e_θ` with
    /// `sin ψ = climb · √((c² − z²)/(1 − z²))`, scaled by `speed`. Admissible at
    /// every point of the band.
    SphereCone { band: f64, climb: f64, heading: f64, speed: f64 },
    /// Period-space field given by a fixed `2 × (b−2)` matrix in the frame
    /// obtained by q-Gram–Schmidt of `reference` against the current plane.
    /// Rank-one positive matrices give cone fields on a neighborhood of the
    /// plane where `reference` was taken.
    PerFrame { reference: Vec<Vec<f64>>, matrix: Vec<f64> },
    /// Rotation of the positive 3-space spanned by `triple` about `axis`
    /// (coordinates in the triple), acting on planes inside it.
    TwistorRotation { triple: Vec<Vec<f64>>, axis: [f64; 3], rate: f64 },
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::Poly(p) => write!(f, "{p}"),
            FieldExpr::SphereRotation { axis, rate } => write!(f, "rotation({:?}, {rate})", axis),
            FieldExpr::SphereCone { climb, heading, speed, .. } => {
                write!(f, "band_field(climb={climb:.6}, heading={heading}, speed={speed:.6})")
            }
            FieldExpr::PerFrame { matrix, .. } => write!(f, "frame_field({:?})", matrix),
            FieldExpr::TwistorRotation { axis, rate, .. } => write!(f, "twistor_rotation({:?}, {rate})", axis),
        }
    }
}

impl FieldExpr {
    pub fn scaled(&self, s: f64) -> FieldExpr {
        match self {
            FieldExpr::Poly(p) => FieldExpr::Poly(p.scaled(s)),
            FieldExpr::SphereRotation { axis, rate } => FieldExpr::SphereRotation { axis: *axis, rate: rate * s },
            FieldExpr::SphereCone { band, climb, heading, speed } => {
                let flip = if s < 0.0 { -1.0 } else { 1.0 };
                FieldExpr::SphereCone { band: *band, climb: climb * flip, heading: heading * flip, speed: speed * s.abs() }
            }
            FieldExpr::PerFrame { reference, matrix } => {
                FieldExpr::PerFrame { reference: reference.clone(), matrix: matrix.iter().map(|x| x * s).collect() }
            }
            FieldExpr::TwistorRotation { triple, axis, rate } => {
                FieldExpr::TwistorRotation { triple: triple.clone(), axis: *axis, rate: rate * s }
            }
        }
    }

    fn expects(&self, m: Model) -> bool {
        matches!(
            (self, m),
            (FieldExpr::Poly(_), Model::Euclidean { .. })
                | (FieldExpr::SphereRotation { .. } | FieldExpr::SphereCone { .. }, Model::BandedSphere { .. })
                | (FieldExpr::PerFrame { .. } | FieldExpr::TwistorRotation { .. }, Model::PeriodSpace { .. })
        )
    }

    fn check(&self, p: &ManifoldPoint) -> Result<()> {
        if !self.expects(p.model()) {
            return Err(Error::InvalidInput(format!("field {self} is not defined on {}", p.model().name())));
        }
        if let (FieldExpr::Poly(f), Model::Euclidean { dim }) = (self, p.model()) {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
            }
        }
        Ok(())
    }

    /// State derivative at a (possibly slightly off-manifold) state vector.
    fn velocity(&self, state: &[f64]) -> Result<Vec<f64>> {
        match self {
            FieldExpr::Poly(f) => Ok(f.eval(state)),
            FieldExpr::SphereRotation { axis, rate } => {
                let y = unit3(state);
                Ok(cross(axis, &y).iter().map(|c| c * rate).collect())
            }
            FieldExpr::SphereCone { band, climb, heading, speed } => {
                Ok(sphere_cone_velocity(&unit3(state), *band, *climb, *heading, *speed).to_vec())
            }
            FieldExpr::PerFrame { reference, matrix } => {
                let b = state.len() / 2;
                let (w1, w2) = orthonormal_pair(&state[..b], &state[b..])?;
                let (y1, y2) = frame_images(&w1, &w2, reference, matrix)?;
                Ok([y1, y2].concat())
            }
            FieldExpr::TwistorRotation { triple, axis, rate } => {
                let b = state.len() / 2;
                let mut out = Vec::with_capacity(2 * b);
                for w in [&state[..b], &state[b..]] {
                    let c: [f64; 3] = std::array::from_fn(|k| qdot(w, &triple[k]));
                    let d = cross(axis, &c);
                    let mut v = vec![0.0; b];
                    for k in 0..3 {
                        axpy(&mut v, rate * d[k], &triple[k]);
                    }
                    out.extend(v);
                }
                Ok(out)
            }
        }
    }

    /// The field's value at `p` as a tangent vector.
    pub fn eval(&self, p: &ManifoldPoint) -> Result<TangentVector> {
        self.check(p)?;
        let v = self.velocity(p.coords())?;
        match p.model() {
            Model::Euclidean { .. } => Ok(TangentVector { base: p.clone(), comps: v }),
            Model::BandedSphere { .. } => TangentVector::projected(p.clone(), v),
            Model::PeriodSpace { b } => {
                let frame = adapted_frame(p)?;
                let comps = [frame.perp_coords(&v[..b]), frame.perp_coords(&v[b..])].concat();
                Ok(TangentVector { base: p.clone(), comps })
            }
        }
    }

    /// g-norm of the field at `p`.
    pub fn speed(&self, p: &ManifoldPoint) -> Result<f64> {
        match self {
            FieldExpr::SphereCone { speed, .. } => Ok(*speed),
            FieldExpr::Poly(f) => Ok(norm(&f.eval(p.coords()))),
            FieldExpr::SphereRotation { .. } => Ok(norm(&self.velocity(p.coords())?)),
            FieldExpr::PerFrame { .. } | FieldExpr::TwistorRotation { .. } => {
                let v = self.velocity(p.coords())?;
                let b = v.len() / 2;
                Ok(period_speed_sq(p, &v[..b], &v[b..])?.max(0.0).sqrt())
            }
        }
    }

    fn closed_form(&self, p: &ManifoldPoint, t: f64) -> Option<Result<ManifoldPoint>> {
        match self {
            FieldExpr::Poly(f) if f.is_constant() => {
                let mut c = p.coords().to_vec();
                let v = f.eval(&c);
                axpy(&mut c, t, &v);
                Some(Ok(ManifoldPoint::euclidean(c)))
            }
            FieldExpr::SphereRotation { axis, rate } => {
                let n = norm(axis);
                if n == 0.0 {
                    return Some(Ok(p.clone()));
                }
                let a = axis.map(|x| x / n);
                let y = rotate(&p.sphere(), &a, rate * n * t);
                Some(sphere_point(p.model(), y.to_vec(), 0.0))
            }
            FieldExpr::TwistorRotation { triple, axis, rate } => Some(twistor_rotate(p, triple, axis, rate * t)),
            _ => None,
        }
    }
}

fn unit3(x: &[f64]) -> [f64; 3] {
    let n = norm(x);
    [x[0] / n, x[1] / n, x[2] / n]
}

pub(crate) fn sphere_cone_velocity(y: &[f64; 3], band: f64, climb: f64, heading: f64, speed: f64) -> [f64; 3] {
    let (east, north) = sphere_east_north(y);
    let s = crate::cone::band_slope(y[2], band);
    let sin_psi = (climb * s).clamp(-1.0, 1.0);
    let cos_psi = heading * (1.0 - sin_psi * sin_psi).sqrt();
    std::array::from_fn(|i| speed * (cos_psi * east[i] + sin_psi * north[i]))
}

/// Normalizes to the sphere. Excursions past the band edge up to `slack`
/// (integration error of band fields, which keep `|z| ≤ c` exactly) are
/// projected back.
fn sphere_point(model: Model, y: Vec<f64>, slack: f64) -> Result<ManifoldPoint> {
    let Model::BandedSphere { band } = model else { unreachable!() };
    let mut y = unit3(&y);
    let edge = band * (1.0 - 1e-12);
    if y[2].abs() >= edge {
        if y[2].abs() > edge + slack {
            return Err(Error::InvariantViolated(format!("left the band: |z| = {} > {band}", y[2].abs())));
        }
        let rho = (1.0 - edge * edge).sqrt() / (y[0] * y[0] + y[1] * y[1]).sqrt();
        y = [y[0] * rho, y[1] * rho, edge.copysign(y[2])];
    }
    ManifoldPoint::new(model, y.to_vec())
}

pub(crate) fn orthonormal_pair(a1: &[f64], a2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    crate::geometry::q_orthonormalize_pair(a1, a2)
}

/// Images `y_i = Σ_j M_ij f_j` of the plane basis under a frame-matrix field,
/// with `f_j` the q-Gram–Schmidt transport of `reference` to `W⊥`.
fn frame_images(w1: &[f64], w2: &[f64], reference: &[Vec<f64>], matrix: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = w1.len();
    let k = reference.len();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, f0) in reference.iter().enumerate() {
        let sign = if j == 0 { 1.0 } else { -1.0 };
        let mut r = f0.clone();
        for _ in 0..2 {
            let c1 = qdot(&r, w1);
            let c2 = qdot(&r, w2);
            axpy(&mut r, -c1, w1);
            axpy(&mut r, -c2, w2);
            for (i, f) in frame.iter().enumerate() {
                let s = if i == 0 { 1.0 } else { -1.0 };
                let c = qdot(&r, f) * s;
                axpy(&mut r, -c, f);
            }
        }
        let qq = qdot(&r, &r);
        if qq * sign <= 1e-8 {
            return Err(Error::DomainExit {
                exit_time: f64::NAN,
                reason: "transported frame degenerated far from its reference plane".into(),
            });
        }
        let sc = 1.0 / (qq * sign).sqrt();
        r.iter_mut().for_each(|x| *x *= sc);
        frame.push(r);
    }
    let mut y1 = vec![0.0; b];
    let mut y2 = vec![0.0; b];
    for j in 0..k {
        axpy(&mut y1, matrix[j], &frame[j]);
        axpy(&mut y2, matrix[k + j], &frame[j]);
    }
    Ok((y1, y2))
}

pub(crate) fn twistor_rotate(p: &ManifoldPoint, triple: &[Vec<f64>], axis: &[f64; 3], angle: f64) -> Result<ManifoldPoint> {
    let (w1, w2) = p.plane();
    let b = w1.len();
    let n = norm(axis);
    let a = if n > 0.0 { axis.map(|x| x / n) } else { [0.0, 0.0, 1.0] };
    let angle = angle * n;
    let mut out = Vec::with_capacity(2 * b);
    for w in [w1, w2] {
        let c: [f64; 3] = std::array::from_fn(|k| qdot(w, &triple[k]));
        let mut resid = w.to_vec();
        for k in 0..3 {
            axpy(&mut resid, -c[k], &triple[k]);
        }
        if norm(&resid) > 1e-8 {
            return Err(Error::InvalidInput("plane is not contained in the twistor 3-space".into()));
        }
        let r = rotate(&c, &a, angle);
        let mut v = vec![0.0; b];
        for k in 0..3 {
            axpy(&mut v, r[k], &triple[k]);
        }
        out.extend(v);
    }
    ManifoldPoint::period_plane(&out[..b], &out[b..])
}

fn state_to_point(model: Model, state: Vec<f64>) -> Result<ManifoldPoint> {
    match model {
        Model::Euclidean { .. } => Ok(ManifoldPoint::euclidean(state)),
        Model::BandedSphere { .. } => sphere_point(model, state, 1e-3),
        Model::PeriodSpace { b } => ManifoldPoint::period_plane(&state[..b], &state[b..]).map_err(|e| match e {
            Error::DegeneratePlane(d) => Error::InvariantViolated(format!("plane became non-positive (q-Gram det {d:e})")),
            other => other,
        }),
    }
}

fn rk4_step(x: &FieldExpr, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = x.velocity(y)?;
    let stage = |k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k2 = x.velocity(&stage(&k1, h / 2.0))?;
    let k3 = x.velocity(&stage(&k2, h / 2.0))?;
    let k4 = x.velocity(&stage(&k3, h))?;
    Ok((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Integrates `x` from `p` for time `t ≥ 0`, returning the endpoint and
/// `(time, speed)` samples at every substep node.
fn integrate(p: &ManifoldPoint, x: &FieldExpr, t: f64, steps: usize) -> Result<(ManifoldPoint, Vec<(f64, f64)>)> {
    let steps = steps.max(1);
    let h = t / steps as f64;
    let mut quad = Vec::with_capacity(steps + 1);
    quad.push((0.0, x.speed(p)?));
    let mut cur = p.clone();
    for k in 1..=steps {
        let time = h * k as f64;
        let exit = |e: Error| Error::DomainExit {
            exit_time: h * (k - 1) as f64,
            reason: match e {
                Error::DomainExit { reason, .. } => reason,
                other => other.to_string(),
            },
        };
        let next = match x.closed_form(p, time) {
            Some(r) => r.map_err(exit)?,
            None => {
                let state = rk4_step(x, cur.coords(), h).map_err(exit)?;
                state_to_point(p.model(), state).map_err(exit)?
            }
        };
        quad.push((time, x.speed(&next).map_err(exit)?));
        cur = next;
    }
    Ok((cur, quad))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    /// Orbit of a field for the given (non-negative) duration.
    Flow { field: FieldExpr, duration: f64, steps: usize },
    /// Retraction curve `s ↦ move_point(a, log(a, b), s)`; only used by
    /// sub-Finsler polylines.
    Chord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub kind: SegmentKind,
    /// `(parameter, g-speed)` quadrature samples.
    pub quad: Vec<(f64, f64)>,
}

impl Segment {
    fn length(&self) -> f64 {
        trapezoid(&self.quad)
    }

    fn coarse_length(&self) -> f64 {
        if self.quad.len() < 3 || self.quad.len() % 2 == 0 {
            return self.length();
        }
        let coarse: Vec<(f64, f64)> = self.quad.iter().step_by(2).copied().collect();
        trapezoid(&coarse)
    }
}

fn trapezoid(q: &[(f64, f64)]) -> f64 {
    q.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// A quadrature value with its refinement check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthReport {
    pub value: f64,
    /// Same quadrature on every other sample.
    pub coarse: f64,
    pub converged: bool,
}

impl LengthReport {
    fn new(value: f64, coarse: f64) -> Self {
        let converged = (value - coarse).abs() <= 1e-6 * value.abs().max(1e-12);
        Self { value, coarse, converged }
    }
}

/// Piecewise path whose pieces are flows of fields or chart chords.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissiblePath {
    pub nodes: Vec<ManifoldPoint>,
    /// `segments[i]` joins `nodes[i]` to `nodes[i + 1]`.
    pub segments: Vec<Segment>,
}

impl AdmissiblePath {
    pub fn empty(p: ManifoldPoint) -> Self {
        Self { nodes: vec![p], segments: Vec::new() }
    }

    pub fn start(&self) -> &ManifoldPoint {
        &self.nodes[0]
    }

    pub fn end(&self) -> &ManifoldPoint {
        self.nodes.last().expect("paths have at least one node")
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    fn push_flow(&mut self, field: &FieldExpr, t: f64, steps: usize) -> Result<()> {
        if t == 0.0 {
            return Ok(());
        }
        let (x, dur) = if t < 0.0 { (field.scaled(-1.0), -t) } else { (field.clone(), t) };
        let (end, quad) = integrate(self.end(), &x, dur, steps)?;
        self.segments.push(Segment { label: x.to_string(), kind: SegmentKind::Flow { field: x, duration: dur, steps }, quad });
        self.nodes.push(end);
        Ok(())
    }

    /// Appends a chord to `q`.
    pub fn push_chord(&mut self, q: ManifoldPoint) -> Result<()> {
        let a = self.end().clone();
        let fwd = log_map(&a, &q)?.g_norm();
        let back = log_map(&q, &a)?.g_norm();
        self.segments.push(Segment { label: "chord".into(), kind: SegmentKind::Chord, quad: vec![(0.0, fwd), (1.0, back)] });
        self.nodes.push(q);
        Ok(())
    }

    /// Concatenation; the other path must start where this one ends.
    pub fn concat(mut self, other: AdmissiblePath) -> Result<AdmissiblePath> {
        let gap = endpoint_gap(self.end(), other.start())?;
        if gap > 1e-7 {
            return Err(Error::InvalidInput(format!("paths do not meet (gap {gap:e})")));
        }
        self.nodes.extend(other.nodes.into_iter().skip(1));
        self.segments.extend(other.segments);
        Ok(self)
    }

    pub fn riemannian_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn riemannian_length_report(&self) -> LengthReport {
        let coarse = self.segments.iter().map(Segment::coarse_length).sum();
        LengthReport::new(self.riemannian_length(), coarse)
    }

    /// Quadrature of the gauge of the velocity.
    pub fn finsler_length(&self, cone: &ConeModel, samples: usize) -> Result<LengthReport> {
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let a = &self.nodes[i];
            let b = &self.nodes[i + 1];
            match &seg.kind {
                SegmentKind::Chord => {
                    let ga = gauge_value(cone, a, &log_map(a, b)?.comps, samples)?;
                    let gb = gauge_value(cone, b, &log_map(b, a)?.comps, samples)?;
                    fine += 0.5 * (ga + gb);
                    coarse += 0.5 * (ga + gb);
                }
                SegmentKind::Flow { field, duration, steps } => {
                    let h = duration / *steps as f64;
                    let mut q = Vec::with_capacity(steps + 1);
                    let mut cur = a.clone();
                    q.push((0.0, gauge_value(cone, &cur, &field.eval(&cur)?.comps, samples)?));
                    for k in 1..=*steps {
                        let time = h * k as f64;
                        cur = match field.closed_form(a, time) {
                            Some(r) => r?,
                            None => state_to_point(a.model(), rk4_step(field, cur.coords(), h)?)?,
                        };
                        q.push((time, gauge_value(cone, &cur, &field.eval(&cur)?.comps, samples)?));
                    }
                    let s = Segment { label: String::new(), kind: SegmentKind::Chord, quad: q };
                    fine += s.length();
                    coarse += s.coarse_length();
                }
            }
        }
        Ok(LengthReport::new(fine, coarse))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "nodes": self.nodes.iter().map(ManifoldPoint::to_json).collect::<Vec<_>>(),
            "segments": self.segments.iter().map(|s| json!({
                "label": s.label,
                "length": s.length(),
            })).collect::<Vec<_>>(),
            "riemannian_length": self.riemannian_length(),
        })
    }
}

/// Size of the displacement between two points, measured by the logarithm
/// at the first.
pub fn endpoint_gap(a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    if a.model() != b.model() {
        return Err(Error::BaseMismatch);
    }
    match a.model() {
        Model::Euclidean { .. } => Ok(norm(&crate::linalg::sub(a.coords(), b.coords()))),
        Model::BandedSphere { .. } => Ok(dot(&a.sphere(), &b.sphere()).clamp(-1.0, 1.0).acos()),
        Model::PeriodSpace { .. } => match log_map(a, b) {
            Ok(v) => Ok(v.g_norm()),
            Err(_) => Ok(f64::INFINITY),
        },
    }
}

/// Orbit of `x` through `p` for time `t` (negative `t` flows `−x`).
pub fn flow(p: &ManifoldPoint, x: &FieldExpr, t: f64, steps: usize) -> Result<AdmissiblePath> {
    x.check(p)?;
    let mut path = AdmissiblePath::empty(p.clone());
    path.push_flow(x, t, steps)?;
    Ok(path)
}

/// `(e^{(t/N)X₁} ⋯ e^{(t/N)X_r})^N p`, flows applied in list order.
pub fn zigzag(p: &ManifoldPoint, fields: &[FieldExpr], t: f64, n: usize) -> Result<AdmissiblePath> {
    if n == 0 {
        return Err(Error::InvalidInput("zig-zag needs N >= 1".into()));
    }
    for f in fields {
        f.check(p)?;
    }
    let dt = t / n as f64;
    let steps = default_steps(dt);
    let mut path = AdmissiblePath::empty(p.clone());
    for _ in 0..n {
        for f in fields {
            path.push_flow(f, dt, steps)?;
        }
    }
    Ok(path)
}

/// Nested Lie bracket of fields.
#[derive(Debug, Clone, PartialEq)]
pub enum BracketExpr {
    Field(FieldExpr),
    Bracket(Box<BracketExpr>, Box<BracketExpr>),
}

impl BracketExpr {
    pub fn bracket(a: BracketExpr, b: BracketExpr) -> Self {
        BracketExpr::Bracket(Box::new(a), Box::new(b))
    }

    /// Number of leaves.
    pub fn degree(&self) -> usize {
        match self {
            BracketExpr::Field(_) => 1,
            BracketExpr::Bracket(a, b) => a.degree() + b.degree(),
        }
    }

    /// The bracket as a polynomial field, when every leaf is polynomial.
    pub fn poly_field(&self) -> Option<PolyField> {
        match self {
            BracketExpr::Field(FieldExpr::Poly(p)) => Some(p.clone()),
            BracketExpr::Field(_) => None,
            BracketExpr::Bracket(a, b) => a.poly_field()?.bracket(&b.poly_field()?).ok(),
        }
    }

    /// Flow moves of `Φ^t`: leaves run for `±t^{1/l}`; negative `t` swaps the
    /// outermost pair.
    pub fn moves(&self, t: f64) -> Vec<(FieldExpr, f64)> {
        let sigma = t.abs().powf(1.0 / self.degree() as f64);
        match self {
            BracketExpr::Bracket(a, b) if t < 0.0 => BracketExpr::Bracket(b.clone(), a.clone()).leaf_moves(sigma),
            _ => self.leaf_moves(sigma),
        }
    }

    fn leaf_moves(&self, sigma: f64) -> Vec<(FieldExpr, f64)> {
        match self {
            BracketExpr::Field(x) => vec![(x.clone(), sigma)],
            BracketExpr::Bracket(a, b) => {
                let ma = a.leaf_moves(sigma);
                let mb = b.leaf_moves(sigma);
                let inv = |m: &[(FieldExpr, f64)]| -> Vec<(FieldExpr, f64)> {
                    m.iter().rev().map(|(f, s)| (f.clone(), -s)).collect()
                };
                let mut out = ma.clone();
                out.extend(mb.iter().cloned());
                out.extend(inv(&ma));
                out.extend(inv(&mb));
                out
            }
        }
    }
}

/// Commutator path `Φ^t_expr(p)`, tangent to the bracket at `t = 0`.
pub fn bracket_flow(p: &ManifoldPoint, expr: &BracketExpr, t: f64) -> Result<AdmissiblePath> {
    let mut path = AdmissiblePath::empty(p.clone());
    for (f, s) in expr.moves(t) {
        f.check(p)?;
        path.push_flow(&f, s, default_steps(s))?;
    }
    Ok(path)
}

/// One generator of a realizing decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub coef: f64,
    pub generator: Vec<f64>,
    pub field: FieldExpr,
}

/// Decomposition of one segment's velocity into cone generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub segment: usize,
    pub gauge: f64,
    pub pieces: Vec<Piece>,
}

impl Realization {
    /// The cone fields `coef · X_i` whose sum has the segment velocity at its start.
    pub fn fields(&self) -> Vec<FieldExpr> {
        self.pieces.iter().map(|p| p.field.scaled(p.coef)).collect()
    }

    pub fn riemannian_sum(&self) -> f64 {
        self.pieces.iter().map(|p| p.coef * norm(&p.generator)).sum()
    }
}

/// Per-segment generator decompositions of a polyline's velocities, taken at
/// each segment's start with velocity `log(start, end)`.
pub fn realize_norm(cone: &ConeModel, path: &AdmissiblePath, eps: f64, samples: usize) -> Result<Vec<Realization>> {
    let mut out = Vec::with_capacity(path.segments.len());
    for i in 0..path.segments.len() {
        let a = &path.nodes[i];
        let v = log_map(a, &path.nodes[i + 1])?;
        out.push(realize_vector(cone, &v, eps, samples, i)?);
    }
    Ok(out)
}

pub(crate) fn realize_vector(cone: &ConeModel, v: &TangentVector, eps: f64, samples: usize, segment: usize) -> Result<Realization> {
    let g = gauge_norm(cone, v, samples)?;
    if let Some(fine) = g.refined_value {
        if (g.value - fine).abs() > eps.max(1e-3 * g.value) {
            return Err(Error::Unconverged { coarse: g.value, fine });
        }
    }
    let pieces = g
        .combo
        .iter()
        .map(|&(coef, idx)| {
            let generator = g.generators[idx].clone();
            let field = cone.field_through(&v.base, &generator)?;
            Ok(Piece { coef, generator, field })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Realization { segment, gauge: g.value, pieces })
}
