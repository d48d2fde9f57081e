//! Quadratic forms, the three manifold models and their Riemannian structure.
//!
//! * `Euclidean(n)`: points and tangents are plain coordinate vectors.
//! * `BandedSphere(c)`: unit vectors in ℝ³ with `|z| < c`; tangents are ambient
//!   3-vectors orthogonal to the base point.
//! * `PeriodSpace(b)`: oriented q-positive planes in ℝᵇ stored as an ordered
//!   q-orthonormal pair `(w1, w2)`. Tangents are `2 × (b−2)` matrices representing
//!   `Hom(W, W⊥)` in the adapted frame of the base point: row `i` holds the
//!   image of `w_i` in perp-frame coordinates.
//!
//! The ambient metric `g` is the dot product of tangent components in every
//! model (Frobenius pairing on the period space).

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::linalg::{axpy, dot, norm, to3};

/// Tolerance on the q-orthonormality of stored period-space bases.
pub const PLANE_TOL: f64 = 1e-10;
/// Below this q-Gram determinant a plane is treated as degenerate.
pub const DEGENERATE_GRAM: f64 = 1e-8;
/// Tolerance on unit length of banded-sphere points.
pub const SPHERE_TOL: f64 = 1e-12;

/// Diagonal quadratic form with ±1 entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadForm {
    signs: Vec<i8>,
}

impl QuadForm {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("quadratic form signs must be +1 or -1".into()));
        }
        Ok(Self { signs })
    }

    /// The form of signature `(3, b−3)` with the positive entries first.
    pub fn period(b: usize) -> Result<Self> {
        if b < 4 {
            return Err(Error::InvalidInput(format!("period space needs b >= 4, got {b}")));
        }
        let signs = (0..b).map(|i| if i < 3 { 1 } else { -1 }).collect();
        Ok(Self { signs })
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `Σ signs_i x_i y_i`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        for v in [x, y] {
            if v.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
            }
        }
        Ok(self.dot(x, y))
    }

    pub(crate) fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        self.signs
            .iter()
            .zip(x.iter().zip(y))
            .map(|(&s, (a, b))| f64::from(s) * a * b)
            .sum()
    }
}

/// Evaluates the bilinear form `q(x, y)`.
pub fn q_eval(form: &QuadForm, x: &[f64], y: &[f64]) -> Result<f64> {
    form.eval(x, y)
}

/// q-dot for the standard period form `(+,+,+,−,…)`.
#[inline]
pub(crate) fn qdot(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        if i < 3 {
            s += x[i] * y[i];
        } else {
            s -= x[i] * y[i];
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Euclidean { dim: usize },
    BandedSphere { band: f64 },
    PeriodSpace { b: usize },
}

impl Model {
    /// Length of the coordinate array of a point.
    pub fn coords_len(&self) -> usize {
        match *self {
            Model::Euclidean { dim } => dim,
            Model::BandedSphere { .. } => 3,
            Model::PeriodSpace { b } => 2 * b,
        }
    }

    /// Length of the component array of a tangent vector.
    pub fn comps_len(&self) -> usize {
        match *self {
            Model::Euclidean { dim } => dim,
            Model::BandedSphere { .. } => 3,
            Model::PeriodSpace { b } => 2 * (b - 2),
        }
    }

    /// Intrinsic dimension of the manifold.
    pub fn tangent_dim(&self) -> usize {
        match *self {
            Model::Euclidean { dim } => dim,
            Model::BandedSphere { .. } => 2,
            Model::PeriodSpace { b } => 2 * (b - 2),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Euclidean { .. } => "euclidean",
            Model::BandedSphere { .. } => "banded_sphere",
            Model::PeriodSpace { .. } => "period_space",
        }
    }

    fn params_json(&self) -> Value {
        match *self {
            Model::Euclidean { dim } => json!({ "dim": dim }),
            Model::BandedSphere { band } => json!({ "band": band }),
            Model::PeriodSpace { b } => json!({ "b": b }),
        }
    }

    fn from_json(name: &str, params: &Value) -> Result<Self> {
        let field = |key: &str| {
            params
                .get(key)
                .ok_or_else(|| Error::InvalidInput(format!("missing params.{key}")))
        };
        match name {
            "euclidean" => Ok(Model::Euclidean { dim: as_usize(field("dim")?)? }),
            "banded_sphere" => {
                let band = field("band")?
                    .as_f64()
                    .ok_or_else(|| Error::InvalidInput("params.band must be a number".into()))?;
                if !(band > 0.0 && band < 1.0) {
                    return Err(Error::InvalidInput(format!("band must lie in (0, 1), got {band}")));
                }
                Ok(Model::BandedSphere { band })
            }
            "period_space" => {
                let b = as_usize(field("b")?)?;
                if b < 4 {
                    return Err(Error::InvalidInput(format!("period space needs b >= 4, got {b}")));
                }
                Ok(Model::PeriodSpace { b })
            }
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }
}

fn as_usize(v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::InvalidInput(format!("expected a non-negative integer, got {v}")))
}

/// A point of one of the three models.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    model: Model,
    coords: Vec<f64>,
}

impl ManifoldPoint {
    /// Builds a point and checks the model invariants.
    pub fn new(model: Model, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != model.coords_len() {
            return Err(Error::DimensionMismatch { expected: model.coords_len(), got: coords.len() });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        match model {
            Model::Euclidean { .. } => {}
            Model::BandedSphere { band } => {
                if (norm(&coords) - 1.0).abs() > SPHERE_TOL {
                    return Err(Error::InvariantViolated("sphere point is not unit length".into()));
                }
                if coords[2].abs() >= band {
                    return Err(Error::InvariantViolated(format!(
                        "|z| = {} outside the band |z| < {band}",
                        coords[2].abs()
                    )));
                }
            }
            Model::PeriodSpace { b } => {
                let (w1, w2) = coords.split_at(b);
                let g11 = qdot(w1, w1);
                let g22 = qdot(w2, w2);
                let g12 = qdot(w1, w2);
                if (g11 - 1.0).abs() > PLANE_TOL || (g22 - 1.0).abs() > PLANE_TOL || g12.abs() > PLANE_TOL {
                    return Err(Error::InvariantViolated("plane basis is not q-orthonormal".into()));
                }
            }
        }
        Ok(Self { model, coords })
    }

    pub fn euclidean(coords: Vec<f64>) -> Self {
        Self { model: Model::Euclidean { dim: coords.len() }, coords }
    }

    /// Normalizes `x` onto the unit sphere; fails outside the band.
    pub fn banded_sphere(band: f64, x: [f64; 3]) -> Result<Self> {
        let n = norm(&x);
        if n == 0.0 {
            return Err(Error::InvalidInput("zero vector is not a sphere point".into()));
        }
        Self::new(Model::BandedSphere { band }, x.iter().map(|v| v / n).collect())
    }

    /// The oriented plane spanned by `(a1, a2)` in that order, q-orthonormalized.
    pub fn period_plane(a1: &[f64], a2: &[f64]) -> Result<Self> {
        if a1.len() != a2.len() {
            return Err(Error::DimensionMismatch { expected: a1.len(), got: a2.len() });
        }
        let b = a1.len();
        if b < 4 {
            return Err(Error::InvalidInput(format!("period space needs b >= 4, got {b}")));
        }
        let (w1, w2) = q_orthonormalize_pair(a1, a2)?;
        let mut coords = w1;
        coords.extend_from_slice(&w2);
        Ok(Self { model: Model::PeriodSpace { b }, coords })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// `(w1, w2)` for a period-space point.
    pub fn plane(&self) -> (&[f64], &[f64]) {
        match self.model {
            Model::PeriodSpace { b } => self.coords.split_at(b),
            _ => panic!("plane() called on a {} point", self.model.name()),
        }
    }

    pub(crate) fn sphere(&self) -> [f64; 3] {
        to3(&self.coords)
    }

    pub fn approx_eq(&self, other: &ManifoldPoint, tol: f64) -> bool {
        self.model == other.model
            && self.coords.iter().zip(&other.coords).all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn to_json(&self) -> Value {
        let coords = match self.model {
            Model::PeriodSpace { b } => json!([&self.coords[..b], &self.coords[b..]]),
            _ => json!(self.coords),
        };
        json!({ "model": self.model.name(), "params": self.model.params_json(), "coords": coords })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let name = v
            .get("model")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidInput("point JSON needs a \"model\" string".into()))?;
        let params = v.get("params").cloned().unwrap_or_else(|| json!({}));
        let model = Model::from_json(name, &params)?;
        let coords = flatten_numbers(
            v.get("coords").ok_or_else(|| Error::InvalidInput("point JSON needs \"coords\"".into()))?,
        )?;
        Self::new(model, coords)
    }
}

impl Serialize for ManifoldPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ManifoldPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Self::from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// Flattens a number or (nested) array of numbers, row-major.
pub fn flatten_numbers(v: &Value) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    fn walk(v: &Value, out: &mut Vec<f64>) -> Result<()> {
        match v {
            Value::Number(n) => {
                out.push(n.as_f64().ok_or_else(|| Error::InvalidInput("bad number".into()))?);
                Ok(())
            }
            Value::Array(items) => items.iter().try_for_each(|x| walk(x, out)),
            other => Err(Error::InvalidInput(format!("expected numbers, found {other}"))),
        }
    }
    walk(v, &mut out)?;
    Ok(out)
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub comps: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: ManifoldPoint, comps: Vec<f64>) -> Result<Self> {
        let m = base.model();
        if comps.len() != m.comps_len() {
            return Err(Error::DimensionMismatch { expected: m.comps_len(), got: comps.len() });
        }
        if let Model::BandedSphere { .. } = m {
            let radial = dot(base.coords(), &comps);
            if radial.abs() > SPHERE_TOL * (1.0 + norm(&comps)) {
                return Err(Error::InvariantViolated("sphere tangent is not orthogonal to its base".into()));
            }
        }
        Ok(Self { base, comps })
    }

    /// Projects ambient components onto the tangent plane (sphere only; identity otherwise).
    pub fn projected(base: ManifoldPoint, mut comps: Vec<f64>) -> Result<Self> {
        if let Model::BandedSphere { .. } = base.model() {
            if comps.len() == 3 {
                let r = dot(base.coords(), &comps);
                axpy(&mut comps, -r, &base.coords().to_vec());
            }
        }
        Self::new(base, comps)
    }

    pub fn zero(base: ManifoldPoint) -> Self {
        let n = base.model().comps_len();
        Self { base, comps: vec![0.0; n] }
    }

    pub fn g_norm(&self) -> f64 {
        norm(&self.comps)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { base: self.base.clone(), comps: self.comps.iter().map(|x| x * s).collect() }
    }

    pub fn to_json(&self) -> Value {
        let comps = match self.base.model() {
            Model::PeriodSpace { b } => {
                let w = b - 2;
                json!([&self.comps[..w], &self.comps[w..]])
            }
            _ => json!(self.comps),
        };
        json!({ "base": self.base.to_json(), "comps": comps })
    }
}

/// Perp completion of a period-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub base: ManifoldPoint,
    /// `b − 2` vectors, q-norms `(+1, −1, …, −1)` in order.
    pub perp: Vec<Vec<f64>>,
}

impl Frame {
    pub fn signs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.perp.len()).map(|j| if j == 0 { 1.0 } else { -1.0 })
    }

    /// Frame coordinates of a vector of `W⊥`.
    pub fn perp_coords(&self, y: &[f64]) -> Vec<f64> {
        self.perp
            .iter()
            .enumerate()
            .map(|(j, f)| if j == 0 { qdot(y, f) } else { -qdot(y, f) })
            .collect()
    }

    /// The vector `Σ c_j f_j`.
    pub fn perp_vector(&self, c: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.base.coords().len() / 2];
        for (cj, f) in c.iter().zip(&self.perp) {
            axpy(&mut y, *cj, f);
        }
        y
    }
}

/// Orients `f` so that `(w₁, w₂, f)` projected to the positive coordinates is
/// a positive basis of ℝ³. The projection is injective on positive 3-spaces,
/// so the choice is continuous.
fn orient_positive(w1: &[f64], w2: &[f64], f: &mut [f64]) {
    let det = w1[0] * (w2[1] * f[2] - w2[2] * f[1]) - w1[1] * (w2[0] * f[2] - w2[2] * f[0])
        + w1[2] * (w2[0] * f[1] - w2[1] * f[0]);
    if det < 0.0 {
        f.iter_mut().for_each(|x| *x = -*x);
    }
}

/// q-Gram–Schmidt of an ordered pair; fails unless the span is certifiably positive.
pub(crate) fn q_orthonormalize_pair(a1: &[f64], a2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let g11 = qdot(a1, a1);
    let g22 = qdot(a2, a2);
    let g12 = qdot(a1, a2);
    let scale = (norm(a1) * norm(a2)).powi(2).max(f64::MIN_POSITIVE);
    let det = (g11 * g22 - g12 * g12) / scale;
    if g11 <= 0.0 || det <= DEGENERATE_GRAM {
        return Err(Error::DegeneratePlane(det));
    }
    let w1: Vec<f64> = a1.iter().map(|x| x / g11.sqrt()).collect();
    let mut w2 = a2.to_vec();
    for _ in 0..2 {
        let c = qdot(&w2, &w1);
        axpy(&mut w2, -c, &w1);
    }
    let n2 = qdot(&w2, &w2);
    if n2 <= 0.0 {
        return Err(Error::DegeneratePlane(det));
    }
    w2.iter_mut().for_each(|x| *x /= n2.sqrt());
    Ok((w1, w2))
}

/// Deterministic q-orthonormal completion of `W` to a basis of ℝᵇ.
///
/// The positive perp vector is the q-unit vector of `W⊥` with the smallest
/// Euclidean norm (the positive generalized eigenvector of `q` against the
/// Euclidean product on `W⊥`); it depends smoothly on `W`. The negative block
/// is q-Gram–Schmidt of the reference basis against `W ⊕ ⟨f₁⟩`.
pub fn adapted_frame(p: &ManifoldPoint) -> Result<Frame> {
    let b = match p.model() {
        Model::PeriodSpace { b } => b,
        m => return Err(Error::InvalidInput(format!("adapted_frame needs a period-space point, got {}", m.name()))),
    };
    let (w1, w2) = p.plane();
    let g11 = qdot(w1, w1);
    let g22 = qdot(w2, w2);
    let g12 = qdot(w1, w2);
    let det = g11 * g22 - g12 * g12;
    if g11 <= 0.0 || det <= DEGENERATE_GRAM {
        return Err(Error::DegeneratePlane(det));
    }

    let f1 = positive_perp(w1, w2).ok_or(Error::DegeneratePlane(det))?;

    let mut accepted: Vec<(Vec<f64>, f64)> = vec![(w1.to_vec(), 1.0), (w2.to_vec(), 1.0), (f1.clone(), 1.0)];
    let mut perp = vec![f1];
    // Negative coordinate vectors first: near the reference planes their
    // residuals are well conditioned and the block varies smoothly.
    for idx in (3..b).chain(0..3) {
        if perp.len() == b - 2 {
            break;
        }
        let mut r = vec![0.0; b];
        r[idx] = 1.0;
        for _ in 0..2 {
            for (s, sign) in accepted.iter() {
                let c = qdot(&r, s) * sign;
                axpy(&mut r, -c, s);
            }
        }
        let qq = qdot(&r, &r);
        // Residuals live in a negative-definite space; tiny ones are noise.
        if qq > -1e-8 {
            continue;
        }
        let sc = r[idx].signum() / (-qq).sqrt();
        r.iter_mut().for_each(|x| *x *= sc);
        accepted.push((r.clone(), -1.0));
        perp.push(r);
    }
    if perp.len() != b - 2 {
        return Err(Error::DegeneratePlane(det));
    }
    Ok(Frame { base: p.clone(), perp })
}

/// The Euclidean-minimal q-unit positive vector of `W⊥`, oriented with `W`.
pub(crate) fn positive_perp(w1: &[f64], w2: &[f64]) -> Option<Vec<f64>> {
    let b = w1.len();
    // Euclidean orthonormal basis of W⊥ = {J w1, J w2}^⊥.
    let jw = |w: &[f64]| -> Vec<f64> { w.iter().enumerate().map(|(i, x)| if i < 3 { *x } else { -x }).collect() };
    let perp_basis = complement_basis(&[jw(w1), jw(w2)], b);
    let k = perp_basis.len();
    if k != b - 2 {
        return None;
    }
    let gram = DMatrix::from_fn(k, k, |i, j| qdot(&perp_basis[i], &perp_basis[j]));
    let eig = SymmetricEigen::new(gram);
    let (imax, mu) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if mu <= 0.0 {
        return None;
    }
    let mut f1 = vec![0.0; b];
    for (c, basis) in eig.eigenvectors.column(imax).iter().zip(&perp_basis) {
        axpy(&mut f1, *c / mu.sqrt(), basis);
    }
    orient_positive(w1, w2, &mut f1);
    Some(f1)
}

/// Squared g-norm of the tangent at `p` that maps `w_i ↦ y_i` (`y_i ∈ W⊥`).
pub(crate) fn period_speed_sq(p: &ManifoldPoint, y1: &[f64], y2: &[f64]) -> Result<f64> {
    let (w1, w2) = p.plane();
    let f1 = positive_perp(w1, w2).ok_or(Error::DegeneratePlane(0.0))?;
    Ok(perp_norm_sq(&f1, y1) + perp_norm_sq(&f1, y2))
}

/// Euclidean orthonormal basis of the orthogonal complement of `rows` in ℝⁿ.
fn complement_basis(rows: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut proj = DMatrix::<f64>::identity(n, n);
    let span = crate::linalg::row_space_basis(rows, n, 1e-10);
    for s in &span {
        for i in 0..n {
            for j in 0..n {
                proj[(i, j)] -= s[i] * s[j];
            }
        }
    }
    let eig = SymmetricEigen::new(proj);
    let mut out: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(i, &v)| (v, eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out.into_iter().map(|(_, v)| v).collect()
}

/// Squared g-norm of a vector `y ∈ W⊥` measured in the adapted frame:
/// `2 q(y, f₁)² − q(y, y)`.
pub(crate) fn perp_norm_sq(f1: &[f64], y: &[f64]) -> f64 {
    let c = qdot(y, f1);
    2.0 * c * c - qdot(y, y)
}

fn same_base(u: &TangentVector, v: &TangentVector) -> bool {
    u.base.approx_eq(&v.base, 1e-12)
}

/// The ambient metric `g(u, v)`.
pub fn riemannian_g(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    if !same_base(u, v) {
        return Err(Error::BaseMismatch);
    }
    Ok(dot(&u.comps, &v.comps))
}

/// Moves `p` along `v` for time `t` using the model's retraction.
pub fn move_point(p: &ManifoldPoint, v: &TangentVector, t: f64) -> Result<ManifoldPoint> {
    if !p.approx_eq(&v.base, 1e-12) {
        return Err(Error::BaseMismatch);
    }
    if t == 0.0 {
        return Ok(p.clone());
    }
    match p.model() {
        Model::Euclidean { .. } => {
            let mut c = p.coords().to_vec();
            axpy(&mut c, t, &v.comps);
            Ok(ManifoldPoint::euclidean(c))
        }
        Model::BandedSphere { band } => sphere_exp(p, &v.comps, t, band),
        Model::PeriodSpace { .. } => {
            let frame = adapted_frame(p)?;
            period_move(&frame, &v.comps, t)
        }
    }
}

pub(crate) fn sphere_exp(p: &ManifoldPoint, v: &[f64], t: f64, band: f64) -> Result<ManifoldPoint> {
    let x = p.sphere();
    let speed = norm(v);
    let theta = t * speed;
    if theta == 0.0 {
        return Ok(p.clone());
    }
    let (s, c) = theta.sin_cos();
    let mut y = [0.0; 3];
    for i in 0..3 {
        y[i] = c * x[i] + s * v[i] / speed;
    }
    let n = norm(&y);
    y.iter_mut().for_each(|a| *a /= n);
    if y[2].abs() >= band {
        return Err(Error::InvariantViolated(format!("left the band: |z| = {} >= {band}", y[2].abs())));
    }
    Ok(ManifoldPoint { model: p.model(), coords: y.to_vec() })
}

pub(crate) fn period_move(frame: &Frame, a: &[f64], t: f64) -> Result<ManifoldPoint> {
    let (w1, w2) = frame.base.plane();
    let w = frame.perp.len();
    let mut n1 = w1.to_vec();
    let mut n2 = w2.to_vec();
    for j in 0..w {
        axpy(&mut n1, t * a[j], &frame.perp[j]);
        axpy(&mut n2, t * a[w + j], &frame.perp[j]);
    }
    ManifoldPoint::period_plane(&n1, &n2).map_err(|e| match e {
        Error::DegeneratePlane(d) => Error::InvariantViolated(format!("plane became non-positive (q-Gram det {d:e})")),
        other => other,
    })
}

/// Inverse of the retraction: the tangent `v` at `p` with `move_point(p, v, 1) = q`.
pub fn log_map(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
    if p.model() != q.model() {
        return Err(Error::BaseMismatch);
    }
    match p.model() {
        Model::Euclidean { .. } => {
            let comps = q.coords().iter().zip(p.coords()).map(|(a, b)| a - b).collect();
            Ok(TangentVector { base: p.clone(), comps })
        }
        Model::BandedSphere { .. } => Ok(TangentVector { base: p.clone(), comps: sphere_log(&p.sphere(), &q.sphere())?.to_vec() }),
        Model::PeriodSpace { .. } => {
            let frame = adapted_frame(p)?;
            Ok(TangentVector { base: p.clone(), comps: period_log(&frame, q)? })
        }
    }
}

pub(crate) fn sphere_log(x: &[f64; 3], y: &[f64; 3]) -> Result<[f64; 3]> {
    let c = dot(x, y);
    let mut v = [y[0] - c * x[0], y[1] - c * x[1], y[2] - c * x[2]];
    let s = norm(&v);
    let angle = s.atan2(c);
    if s < 1e-300 {
        if c > 0.0 {
            return Ok([0.0; 3]);
        }
        return Err(Error::InvalidInput("antipodal sphere points have no unique logarithm".into()));
    }
    v.iter_mut().for_each(|a| *a *= angle / s);
    Ok(v)
}

pub(crate) fn period_log(frame: &Frame, q: &ManifoldPoint) -> Result<Vec<f64>> {
    let (w1, w2) = frame.base.plane();
    let (u1, u2) = q.plane();
    let w = frame.perp.len();
    let c = [[qdot(u1, w1), qdot(u1, w2)], [qdot(u2, w1), qdot(u2, w2)]];
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    if det <= 1e-8 {
        return Err(Error::InvalidInput(format!(
            "planes are not in a common graph chart (det {det:e}); orientation reversed or too far apart"
        )));
    }
    let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
    let d1 = frame.perp_coords(u1);
    let d2 = frame.perp_coords(u2);
    let mut a = vec![0.0; 2 * w];
    for j in 0..w {
        a[j] = inv[0][0] * d1[j] + inv[0][1] * d2[j];
        a[w + j] = inv[1][0] * d1[j] + inv[1][1] * d2[j];
    }
    Ok(a)
}

/// Orthonormal basis of the tangent space, in component coordinates.
pub fn tangent_basis(p: &ManifoldPoint) -> Vec<Vec<f64>> {
    match p.model() {
        Model::Euclidean { dim } => unit_vectors(dim),
        Model::PeriodSpace { b } => unit_vectors(2 * (b - 2)),
        Model::BandedSphere { .. } => {
            let (e, n) = sphere_east_north(&p.sphere());
            vec![e.to_vec(), n.to_vec()]
        }
    }
}

fn unit_vectors(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// East and north unit tangents at a non-polar sphere point.
pub(crate) fn sphere_east_north(x: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let east = [-x[1] / rho, x[0] / rho, 0.0];
    let north = [-x[2] * x[0] / rho, -x[2] * x[1] / rho, rho];
    (east, north)
}


/// Euclidean length of the segment chart used for displacement residuals: the
/// logarithm at a fixed base.
pub fn chart_displacement(base: &ManifoldPoint, x: &ManifoldPoint) -> Result<Vec<f64>> {
    Ok(log_map(base, x)?.comps)
}
