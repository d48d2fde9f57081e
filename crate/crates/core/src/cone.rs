//! Distributions of cones: membership, unit-generator sampling and span.
//!
//! Every cone here is symmetric (closed under negative multiples) and the
//! membership test checks the fiberwise closure, so boundary directions count
//! as contained.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flows::FieldExpr;
use crate::geometry::{adapted_frame, sphere_east_north, ManifoldPoint, Model, TangentVector};
use crate::linalg::{dot, norm, row_space_basis};
use crate::poly::PolyField;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_R_MAX: f64 = 3.0;
/// Singular-value cutoff used for span ranks.
pub const SPAN_CUTOFF: f64 = 1e-8;

/// A polynomial field with a display name.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedField {
    pub name: String,
    pub field: PolyField,
}

impl NamedField {
    pub fn parse(name: &str, expr: &str, dim: usize) -> Result<Self> {
        Ok(Self { name: name.to_string(), field: PolyField::parse(expr, dim)? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeKind {
    /// Lines along the coordinate axes of ℝⁿ.
    Axis { dim: usize },
    /// Generated by `x∂x`, `∂y`, `∂x + ∂y` on ℝ².
    ScaledAxis,
    /// Directions of great circles that stay inside `|z| ≤ band`.
    BandSphere { band: f64 },
    /// Rank ≤ 1 maps `W → W⊥` with q-non-negative image.
    SubTwistor { b: usize, r_max: f64 },
    /// Lines spanned by the values of the given fields.
    Generator { dim: usize, fields: Vec<NamedField> },
    /// Every direction (the gauge is the Riemannian norm).
    Full { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeModel {
    pub kind: ConeKind,
    pub tolerance: f64,
}

impl ConeModel {
    pub fn new(kind: ConeKind) -> Self {
        Self { kind, tolerance: DEFAULT_TOLERANCE }
    }

    pub fn axis(dim: usize) -> Self {
        Self::new(ConeKind::Axis { dim })
    }

    pub fn scaled_axis() -> Self {
        Self::new(ConeKind::ScaledAxis)
    }

    pub fn band_sphere(band: f64) -> Self {
        Self::new(ConeKind::BandSphere { band })
    }

    pub fn sub_twistor(b: usize) -> Self {
        Self::new(ConeKind::SubTwistor { b, r_max: DEFAULT_R_MAX })
    }

    pub fn full(dim: usize) -> Self {
        Self::new(ConeKind::Full { dim })
    }

    pub fn generator(dim: usize, fields: Vec<NamedField>) -> Self {
        Self::new(ConeKind::Generator { dim, fields })
    }

    pub fn with_r_max(mut self, r: f64) -> Self {
        if let ConeKind::SubTwistor { r_max, .. } = &mut self.kind {
            *r_max = r;
        }
        self
    }

    /// The manifold model this cone lives on.
    pub fn model(&self) -> Model {
        match &self.kind {
            ConeKind::Axis { dim } | ConeKind::Full { dim } | ConeKind::Generator { dim, .. } => {
                Model::Euclidean { dim: *dim }
            }
            ConeKind::ScaledAxis => Model::Euclidean { dim: 2 },
            ConeKind::BandSphere { band } => Model::BandedSphere { band: *band },
            ConeKind::SubTwistor { b, .. } => Model::PeriodSpace { b: *b },
        }
    }

    /// Default sample count. Resolves the cone-direction norm to 2e−3 on every
    /// model except the sub-twistor cone with b ≥ 5 (about 5e−3 at b = 5).
    pub fn default_samples(&self) -> usize {
        match &self.kind {
            ConeKind::Axis { dim } => 2 * dim,
            ConeKind::ScaledAxis => 6,
            ConeKind::Generator { fields, .. } => 2 * fields.len(),
            ConeKind::BandSphere { .. } => 256,
            ConeKind::Full { dim } => if *dim == 2 { 512 } else { 4096 },
            ConeKind::SubTwistor { b, .. } => match b {
                4 => 2048,
                5 => 8192,
                _ => 16384,
            },
        }
    }

    /// Polynomial fields for the field-generated Euclidean cones.
    pub(crate) fn poly_fields(&self) -> Option<Vec<PolyField>> {
        match &self.kind {
            ConeKind::ScaledAxis => Some(
                ["x*dx", "dy", "dx + dy"]
                    .iter()
                    .map(|s| PolyField::parse(s, 2).expect("catalog field parses"))
                    .collect(),
            ),
            ConeKind::Generator { fields, .. } => Some(fields.iter().map(|f| f.field.clone()).collect()),
            _ => None,
        }
    }

    /// Builds a point of the cone's model, reporting points outside the band as
    /// an empty cone fiber.
    pub fn point(&self, coords: Vec<f64>) -> Result<ManifoldPoint> {
        match self.model() {
            Model::BandedSphere { band } => {
                if coords.len() != 3 {
                    return Err(Error::DimensionMismatch { expected: 3, got: coords.len() });
                }
                let n = norm(&coords);
                if n > 0.0 && (coords[2] / n).abs() >= band {
                    return Err(Error::EmptyConeFiber);
                }
                ManifoldPoint::banded_sphere(band, [coords[0], coords[1], coords[2]])
            }
            Model::PeriodSpace { b } => {
                if coords.len() != 2 * b {
                    return Err(Error::DimensionMismatch { expected: 2 * b, got: coords.len() });
                }
                ManifoldPoint::period_plane(&coords[..b], &coords[b..])
            }
            m => ManifoldPoint::new(m, coords),
        }
    }

    pub(crate) fn check_domain(&self, p: &ManifoldPoint) -> Result<()> {
        let want = self.model();
        match (want, p.model()) {
            (Model::Euclidean { dim: a }, Model::Euclidean { dim: b }) if a == b => Ok(()),
            (Model::PeriodSpace { b: a }, Model::PeriodSpace { b }) if a == b => Ok(()),
            (Model::BandedSphere { band: c }, Model::BandedSphere { .. }) => {
                if p.coords()[2].abs() >= c {
                    Err(Error::EmptyConeFiber)
                } else {
                    Ok(())
                }
            }
            (Model::Euclidean { dim }, Model::Euclidean { dim: got }) => {
                Err(Error::DimensionMismatch { expected: dim, got })
            }
            (Model::PeriodSpace { b }, Model::PeriodSpace { b: got }) => {
                Err(Error::DimensionMismatch { expected: 2 * b, got: 2 * got })
            }
            (w, g) => Err(Error::InvalidInput(format!("cone lives on {} but point is {}", w.name(), g.name()))),
        }
    }

    /// Membership of `v` in the closed cone fiber at its base point.
    pub fn contains(&self, v: &TangentVector) -> Result<bool> {
        self.check_domain(&v.base)?;
        let a = &v.comps;
        let n2 = dot(a, a);
        if n2 == 0.0 {
            return Ok(true);
        }
        let tol = self.tolerance;
        Ok(match &self.kind {
            ConeKind::Full { .. } => true,
            ConeKind::Axis { .. } => {
                let m = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                a.iter().filter(|x| x.abs() > tol * m).count() <= 1
            }
            ConeKind::ScaledAxis | ConeKind::Generator { .. } => {
                let x = v.base.coords();
                self.poly_fields().unwrap().iter().any(|f| {
                    let fx = f.eval(x);
                    let f2 = dot(&fx, &fx);
                    if f2 == 0.0 {
                        return false;
                    }
                    // Parallel iff the Gram determinant vanishes.
                    let c = dot(a, &fx);
                    n2 * f2 - c * c <= tol * n2 * f2
                })
            }
            ConeKind::BandSphere { band } => {
                let z = v.base.coords()[2];
                let uz = a[2] / n2.sqrt();
                z * z + uz * uz <= band * band + tol
            }
            ConeKind::SubTwistor { b, .. } => twistor_contains(*b, a, tol),
        })
    }

    /// Unit generators of the cone fiber at `p`, symmetric under negation.
    ///
    /// Finite cones return their whole generator set, which may be smaller
    /// than `count`.
    pub fn sample_unit_generators(&self, p: &ManifoldPoint, count: usize) -> Result<Vec<TangentVector>> {
        Ok(self
            .generator_comps(p, count)?
            .iter()
            .map(|c| TangentVector { base: p.clone(), comps: c.clone() })
            .collect())
    }

    /// Component arrays of the unit generators at `p`.
    pub(crate) fn generator_comps(&self, p: &ManifoldPoint, count: usize) -> Result<Arc<Vec<Vec<f64>>>> {
        self.check_domain(p)?;
        let count = count.max(1);
        let out = match &self.kind {
            ConeKind::Axis { dim } => (0..*dim)
                .flat_map(|i| {
                    [1.0, -1.0].map(|s| {
                        let mut e = vec![0.0; *dim];
                        e[i] = s;
                        e
                    })
                })
                .collect(),
            ConeKind::Full { dim } => full_directions(*dim, count),
            ConeKind::ScaledAxis | ConeKind::Generator { .. } => {
                let x = p.coords();
                let mut out: Vec<Vec<f64>> = Vec::new();
                for f in self.poly_fields().unwrap() {
                    let fx = f.eval(x);
                    let n = norm(&fx);
                    if n == 0.0 {
                        continue;
                    }
                    let unit: Vec<f64> = fx.iter().map(|c| c / n).collect();
                    let neg: Vec<f64> = unit.iter().map(|c| -c).collect();
                    out.push(unit);
                    out.push(neg);
                }
                if out.is_empty() {
                    return Err(Error::EmptyConeFiber);
                }
                out
            }
            ConeKind::BandSphere { band } => sphere_generators(&p.sphere(), *band, count)?,
            ConeKind::SubTwistor { b, r_max } => return Ok(twistor_generators(*b, count, *r_max)),
        };
        Ok(Arc::new(out))
    }

    /// Rank of the sampled generators at `p`.
    pub fn span_dimension(&self, p: &ManifoldPoint) -> Result<usize> {
        let gens = self.generator_comps(p, self.default_samples())?;
        Ok(row_space_basis(&gens, p.model().comps_len(), SPAN_CUTOFF).len())
    }

    /// A cone field on a neighborhood of `p` whose value at `p` is `comps`.
    pub fn field_through(&self, p: &ManifoldPoint, comps: &[f64]) -> Result<FieldExpr> {
        self.check_domain(p)?;
        match &self.kind {
            ConeKind::Axis { .. } | ConeKind::Full { .. } => Ok(FieldExpr::Poly(PolyField::constant(comps))),
            ConeKind::ScaledAxis | ConeKind::Generator { .. } => {
                let x = p.coords();
                let n2 = dot(comps, comps);
                for f in self.poly_fields().unwrap() {
                    let fx = f.eval(x);
                    let f2 = dot(&fx, &fx);
                    if f2 == 0.0 {
                        continue;
                    }
                    let c = dot(comps, &fx);
                    if n2 * f2 - c * c <= 1e-9 * n2 * f2 {
                        return Ok(FieldExpr::Poly(f.scaled(c / f2)));
                    }
                }
                Err(Error::InvalidInput("vector is not a multiple of any generating field".into()))
            }
            ConeKind::BandSphere { band } => {
                let x = p.sphere();
                let (east, north) = sphere_east_north(&x);
                let speed = norm(comps);
                let ce = dot(comps, &east) / speed;
                let sn = dot(comps, &north) / speed;
                let s = band_slope(x[2], *band);
                let climb = if s > 0.0 { (sn / s).clamp(-1.0, 1.0) } else { 0.0 };
                Ok(FieldExpr::SphereCone { band: *band, climb, heading: if ce >= 0.0 { 1.0 } else { -1.0 }, speed })
            }
            ConeKind::SubTwistor { .. } => {
                let frame = adapted_frame(p)?;
                Ok(FieldExpr::PerFrame { reference: frame.perp, matrix: comps.to_vec() })
            }
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = match &self.kind {
            ConeKind::Axis { dim } => json!({ "kind": "axis", "dim": dim }),
            ConeKind::ScaledAxis => json!({ "kind": "scaled_axis" }),
            ConeKind::BandSphere { band } => json!({ "kind": "band_sphere", "band": band }),
            ConeKind::SubTwistor { b, r_max } => json!({ "kind": "sub_twistor", "b": b, "r_max": r_max }),
            ConeKind::Generator { dim, fields } => json!({
                "kind": "generator",
                "dim": dim,
                "fields": fields.iter().map(|f| json!({ "name": f.name, "expr": f.field.to_string() })).collect::<Vec<_>>(),
            }),
            ConeKind::Full { dim } => json!({ "kind": "full", "dim": dim }),
        };
        v["tolerance"] = json!(self.tolerance);
        v
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let kind = v.get("kind").and_then(Value::as_str).ok_or_else(|| bad("cone JSON needs a \"kind\" string"))?;
        let uint = |key: &str| -> Result<usize> {
            v.get(key)
                .and_then(Value::as_u64)
                .map(|x| x as usize)
                .ok_or_else(|| bad(&format!("cone JSON needs integer \"{key}\"")))
        };
        let num = |key: &str, default: f64| -> Result<f64> {
            match v.get(key) {
                None => Ok(default),
                Some(x) => x.as_f64().ok_or_else(|| bad(&format!("\"{key}\" must be a number"))),
            }
        };
        let kind = match kind {
            "axis" => ConeKind::Axis { dim: uint("dim")? },
            "scaled_axis" => ConeKind::ScaledAxis,
            "band_sphere" => {
                let band = num("band", std::f64::consts::FRAC_1_SQRT_2)?;
                if !(band > 0.0 && band < 1.0) {
                    return Err(bad(&format!("band must lie in (0, 1), got {band}")));
                }
                ConeKind::BandSphere { band }
            }
            "sub_twistor" => {
                let b = uint("b")?;
                if b < 4 {
                    return Err(bad(&format!("sub_twistor needs b >= 4, got {b}")));
                }
                ConeKind::SubTwistor { b, r_max: num("r_max", DEFAULT_R_MAX)? }
            }
            "full" => ConeKind::Full { dim: uint("dim")? },
            "generator" => {
                let dim = uint("dim")?;
                let list = v.get("fields").and_then(Value::as_array).ok_or_else(|| bad("generator cone needs \"fields\""))?;
                let fields = list
                    .iter()
                    .enumerate()
                    .map(|(i, f)| match f {
                        Value::String(s) => NamedField::parse(s, s, dim),
                        Value::Object(_) => {
                            let expr = f.get("expr").and_then(Value::as_str).ok_or_else(|| bad("field needs \"expr\""))?;
                            let default = format!("X{}", i + 1);
                            let name = f.get("name").and_then(Value::as_str).unwrap_or(&default);
                            NamedField::parse(name, expr, dim)
                        }
                        _ => Err(bad("fields must be strings or {name, expr} objects")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if fields.is_empty() {
                    return Err(bad("generator cone needs at least one field"));
                }
                ConeKind::Generator { dim, fields }
            }
            other => return Err(bad(&format!("unknown cone kind '{other}'"))),
        };
        Ok(Self { kind, tolerance: num("tolerance", DEFAULT_TOLERANCE)? })
    }

    /// Accepts a JSON object or a shorthand: `axisN`, `scaled-axis`,
    /// `bandsphere[:c]`, `twistorB`, `fullN`, `fields:<expr>;<expr>…`.
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        if s.starts_with('{') {
            let v: Value = serde_json::from_str(s).map_err(|e| bad(&format!("cone JSON: {e}")))?;
            return Self::from_json(&v);
        }
        let digits = |rest: &str| rest.parse::<usize>().map_err(|_| bad(&format!("bad cone shorthand '{s}'")));
        if let Some(rest) = s.strip_prefix("axis") {
            return Ok(Self::axis(digits(rest)?));
        }
        if s == "scaled-axis" || s == "scaled_axis" {
            return Ok(Self::scaled_axis());
        }
        if let Some(rest) = s.strip_prefix("bandsphere") {
            let band = match rest.strip_prefix(':') {
                Some(c) => c.parse::<f64>().map_err(|_| bad(&format!("bad band in '{s}'")))?,
                None if rest.is_empty() => std::f64::consts::FRAC_1_SQRT_2,
                None => return Err(bad(&format!("bad cone shorthand '{s}'"))),
            };
            return Self::from_json(&json!({ "kind": "band_sphere", "band": band }));
        }
        if let Some(rest) = s.strip_prefix("twistor") {
            return Self::from_json(&json!({ "kind": "sub_twistor", "b": digits(rest)? }));
        }
        if let Some(rest) = s.strip_prefix("full") {
            return Ok(Self::full(digits(rest)?));
        }
        if let Some(rest) = s.strip_prefix("fields:") {
            let exprs: Vec<&str> = rest.split(';').map(str::trim).filter(|e| !e.is_empty()).collect();
            let dim = exprs.iter().map(|e| infer_dim(e)).max().unwrap_or(2).max(2);
            let fields = exprs.iter().map(|e| NamedField::parse(e, e, dim)).collect::<Result<Vec<_>>>()?;
            return Ok(Self::generator(dim, fields));
        }
        Err(bad(&format!("unknown cone '{s}'")))
    }
}

fn bad(msg: &str) -> Error {
    Error::InvalidInput(msg.to_string())
}

/// Smallest dimension whose coordinate names cover the expression.
fn infer_dim(expr: &str) -> usize {
    (2..=9).find(|&d| PolyField::parse(expr, d).is_ok()).unwrap_or(2)
}

/// Membership for a `2 × (b−2)` frame matrix.
pub(crate) fn twistor_contains(b: usize, a: &[f64], tol: f64) -> bool {
    let w = b - 2;
    let (r1, r2) = a.split_at(w);
    let n2 = dot(a, a);
    for j in 0..w {
        for k in (j + 1)..w {
            if (r1[j] * r2[k] - r1[k] * r2[j]).abs() > tol * n2 {
                return false;
            }
        }
    }
    let qrow = |r: &[f64]| r[0] * r[0] - r[1..].iter().map(|x| x * x).sum::<f64>();
    qrow(r1) + qrow(r2) >= -tol * n2
}

/// `√((c² − z²)/(1 − z²))`: the largest admissible sine of the climb angle.
pub(crate) fn band_slope(z: f64, band: f64) -> f64 {
    ((band * band - z * z) / (1.0 - z * z)).max(0.0).sqrt()
}

fn sphere_generators(x: &[f64; 3], band: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    if x[2].abs() >= band {
        return Err(Error::EmptyConeFiber);
    }
    let (east, north) = sphere_east_north(x);
    let psi_max = band_slope(x[2], band).min(1.0).asin();
    let per_arc = count.div_ceil(2).max(2);
    let mut out = Vec::with_capacity(2 * per_arc);
    for k in 0..per_arc {
        let psi = -psi_max + 2.0 * psi_max * k as f64 / (per_arc - 1) as f64;
        let (s, c) = psi.sin_cos();
        let u: Vec<f64> = (0..3).map(|i| c * east[i] + s * north[i]).collect();
        out.push(u.iter().map(|v| -v).collect());
        out.push(u);
    }
    Ok(out)
}

fn full_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let n = count.max(4).next_multiple_of(2);
            (0..n).map(|k| {
                let a = TAU * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
        }
        3 => fibonacci_sphere(count.div_ceil(2).max(2))
            .into_iter()
            .flat_map(|u| [u.clone(), u.iter().map(|c| -c).collect()])
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + dim as u64);
            (0..count.div_ceil(2))
                .flat_map(|_| {
                    let u = random_unit(&mut rng, dim);
                    [u.clone(), u.iter().map(|c| -c).collect()]
                })
                .collect()
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        // Box–Muller pairs give isotropic directions.
        let g: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
            })
            .collect();
        let n = norm(&g);
        if n > 1e-6 {
            return g.iter().map(|x| x / n).collect();
        }
    }
}

/// Fibonacci lattice on S².
pub(crate) fn fibonacci_sphere(n: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            vec![r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Surface area of the unit sphere `S^k`.
fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => TAU,
        _ => TAU / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

/// Unit directions on `S^k` for one ring of the positive-direction grid.
fn ring_directions(k: usize, n: usize, ring: usize) -> Vec<Vec<f64>> {
    match k {
        0 => vec![vec![1.0], vec![-1.0]],
        1 => {
            let offset = if ring % 2 == 1 { 0.5 } else { 0.0 };
            (0..n)
                .map(|i| {
                    let a = TAU * (i as f64 + offset) / n as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        2 => fibonacci_sphere(n),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7157_0000 + 97 * k as u64 + ring as u64);
            (0..n).map(|_| random_unit(&mut rng, k + 1)).collect()
        }
    }
}

/// Unit positive directions `(cos α, sin α·ω)` in perp-frame coordinates with
/// angular spacing `delta`, `α ≤ atan(tanh r_max)`.
fn positive_directions(b: usize, delta: f64, r_max: f64) -> Vec<Vec<f64>> {
    let k = b - 4;
    let alpha_max = r_max.tanh().atan();
    let mut alphas: Vec<f64> = (0..).map(|j| j as f64 * delta).take_while(|&a| a <= alpha_max + 1e-12).collect();
    if alpha_max - alphas.last().copied().unwrap_or(0.0) > 1e-3 * delta {
        alphas.push(alpha_max);
    }
    let mut out = vec![{
        let mut e = vec![0.0; b - 2];
        e[0] = 1.0;
        e
    }];
    for (ring, &a) in alphas.iter().enumerate().skip(1) {
        let n = if k == 0 { 2 } else { (sphere_area(k) * (a.sin() / delta).powi(k as i32)).ceil().max(1.0) as usize };
        for omega in ring_directions(k, n, ring) {
            let mut l = Vec::with_capacity(b - 2);
            l.push(a.cos());
            l.extend(omega.iter().map(|o| a.sin() * o));
            out.push(l);
        }
    }
    out
}

type TwistorKey = (usize, usize, u64);

fn twistor_cache() -> &'static Mutex<HashMap<TwistorKey, Arc<Vec<Vec<f64>>>>> {
    static CACHE: OnceLock<Mutex<HashMap<TwistorKey, Arc<Vec<Vec<f64>>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Rank-one unit generators `u ⊗ ℓ` in frame coordinates. The frame cone is
/// the same at every plane, so the grid is computed once per parameter set.
pub(crate) fn twistor_generators(b: usize, count: usize, r_max: f64) -> Arc<Vec<Vec<f64>>> {
    let key = (b, count, r_max.to_bits());
    if let Some(g) = twistor_cache().lock().unwrap().get(&key) {
        return g.clone();
    }
    let w = b - 2;
    let mut n_u = 8;
    let (n_u, ells) = loop {
        let ells = positive_directions(b, TAU / n_u as f64, r_max);
        if n_u * ells.len() >= count {
            break (n_u, ells);
        }
        n_u += 4;
    };
    let mut out = Vec::with_capacity(n_u * ells.len());
    for k in 0..n_u {
        let (s, c) = (TAU * k as f64 / n_u as f64).sin_cos();
        for l in &ells {
            let ln = norm(l);
            let mut a = vec![0.0; 2 * w];
            for j in 0..w {
                a[j] = c * l[j] / ln;
                a[w + j] = s * l[j] / ln;
            }
            out.push(a);
        }
    }
    let out = Arc::new(out);
    twistor_cache().lock().unwrap().insert(key, out.clone());
    out
}
