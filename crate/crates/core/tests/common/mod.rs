//! Shared test helpers: independent oracles and random draws per model.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use subconic::{ConeModel, ManifoldPoint, Model, TangentVector};

/// Runs a criterion, prints one PASS/FAIL line straight to stderr (so it shows
/// under captured output) and fails the test on error or overrun.
pub fn criterion(id: usize, name: &str, limit: Duration, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let (ok, detail) = match &outcome {
        Ok(d) if elapsed <= limit => (true, d.clone()),
        Ok(d) => (false, format!("{d}; over time limit {limit:?}")),
        Err(e) => (false, e.clone()),
    };
    let line = format!(
        "criterion {id:>2} [{}] {name}: {detail} ({:.2}s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(ok, "{}", line.trim_end());
}

pub fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn l1(p: &ManifoldPoint, q: &ManifoldPoint) -> f64 {
    p.coords().iter().zip(q.coords()).map(|(a, b)| (a - b).abs()).sum()
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Band-sphere distance by brute force: Dijkstra over `nodes` Fibonacci points
/// plus the two ends, linking points within eight grid spacings by great-circle
/// arcs. An arc whose climb angle `α` exceeds the cone's half-angle `ψ`
/// (`sin ψ = √((c² − z²)/(1 − z²))`) is followed by a zig-zag of the two extreme
/// cone directions, whose length per unit arc is `sin α / sin ψ`; the weight is
/// that factor integrated along the arc by Simpson's rule.
pub fn sphere_graph_distance(band: f64, p: [f64; 3], q: [f64; 3], nodes: usize) -> f64 {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut pts: Vec<[f64; 3]> = (0..nodes)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / nodes as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .filter(|x| x[2].abs() < band)
        .collect();
    pts.push(p);
    pts.push(q);
    let (src, dst) = (pts.len() - 2, pts.len() - 1);
    let radius = 8.0 * (4.0 * std::f64::consts::PI / nodes as f64).sqrt();
    let min_cos = radius.cos();
    let factor = |x: &[f64; 3], n: &[f64; 3]| -> f64 {
        // Unit tangent of the great circle with normal n at x, against the
        // upward direction at x.
        let t = cross(n, x);
        let rho = (1.0 - x[2] * x[2]).sqrt();
        let climb = (t[2] / rho).abs();
        let room = ((band * band - x[2] * x[2]) / (1.0 - x[2] * x[2])).max(0.0).sqrt();
        if climb <= room {
            1.0
        } else if room > 0.0 {
            climb / room
        } else {
            f64::INFINITY
        }
    };
    let weight = |a: &[f64; 3], b: &[f64; 3]| -> f64 {
        let mut n = cross(a, b);
        let len = dot3(&n, &n).sqrt();
        n.iter_mut().for_each(|v| *v /= len);
        let mut m = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let ml = dot3(&m, &m).sqrt();
        m.iter_mut().for_each(|v| *v /= ml);
        let angle = dot3(a, b).clamp(-1.0, 1.0).acos();
        angle * (factor(a, &n) + 4.0 * factor(&m, &n) + factor(b, &n)) / 6.0
    };
    let mut dist = vec![f64::INFINITY; pts.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Entry(0.0, src));
    while let Some(Entry(d, i)) = heap.pop() {
        if i == dst {
            return d;
        }
        if d > dist[i] {
            continue;
        }
        for j in 0..pts.len() {
            let c = dot3(&pts[i], &pts[j]);
            if j == i || c < min_cos {
                continue;
            }
            let nd = d + weight(&pts[i], &pts[j]);
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Entry(nd, j));
            }
        }
    }
    f64::INFINITY
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(1e-12..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

/// A point of the cone's model away from degenerate loci.
pub fn random_point(cone: &ConeModel, rng: &mut impl Rng) -> ManifoldPoint {
    match cone.model() {
        Model::Euclidean { dim } => {
            let mut c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if c[0].abs() < 0.05 {
                c[0] += 0.1;
            }
            ManifoldPoint::euclidean(c)
        }
        Model::BandedSphere { band } => {
            let z = rng.gen_range(-0.9..0.9) * band;
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            ManifoldPoint::banded_sphere(band, [r * phi.cos(), r * phi.sin(), z]).unwrap()
        }
        Model::PeriodSpace { b } => loop {
            let row = |k: usize, rng: &mut _| -> Vec<f64> {
                (0..b).map(|i| 0.4 * gaussian(rng) + if i == k { 1.0 } else { 0.0 }).collect()
            };
            let (a1, a2) = (row(0, rng), row(1, rng));
            if let Ok(p) = ManifoldPoint::period_plane(&a1, &a2) {
                return p;
            }
        },
    }
}

/// A random tangent vector at `p`.
pub fn random_tangent(p: &ManifoldPoint, rng: &mut impl Rng) -> TangentVector {
    let comps: Vec<f64> = (0..p.model().comps_len()).map(|_| gaussian(rng)).collect();
    TangentVector::projected(p.clone(), comps).unwrap()
}

/// A random nonzero vector of the cone at `p`, built from the cone's
/// definition rather than the library sampler.
pub fn random_cone_vector(cone: &ConeModel, p: &ManifoldPoint, rng: &mut impl Rng) -> TangentVector {
    let scale = rng.gen_range(0.1..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let comps = match (&cone.kind, p.model()) {
        (subconic::ConeKind::Axis { dim }, _) => {
            let mut v = vec![0.0; *dim];
            v[rng.gen_range(0..*dim)] = scale;
            v
        }
        (subconic::ConeKind::ScaledAxis, _) => {
            let x = p.coords()[0];
            match rng.gen_range(0..3) {
                0 => vec![scale * x, 0.0],
                1 => vec![0.0, scale],
                _ => vec![scale, scale],
            }
        }
        (_, Model::BandedSphere { band }) => {
            let c = p.coords();
            let (x, y, z) = (c[0], c[1], c[2]);
            let rho = (1.0 - z * z).sqrt();
            let e_phi = [-y / rho, x / rho, 0.0];
            let e_up = [-x * z / rho, -y * z / rho, rho];
            let slope = ((band * band - z * z) / (1.0 - z * z)).sqrt();
            let s = rng.gen_range(-1.0..1.0) * slope;
            let co = (1.0 - s * s).sqrt();
            (0..3).map(|i| scale * (co * e_phi[i] + s * e_up[i])).collect()
        }
        (_, Model::PeriodSpace { b }) => {
            let w = b - 2;
            // q-unit image (cosh r, sinh r·ω) inside the sampled truncation r ≤ r_max.
            let r_max = match cone.kind {
                subconic::ConeKind::SubTwistor { r_max, .. } => r_max,
                _ => unreachable!(),
            };
            let omega: Vec<f64> = (1..w).map(|_| gaussian(rng)).collect();
            let on = omega.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = rng.gen_range(0.0..r_max);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let u: Vec<f64> =
                std::iter::once(sign * r.cosh()).chain(omega.iter().map(|x| r.sinh() * x / on)).collect();
            let (a1, a2) = (gaussian(rng), gaussian(rng));
            u.iter().map(|x| a1 * x * scale).chain(u.iter().map(|x| a2 * x * scale)).collect()
        }
        _ => panic!("no cone sampler for {:?}", cone.kind),
    };
    TangentVector::new(p.clone(), comps).unwrap()
}
