//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! and asserting its tolerance and time limit.

mod common;

use std::time::Duration;

use common::{check, criterion, l1, random_cone_vector, random_point, random_tangent, sphere_graph_distance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subconic::poly::PolyField;
use subconic::{
    bracket_flow, compare_metrics, find_flat_segment, gauge_norm, gauge_value, move_point, rank1_decompose,
    sample_pairs, subconic_distance_upper, unit_ball, zigzag, BracketExpr, ConeModel, FieldExpr, ManifoldPoint,
    MetricParams, TangentVector,
};

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn pf(s: &str) -> FieldExpr {
    FieldExpr::Poly(PolyField::parse(s, 2).unwrap())
}

fn e2(x: f64, y: f64) -> ManifoldPoint {
    ManifoldPoint::euclidean(vec![x, y])
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn non_increasing(seq: &[f64], slack: f64) -> bool {
    seq.windows(2).all(|w| w[1] <= w[0] + slack)
}

#[test]
fn criterion_01_manhattan_gauge() {
    criterion(1, "Manhattan gauge equals l1", secs(1), || {
        let cone = ConeModel::axis(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let v = vec![rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
            let p = e2(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let g = gauge_norm(&cone, &TangentVector::new(p, v.clone()).unwrap(), 4).map_err(|e| e.to_string())?;
            worst = worst.max((g.value - v[0].abs() - v[1].abs()).abs());
        }
        check(worst <= 1e-9, || format!("max error {worst:e}"))?;
        Ok(format!("max error {worst:.1e} over 1000 vectors"))
    });
}

#[test]
fn criterion_02_discontinuity() {
    criterion(2, "scaled-axis gauge discontinuity", secs(1), || {
        let cone = ConeModel::scaled_axis();
        let at0 = gauge_value(&cone, &e2(0.0, 0.0), &[1.0, 0.0], 6).map_err(|e| e.to_string())?;
        let near = gauge_value(&cone, &e2(-0.01, 0.0), &[1.0, 0.0], 6).map_err(|e| e.to_string())?;
        check((at0 - (1.0 + 2f64.sqrt())).abs() <= 1e-6, || format!("origin value {at0}"))?;
        check((near - 1.0).abs() <= 1e-6, || format!("value at (-0.01, 0) is {near}"))?;
        Ok(format!("origin {at0:.12}, (-0.01,0) {near:.12}"))
    });
}

#[test]
fn criterion_03_zigzag_convergence() {
    criterion(3, "zig-zag convergence for (dx, x dy)", secs(10), || {
        let fields = [pf("dx"), pf("x*dy")];
        let origin = e2(0.0, 0.0);
        let mut len_err = Vec::new();
        let mut end_err = Vec::new();
        for n in [4, 16, 64, 256, 1024] {
            let z = zigzag(&origin, &fields, 1.0, n).map_err(|e| e.to_string())?;
            let e = z.end().coords();
            len_err.push((z.riemannian_length() - 1.5).abs());
            end_err.push(((e[0] - 1.0).powi(2) + (e[1] - 0.5).powi(2)).sqrt());
        }
        let z = zigzag(&origin, &fields, 1.0, 1000).map_err(|e| e.to_string())?;
        let at1000 = (z.riemannian_length() - 1.5).abs();
        check(at1000 < 0.01, || format!("length error {at1000} at N = 1000"))?;
        let strict = |s: &[f64]| s.windows(2).all(|w| w[1] < w[0]);
        check(strict(&len_err), || format!("length errors not decreasing: {len_err:?}"))?;
        check(strict(&end_err), || format!("endpoint errors not decreasing: {end_err:?}"))?;
        check(end_err[4] < 1e-3, || format!("final endpoint error {}", end_err[4]))?;
        Ok(format!("length error {at1000:.1e} at N=1000, endpoint error {:.1e} at N=1024", end_err[4]))
    });
}

#[test]
fn criterion_04_bracket_tangency() {
    criterion(4, "bracket-flow tangency", secs(5), || {
        let heis = BracketExpr::bracket(BracketExpr::Field(pf("dx")), BracketExpr::Field(pf("x*dy")));
        for t in [1e-1, 1e-2, 1e-3] {
            let end = bracket_flow(&e2(0.0, 0.0), &heis, t).map_err(|e| e.to_string())?;
            let c = end.end().coords();
            check(c[0].abs() <= 1e-9 && (c[1] - t).abs() <= 1e-9, || format!("endpoint {c:?} at t = {t}"))?;
        }
        // Generic pair: |Φᵗ(p) − p − t[X,Y](p)| / t must go to zero.
        let x = PolyField::parse("dx + 0.3*y*dy", 2).unwrap();
        let y = PolyField::parse("x*dy + 0.2*x^2*dx + 0.5*dy", 2).unwrap();
        let bracket = x.bracket(&y).unwrap();
        let p = [0.3, -0.2];
        let v = bracket.eval(&p);
        let expr = BracketExpr::bracket(
            BracketExpr::Field(FieldExpr::Poly(x.clone())),
            BracketExpr::Field(FieldExpr::Poly(y.clone())),
        );
        let mut ratios = Vec::new();
        for t in [1e-1, 1e-2, 1e-3, 1e-4] {
            let end = bracket_flow(&e2(p[0], p[1]), &expr, t).map_err(|e| e.to_string())?;
            let c = end.end().coords();
            let r = ((c[0] - p[0] - t * v[0]).powi(2) + (c[1] - p[1] - t * v[1]).powi(2)).sqrt() / t;
            ratios.push(r);
        }
        check(non_increasing(&ratios, 0.0), || format!("ratios not decreasing: {ratios:?}"))?;
        let last = *ratios.last().unwrap();
        check(last < 0.05, || format!("final ratio {last}"))?;
        Ok(format!("Heisenberg endpoints exact; o(t) ratios {}", sci(&ratios)))
    });
}

#[test]
fn criterion_05_main_theorem_manhattan() {
    criterion(5, "sub-conic vs sub-Finsler, Manhattan", secs(30), || {
        let cone = ConeModel::axis(2);
        let pairs = sample_pairs(&cone, 20, 5).map_err(|e| e.to_string())?;
        let ns = [4, 16, 64, 256];
        let params = MetricParams { k_schedule: vec![4, 8, 16], ..MetricParams::default() };
        let report = compare_metrics(&cone, &pairs, &ns, &params).map_err(|e| e.to_string())?;
        let gaps: Vec<f64> = report.max_gap_by_n().iter().map(|g| g.1).collect();
        check(gaps[3] < 0.05, || format!("gap {} at N = 256", gaps[3]))?;
        check(non_increasing(&gaps, 1e-9), || format!("gaps not non-increasing: {gaps:?}"))?;
        let mut worst = 0.0f64;
        for (pr, (p, q)) in report.pairs.iter().zip(&pairs) {
            let oracle = l1(p, q);
            worst = worst.max((pr.d_sf - oracle).abs());
            for &(_, d) in &pr.d_d {
                worst = worst.max((d - oracle).abs());
            }
        }
        check(worst < 1e-3, || format!("distance from l1 oracle {worst:e}"))?;
        Ok(format!("max gap by N {}, max deviation from l1 {worst:.1e}", sci(&gaps)))
    });
}

#[test]
fn criterion_06_main_theorem_sphere() {
    criterion(6, "sub-conic vs sub-Finsler, banded sphere", secs(120), || {
        let cone = ConeModel::parse("bandsphere").unwrap();
        let band = std::f64::consts::FRAC_1_SQRT_2;
        let pairs = sample_pairs(&cone, 10, 6).map_err(|e| e.to_string())?;
        let params = MetricParams { k_schedule: vec![4, 8, 16], ..MetricParams::default() };
        let report = compare_metrics(&cone, &pairs, &[64], &params).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for (pr, (p, q)) in report.pairs.iter().zip(&pairs) {
            let c = |m: &ManifoldPoint| [m.coords()[0], m.coords()[1], m.coords()[2]];
            let oracle = sphere_graph_distance(band, c(p), c(q), 10_000);
            for d in [pr.d_sf, pr.d_d[0].1] {
                let rel = (d - oracle).abs() / oracle;
                worst = worst.max(rel);
                check(rel < 0.03, || format!("pair {}: estimate {d} vs oracle {oracle}", pr.index))?;
            }
        }
        Ok(format!("max relative deviation from graph oracle {worst:.2e}"))
    });
}

#[test]
fn criterion_07_main_theorem_twistor() {
    criterion(7, "sub-conic vs sub-Finsler, sub-twistor b=4", secs(600), || {
        let cone = ConeModel::sub_twistor(4);
        let pairs = sample_pairs(&cone, 20, 7).map_err(|e| e.to_string())?;
        let ns = [4, 16, 64];
        let params = MetricParams { k_schedule: vec![4, 8, 16], ..MetricParams::default() };
        let report = compare_metrics(&cone, &pairs, &ns, &params).map_err(|e| e.to_string())?;
        let gaps: Vec<f64> = report.max_gap_by_n().iter().map(|g| g.1).collect();
        check(non_increasing(&gaps, 0.0), || format!("gaps not non-increasing: {gaps:?}"))?;
        check(gaps[2] < 0.1, || format!("final gap {}", gaps[2]))?;
        let wide = cone.clone().with_r_max(6.0);
        let rerun = compare_metrics(&wide, &pairs, &ns[2..], &params).map_err(|e| e.to_string())?;
        let mut shift = 0.0f64;
        for (a, b) in report.pairs.iter().zip(&rerun.pairs) {
            shift = shift.max((a.d_sf - b.d_sf).abs() / a.d_sf);
            shift = shift.max((a.d_d[2].1 - b.d_d[0].1).abs() / a.d_d[2].1);
        }
        check(shift < 0.02, || format!("doubling r_max moves estimates by {shift}"))?;
        Ok(format!("max gap by N {}, r_max doubling shift {shift:.1e}", sci(&gaps)))
    });
}

#[test]
fn criterion_08_norm_axioms() {
    criterion(8, "cone and norm axioms", secs(60), || {
        let cones = [
            ("axis2", 1e-9),
            ("axis3", 1e-9),
            ("scaled-axis", 1e-9),
            ("bandsphere", 2e-3),
            ("twistor4", 2e-3),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (spec, dir_tol) in cones {
            let cone = ConeModel::parse(spec).unwrap();
            let samples = cone.default_samples();
            let g = |v: &TangentVector| gauge_value(&cone, &v.base, &v.comps, samples).map_err(|e| format!("{spec}: {e}"));
            for case in 0..1000 {
                let p = random_point(&cone, &mut rng);
                let u = random_tangent(&p, &mut rng);
                let v = random_tangent(&p, &mut rng);
                let lambda = rng.gen_range(0.01..10.0);
                let (gu, gv) = (g(&u)?, g(&v)?);
                let scaled = g(&u.scaled(lambda))?;
                check((scaled - lambda * gu).abs() <= 1e-8 * lambda * gu, || {
                    format!("{spec} case {case}: homogeneity {scaled} vs {}", lambda * gu)
                })?;
                let sum = TangentVector::new(p.clone(), u.comps.iter().zip(&v.comps).map(|(a, b)| a + b).collect())
                    .unwrap();
                let gs = g(&sum)?;
                check(gs <= (gu + gv) * (1.0 + 1e-9), || format!("{spec} case {case}: triangle {gs} > {gu} + {gv}"))?;
                let neg = g(&u.scaled(-1.0))?;
                check((neg - gu).abs() <= 1e-8 * gu, || format!("{spec} case {case}: symmetry {neg} vs {gu}"))?;
                let w = random_cone_vector(&cone, &p, &mut rng);
                let gw = g(&w)?;
                let len = w.g_norm();
                check(gw >= len * (1.0 - 1e-9) && gw <= len * (1.0 + dir_tol), || {
                    format!("{spec} case {case}: cone direction gauge {gw} vs length {len}")
                })?;
            }
        }
        Ok("homogeneity, triangle, symmetry, cone direction: 1000 cases x 5 cones".into())
    });
}

#[test]
fn criterion_09_rank1_decomposition() {
    criterion(9, "rank-one decomposition on Per(b)", secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut most = 0;
        for b in 4..=8 {
            let cone = ConeModel::sub_twistor(b);
            for case in 0..1000 {
                let p = random_point(&cone, &mut rng);
                let a = random_tangent(&p, &mut rng);
                let parts = rank1_decompose(&a).map_err(|e| format!("b={b} case {case}: {e}"))?;
                most = most.max(parts.len());
                check(parts.len() <= 4, || format!("b={b} case {case}: {} pieces", parts.len()))?;
                let mut sum = vec![0.0; a.comps.len()];
                for part in &parts {
                    check(cone.contains(part).unwrap(), || format!("b={b} case {case}: piece outside cone"))?;
                    for (s, x) in sum.iter_mut().zip(&part.comps) {
                        *s += x;
                    }
                }
                let err = sum.iter().zip(&a.comps).map(|(s, x)| (s - x).powi(2)).sum::<f64>().sqrt();
                check(err <= 1e-9 * a.g_norm(), || format!("b={b} case {case}: sum error {err:e}"))?;
            }
        }
        Ok(format!("5000 tangents, at most {most} pieces"))
    });
}

#[test]
fn criterion_10_ball_flatness() {
    criterion(10, "sub-twistor unit ball has a flat segment", secs(60), || {
        let cone = ConeModel::sub_twistor(4);
        let p = ManifoldPoint::period_plane(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let ball = unit_ball(&cone, &p, cone.default_samples()).map_err(|e| e.to_string())?;
        let flat = find_flat_segment(&ball).map_err(|e| e.to_string())?.ok_or("no flat segment found")?;
        check((flat.midpoint_gauge - 1.0).abs() <= 1e-4, || format!("midpoint gauge {}", flat.midpoint_gauge))?;
        let mid: Vec<f64> = flat.v1.iter().zip(&flat.v2).map(|(a, b)| 0.5 * (a + b)).collect();
        let recheck = ball.gauge(&mid).map_err(|e| e.to_string())?;
        check((recheck - 1.0).abs() <= 1e-4, || format!("recomputed midpoint gauge {recheck}"))?;
        Ok(format!("midpoint gauge {:.8}", flat.midpoint_gauge))
    });
}

#[test]
fn criterion_11_finsler_topology() {
    criterion(11, "sub-conic distance is linear at small scale on Per(4)", secs(300), || {
        let cone = ConeModel::sub_twistor(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = MetricParams { k_schedule: vec![4, 8], ..MetricParams::default() };
        let scales = [1e-1, 1e-2, 1e-3];
        let mut exponents = Vec::new();
        for _ in 0..3 {
            let p = random_point(&cone, &mut rng);
            let dir = random_tangent(&p, &mut rng);
            let unit = dir.scaled(1.0 / dir.g_norm());
            let mut pts = Vec::new();
            for &s in &scales {
                let q = move_point(&p, &unit, s).map_err(|e| e.to_string())?;
                let d = subconic_distance_upper(&cone, &p, &q, &params).map_err(|e| e.to_string())?;
                pts.push((s.ln(), d.value.ln()));
            }
            let n = pts.len() as f64;
            let (mx, my) = (pts.iter().map(|a| a.0).sum::<f64>() / n, pts.iter().map(|a| a.1).sum::<f64>() / n);
            let slope = pts.iter().map(|a| (a.0 - mx) * (a.1 - my)).sum::<f64>()
                / pts.iter().map(|a| (a.0 - mx).powi(2)).sum::<f64>();
            exponents.push(slope);
            check((0.9..=1.1).contains(&slope), || format!("fitted exponent {slope}"))?;
        }
        Ok(format!("fitted exponents {exponents:.3?}"))
    });
}
