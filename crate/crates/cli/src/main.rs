//! `subconic` command line: gauge norms, unit balls, zig-zags, distance
//! estimates, the metric comparison experiment and twistor-sphere tools.
//!
//! Exit codes: 0 on success, 1 for library errors, 2 for usage errors.

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use subconic::geometry::flatten_numbers;
use subconic::poly::PolyField;
use subconic::{
    chain_distance, compare_metrics, find_flat_segment, flow, gauge_norm, rank1_decompose, sample_pairs, sphere_chain,
    subconic_distance_upper, subfinsler_distance_upper, unit_ball, zigzag, ConeModel, Error, FieldExpr, ManifoldPoint,
    MetricParams, Model, TangentVector,
};

#[derive(Parser)]
#[command(name = "subconic", version, about = "Sub-conic and sub-Finsler distance tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gauge norm of a tangent vector.
    Gauge {
        #[arg(long)]
        cone: String,
        /// Point as a JSON array (a pair of rows on the period space).
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        vector: String,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Vertices of the unit ball at a point.
    Ball {
        #[arg(long)]
        cone: String,
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        /// Also search for a flat boundary segment.
        #[arg(long)]
        flat: bool,
    },
    /// Zig-zag of polynomial fields against the flow of their sum.
    Zigzag {
        /// Fields separated by ';', e.g. "dx;x*dy".
        #[arg(long)]
        fields: String,
        #[arg(long, default_value = "[0,0]")]
        point: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        n_schedule: Vec<usize>,
    },
    /// Distance upper bounds between two points.
    Distance {
        #[arg(long)]
        cone: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        k: Vec<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Reproducible experiments.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
    /// Twistor spheres on the period space.
    Twistor {
        #[command(subcommand)]
        which: Twistor,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Finsler,
    Conic,
    Both,
}

#[derive(Subcommand)]
enum Experiment {
    /// Sub-Finsler and sub-conic estimates on seeded random pairs.
    MainTheorem {
        #[arg(long)]
        cone: String,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
        n_schedule: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        k_schedule: Vec<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Subcommand)]
enum Twistor {
    /// Chain of twistor spheres joining two planes, with its length.
    Chain {
        #[arg(long)]
        b: usize,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
    },
    /// Split a frame matrix into cone vectors.
    Decompose {
        #[arg(long)]
        b: usize,
        /// `2 × (b−2)` matrix as a JSON array of rows.
        #[arg(long)]
        matrix: String,
        #[arg(long)]
        point: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<String, Error> {
    match cmd {
        Command::Gauge { cone, point, vector, samples } => {
            let cone = ConeModel::parse(&cone)?;
            let p = parse_point(&cone, point.as_deref())?;
            let v = TangentVector::new(p, numbers(&vector)?)?;
            let samples = samples.unwrap_or_else(|| cone.default_samples());
            Ok(pretty(&gauge_norm(&cone, &v, samples)?.to_json()))
        }
        Command::Ball { cone, point, samples, flat } => {
            let cone = ConeModel::parse(&cone)?;
            let p = parse_point(&cone, point.as_deref())?;
            let ball = unit_ball(&cone, &p, samples.unwrap_or_else(|| cone.default_samples()))?;
            let mut out = ball.to_json();
            if flat {
                out["flat_segment"] = match find_flat_segment(&ball)? {
                    Some(s) => json!({ "v1": s.v1, "v2": s.v2, "midpoint_gauge": s.midpoint_gauge }),
                    None => Value::Null,
                };
            }
            Ok(pretty(&out))
        }
        Command::Zigzag { fields, point, t, n_schedule } => zigzag_table(&fields, &point, t, &n_schedule),
        Command::Distance { cone, from, to, mode, n, k, samples } => {
            let cone = ConeModel::parse(&cone)?;
            let p = parse_point(&cone, Some(&from))?;
            let q = parse_point(&cone, Some(&to))?;
            let params = MetricParams { k_schedule: k, n, samples, ..MetricParams::default() };
            let mut out = json!({ "params": params.to_json() });
            if matches!(mode, Mode::Finsler | Mode::Both) {
                out["subfinsler"] = subfinsler_distance_upper(&cone, &p, &q, &params)?.to_json();
            }
            if matches!(mode, Mode::Conic | Mode::Both) {
                out["subconic"] = subconic_distance_upper(&cone, &p, &q, &params)?.to_json();
            }
            Ok(pretty(&out))
        }
        Command::Experiment { which: Experiment::MainTheorem { cone, pairs, seed, n_schedule, k_schedule, samples } } => {
            let model = ConeModel::parse(&cone)?;
            let params = MetricParams { k_schedule, samples, ..MetricParams::default() };
            let sample = sample_pairs(&model, pairs, seed)?;
            let report = compare_metrics(&model, &sample, &n_schedule, &params)?;
            let config = json!({
                "cone": model.to_json(),
                "pairs": pairs,
                "seed": seed,
                "n_schedule": n_schedule,
                "params": params.to_json(),
            });
            let mut out = format!("# config: {config}\npair_id,d_sF,d_D,gap,N\n");
            for pr in &report.pairs {
                for ((n, dd), (_, gap)) in pr.d_d.iter().zip(&pr.gap) {
                    writeln!(out, "{},{:.16e},{:.16e},{:.16e},{}", pr.index, pr.d_sf, dd, gap, n).unwrap();
                }
            }
            Ok(out)
        }
        Command::Twistor { which: Twistor::Chain { b, from, to, max_len, resolution } } => {
            let cone = ConeModel::sub_twistor(b);
            let p = parse_point(&cone, Some(&from))?;
            let q = parse_point(&cone, Some(&to))?;
            let chain = sphere_chain(&p, &q, max_len)?;
            let length = chain_distance(&p, &q, &chain, resolution)?;
            Ok(pretty(&json!({ "chain": chain.to_json(), "length": length })))
        }
        Command::Twistor { which: Twistor::Decompose { b, matrix, point } } => {
            let cone = ConeModel::sub_twistor(b);
            let p = parse_point(&cone, point.as_deref())?;
            let a = TangentVector::new(p, numbers(&matrix)?)?;
            let pieces = rank1_decompose(&a)?
                .into_iter()
                .map(|v| Ok(json!({ "vector": v.to_json(), "in_cone": cone.contains(&v)? })))
                .collect::<Result<Vec<_>, Error>>()?;
            Ok(pretty(&Value::Array(pieces)))
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn numbers(text: &str) -> Result<Vec<f64>, Error> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad JSON '{text}': {e}")))?;
    flatten_numbers(&v)
}

/// Point from a JSON array, a full point object, or the model's base point.
fn parse_point(cone: &ConeModel, text: Option<&str>) -> Result<ManifoldPoint, Error> {
    let coords = match text {
        Some(t) if t.trim_start().starts_with('{') => {
            let v: Value = serde_json::from_str(t).map_err(|e| Error::InvalidInput(format!("bad point JSON: {e}")))?;
            let p = ManifoldPoint::from_json(&v)?;
            return cone.point(p.coords().to_vec());
        }
        Some(t) => numbers(t)?,
        None => match cone.model() {
            Model::Euclidean { dim } => vec![0.0; dim],
            Model::BandedSphere { .. } => vec![1.0, 0.0, 0.0],
            Model::PeriodSpace { b } => (0..2 * b).map(|i| if i == 0 || i == b + 1 { 1.0 } else { 0.0 }).collect(),
        },
    };
    cone.point(coords)
}

/// Rows `N, endpoint_err, length, target_length`: the zig-zag against the
/// flow of the summed field and the integral of the summed speeds along it.
fn zigzag_table(fields: &str, point: &str, t: f64, n_schedule: &[usize]) -> Result<String, Error> {
    let x0 = numbers(point)?;
    let dim = x0.len();
    let polys = fields
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| PolyField::parse(s, dim))
        .collect::<Result<Vec<_>, _>>()?;
    if polys.is_empty() {
        return Err(Error::InvalidInput("no fields given".into()));
    }
    let p = ManifoldPoint::euclidean(x0);
    let sum = polys.iter().skip(1).fold(polys[0].clone(), |acc, f| acc.sum(f));
    let exprs: Vec<FieldExpr> = polys.iter().cloned().map(FieldExpr::Poly).collect();

    const PIECES: usize = 512;
    let step = t / PIECES as f64;
    let speed_sum = |x: &ManifoldPoint| -> f64 {
        polys.iter().map(|f| f.eval(x.coords()).iter().map(|c| c * c).sum::<f64>().sqrt()).sum()
    };
    let mut cur = p.clone();
    let mut target_length = 0.0;
    let mut prev_speed = speed_sum(&cur);
    for _ in 0..PIECES {
        cur = flow(&cur, &FieldExpr::Poly(sum.clone()), step, 16)?.end().clone();
        let s = speed_sum(&cur);
        target_length += 0.5 * step.abs() * (prev_speed + s);
        prev_speed = s;
    }
    let target = cur;

    let config = json!({ "fields": fields, "point": p.coords(), "t": t, "n_schedule": n_schedule });
    let mut out = format!("# config: {config}\n# target: {}\nN,endpoint_err,length,target_length\n", json!(target.coords()));
    for &n in n_schedule {
        let path = zigzag(&p, &exprs, t, n)?;
        let err = path.end().coords().iter().zip(target.coords()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        writeln!(out, "{n},{err:.16e},{:.16e},{target_length:.16e}", path.riemannian_length()).unwrap();
    }
    Ok(out)
}
