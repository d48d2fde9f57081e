//! Dense two-phase simplex for `min cᵀx  s.t.  A x = b, x ≥ 0`.
//!
//! Problems here have a handful of rows and up to a few thousand columns, so a
//! full tableau is the simplest robust choice. Entering columns follow
//! Dantzig's rule and switch to Bland's rule after a run of degenerate pivots.

use crate::error::{Error, Result};

pub(crate) const OPT_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LpSolution {
    pub value: f64,
    /// Nonzero basic variables as `(column, value)`, sorted by column.
    pub support: Vec<(usize, f64)>,
}

#[derive(Debug)]
pub(crate) enum LpStatus {
    Optimal(LpSolution),
    Infeasible(f64),
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        for k in 0..w {
            self.data[r * w + k] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[c] = 0.0;
            }
        }
        if r < self.rows {
            self.basis[r] = c;
        }
    }

    /// Runs simplex iterations on the objective stored in row `self.rows`,
    /// considering only columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let obj = self.rows;
        let mut degenerate = 0usize;
        let max_iter = 50 * (self.rows + allowed) + 1000;
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -OPT_TOL;
            for c in 0..allowed {
                let rc = self.at(obj, c);
                if rc < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-14 || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::InvalidInput("unbounded linear program".into()));
            };
            degenerate = if ratio.abs() < 1e-14 { degenerate + 1 } else { 0 };
            self.pivot(r, c);
        }
        Err(Error::InvalidInput("simplex iteration limit reached".into()))
    }
}

/// Solves the LP with columns given as vectors of length `b.len()`.
pub(crate) fn minimize(columns: &[&[f64]], cost: &[f64], b: &[f64]) -> Result<LpStatus> {
    let m = b.len();
    let n = columns.len();
    if columns.iter().any(|c| c.len() != m) || cost.len() != n {
        return Err(Error::DimensionMismatch { expected: m, got: columns.first().map_or(0, |c| c.len()) });
    }
    // Scale rows to unit norm and make the right-hand side non-negative.
    let mut scale = vec![0.0; m];
    for (r, s) in scale.iter_mut().enumerate() {
        let norm_sq: f64 = columns.iter().map(|c| c[r] * c[r]).sum::<f64>() + b[r] * b[r];
        *s = if norm_sq > 0.0 { 1.0 / norm_sq.sqrt() } else { 1.0 };
        if b[r] < 0.0 {
            *s = -*s;
        }
    }
    let width = n + m + 1;
    let mut t = Tableau { rows: m, width, data: vec![0.0; (m + 1) * width], basis: (n..n + m).collect() };
    for r in 0..m {
        for (c, col) in columns.iter().enumerate() {
            t.data[r * width + c] = col[r] * scale[r];
        }
        t.data[r * width + n + r] = 1.0;
        t.data[r * width + width - 1] = b[r] * scale[r];
    }
    // Phase one: minimize the sum of artificials, written in reduced form.
    for c in 0..width {
        if c >= n && c < n + m {
            continue;
        }
        let s: f64 = (0..m).map(|r| t.at(r, c)).sum();
        t.data[m * width + c] = -s;
    }
    t.optimize(n + m)?;
    let infeasibility = -t.rhs(m);
    if infeasibility > 1e-9 {
        return Ok(LpStatus::Infeasible(infeasibility));
    }
    // Drive remaining artificials out of the basis where possible.
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(c) = (0..n).find(|&c| t.at(r, c).abs() > 1e-9) {
                t.pivot(r, c);
            }
        }
    }
    // Phase two objective in reduced form with respect to the current basis.
    for c in 0..width {
        t.data[m * width + c] = if c < n { cost[c] } else { 0.0 };
    }
    for r in 0..m {
        let bc = t.basis[r];
        let cb = if bc < n { cost[bc] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..width {
                t.data[m * width + c] -= cb * t.at(r, c);
            }
        }
    }
    // Artificials stuck in the basis sit on redundant rows; their columns never re-enter.
    t.optimize(n)?;
    let mut support: Vec<(usize, f64)> = (0..m)
        .filter(|&r| t.basis[r] < n && t.rhs(r) > 0.0)
        .map(|r| (t.basis[r], t.rhs(r)))
        .collect();
    support.sort_by_key(|&(c, _)| c);
    let value = support.iter().map(|&(c, x)| cost[c] * x).sum();
    Ok(LpStatus::Optimal(LpSolution { value, support }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(cols: &[Vec<f64>], b: &[f64]) -> LpStatus {
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        minimize(&refs, &vec![1.0; cols.len()], b).unwrap()
    }

    #[test]
    fn l1_norm_from_axis_columns() {
        let cols = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        match solve(&cols, &[3.0, -4.0]) {
            LpStatus::Optimal(s) => {
                assert!((s.value - 7.0).abs() < 1e-12);
                assert_eq!(s.support, vec![(0, 3.0), (3, 4.0)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_outside_cone() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(solve(&cols, &[-1.0, 0.5]), LpStatus::Infeasible(_)));
    }

    #[test]
    fn redundant_rows_and_degeneracy() {
        // Third row duplicates the first; many parallel columns create ties.
        let mut cols = Vec::new();
        for k in 0..40 {
            let a = k as f64 * std::f64::consts::TAU / 40.0;
            cols.push(vec![a.cos(), a.sin(), a.cos()]);
        }
        match solve(&cols, &[0.0, 0.0, 0.0]) {
            LpStatus::Optimal(s) => assert_eq!(s.value, 0.0),
            other => panic!("{other:?}"),
        }
        match solve(&cols, &[1.0, 0.0, 1.0]) {
            LpStatus::Optimal(s) => assert!((s.value - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matches_brute_force_on_small_random_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(3..7);
            let cols: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            // Enumerate all bases of size ≤ 2.
            let mut best = f64::INFINITY;
            for i in 0..n {
                let c = &cols[i];
                let t = if c[0].abs() > c[1].abs() { b[0] / c[0] } else { b[1] / c[1] };
                if t >= 0.0 && (c[0] * t - b[0]).abs() < 1e-12 && (c[1] * t - b[1]).abs() < 1e-12 {
                    best = best.min(t);
                }
                for j in (i + 1)..n {
                    let d = &cols[j];
                    let det = c[0] * d[1] - c[1] * d[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let x = (b[0] * d[1] - b[1] * d[0]) / det;
                    let y = (c[0] * b[1] - c[1] * b[0]) / det;
                    if x >= 0.0 && y >= 0.0 {
                        best = best.min(x + y);
                    }
                }
            }
            match solve(&cols, &b) {
                LpStatus::Optimal(s) => assert!((s.value - best).abs() < 1e-9, "{} vs {best}", s.value),
                LpStatus::Infeasible(_) => assert!(best.is_infinite()),
            }
        }
    }
}
