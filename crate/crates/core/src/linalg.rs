//! Small dense vector helpers shared by the geometry code.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += s * x`
pub(crate) fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn to3(a: &[f64]) -> [f64; 3] {
    [a[0], a[1], a[2]]
}

/// Rotates `v` about the unit `axis` by `angle` (Rodrigues).
pub(crate) fn rotate(v: &[f64; 3], axis: &[f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let kxv = cross(axis, v);
    let kv = dot(axis, v);
    [
        v[0] * c + kxv[0] * s + axis[0] * kv * (1.0 - c),
        v[1] * c + kxv[1] * s + axis[1] * kv * (1.0 - c),
        v[2] * c + kxv[2] * s + axis[2] * kv * (1.0 - c),
    ]
}

/// Orthonormal basis (rows) of the row span of `rows`, rank cutoff relative to the
/// largest singular value.
pub(crate) fn row_space_basis(rows: &[Vec<f64>], dim: usize, rel_cutoff: f64) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    // Cheap Gram test first: a clearly full span needs no SVD.
    if rows.len() >= dim {
        let mut gram = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for r in rows {
            for i in 0..dim {
                for j in 0..=i {
                    gram[(i, j)] += r[i] * r[j];
                }
            }
        }
        gram.fill_upper_triangle_with_lower_triangle();
        let eig = gram.symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if hi > 0.0 && lo > 1e-8 * hi && rel_cutoff < 1e-4 {
            return (0..dim)
                .map(|i| {
                    let mut e = vec![0.0; dim];
                    e[i] = 1.0;
                    e
                })
                .collect();
        }
    }
    let m = nalgebra::DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax <= 0.0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    idx.into_iter()
        .filter(|&k| svd.singular_values[k] > rel_cutoff * smax)
        .map(|k| v_t.row(k).iter().cloned().collect())
        .collect()
}
