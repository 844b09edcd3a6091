//! Dense solves for the tiny normal-equation systems of linear curve fits.

/// Solves `a x = b` for a 3x3 system by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot collapses relative to the largest
/// diagonal entry.
pub(crate) fn solve_spd3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    let scale = (0..3).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if !scale.is_finite() || scale <= 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).expect("non-empty range");
        if m[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        let head = m[col];
        for row in m.iter_mut().skip(col + 1) {
            let f = row[col] / head[col];
            for (v, h) in row.iter_mut().zip(&head).skip(col) {
                *v -= f * h;
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let tail: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][3] - tail) / m[i][i];
    }
    Some(x)
}
