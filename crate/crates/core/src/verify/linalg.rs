//! Small dense helpers for 3×3 symmetric problems.

pub type M3 = [[f64; 3]; 3];

pub fn mul(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn col(v: &M3, k: usize) -> [f64; 3] {
    [v[0][k], v[1][k], v[2][k]]
}

/// `xᵀ M y`.
pub fn quad(m: &M3, x: &[f64; 3], y: &[f64; 3]) -> f64 {
    (0..3).map(|i| x[i] * (0..3).map(|j| m[i][j] * y[j]).sum::<f64>()).sum()
}

/// Cyclic Jacobi. Eigenvectors are the columns of the returned matrix;
/// a pair whose off-diagonal entry is already zero is never rotated.
pub fn jacobi_eigen(m: &M3) -> ([f64; 3], M3) {
    let mut a = *m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..64 {
        let off: f64 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        let scale: f64 = (0..3).map(|i| a[i][i].powi(2)).sum::<f64>() + off;
        if off <= 1e-32 * scale.max(1e-300) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let (vkp, vkq) = (v[k][p], v[k][q]);
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Sorts eigenpairs by ascending eigenvalue.
pub fn sort_columns(lam: &mut [f64; 3], v: &mut M3) {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| lam[i].total_cmp(&lam[j]));
    let (l0, v0) = (*lam, *v);
    for (k, &i) in idx.iter().enumerate() {
        lam[k] = l0[i];
        for r in 0..3 {
            v[r][k] = v0[r][i];
        }
    }
}
