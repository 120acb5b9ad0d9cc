//! Brute-force reference computations that never touch the engine.

use cvm_core::datagen::LineitemRow;

/// Q6 revenue by a single filter-and-sum loop.
pub fn q6_revenue(rows: &[LineitemRow]) -> f64 {
    let mut revenue = 0.0;
    for r in rows {
        if r.shipdate >= 8766
            && r.shipdate < 9131
            && r.discount >= 0.05
            && r.discount <= 0.07
            && r.quantity < 24.0
        {
            revenue += r.eprice * r.discount;
        }
    }
    revenue
}

/// `(key, lval, rval)` for every matching pair, nested loops.
pub fn nested_loop_join(left: &[(i64, i64)], right: &[(i64, i64)]) -> Vec<(i64, i64, i64)> {
    let mut out = Vec::new();
    for &(lk, lv) in left {
        for &(rk, rv) in right {
            if lk == rk {
                out.push((lk, lv, rv));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Row-major `a (n×k) · b (k×m)`.
pub fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i * k + t] * b[t * m + j];
            }
            c[i * m + j] = s;
        }
    }
    c
}
