//! Composite Gauss–Legendre quadrature with panel doubling.

use std::sync::OnceLock;

const ORDER: usize = 16;

/// Nodes and weights of the 16-point rule on [-1, 1], from Newton iteration
/// on the Legendre polynomial.
fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut x = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

/// Integrates `f` over `[lo, hi]` split into `panels` equal panels, summing
/// every output component of `f` (vector-valued integrands share nodes).
pub fn gauss_panels<const K: usize, F>(f: &F, lo: f64, hi: f64, panels: usize) -> [f64; K]
where
    F: Fn(f64) -> [f64; K],
{
    let (x, w) = rule();
    let width = (hi - lo) / panels as f64;
    let mut acc = [0.0; K];
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let half = 0.5 * width;
        let mid = a + half;
        for i in 0..ORDER {
            let v = f(mid + half * x[i]);
            for k in 0..K {
                acc[k] += w[i] * half * v[k];
            }
        }
    }
    acc
}

/// Doubles the panel count until every component changes by less than
/// `rel_tol` relative (or `abs_tol` absolute). Returns the estimate and the
/// last observed change.
pub fn integrate<const K: usize, F>(
    f: &F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> ([f64; K], f64)
where
    F: Fn(f64) -> [f64; K],
{
    if hi == lo {
        return ([0.0; K], 0.0);
    }
    let mut panels = 2;
    let mut prev = gauss_panels(f, lo, hi, panels);
    let mut change = f64::INFINITY;
    while panels < 4096 {
        panels *= 2;
        let next = gauss_panels(f, lo, hi, panels);
        change = 0.0;
        let mut ok = true;
        for k in 0..K {
            let d = (next[k] - prev[k]).abs();
            change = change.max(d);
            if d > rel_tol * next[k].abs() && d > abs_tol {
                ok = false;
            }
        }
        prev = next;
        if ok {
            break;
        }
    }
    (prev, change)
}
