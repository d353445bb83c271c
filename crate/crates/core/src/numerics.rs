//! Small numerical helpers shared across modules.

use roots::{find_root_brent, SimpleConvergency};

/// Root of `f` in `[a, b]` by Brent's method. `None` if `f` does not change sign.
pub fn bracketed_root(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, eps: f64) -> Option<f64> {
    let mut conv = SimpleConvergency { eps, max_iter: 200 };
    find_root_brent(a, b, &mut f, &mut conv).ok()
}

/// Central differences in the interior, one-sided at the ends. `y` and `x`
/// share a length of at least 2; `NaN` samples propagate.
pub fn gradient(y: &[f64], x: &[f64]) -> Vec<f64> {
    let n = y.len();
    assert_eq!(n, x.len());
    assert!(n >= 2, "need at least two samples");
    (0..n)
        .map(|i| {
            if i == 0 {
                (y[1] - y[0]) / (x[1] - x[0])
            } else if i == n - 1 {
                (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])
            } else {
                (y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1])
            }
        })
        .collect()
}

/// Ordinary least-squares fit `y = a + b·t` returning `(a, b, R²)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let b = sty / stt;
    let a = my - b * mt;
    let ss_res: f64 = t.iter().zip(y).map(|(ti, yi)| (yi - a - b * ti).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, b, r2)
}
