//! Sampling grids.

/// `n` log-spaced points from `a` to `b` inclusive. Endpoints are exact.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            let step = (lb - la) / (n - 1) as f64;
            (0..n)
                .map(|i| match i {
                    0 => a,
                    i if i == n - 1 => b,
                    i => (la + step * i as f64).exp(),
                })
                .collect()
        }
    }
}

/// Log-spaced points from `a` to `b` with `per_decade` points per factor of ten.
pub fn decade_grid(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let decades = (b / a).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1) + 1;
    log_grid(a, b, n)
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linear_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
