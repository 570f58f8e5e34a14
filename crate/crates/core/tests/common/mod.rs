#![allow(dead_code)]

use tlb_core::ArrivalRateFn;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / deriv;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * deriv * deriv)));
    }
    out
}

/// `int_a^b f` by composite Gauss-Legendre on `pieces` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        total += rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half;
    }
    total
}

/// `u(0) e^{-mu t} + int_0^t lambda(s) e^{-mu (t - s)} ds`, splitting at the rate knots.
pub fn fluid_by_quadrature(lambda: &ArrivalRateFn, mu: f64, u0: f64, t: f64, rule: &[(f64, f64)]) -> f64 {
    let mut edges: Vec<f64> = lambda.knots().filter(|&k| k < t).collect();
    edges.push(t);
    let mut total = u0 * (-mu * t).exp();
    for w in edges.windows(2) {
        let panels = ((w[1] - w[0]) / 0.05).ceil().max(1.0) as usize;
        total += integrate(|s| lambda.rate(s) * (-mu * (t - s)).exp(), w[0], w[1], panels, rule);
    }
    total
}
