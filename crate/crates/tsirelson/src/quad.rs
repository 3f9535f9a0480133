//! Fixed-order Gauss-Legendre rules for composite quadrature.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// exact for polynomials of degree `2n - 1`.
pub(crate) struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub(crate) fn new(order: usize) -> Self {
        assert!(order >= 2, "rule order must be at least 2");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev-angle initial guess, then Newton on P_n.
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..64 {
                let (p, d) = legendre_pair(n, z);
                dp = d;
                let step = p / d;
                z -= step;
                if step.abs() <= 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub(crate) fn scaled(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    #[cfg(test)]
    fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.scaled(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let next = (((2 * k + 1) as f64) * x * cur - (k as f64) * prev) / ((k + 1) as f64);
        prev = cur;
        cur = next;
    }
    let dp = (n as f64) * (x * cur - prev) / (x * x - 1.0);
    (cur, dp)
}
