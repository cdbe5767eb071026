//! Gauss-Legendre rules and composite panel integration.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `order`-point rule by Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        let n = order as f64;
        for i in 0..order {
            // Tricomi initial guess, descending roots.
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]` with a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integrates `f` over consecutive panels `[b_i, b_{i+1}]`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }

    /// Nodes and weights mapped onto the panels given by `breaks`.
    pub fn mapped(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.order() * breaks.len().saturating_sub(1));
        for w in breaks.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[0] + w[1]);
            for (&x, &wt) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + half * x, wt * half));
            }
        }
        out
    }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `count` equal panels on `[a, b]`.
pub fn uniform_breaks(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| a + (b - a) * i as f64 / count as f64)
        .collect()
}

/// Breakpoints on `[0, b]` refined geometrically toward zero (`levels`
/// halvings) and uniform on `[b/2, b]` with `tail_panels` panels.
pub fn graded_breaks(b: f64, levels: u32, tail_panels: usize) -> Vec<f64> {
    let mut breaks = Vec::with_capacity(levels as usize + tail_panels + 2);
    breaks.push(0.0);
    for k in (1..=levels).rev() {
        breaks.push(b * libm::ldexp(1.0, -(k as i32)));
    }
    let start = b * 0.5;
    for i in 1..=tail_panels {
        breaks.push(start + (b - start) * i as f64 / tail_panels as f64);
    }
    breaks
}
