//! Gauss–Legendre rules and an adaptive panel integrator.

use crate::num::Scalar;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        // Newton iteration in f64 on the three-term recurrence, then cast.
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = T::lit(-x);
            nodes[n - 1 - i] = T::lit(x);
            weights[i] = T::lit(w);
            weights[n - 1 - i] = T::lit(w);
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        let s: T = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        s * half
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// An integral value together with its estimated absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

/// Adaptive bisection driven by the difference between an `n` and a `2n`
/// point rule on each panel.
#[derive(Clone, Debug)]
pub struct AdaptiveIntegrator<T> {
    coarse: GaussLegendre<T>,
    fine: GaussLegendre<T>,
    max_depth: u32,
    rel_floor: T,
}

impl<T: Scalar> AdaptiveIntegrator<T> {
    pub fn new(points: usize) -> Self {
        Self {
            coarse: GaussLegendre::new(points),
            fine: GaussLegendre::new(2 * points),
            max_depth: 30,
            rel_floor: T::lit(64.0) * T::epsilon(),
        }
    }

    /// Accept a panel once its error estimate is below `rel` times its
    /// value, whatever the absolute tolerance.
    pub fn with_rel_floor(mut self, rel: T) -> Self {
        self.rel_floor = self.rel_floor.max(rel);
        self
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, tol: T, f: &mut F) -> Estimate<T> {
        self.panel(a, b, tol, f, 0)
    }

    fn panel<F: FnMut(T) -> T>(&self, a: T, b: T, tol: T, f: &mut F, depth: u32) -> Estimate<T> {
        let c = self.coarse.integrate(a, b, &mut *f);
        let v = self.fine.integrate(a, b, &mut *f);
        let err = (v - c).abs();
        let floor = self.rel_floor * v.abs();
        if err <= tol.max(floor) || depth >= self.max_depth {
            return Estimate { value: v, error: err };
        }
        let mid = (a + b) / T::lit(2.0);
        let half_tol = tol / T::lit(2.0);
        let l = self.panel(a, mid, half_tol, f, depth + 1);
        let r = self.panel(mid, b, half_tol, f, depth + 1);
        Estimate {
            value: l.value + r.value,
            error: l.error + r.error,
        }
    }
}
