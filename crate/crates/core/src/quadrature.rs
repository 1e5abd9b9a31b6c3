//! Gauss–Jacobi quadrature by the Golub–Welsch eigenvalue method.
//!
//! All sphere integrals reduce to one-dimensional integrals in the polar
//! height `u ∈ [-1, 1]` against `(1 - u²)^((q-3)/2)`, which is the Jacobi
//! weight with `α = β = (q-3)/2`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, Result};

/// Default number of nodes for sphere-height integrals.
pub const DEFAULT_NODES: usize = 128;

/// Nodes and weights for `∫_{-1}^{1} (1-x)^α (1+x)^β f(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl GaussJacobi {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return domain("quadrature needs at least one node");
        }
        if !(alpha > -1.0 && beta > -1.0) {
            return domain(format!("Jacobi exponents must exceed -1 (got {alpha}, {beta})"));
        }
        let ab = alpha + beta;
        let mu0 = (2f64).powf(ab + 1.0) * libm::tgamma(alpha + 1.0) * libm::tgamma(beta + 1.0)
            / libm::tgamma(ab + 2.0);

        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let kf = k as f64;
            let diag = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                let s = 2.0 * kf + ab;
                (beta * beta - alpha * alpha) / (s * (s + 2.0))
            };
            jacobi[(k, k)] = diag;
            if k + 1 < n {
                let m = kf + 1.0;
                // The n = 1 term is written in cancelled form so that α + β = -1 is safe.
                let b = if k == 0 {
                    4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
                } else {
                    let s = 2.0 * m + ab;
                    4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
                };
                let off = b.sqrt();
                jacobi[(k, k + 1)] = off;
                jacobi[(k + 1, k)] = off;
            }
        }

        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self { nodes, weights, alpha, beta })
    }

    /// Gauss–Legendre rule (`α = β = 0`).
    pub fn legendre(n: usize) -> Result<Self> {
        Self::new(n, 0.0, 0.0)
    }

    /// Rule for the sphere height weight `(1 - u²)^((q-3)/2)` on `[-1, 1]`.
    pub fn sphere_height(q: usize, n: usize) -> Result<Self> {
        if q < 2 {
            return domain(format!("sphere dimension q must be >= 2 (got {q})"));
        }
        let e = (q as f64 - 3.0) / 2.0;
        Self::new(n, e, e)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `∫_a^b (b-x)^α (x-a)^β f(x) dx`.
    pub fn integrate_on<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = (b - a) / 2.0;
        let scale = half.powf(self.alpha + self.beta + 1.0);
        scale
            * self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&y, &w)| w * f(a + half * (y + 1.0)))
                .sum::<f64>()
    }
}

/// Rule for `∫_{-1}^{0} g(s) (1 - s²)^((q-3)/2) ds`.
///
/// The `(1+s)^e` singularity is carried by the Jacobi weight and the smooth
/// factor `(1-s)^e` is folded into the weights.
#[derive(Debug, Clone)]
pub struct LowerHalfRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LowerHalfRule {
    pub fn new(q: usize, n: usize) -> Result<Self> {
        if q < 2 {
            return domain(format!("sphere dimension q must be >= 2 (got {q})"));
        }
        let e = (q as f64 - 3.0) / 2.0;
        let base = GaussJacobi::new(n, 0.0, e)?;
        let scale = 0.5f64.powf(e + 1.0);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (&y, &w) in base.nodes().iter().zip(base.weights()) {
            let s = -1.0 + 0.5 * (y + 1.0);
            nodes.push(s);
            weights.push(scale * w * (1.0 - s).powf(e));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
