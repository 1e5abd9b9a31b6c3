//! Finite-graph spin models: graphs, single-spin spaces, a priori measures
//! and pair potentials, together with the elementary functionals every
//! bound consumes (oscillation, triple norm, variational distance and the
//! j-variation of the local Hamiltonian).
//!
//! Energy convention: `H(σ) = Σ_{edges {i,j}} Φ_ij(σ_i, σ_j)` with
//! `Φ_ij(a, b) = -J_ij · T(a, b)`, where `T` is `a·b` for Ising and rotator
//! spins and a user table for tabulated potentials. Each unordered edge is
//! counted once, so `δ(Φ_ij) = 2|J_ij|` for Ising and rotator forms.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::quadrature::GaussJacobi;

/// Tolerance on the normalization of a priori measures.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Undirected simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate edges are merged;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return invalid(format!("edge ({a}, {b}) references a vertex outside 0..{n}"));
            }
            if a == b {
                return invalid(format!("self-loop at vertex {a}"));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        Ok(Self { n, edges, adjacency })
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return invalid("a cycle needs at least 3 vertices");
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("complete graph edges are valid")
    }

    /// Periodic `width × height` square lattice. Vertex `(x, y)` has index
    /// `y * width + x`. Both sides must be at least 3 for the lattice to be
    /// 4-regular.
    pub fn torus(width: usize, height: usize) -> Result<Self> {
        if width < 3 || height < 3 {
            return invalid(format!(
                "torus sides must be >= 3 to be 4-regular (got {width} x {height})"
            ));
        }
        let idx = |x: usize, y: usize| y * width + x;
        let mut edges = Vec::with_capacity(2 * width * height);
        for y in 0..height {
            for x in 0..width {
                edges.push((idx(x, y), idx((x + 1) % width, y)));
                edges.push((idx(x, y), idx(x, (y + 1) % height)));
            }
        }
        Self::new(width * height, edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.adjacency[i].binary_search(&j).is_ok()
    }
}

/// A point of a discrete single-spin space, with optional embedding
/// coordinates (needed for Ising/rotator forms and for metrics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub label: String,
    pub coords: Vec<f64>,
}

impl Atom {
    pub fn new(label: impl Into<String>, coords: Vec<f64>) -> Self {
        Self { label: label.into(), coords }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SingleSpinSpace {
    Discrete { atoms: Vec<Atom> },
    /// The unit sphere `S^{q-1} ⊂ R^q`.
    Sphere { q: usize },
}

impl SingleSpinSpace {
    /// Ising atoms `+1`, `-1`.
    pub fn ising() -> Self {
        Self::Discrete {
            atoms: vec![Atom::new("+", vec![1.0]), Atom::new("-", vec![-1.0])],
        }
    }

    /// `m` equally spaced points `(cos 2πk/m, sin 2πk/m)` on the circle.
    pub fn discretized_circle(m: usize) -> Self {
        let atoms = (0..m)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                Atom::new(format!("θ{k}"), vec![th.cos(), th.sin()])
            })
            .collect();
        Self::Discrete { atoms }
    }

    /// Atoms labelled `0..m` without embedding.
    pub fn labels(m: usize) -> Self {
        Self::Discrete {
            atoms: (0..m).map(|k| Atom::new(k.to_string(), Vec::new())).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Discrete { atoms } if atoms.is_empty() => {
                invalid("discrete space needs at least one atom")
            }
            Self::Discrete { atoms } => {
                let dim = atoms[0].coords.len();
                if atoms.iter().any(|a| a.coords.len() != dim) {
                    return invalid("all atoms must share the same embedding dimension");
                }
                Ok(())
            }
            Self::Sphere { q } if *q < 2 => invalid(format!("sphere needs q >= 2 (got {q})")),
            Self::Sphere { .. } => Ok(()),
        }
    }

    pub fn n_atoms(&self) -> Option<usize> {
        match self {
            Self::Discrete { atoms } => Some(atoms.len()),
            Self::Sphere { .. } => None,
        }
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match self {
            Self::Discrete { atoms } => Some(atoms),
            Self::Sphere { .. } => None,
        }
    }

    /// True when atoms carry coordinates, so the Euclidean metric exists.
    pub fn has_metric(&self) -> bool {
        match self {
            Self::Discrete { atoms } => atoms.first().is_some_and(|a| !a.coords.is_empty()),
            Self::Sphere { .. } => true,
        }
    }

    /// Euclidean distance between two atoms.
    pub fn atom_distance(&self, a: usize, b: usize) -> Result<f64> {
        match self {
            Self::Discrete { atoms } if self.has_metric() => {
                Ok(euclidean(&atoms[a].coords, &atoms[b].coords))
            }
            _ => domain("single-spin space carries no metric"),
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// A rotation-invariant (about the pole `e_q`) measure on `S^{q-1}`,
/// stored as a density relative to the equidistribution `α_0` on the
/// Gauss–Jacobi grid in the height coordinate `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalDensity {
    q: usize,
    rule: GaussJacobi,
    density: Vec<f64>,
    /// `Γ(q/2) / (√π Γ((q-1)/2))`, the height marginal of `α_0`.
    height_norm: f64,
}

impl ZonalDensity {
    /// Samples `density(u)` on the height grid and renormalizes it.
    pub fn from_fn(q: usize, nodes: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        let rule = GaussJacobi::sphere_height(q, nodes)?;
        let values: Vec<f64> = rule.nodes().iter().map(|&u| density(u)).collect();
        Self::from_values(q, rule, values)
    }

    pub fn from_values(q: usize, rule: GaussJacobi, mut density: Vec<f64>) -> Result<Self> {
        if density.len() != rule.len() {
            return domain("density length does not match the quadrature grid");
        }
        if density.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("zonal density must be finite and non-negative on the grid");
        }
        let height_norm = sphere_height_norm(q);
        let mass: f64 = height_norm
            * rule
                .weights()
                .iter()
                .zip(&density)
                .map(|(w, h)| w * h)
                .sum::<f64>();
        if mass <= 0.0 {
            return invalid("zonal density has zero mass");
        }
        density.iter_mut().for_each(|h| *h /= mass);
        Ok(Self { q, rule, density, height_norm })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rule(&self) -> &GaussJacobi {
        &self.rule
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `∫ g(u) α(dσ)` for a function of the height only.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.height_norm
            * self
                .rule
                .nodes()
                .iter()
                .zip(self.rule.weights())
                .zip(&self.density)
                .map(|((&u, &w), &h)| w * h * g(u))
                .sum::<f64>()
    }

    pub fn mean_height(&self) -> f64 {
        self.expect(|u| u)
    }
}

/// `Γ(q/2) / (√π Γ((q-1)/2))`.
pub fn sphere_height_norm(q: usize) -> f64 {
    let qf = q as f64;
    libm::tgamma(qf / 2.0) / (std::f64::consts::PI.sqrt() * libm::tgamma((qf - 1.0) / 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum AprioriMeasure {
    Discrete(Vec<f64>),
    SphereUniform,
    SphereZonal(ZonalDensity),
}

impl AprioriMeasure {
    pub fn uniform_discrete(m: usize) -> Self {
        Self::Discrete(vec![1.0 / m as f64; m])
    }

    pub fn validate_for(&self, space: &SingleSpinSpace) -> Result<()> {
        match (self, space) {
            (Self::Discrete(w), SingleSpinSpace::Discrete { atoms }) => {
                if w.len() != atoms.len() {
                    return invalid(format!(
                        "a priori weights have {} entries for {} atoms",
                        w.len(),
                        atoms.len()
                    ));
                }
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return invalid("a priori weights must be non-negative");
                }
                let s: f64 = w.iter().sum();
                if (s - 1.0).abs() > NORMALIZATION_TOL {
                    return invalid(format!("a priori weights sum to {s}, not 1"));
                }
                Ok(())
            }
            (Self::SphereUniform, SingleSpinSpace::Sphere { .. }) => Ok(()),
            (Self::SphereZonal(z), SingleSpinSpace::Sphere { q }) if z.q == *q => Ok(()),
            _ => invalid("a priori measure does not live on the single-spin space"),
        }
    }

    pub fn discrete_weights(&self) -> Option<&[f64]> {
        match self {
            Self::Discrete(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairForm {
    /// `-J σ_i σ_j` on atoms with scalar coordinate `±1`.
    Ising,
    /// `-J σ_i · σ_j` on unit vectors (sphere, or embedded discrete atoms).
    Rotator,
    /// `-J T(σ_i, σ_j)` with a symmetric table over atom pairs.
    Tabulated(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairPotential {
    couplings: DMatrix<f64>,
    form: PairForm,
}

impl PairPotential {
    pub fn new(couplings: DMatrix<f64>, form: PairForm) -> Result<Self> {
        if !couplings.is_square() {
            return invalid("coupling matrix must be square");
        }
        let n = couplings.nrows();
        for i in 0..n {
            if couplings[(i, i)] != 0.0 {
                return invalid(format!("J[{i},{i}] must be zero"));
            }
            for j in 0..n {
                let v = couplings[(i, j)];
                if !v.is_finite() {
                    return invalid(format!("J[{i},{j}] is not finite"));
                }
                if v != couplings[(j, i)] {
                    return invalid(format!("J is not symmetric at ({i},{j})"));
                }
            }
        }
        if let PairForm::Tabulated(t) = &form {
            if !t.is_square() || t.iter().any(|v| !v.is_finite()) {
                return invalid("pair table must be square and finite");
            }
            if (0..t.nrows()).any(|a| (0..t.nrows()).any(|b| t[(a, b)] != t[(b, a)])) {
                return invalid("pair table must be symmetric");
            }
        }
        Ok(Self { couplings, form })
    }

    /// Uniform coupling `j` on every edge of `graph`.
    pub fn uniform(graph: &Graph, j: f64, form: PairForm) -> Result<Self> {
        let n = graph.n_vertices();
        let mut c = DMatrix::zeros(n, n);
        for &(a, b) in graph.edges() {
            c[(a, b)] = j;
            c[(b, a)] = j;
        }
        Self::new(c, form)
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    pub fn form(&self) -> &PairForm {
        &self.form
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { couplings: &self.couplings * lambda, form: self.form.clone() }
    }
}

/// A spin value handed to energy evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spin<'a> {
    Atom(usize),
    Vector(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionModel {
    graph: Graph,
    space: SingleSpinSpace,
    apriori: AprioriMeasure,
    potential: PairPotential,
}

impl InteractionModel {
    pub fn new(
        graph: Graph,
        space: SingleSpinSpace,
        apriori: AprioriMeasure,
        potential: PairPotential,
    ) -> Result<Self> {
        space.validate()?;
        apriori.validate_for(&space)?;
        let n = graph.n_vertices();
        if potential.couplings.nrows() != n {
            return invalid(format!(
                "coupling matrix is {}x{} for a graph with {n} vertices",
                potential.couplings.nrows(),
                potential.couplings.ncols()
            ));
        }
        for i in 0..n {
            for j in 0..n {
                if potential.couplings[(i, j)] != 0.0 && !graph.has_edge(i, j) {
                    return invalid(format!("coupling J[{i},{j}] set on a non-edge"));
                }
            }
        }
        match (&potential.form, &space) {
            (PairForm::Ising, SingleSpinSpace::Discrete { atoms }) => {
                if atoms.iter().any(|a| a.coords.len() != 1 || (a.coords[0].abs() - 1.0).abs() > 0.0)
                {
                    return invalid("Ising form needs atoms with scalar coordinate ±1");
                }
            }
            (PairForm::Ising, SingleSpinSpace::Sphere { .. }) => {
                return invalid("Ising form needs a discrete ±1 space");
            }
            (PairForm::Rotator, SingleSpinSpace::Discrete { atoms }) => {
                if atoms.iter().any(|a| a.coords.is_empty() || (dot(&a.coords, &a.coords) - 1.0).abs() > 1e-12)
                {
                    return invalid("rotator form on a discrete space needs unit-vector atoms");
                }
            }
            (PairForm::Rotator, SingleSpinSpace::Sphere { .. }) => {}
            (PairForm::Tabulated(t), SingleSpinSpace::Discrete { atoms }) => {
                if t.nrows() != atoms.len() {
                    return invalid(format!(
                        "pair table is {}x{} for {} atoms",
                        t.nrows(),
                        t.ncols(),
                        atoms.len()
                    ));
                }
            }
            (PairForm::Tabulated(_), SingleSpinSpace::Sphere { .. }) => {
                return invalid("tabulated potentials are restricted to discrete spaces");
            }
        }
        Ok(Self { graph, space, apriori, potential })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn space(&self) -> &SingleSpinSpace {
        &self.space
    }

    pub fn apriori(&self) -> &AprioriMeasure {
        &self.apriori
    }

    pub fn potential(&self) -> &PairPotential {
        &self.potential
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.potential.couplings
    }

    pub fn n_sites(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.potential.couplings[(i, j)]
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.space, SingleSpinSpace::Sphere { .. })
    }

    pub fn sphere_dim(&self) -> Option<usize> {
        match self.space {
            SingleSpinSpace::Sphere { q } => Some(q),
            _ => None,
        }
    }

    /// Same graph, space and potential with another a priori measure.
    pub fn with_apriori(&self, apriori: AprioriMeasure) -> Result<Self> {
        apriori.validate_for(&self.space)?;
        Ok(Self { apriori, ..self.clone() })
    }

    pub fn with_potential(&self, potential: PairPotential) -> Result<Self> {
        Self::new(self.graph.clone(), self.space.clone(), self.apriori.clone(), potential)
    }

    /// Interaction shape `T(a, b)` for two spins.
    fn shape(&self, a: Spin<'_>, b: Spin<'_>) -> Result<f64> {
        match (&self.potential.form, &self.space, a, b) {
            (PairForm::Tabulated(t), _, Spin::Atom(x), Spin::Atom(y)) => Ok(t[(x, y)]),
            (PairForm::Ising | PairForm::Rotator, SingleSpinSpace::Discrete { atoms }, Spin::Atom(x), Spin::Atom(y)) => {
                Ok(dot(&atoms[x].coords, &atoms[y].coords))
            }
            (PairForm::Rotator, SingleSpinSpace::Sphere { q }, Spin::Vector(x), Spin::Vector(y)) => {
                if x.len() != *q || y.len() != *q {
                    return domain(format!("rotator spins must have {q} components"));
                }
                Ok(dot(x, y))
            }
            _ => domain("spin kind does not match the single-spin space"),
        }
    }

    /// `Φ_ij(σ_i, σ_j)`; zero off the edge set.
    pub fn pair_energy(&self, i: usize, j: usize, a: Spin<'_>, b: Spin<'_>) -> Result<f64> {
        let jij = self.coupling(i, j);
        if jij == 0.0 {
            return Ok(0.0);
        }
        Ok(-jij * self.shape(a, b)?)
    }

    /// Fast discrete path, `Φ_ij` for atom indices.
    pub(crate) fn pair_energy_atoms(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        let jij = self.potential.couplings[(i, j)];
        if jij == 0.0 {
            return 0.0;
        }
        -jij * self.shape(Spin::Atom(a), Spin::Atom(b)).unwrap_or(0.0)
    }

    /// Total energy of a discrete configuration.
    pub fn energy_atoms(&self, config: &[usize]) -> f64 {
        self.graph
            .edges()
            .iter()
            .map(|&(a, b)| self.pair_energy_atoms(a, b, config[a], config[b]))
            .sum()
    }

    /// `sup - inf` of the shape over all spin pairs.
    fn shape_range(&self) -> f64 {
        match &self.potential.form {
            PairForm::Ising | PairForm::Rotator => 2.0,
            PairForm::Tabulated(t) => t.max() - t.min(),
        }
    }

    /// `sup |shape|`.
    fn shape_sup(&self) -> f64 {
        match &self.potential.form {
            PairForm::Ising | PairForm::Rotator => 1.0,
            PairForm::Tabulated(t) => t.amax(),
        }
    }

    /// Largest variation of the shape in its second argument with the first fixed.
    fn shape_partial_range(&self) -> f64 {
        match &self.potential.form {
            PairForm::Ising | PairForm::Rotator => 2.0,
            PairForm::Tabulated(t) => (0..t.nrows())
                .map(|a| {
                    let row = t.row(a);
                    row.max() - row.min()
                })
                .fold(0.0, f64::max),
        }
    }

    /// `δ(Φ_ij) = sup_{w, w̄} |Φ_ij(w) - Φ_ij(w̄)|`; errors on non-edges.
    pub fn oscillation(&self, i: usize, j: usize) -> Result<f64> {
        if !self.graph.has_edge(i, j) {
            return domain(format!("({i}, {j}) is not an edge"));
        }
        Ok(self.coupling(i, j).abs() * self.shape_range())
    }

    /// Matrix of `Σ_{A ⊃ {i,j}} δ(Φ_A)`; for pair potentials `δ(Φ_ij)`.
    pub fn oscillation_matrix(&self) -> DMatrix<f64> {
        let range = self.shape_range();
        self.couplings().map(|j| j.abs() * range)
    }

    /// `δ_k(Φ_ik)`: oscillation of the pair term in the `k` coordinate only.
    pub fn partial_oscillation_matrix(&self) -> DMatrix<f64> {
        let range = self.shape_partial_range();
        self.couplings().map(|j| j.abs() * range)
    }

    /// `‖Φ_ij‖_∞`.
    pub fn sup_norm_matrix(&self) -> DMatrix<f64> {
        let sup = self.shape_sup();
        self.couplings().map(|j| j.abs() * sup)
    }

    /// `Σ_{A ∋ i} ‖Φ_A‖_∞` per site.
    pub fn local_sup_norms(&self) -> Vec<f64> {
        let m = self.sup_norm_matrix();
        (0..self.n_sites()).map(|i| m.row(i).sum()).collect()
    }

    /// `Σ_{A ∋ j} δ_j(Φ_A)` per site.
    pub fn local_oscillations(&self) -> Vec<f64> {
        let m = self.partial_oscillation_matrix();
        (0..self.n_sites()).map(|j| m.row(j).sum()).collect()
    }

    /// `|||Φ||| = sup_i Σ_{A∋i} |A| ‖Φ_A‖_∞`.
    pub fn triple_norm(&self) -> f64 {
        self.local_sup_norms()
            .into_iter()
            .map(|s| 2.0 * s)
            .fold(0.0, f64::max)
    }

    /// `H_i(σ_i, ζ_j, rest) - H_i(σ_i, ζ̄_j, rest)`; only the `{i,j}` term survives.
    pub fn local_hamiltonian_variation(
        &self,
        i: usize,
        j: usize,
        sigma_i: Spin<'_>,
        zeta_j: Spin<'_>,
        zeta_bar_j: Spin<'_>,
    ) -> Result<f64> {
        if !self.graph.has_edge(i, j) {
            return domain(format!("({i}, {j}) is not an edge"));
        }
        Ok(self.pair_energy(i, j, sigma_i, zeta_j)? - self.pair_energy(i, j, sigma_i, zeta_bar_j)?)
    }
}

/// `sup_{|f| ≤ 1} |ν1(f) - ν2(f)| = Σ_a |p_a - q_a|`, in `[0, 2]`.
pub fn variational_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return domain(format!("measures have {} and {} atoms", p.len(), q.len()));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Variational distance of two densities on a shared quadrature grid.
pub fn variational_distance_on_grid(weights: &[f64], h1: &[f64], h2: &[f64]) -> Result<f64> {
    if weights.len() != h1.len() || h1.len() != h2.len() {
        return domain("densities are not given on a common grid");
    }
    Ok(weights
        .iter()
        .zip(h1.iter().zip(h2))
        .map(|(w, (a, b))| w * (a - b).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single_edge(form: PairForm, space: SingleSpinSpace, apriori: AprioriMeasure, j: f64) -> InteractionModel {
        let g = Graph::path(2);
        let pot = PairPotential::uniform(&g, j, form).unwrap();
        InteractionModel::new(g, space, apriori, pot).unwrap()
    }

    fn ising_edge(j: f64) -> InteractionModel {
        single_edge(PairForm::Ising, SingleSpinSpace::ising(), AprioriMeasure::uniform_discrete(2), j)
    }

    fn rotator_edge(q: usize, j: f64) -> InteractionModel {
        single_edge(PairForm::Rotator, SingleSpinSpace::Sphere { q }, AprioriMeasure::SphereUniform, j)
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(ising_edge(0.0).oscillation(0, 1).unwrap(), 0.0);
        assert_eq!(rotator_edge(2, 0.5).oscillation(0, 1).unwrap(), 1.0);
        assert_eq!(ising_edge(1.0).oscillation(0, 1).unwrap(), 2.0);
        assert!(ising_edge(1.0).oscillation(0, 0).is_err());
    }

    #[test]
    fn ising_oscillation_matches_enumeration() {
        let m = ising_edge(0.7);
        let mut vals = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                vals.push(m.pair_energy_atoms(0, 1, a, b));
            }
        }
        let range = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert_abs_diff_eq!(m.oscillation(0, 1).unwrap(), range, epsilon = 1e-9);
    }

    #[test]
    fn rotator_oscillation_matches_dense_circle_scan() {
        let m = rotator_edge(2, 0.5);
        let n = 720;
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for a in 0..n {
            let ta = 2.0 * std::f64::consts::PI * a as f64 / n as f64;
            let va = [ta.cos(), ta.sin()];
            for b in (0..n).step_by(7) {
                let tb = 2.0 * std::f64::consts::PI * b as f64 / n as f64;
                let vb = [tb.cos(), tb.sin()];
                let e = m.pair_energy(0, 1, Spin::Vector(&va), Spin::Vector(&vb)).unwrap();
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        assert_abs_diff_eq!(m.oscillation(0, 1).unwrap(), hi - lo, epsilon = 1e-9);
    }

    #[test]
    fn tabulated_oscillation_is_table_range() {
        let t = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -2.0, 1.0, 0.5, 0.0, -2.0, 0.0, 3.0]);
        let m = single_edge(PairForm::Tabulated(t), SingleSpinSpace::labels(3), AprioriMeasure::uniform_discrete(3), 0.5);
        assert_abs_diff_eq!(m.oscillation(0, 1).unwrap(), 0.5 * 5.0);
        // row ranges: 3, 1, 5
        assert_abs_diff_eq!(m.partial_oscillation_matrix()[(0, 1)], 0.5 * 5.0);
    }

    #[test]
    fn triple_norm_examples() {
        assert_eq!(ising_edge(0.0).triple_norm(), 0.0);
        assert_eq!(rotator_edge(3, 1.0).triple_norm(), 2.0);
        let g = Graph::torus(4, 4).unwrap();
        let beta = 0.3;
        let pot = PairPotential::uniform(&g, beta, PairForm::Rotator).unwrap();
        let m = InteractionModel::new(g, SingleSpinSpace::Sphere { q: 2 }, AprioriMeasure::SphereUniform, pot).unwrap();
        assert_abs_diff_eq!(m.triple_norm(), 8.0 * beta, epsilon = 1e-15);
    }

    #[test]
    fn variational_distance_examples() {
        assert_eq!(variational_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(variational_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        let (p, q) = (0.8, 0.35);
        assert_abs_diff_eq!(variational_distance(&[p, 1.0 - p], &[q, 1.0 - q]).unwrap(), 2.0 * (p - q), epsilon = 1e-15);
        assert!(variational_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn local_variation_examples() {
        let m = ising_edge(0.4);
        let v = m.local_hamiltonian_variation(0, 1, Spin::Atom(0), Spin::Atom(0), Spin::Atom(0)).unwrap();
        assert_eq!(v, 0.0);
        let v = m.local_hamiltonian_variation(0, 1, Spin::Atom(0), Spin::Atom(0), Spin::Atom(1)).unwrap();
        assert_abs_diff_eq!(v, -2.0 * 0.4, epsilon = 1e-15);
        let r = rotator_edge(3, 0.4);
        let e1 = [1.0, 0.0, 0.0];
        let me1 = [-1.0, 0.0, 0.0];
        let v = r
            .local_hamiltonian_variation(0, 1, Spin::Vector(&e1), Spin::Vector(&e1), Spin::Vector(&me1))
            .unwrap();
        assert_abs_diff_eq!(v, -0.8, epsilon = 1e-15);
    }

    #[test]
    fn validation_errors() {
        let g = Graph::path(2);
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(PairPotential::new(bad, PairForm::Ising).is_err());
        let g3 = Graph::path(3);
        let mut c = DMatrix::zeros(3, 3);
        c[(0, 2)] = 1.0;
        c[(2, 0)] = 1.0;
        let pot = PairPotential::new(c, PairForm::Ising).unwrap();
        assert!(InteractionModel::new(g3, SingleSpinSpace::ising(), AprioriMeasure::uniform_discrete(2), pot).is_err());
        let pot = PairPotential::uniform(&g, 1.0, PairForm::Tabulated(DMatrix::zeros(2, 2))).unwrap();
        assert!(InteractionModel::new(g.clone(), SingleSpinSpace::Sphere { q: 2 }, AprioriMeasure::SphereUniform, pot).is_err());
        assert!(Graph::new(2, [(0, 0)]).is_err());
        assert!(AprioriMeasure::Discrete(vec![0.5, 0.6]).validate_for(&SingleSpinSpace::ising()).is_err());
    }

    #[test]
    fn torus_is_four_regular() {
        let g = Graph::torus(5, 3).unwrap();
        assert!((0..15).all(|i| g.degree(i) == 4));
        assert_eq!(g.edges().len(), 30);
        assert!(Graph::torus(2, 5).is_err());
    }

    #[test]
    fn zonal_density_uniform_has_zero_mean_height() {
        let z = ZonalDensity::from_fn(3, 32, |_| 1.0).unwrap();
        assert_abs_diff_eq!(z.expect(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(z.mean_height(), 0.0, epsilon = 1e-13);
        // density 1 + u on S^2: E u = ∫ u (1+u) /2 du = 1/3
        let z = ZonalDensity::from_fn(3, 32, |u| 1.0 + u).unwrap();
        assert_abs_diff_eq!(z.mean_height(), 1.0 / 3.0, epsilon = 1e-13);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn variational_distance_is_a_metric(p in simplex(5), q in simplex(5), r in simplex(5)) {
            let d = |a: &[f64], b: &[f64]| variational_distance(a, b).unwrap();
            prop_assert!(d(&p, &p) == 0.0);
            prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-15);
            prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
            prop_assert!(d(&p, &q) <= 2.0 + 1e-12);
        }

        #[test]
        fn triple_norm_scales_linearly(j in -2.0f64..2.0, lambda in 1.0f64..5.0) {
            let m = ising_edge(j);
            let scaled = m.with_potential(m.potential().scaled(lambda)).unwrap();
            prop_assert!((scaled.triple_norm() - lambda * m.triple_norm()).abs() <= 1e-12 * (1.0 + m.triple_norm()));
        }

        #[test]
        fn local_variation_is_antisymmetric(j in -2.0f64..2.0, s in 0usize..2, z in 0usize..2, zb in 0usize..2) {
            let m = ising_edge(j);
            let a = m.local_hamiltonian_variation(0, 1, Spin::Atom(s), Spin::Atom(z), Spin::Atom(zb)).unwrap();
            let b = m.local_hamiltonian_variation(0, 1, Spin::Atom(s), Spin::Atom(zb), Spin::Atom(z)).unwrap();
            prop_assert!((a + b).abs() < 1e-15);
        }
    }
}
