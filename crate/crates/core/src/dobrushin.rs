//! Deviation functionals and single-layer bounds on the Dobrushin
//! interdependence matrix, an exact enumeration oracle for small discrete
//! models, the Neumann series `D = Σ C^n`, and the Gaussian concentration
//! exponent derived from the deviation matrix.
//!
//! Norm convention: the Dobrushin matrix `C_ij` is measured in the half
//! convention `½ Σ |γ - γ̄|`, which is the normalization under which the
//! linear and quadratic deviation bounds hold. Single-site measures passed
//! to [`crate::model::variational_distance`] are compared in the full
//! convention `Σ |p - q|`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{sphere_height_norm, AprioriMeasure, InteractionModel, PairForm, SingleSpinSpace, ZonalDensity};
use crate::quadrature::GaussJacobi;

/// Refusal threshold for exhaustive enumerations.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Residual tolerance demanded of an accepted Neumann series.
pub const NEUMANN_RESIDUAL_TOL: f64 = 1e-9;

/// Number of axis angles scanned when the worst boundary direction on a
/// sphere has no closed form.
const AXIS_SCAN: usize = 181;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationKind {
    /// `inf_B ∫ |Δ - B| dα` (median-centred).
    Linear,
    /// `inf_B (∫ (Δ - B)² dα)^{1/2}` (mean-centred).
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundFlavor {
    Linear,
    Quadratic,
    Lipschitz,
}

impl std::str::FromStr for BoundFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            "lipschitz" => Ok(Self::Lipschitz),
            other => Err(Error::Config(format!("unknown flavor `{other}`"))),
        }
    }
}

/// Lower weighted median: smallest value whose cumulative weight reaches half.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&k| weights[k] > 0.0).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = idx.iter().map(|&k| weights[k]).sum();
    let mut acc = 0.0;
    for &k in &idx {
        acc += weights[k];
        if acc >= 0.5 * total {
            return values[k];
        }
    }
    idx.last().map_or(0.0, |&k| values[k])
}

/// `inf_B Σ w |v - B|`, attained at the weighted median.
pub fn l1_center_deviation(values: &[f64], weights: &[f64]) -> f64 {
    let m = weighted_median(values, weights);
    values.iter().zip(weights).map(|(v, w)| w * (v - m).abs()).sum()
}

/// `inf_B (Σ w (v - B)²)^{1/2}`, attained at the weighted mean.
pub fn l2_center_deviation(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values.iter().zip(weights).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() / total;
    var.max(0.0).sqrt()
}

fn center_deviation(kind: DeviationKind, values: &[f64], weights: &[f64]) -> f64 {
    match kind {
        DeviationKind::Linear => l1_center_deviation(values, weights),
        DeviationKind::Quadratic => l2_center_deviation(values, weights),
    }
}

/// Linear deviation `dev_{α;i,j}(H_i)`.
pub fn dev(model: &InteractionModel, i: usize, j: usize, under: &AprioriMeasure) -> Result<f64> {
    deviation(model, i, j, under, DeviationKind::Linear)
}

/// Quadratic deviation `std_{α;i,j}(H_i)`.
pub fn std_dev(model: &InteractionModel, i: usize, j: usize, under: &AprioriMeasure) -> Result<f64> {
    deviation(model, i, j, under, DeviationKind::Quadratic)
}

/// Worst-case centred spread of the j-variation of `H_i` under `under`.
///
/// Only the `{i,j}` pair term depends on `σ_j`, so the supremum over boundary
/// pairs scans `(ζ_j, ζ̄_j)` alone. Non-edges give 0.
pub fn deviation(
    model: &InteractionModel,
    i: usize,
    j: usize,
    under: &AprioriMeasure,
    kind: DeviationKind,
) -> Result<f64> {
    under.validate_for(model.space())?;
    if i == j || !model.graph().has_edge(i, j) {
        return Ok(0.0);
    }
    match (model.space(), under) {
        (SingleSpinSpace::Discrete { atoms }, AprioriMeasure::Discrete(w)) => {
            let m = atoms.len();
            let mut best: f64 = 0.0;
            let mut delta = vec![0.0; m];
            for z in 0..m {
                for zb in (z + 1)..m {
                    for (a, d) in delta.iter_mut().enumerate() {
                        *d = model.pair_energy_atoms(i, j, a, z) - model.pair_energy_atoms(i, j, a, zb);
                    }
                    best = best.max(center_deviation(kind, &delta, w));
                }
            }
            Ok(best)
        }
        (SingleSpinSpace::Sphere { q }, measure) => {
            // Δ(σ) = J σ·(ζ̄ - ζ) is linear in σ, so the supremum sits at
            // antipodal ζ, ζ̄ and Δ = 2|J| σ·e for a unit axis e.
            let scale = 2.0 * model.coupling(i, j).abs();
            Ok(scale * sphere_axis_deviation(*q, measure, kind)?.0)
        }
        _ => domain("a priori measure does not match the model space"),
    }
}

/// `sup_e inf_B ‖σ·e - B‖` under a rotation-invariant (about the pole)
/// measure on `S^{q-1}`. Returns the value and whether it came from a finite
/// scan over axis directions.
pub fn sphere_axis_deviation(q: usize, measure: &AprioriMeasure, kind: DeviationKind) -> Result<(f64, bool)> {
    match measure {
        AprioriMeasure::SphereUniform => {
            let qf = q as f64;
            let v = match kind {
                // E|u| under the height marginal: 2 c_q / (q - 1)
                DeviationKind::Linear => 2.0 * sphere_height_norm(q) / (qf - 1.0),
                DeviationKind::Quadratic => 1.0 / qf.sqrt(),
            };
            Ok((v, false))
        }
        AprioriMeasure::SphereZonal(z) => match kind {
            DeviationKind::Quadratic => {
                let qf = q as f64;
                let mean = z.mean_height();
                let var_axis = z.expect(|u| u * u) - mean * mean;
                let var_perp = z.expect(|u| 1.0 - u * u) / (qf - 1.0);
                Ok((var_axis.max(var_perp).max(0.0).sqrt(), false))
            }
            DeviationKind::Linear => Ok((zonal_linear_axis_scan(z)?, true)),
        },
        AprioriMeasure::Discrete(_) => domain("discrete measure on a sphere"),
    }
}

/// Distribution of the first coordinate of a uniform point on `S^{q-2}`.
pub(crate) fn transverse_rule(q: usize, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 2 {
        return Ok((vec![-1.0, 1.0], vec![0.5, 0.5]));
    }
    let rule = GaussJacobi::sphere_height(q - 1, nodes)?;
    let total: f64 = rule.weights().iter().sum();
    Ok((rule.nodes().to_vec(), rule.weights().iter().map(|w| w / total).collect()))
}

fn zonal_linear_axis_scan(z: &ZonalDensity) -> Result<f64> {
    let q = z.q();
    let (omega, omega_w) = transverse_rule(q, 48)?;
    let norm = sphere_height_norm(q);
    let rule = z.rule();
    let mut weights = Vec::with_capacity(rule.len() * omega.len());
    for (&w, &h) in rule.weights().iter().zip(z.density()) {
        for &wo in &omega_w {
            weights.push(norm * w * h * wo);
        }
    }
    let mut values = vec![0.0; weights.len()];
    let mut best: f64 = 0.0;
    for k in 0..AXIS_SCAN {
        let beta = std::f64::consts::FRAC_PI_2 * k as f64 / (AXIS_SCAN - 1) as f64;
        let (sb, cb) = beta.sin_cos();
        let mut idx = 0;
        for &u in rule.nodes() {
            let r = (1.0 - u * u).max(0.0).sqrt();
            for &o in &omega {
                values[idx] = u * cb + r * sb * o;
                idx += 1;
            }
        }
        best = best.max(l1_center_deviation(&values, &weights));
    }
    Ok(best)
}

/// A deviation matrix `B_ij = dev_{α;i,j}(H_i)` (or its quadratic analogue).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationMatrix {
    pub entries: DMatrix<f64>,
    pub kind: DeviationKind,
}

impl DeviationMatrix {
    /// `‖B‖_1 = sup_j Σ_i B_ij`.
    pub fn norm_1(&self) -> f64 {
        column_sup(&self.entries)
    }

    /// `‖B‖_∞ = sup_i Σ_j B_ij`.
    pub fn norm_inf(&self) -> f64 {
        row_sup(&self.entries)
    }
}

pub fn row_sums(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v.abs()).sum()).collect()
}

pub fn row_sup(m: &DMatrix<f64>) -> f64 {
    row_sums(m).into_iter().fold(0.0, f64::max)
}

pub fn column_sup(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn deviation_matrix(model: &InteractionModel, under: &AprioriMeasure, kind: DeviationKind) -> Result<DeviationMatrix> {
    let n = model.n_sites();
    let mut entries = DMatrix::zeros(n, n);
    for &(a, b) in model.graph().edges() {
        entries[(a, b)] = deviation(model, a, b, under, kind)?;
        entries[(b, a)] = deviation(model, b, a, under, kind)?;
    }
    Ok(DeviationMatrix { entries, kind })
}

/// Entrywise bound on the Dobrushin matrix, with `c_bound = sup_i Σ_j C_ij`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DobrushinBound {
    pub flavor: BoundFlavor,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub matrix: DMatrix<f64>,
    pub c_bound: f64,
    pub row_sums: Vec<f64>,
}

impl DobrushinBound {
    pub fn from_matrix(flavor: BoundFlavor, matrix: DMatrix<f64>) -> Self {
        let row_sums = row_sums(&matrix);
        let c_bound = row_sums.iter().cloned().fold(0.0, f64::max);
        Self { flavor, matrix, c_bound, row_sums }
    }

    pub fn certified(&self) -> bool {
        self.c_bound < 1.0
    }
}

/// `C_ij ≤ exp(Σ_{A⊃{i,j}} δ(Φ_A)) dev_{α;i,j}(H_i)`.
pub fn dobrushin_bound_linear(model: &InteractionModel) -> Result<DobrushinBound> {
    dobrushin_bound_linear_with(model, &model.oscillation_matrix())
}

/// Linear bound with a caller-supplied matrix of oscillation sums
/// `Σ_{A⊃{i,j}} δ(Φ_A)`, for interactions beyond pair terms.
pub fn dobrushin_bound_linear_with(model: &InteractionModel, oscillations: &DMatrix<f64>) -> Result<DobrushinBound> {
    check_shape(model, oscillations, "oscillation override")?;
    let b = deviation_matrix(model, model.apriori(), DeviationKind::Linear)?;
    let m = b.entries.zip_map(oscillations, |dev, osc| osc.exp() * dev);
    Ok(DobrushinBound::from_matrix(BoundFlavor::Linear, m))
}

/// `C_ij ≤ ½ exp(½ Σ δ(Φ_A)) std_{α;i,j}(H_i)`.
pub fn dobrushin_bound_quadratic(model: &InteractionModel) -> Result<DobrushinBound> {
    let osc = model.oscillation_matrix();
    let s = deviation_matrix(model, model.apriori(), DeviationKind::Quadratic)?;
    let m = s.entries.zip_map(&osc, |sd, o| 0.5 * (0.5 * o).exp() * sd);
    Ok(DobrushinBound::from_matrix(BoundFlavor::Quadratic, m))
}

/// `C_ij ≤ ½ exp(½ Σ δ(Φ_A)) L_ij inf_a (∫ d²(σ, a) α(dσ))^{1/2}`.
pub fn dobrushin_bound_lipschitz(model: &InteractionModel, lipschitz: &DMatrix<f64>) -> Result<DobrushinBound> {
    check_shape(model, lipschitz, "Lipschitz matrix")?;
    if lipschitz.iter().any(|v| *v < 0.0) {
        return domain("Lipschitz constants must be non-negative");
    }
    let factor = second_moment_factor(model.space(), model.apriori())?;
    let osc = model.oscillation_matrix();
    let m = lipschitz.zip_map(&osc, |l, o| 0.5 * (0.5 * o).exp() * l * factor);
    Ok(DobrushinBound::from_matrix(BoundFlavor::Lipschitz, m))
}

fn check_shape(model: &InteractionModel, m: &DMatrix<f64>, what: &str) -> Result<()> {
    let n = model.n_sites();
    if m.nrows() != n || m.ncols() != n {
        return domain(format!("{what} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols()));
    }
    Ok(())
}

/// `inf_a (∫ d²(σ, a) α(dσ))^{1/2}` with `a` ranging over atoms (discrete)
/// or over the pole and antipole (zonal sphere measures, where that is exact).
pub fn second_moment_factor(space: &SingleSpinSpace, measure: &AprioriMeasure) -> Result<f64> {
    match (space, measure) {
        (SingleSpinSpace::Discrete { atoms }, AprioriMeasure::Discrete(w)) => {
            if !space.has_metric() {
                return domain("second-moment factor needs a metric on the single-spin space");
            }
            let best = (0..atoms.len())
                .map(|a| {
                    (0..atoms.len())
                        .map(|s| w[s] * space.atom_distance(s, a).unwrap_or(0.0).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            Ok(best.sqrt())
        }
        (SingleSpinSpace::Sphere { .. }, AprioriMeasure::SphereUniform) => Ok(2f64.sqrt()),
        (SingleSpinSpace::Sphere { .. }, AprioriMeasure::SphereZonal(z)) => {
            Ok((2.0 * (1.0 - z.mean_height().abs())).max(0.0).sqrt())
        }
        _ => domain("a priori measure does not match the single-spin space"),
    }
}

/// Lipschitz constants `L_ij` of the j-variation of `H_i` in `σ_i`.
///
/// Rotator: `L_ij = 2|J_ij|`. Discrete spaces with embedded atoms: exact
/// maximum over atom quadruples.
pub fn lipschitz_matrix(model: &InteractionModel) -> Result<DMatrix<f64>> {
    let n = model.n_sites();
    match (model.potential().form(), model.space()) {
        (PairForm::Rotator, SingleSpinSpace::Sphere { .. }) => Ok(model.couplings().map(|j| 2.0 * j.abs())),
        (_, space @ SingleSpinSpace::Discrete { atoms }) if space.has_metric() => {
            let m = atoms.len();
            let mut out = DMatrix::zeros(n, n);
            for &(p, r) in model.graph().edges() {
                for (i, j) in [(p, r), (r, p)] {
                    let mut best: f64 = 0.0;
                    for z in 0..m {
                        for zb in 0..m {
                            let delta = |a: usize| model.pair_energy_atoms(i, j, a, z) - model.pair_energy_atoms(i, j, a, zb);
                            for s in 0..m {
                                for a in 0..m {
                                    let d = space.atom_distance(s, a)?;
                                    if d > 0.0 {
                                        best = best.max((delta(s) - delta(a)).abs() / d);
                                    }
                                }
                            }
                        }
                    }
                    out[(i, j)] = best;
                }
            }
            Ok(out)
        }
        _ => domain("Lipschitz constants need a metric on the single-spin space"),
    }
}

/// Potential norms built from deviations, with the bounds they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripleNorms {
    pub triple: f64,
    pub dev: f64,
    pub std: f64,
    /// `e^{2|||Φ|||} |||Φ|||_dev`
    pub dev_bound: f64,
    /// `½ e^{|||Φ|||} |||Φ|||_std`
    pub std_bound: f64,
}

pub fn dev_triple_norms(model: &InteractionModel) -> Result<TripleNorms> {
    let b = deviation_matrix(model, model.apriori(), DeviationKind::Linear)?;
    let s = deviation_matrix(model, model.apriori(), DeviationKind::Quadratic)?;
    let triple = model.triple_norm();
    let dev = b.norm_inf();
    let std = s.norm_inf();
    Ok(TripleNorms {
        triple,
        dev,
        std,
        dev_bound: (2.0 * triple).exp() * dev,
        std_bound: 0.5 * triple.exp() * std,
    })
}

/// Single-site Gibbs kernel at `i` in a discrete model, given neighbour spins.
pub(crate) fn site_kernel(model: &InteractionModel, i: usize, weights: &[f64], boundary: &[(usize, usize)], out: &mut [f64]) {
    let mut max_log = f64::NEG_INFINITY;
    for (a, o) in out.iter_mut().enumerate() {
        let e: f64 = boundary.iter().map(|&(k, b)| model.pair_energy_atoms(i, k, a, b)).sum();
        *o = -e;
        max_log = max_log.max(-e);
    }
    let mut z = 0.0;
    for (o, w) in out.iter_mut().zip(weights) {
        *o = w * (*o - max_log).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

/// Exact Dobrushin matrix of a discrete model by enumerating every boundary
/// configuration on the neighbourhood of each site.
pub fn exact_dobrushin_matrix(model: &InteractionModel) -> Result<DMatrix<f64>> {
    let SingleSpinSpace::Discrete { atoms } = model.space() else {
        return domain("exact Dobrushin matrix needs a discrete single-spin space");
    };
    let weights = model.apriori().discrete_weights().expect("validated discrete measure");
    let m = atoms.len();
    let n = model.n_sites();
    let needed = (m as f64).powi(model.graph().max_degree() as i32 + 1) * m as f64;
    if needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: ENUMERATION_BUDGET });
    }
    let mut c = DMatrix::zeros(n, n);
    let mut k0 = vec![0.0; m];
    let mut k1 = vec![0.0; m];
    for i in 0..n {
        let nb = model.graph().neighbors(i).to_vec();
        for (pos, &j) in nb.iter().enumerate() {
            let others: Vec<usize> = nb.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &k)| k).collect();
            let mut best: f64 = 0.0;
            let mut config = vec![0usize; others.len()];
            loop {
                let mut boundary: Vec<(usize, usize)> = others.iter().zip(&config).map(|(&k, &b)| (k, b)).collect();
                boundary.push((j, 0));
                let last = boundary.len() - 1;
                for z in 0..m {
                    boundary[last].1 = z;
                    site_kernel(model, i, weights, &boundary, &mut k0);
                    for zb in (z + 1)..m {
                        boundary[last].1 = zb;
                        site_kernel(model, i, weights, &boundary, &mut k1);
                        let d: f64 = 0.5 * k0.iter().zip(&k1).map(|(a, b)| (a - b).abs()).sum::<f64>();
                        best = best.max(d);
                    }
                    boundary[last].1 = z;
                }
                if !advance(&mut config, m) {
                    break;
                }
            }
            c[(i, j)] = best;
        }
    }
    Ok(c)
}

/// Mixed-radix increment; returns false after the last configuration.
pub(crate) fn advance(config: &mut [usize], radix: usize) -> bool {
    for c in config.iter_mut() {
        *c += 1;
        if *c < radix {
            return true;
        }
        *c = 0;
    }
    false
}

/// `D = Σ_{n≥0} C^n`, obtained by solving `(I - C) D = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannSeries {
    pub d: DMatrix<f64>,
    /// `sup_i Σ_j |C_ij|`, the convergence certificate.
    pub row_norm: f64,
    /// `max |(I - C) D - I|`.
    pub residual: f64,
}

pub fn neumann_series(c: &DMatrix<f64>) -> Result<NeumannSeries> {
    if !c.is_square() {
        return domain("Neumann series needs a square matrix");
    }
    let row_norm = row_sup(c);
    if row_norm >= 1.0 || !row_norm.is_finite() {
        return Err(Error::CertificateFailure {
            reason: "row-sum norm of C is not below 1".into(),
            value: row_norm,
        });
    }
    let n = c.nrows();
    let a = DMatrix::identity(n, n) - c;
    let d = a
        .clone()
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Numerical("I - C is singular".into()))?;
    let residual = (&a * &d - DMatrix::identity(n, n)).amax();
    if residual >= NEUMANN_RESIDUAL_TOL {
        return Err(Error::Numerical(format!("Neumann residual {residual:e} too large")));
    }
    Ok(NeumannSeries { d, row_norm, residual })
}

/// Quantities entering the Gaussian concentration exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    /// `exp(sup_{i≠j} Σ_{A⊃{i,j}} δ(Φ_A))`
    pub s: f64,
    pub b_norm_1: f64,
    pub b_norm_inf: f64,
    /// `(1 - s‖B‖_∞)(1 - s‖B‖_1)`
    pub kappa: f64,
    pub valid: bool,
}

impl ConcentrationReport {
    pub fn from_parts(s: f64, b: &DeviationMatrix) -> Self {
        let b_norm_1 = b.norm_1();
        let b_norm_inf = b.norm_inf();
        let valid = s * b_norm_1 < 1.0 && s * b_norm_inf < 1.0;
        Self {
            s,
            b_norm_1,
            b_norm_inf,
            kappa: (1.0 - s * b_norm_inf) * (1.0 - s * b_norm_1),
            valid,
        }
    }

    pub fn for_model(model: &InteractionModel) -> Result<Self> {
        let osc = model.oscillation_matrix();
        let n = model.n_sites();
        let mut sup: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sup = sup.max(osc[(i, j)]);
                }
            }
        }
        let b = deviation_matrix(model, model.apriori(), DeviationKind::Linear)?;
        Ok(Self::from_parts(sup.exp(), &b))
    }

    /// `exp(-κ r² / (2 Σ_i δ_i(F)²))`.
    pub fn tail_bound(&self, delta_f: &[f64], r: f64) -> Result<f64> {
        if !self.valid {
            return Err(Error::CertificateFailure {
                reason: "concentration requires s‖B‖_1 < 1 and s‖B‖_∞ < 1".into(),
                value: (self.s * self.b_norm_1).max(self.s * self.b_norm_inf),
            });
        }
        if r < 0.0 || !r.is_finite() {
            return domain("threshold r must be finite and non-negative");
        }
        let l2: f64 = delta_f.iter().map(|d| d * d).sum();
        if l2 == 0.0 {
            return Ok(if r == 0.0 { 1.0 } else { 0.0 });
        }
        Ok((-self.kappa * r * r / (2.0 * l2)).exp())
    }
}

/// Gaussian tail bound `μ(F - μF ≥ r)` together with its report.
pub fn concentration_bound(model: &InteractionModel, delta_f: &[f64], r: f64) -> Result<(f64, ConcentrationReport)> {
    let report = ConcentrationReport::for_model(model)?;
    let bound = report.tail_bound(delta_f, r)?;
    Ok((bound, report))
}
