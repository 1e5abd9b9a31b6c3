//! Two-layer models: a first-layer Gibbs measure pushed site by site through
//! a channel. Provides posterior measures `α_η`, the posterior metric `d′`,
//! conditional Dobrushin bounds `C̄`, the continuity matrix `Q`, the fuzzy
//! coarse-graining criterion and decimation.
//!
//! `d′` and the left side of the continuity estimate are both measured in
//! the full convention `∫ |α_η - α_η̄|` (values in `[0, 2]`), while `C̄`
//! bounds the half-convention Dobrushin matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dobrushin::{
    dobrushin_bound_linear, dobrushin_bound_quadratic, lipschitz_matrix, neumann_series, row_sup, second_moment_factor,
    sphere_axis_deviation, BoundFlavor, DeviationKind,
};
use crate::error::{domain, invalid, Error, Result};
use crate::model::{dot, euclidean, AprioriMeasure, InteractionModel, PairForm, SingleSpinSpace};
use crate::quadrature::DEFAULT_NODES;
use crate::rotator::{posterior_metric_quadrature, second_moment_gap, HeatKernel};

/// Tolerance on row sums of a channel matrix and on posterior masses.
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Row-stochastic `T[σ][η]` from first-layer atoms to second-layer symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    matrix: DMatrix<f64>,
    deterministic: bool,
}

impl DiscreteChannel {
    /// Non-null channel: every entry strictly positive, rows summing to one.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return invalid("channel matrix is empty");
        }
        if matrix.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return invalid("channel entries must be finite and strictly positive");
        }
        check_rows(&matrix)?;
        Ok(Self { matrix, deterministic: false })
    }

    /// Row-normalizes non-negative weights, then validates as [`Self::new`].
    pub fn from_weights(mut weights: DMatrix<f64>) -> Result<Self> {
        for mut row in weights.row_iter_mut() {
            let s: f64 = row.sum();
            if !(s > 0.0) {
                return invalid("channel weight row has zero mass");
            }
            row /= s;
        }
        Self::new(weights)
    }

    /// Deterministic map `σ ↦ map[σ]` onto `n_out` symbols.
    pub fn deterministic(map: &[usize], n_out: usize) -> Result<Self> {
        let mut matrix = DMatrix::zeros(map.len(), n_out);
        for (a, &b) in map.iter().enumerate() {
            if b >= n_out {
                return invalid(format!("map sends atom {a} to symbol {b} >= {n_out}"));
            }
            matrix[(a, b)] = 1.0;
        }
        Ok(Self { matrix, deterministic: true })
    }

    pub fn identity(m: usize) -> Self {
        Self { matrix: DMatrix::identity(m, m), deterministic: true }
    }

    /// `k ≡ 1`: the output carries no information about the input.
    pub fn independent(m: usize, n_out: usize) -> Self {
        Self {
            matrix: DMatrix::from_element(m, n_out, 1.0 / n_out as f64),
            deterministic: false,
        }
    }

    /// Heat kernel at time `t` restricted to atoms embedded in `S^{q-1}` and
    /// row-normalized: `T[a][b] ∝ K_t(x_a · x_b)`.
    pub fn discretized_heat_kernel(space: &SingleSpinSpace, t: f64) -> Result<Self> {
        let atoms = space.atoms().ok_or_else(|| Error::Domain("discretized heat kernel needs atoms".into()))?;
        let q = atoms.first().map(|a| a.coords.len()).unwrap_or(0);
        if q < 2 || atoms.iter().any(|a| a.coords.len() != q || (dot(&a.coords, &a.coords) - 1.0).abs() > 1e-9) {
            return domain("discretized heat kernel needs atoms on a common unit sphere");
        }
        let k = HeatKernel::new(q, t)?;
        let m = atoms.len();
        let w = DMatrix::from_fn(m, m, |a, b| k.zonal_density(dot(&atoms[a].coords, &atoms[b].coords)).max(f64::MIN_POSITIVE));
        Self::from_weights(w)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_inputs(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }
}

fn check_rows(m: &DMatrix<f64>) -> Result<()> {
    for (r, row) in m.row_iter().enumerate() {
        let s: f64 = row.sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return invalid(format!("channel row {r} sums to {s}, not 1"));
        }
    }
    Ok(())
}

/// A deterministic coarse-graining into cells, described by cell diameters
/// (and the cell of each atom when the space is discrete).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzyPartition {
    pub cell_of: Option<Vec<usize>>,
    pub diameters: Vec<f64>,
}

impl FuzzyPartition {
    pub fn from_diameters(diameters: Vec<f64>) -> Result<Self> {
        if diameters.is_empty() {
            return invalid("partition has no cells");
        }
        if diameters.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return invalid("cell diameters must be finite and non-negative");
        }
        Ok(Self { cell_of: None, diameters })
    }

    /// Partition of a metric atom space by `map[atom] = cell`.
    pub fn from_map(space: &SingleSpinSpace, map: Vec<usize>) -> Result<Self> {
        let n = space.n_atoms().ok_or_else(|| Error::Domain("cell map needs a discrete space".into()))?;
        if map.len() != n {
            return invalid(format!("cell map has {} entries for {n} atoms", map.len()));
        }
        let n_cells = map.iter().max().map_or(0, |m| m + 1);
        let mut diameters = vec![0.0f64; n_cells];
        let mut used = vec![false; n_cells];
        for a in 0..n {
            used[map[a]] = true;
            for b in 0..n {
                if map[a] == map[b] {
                    diameters[map[a]] = diameters[map[a]].max(space.atom_distance(a, b)?);
                }
            }
        }
        if used.iter().any(|u| !u) {
            return invalid("every cell must contain at least one atom");
        }
        Ok(Self { cell_of: Some(map), diameters })
    }

    /// `m` equal arcs of the unit circle.
    pub fn circle_arcs(m: usize) -> Result<Self> {
        if m < 2 {
            return invalid("need at least two arcs");
        }
        let d = 2.0 * (std::f64::consts::PI / m as f64).sin();
        Self::from_diameters(vec![d; m])
    }

    /// Singleton cells of a discrete space (the identity map).
    pub fn singletons(n_atoms: usize) -> Self {
        Self { cell_of: Some((0..n_atoms).collect()), diameters: vec![0.0; n_atoms] }
    }

    /// `ρ = sup_cells diam`.
    pub fn fineness(&self) -> f64 {
        self.diameters.iter().cloned().fold(0.0, f64::max)
    }

    pub fn channel(&self) -> Result<DiscreteChannel> {
        match &self.cell_of {
            Some(map) => DiscreteChannel::deterministic(map, self.diameters.len()),
            None => domain("partition given by diameters only has no channel matrix"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    /// Brownian motion on `S^{q-1}` run for time `t`.
    HeatKernel { q: usize, t: f64 },
    Discrete(DiscreteChannel),
    Fuzzy(FuzzyPartition),
}

impl Channel {
    pub fn heat_kernel(q: usize, t: f64) -> Result<Self> {
        if q < 2 {
            return invalid(format!("sphere dimension q must be >= 2 (got {q})"));
        }
        if !(t > 0.0) || !t.is_finite() {
            return invalid(format!("channel time must be finite and positive (got {t})"));
        }
        Ok(Self::HeatKernel { q, t })
    }

    /// Checks that the channel acts on the model's single-spin space. A heat
    /// kernel on a discrete space is replaced by its discretization.
    pub fn resolve(&self, model: &InteractionModel) -> Result<Channel> {
        match (self, model.space()) {
            (Channel::HeatKernel { q, .. }, SingleSpinSpace::Sphere { q: qs }) => {
                if q != qs {
                    return invalid(format!("channel dimension {q} does not match sphere dimension {qs}"));
                }
                Ok(self.clone())
            }
            (Channel::HeatKernel { t, .. }, space @ SingleSpinSpace::Discrete { .. }) => {
                Ok(Channel::Discrete(DiscreteChannel::discretized_heat_kernel(space, *t)?))
            }
            (Channel::Discrete(c), SingleSpinSpace::Discrete { atoms }) => {
                if c.n_inputs() != atoms.len() {
                    return invalid(format!("channel has {} inputs for {} atoms", c.n_inputs(), atoms.len()));
                }
                Ok(self.clone())
            }
            (Channel::Discrete(_), SingleSpinSpace::Sphere { .. }) => invalid("discrete channel on a continuous sphere"),
            (Channel::Fuzzy(p), SingleSpinSpace::Discrete { atoms }) => {
                if let Some(map) = &p.cell_of {
                    if map.len() != atoms.len() {
                        return invalid("cell map does not cover the atoms");
                    }
                }
                Ok(self.clone())
            }
            (Channel::Fuzzy(_), SingleSpinSpace::Sphere { .. }) => Ok(self.clone()),
        }
    }
}

/// Second-layer observation at a site.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Symbol(usize),
    Point(Vec<f64>),
}

/// `α_η` for a single site.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorMeasure {
    Discrete(Vec<f64>),
    /// Rotation-invariant about `center`, density in `σ·center` relative to
    /// the equidistribution.
    Zonal { center: Vec<f64>, density: crate::model::ZonalDensity },
}

/// `α_η(σ) ∝ α(σ) T[σ][η]`.
pub fn discrete_posterior(apriori: &[f64], channel: &DiscreteChannel, eta: usize) -> Result<Vec<f64>> {
    if eta >= channel.n_outputs() {
        return domain(format!("observation {eta} outside the output alphabet"));
    }
    let mut p: Vec<f64> = apriori.iter().enumerate().map(|(a, w)| w * channel.matrix[(a, eta)]).collect();
    let z: f64 = p.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Numerical(format!("posterior for observation {eta} has zero mass")));
    }
    p.iter_mut().for_each(|v| *v /= z);
    Ok(p)
}

pub fn posterior_measure(model: &InteractionModel, channel: &Channel, eta: &Observation) -> Result<PosteriorMeasure> {
    match (channel.resolve(model)?, eta) {
        (Channel::Discrete(c), Observation::Symbol(e)) => {
            let w = model.apriori().discrete_weights().expect("validated discrete measure");
            Ok(PosteriorMeasure::Discrete(discrete_posterior(w, &c, *e)?))
        }
        (Channel::Fuzzy(p), Observation::Symbol(e)) => {
            let w = model.apriori().discrete_weights().expect("validated discrete measure");
            Ok(PosteriorMeasure::Discrete(discrete_posterior(w, &p.channel()?, *e)?))
        }
        (Channel::HeatKernel { q, t }, Observation::Point(center)) => {
            require_uniform(model)?;
            check_unit(center, q)?;
            let density = HeatKernel::new(q, t)?.pole_posterior(DEFAULT_NODES)?;
            Ok(PosteriorMeasure::Zonal { center: center.clone(), density })
        }
        _ => domain("observation kind does not match the channel"),
    }
}

fn require_uniform(model: &InteractionModel) -> Result<()> {
    if !matches!(model.apriori(), AprioriMeasure::SphereUniform) {
        return domain("heat-kernel posteriors are implemented for the uniform a priori measure");
    }
    Ok(())
}

fn check_unit(v: &[f64], q: usize) -> Result<()> {
    if v.len() != q || (dot(v, v) - 1.0).abs() > 1e-9 {
        return domain(format!("observation must be a unit vector in R^{q}"));
    }
    Ok(())
}

/// `d′(η, η̄) = ∫ |α_η - α_η̄|` in `[0, 2]`.
pub fn posterior_metric(model: &InteractionModel, channel: &Channel, eta: &Observation, eta_bar: &Observation) -> Result<f64> {
    match (channel.resolve(model)?, eta, eta_bar) {
        (Channel::HeatKernel { q, t }, Observation::Point(a), Observation::Point(b)) => {
            require_uniform(model)?;
            check_unit(a, q)?;
            check_unit(b, q)?;
            let x = euclidean(a, b).min(2.0);
            Ok(posterior_metric_quadrature(&HeatKernel::new(q, t)?, x, DEFAULT_NODES)?.value)
        }
        (resolved, Observation::Symbol(_), Observation::Symbol(_)) => {
            let (PosteriorMeasure::Discrete(p), PosteriorMeasure::Discrete(pb)) =
                (posterior_measure(model, &resolved, eta)?, posterior_measure(model, &resolved, eta_bar)?)
            else {
                unreachable!("symbol observations give discrete posteriors")
            };
            crate::model::variational_distance(&p, &pb)
        }
        _ => domain("observation kind does not match the channel"),
    }
}

/// All posteriors of a discrete channel, skipping symbols that cannot occur.
pub fn posterior_family(apriori: &[f64], channel: &DiscreteChannel) -> Vec<(usize, Vec<f64>)> {
    (0..channel.n_outputs())
        .filter_map(|e| discrete_posterior(apriori, channel, e).ok().map(|p| (e, p)))
        .collect()
}

/// Matrix of `d′(η, η̄)` over the output alphabet of a discrete channel.
pub fn posterior_metric_table(apriori: &[f64], channel: &DiscreteChannel) -> Result<DMatrix<f64>> {
    let m = channel.n_outputs();
    let post: Vec<Option<Vec<f64>>> = (0..m).map(|e| discrete_posterior(apriori, channel, e).ok()).collect();
    let mut d = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            if let (Some(p), Some(pb)) = (&post[a], &post[b]) {
                d[(a, b)] = crate::model::variational_distance(p, pb)?;
            }
        }
    }
    Ok(d)
}

/// Uniform-in-`η` bound `C̄` on the Dobrushin matrices of the constrained
/// first-layer systems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalDobrushin {
    pub flavor: BoundFlavor,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub c_bar: DMatrix<f64>,
    /// `sup_i Σ_j C̄_ij`
    pub c_bar_value: f64,
    /// The supremum over an inner parameter was taken on a finite grid.
    pub grid_sup: bool,
}

impl ConditionalDobrushin {
    fn new(flavor: BoundFlavor, c_bar: DMatrix<f64>, grid_sup: bool) -> Self {
        let c_bar_value = row_sup(&c_bar);
        Self { flavor, c_bar, c_bar_value, grid_sup }
    }

    pub fn certified(&self) -> bool {
        self.c_bar_value < 1.0
    }
}

/// Default flavor per channel: `Lipschitz` for heat kernels on spheres and for
/// fuzzy maps, `Linear` otherwise.
pub fn default_flavor(model: &InteractionModel, channel: &Channel) -> BoundFlavor {
    match (channel, model.space()) {
        (Channel::HeatKernel { .. }, SingleSpinSpace::Sphere { .. }) | (Channel::Fuzzy(_), _) => BoundFlavor::Lipschitz,
        _ => BoundFlavor::Linear,
    }
}

pub fn conditional_dobrushin_matrix(
    model: &InteractionModel,
    channel: &Channel,
    flavor: BoundFlavor,
) -> Result<ConditionalDobrushin> {
    let osc = model.oscillation_matrix();
    match channel.resolve(model)? {
        Channel::Discrete(c) => {
            let w = model.apriori().discrete_weights().expect("validated discrete measure").to_vec();
            discrete_conditional(model, &posterior_family(&w, &c), flavor)
        }
        Channel::HeatKernel { q, t } => {
            require_uniform(model)?;
            if !matches!(model.potential().form(), PairForm::Rotator) {
                return domain("heat-kernel channel on a sphere needs the rotator pair form");
            }
            // By rotation invariance every posterior is the pole posterior
            // rotated, so the supremum over η is attained by any one of them.
            let abs_j = model.couplings().map(f64::abs);
            match flavor {
                BoundFlavor::Lipschitz => {
                    let spread = second_moment_gap(q, t)?.sqrt();
                    let l = lipschitz_matrix(model)?;
                    let c = l.zip_map(&osc, |l, o| 0.5 * (0.5 * o).exp() * l * spread);
                    Ok(ConditionalDobrushin::new(flavor, c, false))
                }
                BoundFlavor::Linear | BoundFlavor::Quadratic => {
                    let z = HeatKernel::new(q, t)?.pole_posterior(DEFAULT_NODES)?;
                    let kind = if flavor == BoundFlavor::Linear { DeviationKind::Linear } else { DeviationKind::Quadratic };
                    let (axis, grid) = sphere_axis_deviation(q, &AprioriMeasure::SphereZonal(z), kind)?;
                    let c = if flavor == BoundFlavor::Linear {
                        abs_j.zip_map(&osc, |j, o| o.exp() * 2.0 * j * axis)
                    } else {
                        abs_j.zip_map(&osc, |j, o| 0.5 * (0.5 * o).exp() * 2.0 * j * axis)
                    };
                    Ok(ConditionalDobrushin::new(flavor, c, grid))
                }
            }
        }
        Channel::Fuzzy(p) => {
            if flavor != BoundFlavor::Lipschitz {
                if let Some(map) = &p.cell_of {
                    let w = model.apriori().discrete_weights().expect("validated discrete measure").to_vec();
                    let c = DiscreteChannel::deterministic(map, p.diameters.len())?;
                    return discrete_conditional(model, &posterior_family(&w, &c), flavor);
                }
                return domain("fuzzy maps on continuous spaces support only the Lipschitz flavor");
            }
            let l = lipschitz_matrix(model)?;
            Ok(ConditionalDobrushin::new(flavor, fuzzy_c_bar(model, p.fineness(), &l), false))
        }
    }
}

fn discrete_conditional(
    model: &InteractionModel,
    family: &[(usize, Vec<f64>)],
    flavor: BoundFlavor,
) -> Result<ConditionalDobrushin> {
    let n = model.n_sites();
    let mut c = DMatrix::zeros(n, n);
    let lip = if flavor == BoundFlavor::Lipschitz { Some(lipschitz_matrix(model)?) } else { None };
    for (_, post) in family {
        let conditioned = model.with_apriori(AprioriMeasure::Discrete(post.clone()))?;
        let m = match flavor {
            BoundFlavor::Linear => dobrushin_bound_linear(&conditioned)?.matrix,
            BoundFlavor::Quadratic => dobrushin_bound_quadratic(&conditioned)?.matrix,
            BoundFlavor::Lipschitz => {
                let factor = second_moment_factor(model.space(), conditioned.apriori())?;
                let osc = model.oscillation_matrix();
                lip.as_ref().expect("computed above").zip_map(&osc, |l, o| 0.5 * (0.5 * o).exp() * l * factor)
            }
        };
        c.zip_apply(&m, |a: &mut f64, b: f64| *a = a.max(b));
    }
    Ok(ConditionalDobrushin::new(flavor, c, false))
}

fn fuzzy_c_bar(model: &InteractionModel, rho: f64, l: &DMatrix<f64>) -> DMatrix<f64> {
    let osc = model.oscillation_matrix();
    l.zip_map(&osc, |l, o| 0.5 * rho * (0.5 * o).exp() * l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QProvenance {
    /// Site-resolved constants `4 e^{2Σ_{A∋i}‖Φ_A‖} … e^{Σ_{A∋j} δ_j(Φ_A)}`.
    Exact,
    /// Uniform constant `4 exp(4 sup_i Σ_{A∋i} ‖Φ_A‖)`.
    Coarse,
}

impl std::str::FromStr for QProvenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "coarse" => Ok(Self::Coarse),
            other => Err(Error::Config(format!("unknown Q provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMatrix {
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub entries: DMatrix<f64>,
    pub provenance: QProvenance,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub d_bar: DMatrix<f64>,
}

/// `Q` from `C̄`: `D̄ = Σ C̄^n`, `M_ik = δ_k(Φ_ik)`, and the chosen constants.
pub fn q_matrix(model: &InteractionModel, c_bar: &DMatrix<f64>, provenance: QProvenance) -> Result<QMatrix> {
    let n = model.n_sites();
    if c_bar.nrows() != n || c_bar.ncols() != n {
        return domain("C̄ does not match the number of sites");
    }
    let d_bar = neumann_series(c_bar)?.d;
    let mut mixed = model.partial_oscillation_matrix();
    mixed.fill_diagonal(0.0);
    let md = &mixed * &d_bar;
    let sup_norms = model.local_sup_norms();
    let mut entries = match provenance {
        QProvenance::Exact => {
            let local_osc: Vec<f64> = (0..n).map(|j| model.partial_oscillation_matrix().column(j).sum()).collect();
            DMatrix::from_fn(n, n, |i, j| 4.0 * (2.0 * sup_norms[i]).exp() * md[(i, j)] * local_osc[j].exp())
        }
        QProvenance::Coarse => {
            let sup = sup_norms.iter().cloned().fold(0.0, f64::max);
            md * (4.0 * (4.0 * sup).exp())
        }
    };
    entries.fill_diagonal(0.0);
    Ok(QMatrix { entries, provenance, d_bar })
}

/// Outcome of the continuity estimate
/// `‖γ′_i(·|η) - γ′_i(·|η̄)‖ ≤ Σ_j Q_ij d′(η_j, η̄_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityCertificate {
    pub certified: bool,
    pub flavor: BoundFlavor,
    pub c_bar_value: f64,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub c_bar: DMatrix<f64>,
    pub grid_sup: bool,
    pub q: Option<QMatrix>,
    pub statement: String,
}

pub fn continuity_certificate(
    model: &InteractionModel,
    channel: &Channel,
    flavor: BoundFlavor,
    provenance: QProvenance,
) -> Result<ContinuityCertificate> {
    let cond = conditional_dobrushin_matrix(model, channel, flavor)?;
    certificate_from(model, cond, provenance)
}

fn certificate_from(model: &InteractionModel, cond: ConditionalDobrushin, provenance: QProvenance) -> Result<ContinuityCertificate> {
    let certified = cond.certified();
    let q = if certified { Some(q_matrix(model, &cond.c_bar, provenance)?) } else { None };
    let statement = if certified {
        "|gamma'_i(.|eta) - gamma'_i(.|eta_bar)| <= sum_j Q_ij d'(eta_j, eta_bar_j)".to_string()
    } else {
        format!("not certified: sup_i sum_j C_bar_ij = {} >= 1", cond.c_bar_value)
    };
    Ok(ContinuityCertificate {
        certified,
        flavor: cond.flavor,
        c_bar_value: cond.c_bar_value,
        c_bar: cond.c_bar,
        grid_sup: cond.grid_sup,
        q,
        statement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzyReport {
    pub rho: f64,
    /// `(ρ/2) sup_i Σ_j exp(½ Σ_{A⊃{i,j}} δ(Φ_A)) L_ij`
    pub lhs: f64,
    pub certified: bool,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub c_bar: DMatrix<f64>,
}

pub fn fuzzy_check(model: &InteractionModel, partition: &FuzzyPartition, lipschitz: &DMatrix<f64>) -> Result<FuzzyReport> {
    let n = model.n_sites();
    if lipschitz.nrows() != n || lipschitz.ncols() != n {
        return domain("Lipschitz matrix does not match the number of sites");
    }
    let rho = partition.fineness();
    let c_bar = fuzzy_c_bar(model, rho, lipschitz);
    let lhs = row_sup(&c_bar);
    Ok(FuzzyReport { rho, lhs, certified: lhs < 1.0, c_bar })
}

/// Report for the decimation map keeping the spins on `sublattice`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecimationReport {
    pub sublattice: Vec<usize>,
    pub certificate: ContinuityCertificate,
    /// `Q` restricted to the sublattice: a bound on the Dobrushin matrix of
    /// the image system, since the discrete-metric `d′` takes values 0 and 2.
    #[serde(serialize_with = "serialize_opt_matrix")]
    pub image_dobrushin_bound: Option<DMatrix<f64>>,
    pub image_c_value: Option<f64>,
    /// The constant value of `d′` between distinct observations.
    pub discrete_metric_value: f64,
}

fn serialize_opt_matrix<S: serde::Serializer>(m: &Option<DMatrix<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(crate::report::matrix_rows).serialize(s)
}

/// Decimation: sites in `sublattice` are observed exactly (point-mass
/// posteriors, zero rows in `C̄`); all other sites are unobserved and keep
/// the a priori measure.
pub fn decimation_channel(
    model: &InteractionModel,
    sublattice: &[usize],
    flavor: BoundFlavor,
    provenance: QProvenance,
) -> Result<DecimationReport> {
    let n = model.n_sites();
    let mut keep = vec![false; n];
    for &s in sublattice {
        if s >= n {
            return invalid(format!("sublattice site {s} out of range"));
        }
        keep[s] = true;
    }
    let base = match flavor {
        BoundFlavor::Linear => dobrushin_bound_linear(model)?.matrix,
        BoundFlavor::Quadratic => dobrushin_bound_quadratic(model)?.matrix,
        BoundFlavor::Lipschitz => crate::dobrushin::dobrushin_bound_lipschitz(model, &lipschitz_matrix(model)?)?.matrix,
    };
    let mut c_bar = base;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            c_bar.row_mut(i).fill(0.0);
        }
    }
    let cond = ConditionalDobrushin::new(flavor, c_bar, false);
    let certificate = certificate_from(model, cond, provenance)?;
    let (image_dobrushin_bound, image_c_value) = match &certificate.q {
        Some(q) => {
            let idx: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| q.entries[(idx[a], idx[b])]);
            let v = row_sup(&sub);
            (Some(sub), Some(v))
        }
        None => (None, None),
    };
    let mut sub: Vec<usize> = sublattice.to_vec();
    sub.sort_unstable();
    sub.dedup();
    Ok(DecimationReport {
        sublattice: sub,
        certificate,
        image_dobrushin_bound,
        image_c_value,
        discrete_metric_value: 2.0,
    })
}
