//! Monte Carlo and enumeration oracles: Euler–Maruyama for the height of
//! Brownian motion on `S^{q-1}`, first-passage survival, heat-bath sampling
//! of finite models, exact transformed kernels of tiny discrete models, and
//! quadrature of the heat-kernel posterior metric.
//!
//! Every path (or chain) `k` draws from its own ChaCha8 stream keyed by
//! `(seed, stream)` with stream position `k`, so results are bitwise
//! reproducible for any number of worker threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dobrushin::{advance, site_kernel, ENUMERATION_BUDGET};
use crate::error::{domain, Error, Result};
use crate::model::{euclidean, AprioriMeasure, InteractionModel, PairForm, SingleSpinSpace};
use crate::rotator::{posterior_metric_quadrature, HeatKernel, QuadratureEstimate};
use crate::tolerances::{MC_SIGMAS, SMALL_TIME};
use crate::two_layer::DiscreteChannel;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_PATHS: usize = 100_000;

/// Acceptance rate below which the sphere heat-bath sampler flags a warning.
pub const LOW_ACCEPTANCE: f64 = 1e-3;

/// Seed and stream id; unit `k` of a run uses stream position `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// Generator for unit `index` (a path or a chain).
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub stream: u64,
}

impl EmpiricalEstimate {
    pub fn from_samples(values: &[f64], rng: &RngSpec) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return domain("an estimate needs at least two samples");
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        Ok(Self {
            mean,
            std_error: (var / nf).sqrt(),
            n_samples: n,
            seed: rng.seed,
            stream: rng.stream,
        })
    }

    /// True if `target` lies within `sigmas` standard errors plus `band`.
    pub fn agrees_with(&self, target: f64, sigmas: f64, band: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.std_error + band
    }
}

/// Euler–Maruyama settings for the height diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub horizon: f64,
}

impl SdeConfig {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be finite and positive (got {horizon})")));
        }
        if !(dt > 0.0) || dt >= horizon {
            return Err(Error::Config(format!("step dt = {dt} must satisfy 0 < dt < t = {horizon}")));
        }
        Ok(Self { dt, horizon })
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil() as usize
    }
}

fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[inline]
fn em_step(z: f64, drift: f64, h: f64, dw: f64) -> f64 {
    let next = z - drift * z * h + (2.0 * (1.0 - z * z)).max(0.0).sqrt() * dw;
    next.clamp(-1.0, 1.0)
}

/// One coupled pair of paths: the coarse path uses step `h`, the fine path
/// `h/2`, and both share the same Brownian increments.
struct CoupledPath {
    coarse_end: f64,
    fine_end: f64,
    coarse_survived: bool,
    fine_survived: bool,
}

fn coupled_path(q: usize, z0: f64, steps: usize, h: f64, rng: &mut ChaCha8Rng) -> CoupledPath {
    let drift = q as f64 - 1.0;
    let half = h / 2.0;
    let sd = half.sqrt();
    let (mut zc, mut zf) = (z0, z0);
    let (mut sc, mut sf) = (z0 > 0.0, z0 > 0.0);
    for _ in 0..steps {
        let a: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        let b: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        zf = em_step(zf, drift, half, a);
        sf &= zf > 0.0;
        zf = em_step(zf, drift, half, b);
        sf &= zf > 0.0;
        zc = em_step(zc, drift, h, a + b);
        sc &= zc > 0.0;
    }
    CoupledPath { coarse_end: zc, fine_end: zf, coarse_survived: sc, fine_survived: sf }
}

fn single_path(q: usize, z0: f64, steps: usize, h: f64, rng: &mut ChaCha8Rng) -> (f64, bool) {
    let drift = q as f64 - 1.0;
    let sd = h.sqrt();
    let mut z = z0;
    let mut alive = z0 > 0.0;
    for _ in 0..steps {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        z = em_step(z, drift, h, dw);
        alive &= z > 0.0;
    }
    (z, alive)
}

fn check_q(q: usize) -> Result<()> {
    if q < 2 {
        return domain(format!("sphere dimension q must be >= 2 (got {q})"));
    }
    Ok(())
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::Config("need at least two paths".into()));
    }
    Ok(())
}

/// Estimate of `E Z_t` for the height started at `z0`; `t = 0` returns `z0`
/// exactly (with zero standard error).
pub fn simulate_height(q: usize, z0: f64, t: f64, dt: f64, rng: &RngSpec, n_paths: usize) -> Result<EmpiricalEstimate> {
    check_q(q)?;
    if !(-1.0..=1.0).contains(&z0) {
        return domain(format!("start height {z0} outside [-1, 1]"));
    }
    check_paths(n_paths)?;
    if t == 0.0 {
        return Ok(EmpiricalEstimate { mean: z0, std_error: 0.0, n_samples: n_paths, seed: rng.seed, stream: rng.stream });
    }
    let cfg = SdeConfig::new(dt, t)?;
    let (steps, h) = (cfg.steps(), t / cfg.steps() as f64);
    let values = par_map(n_paths, |k| single_path(q, z0, steps, h, &mut rng.rng(k as u64)).0);
    EmpiricalEstimate::from_samples(&values, rng)
}

/// Estimate at step `dt` together with a bias allowance calibrated by a
/// coupled run at `dt/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibratedEstimate {
    pub estimate: EmpiricalEstimate,
    pub half_step: EmpiricalEstimate,
    /// Mean and standard error of the coupled difference (coarse - fine).
    pub difference: f64,
    pub difference_se: f64,
    /// Allowance for the discretization bias of `estimate`.
    pub bias_band: f64,
}

impl CalibratedEstimate {
    /// `MC_SIGMAS` standard errors plus the bias band.
    pub fn tolerance(&self) -> f64 {
        MC_SIGMAS * self.estimate.std_error + self.bias_band
    }

    pub fn agrees_with(&self, target: f64) -> bool {
        (self.estimate.mean - target).abs() <= self.tolerance()
    }
}

/// Richardson factor turning a step-halving difference into a bias bound for
/// an order-1/2 scheme.
const HALF_ORDER_FACTOR: f64 = 1.0 / (1.0 - std::f64::consts::FRAC_1_SQRT_2);

fn calibrate(
    coarse: Vec<f64>,
    fine: Vec<f64>,
    rng: &RngSpec,
    bias_factor: f64,
) -> Result<CalibratedEstimate> {
    let diff: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| a - b).collect();
    let d = EmpiricalEstimate::from_samples(&diff, rng)?;
    Ok(CalibratedEstimate {
        estimate: EmpiricalEstimate::from_samples(&coarse, rng)?,
        half_step: EmpiricalEstimate::from_samples(&fine, rng)?,
        difference: d.mean,
        difference_se: d.std_error,
        bias_band: bias_factor * (d.mean.abs() + MC_SIGMAS * d.std_error),
    })
}

/// `E Z_t` with a bias band `(|Δ| + 3 s.e.(Δ)) / (1 - 2^{-1/2})`, where `Δ`
/// is the coupled difference between steps `dt` and `dt/2`. The clamp at the
/// poles makes the weak error decay like `sqrt(dt)` rather than `dt`, so the
/// band assumes order one half.
pub fn simulate_height_calibrated(
    q: usize,
    z0: f64,
    cfg: SdeConfig,
    rng: &RngSpec,
    n_paths: usize,
) -> Result<CalibratedEstimate> {
    check_q(q)?;
    if !(-1.0..=1.0).contains(&z0) {
        return domain(format!("start height {z0} outside [-1, 1]"));
    }
    check_paths(n_paths)?;
    let (steps, h) = (cfg.steps(), cfg.horizon / cfg.steps() as f64);
    let paths = par_map(n_paths, |k| {
        let p = coupled_path(q, z0, steps, h, &mut rng.rng(k as u64));
        (p.coarse_end, p.fine_end)
    });
    let (coarse, fine): (Vec<f64>, Vec<f64>) = paths.into_iter().unzip();
    calibrate(coarse, fine, rng, HALF_ORDER_FACTOR)
}

fn check_phi0(phi0: f64) -> Result<()> {
    if !(phi0 > 0.0 && phi0 < std::f64::consts::FRAC_PI_2) {
        return domain(format!("start angle {phi0} outside (0, π/2)"));
    }
    Ok(())
}

/// Survival probability `P(T_0 ≥ t)` of the height started at `sin φ0`,
/// monitored at step resolution only (biases survival upward).
pub fn first_passage_prob(q: usize, phi0: f64, t: f64, dt: f64, rng: &RngSpec, n_paths: usize) -> Result<EmpiricalEstimate> {
    check_q(q)?;
    check_phi0(phi0)?;
    check_paths(n_paths)?;
    let cfg = SdeConfig::new(dt, t)?;
    let (steps, h) = (cfg.steps(), t / cfg.steps() as f64);
    let z0 = phi0.sin();
    let values = par_map(n_paths, |k| {
        if single_path(q, z0, steps, h, &mut rng.rng(k as u64)).1 { 1.0 } else { 0.0 }
    });
    EmpiricalEstimate::from_samples(&values, rng)
}

/// Survival with a monitoring-bias band `(|Δ| + 3 s.e.(Δ)) / (1 - 2^{-1/2})`
/// for the order-½ error of discretely monitored barriers.
pub fn first_passage_calibrated(
    q: usize,
    phi0: f64,
    cfg: SdeConfig,
    rng: &RngSpec,
    n_paths: usize,
) -> Result<CalibratedEstimate> {
    check_q(q)?;
    check_phi0(phi0)?;
    check_paths(n_paths)?;
    let (steps, h) = (cfg.steps(), cfg.horizon / cfg.steps() as f64);
    let z0 = phi0.sin();
    let paths = par_map(n_paths, |k| {
        let p = coupled_path(q, z0, steps, h, &mut rng.rng(k as u64));
        (p.coarse_survived as u8 as f64, p.fine_survived as u8 as f64)
    });
    let (coarse, fine): (Vec<f64>, Vec<f64>) = paths.into_iter().unzip();
    calibrate(coarse, fine, rng, HALF_ORDER_FACTOR)
}

/// `2 P(0 ≤ G ≤ φ0/√(2t)) = erf(φ0 / (2√t))`: survival of `φ0 + √2 B` above 0.
pub fn single_barrier_survival(phi0: f64, t: f64) -> f64 {
    libm::erf(phi0 / (2.0 * t.sqrt()))
}

/// Exact survival for `q = 2`: the angle `φ0` from the equator is a Brownian
/// motion of rate 2 killed at either equator point (`0` or `π`).
pub fn circle_survival_exact(phi0: f64, t: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 1usize;
    loop {
        let nf = n as f64;
        let decay = (-nf * nf * t).exp();
        sum += 4.0 / (nf * std::f64::consts::PI) * (nf * phi0).sin() * decay;
        if nf * nf * t > 745.0 || (decay < 1e-18 && n > 1) {
            break;
        }
        n += 2;
    }
    sum
}

/// Configuration of a sampled state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Configuration {
    Atoms(Vec<usize>),
    Vectors(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatBathConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub chains: usize,
}

/// Recorded states (one per sweep after burn-in) of independent chains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub chains: Vec<Vec<Configuration>>,
    /// Rejection-sampler acceptance rate (sphere models only).
    pub acceptance_rate: Option<f64>,
    pub low_acceptance_warning: bool,
    pub rng: RngSpec,
}

impl SampleSet {
    /// Mean of `f` with the standard error taken across chain averages.
    pub fn estimate(&self, f: impl Fn(&Configuration) -> f64) -> Result<EmpiricalEstimate> {
        let means: Vec<f64> = self
            .chains
            .iter()
            .map(|c| c.iter().map(&f).sum::<f64>() / c.len().max(1) as f64)
            .collect();
        EmpiricalEstimate::from_samples(&means, &self.rng)
    }
}

fn uniform_on_sphere(q: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Single-site heat-bath sampler. Sphere sites draw from the tilted density
/// `∝ exp(σ·h_i)`, `h_i = Σ_j J_ij σ_j`, by rejection from the uniform
/// distribution with envelope `e^{|h_i|}`.
pub fn heat_bath_sampler(model: &InteractionModel, cfg: HeatBathConfig, rng: &RngSpec) -> Result<SampleSet> {
    if cfg.chains < 2 {
        return Err(Error::Config("need at least two chains for standard errors".into()));
    }
    if cfg.sweeps == 0 {
        return Err(Error::Config("need at least one recorded sweep".into()));
    }
    let n = model.n_sites();
    match model.space() {
        SingleSpinSpace::Sphere { q } => {
            if !matches!(model.apriori(), AprioriMeasure::SphereUniform) || !matches!(model.potential().form(), PairForm::Rotator) {
                return domain("sphere sampler supports rotator models with the uniform a priori measure");
            }
            let q = *q;
            let results = par_map(cfg.chains, |c| {
                let mut r = rng.rng(c as u64);
                let mut state: Vec<Vec<f64>> = (0..n).map(|_| uniform_on_sphere(q, &mut r)).collect();
                let (mut tries, mut accepts) = (0u64, 0u64);
                let mut rec = Vec::with_capacity(cfg.sweeps);
                for sweep in 0..cfg.burn_in + cfg.sweeps {
                    for i in 0..n {
                        let mut h = vec![0.0; q];
                        for &j in model.graph().neighbors(i) {
                            let jij = model.coupling(i, j);
                            h.iter_mut().zip(&state[j]).for_each(|(a, b)| *a += jij * b);
                        }
                        let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
                        loop {
                            let cand = uniform_on_sphere(q, &mut r);
                            tries += 1;
                            let log_acc = cand.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() - hn;
                            if r.random::<f64>().ln() <= log_acc {
                                accepts += 1;
                                state[i] = cand;
                                break;
                            }
                        }
                    }
                    if sweep >= cfg.burn_in {
                        rec.push(Configuration::Vectors(state.clone()));
                    }
                }
                (rec, tries, accepts)
            });
            let tries: u64 = results.iter().map(|r| r.1).sum();
            let accepts: u64 = results.iter().map(|r| r.2).sum();
            let rate = accepts as f64 / tries.max(1) as f64;
            Ok(SampleSet {
                chains: results.into_iter().map(|r| r.0).collect(),
                acceptance_rate: Some(rate),
                low_acceptance_warning: rate < LOW_ACCEPTANCE,
                rng: *rng,
            })
        }
        SingleSpinSpace::Discrete { atoms } => {
            let m = atoms.len();
            let w = model.apriori().discrete_weights().expect("validated discrete measure").to_vec();
            let chains = par_map(cfg.chains, |c| {
                let mut r = rng.rng(c as u64);
                let mut state: Vec<usize> = (0..n).map(|_| sample_index(&w, &mut r)).collect();
                let mut probs = vec![0.0; m];
                let mut rec = Vec::with_capacity(cfg.sweeps);
                for sweep in 0..cfg.burn_in + cfg.sweeps {
                    for i in 0..n {
                        let boundary: Vec<(usize, usize)> = model.graph().neighbors(i).iter().map(|&j| (j, state[j])).collect();
                        site_kernel(model, i, &w, &boundary, &mut probs);
                        state[i] = sample_index(&probs, &mut r);
                    }
                    if sweep >= cfg.burn_in {
                        rec.push(Configuration::Atoms(state.clone()));
                    }
                }
                rec
            });
            Ok(SampleSet { chains, acceptance_rate: None, low_acceptance_warning: false, rng: *rng })
        }
    }
}

fn sample_index(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    for (k, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return k;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

fn enumeration_guard(model: &InteractionModel, extra: usize) -> Result<usize> {
    let SingleSpinSpace::Discrete { atoms } = model.space() else {
        return domain("exact enumeration needs a discrete single-spin space");
    };
    let m = atoms.len();
    let needed = (m as f64).powi(model.n_sites() as i32) * extra as f64;
    if needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: ENUMERATION_BUDGET });
    }
    Ok(m)
}

/// Log Boltzmann weights `-H(σ) + Σ ln α(σ_k)` of all configurations, in
/// mixed-radix order (site 0 fastest).
fn log_weights(model: &InteractionModel, m: usize) -> Vec<f64> {
    let n = model.n_sites();
    let w = model.apriori().discrete_weights().expect("validated discrete measure");
    let mut out = Vec::with_capacity(m.pow(n as u32));
    let mut config = vec![0usize; n];
    loop {
        let mut lw = -model.energy_atoms(&config);
        for &a in &config {
            lw += w[a].ln();
        }
        out.push(lw);
        if !advance(&mut config, m) {
            break;
        }
    }
    out
}

fn decode(mut index: usize, m: usize, n: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(n) {
        *slot = index % m;
        index /= m;
    }
}

/// Single-site marginals of the finite-volume Gibbs measure, by enumeration.
pub fn exact_site_marginals(model: &InteractionModel) -> Result<Vec<Vec<f64>>> {
    let m = enumeration_guard(model, 1)?;
    let n = model.n_sites();
    let lw = log_weights(model, m);
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut marg = vec![vec![0.0; m]; n];
    let mut config = vec![0usize; n];
    let mut z = 0.0;
    for (k, l) in lw.iter().enumerate() {
        let p = (l - max).exp();
        z += p;
        decode(k, m, n, &mut config);
        for (i, &a) in config.iter().enumerate() {
            marg[i][a] += p;
        }
    }
    marg.iter_mut().flatten().for_each(|v| *v /= z);
    Ok(marg)
}

/// `γ′_i(·|η_{V∖i})` of the image of the finite-volume Gibbs measure under
/// the product channel, by summing over all first-layer configurations.
pub fn exact_transformed_kernel(model: &InteractionModel, channel: &DiscreteChannel, i: usize, eta: &[usize]) -> Result<Vec<f64>> {
    let n = model.n_sites();
    if i >= n || eta.len() != n {
        return domain("site or conditioning outside the model");
    }
    let m = enumeration_guard(model, channel.n_outputs())?;
    if channel.n_inputs() != m {
        return domain("channel inputs do not match the atoms");
    }
    if let Some((k, &e)) = eta.iter().enumerate().find(|&(k, &e)| k != i && e >= channel.n_outputs()) {
        return domain(format!("observation {e} at site {k} outside the output alphabet"));
    }
    let t = channel.matrix();
    let lw = log_weights(model, m);
    let mut config = vec![0usize; n];
    let mut logs = Vec::with_capacity(lw.len());
    for (k, l) in lw.iter().enumerate() {
        decode(k, m, n, &mut config);
        let mut v = *l;
        for (s, &a) in config.iter().enumerate() {
            if s != i {
                v += t[(a, eta[s])].ln();
            }
        }
        logs.push(v);
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical("conditioning has zero probability".into()));
    }
    let mut site_mass = vec![0.0; m];
    for (k, v) in logs.iter().enumerate() {
        decode(k, m, n, &mut config);
        site_mass[config[i]] += (v - max).exp();
    }
    let mut out: Vec<f64> = (0..channel.n_outputs())
        .map(|e| (0..m).map(|a| site_mass[a] * t[(a, e)]).sum())
        .collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    Ok(out)
}

/// First-layer single-site kernel `γ_i(·|σ_{V∖i})` of a discrete model.
pub fn site_specification(model: &InteractionModel, i: usize, sigma: &[usize]) -> Result<Vec<f64>> {
    let m = model.space().n_atoms().ok_or_else(|| Error::Domain("needs a discrete space".into()))?;
    let w = model.apriori().discrete_weights().expect("validated discrete measure");
    let boundary: Vec<(usize, usize)> = model.graph().neighbors(i).iter().map(|&j| (j, sigma[j])).collect();
    let mut out = vec![0.0; m];
    site_kernel(model, i, w, &boundary, &mut out);
    Ok(out)
}

/// Heat-kernel posterior metric `d′(η, η̄)` under the uniform a priori
/// measure by tensor quadrature, with a node-doubling error estimate.
pub fn empirical_posterior_metric(q: usize, t: f64, eta: &[f64], eta_bar: &[f64], nodes: usize) -> Result<QuadratureEstimate> {
    check_q(q)?;
    if !(t >= SMALL_TIME) {
        return domain(format!("t = {t} is below the kernel floor {SMALL_TIME}"));
    }
    if eta.len() != q || eta_bar.len() != q {
        return domain(format!("observations must lie in R^{q}"));
    }
    let x = euclidean(eta, eta_bar).min(2.0);
    posterior_metric_quadrature(&HeatKernel::new(q, t)?, x, nodes)
}

/// Observation table used by the soundness oracle: the `d′` matrix of a
/// discrete channel restricted to each site's observations.
pub fn conditioning_distance(d: &DMatrix<f64>, eta: &[usize], eta_bar: &[usize]) -> Vec<f64> {
    eta.iter().zip(eta_bar).map(|(&a, &b)| d[(a, b)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Graph, PairPotential};
    use approx::assert_abs_diff_eq;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let spec = RngSpec::new(7);
        let a: u64 = spec.rng(3).random();
        let b: u64 = spec.rng(3).random();
        let c: u64 = spec.rng(4).random();
        let d: u64 = spec.with_stream(1).rng(3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn zero_time_and_config_errors() {
        let spec = RngSpec::new(1);
        assert_eq!(simulate_height(3, 0.4, 0.0, 1e-3, &spec, 10).unwrap().mean, 0.4);
        assert!(matches!(simulate_height(3, 1.0, 0.1, 0.1, &spec, 10), Err(Error::Config(_))));
        assert!(simulate_height(3, 1.5, 0.1, 0.01, &spec, 10).is_err());
        assert!(first_passage_prob(2, 2.0, 0.1, 0.01, &spec, 10).is_err());
    }

    #[test]
    fn symmetric_start_has_zero_mean() {
        let e = simulate_height(3, 0.0, 0.3, 1e-2, &RngSpec::new(11), 4000).unwrap();
        assert!(e.agrees_with(0.0, 3.0, 0.0));
    }

    #[test]
    fn circle_survival_sanity() {
        // short times: the far barrier is invisible
        assert_abs_diff_eq!(circle_survival_exact(0.3, 0.01), single_barrier_survival(0.3, 0.01), epsilon = 1e-12);
        assert!(circle_survival_exact(0.8, 1.0) < single_barrier_survival(0.8, 1.0));
        assert!(circle_survival_exact(0.05, 1.0) < circle_survival_exact(0.3, 1.0));
    }

    #[test]
    fn transformed_kernel_trivial_cases() {
        let g = Graph::path(3);
        let pot = PairPotential::uniform(&g, 0.0, PairForm::Ising).unwrap();
        let m = InteractionModel::new(g.clone(), SingleSpinSpace::ising(), AprioriMeasure::Discrete(vec![0.3, 0.7]), pot).unwrap();
        let ch = DiscreteChannel::new(DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.1, 0.9])).unwrap();
        let k = exact_transformed_kernel(&m, &ch, 1, &[0, 0, 1]).unwrap();
        // α′(η) = Σ_σ α(σ) T[σ][η]
        assert_abs_diff_eq!(k[0], 0.3 * 0.8 + 0.7 * 0.1, epsilon = 1e-14);

        let pot = PairPotential::uniform(&g, 0.4, PairForm::Ising).unwrap();
        let m = InteractionModel::new(g, SingleSpinSpace::ising(), AprioriMeasure::Discrete(vec![0.3, 0.7]), pot).unwrap();
        let k = exact_transformed_kernel(&m, &DiscreteChannel::identity(2), 1, &[0, 0, 1]).unwrap();
        let s = site_specification(&m, 1, &[0, 0, 1]).unwrap();
        assert_abs_diff_eq!(k[0], s[0], epsilon = 1e-14);
    }

    #[test]
    fn enumeration_budget() {
        let g = Graph::path(8);
        let pot = PairPotential::uniform(&g, 0.1, PairForm::Rotator).unwrap();
        let m = InteractionModel::new(g, SingleSpinSpace::discretized_circle(12), AprioriMeasure::uniform_discrete(12), pot).unwrap();
        assert!(matches!(exact_site_marginals(&m), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn heat_bath_zero_coupling_is_uniform() {
        let g = Graph::path(3);
        let pot = PairPotential::uniform(&g, 0.0, PairForm::Rotator).unwrap();
        let m = InteractionModel::new(g, SingleSpinSpace::Sphere { q: 3 }, AprioriMeasure::SphereUniform, pot).unwrap();
        let s = heat_bath_sampler(&m, HeatBathConfig { sweeps: 200, burn_in: 10, chains: 8 }, &RngSpec::new(5)).unwrap();
        assert_eq!(s.acceptance_rate, Some(1.0));
        for c in 0..3 {
            let e = s.estimate(|x| match x {
                Configuration::Vectors(v) => v[1][c],
                Configuration::Atoms(_) => unreachable!(),
            }).unwrap();
            assert!(e.agrees_with(0.0, 3.0, 0.0));
        }
    }

    #[test]
    fn posterior_metric_refuses_tiny_time() {
        assert!(empirical_posterior_metric(2, 1e-6, &[1.0, 0.0], &[0.0, 1.0], 16).is_err());
        let e = empirical_posterior_metric(2, 0.5, &[1.0, 0.0], &[1.0, 0.0], 16).unwrap();
        assert_eq!(e.value, 0.0);
    }
}
