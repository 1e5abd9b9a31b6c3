//! `gibbs-cert` command-line front end.
//!
//! Exit codes: 0 = ran and certified, 2 = ran but the certificate was not
//! granted (the report is still written), 1 = error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gibbs_cert::dobrushin::{
    dobrushin_bound_lipschitz, dobrushin_bound_linear, dobrushin_bound_quadratic, exact_dobrushin_matrix,
    lipschitz_matrix, BoundFlavor, ConcentrationReport, DobrushinBound, TripleNorms,
};
use gibbs_cert::model::{InteractionModel, SingleSpinSpace};
use gibbs_cert::modelfile::{parse_model_file, ModelFile, SimulateSpec};
use gibbs_cert::quadrature::DEFAULT_NODES;
use gibbs_cert::report::{columns_csv, matrix_csv, write_file, RunReport};
use gibbs_cert::rotator::{
    bar_q_matrix, f_series_detailed, f_upper, gibbs_time_threshold, posterior_metric_quadrature, BarQMatrix,
    HeatKernel, ThresholdReport,
};
use gibbs_cert::simulate::{
    exact_transformed_kernel, first_passage_calibrated, heat_bath_sampler, simulate_height_calibrated,
    single_barrier_survival, CalibratedEstimate, Configuration, HeatBathConfig, RngSpec, SdeConfig, DEFAULT_DT,
    DEFAULT_PATHS,
};
use gibbs_cert::two_layer::{
    continuity_certificate, default_flavor, posterior_metric_table, Channel, ContinuityCertificate, QProvenance,
};
use gibbs_cert::Error;
use rand::Rng;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "gibbs-cert", version, about = "Gibbsianness certificates for lattice spin systems")]
struct Cli {
    #[command(subcommand)]
    task: Task,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every task. Each falls back to the matching
/// `GIBBS_CERT_*` environment variable; an explicit flag wins.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Model description file (TOML).
    #[arg(long, global = true, env = "GIBBS_CERT_MODEL")]
    model: Option<PathBuf>,
    /// Output directory for report.json and CSV tables.
    #[arg(long, global = true, env = "GIBBS_CERT_OUT", default_value = ".")]
    out: PathBuf,
    /// RNG seed; mandatory for stochastic tasks.
    #[arg(long, global = true, env = "GIBBS_CERT_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "GIBBS_CERT_PATHS")]
    paths: Option<usize>,
    #[arg(long, global = true, env = "GIBBS_CERT_DT")]
    dt: Option<f64>,
    /// Gauss nodes per axis for posterior-metric quadrature.
    #[arg(long, global = true, env = "GIBBS_CERT_QUAD_NODES")]
    quad_nodes: Option<usize>,
    #[arg(long, global = true, env = "GIBBS_CERT_FLAVOR")]
    flavor: Option<BoundFlavor>,
}

#[derive(Subcommand, Debug)]
enum Task {
    /// Single-layer Dobrushin bound, or the two-layer continuity
    /// certificate when the model file has a [channel] section.
    Certify {
        /// Q-matrix prefactor.
        #[arg(long, env = "GIBBS_CERT_PROVENANCE", default_value = "exact")]
        provenance: QProvenance,
    },
    /// Short-time Gibbsianness threshold t* for a rotator model.
    RotatorThreshold {
        /// Also check a specific time.
        #[arg(long)]
        t: Option<f64>,
    },
    /// The Q̄(t) matrix for a rotator model under the heat-kernel channel.
    RotatorQbar {
        /// Time; defaults to the heat-kernel channel time in the model file.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Run the [simulate] section of the model file.
    Simulate,
    /// Exhaustive-enumeration checks of the bounds on a small discrete model.
    Oracle {
        /// Random conditioning pairs for the continuity check.
        #[arg(long, default_value_t = 200)]
        pairs: usize,
    },
}

impl Task {
    fn name(&self) -> &'static str {
        match self {
            Task::Certify { .. } => "certify",
            Task::RotatorThreshold { .. } => "rotator-threshold",
            Task::RotatorQbar { .. } => "rotator-qbar",
            Task::Simulate => "simulate",
            Task::Oracle { .. } => "oracle",
        }
    }
}

struct Loaded {
    file: ModelFile,
    bytes: Vec<u8>,
}

fn load(common: &Common) -> anyhow::Result<Loaded> {
    let Some(path) = &common.model else { bail!("--model is required") };
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let file = parse_model_file(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(Loaded { file, bytes })
}

fn emit<T: Serialize>(out: &Path, task: &str, input: &[u8], seed: Option<u64>, start: Instant, results: T) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let report = RunReport::new(task, Some(input), seed, start.elapsed().as_secs_f64(), results);
    write_file(&out.join("report.json"), &report.to_json()?)?;
    Ok(())
}

fn sphere_q(model: &InteractionModel) -> anyhow::Result<usize> {
    match model.space() {
        SingleSpinSpace::Sphere { q } => Ok(*q),
        _ => bail!("rotator tasks need a sphere single-spin space"),
    }
}

#[derive(Serialize)]
struct SingleLayer {
    flavor: BoundFlavor,
    bound: DobrushinBound,
    triple_norms: Option<TripleNorms>,
    concentration: Option<ConcentrationReport>,
    certified: bool,
}

fn single_layer_bound(model: &InteractionModel, flavor: BoundFlavor) -> anyhow::Result<DobrushinBound> {
    Ok(match flavor {
        BoundFlavor::Linear => dobrushin_bound_linear(model)?,
        BoundFlavor::Quadratic => dobrushin_bound_quadratic(model)?,
        BoundFlavor::Lipschitz => dobrushin_bound_lipschitz(model, &lipschitz_matrix(model)?)?,
    })
}

fn certify(common: &Common, provenance: QProvenance, start: Instant) -> anyhow::Result<bool> {
    let loaded = load(common)?;
    let model = &loaded.file.model;
    let labels = Some(loaded.file.vertex_labels.as_slice());
    match &loaded.file.channel {
        None => {
            let flavor = common.flavor.unwrap_or(if model.is_sphere() { BoundFlavor::Lipschitz } else { BoundFlavor::Linear });
            let bound = single_layer_bound(model, flavor)?;
            let certified = bound.certified();
            let results = SingleLayer {
                flavor,
                triple_norms: gibbs_cert::dobrushin::dev_triple_norms(model).ok(),
                concentration: ConcentrationReport::for_model(model).ok(),
                bound,
                certified,
            };
            std::fs::create_dir_all(&common.out)?;
            write_file(&common.out.join("c.csv"), &matrix_csv(&results.bound.matrix, labels))?;
            emit(&common.out, "certify", &loaded.bytes, None, start, results)?;
            Ok(certified)
        }
        Some(channel) => {
            let flavor = common.flavor.unwrap_or_else(|| default_flavor(model, channel));
            let cert: ContinuityCertificate = continuity_certificate(model, channel, flavor, provenance)?;
            std::fs::create_dir_all(&common.out)?;
            write_file(&common.out.join("c_bar.csv"), &matrix_csv(&cert.c_bar, labels))?;
            if let Some(q) = &cert.q {
                write_file(&common.out.join("q.csv"), &matrix_csv(&q.entries, labels))?;
            }
            let certified = cert.certified;
            emit(&common.out, "certify", &loaded.bytes, None, start, cert)?;
            Ok(certified)
        }
    }
}

/// Grid `0.05, 0.10, …, 2.00` of chord lengths (the F-curve support).
fn chord_grid() -> Vec<f64> {
    (1..=40).map(|k| 0.05 * k as f64).collect()
}

fn write_profiles(out: &Path, q: usize, t: f64, nodes: usize) -> anyhow::Result<()> {
    let kernel = HeatKernel::new(q, t)?;
    let xs = chord_grid();
    let mut value = Vec::new();
    let mut tail = Vec::new();
    let mut upper = Vec::new();
    let mut quad = Vec::new();
    for &x in &xs {
        let f = f_series_detailed(&kernel, x)?;
        value.push(f.value);
        tail.push(f.tail_bound);
        upper.push(f_upper(q, t, x)?);
        quad.push(posterior_metric_quadrature(&kernel, x, nodes)?.value);
    }
    write_file(
        &out.join("f_profile.csv"),
        &columns_csv(&["x", "value", "tail_bound", "upper_bound", "quadrature"], &[&xs, &value, &tail, &upper, &quad]),
    )?;
    let us: Vec<f64> = (0..=200).map(|k| -1.0 + 0.01 * k as f64).collect();
    let prof = kernel.profile(1.0, &us)?;
    let kv: Vec<f64> = prof.iter().map(|p| p.value).collect();
    let kt: Vec<f64> = prof.iter().map(|p| p.tail_bound).collect();
    write_file(&out.join("kernel_profile.csv"), &columns_csv(&["u", "value", "tail_bound"], &[&us, &kv, &kt]))?;
    Ok(())
}

fn rotator_threshold(common: &Common, t: Option<f64>, start: Instant) -> anyhow::Result<bool> {
    let loaded = load(common)?;
    let model = &loaded.file.model;
    let q = sphere_q(model)?;
    let report: ThresholdReport = gibbs_time_threshold(model.couplings(), q, t)?;
    std::fs::create_dir_all(&common.out)?;
    let profile_t = t.or(report.t_star).filter(|t| t.is_finite() && *t > 0.0);
    if let Some(pt) = profile_t {
        write_profiles(&common.out, q, pt, common.quad_nodes.unwrap_or(DEFAULT_NODES))?;
    }
    let certified = report.certified.unwrap_or(true);
    emit(&common.out, "rotator-threshold", &loaded.bytes, None, start, report)?;
    Ok(certified)
}

#[derive(Serialize)]
#[serde(untagged)]
enum QbarOutcome {
    Certified(BarQMatrix),
    Refused { certified: bool, q: usize, t: f64, margin: f64, reason: String },
}

fn rotator_qbar(common: &Common, t: Option<f64>, start: Instant) -> anyhow::Result<bool> {
    let loaded = load(common)?;
    let model = &loaded.file.model;
    let q = sphere_q(model)?;
    let t = match (t, &loaded.file.channel) {
        (Some(t), _) => t,
        (None, Some(Channel::HeatKernel { t, .. })) => *t,
        _ => bail!("rotator-qbar needs --t or a heat-kernel [channel] section"),
    };
    std::fs::create_dir_all(&common.out)?;
    write_profiles(&common.out, q, t, common.quad_nodes.unwrap_or(DEFAULT_NODES))?;
    let labels = Some(loaded.file.vertex_labels.as_slice());
    let (outcome, certified) = match bar_q_matrix(model.couplings(), q, t) {
        Ok(m) => {
            write_file(&common.out.join("c_bar.csv"), &matrix_csv(&m.c_bar, labels))?;
            write_file(&common.out.join("q.csv"), &matrix_csv(&m.q_t, labels))?;
            write_file(&common.out.join("qbar.csv"), &matrix_csv(&m.q_bar, labels))?;
            (QbarOutcome::Certified(m), true)
        }
        Err(Error::CertificateFailure { reason, value }) => {
            (QbarOutcome::Refused { certified: false, q, t, margin: value, reason }, false)
        }
        Err(e) => return Err(e.into()),
    };
    emit(&common.out, "rotator-qbar", &loaded.bytes, None, start, outcome)?;
    Ok(certified)
}

fn required_seed(common: &Common, spec: Option<&SimulateSpec>) -> anyhow::Result<u64> {
    common
        .seed
        .or(spec.and_then(|s| s.seed))
        .context("this task is stochastic: pass --seed (or GIBBS_CERT_SEED, or seed in [simulate])")
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum SimulateOutcome {
    Height { q: usize, z0: f64, t: f64, dt: f64, paths: usize, target: f64, estimate: CalibratedEstimate, agrees: bool },
    FirstPassage {
        q: usize,
        phi0: f64,
        t: f64,
        dt: f64,
        paths: usize,
        bound: f64,
        estimate: CalibratedEstimate,
        dominated: bool,
    },
    HeatBath { config: HeatBathConfig, acceptance_rate: Option<f64>, low_acceptance_warning: bool, site_means: Vec<Vec<f64>>, site_std_errors: Vec<Vec<f64>> },
}

fn simulate(common: &Common, start: Instant) -> anyhow::Result<bool> {
    let loaded = load(common)?;
    let Some(spec) = loaded.file.simulate.clone() else { bail!("model file has no [simulate] section") };
    let seed = required_seed(common, Some(&spec))?;
    let rng = RngSpec::new(seed);
    let paths = common.paths.or(spec.paths).unwrap_or(DEFAULT_PATHS);
    let dt = common.dt.or(spec.dt).unwrap_or(DEFAULT_DT);
    let q = spec.q.or_else(|| loaded.file.model.sphere_dim()).unwrap_or(2);
    let need_t = || spec.t.context("[simulate] t: missing required field");
    let (outcome, ok) = match spec.kind.as_str() {
        "height" => {
            let t = need_t()?;
            let z0 = spec.z0.unwrap_or(1.0);
            let estimate = simulate_height_calibrated(q, z0, SdeConfig::new(dt, t)?, &rng, paths)?;
            let target = gibbs_cert::rotator::mean_height(q, t)? * z0;
            let agrees = estimate.agrees_with(target);
            (SimulateOutcome::Height { q, z0, t, dt, paths, target, estimate, agrees }, agrees)
        }
        "first-passage" => {
            let t = need_t()?;
            let phi0 = spec.phi0.context("[simulate] phi0: missing required field")?;
            let estimate = first_passage_calibrated(q, phi0, SdeConfig::new(dt, t)?, &rng, paths)?;
            let bound = single_barrier_survival(phi0, t);
            let dominated = estimate.estimate.mean <= bound + estimate.tolerance();
            (SimulateOutcome::FirstPassage { q, phi0, t, dt, paths, bound, estimate, dominated }, dominated)
        }
        "heat-bath" => {
            let config = HeatBathConfig {
                sweeps: spec.sweeps.unwrap_or(1000),
                burn_in: spec.burn_in.unwrap_or(100),
                chains: spec.chains.unwrap_or(8),
            };
            let model = &loaded.file.model;
            let samples = heat_bath_sampler(model, config, &rng)?;
            let dims = match model.space() {
                SingleSpinSpace::Sphere { q } => *q,
                other => other.n_atoms().unwrap_or(0),
            };
            let mut site_means = Vec::new();
            let mut site_std_errors = Vec::new();
            for i in 0..model.n_sites() {
                let (mut m, mut s) = (Vec::new(), Vec::new());
                for c in 0..dims {
                    // sphere: mean of coordinate c; discrete: frequency of atom c
                    let e = samples.estimate(|cfg| match cfg {
                        Configuration::Vectors(v) => v[i][c],
                        Configuration::Atoms(a) => f64::from(u8::from(a[i] == c)),
                    })?;
                    m.push(e.mean);
                    s.push(e.std_error);
                }
                site_means.push(m);
                site_std_errors.push(s);
            }
            let warn = samples.low_acceptance_warning;
            (
                SimulateOutcome::HeatBath {
                    config,
                    acceptance_rate: samples.acceptance_rate,
                    low_acceptance_warning: warn,
                    site_means,
                    site_std_errors,
                },
                true,
            )
        }
        other => bail!("[simulate] kind: unknown value '{other}' (expected height, first-passage or heat-bath)"),
    };
    emit(&common.out, "simulate", &loaded.bytes, Some(seed), start, outcome)?;
    Ok(ok)
}

#[derive(Serialize)]
struct OracleOutcome {
    exact: Vec<Vec<f64>>,
    linear_bound: Vec<Vec<f64>>,
    quadratic_bound: Vec<Vec<f64>>,
    linear_max_excess: f64,
    quadratic_max_excess: f64,
    continuity: Option<ContinuityProbe>,
    passed: bool,
}

#[derive(Serialize)]
struct ContinuityProbe {
    pairs: usize,
    checks: usize,
    violations: usize,
    max_ratio: f64,
    certified: bool,
}

fn max_excess(exact: &nalgebra::DMatrix<f64>, bound: &nalgebra::DMatrix<f64>) -> f64 {
    exact.iter().zip(bound.iter()).map(|(e, b)| e - b).fold(f64::NEG_INFINITY, f64::max)
}

fn oracle(common: &Common, pairs: usize, start: Instant) -> anyhow::Result<bool> {
    let loaded = load(common)?;
    let seed = required_seed(common, loaded.file.simulate.as_ref())?;
    let model = &loaded.file.model;
    let exact = exact_dobrushin_matrix(model)?;
    let lin = dobrushin_bound_linear(model)?.matrix;
    let quad = dobrushin_bound_quadratic(model)?.matrix;
    let linear_max_excess = max_excess(&exact, &lin);
    let quadratic_max_excess = max_excess(&exact, &quad);
    let continuity = match &loaded.file.channel {
        Some(ch) => match ch.resolve(model)? {
            Channel::Discrete(dc) => {
                let flavor = common.flavor.unwrap_or(BoundFlavor::Linear);
                let cert = continuity_certificate(model, &Channel::Discrete(dc.clone()), flavor, QProvenance::Exact)?;
                let weights = model.apriori().discrete_weights().context("discrete a priori weights")?.to_vec();
                let d = posterior_metric_table(&weights, &dc)?;
                let mut probe = ContinuityProbe { pairs, checks: 0, violations: 0, max_ratio: 0.0, certified: cert.certified };
                if let Some(qm) = &cert.q {
                    let mut r = RngSpec::new(seed).rng(0);
                    let (n, m) = (model.n_sites(), dc.n_outputs());
                    for _ in 0..pairs {
                        let eta: Vec<usize> = (0..n).map(|_| r.random_range(0..m)).collect();
                        let eta_bar: Vec<usize> = (0..n).map(|_| r.random_range(0..m)).collect();
                        for i in 0..n {
                            let a = exact_transformed_kernel(model, &dc, i, &eta)?;
                            let b = exact_transformed_kernel(model, &dc, i, &eta_bar)?;
                            let lhs: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
                            let rhs: f64 = (0..n).filter(|&j| j != i).map(|j| qm.entries[(i, j)] * d[(eta[j], eta_bar[j])]).sum();
                            probe.checks += 1;
                            if lhs > rhs + 1e-12 {
                                probe.violations += 1;
                            }
                            if rhs > 0.0 {
                                probe.max_ratio = probe.max_ratio.max(lhs / rhs);
                            }
                        }
                    }
                }
                Some(probe)
            }
            _ => None,
        },
        None => None,
    };
    let passed = linear_max_excess <= 1e-10
        && quadratic_max_excess <= 1e-10
        && continuity.as_ref().is_none_or(|c| c.certified && c.violations == 0);
    let rows = gibbs_cert::report::matrix_rows;
    let results = OracleOutcome {
        exact: rows(&exact),
        linear_bound: rows(&lin),
        quadratic_bound: rows(&quad),
        linear_max_excess,
        quadratic_max_excess,
        continuity,
        passed,
    };
    std::fs::create_dir_all(&common.out)?;
    write_file(&common.out.join("exact_c.csv"), &matrix_csv(&exact, Some(&loaded.file.vertex_labels)))?;
    emit(&common.out, "oracle", &loaded.bytes, Some(seed), start, results)?;
    Ok(passed)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let start = Instant::now();
    let c = &cli.common;
    match &cli.task {
        Task::Certify { provenance } => certify(c, *provenance, start),
        Task::RotatorThreshold { t } => rotator_threshold(c, *t, start),
        Task::RotatorQbar { t } => rotator_qbar(c, *t, start),
        Task::Simulate => simulate(c, start),
        Task::Oracle { pairs } => oracle(c, *pairs, start),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}: certificate not granted (see report.json)", cli.task.name());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
