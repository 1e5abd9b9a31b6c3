//! Sphere analytics for rotator models: Legendre polynomials in dimension
//! `q`, spherical-harmonic dimensions, the heat kernel of Brownian motion on
//! `S^{q-1}` in the height coordinate, the posterior-metric profile `F_{q,t}`,
//! the short-time Gibbsianness threshold and the `Q̄(t)` matrix.
//!
//! Energy convention: `H = -Σ_{edges} J_ij σ_i·σ_j`, so every bound depends
//! on `|J_ij|` only and `δ(Φ_ij) = 2|J_ij|`.
//!
//! The odd-degree series for `F_{q,t}` is the composition of the reflection
//! identity `F = 2(1 - 2 P(Z_t ≤ 0))` with the closed-form lower-half
//! integrals; it is manifestly non-negative. An alternative printed form of
//! the same series carries the opposite overall sign and is not used.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dobrushin::neumann_series;
use crate::error::{domain, Error, Result};
use crate::model::{sphere_height_norm, ZonalDensity};
use crate::quadrature::GaussJacobi;
use crate::tolerances::{SERIES_MIN_DEGREE, SERIES_TERM, SMALL_TIME};

/// Hard ceiling on the truncation degree; reached only for absurdly small `t`.
const MAX_DEGREE: usize = 200_000;

fn check_q(q: usize) -> Result<()> {
    if q < 2 {
        return domain(format!("sphere dimension q must be >= 2 (got {q})"));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&s) {
        return domain(format!("argument {s} outside [-1, 1]"));
    }
    Ok(())
}

/// `P_n(q, s)`, normalized so that `P_n(q, 1) = 1`.
pub fn legendre(q: usize, n: usize, s: f64) -> Result<f64> {
    check_q(q)?;
    check_s(s)?;
    Ok(legendre_unchecked(q, n, s))
}

pub(crate) fn legendre_unchecked(q: usize, n: usize, s: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = s;
    let qf = q as f64;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + qf - 2.0) * s * cur - kf * prev) / (kf + qf - 2.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `[P_0(q, s), …, P_{n_max}(q, s)]`.
pub fn legendre_table(q: usize, n_max: usize, s: f64) -> Result<Vec<f64>> {
    check_q(q)?;
    check_s(s)?;
    let mut out = Vec::with_capacity(n_max + 1);
    fill_legendre(q, s, n_max + 1, &mut out);
    Ok(out)
}

fn fill_legendre(q: usize, s: f64, len: usize, out: &mut Vec<f64>) {
    out.clear();
    let qf = q as f64;
    if len == 0 {
        return;
    }
    out.push(1.0);
    if len == 1 {
        return;
    }
    out.push(s);
    for k in 1..len - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + qf - 2.0) * s * out[k] - kf * out[k - 1]) / (kf + qf - 2.0);
        out.push(next);
    }
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at each step: acc is C(n, i) * (n - i) / (i + 1) = C(n, i + 1)
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Dimension `N(q, n)` of degree-`n` spherical harmonics on `S^{q-1}`.
pub fn harmonic_dim(q: usize, n: usize) -> Result<u128> {
    check_q(q)?;
    if n == 0 {
        return Ok(1);
    }
    let (n, q) = (n as u64, q as u64);
    let hi = binomial(n + q - 1, q - 1);
    let lo = if n + q >= 3 { binomial(n + q - 3, q - 1) } else { Some(0) };
    match (hi, lo) {
        (Some(h), Some(l)) => Ok(h - l),
        _ => Err(Error::Numerical(format!("N({q}, {n}) overflows 128 bits"))),
    }
}

/// `ln N(q, n)` in floating point, for series coefficients.
fn ln_harmonic_dim(q: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (nf, qf) = (n as f64, q as f64);
    (2.0 * nf + qf - 2.0).ln() + libm::lgamma(nf + qf - 2.0) - libm::lgamma(nf + 1.0) - libm::lgamma(qf - 1.0)
}

/// `e^{-(q-1)t}`, the mean height at time `t` of the diffusion started at the pole.
pub fn mean_height(q: usize, t: f64) -> Result<f64> {
    check_q(q)?;
    if !(t >= 0.0) {
        return domain(format!("time must be non-negative (got {t})"));
    }
    Ok((-(q as f64 - 1.0) * t).exp())
}

/// `∫ |σ - η|² α_η(dσ) = 2(1 - e^{-(q-1)t})`.
pub fn second_moment_gap(q: usize, t: f64) -> Result<f64> {
    Ok(2.0 * (1.0 - mean_height(q, t)?))
}

/// Truncated Legendre expansion of the heat kernel on `S^{q-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatKernel {
    q: usize,
    t: f64,
    /// `e^{-n(n+q-2)t} N(q, n)` for `n = 0..=n_trunc`.
    #[serde(skip)]
    coeffs: Vec<f64>,
    /// Bound on `Σ_{n > n_trunc} e^{-n(n+q-2)t} N(q, n)`.
    tail: f64,
    small_time: bool,
    #[serde(skip)]
    height_norm: f64,
}

/// A kernel value with the certified truncation bound that applies to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
}

impl HeatKernel {
    pub fn new(q: usize, t: f64) -> Result<Self> {
        Self::with_tolerance(q, t, SERIES_TERM, SERIES_MIN_DEGREE)
    }

    pub fn with_tolerance(q: usize, t: f64, term_tol: f64, min_degree: usize) -> Result<Self> {
        check_q(q)?;
        if !(t > 0.0) || !t.is_finite() {
            return domain(format!("heat kernel needs a finite time t > 0 (got {t})"));
        }
        let qf = q as f64;
        let term = |n: usize| {
            let nf = n as f64;
            (-nf * (nf + qf - 2.0) * t + ln_harmonic_dim(q, n)).exp()
        };
        let mut coeffs = vec![1.0];
        let mut n = 1;
        loop {
            let a = term(n);
            coeffs.push(a);
            let decreasing = a <= coeffs[n - 1];
            if n >= min_degree && decreasing && a < term_tol {
                break;
            }
            if n >= MAX_DEGREE {
                return Err(Error::Numerical(format!("heat kernel series does not settle by degree {MAX_DEGREE}")));
            }
            n += 1;
        }
        // The terms past the peak decay at least geometrically; sum them until
        // they are negligible relative to the running tail.
        let mut tail = 0.0;
        let mut m = n + 1;
        loop {
            let a = term(m);
            tail += a;
            if a <= tail * 1e-17 || a == 0.0 {
                break;
            }
            m += 1;
        }
        Ok(Self {
            q,
            t,
            coeffs,
            tail,
            small_time: t < SMALL_TIME,
            height_norm: sphere_height_norm(q),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn truncation_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Truncation bound on the zonal density; multiply by the height
    /// normalization for the bound on [`Self::eval`].
    pub fn tail_bound(&self) -> f64 {
        self.tail
    }

    /// True when `t` is below the small-time floor where the series is long.
    pub fn small_time_warning(&self) -> bool {
        self.small_time
    }

    /// Series coefficients `e^{-n(n+q-2)t} N(q, n)`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Density of `σ_t·η` relative to the equidistribution when the diffusion
    /// starts at `η`: `Σ e^{-n(n+q-2)t} N(q, n) P_n(q, x)`.
    pub fn zonal_density(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        let qf = self.q as f64;
        let mut prev = 1.0;
        let mut sum = self.coeffs[0];
        if self.coeffs.len() == 1 {
            return sum;
        }
        let mut cur = x;
        sum += self.coeffs[1] * cur;
        for k in 1..self.coeffs.len() - 1 {
            let kf = k as f64;
            let next = ((2.0 * kf + qf - 2.0) * x * cur - kf * prev) / (kf + qf - 2.0);
            prev = cur;
            cur = next;
            sum += self.coeffs[k + 1] * cur;
        }
        sum
    }

    /// Height transition kernel `k_t(s, u)` relative to `(1 - u²)^{(q-3)/2} du`.
    pub fn eval(&self, s: f64, u: f64) -> Result<KernelValue> {
        check_s(s)?;
        check_s(u)?;
        let n = self.truncation_degree();
        let mut ps = Vec::with_capacity(n + 1);
        let mut pu = Vec::with_capacity(n + 1);
        fill_legendre(self.q, s, n + 1, &mut ps);
        fill_legendre(self.q, u, n + 1, &mut pu);
        let sum: f64 = self.coeffs.iter().zip(ps.iter().zip(&pu)).map(|(c, (a, b))| c * (a * b)).sum();
        Ok(KernelValue {
            value: self.height_norm * sum,
            tail_bound: self.height_norm * self.tail,
        })
    }

    /// `k_t(s, u)` at each `u`.
    pub fn profile(&self, s: f64, us: &[f64]) -> Result<Vec<KernelValue>> {
        us.iter().map(|&u| self.eval(s, u)).collect()
    }

    /// Posterior of `σ` given `η` at the pole, under the uniform a priori
    /// measure, on an `nodes`-point height grid.
    pub fn pole_posterior(&self, nodes: usize) -> Result<ZonalDensity> {
        ZonalDensity::from_fn(self.q, nodes, |u| self.zonal_density(u).max(0.0))
    }
}

/// `k_t(s, u)` with its truncation bound.
pub fn heat_kernel(q: usize, t: f64, s: f64, u: f64) -> Result<KernelValue> {
    HeatKernel::new(q, t)?.eval(s, u)
}

/// `∫_{-1}^0 P_{2m+1}(q, s) (1 - s²)^{(q-3)/2} ds = (-1)^m Π_{i=0}^m (2i-1)/(q+2i-1)`.
pub fn odd_half_integral(q: usize, m: usize) -> f64 {
    let qf = q as f64;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * (0..=m).map(|i| (2.0 * i as f64 - 1.0) / (qf + 2.0 * i as f64 - 1.0)).product::<f64>()
}

fn check_x_t(x: f64, t: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&x) {
        return domain(format!("chordal distance {x} outside [0, 2]"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("time must be finite and positive (got {t})"));
    }
    Ok(())
}

/// Upper bounds on `F_{q,t}(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FUpper {
    /// `4 P(0 ≤ G ≤ arcsin(x/2)/√(2t))`
    pub arcsin_branch: f64,
    /// `√π x / (2√t)`
    pub linear_branch: f64,
    /// Minimum of both branches and the ceiling 2.
    pub value: f64,
}

/// `P(0 ≤ G ≤ u)` for a standard normal `G`.
pub fn normal_half_mass(u: f64) -> f64 {
    0.5 * libm::erf(u / std::f64::consts::SQRT_2)
}

pub fn f_upper_branches(x: f64, t: f64) -> Result<FUpper> {
    check_x_t(x, t)?;
    let arcsin_branch = 4.0 * normal_half_mass((x / 2.0).asin() / (2.0 * t).sqrt());
    let linear_branch = std::f64::consts::PI.sqrt() * x / (2.0 * t.sqrt());
    Ok(FUpper {
        arcsin_branch,
        linear_branch,
        value: arcsin_branch.min(linear_branch).min(2.0),
    })
}

/// `min{4 P(0 ≤ G ≤ arcsin(x/2)/√(2t)), √π x/(2√t), 2}`. The bound does not
/// depend on `q ≥ 2`.
pub fn f_upper(q: usize, t: f64, x: f64) -> Result<f64> {
    check_q(q)?;
    Ok(f_upper_branches(x, t)?.value)
}

/// `F_{q,t}(x)` by its odd-degree Legendre series, with a truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FSeries {
    pub value: f64,
    /// Value before clamping to `[0, 2]`.
    pub raw: f64,
    pub tail_bound: f64,
    pub truncation_degree: usize,
}

pub fn f_series_detailed(kernel: &HeatKernel, x: f64) -> Result<FSeries> {
    check_x_t(x, kernel.t())?;
    let q = kernel.q();
    let n = kernel.truncation_degree();
    let mut p = Vec::with_capacity(n + 1);
    fill_legendre(q, x / 2.0, n + 1, &mut p);
    let c = kernel.coefficients();
    let mut sum = 0.0;
    let mut deg = 1;
    while deg <= n {
        sum += c[deg] * p[deg] * odd_half_integral(q, (deg - 1) / 2);
        deg += 2;
    }
    let prefactor = 4.0 * sphere_height_norm(q);
    let raw = -prefactor * sum;
    // |I_{q,m}| ≤ 1/(q-1) and |P_n| ≤ 1
    let tail_bound = prefactor * kernel.tail_bound() / (q as f64 - 1.0);
    Ok(FSeries {
        value: raw.clamp(0.0, 2.0),
        raw,
        tail_bound,
        truncation_degree: n,
    })
}

pub fn f_series(q: usize, t: f64, x: f64) -> Result<f64> {
    check_x_t(x, t)?;
    Ok(f_series_detailed(&HeatKernel::new(q, t)?, x)?.value)
}

/// Quadrature value with a node-doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes: usize,
}

/// Posterior metric `d′(η, η̄) = ∫ |α_η - α_η̄|` of the heat-kernel channel
/// under the uniform a priori measure, for `|η - η̄| = x`.
///
/// The two conditioning points are placed symmetrically about the
/// hyperplane `u = 0`; the integral over the half `u > 0` is done by a
/// tensor Gauss–Legendre rule in the polar angle of `u` and the polar angle
/// of the transverse coordinate. It does not use the series for `F`.
pub fn posterior_metric_quadrature(kernel: &HeatKernel, x: f64, nodes: usize) -> Result<QuadratureEstimate> {
    check_x_t(x, kernel.t())?;
    if nodes < 4 {
        return domain("posterior-metric quadrature needs at least 4 nodes");
    }
    if x == 0.0 {
        return Ok(QuadratureEstimate { value: 0.0, error_estimate: 0.0, nodes });
    }
    let coarse = metric_tensor_rule(kernel, x, nodes)?;
    let fine = metric_tensor_rule(kernel, x, 2 * nodes)?;
    Ok(QuadratureEstimate {
        value: fine.min(2.0),
        error_estimate: (fine - coarse).abs(),
        nodes: 2 * nodes,
    })
}

fn angle_rule(n: usize, upper: f64, power: i32) -> Result<(Vec<f64>, Vec<f64>)> {
    let gl = GaussJacobi::legendre(n)?;
    let half = upper / 2.0;
    let mut ang = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for (&y, &wy) in gl.nodes().iter().zip(gl.weights()) {
        let a = half * (y + 1.0);
        ang.push(a);
        w.push(wy * a.sin().powi(power));
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok((ang, w))
}

fn metric_tensor_rule(kernel: &HeatKernel, x: f64, n: usize) -> Result<f64> {
    let q = kernel.q();
    let z = x / 2.0;
    let c = (1.0 - z * z).max(0.0).sqrt();
    let (psi, wpsi) = angle_rule(n, std::f64::consts::FRAC_PI_2, q as i32 - 2)?;
    let (v, wv): (Vec<f64>, Vec<f64>) = if q == 2 {
        (vec![-1.0, 1.0], vec![0.5, 0.5])
    } else {
        let (phi, w) = angle_rule(n, std::f64::consts::PI, q as i32 - 3)?;
        (phi.iter().map(|p| p.cos()).collect(), w)
    };
    let mut acc = 0.0;
    for (&a, &wa) in psi.iter().zip(&wpsi) {
        let (r, u) = a.sin_cos();
        let along = u * z;
        let mut inner = 0.0;
        for (&vv, &wvv) in v.iter().zip(&wv) {
            let across = r * vv * c;
            inner += wvv * (kernel.zonal_density(across + along) - kernel.zonal_density(across - along)).abs();
        }
        acc += wa * inner;
    }
    Ok(acc)
}

/// Short-time Gibbsianness threshold for a rotator coupling matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub q: usize,
    /// `sup_i Σ_j e^{|J_ij|} |J_ij|`
    pub a: f64,
    /// `None` encodes `t* = +∞`.
    pub t_star: Option<f64>,
    pub t_star_infinite: bool,
    pub query_t: Option<f64>,
    pub margin: Option<f64>,
    pub certified: Option<bool>,
}

pub fn coupling_a(j: &DMatrix<f64>) -> f64 {
    (0..j.nrows())
        .map(|i| j.row(i).iter().map(|v| v.abs().exp() * v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `1 - √2 a (1 - e^{-(q-1)t})^{1/2}`.
pub fn threshold_margin(a: f64, q: usize, t: f64) -> f64 {
    1.0 - std::f64::consts::SQRT_2 * a * (1.0 - (-(q as f64 - 1.0) * t).exp()).max(0.0).sqrt()
}

pub fn gibbs_time_threshold(j: &DMatrix<f64>, q: usize, query_t: Option<f64>) -> Result<ThresholdReport> {
    check_q(q)?;
    if j.iter().any(|v| !v.is_finite()) {
        return domain("couplings must be finite");
    }
    if let Some(t) = query_t {
        if !(t >= 0.0) {
            return domain(format!("query time must be non-negative (got {t})"));
        }
    }
    let a = coupling_a(j);
    let t_star = if 2.0 * a * a <= 1.0 {
        None
    } else {
        Some(-(1.0 - 1.0 / (2.0 * a * a)).ln() / (q as f64 - 1.0))
    };
    let margin = query_t.map(|t| threshold_margin(a, q, t));
    Ok(ThresholdReport {
        q,
        a,
        t_star,
        t_star_infinite: t_star.is_none(),
        query_t,
        margin,
        certified: margin.map(|m| m > 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QBarBranch {
    /// `√(π/t) Q_ij(t)`
    Series,
    /// `e^{4Σ_l |J_jl|} - 1`
    Ceiling,
}

/// `Q̄(t)` and its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarQMatrix {
    pub q: usize,
    pub t: f64,
    pub margin: f64,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub c_bar: DMatrix<f64>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub d_bar: DMatrix<f64>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub q_t: DMatrix<f64>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub series_branch: DMatrix<f64>,
    pub ceiling_branch: Vec<f64>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub q_bar: DMatrix<f64>,
    pub active: Vec<Vec<QBarBranch>>,
}

/// `Q̄_ij(t) = ½ min{√(π/t) Q_ij(t), e^{4Σ_l|J_jl|} - 1}` with
/// `Q_ij(t) = 8 e^{4 sup_i Σ_j |J_ij|} Σ_k |J_ik| D̄_kj(t)` and
/// `D̄(t) = (I - √2 λ A)^{-1}`, `λ = (1 - e^{-(q-1)t})^{1/2}`,
/// `A_ij = e^{|J_ij|} |J_ij|`.
///
/// The factor `√2` in `D̄` makes `√2 λ A` the conditional Dobrushin bound
/// itself, so this agrees with the generic two-layer pipeline.
pub fn bar_q_matrix(j: &DMatrix<f64>, q: usize, t: f64) -> Result<BarQMatrix> {
    check_q(q)?;
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("Q̄(t) needs a finite time t > 0 (got {t})"));
    }
    if !j.is_square() {
        return domain("coupling matrix must be square");
    }
    let n = j.nrows();
    let a = coupling_a(j);
    let margin = threshold_margin(a, q, t);
    if margin <= 0.0 {
        return Err(Error::CertificateFailure {
            reason: format!("t = {t} is not below the Gibbsianness threshold"),
            value: margin,
        });
    }
    let lambda = (1.0 - (-(q as f64 - 1.0) * t).exp()).sqrt();
    let c_bar = j.map(|v| std::f64::consts::SQRT_2 * lambda * v.abs().exp() * v.abs());
    let d_bar = neumann_series(&c_bar)?.d;
    let abs_j = j.map(f64::abs);
    let sup_row = (0..n).map(|i| abs_j.row(i).sum()).fold(0.0, f64::max);
    let mut q_t = (8.0 * (4.0 * sup_row).exp()) * (&abs_j * &d_bar);
    q_t.fill_diagonal(0.0);
    let root = (std::f64::consts::PI / t).sqrt();
    let series_branch = q_t.map(|v| root * v);
    let ceiling_branch: Vec<f64> = (0..n).map(|jj| (4.0 * abs_j.row(jj).sum()).exp() - 1.0).collect();
    let mut q_bar = DMatrix::zeros(n, n);
    let mut active = vec![vec![QBarBranch::Series; n]; n];
    for r in 0..n {
        for col in 0..n {
            let s = series_branch[(r, col)];
            let cap = ceiling_branch[col];
            if cap < s {
                active[r][col] = QBarBranch::Ceiling;
            }
            q_bar[(r, col)] = 0.5 * s.min(cap);
        }
    }
    Ok(BarQMatrix {
        q,
        t,
        margin,
        c_bar,
        d_bar,
        q_t,
        series_branch,
        ceiling_branch,
        q_bar,
        active,
    })
}
