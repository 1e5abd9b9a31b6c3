//! Browser playground for the rotator analytics. Each export returns a JSON
//! string that `www/index.html` plots on a canvas.

use gibbs_cert::model::Graph;
use gibbs_cert::rotator::{bar_q_matrix, f_series_detailed, f_upper_branches, gibbs_time_threshold, HeatKernel};
use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct FCurves {
    pub x: Vec<f64>,
    pub series: Vec<f64>,
    pub tail_bound: Vec<f64>,
    pub arcsin_branch: Vec<f64>,
    pub linear_branch: Vec<f64>,
}

/// The posterior-metric bound F and its two elementary upper bounds on a
/// uniform chord-length grid over (0, 2].
pub fn f_curves(q: usize, t: f64, points: usize) -> Result<FCurves, String> {
    let kernel = HeatKernel::new(q, t).map_err(|e| e.to_string())?;
    let points = points.clamp(2, 2000);
    let mut out = FCurves { x: vec![], series: vec![], tail_bound: vec![], arcsin_branch: vec![], linear_branch: vec![] };
    for k in 1..=points {
        let x = 2.0 * k as f64 / points as f64;
        let f = f_series_detailed(&kernel, x).map_err(|e| e.to_string())?;
        let b = f_upper_branches(x, t).map_err(|e| e.to_string())?;
        out.x.push(x);
        out.series.push(f.value);
        out.tail_bound.push(f.tail_bound);
        out.arcsin_branch.push(b.arcsin_branch.min(2.0));
        out.linear_branch.push(b.linear_branch.min(2.0));
    }
    Ok(out)
}

#[derive(Serialize)]
pub struct KernelProfile {
    pub u: Vec<f64>,
    pub value: Vec<f64>,
    pub tail_bound: Vec<f64>,
    pub truncation_degree: usize,
    pub small_time_warning: bool,
}

/// Heat-kernel density `u ↦ k_t(1, u)` (started at the pole) against height.
pub fn kernel_profile(q: usize, t: f64, points: usize) -> Result<KernelProfile, String> {
    let kernel = HeatKernel::new(q, t).map_err(|e| e.to_string())?;
    let points = points.clamp(2, 4000);
    let u: Vec<f64> = (0..=points).map(|k| -1.0 + 2.0 * k as f64 / points as f64).collect();
    let prof = kernel.profile(1.0, &u).map_err(|e| e.to_string())?;
    Ok(KernelProfile {
        value: prof.iter().map(|p| p.value).collect(),
        tail_bound: prof.iter().map(|p| p.tail_bound).collect(),
        u,
        truncation_degree: kernel.truncation_degree(),
        small_time_warning: kernel.small_time_warning(),
    })
}

#[derive(Serialize)]
pub struct ThresholdView {
    pub a: f64,
    pub t_star: Option<f64>,
    pub margin: Option<f64>,
    pub certified: bool,
    /// `Q̄` row of site 0 on a `side × side` torus, by lattice distance
    /// (`None` past the threshold).
    pub qbar_by_distance: Option<Vec<f64>>,
}

fn torus_couplings(side: usize, j: f64) -> Result<DMatrix<f64>, String> {
    let g = Graph::torus(side, side).map_err(|e| e.to_string())?;
    let n = g.n_vertices();
    let mut m = DMatrix::zeros(n, n);
    for &(a, b) in g.edges() {
        m[(a, b)] = j;
        m[(b, a)] = j;
    }
    Ok(m)
}

/// Threshold `t*` and, when certified, the `Q̄(t)` decay profile for a
/// uniform rotator coupling `j` on a torus.
pub fn threshold_view(j: f64, q: usize, t: f64, side: usize) -> Result<ThresholdView, String> {
    let side = side.clamp(3, 12);
    let jm = torus_couplings(side, j)?;
    let r = gibbs_time_threshold(&jm, q, Some(t)).map_err(|e| e.to_string())?;
    let certified = r.certified.unwrap_or(false);
    let qbar_by_distance = if certified {
        let b = bar_q_matrix(&jm, q, t).map_err(|e| e.to_string())?;
        let torus_dist = |k: usize| {
            let (x, y) = (k % side, k / side);
            x.min(side - x) + y.min(side - y)
        };
        let max_d = (0..side * side).map(torus_dist).max().unwrap_or(0);
        let mut best = vec![0.0f64; max_d + 1];
        for k in 0..side * side {
            let d = torus_dist(k);
            best[d] = best[d].max(b.q_bar[(0, k)]);
        }
        Some(best)
    } else {
        None
    };
    Ok(ThresholdView { a: r.a, t_star: r.t_star, margin: r.margin, certified, qbar_by_distance })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fCurves)]
pub fn f_curves_js(q: usize, t: f64, points: usize) -> Result<String, JsValue> {
    to_js(f_curves(q, t, points))
}

#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile_js(q: usize, t: f64, points: usize) -> Result<String, JsValue> {
    to_js(kernel_profile(q, t, points))
}

#[wasm_bindgen(js_name = thresholdView)]
pub fn threshold_view_js(j: f64, q: usize, t: f64, side: usize) -> Result<String, JsValue> {
    to_js(threshold_view(j, q, t, side))
}
