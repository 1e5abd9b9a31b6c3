use gibbs_cert::model::Graph;
use gibbs_cert::modelfile::parse_model_file;
use gibbs_cert::rotator::{
    bar_q_matrix, f_series, f_upper, gibbs_time_threshold, legendre, mean_height, threshold_margin, HeatKernel,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn path_couplings(n: usize, j: f64) -> DMatrix<f64> {
    let g = Graph::path(n);
    let mut m = DMatrix::zeros(n, n);
    for &(a, b) in g.edges() {
        m[(a, b)] = j;
        m[(b, a)] = j;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn legendre_is_bounded_by_one(q in 2usize..7, n in 0usize..30, s in -1.0f64..=1.0) {
        prop_assert!(legendre(q, n, s).unwrap().abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn heat_kernel_is_symmetric_and_positive(q in 2usize..5, t in 0.05f64..3.0, s in -1.0f64..=1.0, u in -1.0f64..=1.0) {
        let k = HeatKernel::new(q, t).unwrap();
        let a = k.eval(s, u).unwrap().value;
        prop_assert_eq!(a, k.eval(u, s).unwrap().value);
        prop_assert!(a > -1e-9);
    }

    #[test]
    fn f_curve_is_monotone_and_dominated(q in 2usize..4, t in 0.05f64..3.0, x in 0.01f64..1.98) {
        let f1 = f_series(q, t, x).unwrap();
        let f2 = f_series(q, t, x + 0.02).unwrap();
        prop_assert!((0.0..=2.0).contains(&f1));
        prop_assert!(f2 >= f1 - 1e-12);
        prop_assert!(f1 <= f_upper(q, t, x).unwrap() + 1e-9);
    }

    #[test]
    fn mean_height_decays(q in 2usize..6, t in 0.0f64..5.0, dt in 1e-3f64..1.0) {
        let a = mean_height(q, t).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(mean_height(q, t + dt).unwrap() < a);
    }

    #[test]
    fn certificate_holds_exactly_below_threshold(j in 0.01f64..0.6, q in 2usize..5, t in 1e-3f64..3.0) {
        let r = gibbs_time_threshold(&path_couplings(4, j), q, Some(t)).unwrap();
        let below = r.t_star.is_none_or(|ts| t < ts);
        prop_assert_eq!(r.certified, Some(below));
        prop_assert!(threshold_margin(r.a, q, t) > threshold_margin(r.a, q, t + 0.01));
    }

    #[test]
    fn qbar_is_capped_by_its_ceiling(j in 0.01f64..0.4, t in 1e-4f64..0.5) {
        let jm = path_couplings(3, j);
        if let Ok(b) = bar_q_matrix(&jm, 2, t) {
            for r in 0..3 {
                for c in 0..3 {
                    let v = b.q_bar[(r, c)];
                    prop_assert!(v >= 0.0 && v.is_finite());
                    prop_assert!(v <= 0.5 * b.ceiling_branch[c] + 1e-12);
                }
            }
        }
    }
}

#[test]
fn qbar_stays_finite_as_time_shrinks() {
    // Nearest neighbours saturate at the ceiling branch; distance-two
    // entries of the series branch settle to a finite limit.
    use gibbs_cert::rotator::QBarBranch;
    let jm = path_couplings(3, 0.2);
    let mut far = Vec::new();
    for k in 2..=9 {
        let t = 10f64.powi(-k);
        let b = bar_q_matrix(&jm, 2, t).unwrap();
        assert!(b.q_bar.iter().all(|v| v.is_finite()));
        assert_eq!(b.active[0][1], QBarBranch::Ceiling);
        assert_eq!(b.q_bar[(0, 1)], 0.5 * b.ceiling_branch[1]);
        far.push(b.q_bar[(0, 2)]);
    }
    let (a, b) = (far[far.len() - 2], far[far.len() - 1]);
    assert!(b > 0.0 && ((a - b) / b).abs() < 1e-3, "{far:?}");
}

#[test]
fn model_file_round_trip_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.toml");
    std::fs::write(
        &path,
        "[graph]\ncycle = 5\n[space]\nkind = \"circle\"\nm = 8\n[potential]\nform = \"rotator\"\ncoupling = 0.4\n[channel]\nkind = \"heat-kernel\"\nt = 0.2\n",
    )
    .unwrap();
    let f = parse_model_file(&path).unwrap();
    assert_eq!(f.model.n_sites(), 5);
    assert!((0..5).all(|i| f.model.graph().degree(i) == 2));
    assert!(f.channel.is_some());
    assert!(parse_model_file(&dir.path().join("missing.toml")).is_err());
}
