//! Randomised property checks for the numerical kernels and the feasibility
//! solver.

use proptest::prelude::*;
use switchcert::lmi::{self, LmiConstraint, LmiVar, SolveOptions};
use switchcert::matnum::{expm, gram_integral, spectral_norm, sym_eig, Mat, SymMat};

fn mat_strategy(n: usize, bound: f64) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-bound..bound, n * n)
        .prop_map(move |data| Mat::new(n, n, data).unwrap())
}

fn sym_strategy(n: usize, bound: f64) -> impl Strategy<Value = SymMat> {
    mat_strategy(n, bound).prop_map(|m| {
        let s = &m + &m.transpose();
        SymMat::from_mat(&s.scale(0.5)).unwrap()
    })
}

fn shifted(mut g: Mat, sign: f64) -> Mat {
    let s = spectral_norm(&g) + 0.1;
    for r in 0..g.rows() {
        g[(r, r)] += sign * s;
    }
    g
}

fn lyapunov_feasible(a: &Mat) -> bool {
    let n = a.rows();
    let at = a.transpose();
    let a = a.clone();
    let system = lmi::build_system(
        vec![LmiVar::sym("p", n).bounded_below(1.0)],
        vec![LmiConstraint::new("lyap", n, 1e-3, move |asg| {
            let p = asg.sym("p")?;
            SymMat::from_mat(&(&(&at * p.as_mat()) + &(p.as_mat() * &a)))
        })],
    )
    .unwrap();
    match lmi::solve(&system, &SolveOptions::default()) {
        Ok(res) => {
            res.status == lmi::FeasStatus::Feasible
                && lmi::certify(&system, &res.assignment).map(|m| m > 0.0).unwrap_or(false)
        }
        Err(_) => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn exponential_inverse_pair(a in mat_strategy(3, 5.0 / 3.0)) {
        // entries bounded so that the Frobenius norm stays <= 5
        let e = expm(&a).unwrap();
        let e_inv = expm(&a.scale(-1.0)).unwrap();
        let prod = &e * &e_inv;
        let err = (&prod - &Mat::identity(3)).norm_max();
        prop_assert!(err < 1e-9, "||e^A e^-A - I||_max = {err:e}");
    }

    #[test]
    fn gramian_is_psd_and_additive(
        a in mat_strategy(3, 1.0),
        m in sym_strategy(3, 1.0),
        t1 in 0.05f64..1.0,
        t2 in 0.05f64..1.0,
    ) {
        // make the weight PSD: M^T M form
        let w = SymMat::from_mat(&(&m.as_mat().transpose() * m.as_mat())).unwrap();
        let g_total = gram_integral(&a, &w, t1 + t2).unwrap();
        prop_assert!(g_total.lambda_min() > -1e-10, "Gramian not PSD");
        // splitting identity: G(t1+t2) = G(t1) + e^{A^T t1} G(t2) e^{A t1}
        let g1 = gram_integral(&a, &w, t1).unwrap();
        let g2 = gram_integral(&a, &w, t2).unwrap();
        let e1 = expm(&a.scale(t1)).unwrap();
        let shifted = &(&e1.transpose() * g2.as_mat()) * &e1;
        let recomposed = g1.add(&SymMat::from_mat(&shifted).unwrap());
        let err = g_total.sub(&recomposed).norm_fro();
        prop_assert!(err < 1e-8, "additivity violated by {err:e}");
    }

    #[test]
    fn eigendecomposition_is_orthonormal_and_reconstructs(s in sym_strategy(4, 3.0)) {
        let eig = sym_eig(&s);
        let v = &eig.eigenvectors;
        let vtv = &v.transpose() * v;
        let ortho_err = (&vtv - &Mat::identity(4)).norm_max();
        prop_assert!(ortho_err < 1e-10, "V^T V - I = {ortho_err:e}");
        let lam = Mat::diag(&eig.eigenvalues);
        let recon = &(v * &lam) * &v.transpose();
        let rec_err = (&recon - s.as_mat()).norm_max();
        prop_assert!(rec_err < 1e-10, "V L V^T - S = {rec_err:e}");
        // ascending order
        for w in eig.eigenvalues.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn spectral_norm_is_submultiplicative(a in mat_strategy(3, 2.0), b in mat_strategy(3, 2.0)) {
        let na = spectral_norm(&a);
        let nb = spectral_norm(&b);
        let nab = spectral_norm(&(&a * &b));
        prop_assert!(nab <= na * nb * (1.0 + 1e-10) + 1e-12);
    }
}

proptest! {
    // solver runs are comparatively expensive; fewer cases suffice
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn hurwitz_instances_are_feasible(g in mat_strategy(3, 1.0)) {
        let a = shifted(g, -1.0);
        prop_assert!(lyapunov_feasible(&a), "Hurwitz-by-construction instance rejected");
    }

    #[test]
    fn unstable_instances_are_never_feasible(g in mat_strategy(3, 1.0)) {
        let a = shifted(g, 1.0);
        prop_assert!(!lyapunov_feasible(&a), "unstable instance accepted");
    }

    #[test]
    fn feasibility_is_scale_invariant(g in mat_strategy(2, 1.0), c in 0.2f64..5.0) {
        // scaling a Hurwitz matrix by c > 0 keeps it Hurwitz and the
        // Lyapunov instance feasible
        let a = shifted(g, -1.0);
        prop_assert!(lyapunov_feasible(&a.scale(c)));
    }
}
