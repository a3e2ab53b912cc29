use proptest::prelude::*;
use snail_core::hilbert::*;
use snail_core::Error;

fn inner(a: &CVec, b: &CVec) -> C64 {
    (a.adjoint() * b)[(0, 0)]
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn ladder_matrix_elements() {
    let a = annihilation(8);
    for n in 0..7 {
        assert!((a[(n, n + 1)].re - ((n + 1) as f64).sqrt()).abs() < 1e-15);
    }
    let comm = &a * a.adjoint() - a.adjoint() * &a;
    // The last level is cut off by truncation.
    for i in 0..7 {
        for j in 0..7 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((comm[(i, j)] - C64::new(want, 0.0)).norm() < 1e-14);
        }
    }
    let n = number(6);
    for k in 0..6 {
        assert_eq!(n[(k, k)].re, k as f64);
    }
}

#[test]
fn embedding_is_kronecker_with_identities() {
    let spec = HilbertSpec::cavities_ancilla(3, 4).unwrap();
    let b = embed(&annihilation(4), 1, &spec).unwrap();
    let manual = kron(&kron(&identity(3), &annihilation(4)), &identity(2));
    assert_eq!(b, manual);
    assert!(embed(&annihilation(3), 1, &spec).is_err());
    assert!(HilbertSpec::new(&[1, 3], &["x", "y"]).is_err());
}

#[test]
fn coherent_state_basics() {
    let vac = coherent_state(C64::new(0.0, 0.0), 10).unwrap();
    assert_eq!(vac, fock_state(0, 10));
    let alpha = C64::new(2f64.sqrt(), 0.0);
    let psi = coherent_state(alpha, 20).unwrap();
    let nbar = inner(&psi, &(number(20) * &psi)).re;
    assert!((nbar - 2.0).abs() < 1e-6);
    let minus = coherent_state(-alpha, 20).unwrap();
    let overlap = inner(&psi, &minus).norm_sqr();
    assert!((overlap - (-8.0f64).exp()).abs() < 1e-6);
}

#[test]
fn coherent_state_truncation_is_reported() {
    assert!(matches!(coherent_state(C64::new(3.0, 0.0), 10), Err(Error::TruncationError(_))));
}

#[test]
fn displacement_properties() {
    let dim = 30;
    assert!(max_abs(&(displacement(C64::new(0.0, 0.0), dim) - identity(dim))) < 1e-15);
    let beta = C64::new(0.8, -0.6);
    let d = displacement(beta, dim);
    let shifted = &d * fock_state(0, dim);
    let target = coherent_state(beta, dim).unwrap();
    assert!((inner(&target, &shifted).norm() - 1.0).abs() < 1e-8);
    let back = &d * displacement(-beta, dim);
    // Guard band: compare away from the truncation edge.
    let bulk = back.view((0, 0), (dim - 10, dim - 10)).into_owned();
    assert!(max_abs(&(bulk - identity(dim - 10))) < 1e-8);
    let u = d.adjoint() * &d;
    let ub = u.view((0, 0), (dim - 2, dim - 2)).into_owned();
    assert!(max_abs(&(ub - identity(dim - 2))) < 1e-9);
}

#[test]
fn analytic_displacement_matches_exponential() {
    let beta = C64::new(-0.4, 1.1);
    let big = displacement(beta, 60);
    let exact = displacement_elements(beta, 12, 12);
    let cut = big.view((0, 0), (12, 12)).into_owned();
    assert!(max_abs(&(cut - exact)) < 1e-12);
}

#[test]
fn parity_properties() {
    let p = parity(12);
    assert_eq!(p[(0, 0)].re, 1.0);
    assert!(max_abs(&(&p * &p - identity(12))) < 1e-15);
    let alpha = C64::new(1.2, 0.3);
    let psi = coherent_state(alpha, 25).unwrap();
    let e = inner(&psi, &(parity(25) * &psi)).re;
    assert!((e - (-2.0 * alpha.norm_sqr()).exp()).abs() < 1e-8);
}

#[test]
fn partial_trace_preserves_trace_and_hermiticity() {
    let spec = HilbertSpec::cavities_ancilla(3, 3).unwrap();
    let a = coherent_state_tol(C64::new(0.5, 0.2), 3, 1e-2).unwrap();
    let b = fock_state(1, 3);
    let mut q = CVec::zeros(2);
    q[0] = ONE;
    q[1] = I;
    let st = QuantumState::product(&[a, b, q], &spec).unwrap();
    st.validate().unwrap();
    for keep in [vec![0], vec![1, 2], vec![0, 2]] {
        let r = st.partial_trace(&keep).unwrap();
        assert!((r.trace() - ONE).norm() < 1e-12);
        assert!(r.hermiticity_error() < 1e-14);
    }
}

#[test]
fn snapshot_round_trip() {
    let spec = HilbertSpec::new(&[2, 3], &["q", "c"]).unwrap();
    let psi = kron_vec(&fock_state(1, 2), &coherent_state_tol(C64::new(0.3, -0.1), 3, 1e-2).unwrap());
    let st = QuantumState::from_pure(&psi, &spec).unwrap();
    let json = serde_json::to_string(&st.snapshot()).unwrap();
    let back = QuantumState::from_snapshot(&serde_json::from_str(&json).unwrap()).unwrap();
    assert!(max_abs(&(back.rho - st.rho)) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ⟨α|P_β|α⟩ = e^{−2|α−β|²}.
    #[test]
    fn displaced_parity_diagonal_relation(ar in -1.4f64..1.4, ai in -1.4f64..1.4, br in -1.4f64..1.4, bi in -1.4f64..1.4) {
        let (alpha, beta) = (C64::new(ar, ai), C64::new(br, bi));
        prop_assume!(alpha.norm() <= 2.0 && beta.norm() <= 2.0);
        let dim = 25;
        let psi = coherent_state_tol(alpha, dim, 1e-6).unwrap();
        let pb = displaced_parity(beta, dim);
        let got = inner(&psi, &(&pb * &psi));
        let want = (-2.0 * (alpha - beta).norm_sqr()).exp();
        prop_assert!((got - C64::new(want, 0.0)).norm() < 1e-6);
    }

    // ⟨α|P_β|−α⟩ = e^{2(α*β − β*α)} e^{−2|β|²}.
    #[test]
    fn displaced_parity_off_diagonal_relation(ar in -1.4f64..1.4, ai in -1.4f64..1.4, br in -1.4f64..1.4, bi in -1.4f64..1.4) {
        let (alpha, beta) = (C64::new(ar, ai), C64::new(br, bi));
        prop_assume!(alpha.norm() <= 2.0 && beta.norm() <= 2.0);
        let dim = 25;
        let plus = coherent_state_tol(alpha, dim, 1e-6).unwrap();
        let minus = coherent_state_tol(-alpha, dim, 1e-6).unwrap();
        let got = inner(&plus, &(displaced_parity(beta, dim) * &minus));
        let want = (2.0 * (alpha.conj() * beta - beta.conj() * alpha)).exp() * (-2.0 * beta.norm_sqr()).exp();
        prop_assert!((got - want).norm() < 1e-6);
    }

    #[test]
    fn products_are_valid_states(a in 0.0f64..1.0, b in 0.0f64..1.0, n in 0usize..4) {
        let spec = HilbertSpec::cavities_ancilla(8, 6).unwrap();
        let ca = coherent_state_tol(C64::new(a, 0.0), 8, 1e-4).unwrap();
        let cb = coherent_state_tol(C64::new(0.0, b), 6, 1e-3).unwrap();
        let st = QuantumState::product(&[ca, cb, fock_state(n % 2, 2)], &spec).unwrap();
        prop_assert!(st.validate().is_ok());
        prop_assert!((st.purity() - 1.0).abs() < 1e-12);
    }
}
