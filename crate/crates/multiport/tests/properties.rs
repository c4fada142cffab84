//! Property tests over randomized instances: algebraic identities of the
//! connection formulas, conversion roundtrips, and closure properties.

use multiport::cascade::{
    cascade_load_s, cascade_load_y, cascade_load_z, connect_supersystem, evaluate, plan_reduction,
    redheffer_star, redheffer_star_z, ReductionObjective,
};
use multiport::connection::{delta_system, embed_connection, ConnectionScheme, DeltaPairing, EmbeddedBlock, Join};
use multiport::linalg::{
    block_diag, invert, relative_frobenius_error, ComplexMatrix, LuFactors,
};
use multiport::network::{
    s_from_z, y_from_z, z_from_s, z_from_y, NetworkSystem, PortPartition, Representation,
};
use multiport::testkit;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn uniform_ref(n: usize) -> Vec<Complex64> {
    vec![c(50.0, 0.0); n]
}

/// Two-system scheme with all of `n_conn` ports delta-joined.
fn pair_scheme(seed: u64, n_free: usize, n_conn: usize, unitary: bool, symmetric: bool) -> ConnectionScheme {
    let mut rng = testkit::rng(seed);
    let total = n_free + n_conn;
    let mut mk = |rng: &mut _| {
        let m = if unitary {
            testkit::random_unitary(rng, total)
        } else if symmetric {
            testkit::random_symmetric(rng, total)
        } else {
            testkit::random_contraction(rng, total)
        };
        let p = PortPartition::new(
            total,
            vec![
                ("N".into(), (0..n_free).collect()),
                ("C".into(), (n_free..total).collect()),
            ],
        )
        .unwrap();
        NetworkSystem::scattering(m, p).unwrap()
    };
    ConnectionScheme::new(
        vec!["u".into(), "v".into()],
        vec![mk(&mut rng), mk(&mut rng)],
        vec![Join {
            system_a: 0,
            set_a: "C".into(),
            system_b: 1,
            set_b: "C".into(),
        }],
        vec![],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn star_with_delta_system_is_neutral(seed in any::<u64>(), n_free in 1usize..4, m in 1usize..4) {
        let mut rng = testkit::rng(seed);
        let u = testkit::system_nc(testkit::random_matrix(&mut rng, n_free + m, n_free + m), n_free, m);
        let mut v = ComplexMatrix::zeros(2 * m, 2 * m);
        for k in 0..m {
            v[(k, m + k)] = c(1.0, 0.0);
            v[(m + k, k)] = c(1.0, 0.0);
        }
        let vp = PortPartition::new(
            2 * m,
            vec![("C".into(), (0..m).collect()), ("N".into(), (m..2 * m).collect())],
        )
        .unwrap();
        let v = NetworkSystem::scattering(v, vp).unwrap();
        let s = redheffer_star(&u, &v, "C", "C").unwrap();
        // every entry reproduced exactly up to the relabeling of C to the
        // delta's far side
        prop_assert!(relative_frobenius_error(&s, &u.matrix) < 1e-14);
    }

    #[test]
    fn star_with_closed_load_is_cascade_loading(seed in any::<u64>(), n_free in 1usize..4, m in 1usize..5) {
        let mut rng = testkit::rng(seed);
        let u = testkit::system_nc(testkit::random_contraction(&mut rng, n_free + m), n_free, m);
        let load = testkit::random_contraction(&mut rng, m);
        let v = NetworkSystem::scattering(load.clone(), PortPartition::trivial(m, "C")).unwrap();
        let via_star = redheffer_star(&u, &v, "C", "C").unwrap();
        let via_cascade = cascade_load_s(&u, "C", &load).unwrap();
        prop_assert!(relative_frobenius_error(&via_star, &via_cascade) < 1e-12);
    }

    #[test]
    fn reciprocal_blocks_share_one_interaction_inverse(seed in any::<u64>(), m in 1usize..6) {
        let mut rng = testkit::rng(seed);
        let u_cc = testkit::random_symmetric(&mut rng, m);
        let v_cc = testkit::random_symmetric(&mut rng, m);
        let eye = ComplexMatrix::identity(m);
        let x_uv = invert(&u_cc.mul(&v_cc).sub(&eye)).unwrap();
        let x_vu = invert(&v_cc.mul(&u_cc).sub(&eye)).unwrap();
        prop_assert!(relative_frobenius_error(&x_vu, &x_uv.transpose()) < 1e-12);
    }

    #[test]
    fn delta_composition_preserves_reciprocity(seed in any::<u64>(), n_free in 1usize..3, m in 1usize..4) {
        let scheme = pair_scheme(seed, n_free, m, false, true);
        let plan = plan_reduction(&scheme, ReductionObjective::None);
        let (s, _) = evaluate(&scheme, &plan).unwrap();
        prop_assert!(s.is_symmetric(1e-12));
    }

    #[test]
    fn delta_composition_preserves_unitarity(seed in any::<u64>(), n_free in 1usize..3, m in 1usize..4) {
        let scheme = pair_scheme(seed, n_free, m, true, false);
        let plan = plan_reduction(&scheme, ReductionObjective::None);
        let (s, _) = evaluate(&scheme, &plan).unwrap();
        let gram = s.conj_transpose().mul(&s);
        let eye = ComplexMatrix::identity(s.rows());
        prop_assert!(relative_frobenius_error(&gram, &eye) < 1e-10);
    }

    #[test]
    fn s_z_s_roundtrip(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = testkit::rng(seed);
        let s = testkit::random_contraction(&mut rng, n);
        let z = z_from_s(&s, &uniform_ref(n)).unwrap();
        let back = s_from_z(&z, &uniform_ref(n)).unwrap();
        prop_assert!(relative_frobenius_error(&back, &s) < 1e-11);
    }

    #[test]
    fn z_y_z_roundtrip(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = testkit::rng(seed);
        let z = testkit::random_matrix(&mut rng, n, n)
            .scale(c(20.0, 0.0))
            .add(&ComplexMatrix::identity(n).scale(c(70.0, 5.0)));
        let back = z_from_y(&y_from_z(&z).unwrap()).unwrap();
        prop_assert!(relative_frobenius_error(&back, &z) < 1e-11);
    }

    #[test]
    fn conversion_keeps_symmetry(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = testkit::rng(seed);
        let raw = testkit::random_symmetric(&mut rng, n);
        let z = raw.scale(c(30.0, 0.0)).add(&ComplexMatrix::identity(n).scale(c(75.0, 4.0)));
        let s = s_from_z(&z, &uniform_ref(n)).unwrap();
        prop_assert!(s.is_symmetric(1e-11));
    }

    #[test]
    fn inner_outer_equivalence(seed in any::<u64>(), n_free in 1usize..3, m in 1usize..4) {
        let mut rng = testkit::rng(seed);
        let total = n_free + m;
        let s1 = testkit::system_nc(testkit::random_contraction(&mut rng, total), n_free, m);
        let s2 = testkit::random_contraction(&mut rng, m);
        let direct = cascade_load_s(&s1, "C", &s2).unwrap();

        let (sup, _) = block_diag(&[&s1.matrix, &s2]).unwrap();
        let part = PortPartition::new(
            total + m,
            vec![
                ("N".into(), (0..n_free).collect()),
                ("C".into(), (n_free..total + m).collect()),
            ],
        )
        .unwrap();
        let sup = NetworkSystem::scattering(sup, part).unwrap();
        let pairs = vec![DeltaPairing {
            first: (0..m).collect(),
            second: (m..2 * m).collect(),
        }];
        let con = delta_system(&pairs, 2 * m).unwrap();
        let (via_delta, _) = connect_supersystem(&sup, "C", &con).unwrap();
        prop_assert!(relative_frobenius_error(&via_delta, &direct) < 1e-12);
    }

    #[test]
    fn offdiag_identity_forms_agree(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = testkit::rng(seed);
        let a = testkit::random_matrix(&mut rng, n, n);
        let b = testkit::random_matrix(&mut rng, n, n);
        let left = multiport::linalg::invert_offdiag_identity(&a, &b).unwrap();
        let right = multiport::linalg::invert_offdiag_identity_right(&a, &b).unwrap();
        prop_assert!(relative_frobenius_error(&left, &right) < 1e-13);
        let mut big = ComplexMatrix::zeros(2 * n, 2 * n);
        big.set_block(0, 0, &a);
        big.set_block(0, n, &ComplexMatrix::identity(n));
        big.set_block(n, 0, &ComplexMatrix::identity(n));
        big.set_block(n, n, &b);
        let eye = ComplexMatrix::identity(2 * n);
        prop_assert!(relative_frobenius_error(&big.mul(&left), &eye) < 1e-12);
    }

    #[test]
    fn solve_agrees_with_general_inverse(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = testkit::rng(seed);
        let a = testkit::random_matrix(&mut rng, n, n)
            .add(&ComplexMatrix::identity(n).scale(c(1.5, 0.0)));
        let lu = LuFactors::factor(&a).unwrap();
        let x = lu.solve(&ComplexMatrix::identity(n)).unwrap();
        let inv = invert(&a).unwrap();
        let tol = 10.0 * lu.cond_estimate() * f64::EPSILON;
        prop_assert!(relative_frobenius_error(&x, &inv) <= tol.max(1e-15));
    }

    #[test]
    fn delta_system_is_an_involution(seed in any::<u64>(), pairs in 1usize..4, m in 1usize..4) {
        let _ = seed;
        let n = 2 * pairs * m;
        let pairings: Vec<DeltaPairing> = (0..pairs)
            .map(|p| DeltaPairing {
                first: (2 * p * m..(2 * p + 1) * m).collect(),
                second: ((2 * p + 1) * m..(2 * p + 2) * m).collect(),
            })
            .collect();
        let con = delta_system(&pairings, n).unwrap();
        let d = con.to_dense();
        prop_assert_eq!(d.clone(), d.transpose());
        prop_assert_eq!(d.mul(&d), ComplexMatrix::identity(n));
    }

    #[test]
    fn embedded_unitary_blocks_keep_the_connection_unitary(seed in any::<u64>(), m in 1usize..4) {
        let mut rng = testkit::rng(seed);
        let block = testkit::random_unitary(&mut rng, m);
        let con = embed_connection(
            &[DeltaPairing { first: (0..m).collect(), second: (m..2 * m).collect() }],
            vec![EmbeddedBlock {
                matrix: block,
                positions: (2 * m..3 * m).collect(),
                local: (0..m).collect(),
                free_local: vec![],
            }],
            3 * m,
        )
        .unwrap();
        let d = con.to_dense();
        let gram = d.conj_transpose().mul(&d);
        prop_assert!(relative_frobenius_error(&gram, &ComplexMatrix::identity(3 * m)) < 1e-12);
    }

    #[test]
    fn quasi_delta_reconverts_to_scaled_permutation(seed in any::<u64>(), m in 1usize..4, eps_exp in -4f64..-1f64) {
        // the reconversion conditions like 1/eps, so the tight tolerance
        // applies in the moderate-eps regime; the small-eps behavior is
        // quantified by the epsilon-sweep benchmark instead
        let _ = seed;
        let eps = 10f64.powf(eps_exp);
        let pairs = [DeltaPairing { first: (0..m).collect(), second: (m..2 * m).collect() }];
        let con = multiport::connection::quasi_delta(
            Representation::Impedance, &pairs, 2 * m, eps, 50.0,
        ).unwrap();
        let back = s_from_z(&con.to_dense(), &uniform_ref(2 * m)).unwrap();
        let expected = delta_system(&pairs, 2 * m).unwrap().to_dense().scale(c(1.0 - eps, 0.0));
        prop_assert!(relative_frobenius_error(&back, &expected) < 1e-11);
    }

    #[test]
    fn impedance_star_matches_scattering_path(seed in any::<u64>(), n_free in 1usize..3, m in 1usize..4) {
        let mut rng = testkit::rng(seed);
        let total = n_free + m;
        let mut mats = Vec::new();
        for _ in 0..2 {
            // impedance matrices with dominant diagonals convert cleanly
            let z = testkit::random_symmetric(&mut rng, total)
                .scale(c(40.0, 0.0))
                .add(&ComplexMatrix::identity(total).scale(c(85.0, 7.0)));
            mats.push(z);
        }
        let part = PortPartition::new(
            total,
            vec![
                ("N".into(), (0..n_free).collect()),
                ("C".into(), (n_free..total).collect()),
            ],
        )
        .unwrap();
        let zu = NetworkSystem::new(Representation::Impedance, mats[0].clone(), part.clone(), uniform_ref(total)).unwrap();
        let zv = NetworkSystem::new(Representation::Impedance, mats[1].clone(), part.clone(), uniform_ref(total)).unwrap();
        let z_direct = redheffer_star_z(&zu, &zv, "C", "C").unwrap();

        let su = NetworkSystem::new(
            Representation::Scattering,
            s_from_z(&mats[0], &uniform_ref(total)).unwrap(),
            part.clone(),
            uniform_ref(total),
        ).unwrap();
        let sv = NetworkSystem::new(
            Representation::Scattering,
            s_from_z(&mats[1], &uniform_ref(total)).unwrap(),
            part,
            uniform_ref(total),
        ).unwrap();
        let s_star = redheffer_star(&su, &sv, "C", "C").unwrap();
        let z_via_s = z_from_s(&s_star, &uniform_ref(2 * n_free)).unwrap();
        prop_assert!(relative_frobenius_error(&z_direct, &z_via_s) < 1e-10);
    }

    #[test]
    fn impedance_and_admittance_cascades_match_scattering_path(
        seed in any::<u64>(), n_free in 1usize..3, m in 1usize..4,
    ) {
        let mut rng = testkit::rng(seed);
        let total = n_free + m;
        let z1 = testkit::random_symmetric(&mut rng, total)
            .scale(c(35.0, 0.0))
            .add(&ComplexMatrix::identity(total).scale(c(90.0, 6.0)));
        let z2 = testkit::random_symmetric(&mut rng, m)
            .scale(c(20.0, 0.0))
            .add(&ComplexMatrix::identity(m).scale(c(65.0, -4.0)));
        let part = PortPartition::new(
            total,
            vec![
                ("N".into(), (0..n_free).collect()),
                ("C".into(), (n_free..total).collect()),
            ],
        )
        .unwrap();
        let z_sys = NetworkSystem::new(Representation::Impedance, z1.clone(), part.clone(), uniform_ref(total)).unwrap();
        let z12 = cascade_load_z(&z_sys, "C", &z2).unwrap();

        let y_sys = NetworkSystem::new(Representation::Admittance, y_from_z(&z1).unwrap(), part.clone(), uniform_ref(total)).unwrap();
        let y12 = cascade_load_y(&y_sys, "C", &y_from_z(&z2).unwrap()).unwrap();
        prop_assert!(relative_frobenius_error(&z_from_y(&y12).unwrap(), &z12) < 1e-9);

        let s_sys = NetworkSystem::new(
            Representation::Scattering,
            s_from_z(&z1, &uniform_ref(total)).unwrap(),
            part,
            uniform_ref(total),
        ).unwrap();
        let s2 = s_from_z(&z2, &uniform_ref(m)).unwrap();
        let s12 = cascade_load_s(&s_sys, "C", &s2).unwrap();
        let z_via_s = z_from_s(&s12, &uniform_ref(n_free)).unwrap();
        prop_assert!(relative_frobenius_error(&z_via_s, &z12) < 1e-10);
    }

    #[test]
    fn partition_blocks_reassemble(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = testkit::rng(seed);
        let m = testkit::random_matrix(&mut rng, n, n);
        let split = 1 + (seed as usize % (n - 1));
        let part = PortPartition::new(
            n,
            vec![
                ("N".into(), (0..split).collect()),
                ("C".into(), (split..n).collect()),
            ],
        )
        .unwrap();
        let sys = NetworkSystem::scattering(m.clone(), part).unwrap();
        let mut rebuilt = ComplexMatrix::zeros(n, n);
        for (rl, rows) in [("N", 0..split), ("C", split..n)] {
            for (cl, cols) in [("N", 0..split), ("C", split..n)] {
                let block = sys.block(rl, cl).unwrap();
                for (i, r) in rows.clone().enumerate() {
                    for (j, cc) in cols.clone().enumerate() {
                        rebuilt[(r, cc)] = block[(i, j)];
                    }
                }
            }
        }
        prop_assert_eq!(rebuilt, m);
    }
}
