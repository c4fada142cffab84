//! Low-rank update of a previously evaluated connection when one subsystem's
//! scattering matrix changes.
//!
//! With the cached interaction inverse S̄ = (S_con⁻¹ - S_CC)⁻¹ and the change
//! ΔS of subsystem j confined to its connected ports C_j, the Woodbury
//! identity refreshes the inverse with two inversions of size n(C_j):
//!
//! ```text
//! S̄' = S̄ + S̄_{C,Cj} (I - ΔS_CjCj S̄_{Cj,Cj})⁻¹ ΔS_CjCj S̄_{Cj,C}
//! ```
//!
//! This rearrangement never inverts ΔS itself, so rank-deficient (sparse)
//! perturbations need no special handling.

use std::sync::OnceLock;

use crate::cascade::CascadeCache;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, LuFactors, C64};

/// How many chained updates may pass before the cache residual is checked.
pub const RESIDUAL_CHECK_INTERVAL: usize = 64;

/// Residual above which a checked cache is rebuilt from scratch.
pub const RESIDUAL_REBUILD_THRESHOLD: f64 = 1e-9;

/// Replacement matrix for one subsystem of a cached connection. The new
/// matrix must keep the old dimensions and port partition.
#[derive(Debug, Clone)]
pub struct SubsystemUpdate {
    /// index of the subsystem in the originating scheme
    pub subsystem: usize,
    pub matrix: ComplexMatrix,
}

/// Applies a subsystem update to a cached connection, returning the updated
/// scattering matrix and a fresh cache. The old cache stays valid, so
/// alternative updates can branch from it.
pub fn update_subsystem(
    cache: &CascadeCache,
    upd: &SubsystemUpdate,
) -> Result<(ComplexMatrix, CascadeCache)> {
    let slot = cache
        .layout
        .slot_of(upd.subsystem)
        .ok_or(Error::SubsystemNotInSupersystem {
            index: upd.subsystem,
        })?;
    let member = &cache.layout.members[slot];
    let old = &cache.matrices[slot];
    if (upd.matrix.rows(), upd.matrix.cols()) != (old.rows(), old.cols()) {
        return Err(Error::ShapeMismatch {
            context: format!(
                "update of subsystem {} changes its size from {} to {} ports",
                upd.subsystem,
                old.rows(),
                upd.matrix.rows()
            ),
        });
    }

    let delta = upd.matrix.sub(old);
    if delta.max_abs() == 0.0 {
        return Ok((cache.s_tilde.clone(), cache.clone()));
    }

    let nj = member.conn_local.len();
    let cj: Vec<usize> = (member.c_offset..member.c_offset + nj).collect();
    let delta_cc = delta.select(&member.conn_local, &member.conn_local);

    let s_bar_new = if delta_cc.max_abs() == 0.0 {
        // change confined to free-facing blocks: the interaction inverse is untouched
        cache.s_bar.clone()
    } else {
        let s_bar_jj = cache.s_bar.select(&cj, &cj);
        // K = I - ΔS S̄_jj, inverted at size n(C_j)
        let mut k = delta_cc.mul(&s_bar_jj).scale(C64::new(-1.0, 0.0));
        for i in 0..nj {
            k[(i, i)] += C64::new(1.0, 0.0);
        }
        debug_assert_eq!(k.rows(), nj);
        let w = LuFactors::factor(&k)
            .and_then(|f| f.solve(&delta_cc))
            .map_err(|e| match e {
                Error::SingularMatrix { .. } => Error::SingularUpdate,
                other => other,
            })?;
        let s_bar_c_cj = cache.s_bar.select_cols(&cj);
        let s_bar_cj_c = cache.s_bar.select_rows(&cj);
        cache.s_bar.add(&s_bar_c_cj.mul(&w).mul(&s_bar_cj_c))
    };

    let mut matrices = cache.matrices.clone();
    matrices[slot] = upd.matrix.clone();

    let s_bar_cn = cache.layout.right_mul_scn(&s_bar_new, &matrices);
    let s_tilde = cache
        .layout
        .assemble_nn(&matrices)
        .add(&cache.layout.left_mul_snc(&matrices, &s_bar_cn));

    let mut new_cache = CascadeCache {
        layout: cache.layout.clone(),
        matrices,
        con: cache.con.clone(),
        s_bar: s_bar_new,
        s_bar_cn,
        s_tilde: s_tilde.clone(),
        updates_since_check: cache.updates_since_check + 1,
        maps: OnceLock::new(),
    };

    if new_cache.updates_since_check >= RESIDUAL_CHECK_INTERVAL {
        new_cache.updates_since_check = 0;
        if new_cache.residual() > RESIDUAL_REBUILD_THRESHOLD {
            rebuild_interaction(&mut new_cache)?;
        }
    }

    Ok((s_tilde, new_cache))
}

/// Recomputes S̄ from scratch for a drifted cache.
fn rebuild_interaction(cache: &mut CascadeCache) -> Result<()> {
    let n_c = cache.layout.c_total;
    let s_cc = cache.layout.assemble_cc(&cache.matrices);
    let mut b = cache.con.right_mul_cc(&s_cc).scale(C64::new(-1.0, 0.0));
    for i in 0..n_c {
        b[(i, i)] += C64::new(1.0, 0.0);
    }
    let t = LuFactors::factor(&b)
        .and_then(|f| f.inverse())
        .map_err(|e| match e {
            Error::SingularMatrix { cond_estimate } => Error::SingularInteraction { cond_estimate },
            other => other,
        })?;
    cache.s_bar = cache.con.left_mul_cc(&t);
    cache.s_bar_cn = cache.layout.right_mul_scn(&cache.s_bar, &cache.matrices);
    cache.s_tilde = cache
        .layout
        .assemble_nn(&cache.matrices)
        .add(&cache.layout.left_mul_snc(&cache.matrices, &cache.s_bar_cn));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{evaluate, plan_reduction, ReductionObjective};
    use crate::connection::{ConnectionScheme, Join};
    use crate::linalg::relative_frobenius_error;
    use crate::network::{NetworkSystem, PortPartition};
    use crate::testkit;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pair_scheme(seed: u64, n_free: usize, n_conn: usize) -> ConnectionScheme {
        let mut rng = testkit::rng(seed);
        let total = n_free + n_conn;
        let mk = |rng: &mut _| {
            let p = PortPartition::new(
                total,
                vec![
                    ("N".into(), (0..n_free).collect()),
                    ("C".into(), (n_free..total).collect()),
                ],
            )
            .unwrap();
            NetworkSystem::scattering(testkit::random_contraction(rng, total), p).unwrap()
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

    fn fresh_eval(scheme: &ConnectionScheme) -> (crate::linalg::ComplexMatrix, CascadeCache) {
        let plan = plan_reduction(scheme, ReductionObjective::None);
        let (s, cache) = evaluate(scheme, &plan).unwrap();
        (s, cache.unwrap())
    }

    #[test]
    fn unchanged_subsystem_is_a_no_op() {
        let scheme = pair_scheme(60, 2, 3);
        let (s, cache) = fresh_eval(&scheme);
        let upd = SubsystemUpdate {
            subsystem: 1,
            matrix: scheme.systems[1].matrix.clone(),
        };
        let (s2, cache2) = update_subsystem(&cache, &upd).unwrap();
        assert_eq!(s, s2);
        assert_eq!(cache.s_bar(), cache2.s_bar());
    }

    #[test]
    fn updated_result_matches_from_scratch() {
        for seed in [61, 62, 63] {
            let mut scheme = pair_scheme(seed, 2, 3);
            let (_, cache) = fresh_eval(&scheme);
            let mut rng = testkit::rng(seed + 1000);
            let new_matrix = testkit::random_contraction(&mut rng, 5);
            let (updated, new_cache) = update_subsystem(
                &cache,
                &SubsystemUpdate {
                    subsystem: 0,
                    matrix: new_matrix.clone(),
                },
            )
            .unwrap();
            scheme.systems[0].matrix = new_matrix;
            let (scratch, _) = fresh_eval(&scheme);
            assert!(relative_frobenius_error(&updated, &scratch) < 1e-13);
            assert!(new_cache.residual() < 1e-12);
        }
    }

    #[test]
    fn single_connected_port_is_a_rank_one_step() {
        let mut scheme = pair_scheme(64, 3, 1);
        let (_, cache) = fresh_eval(&scheme);
        let mut rng = testkit::rng(65);
        let new_matrix = testkit::random_contraction(&mut rng, 4);
        let (updated, _) = update_subsystem(
            &cache,
            &SubsystemUpdate {
                subsystem: 1,
                matrix: new_matrix.clone(),
            },
        )
        .unwrap();
        scheme.systems[1].matrix = new_matrix;
        let (scratch, _) = fresh_eval(&scheme);
        assert!(relative_frobenius_error(&updated, &scratch) < 1e-13);
    }

    #[test]
    fn update_then_inverse_update_restores_the_cache() {
        let scheme = pair_scheme(66, 2, 4);
        let (_, cache) = fresh_eval(&scheme);
        let original = scheme.systems[0].matrix.clone();
        let mut rng = testkit::rng(67);
        let perturbed = testkit::random_contraction(&mut rng, 6);
        let (_, cache1) = update_subsystem(
            &cache,
            &SubsystemUpdate {
                subsystem: 0,
                matrix: perturbed,
            },
        )
        .unwrap();
        let (_, cache2) = update_subsystem(
            &cache1,
            &SubsystemUpdate {
                subsystem: 0,
                matrix: original,
            },
        )
        .unwrap();
        assert!(relative_frobenius_error(cache2.s_bar(), cache.s_bar()) < 1e-11);
    }

    #[test]
    fn sequential_updates_track_from_scratch() {
        let mut scheme = pair_scheme(68, 2, 3);
        let (_, mut cache) = fresh_eval(&scheme);
        let k = 16usize;
        let mut last = None;
        for step in 0..k {
            let mut rng = testkit::rng(7000 + step as u64);
            let new_matrix = testkit::random_contraction(&mut rng, 5);
            let (s, next) = update_subsystem(
                &cache,
                &SubsystemUpdate {
                    subsystem: 1,
                    matrix: new_matrix.clone(),
                },
            )
            .unwrap();
            scheme.systems[1].matrix = new_matrix;
            cache = next;
            last = Some(s);
        }
        let (scratch, _) = fresh_eval(&scheme);
        let err = relative_frobenius_error(&last.unwrap(), &scratch);
        assert!(err < 1e-12 * (k as f64).sqrt(), "accumulated error {err}");
    }

    #[test]
    fn rank_deficient_change_needs_no_delta_inverse() {
        // perturb a single entry of the connected block: ΔS_CC is rank one
        // and singular for n(C_j) > 1
        let mut scheme = pair_scheme(69, 2, 3);
        let (_, cache) = fresh_eval(&scheme);
        let mut new_matrix = scheme.systems[0].matrix.clone();
        new_matrix[(3, 4)] += c(0.05, -0.02);
        let (updated, _) = update_subsystem(
            &cache,
            &SubsystemUpdate {
                subsystem: 0,
                matrix: new_matrix.clone(),
            },
        )
        .unwrap();
        scheme.systems[0].matrix = new_matrix;
        let (scratch, _) = fresh_eval(&scheme);
        assert!(relative_frobenius_error(&updated, &scratch) < 1e-13);
    }

    #[test]
    fn free_block_only_change_keeps_interaction_inverse() {
        let mut scheme = pair_scheme(70, 2, 3);
        let (_, cache) = fresh_eval(&scheme);
        let mut new_matrix = scheme.systems[0].matrix.clone();
        new_matrix[(0, 1)] += c(0.1, 0.1); // N-N block entry
        new_matrix[(1, 3)] += c(0.05, 0.0); // N-C block entry
        let (updated, new_cache) = update_subsystem(
            &cache,
            &SubsystemUpdate {
                subsystem: 0,
                matrix: new_matrix.clone(),
            },
        )
        .unwrap();
        assert_eq!(new_cache.s_bar(), cache.s_bar());
        scheme.systems[0].matrix = new_matrix;
        let (scratch, _) = fresh_eval(&scheme);
        assert!(relative_frobenius_error(&updated, &scratch) < 1e-13);
    }

    #[test]
    fn wrong_target_or_size_is_rejected() {
        let scheme = pair_scheme(71, 2, 2);
        let (_, cache) = fresh_eval(&scheme);
        let bad_size = SubsystemUpdate {
            subsystem: 0,
            matrix: crate::linalg::ComplexMatrix::zeros(3, 3),
        };
        assert!(matches!(
            update_subsystem(&cache, &bad_size),
            Err(Error::ShapeMismatch { .. })
        ));
        let bad_index = SubsystemUpdate {
            subsystem: 9,
            matrix: crate::linalg::ComplexMatrix::zeros(4, 4),
        };
        assert!(matches!(
            update_subsystem(&cache, &bad_index),
            Err(Error::SubsystemNotInSupersystem { index: 9 })
        ));
    }

    #[test]
    fn embedded_members_cannot_be_updated() {
        // reduced plan with a closed hub in the connection system: updates
        // must target supersystem members only
        let mut rng = testkit::rng(73);
        let hub = NetworkSystem::scattering(
            testkit::random_contraction(&mut rng, 2),
            PortPartition::trivial(2, "C"),
        )
        .unwrap();
        let outer = {
            let p = PortPartition::new(
                4,
                vec![("N".into(), vec![0, 1]), ("C".into(), vec![2, 3])],
            )
            .unwrap();
            NetworkSystem::scattering(testkit::random_contraction(&mut rng, 4), p).unwrap()
        };
        let scheme = ConnectionScheme::new(
            vec!["outer".into(), "hub".into()],
            vec![outer, hub],
            vec![Join {
                system_a: 0,
                set_a: "C".into(),
                system_b: 1,
                set_b: "C".into(),
            }],
            vec![],
        )
        .unwrap();
        let plan = plan_reduction(&scheme, ReductionObjective::PreferClosedPorts);
        assert_eq!(plan.connection_members, vec![1]);
        let (_, cache) = evaluate(&scheme, &plan).unwrap();
        let cache = cache.unwrap();
        let upd = SubsystemUpdate {
            subsystem: 1,
            matrix: crate::linalg::ComplexMatrix::zeros(2, 2),
        };
        assert!(matches!(
            update_subsystem(&cache, &upd),
            Err(Error::SubsystemNotInSupersystem { index: 1 })
        ));
    }

    #[test]
    fn residual_check_runs_after_interval() {
        let scheme = pair_scheme(72, 1, 2);
        let (_, mut cache) = fresh_eval(&scheme);
        for step in 0..RESIDUAL_CHECK_INTERVAL {
            let mut rng = testkit::rng(8000 + step as u64);
            let (_, next) = update_subsystem(
                &cache,
                &SubsystemUpdate {
                    subsystem: 0,
                    matrix: testkit::random_contraction(&mut rng, 3),
                },
            )
            .unwrap();
            cache = next;
        }
        // counter wrapped: the 64th update triggered the check and reset
        assert_eq!(cache.updates_since_check, 0);
        assert!(cache.residual() < RESIDUAL_REBUILD_THRESHOLD);
    }
}
