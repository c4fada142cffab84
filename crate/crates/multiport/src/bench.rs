//! Benchmark experiments at desk scale: method comparison, update
//! comparison and the quasi-delta epsilon sweep, with CSV reporting.
//!
//! The test bed is a "meta-network" of four graph-backed subsystems joined
//! serially, in parallel and in a cycle: a and b expose one free bus and
//! connect to each other and to the hub d; c exposes one free bus and
//! connects to d only; the hub d connects to a, b and c and keeps one free
//! bus (none in the modified variant). Every join carries `n_bus` ports, so
//! the standard meta-network has 12 n_bus ports in total. Ground truth
//! comes from gluing the four graphs into one supergraph and solving it
//! analytically.

use num_complex::Complex64;

use crate::cascade::{
    evaluate, iterative_cascade, plan_reduction, CascadeCache, ReductionObjective, ReductionPlan,
};
use crate::connection::{ConnectionScheme, DeltaPairing, Join};
use crate::error::{Error, Result};
use crate::graph::{glue_graphs, graph_scattering, Graph, RandomGraphSpec};
use crate::linalg::{relative_standard_error, ComplexMatrix, C64};
use crate::network::{
    s_from_z, z_from_s, NetworkSystem, PortPartition, Representation, DEFAULT_Z0,
};

/// Which benchmark to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    MethodsCompare,
    UpdateCompare,
    EpsilonSweep,
}

/// Benchmark configuration. `trials: None` uses the auto schedule
/// max(3, round(600 / n_bus)); timing repetitions are medians after one
/// warm-up run.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub experiment: Experiment,
    pub n_bus_values: Vec<usize>,
    pub trials: Option<usize>,
    pub seed: u64,
    pub k: C64,
    pub timing_reps: usize,
    pub epsilon_grid: Vec<f64>,
}

impl BenchConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n_bus_values: vec![1, 2, 5, 10, 20, 50, 100],
            trials: None,
            seed: 0,
            k: Complex64::new(3.0, 0.05),
            timing_reps: 5,
            epsilon_grid: log_spaced(1e-12, 1e-2, 21),
        }
    }

    pub fn trials_for(&self, n_bus: usize) -> usize {
        self.trials
            .unwrap_or_else(|| (600.0 / n_bus as f64).round().max(3.0) as usize)
    }
}

/// 21-point style log-spaced grid, inclusive of both ends.
pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (points - 1) as f64))
        .collect()
}

/// One report row. `subsystem` is empty for rows not tied to a subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub experiment: String,
    pub n_bus: usize,
    pub method: String,
    pub subsystem: String,
    pub median_time_s: f64,
    pub rel_std_err: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// per n_bus: (epsilon at minimum error, minimum error); filled by the
    /// epsilon sweep
    pub eps_minima: Vec<(usize, f64, f64)>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,n_bus,method,subsystem,median_time_s,rel_std_err,trials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.9e},{:.17e},{}\n",
                r.experiment, r.n_bus, r.method, r.subsystem, r.median_time_s, r.rel_std_err, r.trials
            ));
        }
        out
    }
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Times `f` with one warm-up call and `reps` measured repetitions,
/// returning the median seconds and the last result.
pub fn time_median<T>(reps: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let mut result = f(); // warm-up
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let start = std::time::Instant::now();
        result = f();
        times.push(start.elapsed().as_secs_f64());
    }
    (median(&mut times), result)
}

/// Names of the four meta-network subsystems, in declaration order.
pub const META_MEMBERS: [&str; 4] = ["a", "b", "c", "d"];

/// A fully built meta-network instance: the scheme over graph-backed
/// subsystems, the constituent graphs, and the glued ground-truth
/// supergraph.
pub struct MetaNetwork {
    pub scheme: ConnectionScheme,
    pub graphs: Vec<Graph>,
    pub supergraph: Graph,
    pub n_bus: usize,
    pub k: C64,
    pub modified: bool,
}

struct MemberSpec {
    /// set labels in partition order; "N" is free, others pair by name
    sets: &'static [&'static str],
}

const STANDARD_MEMBERS: [MemberSpec; 4] = [
    MemberSpec { sets: &["N", "C:b", "C:d"] },
    MemberSpec { sets: &["N", "C:a", "C:d"] },
    MemberSpec { sets: &["N", "C:d"] },
    MemberSpec { sets: &["N", "C:a", "C:b", "C:c"] },
];

const MODIFIED_MEMBERS: [MemberSpec; 4] = [
    MemberSpec { sets: &["N", "C:b", "C:d"] },
    MemberSpec { sets: &["N", "C:a", "C:d"] },
    MemberSpec { sets: &["N", "C:d"] },
    MemberSpec { sets: &["C:a", "C:b", "C:c"] },
];

const META_JOINS: [(usize, &str, usize, &str); 4] = [
    (0, "C:b", 1, "C:a"),
    (0, "C:d", 3, "C:a"),
    (1, "C:d", 3, "C:b"),
    (2, "C:d", 3, "C:c"),
];

fn member_seed(instance_seed: u64, member: usize) -> u64 {
    // splitmix-style decorrelation of per-member streams
    let mut x = instance_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(member as u64 + 1);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x
}

/// Generates one subsystem graph: one node per port, bonds drawn from half
/// of the allowed pairs. Pairs inside a connected group are excluded so the
/// glued supergraph stays a simple graph.
fn member_graph(spec: &MemberSpec, n_bus: usize, seed: u64, k: C64) -> Result<Graph> {
    let groups: Vec<Vec<usize>> = spec
        .sets
        .iter()
        .enumerate()
        .filter(|(_, label)| **label != "N")
        .map(|(i, _)| (i * n_bus..(i + 1) * n_bus).collect())
        .collect();
    RandomGraphSpec::new(spec.sets.len() * n_bus, 0.5, seed, k)
        .with_excluded_groups(groups)
        .generate()
}

impl MetaNetwork {
    /// Builds a seeded instance. `modified` replaces the hub by a variant
    /// without free ports.
    pub fn generate(seed: u64, n_bus: usize, k: C64, modified: bool) -> Result<Self> {
        let members: &[MemberSpec] = if modified {
            &MODIFIED_MEMBERS
        } else {
            &STANDARD_MEMBERS
        };
        let mut graphs = Vec::with_capacity(4);
        let mut systems = Vec::with_capacity(4);
        for (idx, spec) in members.iter().enumerate() {
            let g = member_graph(spec, n_bus, member_seed(seed, idx), k)?;
            let sets: Vec<(String, Vec<usize>)> = spec
                .sets
                .iter()
                .enumerate()
                .map(|(i, label)| (label.to_string(), (i * n_bus..(i + 1) * n_bus).collect()))
                .collect();
            let partition = PortPartition::new(spec.sets.len() * n_bus, sets)?;
            let sol = graph_scattering(&g, k)?;
            systems.push(NetworkSystem::scattering(sol.s, partition)?);
            graphs.push(g);
        }
        let joins = META_JOINS
            .iter()
            .map(|&(a, sa, b, sb)| Join {
                system_a: a,
                set_a: sa.to_string(),
                system_b: b,
                set_b: sb.to_string(),
            })
            .collect();
        let scheme = ConnectionScheme::new(
            META_MEMBERS.iter().map(|s| s.to_string()).collect(),
            systems,
            joins,
            vec![],
        )?;

        let supergraph = Self::glue_all(&scheme, &graphs)?;
        Ok(Self {
            scheme,
            graphs,
            supergraph,
            n_bus,
            k,
            modified,
        })
    }

    fn glue_all(scheme: &ConnectionScheme, graphs: &[Graph]) -> Result<Graph> {
        // glue members one at a time; track each member's node ids in the
        // accumulated graph
        let mut acc = graphs[0].clone();
        let mut maps: Vec<Vec<usize>> = vec![(0..graphs[0].node_count()).collect()];
        for next in 1..graphs.len() {
            let mut pairing = Vec::new();
            for j in &scheme.joins {
                let (prev, prev_set, own_set) = if j.system_b == next && j.system_a < next {
                    (j.system_a, &j.set_a, &j.set_b)
                } else if j.system_a == next && j.system_b < next {
                    (j.system_b, &j.set_b, &j.set_a)
                } else {
                    continue;
                };
                let prev_ports = scheme.systems[prev].partition.set(prev_set)?;
                let own_ports = scheme.systems[next].partition.set(own_set)?;
                for (&p, &q) in prev_ports.iter().zip(own_ports) {
                    pairing.push((maps[prev][p], q));
                }
            }
            let (glued, glue_maps) = glue_graphs(&acc, &graphs[next], &pairing)?;
            for m in &mut maps {
                for id in m.iter_mut() {
                    *id = glue_maps.from_first[*id];
                }
            }
            maps.push(glue_maps.from_second.clone());
            acc = glued;
        }
        Ok(acc)
    }

    /// Ground-truth scattering matrix from the glued supergraph. Its port
    /// order matches the canonical member-major order of [`evaluate`].
    pub fn oracle(&self) -> Result<ComplexMatrix> {
        Ok(graph_scattering(&self.supergraph, self.k)?.s)
    }

    /// Regenerates one subsystem's graph with a fresh seed, returning the
    /// new scattering matrix (same port layout).
    pub fn regenerate_member(&mut self, member: usize, seed: u64) -> Result<ComplexMatrix> {
        let members: &[MemberSpec] = if self.modified {
            &MODIFIED_MEMBERS
        } else {
            &STANDARD_MEMBERS
        };
        let g = member_graph(&members[member], self.n_bus, seed, self.k)?;
        let sol = graph_scattering(&g, self.k)?;
        self.graphs[member] = g;
        self.scheme.systems[member].matrix = sol.s.clone();
        self.supergraph = Self::glue_all(&self.scheme, &self.graphs)?;
        Ok(sol.s)
    }

    pub fn global_plan(&self) -> ReductionPlan {
        plan_reduction(&self.scheme, ReductionObjective::None)
    }

    pub fn reduced_plan(&self) -> ReductionPlan {
        if self.modified {
            plan_reduction(&self.scheme, ReductionObjective::PreferClosedPorts)
        } else {
            plan_reduction(&self.scheme, ReductionObjective::MaxReduction)
        }
    }

    /// Evaluates the full (unreduced) scheme through impedance or
    /// admittance parameters: subsystems are converted, the delta
    /// connections become a quasi-delta system at the given epsilon, and
    /// the cascade takes the form M_NN - M_NC (M_con + M_CC)⁻¹ M_CN.
    pub fn representation_path(
        &self,
        representation: Representation,
        epsilon: f64,
    ) -> Result<ComplexMatrix> {
        let scheme = &self.scheme;
        let layout = crate::cascade::SupersystemLayout::build(
            scheme,
            &(0..scheme.systems.len()).collect::<Vec<_>>(),
        )?;
        let mats: Vec<ComplexMatrix> = scheme
            .systems
            .iter()
            .map(|sys| match representation {
                Representation::Impedance => z_from_s(&sys.matrix, &sys.reference),
                Representation::Admittance => {
                    crate::network::y_from_s(&sys.matrix, &sys.reference)
                }
                Representation::Scattering => Err(Error::RepresentationMismatch {
                    expected: "Z or Y".into(),
                    actual: "S".into(),
                }),
            })
            .collect::<Result<_>>()?;
        let pairs: Vec<DeltaPairing> = (0..scheme.joins.len())
            .map(|ji| {
                let j = &scheme.joins[ji];
                Ok(DeltaPairing {
                    first: layout
                        .c_positions(layout.slot_of(j.system_a).unwrap(), &j.set_a)?
                        .to_vec(),
                    second: layout
                        .c_positions(layout.slot_of(j.system_b).unwrap(), &j.set_b)?
                        .to_vec(),
                })
            })
            .collect::<Result<_>>()?;
        let con = crate::connection::quasi_delta(
            representation,
            &pairs,
            layout.c_total,
            epsilon,
            DEFAULT_Z0,
        )?;
        let m_cc = layout.assemble_cc(&mats);
        let m_cn = layout.assemble_cn(&mats);
        let x = crate::linalg::solve_linear(&m_cc.add(&con.to_dense()), &m_cn)?;
        let m_nn = layout.assemble_nn(&mats);
        let correction = layout.left_mul_snc(&mats, &x);
        Ok(m_nn.sub(&correction))
    }

    /// Impedance-path evaluation of the full scheme (see
    /// [`Self::representation_path`]).
    pub fn impedance_path(&self, epsilon: f64) -> Result<ComplexMatrix> {
        self.representation_path(Representation::Impedance, epsilon)
    }
}

/// Runs the three evaluation methods on seeded meta-network instances
/// (standard and modified), timing each and comparing against the glued
/// oracle.
pub fn run_methods_compare(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for &modified in &[false, true] {
        let experiment = if modified {
            "methods-compare-modified"
        } else {
            "methods-compare"
        };
        for &n_bus in &cfg.n_bus_values {
            let trials = cfg.trials_for(n_bus);
            let mut times: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            let mut errs: [f64; 3] = [0.0; 3];
            for trial in 0..trials {
                let seed = cfg.seed ^ (trial as u64).wrapping_mul(0x5851_f42d_4c95_7f2d)
                    ^ (n_bus as u64) << 32
                    ^ (modified as u64) << 63;
                let net = MetaNetwork::generate(seed, n_bus, cfg.k, modified)?;
                let oracle = net.oracle()?;
                let global_plan = net.global_plan();
                let reduced_plan = net.reduced_plan();

                let (t_global, s_global) =
                    time_median(cfg.timing_reps, || evaluate(&net.scheme, &global_plan));
                let (t_reduced, s_reduced) =
                    time_median(cfg.timing_reps, || evaluate(&net.scheme, &reduced_plan));
                let (t_iter, s_iter) =
                    time_median(cfg.timing_reps, || iterative_cascade(&net.scheme));
                let s_global = s_global?.0;
                let s_reduced = s_reduced?.0;
                let s_iter = s_iter?;

                times[0].push(t_global);
                times[1].push(t_reduced);
                times[2].push(t_iter);
                errs[0] += relative_standard_error(&s_global, &oracle);
                errs[1] += relative_standard_error(&s_reduced, &oracle);
                errs[2] += relative_standard_error(&s_iter, &oracle);
            }
            for (idx, method) in ["global", "reduced", "iterative"].iter().enumerate() {
                report.rows.push(BenchRow {
                    experiment: experiment.to_string(),
                    n_bus,
                    method: method.to_string(),
                    subsystem: String::new(),
                    median_time_s: median(&mut times[idx]),
                    rel_std_err: errs[idx] / trials as f64,
                    trials,
                });
            }
        }
    }
    Ok(report)
}

/// Per updated subsystem: the update engine against global re-evaluation
/// and the iterative cascade. The update row's error is measured against
/// the from-scratch re-evaluation of the updated configuration; the other
/// rows are measured against the glued oracle.
pub fn run_update_compare(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    let updated_members = [0usize, 2, 3]; // a, c, d
    for &n_bus in &cfg.n_bus_values {
        let trials = cfg.trials_for(n_bus);
        for &member in &updated_members {
            let mut t_update = Vec::new();
            let mut t_global = Vec::new();
            let mut t_iter = Vec::new();
            let mut err_update = 0.0;
            let mut err_global = 0.0;
            let mut err_iter = 0.0;
            for trial in 0..trials {
                let seed = cfg.seed
                    ^ (trial as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)
                    ^ (n_bus as u64) << 32
                    ^ (member as u64) << 56;
                let mut net = MetaNetwork::generate(seed, n_bus, cfg.k, false)?;
                let global_plan = net.global_plan();
                let (_, cache) = evaluate(&net.scheme, &global_plan)?;
                let cache: CascadeCache = cache.expect("global plan yields a cache");

                let new_matrix = net.regenerate_member(member, seed ^ 0xdead_beef)?;
                let oracle = net.oracle()?;

                let upd = crate::update::SubsystemUpdate {
                    subsystem: member,
                    matrix: new_matrix,
                };
                let (t_u, updated) =
                    time_median(cfg.timing_reps, || crate::update::update_subsystem(&cache, &upd));
                let (s_updated, _) = updated?;
                let (t_g, fresh) =
                    time_median(cfg.timing_reps, || evaluate(&net.scheme, &global_plan));
                let (s_fresh, _) = fresh?;
                let (t_i, s_iter) =
                    time_median(cfg.timing_reps, || iterative_cascade(&net.scheme));
                let s_iter = s_iter?;

                t_update.push(t_u);
                t_global.push(t_g);
                t_iter.push(t_i);
                err_update += relative_standard_error(&s_updated, &s_fresh);
                err_global += relative_standard_error(&s_fresh, &oracle);
                err_iter += relative_standard_error(&s_iter, &oracle);
            }
            let name = META_MEMBERS[member];
            for (method, times, err) in [
                ("update", &mut t_update, err_update),
                ("global", &mut t_global, err_global),
                ("iterative", &mut t_iter, err_iter),
            ] {
                report.rows.push(BenchRow {
                    experiment: "update-compare".to_string(),
                    n_bus,
                    method: method.to_string(),
                    subsystem: name.to_string(),
                    median_time_s: median(times),
                    rel_std_err: err / trials as f64,
                    trials,
                });
            }
        }
    }
    Ok(report)
}

/// Evaluates the meta-network through impedance parameters with quasi-delta
/// connections over a grid of epsilon values, comparing to the
/// oracle-converted impedance reference.
pub fn run_epsilon_sweep(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for &n_bus in &cfg.n_bus_values {
        let trials = cfg.trials.unwrap_or(3);
        let mut per_eps: Vec<f64> = vec![0.0; cfg.epsilon_grid.len()];
        for trial in 0..trials {
            let seed = cfg.seed ^ (trial as u64).wrapping_mul(0x9e37_79b9) ^ (n_bus as u64) << 32;
            let net = MetaNetwork::generate(seed, n_bus, cfg.k, false)?;
            let oracle_s = net.oracle()?;
            let n_free = oracle_s.rows();
            let z_ref = z_from_s(&oracle_s, &vec![Complex64::new(DEFAULT_Z0, 0.0); n_free])?;
            for (i, &eps) in cfg.epsilon_grid.iter().enumerate() {
                let z_tilde = net.impedance_path(eps)?;
                per_eps[i] += relative_standard_error(&z_tilde, &z_ref);
            }
        }
        for v in &mut per_eps {
            *v /= trials as f64;
        }
        let mut argmin = 0usize;
        for (i, &v) in per_eps.iter().enumerate() {
            if v < per_eps[argmin] {
                argmin = i;
            }
        }
        report
            .eps_minima
            .push((n_bus, cfg.epsilon_grid[argmin], per_eps[argmin]));
        for (i, &eps) in cfg.epsilon_grid.iter().enumerate() {
            report.rows.push(BenchRow {
                experiment: "epsilon-sweep".to_string(),
                n_bus,
                method: format!("eps={eps:.6e}"),
                subsystem: String::new(),
                median_time_s: 0.0,
                rel_std_err: per_eps[i],
                trials,
            });
        }
    }
    Ok(report)
}

/// Round-trip check used by the CLI: verifies that the S-representation is
/// declared before handing schemes to the evaluators.
pub fn ensure_scattering(scheme: &ConnectionScheme) -> Result<()> {
    for (name, sys) in scheme.names.iter().zip(&scheme.systems) {
        if sys.representation != Representation::Scattering {
            return Err(Error::RepresentationMismatch {
                expected: "S".into(),
                actual: format!("{} ({name})", sys.representation),
            });
        }
    }
    Ok(())
}

/// Converts a system to scattering form if needed (used by the CLI when
/// ingesting Z/Y network files).
pub fn to_scattering(sys: &NetworkSystem) -> Result<NetworkSystem> {
    match sys.representation {
        Representation::Scattering => Ok(sys.clone()),
        _ => sys.convert_to(Representation::Scattering),
    }
}

/// The S-matrix a Z-described system would have; exposed for CLI tests.
pub fn scattering_of_z(z: &ComplexMatrix, z0: f64) -> Result<ComplexMatrix> {
    s_from_z(z, &vec![Complex64::new(z0, 0.0); z.rows()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_frobenius_error;

    #[test]
    fn meta_network_counts() {
        let k = Complex64::new(3.0, 0.05);
        let net = MetaNetwork::generate(7, 2, k, false).unwrap();
        assert_eq!(net.scheme.systems.len(), 4);
        let total: usize = net.scheme.systems.iter().map(|s| s.ports()).sum();
        assert_eq!(total, 12 * 2);
        // 4 free buses remain; 8 buses are joined
        assert_eq!(net.supergraph.port_count(), 4 * 2);
        assert_eq!(net.supergraph.node_count(), 12 * 2 - 4 * 2);
    }

    #[test]
    fn modified_meta_network_has_closed_hub() {
        let k = Complex64::new(3.0, 0.05);
        let net = MetaNetwork::generate(8, 2, k, true).unwrap();
        assert_eq!(net.scheme.free_ports(3), 0);
        let plan = net.reduced_plan();
        assert_eq!(plan.connection_members, vec![3]);
        assert!(!plan.requires_star);
    }

    #[test]
    fn all_methods_match_the_oracle() {
        let k = Complex64::new(3.0, 0.05);
        for seed in [1u64, 2] {
            let net = MetaNetwork::generate(seed, 1, k, false).unwrap();
            let oracle = net.oracle().unwrap();
            let (s_global, _) = evaluate(&net.scheme, &net.global_plan()).unwrap();
            let (s_reduced, _) = evaluate(&net.scheme, &net.reduced_plan()).unwrap();
            let s_iter = iterative_cascade(&net.scheme).unwrap();
            assert!(relative_frobenius_error(&s_global, &oracle) < 1e-12);
            assert!(relative_frobenius_error(&s_reduced, &oracle) < 1e-12);
            assert!(relative_frobenius_error(&s_iter, &oracle) < 1e-12);
        }
    }

    #[test]
    fn modified_variant_matches_its_oracle() {
        let k = Complex64::new(3.0, 0.05);
        let net = MetaNetwork::generate(9, 2, k, true).unwrap();
        let oracle = net.oracle().unwrap();
        let (s_global, _) = evaluate(&net.scheme, &net.global_plan()).unwrap();
        let (s_reduced, cache) = evaluate(&net.scheme, &net.reduced_plan()).unwrap();
        assert!(cache.is_some()); // cascade path
        assert!(relative_frobenius_error(&s_global, &oracle) < 1e-12);
        assert!(relative_frobenius_error(&s_reduced, &oracle) < 1e-12);
    }

    #[test]
    fn methods_compare_schema() {
        let mut cfg = BenchConfig::new(Experiment::MethodsCompare);
        cfg.n_bus_values = vec![1, 2];
        cfg.trials = Some(2);
        cfg.timing_reps = 1;
        let report = run_methods_compare(&cfg).unwrap();
        // 3 methods x 2 sizes x 2 variants
        assert_eq!(report.rows.len(), 12);
        let csv = report.to_csv();
        assert!(csv.starts_with(
            "experiment,n_bus,method,subsystem,median_time_s,rel_std_err,trials\n"
        ));
        for row in &report.rows {
            assert!(row.rel_std_err.is_finite() && row.rel_std_err >= 0.0);
            assert!(row.rel_std_err < 1e-10);
        }
        // the three methods report mutually indistinguishable accuracy
        for n_bus in [1usize, 2] {
            for exp in ["methods-compare", "methods-compare-modified"] {
                let errs: Vec<f64> = report
                    .rows
                    .iter()
                    .filter(|r| r.n_bus == n_bus && r.experiment == exp)
                    .map(|r| r.rel_std_err)
                    .collect();
                let max = errs.iter().cloned().fold(0.0, f64::max);
                let min = errs.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(max <= 10.0 * min, "{exp} n_bus {n_bus}: spread {errs:?}");
            }
        }
    }

    #[test]
    fn update_compare_schema_and_accuracy() {
        let mut cfg = BenchConfig::new(Experiment::UpdateCompare);
        cfg.n_bus_values = vec![2];
        cfg.trials = Some(2);
        cfg.timing_reps = 1;
        let report = run_update_compare(&cfg).unwrap();
        // 3 methods x 3 subsystems x 1 size
        assert_eq!(report.rows.len(), 9);
        for row in &report.rows {
            if row.method == "update" {
                assert!(row.rel_std_err <= 1e-13, "update error {}", row.rel_std_err);
            }
        }
    }

    #[test]
    fn error_columns_are_deterministic() {
        let mut cfg = BenchConfig::new(Experiment::MethodsCompare);
        cfg.n_bus_values = vec![1];
        cfg.trials = Some(2);
        cfg.timing_reps = 1;
        let a = run_methods_compare(&cfg).unwrap();
        let b = run_methods_compare(&cfg).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.rel_std_err.to_bits(), rb.rel_std_err.to_bits());
        }
    }

    #[test]
    fn three_representations_agree_on_unreduced_schemes() {
        // the scheme keeps delta-connections, so the Z and Y paths go
        // through quasi-deltas and carry the epsilon accuracy floor
        let k = Complex64::new(3.0, 0.05);
        let eps = crate::connection::DEFAULT_EPSILON;
        for seed in [21u64, 22] {
            let net = MetaNetwork::generate(seed, 2, k, false).unwrap();
            let (s_tilde, _) = evaluate(&net.scheme, &net.global_plan()).unwrap();
            let n = s_tilde.rows();
            let refs = vec![Complex64::new(DEFAULT_Z0, 0.0); n];
            let z_from_s_path = z_from_s(&s_tilde, &refs).unwrap();
            let z_direct = net.representation_path(Representation::Impedance, eps).unwrap();
            let y_direct = net.representation_path(Representation::Admittance, eps).unwrap();
            let z_from_y_path = crate::network::z_from_y(&y_direct).unwrap();
            let err_z = crate::linalg::relative_frobenius_error(&z_direct, &z_from_s_path);
            let err_y = crate::linalg::relative_frobenius_error(&z_from_y_path, &z_from_s_path);
            assert!(err_z < 1e-6, "impedance path deviates {err_z:.3e}");
            assert!(err_y < 1e-6, "admittance path deviates {err_y:.3e}");
        }
    }

    #[test]
    fn epsilon_sweep_finds_interior_minimum() {
        let mut cfg = BenchConfig::new(Experiment::EpsilonSweep);
        cfg.n_bus_values = vec![2];
        cfg.trials = Some(1);
        let report = run_epsilon_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 21);
        let (_, eps_min, err_min) = report.eps_minima[0];
        assert!(eps_min > 1e-12 && eps_min < 1e-2);
        assert!(err_min < 1e-5, "minimum error {err_min}");
    }
}
