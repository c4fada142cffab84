//! Analytic transmission-line-network scattering: ground-truth generator,
//! validator and random-instance factory.
//!
//! A graph is a network of one-dimensional wave-bearing bonds with
//! continuity of the potential and conservation of the flux at every node.
//! Its nodal response matrix is
//!
//! ```text
//! M_ab = j δ_ab Σ_g c_ag cot(k l_ag) - j c_ab csc(k l_ab)
//! ```
//!
//! and with the lead selector W picking the external nodes, the node
//! potentials under unit excitation are Ψ = 2 (M + WᵀW)⁻¹ Wᵀ and the
//! scattering matrix follows from ψ_ℓ = (I + S) a as S = W Ψ - I. A
//! zero-length bond then transmits with coefficient one, so merging two
//! external nodes is exactly a delta-connection of the two scattering
//! matrices: connections of graphs are themselves graphs, which makes glued
//! graphs an independent oracle for the network cascade formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, LuFactors, C64};
use crate::network::{NetworkSystem, PortPartition};

/// Bonds thinner than this in |sin(k l)| count as resonant.
pub const RESONANCE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// An ideal transmission-line network: node positions (metadata for random
/// instances), bonds with explicit lengths, and the ordered external nodes
/// carrying ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub positions: Vec<(f64, f64)>,
    pub bonds: Vec<Bond>,
    pub external: Vec<usize>,
}

impl Graph {
    pub fn new(positions: Vec<(f64, f64)>, bonds: Vec<Bond>, external: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        let mut degree = vec![0usize; n];
        let mut seen = std::collections::HashSet::new();
        for bond in &bonds {
            if bond.a >= n || bond.b >= n {
                return Err(Error::InvalidGluing {
                    context: format!("bond ({}, {}) references a missing node", bond.a, bond.b),
                });
            }
            if bond.a == bond.b {
                return Err(Error::InvalidGluing {
                    context: format!("self-loop at node {}", bond.a),
                });
            }
            if !(bond.length > 0.0) {
                return Err(Error::InvalidGluing {
                    context: format!("bond ({}, {}) has non-positive length", bond.a, bond.b),
                });
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen.insert(key) {
                return Err(Error::InvalidGluing {
                    context: format!("duplicate bond between nodes {} and {}", key.0, key.1),
                });
            }
            degree[bond.a] += 1;
            degree[bond.b] += 1;
        }
        if let Some(isolated) = degree.iter().position(|&d| d == 0) {
            return Err(Error::InvalidGluing {
                context: format!("node {isolated} participates in no bond"),
            });
        }
        for &e in &external {
            if e >= n {
                return Err(Error::InvalidGluing {
                    context: format!("external node {e} does not exist"),
                });
            }
        }
        Ok(Self {
            positions,
            bonds,
            external,
        })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn port_count(&self) -> usize {
        self.external.len()
    }

    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|i| !self.external.contains(i))
            .collect()
    }
}

/// Node response with the external-port maps for one wavevector.
#[derive(Debug, Clone)]
pub struct GraphSolution {
    /// nodal flux response, n_n x n_n, symmetric
    pub m: ComplexMatrix,
    /// node potentials per unit port excitation, n_n x n_ports
    pub psi: ComplexMatrix,
    /// port scattering matrix, n_ports x n_ports
    pub s: ComplexMatrix,
}

fn cot(z: C64) -> C64 {
    z.cos() / z.sin()
}

fn csc(z: C64) -> C64 {
    C64::new(1.0, 0.0) / z.sin()
}

/// Builds the nodal response matrix M at wavevector `k`, rejecting bonds at
/// resonance (|sin(k l)| below the guard).
pub fn graph_m_matrix(g: &Graph, k: C64) -> Result<ComplexMatrix> {
    let n = g.node_count();
    let j = C64::new(0.0, 1.0);
    let mut m = ComplexMatrix::zeros(n, n);
    for bond in &g.bonds {
        let kl = k * C64::new(bond.length, 0.0);
        let s = kl.sin();
        if s.norm() < RESONANCE_GUARD {
            return Err(Error::ResonantBond {
                a: bond.a,
                b: bond.b,
                magnitude: s.norm(),
            });
        }
        let ct = j * cot(kl);
        let cs = j * csc(kl);
        m[(bond.a, bond.a)] += ct;
        m[(bond.b, bond.b)] += ct;
        m[(bond.a, bond.b)] -= cs;
        m[(bond.b, bond.a)] -= cs;
    }
    Ok(m)
}

/// Solves the wave problem: node potentials and the port scattering matrix.
/// Internal nodes carry zero nodal flux; external nodes couple to the leads
/// through the selector W.
pub fn graph_scattering(g: &Graph, k: C64) -> Result<GraphSolution> {
    let m = graph_m_matrix(g, k)?;
    let n = g.node_count();
    let n_ext = g.port_count();
    // A = M + WᵀW: WᵀW adds one on the diagonal of each external node
    let mut a = m.clone();
    for &e in &g.external {
        a[(e, e)] += C64::new(1.0, 0.0);
    }
    // rhs = 2 Wᵀ
    let mut rhs = ComplexMatrix::zeros(n, n_ext);
    for (col, &e) in g.external.iter().enumerate() {
        rhs[(e, col)] = C64::new(2.0, 0.0);
    }
    let psi = LuFactors::factor(&a)
        .and_then(|f| f.solve(&rhs))
        .map_err(|_| Error::ResonantGraph)?;
    // S = W Ψ - I
    let mut s = ComplexMatrix::zeros(n_ext, n_ext);
    for (row, &e) in g.external.iter().enumerate() {
        for col in 0..n_ext {
            s[(row, col)] = psi[(e, col)];
        }
        s[(row, row)] -= C64::new(1.0, 0.0);
    }
    Ok(GraphSolution { m, psi, s })
}

/// Node identity maps from the constituent graphs into a glued graph.
#[derive(Debug, Clone)]
pub struct GlueMaps {
    pub from_first: Vec<usize>,
    pub from_second: Vec<usize>,
}

/// Glues two graphs: each paired couple of external nodes becomes one
/// internal node inheriting all bonds; unpaired external nodes remain
/// ports (first graph's ports first).
pub fn glue_graphs(g1: &Graph, g2: &Graph, pairing: &[(usize, usize)]) -> Result<(Graph, GlueMaps)> {
    for &(a, b) in pairing {
        if !g1.external.contains(&a) {
            return Err(Error::InvalidGluing {
                context: format!("node {a} is not external in the first graph"),
            });
        }
        if !g2.external.contains(&b) {
            return Err(Error::InvalidGluing {
                context: format!("node {b} is not external in the second graph"),
            });
        }
    }
    let n1 = g1.node_count();
    let from_first: Vec<usize> = (0..n1).collect();
    let mut from_second: Vec<usize> = (0..g2.node_count()).map(|i| n1 + i).collect();
    let mut positions = g1.positions.clone();
    positions.extend(g2.positions.iter().copied());

    // merge each pair onto the first graph's node id
    let mut drop_second: Vec<usize> = Vec::new();
    for &(a, b) in pairing {
        from_second[b] = a;
        drop_second.push(b);
    }
    // compact node ids: second-graph nodes that were merged disappear
    let mut remap = vec![usize::MAX; positions.len()];
    let mut kept_positions = Vec::new();
    for i in 0..n1 {
        remap[i] = kept_positions.len();
        kept_positions.push(positions[i]);
    }
    for i in 0..g2.node_count() {
        if drop_second.contains(&i) {
            continue;
        }
        remap[n1 + i] = kept_positions.len();
        kept_positions.push(positions[n1 + i]);
    }
    let map1: Vec<usize> = from_first.iter().map(|&i| remap[i]).collect();
    let map2: Vec<usize> = from_second.iter().map(|&i| remap[i]).collect();

    let mut bonds = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (bonds_in, map) in [(&g1.bonds, &map1), (&g2.bonds, &map2)] {
        for bond in bonds_in.iter() {
            let a = map[bond.a];
            let b = map[bond.b];
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::InvalidGluing {
                    context: format!(
                        "gluing creates parallel bonds between merged nodes {} and {}",
                        key.0, key.1
                    ),
                });
            }
            bonds.push(Bond { a, b, length: bond.length });
        }
    }

    let paired_first: Vec<usize> = pairing.iter().map(|&(a, _)| a).collect();
    let paired_second: Vec<usize> = pairing.iter().map(|&(_, b)| b).collect();
    let mut external: Vec<usize> = g1
        .external
        .iter()
        .filter(|e| !paired_first.contains(e))
        .map(|&e| map1[e])
        .collect();
    external.extend(
        g2.external
            .iter()
            .filter(|e| !paired_second.contains(e))
            .map(|&e| map2[e]),
    );

    let glued = Graph::new(kept_positions, bonds, external)?;
    Ok((
        glued,
        GlueMaps {
            from_first: map1,
            from_second: map2,
        },
    ))
}

/// Potentials and boundary fluxes of a node subset `s` of internal nodes:
/// ψ^S are the rows of Ψ a at `s`, and φ^S sums, at each node of `s`, the
/// bi-directional bond fluxes exchanged with internal neighbors.
pub fn subgraph_interface(
    g: &Graph,
    k: C64,
    s: &[usize],
    a: &[C64],
) -> Result<(Vec<C64>, Vec<C64>)> {
    if a.len() != g.port_count() {
        return Err(Error::InvalidSubset {
            context: format!(
                "excitation has {} entries for {} ports",
                a.len(),
                g.port_count()
            ),
        });
    }
    for &node in s {
        if node >= g.node_count() || g.external.contains(&node) {
            return Err(Error::InvalidSubset {
                context: format!("node {node} is not an internal node"),
            });
        }
    }
    let sol = graph_scattering(g, k)?;
    let a_col = ComplexMatrix::from_fn(a.len(), 1, |i, _| a[i]);
    let psi_nodes = sol.psi.mul(&a_col);
    let psi_s: Vec<C64> = s.iter().map(|&node| psi_nodes[(node, 0)]).collect();

    let internal = g.internal_nodes();
    let j = C64::new(0.0, 1.0);
    let mut phi_s = vec![C64::new(0.0, 0.0); s.len()];
    for bond in &g.bonds {
        let kl = k * C64::new(bond.length, 0.0);
        let ct = j * cot(kl);
        let cs = j * csc(kl);
        for (alpha, beta) in [(bond.a, bond.b), (bond.b, bond.a)] {
            let Some(slot) = s.iter().position(|&n| n == alpha) else {
                continue;
            };
            if !internal.contains(&beta) {
                continue;
            }
            // net bi-directional flux at alpha along this bond
            phi_s[slot] += ct * psi_nodes[(alpha, 0)] - cs * psi_nodes[(beta, 0)];
        }
    }
    Ok((psi_s, phi_s))
}

/// Deterministic random-graph factory. Nodes are placed uniformly in the
/// unit square, bond lengths are the Euclidean node distances, and the bond
/// set is an exact-count random sample of the allowed node pairs. The bond
/// set is resampled (keeping positions) while any node is isolated or any
/// bond is resonant at `k_check`.
#[derive(Debug, Clone)]
pub struct RandomGraphSpec {
    pub ports: usize,
    pub density: f64,
    pub seed: u64,
    pub k_check: C64,
    /// resonance threshold used during generation (the guard used at
    /// evaluation time stays [`RESONANCE_GUARD`])
    pub min_sin: f64,
    /// node groups forbidden from hosting intra-group bonds
    pub excluded_groups: Vec<Vec<usize>>,
    pub max_attempts: usize,
}

impl RandomGraphSpec {
    pub fn new(ports: usize, density: f64, seed: u64, k_check: C64) -> Self {
        Self {
            ports,
            density,
            seed,
            k_check,
            min_sin: RESONANCE_GUARD,
            excluded_groups: Vec::new(),
            max_attempts: 100,
        }
    }

    pub fn with_min_sin(mut self, min_sin: f64) -> Self {
        self.min_sin = min_sin;
        self
    }

    pub fn with_excluded_groups(mut self, groups: Vec<Vec<usize>>) -> Self {
        self.excluded_groups = groups;
        self
    }

    pub fn generate(&self) -> Result<Graph> {
        use rand::prelude::*;
        if self.ports < 2 {
            return Err(Error::GenerationFailed {
                attempts: 0,
                context: "a graph needs at least two nodes".into(),
            });
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::GenerationFailed {
                attempts: 0,
                context: format!("density {} outside (0, 1]", self.density),
            });
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.ports;
        let positions: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();

        let mut candidate_pairs = Vec::new();
        for i in 0..n {
            'pair: for j in (i + 1)..n {
                for group in &self.excluded_groups {
                    if group.contains(&i) && group.contains(&j) {
                        continue 'pair;
                    }
                }
                candidate_pairs.push((i, j));
            }
        }
        if candidate_pairs.is_empty() {
            return Err(Error::GenerationFailed {
                attempts: 0,
                context: "no candidate node pairs left after exclusions".into(),
            });
        }
        let target = ((candidate_pairs.len() as f64) * self.density).round() as usize;
        let target = target.clamp(1, candidate_pairs.len());

        for attempt in 0..self.max_attempts {
            let mut pairs = candidate_pairs.clone();
            // partial Fisher-Yates: the first `target` entries are the sample
            for i in 0..target {
                let pick = rng.gen_range(i..pairs.len());
                pairs.swap(i, pick);
            }
            pairs.truncate(target);

            let mut degree = vec![0usize; n];
            let mut ok = true;
            let mut bonds = Vec::with_capacity(target);
            for &(i, j) in &pairs {
                let (xi, yi) = positions[i];
                let (xj, yj) = positions[j];
                let length = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                let sin_mag = (self.k_check * C64::new(length, 0.0)).sin().norm();
                if length <= 0.0 || sin_mag < self.min_sin {
                    ok = false;
                    break;
                }
                degree[i] += 1;
                degree[j] += 1;
                bonds.push(Bond { a: i, b: j, length });
            }
            if ok && degree.iter().all(|&d| d > 0) {
                let _ = attempt;
                return Graph::new(positions, bonds, (0..n).collect());
            }
        }
        Err(Error::GenerationFailed {
            attempts: self.max_attempts,
            context: "could not draw a connected, resonance-free bond set".into(),
        })
    }
}

/// Random graph with every node external, per the default factory settings.
pub fn random_graph(n_ports: usize, density: f64, seed: u64, k_check: C64) -> Result<Graph> {
    RandomGraphSpec::new(n_ports, density, seed, k_check).generate()
}

/// Wraps a graph's scattering matrix as a network system whose ports follow
/// the graph's external-node order.
pub fn graph_system(g: &Graph, k: C64, partition: PortPartition) -> Result<NetworkSystem> {
    let sol = graph_scattering(g, k)?;
    NetworkSystem::scattering(sol.s, partition)
}
