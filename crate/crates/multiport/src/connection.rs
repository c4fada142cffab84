//! Connection systems: pure delta-connection permutations, mixed systems
//! embedding subsystems, and quasi-delta impedance/admittance variants.
//!
//! A delta-connection joins two ports without delay, loss, reflection or
//! non-reciprocity; scattering-wise a pair of joined port sets contributes
//! mirrored identity blocks, so a connection system made of deltas only is a
//! symmetric permutation matrix and equals its own inverse. Embedding a
//! subsystem into the connection system replaces some of those identity
//! blocks by the subsystem's scattering matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_linear, ComplexMatrix, C64};
use crate::network::{y_from_s, z_from_s, NetworkSystem, Representation};

/// A declared join between the i-th ports of two equally sized port sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Join {
    pub system_a: usize,
    pub set_a: String,
    pub system_b: usize,
    pub set_b: String,
}

/// Declaration of which port sets of which subsystems are joined.
#[derive(Debug, Clone)]
pub struct ConnectionScheme {
    pub names: Vec<String>,
    pub systems: Vec<NetworkSystem>,
    pub joins: Vec<Join>,
    /// Subsystems designated as part of the connection system (manual
    /// reduced interpretation); [`crate::cascade::plan_reduction`] may pick
    /// its own set instead.
    pub embedded: Vec<usize>,
}

impl ConnectionScheme {
    pub fn new(
        names: Vec<String>,
        systems: Vec<NetworkSystem>,
        joins: Vec<Join>,
        embedded: Vec<usize>,
    ) -> Result<Self> {
        if names.len() != systems.len() {
            return Err(Error::InvalidScheme {
                context: "one name per system required".into(),
            });
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidScheme {
                    context: format!("duplicate system name `{n}`"),
                });
            }
        }
        let mut used: Vec<(usize, &str)> = Vec::new();
        for join in &joins {
            for (sys, set) in [(join.system_a, &join.set_a), (join.system_b, &join.set_b)] {
                let system = systems.get(sys).ok_or_else(|| Error::InvalidScheme {
                    context: format!("join references system {sys} out of {}", systems.len()),
                })?;
                system.partition.set(set)?;
                if used.contains(&(sys, set.as_str())) {
                    return Err(Error::InvalidScheme {
                        context: format!("port set {sys}:`{set}` participates in more than one join"),
                    });
                }
                used.push((sys, set));
            }
            if join.system_a == join.system_b && join.set_a == join.set_b {
                return Err(Error::InvalidScheme {
                    context: "cannot join a port set to itself".into(),
                });
            }
            let na = systems[join.system_a].partition.set(&join.set_a)?.len();
            let nb = systems[join.system_b].partition.set(&join.set_b)?.len();
            if na != nb {
                return Err(Error::PortSetMismatch {
                    context: format!(
                        "joined sets `{}` ({na} ports) and `{}` ({nb} ports)",
                        join.set_a, join.set_b
                    ),
                });
            }
        }
        for &e in &embedded {
            if e >= systems.len() {
                return Err(Error::InvalidScheme {
                    context: format!("embedded index {e} out of range"),
                });
            }
        }
        let scheme = Self {
            names,
            systems,
            joins,
            embedded,
        };
        scheme.check_embedded_non_adjacent(&scheme.embedded)?;
        Ok(scheme)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidScheme {
                context: format!("unknown system `{name}`"),
            })
    }

    /// True if the two members share at least one join (a member with a
    /// self-join is adjacent to itself).
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.joins.iter().any(|j| {
            (j.system_a == a && j.system_b == b) || (j.system_a == b && j.system_b == a)
        })
    }

    pub fn check_embedded_non_adjacent(&self, members: &[usize]) -> Result<()> {
        for (i, &a) in members.iter().enumerate() {
            if self.adjacent(a, a) {
                return Err(Error::InvalidReduction {
                    context: format!("system `{}` has an inner join and cannot be embedded", self.names[a]),
                });
            }
            for &b in &members[i + 1..] {
                if self.adjacent(a, b) {
                    return Err(Error::InvalidReduction {
                        context: format!(
                            "embedded systems `{}` and `{}` are directly joined",
                            self.names[a], self.names[b]
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Labels of `member`'s sets that participate in some join.
    pub fn joined_sets(&self, member: usize) -> Vec<&str> {
        let mut labels = Vec::new();
        for j in &self.joins {
            if j.system_a == member {
                labels.push(j.set_a.as_str());
            }
            if j.system_b == member {
                labels.push(j.set_b.as_str());
            }
        }
        labels
    }

    /// Number of connected (joined) ports of a member.
    pub fn connected_ports(&self, member: usize) -> usize {
        self.joined_sets(member)
            .iter()
            .map(|l| self.systems[member].partition.set(l).map(|s| s.len()).unwrap_or(0))
            .sum()
    }

    /// Number of free ports of a member.
    pub fn free_ports(&self, member: usize) -> usize {
        self.systems[member].ports() - self.connected_ports(member)
    }
}

/// Mirrored positions of one delta-joined pair of port sets within the
/// connection system's port order. The `first` member carries the positive
/// flux orientation in wave recovery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaPairing {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

/// An embedded subsystem inside a connection system: its matrix, the local
/// port indices facing the supersystem (in facing order) and its free local
/// ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedBlock {
    pub matrix: ComplexMatrix,
    /// positions within the connection system's connected port order
    pub positions: Vec<usize>,
    /// local port index facing each position
    pub local: Vec<usize>,
    /// local indices of the embedded system's free ports
    pub free_local: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ConKind {
    /// pure delta connections: a self-inverse symmetric permutation
    Permutation { perm: Vec<usize> },
    /// delta connections plus embedded subsystems
    Mixed {
        perm: Vec<Option<usize>>,
        blocks: Vec<EmbeddedBlock>,
    },
    /// quasi-delta connection converted to impedance or admittance form
    Dense {
        representation: Representation,
        matrix: ComplexMatrix,
    },
}

/// The multi-port system representing all joins of a connection scheme. Its
/// rows and columns are ordered exactly as the supersystem's connected-port
/// concatenation, so the generic connection formula applies with no extra
/// permutation; embedded free ports (if any) are appended after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSystem {
    n_connected: usize,
    n_free: usize,
    pairs: Vec<DeltaPairing>,
    kind: ConKind,
}

impl ConnectionSystem {
    pub fn n_connected(&self) -> usize {
        self.n_connected
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn is_pure_permutation(&self) -> bool {
        matches!(self.kind, ConKind::Permutation { .. })
    }

    /// Delta-pair position sets, in declaration order.
    pub fn pairs(&self) -> &[DeltaPairing] {
        &self.pairs
    }

    pub fn representation(&self) -> Representation {
        match &self.kind {
            ConKind::Dense { representation, .. } => *representation,
            _ => Representation::Scattering,
        }
    }

    pub fn embedded_blocks(&self) -> &[EmbeddedBlock] {
        match &self.kind {
            ConKind::Mixed { blocks, .. } => blocks,
            _ => &[],
        }
    }

    /// Dense matrix over connected ports followed by embedded free ports.
    pub fn to_dense(&self) -> ComplexMatrix {
        let n = self.n_connected + self.n_free;
        let mut m = ComplexMatrix::zeros(n, n);
        match &self.kind {
            ConKind::Permutation { perm } => {
                for (i, &j) in perm.iter().enumerate() {
                    m[(i, j)] = C64::new(1.0, 0.0);
                }
            }
            ConKind::Mixed { perm, blocks } => {
                for (i, p) in perm.iter().enumerate() {
                    if let Some(j) = p {
                        m[(i, *j)] = C64::new(1.0, 0.0);
                    }
                }
                let mut free_offset = self.n_connected;
                for b in blocks {
                    let mut global_of_local = vec![None; b.matrix.rows()];
                    for (k, &loc) in b.local.iter().enumerate() {
                        global_of_local[loc] = Some(b.positions[k]);
                    }
                    for &loc in &b.free_local {
                        global_of_local[loc] = Some(free_offset);
                        free_offset += 1;
                    }
                    for i in 0..b.matrix.rows() {
                        for j in 0..b.matrix.cols() {
                            let (Some(gi), Some(gj)) = (global_of_local[i], global_of_local[j])
                            else {
                                continue;
                            };
                            m[(gi, gj)] = b.matrix[(i, j)];
                        }
                    }
                }
            }
            ConKind::Dense { matrix, .. } => m = matrix.clone(),
        }
        m
    }

    /// A · S_con over the connected-port block, applied structurally.
    pub fn right_mul_cc(&self, a: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(a.cols(), self.n_connected);
        match &self.kind {
            ConKind::Permutation { perm } => {
                ComplexMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, perm[j])])
            }
            ConKind::Mixed { perm, blocks } => {
                let mut out = ComplexMatrix::zeros(a.rows(), a.cols());
                for (j, p) in perm.iter().enumerate() {
                    if let Some(src) = p {
                        for i in 0..a.rows() {
                            out[(i, j)] = a[(i, *src)];
                        }
                    }
                }
                for b in blocks {
                    let gathered = a.select_cols(&b.positions);
                    let sub = b.matrix.select(&b.local, &b.local);
                    let prod = gathered.mul(&sub);
                    for (jj, &col) in b.positions.iter().enumerate() {
                        for i in 0..a.rows() {
                            out[(i, col)] += prod[(i, jj)];
                        }
                    }
                }
                out
            }
            ConKind::Dense { matrix, .. } => a.mul(matrix),
        }
    }

    /// S_con · A over the connected-port block, applied structurally.
    pub fn left_mul_cc(&self, a: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(a.rows(), self.n_connected);
        match &self.kind {
            ConKind::Permutation { perm } => {
                let mut out = ComplexMatrix::zeros(a.rows(), a.cols());
                for (i, &src) in perm.iter().enumerate() {
                    out.row_mut(i).copy_from_slice(a.row(src));
                }
                out
            }
            ConKind::Mixed { perm, blocks } => {
                let mut out = ComplexMatrix::zeros(a.rows(), a.cols());
                for (i, p) in perm.iter().enumerate() {
                    if let Some(src) = p {
                        out.row_mut(i).copy_from_slice(a.row(*src));
                    }
                }
                for b in blocks {
                    let gathered = a.select_rows(&b.positions);
                    let sub = b.matrix.select(&b.local, &b.local);
                    let prod = sub.mul(&gathered);
                    for (ii, &row) in b.positions.iter().enumerate() {
                        for j in 0..a.cols() {
                            out[(row, j)] += prod[(ii, j)];
                        }
                    }
                }
                out
            }
            ConKind::Dense { matrix, .. } => matrix.mul(a),
        }
    }

    /// S_con⁻¹ · A. For pure deltas this is the same permutation; embedded
    /// blocks are solved individually. Connection systems with free ports
    /// have no cascade-style inverse here.
    pub fn inv_left_apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.n_free != 0 {
            return Err(Error::InvalidReduction {
                context: "connection system with free ports has no cascade-form inverse".into(),
            });
        }
        assert_eq!(a.rows(), self.n_connected);
        match &self.kind {
            ConKind::Permutation { .. } => Ok(self.left_mul_cc(a)),
            ConKind::Mixed { perm, blocks } => {
                let mut out = ComplexMatrix::zeros(a.rows(), a.cols());
                for (i, p) in perm.iter().enumerate() {
                    if let Some(src) = p {
                        out.row_mut(i).copy_from_slice(a.row(*src));
                    }
                }
                for b in blocks {
                    let gathered = a.select_rows(&b.positions);
                    let sub = b.matrix.select(&b.local, &b.local);
                    let solved = solve_linear(&sub, &gathered)?;
                    for (ii, &row) in b.positions.iter().enumerate() {
                        for j in 0..a.cols() {
                            out[(row, j)] = solved[(ii, j)];
                        }
                    }
                }
                Ok(out)
            }
            ConKind::Dense { matrix, .. } => solve_linear(matrix, a),
        }
    }
}

fn validate_pairs(pairs: &[DeltaPairing], n_connected: usize) -> Result<Vec<Option<usize>>> {
    let mut perm: Vec<Option<usize>> = vec![None; n_connected];
    for p in pairs {
        if p.first.len() != p.second.len() {
            return Err(Error::PortSetMismatch {
                context: format!(
                    "delta pairing of cardinalities {} and {}",
                    p.first.len(),
                    p.second.len()
                ),
            });
        }
        for (&a, &b) in p.first.iter().zip(&p.second) {
            if a >= n_connected || b >= n_connected || a == b {
                return Err(Error::PortOrderMismatch {
                    context: format!("pair ({a}, {b}) out of range {n_connected}"),
                });
            }
            if perm[a].is_some() || perm[b].is_some() {
                return Err(Error::PortOrderMismatch {
                    context: format!("port position {a} or {b} joined twice"),
                });
            }
            perm[a] = Some(b);
            perm[b] = Some(a);
        }
    }
    Ok(perm)
}

/// Builds the scattering system of a set of delta-connections: mirrored
/// identity blocks at the pair positions, zeros elsewhere. The positions
/// must cover the whole connected port range.
pub fn delta_system(pairs: &[DeltaPairing], n_connected: usize) -> Result<ConnectionSystem> {
    let perm = validate_pairs(pairs, n_connected)?;
    let perm: Vec<usize> = perm
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| Error::PortOrderMismatch {
                context: format!("connected port position {i} is not joined"),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConnectionSystem {
        n_connected,
        n_free: 0,
        pairs: pairs.to_vec(),
        kind: ConKind::Permutation { perm },
    })
}

/// Builds a connection system of delta blocks plus embedded subsystems,
/// ordered to match the supersystem's connected ports. Free ports of the
/// embedded systems are recorded; their presence forces the star-product
/// path downstream.
pub fn embed_connection(
    pairs: &[DeltaPairing],
    blocks: Vec<EmbeddedBlock>,
    n_connected: usize,
) -> Result<ConnectionSystem> {
    if blocks.is_empty() {
        return delta_system(pairs, n_connected);
    }
    let perm = validate_pairs(pairs, n_connected)?;
    let mut covered: Vec<bool> = perm.iter().map(|p| p.is_some()).collect();
    let mut n_free = 0usize;
    for b in &blocks {
        if b.positions.len() != b.local.len() {
            return Err(Error::PortOrderMismatch {
                context: "embedded block position/local length mismatch".into(),
            });
        }
        if b.local.len() + b.free_local.len() != b.matrix.rows() || !b.matrix.is_square() {
            return Err(Error::InvalidBlock {
                rows: b.matrix.rows(),
                cols: b.matrix.cols(),
            });
        }
        for &pos in &b.positions {
            if pos >= n_connected || covered[pos] {
                return Err(Error::PortOrderMismatch {
                    context: format!("embedded position {pos} out of range or already joined"),
                });
            }
            covered[pos] = true;
        }
        n_free += b.free_local.len();
    }
    if let Some(hole) = covered.iter().position(|&c| !c) {
        return Err(Error::PortOrderMismatch {
            context: format!("connected port position {hole} is not joined"),
        });
    }
    Ok(ConnectionSystem {
        n_connected,
        n_free,
        pairs: pairs.to_vec(),
        kind: ConKind::Mixed { perm, blocks },
    })
}

/// Default quasi-delta detuning. The end-to-end error of the impedance
/// path is minimized near this value: larger ε adds model error ~ε, smaller
/// ε amplifies roundoff in the near-singular conversion.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Builds the impedance (or admittance) matrix of a quasi-delta connection
/// system: the unit entries of the delta permutation are scaled by (1 - ε)
/// before converting, which keeps the conversion nonsingular for ε > 0.
pub fn quasi_delta(
    representation: Representation,
    pairs: &[DeltaPairing],
    n_connected: usize,
    epsilon: f64,
    z0: f64,
) -> Result<ConnectionSystem> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon { value: epsilon });
    }
    let delta = delta_system(pairs, n_connected)?;
    let s_eps = delta.to_dense().scale(C64::new(1.0 - epsilon, 0.0));
    let reference = vec![Complex64::new(z0, 0.0); n_connected];
    let matrix = match representation {
        Representation::Impedance => z_from_s(&s_eps, &reference)?,
        // converted straight from S: going through the impedance matrix
        // would square the 1/epsilon conditioning
        Representation::Admittance => y_from_s(&s_eps, &reference)?,
        Representation::Scattering => {
            return Err(Error::RepresentationMismatch {
                expected: "Z or Y".into(),
                actual: "S".into(),
            })
        }
    };
    Ok(ConnectionSystem {
        n_connected,
        n_free: 0,
        pairs: pairs.to_vec(),
        kind: ConKind::Dense {
            representation,
            matrix,
        },
    })
}

/// The scheme JSON contract:
/// `{ "systems": [names], "joins": [[sysA,setA,sysB,setB]], "embedded": [names] }`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SchemeDescription {
    pub systems: Vec<String>,
    pub joins: Vec<(String, String, String, String)>,
    #[serde(default)]
    pub embedded: Vec<String>,
}

impl SchemeDescription {
    pub fn into_scheme(self, mut lookup: impl FnMut(&str) -> Result<NetworkSystem>) -> Result<ConnectionScheme> {
        let mut systems = Vec::with_capacity(self.systems.len());
        for name in &self.systems {
            systems.push(lookup(name)?);
        }
        let index = |name: &str| -> Result<usize> {
            self.systems
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidScheme {
                    context: format!("join references unknown system `{name}`"),
                })
        };
        let mut joins = Vec::new();
        for (a, sa, b, sb) in &self.joins {
            joins.push(Join {
                system_a: index(a)?,
                set_a: sa.clone(),
                system_b: index(b)?,
                set_b: sb.clone(),
            });
        }
        let embedded = self
            .embedded
            .iter()
            .map(|n| index(n))
            .collect::<Result<Vec<_>>>()?;
        ConnectionScheme::new(self.systems, systems, joins, embedded)
    }
}
