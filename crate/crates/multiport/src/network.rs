//! Port bookkeeping, the three network representations and the conversions
//! between them.
//!
//! A multi-port system is held in one of three equivalent representations:
//! scattering (b = S a), impedance (V = Z J) or admittance (J = Y V, with
//! Y = Z⁻¹). Conversions use per-port reference impedances; with a uniform
//! real reference Z₀ the scattering/impedance relation reduces to the
//! commutative product S = (Z - Z₀I)(Z + Z₀I)⁻¹.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    invert, solve_linear, solve_right, ComplexMatrix, LuFactors, C64, SINGULARITY_COND_LIMIT,
};

/// Default reference impedance in ohms, uniform and real.
pub const DEFAULT_Z0: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    #[serde(rename = "S")]
    Scattering,
    #[serde(rename = "Z")]
    Impedance,
    #[serde(rename = "Y")]
    Admittance,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Representation::Scattering => write!(f, "S"),
            Representation::Impedance => write!(f, "Z"),
            Representation::Admittance => write!(f, "Y"),
        }
    }
}

/// Named, ordered, disjoint port index sets covering a system's ports.
///
/// Set order and the index order inside each set are meaningful: when two
/// sets are joined, the i-th index of one pairs with the i-th of the other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortPartition {
    total_ports: usize,
    sets: Vec<(String, Vec<usize>)>,
}

impl PortPartition {
    pub fn new(total_ports: usize, sets: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let mut seen = vec![false; total_ports];
        for (label, indices) in &sets {
            for &i in indices {
                if i >= total_ports {
                    return Err(Error::InvalidNetwork {
                        context: format!("set `{label}` references port {i} out of {total_ports}"),
                    });
                }
                if seen[i] {
                    return Err(Error::InvalidNetwork {
                        context: format!("port {i} appears in more than one set"),
                    });
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidNetwork {
                context: format!("port {missing} is not covered by any set"),
            });
        }
        Ok(Self { total_ports, sets })
    }

    /// Single-set partition covering all ports.
    pub fn trivial(total_ports: usize, label: &str) -> Self {
        Self {
            total_ports,
            sets: vec![(label.to_string(), (0..total_ports).collect())],
        }
    }

    pub fn total_ports(&self) -> usize {
        self.total_ports
    }

    pub fn sets(&self) -> &[(String, Vec<usize>)] {
        &self.sets
    }

    pub fn set(&self, label: &str) -> Result<&[usize]> {
        self.sets
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownPortSet {
                label: label.to_string(),
            })
    }

    pub fn has_set(&self, label: &str) -> bool {
        self.sets.iter().any(|(l, _)| l == label)
    }

    /// All ports not belonging to any of the given labels, in set order.
    pub fn complement(&self, labels: &[&str]) -> Vec<usize> {
        self.sets
            .iter()
            .filter(|(l, _)| !labels.contains(&l.as_str()))
            .flat_map(|(_, v)| v.iter().copied())
            .collect()
    }
}

/// A multi-port system in one representation plus its port partition and
/// per-port reference impedances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSystem {
    pub representation: Representation,
    pub matrix: ComplexMatrix,
    pub partition: PortPartition,
    pub reference: Vec<C64>,
}

impl NetworkSystem {
    pub fn new(
        representation: Representation,
        matrix: ComplexMatrix,
        partition: PortPartition,
        reference: Vec<C64>,
    ) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != partition.total_ports() {
            return Err(Error::InvalidNetwork {
                context: format!(
                    "matrix is {}x{} but the partition declares {} ports",
                    matrix.rows(),
                    matrix.cols(),
                    partition.total_ports()
                ),
            });
        }
        if reference.len() != partition.total_ports() {
            return Err(Error::InvalidNetwork {
                context: format!(
                    "{} reference impedances for {} ports",
                    reference.len(),
                    partition.total_ports()
                ),
            });
        }
        Ok(Self {
            representation,
            matrix,
            partition,
            reference,
        })
    }

    /// Scattering system with a uniform real reference.
    pub fn scattering(matrix: ComplexMatrix, partition: PortPartition) -> Result<Self> {
        let n = partition.total_ports();
        Self::new(
            Representation::Scattering,
            matrix,
            partition,
            vec![C64::new(DEFAULT_Z0, 0.0); n],
        )
    }

    pub fn ports(&self) -> usize {
        self.partition.total_ports()
    }

    /// The submatrix selecting rows from `row_set` and columns from
    /// `col_set`, in the sets' stored orders.
    pub fn block(&self, row_set: &str, col_set: &str) -> Result<ComplexMatrix> {
        let rows = self.partition.set(row_set)?;
        let cols = self.partition.set(col_set)?;
        Ok(self.matrix.select(rows, cols))
    }

    /// Converts the system to the requested representation, carrying the
    /// partition and references over.
    pub fn convert_to(&self, target: Representation) -> Result<Self> {
        if self.representation == target {
            return Ok(self.clone());
        }
        let z = match self.representation {
            Representation::Scattering => z_from_s(&self.matrix, &self.reference)?,
            Representation::Impedance => self.matrix.clone(),
            Representation::Admittance => z_from_y(&self.matrix)?,
        };
        let matrix = match target {
            Representation::Scattering => s_from_z(&z, &self.reference)?,
            Representation::Impedance => z,
            Representation::Admittance => y_from_z(&z)?,
        };
        Self::new(target, matrix, self.partition.clone(), self.reference.clone())
    }
}

/// Operation form of [`NetworkSystem::block`].
pub fn partition_blocks(sys: &NetworkSystem, row_set: &str, col_set: &str) -> Result<ComplexMatrix> {
    sys.block(row_set, col_set)
}

fn check_reference(reference: &[C64]) -> Result<()> {
    for &z in reference {
        if !(z.re > 0.0) {
            return Err(Error::InvalidReference { value: z });
        }
    }
    Ok(())
}

fn uniform_real_reference(reference: &[C64]) -> Option<f64> {
    let first = *reference.first()?;
    if first.im != 0.0 {
        return None;
    }
    reference
        .iter()
        .all(|&z| z == first)
        .then_some(first.re)
}

/// S = F (Z - G†)(Z + G)⁻¹ F⁻¹ with diagonal F, G built from the per-port
/// references; reduces to the commutative (Z - Z₀I)(Z + Z₀I)⁻¹ when every
/// reference equals the same real Z₀.
pub fn s_from_z(z: &ComplexMatrix, reference: &[C64]) -> Result<ComplexMatrix> {
    if !z.is_square() || z.rows() != reference.len() {
        return Err(Error::ShapeMismatch {
            context: "impedance matrix and reference list sizes differ".into(),
        });
    }
    check_reference(reference)?;
    let n = z.rows();
    if let Some(z0) = uniform_real_reference(reference) {
        let z0 = C64::new(z0, 0.0);
        let mut zp = z.clone();
        let mut zm = z.clone();
        for i in 0..n {
            zp[(i, i)] += z0;
            zm[(i, i)] -= z0;
        }
        return solve_right(&zm, &zp);
    }
    // general references: row scale by F, column scale by F⁻¹
    let mut zm = z.clone(); // Z - G†
    let mut zp = z.clone(); // Z + G
    for i in 0..n {
        zm[(i, i)] -= reference[i].conj();
        zp[(i, i)] += reference[i];
    }
    let mut s = solve_right(&zm, &zp)?;
    for i in 0..n {
        let fi = 1.0 / (2.0 * reference[i].re.abs().sqrt());
        for j in 0..n {
            let fj_inv = 2.0 * reference[j].re.abs().sqrt();
            s[(i, j)] *= C64::new(fi * fj_inv, 0.0);
        }
    }
    Ok(s)
}

/// Inverse of [`s_from_z`]. A singular (I - S) means the system contains
/// ideal delta-connection content and is reported as
/// [`Error::DeltaLikeSingularity`].
pub fn z_from_s(s: &ComplexMatrix, reference: &[C64]) -> Result<ComplexMatrix> {
    if !s.is_square() || s.rows() != reference.len() {
        return Err(Error::ShapeMismatch {
            context: "scattering matrix and reference list sizes differ".into(),
        });
    }
    check_reference(reference)?;
    let n = s.rows();
    let map_singular = |e: Error| match e {
        Error::SingularMatrix { .. } => Error::DeltaLikeSingularity,
        other => other,
    };
    if let Some(z0) = uniform_real_reference(reference) {
        let mut i_minus_s = s.scale(C64::new(-1.0, 0.0));
        let mut i_plus_s = s.clone();
        for i in 0..n {
            i_minus_s[(i, i)] += C64::new(1.0, 0.0);
            i_plus_s[(i, i)] += C64::new(1.0, 0.0);
        }
        let z = solve_linear(&i_minus_s, &i_plus_s).map_err(map_singular)?;
        return Ok(z.scale(C64::new(z0, 0.0)));
    }
    // invert S = F(Z - G†)(Z + G)⁻¹F⁻¹: with T = F⁻¹ S F,
    // (I - T) Z = G† + T G
    let mut t = s.clone();
    for i in 0..n {
        let fi_inv = 2.0 * reference[i].re.abs().sqrt();
        for j in 0..n {
            let fj = 1.0 / (2.0 * reference[j].re.abs().sqrt());
            t[(i, j)] *= C64::new(fi_inv * fj, 0.0);
        }
    }
    let mut lhs = t.scale(C64::new(-1.0, 0.0));
    for i in 0..n {
        lhs[(i, i)] += C64::new(1.0, 0.0);
    }
    let mut rhs = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            rhs[(i, j)] = t[(i, j)] * reference[j];
        }
        rhs[(i, i)] += reference[i].conj();
    }
    solve_linear(&lhs, &rhs).map_err(map_singular)
}

pub fn y_from_z(z: &ComplexMatrix) -> Result<ComplexMatrix> {
    invert(z)
}

pub fn z_from_y(y: &ComplexMatrix) -> Result<ComplexMatrix> {
    invert(y)
}

/// Direct scattering-to-admittance conversion. With a uniform real
/// reference, Y = (I - S)(I + S)⁻¹ / Z₀: this conditions like (I + S)
/// itself, whereas inverting the impedance matrix of a nearly ideal
/// delta-connection would square the conditioning.
pub fn y_from_s(s: &ComplexMatrix, reference: &[C64]) -> Result<ComplexMatrix> {
    check_reference(reference)?;
    let n = s.rows();
    if let Some(z0) = uniform_real_reference(reference) {
        let mut i_minus_s = s.scale(C64::new(-1.0, 0.0));
        let mut i_plus_s = s.clone();
        for i in 0..n {
            i_minus_s[(i, i)] += C64::new(1.0, 0.0);
            i_plus_s[(i, i)] += C64::new(1.0, 0.0);
        }
        let y = solve_right(&i_minus_s, &i_plus_s)?;
        return Ok(y.scale(C64::new(1.0 / z0, 0.0)));
    }
    y_from_z(&z_from_s(s, reference)?)
}

/// Checks whether a scattering matrix can be converted to impedance
/// parameters, i.e. whether (I - S) is invertible to working precision.
pub fn has_impedance_representation(s: &ComplexMatrix) -> bool {
    let n = s.rows();
    let mut i_minus_s = s.scale(C64::new(-1.0, 0.0));
    for i in 0..n {
        i_minus_s[(i, i)] += C64::new(1.0, 0.0);
    }
    match LuFactors::factor(&i_minus_s) {
        Ok(f) => f.cond_estimate() <= SINGULARITY_COND_LIMIT,
        Err(_) => false,
    }
}

/// Complex amplitudes over a port set (power waves, potentials or fluxes;
/// voltages or currents in the Z/Y representations). Entries are positional:
/// the i-th value belongs to the i-th port of the set it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerWaveVector(pub Vec<C64>);

impl PowerWaveVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Entrywise potential ψ = a + b and flux φ = a - b.
pub fn waves_to_potential_flux(
    a: &PowerWaveVector,
    b: &PowerWaveVector,
) -> Result<(PowerWaveVector, PowerWaveVector)> {
    if a.len() != b.len() {
        return Err(Error::PortSetMismatch {
            context: format!("wave vectors of lengths {} and {}", a.len(), b.len()),
        });
    }
    let psi = PowerWaveVector(a.0.iter().zip(&b.0).map(|(&x, &y)| x + y).collect());
    let phi = PowerWaveVector(a.0.iter().zip(&b.0).map(|(&x, &y)| x - y).collect());
    Ok((psi, phi))
}

/// JSON description of a network, the ingestion contract for the CLI:
/// `{ "representation": "S"|"Z"|"Y", "ports": n, "sets": {label: [indices]},
///    "matrix": [[[re, im], ...]], "z0": number or per-port array }`.
#[derive(Debug, Serialize, Deserialize)]
pub struct NetworkDescription {
    pub representation: Representation,
    pub ports: usize,
    pub sets: serde_json::Map<String, serde_json::Value>,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub z0: Option<serde_json::Value>,
}

impl NetworkDescription {
    pub fn to_system(&self) -> Result<NetworkSystem> {
        let rows: Vec<Vec<C64>> = self
            .matrix
            .iter()
            .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
            .collect();
        let matrix = ComplexMatrix::from_rows(&rows)?;
        let mut sets = Vec::new();
        for (label, value) in &self.sets {
            let indices: Vec<usize> =
                serde_json::from_value(value.clone()).map_err(|e| Error::InvalidNetwork {
                    context: format!("set `{label}`: {e}"),
                })?;
            sets.push((label.clone(), indices));
        }
        let partition = PortPartition::new(self.ports, sets)?;
        let reference = match &self.z0 {
            None => vec![C64::new(DEFAULT_Z0, 0.0); self.ports],
            Some(serde_json::Value::Number(n)) => {
                let z0 = n.as_f64().ok_or_else(|| Error::InvalidNetwork {
                    context: "z0 is not a number".into(),
                })?;
                vec![C64::new(z0, 0.0); self.ports]
            }
            Some(serde_json::Value::Array(values)) => {
                let mut refs = Vec::with_capacity(values.len());
                for v in values {
                    match v {
                        serde_json::Value::Number(n) => {
                            refs.push(C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0))
                        }
                        serde_json::Value::Array(pair) if pair.len() == 2 => {
                            let re = pair[0].as_f64().unwrap_or(f64::NAN);
                            let im = pair[1].as_f64().unwrap_or(f64::NAN);
                            refs.push(C64::new(re, im));
                        }
                        _ => {
                            return Err(Error::InvalidNetwork {
                                context: "z0 entries must be numbers or [re, im] pairs".into(),
                            })
                        }
                    }
                }
                refs
            }
            Some(other) => {
                return Err(Error::InvalidNetwork {
                    context: format!("unsupported z0 value: {other}"),
                })
            }
        };
        NetworkSystem::new(self.representation, matrix, partition, reference)
    }

    pub fn from_system(sys: &NetworkSystem) -> Self {
        let matrix = (0..sys.matrix.rows())
            .map(|i| {
                (0..sys.matrix.cols())
                    .map(|j| {
                        let z = sys.matrix[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        let mut sets = serde_json::Map::new();
        for (label, indices) in sys.partition.sets() {
            sets.insert(label.clone(), serde_json::json!(indices));
        }
        let z0 = serde_json::json!(sys
            .reference
            .iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>());
        Self {
            representation: sys.representation,
            ports: sys.ports(),
            sets,
            matrix,
            z0: Some(z0),
        }
    }
}

/// Serializes a matrix in the `[[[re, im], ...]]` JSON convention.
pub fn matrix_to_json(m: &ComplexMatrix) -> serde_json::Value {
    serde_json::json!((0..m.rows())
        .map(|i| (0..m.cols())
            .map(|j| [m[(i, j)].re, m[(i, j)].im])
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

pub fn matrix_from_json(v: &serde_json::Value) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<[f64; 2]>> =
        serde_json::from_value(v.clone()).map_err(|e| Error::InvalidNetwork {
            context: format!("matrix: {e}"),
        })?;
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows)
}
