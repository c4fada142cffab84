//! Closed-form recovery of the power waves traveling through connected
//! ports, and of voltages/currents at connected ports in the impedance and
//! admittance representations.
//!
//! From a cascade cache, a free-port excitation a_N drives the wave
//! a_C = S̄ S_CN a_N into the supersystem's connected ports, while
//! b_C = S_con⁻¹ a_C travels back out of them into the connection system.
//! The potential and flux maps
//!
//! ```text
//! Ψ_CN = (I + S_con⁻¹) S̄ S_CN,   Φ_CN = (I - S_con⁻¹) S̄ S_CN
//! ```
//!
//! send a_N directly to ψ_C = a_C + b_C and φ_C = a_C - b_C. The flux at a
//! port is oriented into the subsystem owning it (it equals the scaled
//! inward current), so the two rows of a delta pair carry equal potentials
//! and opposite fluxes; the pair's first-declared member is the positive
//! orientation.

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeCache;
use crate::connection::DeltaPairing;
use crate::error::{Error, Result};
use crate::linalg::{solve_linear, ComplexMatrix};
use crate::network::{NetworkSystem, PowerWaveVector, Representation};

/// Maps from free-port excitations to potentials and fluxes at the
/// connected ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveMaps {
    /// n(C) x n(N): a_N -> ψ_C
    pub psi_cn: ComplexMatrix,
    /// n(C) x n(N): a_N -> φ_C, oriented into the port's own subsystem
    pub phi_cn: ComplexMatrix,
    /// delta pairs (positions within C); the first member carries +φ
    pub pairs: Vec<DeltaPairing>,
}

/// Power waves at the connected ports for a free-port excitation:
/// returns (a_C, b_C), with a_C entering the supersystem's connected ports
/// and b_C leaving them (for a pure delta the two are pair-swaps of each
/// other).
pub fn connected_waves(
    cache: &CascadeCache,
    a_n: &PowerWaveVector,
) -> Result<(PowerWaveVector, PowerWaveVector)> {
    let layout = cache.layout();
    if a_n.len() != layout.n_total {
        return Err(Error::PortSetMismatch {
            context: format!(
                "excitation has {} entries but the system keeps {} free ports",
                a_n.len(),
                layout.n_total
            ),
        });
    }
    let a_col = ComplexMatrix::from_fn(a_n.len(), 1, |i, _| a_n.0[i]);
    let a_c = cache.s_bar_cn.mul(&a_col);
    let b_c = cache.connection().inv_left_apply(&a_c)?;
    Ok((
        PowerWaveVector((0..a_c.rows()).map(|i| a_c[(i, 0)]).collect()),
        PowerWaveVector((0..b_c.rows()).map(|i| b_c[(i, 0)]).collect()),
    ))
}

/// Potential and flux maps of a cached connection, built lazily on first
/// request and rebuilt automatically on updated caches (an update returns a
/// fresh cache with empty lazy state).
pub fn wave_maps(cache: &CascadeCache) -> Result<&WaveMaps> {
    if let Some(maps) = cache.maps.get() {
        return Ok(maps);
    }
    let s_bar_cn = &cache.s_bar_cn;
    let inv_b = cache.connection().inv_left_apply(s_bar_cn)?;
    let maps = WaveMaps {
        psi_cn: s_bar_cn.add(&inv_b),
        phi_cn: s_bar_cn.sub(&inv_b),
        pairs: cache.connection().pairs().to_vec(),
    };
    let _ = cache.maps.set(maps);
    Ok(cache.maps.get().expect("just set"))
}

/// Internal voltages and currents of a loaded system in the impedance or
/// admittance representation.
///
/// Impedance, driven by free-port currents J_N:
/// J_C = -(Z_CC + Z2)⁻¹ Z_CN J_N and V_C = Z2 (Z_CC + Z2)⁻¹ Z_CN J_N.
/// Admittance, driven by free-port voltages V_N: the dual formulas with the
/// roles of V and J exchanged. Returns (V_C, J_C).
pub fn internal_vj(
    sys: &NetworkSystem,
    c_label: &str,
    load: &ComplexMatrix,
    drive: &PowerWaveVector,
) -> Result<(PowerWaveVector, PowerWaveVector)> {
    let c = sys.partition.set(c_label)?.to_vec();
    let n = sys.partition.complement(&[c_label]);
    if drive.len() != n.len() {
        return Err(Error::PortSetMismatch {
            context: format!("drive has {} entries for {} free ports", drive.len(), n.len()),
        });
    }
    if !load.is_square() || load.rows() != c.len() {
        return Err(Error::PortSetMismatch {
            context: format!("load has {} ports but `{c_label}` has {}", load.rows(), c.len()),
        });
    }
    let m_cc = sys.matrix.select(&c, &c);
    let m_cn = sys.matrix.select(&c, &n);
    let drive_col = ComplexMatrix::from_fn(n.len(), 1, |i, _| drive.0[i]);
    let rhs = m_cn.mul(&drive_col);
    let x = solve_linear(&m_cc.add(load), &rhs).map_err(|e| match e {
        Error::SingularMatrix { cond_estimate } => Error::SingularInteraction { cond_estimate },
        other => other,
    })?;
    let own = x.scale(num_complex::Complex64::new(-1.0, 0.0));
    let through = load.mul(&x);
    let to_vec = |m: &ComplexMatrix| PowerWaveVector((0..m.rows()).map(|i| m[(i, 0)]).collect());
    match sys.representation {
        // x = (Z_CC + Z2)⁻¹ Z_CN J_N: J_C = -x, V_C = Z2 x
        Representation::Impedance => Ok((to_vec(&through), to_vec(&own))),
        // x = (Y_CC + Y2)⁻¹ Y_CN V_N: V_C = -x, J_C = Y2 x
        Representation::Admittance => Ok((to_vec(&own), to_vec(&through))),
        Representation::Scattering => Err(Error::RepresentationMismatch {
            expected: "Z or Y".into(),
            actual: "S".into(),
        }),
    }
}
