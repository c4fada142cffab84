//! Closed-form connection evaluators: cascade loading in all three
//! representations, the generic supersystem connection, the Redheffer star
//! product, the single-shot global method and the reduction planner.
//!
//! The generic connection of a supersystem with free ports N and connected
//! ports C through a connection system S_con is
//!
//! ```text
//! S~ = S_NN + S_NC (S_con⁻¹ - S_CC)⁻¹ S_CN
//! ```
//!
//! evaluated here through the substitution
//! (S_con⁻¹ - S_CC)⁻¹ = S_con (I - S_CC S_con)⁻¹, which never inverts S_con
//! itself and stays valid when S_con is singular. The inverted interaction
//! matrix S̄ is retained in a [`CascadeCache`] for low-rank updates and wave
//! recovery.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::connection::{
    delta_system, embed_connection, ConnectionScheme, ConnectionSystem, DeltaPairing,
    EmbeddedBlock,
};
use crate::error::{Error, Result};
use crate::linalg::{solve_linear, ComplexMatrix, LuFactors, C64};
use crate::network::{NetworkSystem, Representation};
use crate::waves::WaveMaps;

fn expect_representation(sys: &NetworkSystem, expected: Representation) -> Result<()> {
    if sys.representation != expected {
        return Err(Error::RepresentationMismatch {
            expected: expected.to_string(),
            actual: sys.representation.to_string(),
        });
    }
    Ok(())
}

fn map_interaction(e: Error) -> Error {
    match e {
        Error::SingularMatrix { cond_estimate } => Error::SingularInteraction { cond_estimate },
        other => other,
    }
}

/// Per-member port bookkeeping inside a supersystem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberLayout {
    /// index of the member in the originating scheme (0 for ad-hoc supersystems)
    pub scheme_index: usize,
    /// local ports that stay free, in partition order
    pub free_local: Vec<usize>,
    /// local ports that are connected, in partition order
    pub conn_local: Vec<usize>,
    pub n_offset: usize,
    pub c_offset: usize,
}

/// Global index map from (member, port) to positions in the supersystem's
/// free-port order N and connected-port order C. Both orders are
/// member-major in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupersystemLayout {
    pub members: Vec<MemberLayout>,
    pub n_total: usize,
    pub c_total: usize,
    /// (member position in layout, set label) -> C positions of that set
    set_positions: Vec<(usize, String, Vec<usize>)>,
}

impl SupersystemLayout {
    /// Builds the layout for `member_ids` of the scheme, in the given order.
    /// A port is connected iff its partition set participates in any join.
    pub fn build(scheme: &ConnectionScheme, member_ids: &[usize]) -> Result<Self> {
        let mut members = Vec::with_capacity(member_ids.len());
        let mut set_positions = Vec::new();
        let mut n_total = 0usize;
        let mut c_total = 0usize;
        for (slot, &id) in member_ids.iter().enumerate() {
            let sys = &scheme.systems[id];
            let joined = scheme.joined_sets(id);
            let mut free_local = Vec::new();
            let mut conn_local = Vec::new();
            let c_offset = c_total;
            let n_offset = n_total;
            for (label, ports) in sys.partition.sets() {
                if joined.contains(&label.as_str()) {
                    let positions = (0..ports.len()).map(|k| c_total + conn_local.len() + k);
                    set_positions.push((slot, label.clone(), positions.collect()));
                    conn_local.extend(ports.iter().copied());
                } else {
                    free_local.extend(ports.iter().copied());
                }
            }
            n_total += free_local.len();
            c_total += conn_local.len();
            members.push(MemberLayout {
                scheme_index: id,
                free_local,
                conn_local,
                n_offset,
                c_offset,
            });
        }
        Ok(Self {
            members,
            n_total,
            c_total,
            set_positions,
        })
    }

    /// Layout for a monolithic supersystem: one member whose connected ports
    /// are the named set and whose free ports are the rest.
    pub fn monolithic(sys: &NetworkSystem, c_label: &str) -> Result<Self> {
        let conn_local = sys.partition.set(c_label)?.to_vec();
        let free_local = sys.partition.complement(&[c_label]);
        let c_total = conn_local.len();
        let n_total = free_local.len();
        Ok(Self {
            members: vec![MemberLayout {
                scheme_index: 0,
                free_local,
                conn_local,
                n_offset: 0,
                c_offset: 0,
            }],
            n_total,
            c_total,
            set_positions: vec![(0, c_label.to_string(), (0..c_total).collect())],
        })
    }

    pub fn c_positions(&self, slot: usize, label: &str) -> Result<&[usize]> {
        self.set_positions
            .iter()
            .find(|(s, l, _)| *s == slot && l == label)
            .map(|(_, _, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownPortSet {
                label: format!("{label} (member slot {slot})"),
            })
    }

    pub fn slot_of(&self, scheme_index: usize) -> Option<usize> {
        self.members
            .iter()
            .position(|m| m.scheme_index == scheme_index)
    }

    /// Block-diagonal free-to-free part of the supersystem matrix.
    pub fn assemble_nn(&self, mats: &[ComplexMatrix]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n_total, self.n_total);
        for (m, mat) in self.members.iter().zip(mats) {
            out.set_block(m.n_offset, m.n_offset, &mat.select(&m.free_local, &m.free_local));
        }
        out
    }

    pub fn assemble_cc(&self, mats: &[ComplexMatrix]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.c_total, self.c_total);
        for (m, mat) in self.members.iter().zip(mats) {
            out.set_block(m.c_offset, m.c_offset, &mat.select(&m.conn_local, &m.conn_local));
        }
        out
    }

    pub fn assemble_nc(&self, mats: &[ComplexMatrix]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n_total, self.c_total);
        for (m, mat) in self.members.iter().zip(mats) {
            out.set_block(m.n_offset, m.c_offset, &mat.select(&m.free_local, &m.conn_local));
        }
        out
    }

    pub fn assemble_cn(&self, mats: &[ComplexMatrix]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.c_total, self.n_total);
        for (m, mat) in self.members.iter().zip(mats) {
            out.set_block(m.c_offset, m.n_offset, &mat.select(&m.conn_local, &m.free_local));
        }
        out
    }

    /// X · S_CN exploiting the block-diagonal structure of S_CN.
    pub fn right_mul_scn(&self, x: &ComplexMatrix, mats: &[ComplexMatrix]) -> ComplexMatrix {
        debug_assert_eq!(x.cols(), self.c_total);
        let mut out = ComplexMatrix::zeros(x.rows(), self.n_total);
        for (m, mat) in self.members.iter().zip(mats) {
            if m.free_local.is_empty() || m.conn_local.is_empty() {
                continue;
            }
            let c_cols: Vec<usize> = (m.c_offset..m.c_offset + m.conn_local.len()).collect();
            let prod = x
                .select_cols(&c_cols)
                .mul(&mat.select(&m.conn_local, &m.free_local));
            out.set_block(0, m.n_offset, &prod);
        }
        out
    }

    /// S_NC · X exploiting the block-diagonal structure of S_NC.
    pub fn left_mul_snc(&self, mats: &[ComplexMatrix], x: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(x.rows(), self.c_total);
        let mut out = ComplexMatrix::zeros(self.n_total, x.cols());
        for (m, mat) in self.members.iter().zip(mats) {
            if m.free_local.is_empty() || m.conn_local.is_empty() {
                continue;
            }
            let c_rows: Vec<usize> = (m.c_offset..m.c_offset + m.conn_local.len()).collect();
            let prod = mat
                .select(&m.free_local, &m.conn_local)
                .mul(&x.select_rows(&c_rows));
            out.set_block(m.n_offset, 0, &prod);
        }
        out
    }

    /// S_CC · X exploiting block-diagonal structure.
    pub fn left_mul_scc(&self, mats: &[ComplexMatrix], x: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(x.rows(), self.c_total);
        let mut out = ComplexMatrix::zeros(self.c_total, x.cols());
        for (m, mat) in self.members.iter().zip(mats) {
            if m.conn_local.is_empty() {
                continue;
            }
            let c_rows: Vec<usize> = (m.c_offset..m.c_offset + m.conn_local.len()).collect();
            let prod = mat
                .select(&m.conn_local, &m.conn_local)
                .mul(&x.select_rows(&c_rows));
            out.set_block(m.c_offset, 0, &prod);
        }
        out
    }
}

/// The factorized interaction state retained after a connection evaluation:
/// the inverted interaction matrix S̄ = (S_con⁻¹ - S_CC)⁻¹, the supersystem
/// bookkeeping and the member matrices it was built from.
#[derive(Debug, Serialize, Deserialize)]
pub struct CascadeCache {
    pub(crate) layout: SupersystemLayout,
    pub(crate) matrices: Vec<ComplexMatrix>,
    pub(crate) con: ConnectionSystem,
    pub(crate) s_bar: ComplexMatrix,
    pub(crate) s_bar_cn: ComplexMatrix,
    pub(crate) s_tilde: ComplexMatrix,
    pub(crate) updates_since_check: usize,
    #[serde(skip, default)]
    pub(crate) maps: OnceLock<WaveMaps>,
}

impl Clone for CascadeCache {
    fn clone(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            matrices: self.matrices.clone(),
            con: self.con.clone(),
            s_bar: self.s_bar.clone(),
            s_bar_cn: self.s_bar_cn.clone(),
            s_tilde: self.s_tilde.clone(),
            updates_since_check: self.updates_since_check,
            maps: OnceLock::new(),
        }
    }
}

impl CascadeCache {
    pub fn s_bar(&self) -> &ComplexMatrix {
        &self.s_bar
    }

    pub fn s_tilde(&self) -> &ComplexMatrix {
        &self.s_tilde
    }

    pub fn connection(&self) -> &ConnectionSystem {
        &self.con
    }

    pub fn layout(&self) -> &SupersystemLayout {
        &self.layout
    }

    pub fn member_matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    /// ‖(S_con⁻¹ - S_CC) S̄ - I‖_F / ‖S̄‖_F, evaluated in the S_con-multiplied
    /// form S̄ - S_con S_CC S̄ - S_con which needs no inversion (for a pure
    /// delta permutation the two coincide exactly since ‖P X‖_F = ‖X‖_F).
    pub fn residual(&self) -> f64 {
        let scc_sbar = self.layout.left_mul_scc(&self.matrices, &self.s_bar);
        let mut r = self.s_bar.sub(&self.con.left_mul_cc(&scc_sbar));
        let con_dense = self.con.to_dense();
        r = r.sub(&con_dense);
        let denom = self.s_bar.frobenius_norm().max(1.0);
        r.frobenius_norm() / denom
    }
}

fn connect_layout(
    layout: SupersystemLayout,
    matrices: Vec<ComplexMatrix>,
    con: ConnectionSystem,
) -> Result<(ComplexMatrix, CascadeCache)> {
    if con.n_connected() != layout.c_total {
        return Err(Error::PortOrderMismatch {
            context: format!(
                "connection system has {} ports, supersystem has {} connected ports",
                con.n_connected(),
                layout.c_total
            ),
        });
    }
    if con.n_free() != 0 {
        return Err(Error::PortOrderMismatch {
            context: "connection system with free ports requires the star-product path".into(),
        });
    }
    let n_c = layout.c_total;
    let s_cc = layout.assemble_cc(&matrices);
    // B = I - S_CC S_con
    let mut b = con.right_mul_cc(&s_cc).scale(C64::new(-1.0, 0.0));
    for i in 0..n_c {
        b[(i, i)] += C64::new(1.0, 0.0);
    }
    let t = LuFactors::factor(&b)
        .and_then(|f| f.inverse())
        .map_err(map_interaction)?;
    let s_bar = con.left_mul_cc(&t);
    let s_bar_cn = layout.right_mul_scn(&s_bar, &matrices);
    let s_tilde = layout
        .assemble_nn(&matrices)
        .add(&layout.left_mul_snc(&matrices, &s_bar_cn));
    let cache = CascadeCache {
        layout,
        matrices,
        con,
        s_bar,
        s_bar_cn,
        s_tilde: s_tilde.clone(),
        updates_since_check: 0,
        maps: OnceLock::new(),
    };
    Ok((s_tilde, cache))
}

/// Connects the ports `c_label` of a supersystem through a connection system
/// without free ports, returning the resulting scattering matrix over the
/// remaining free ports and the cache for updates and wave recovery.
pub fn connect_supersystem(
    sup: &NetworkSystem,
    c_label: &str,
    con: &ConnectionSystem,
) -> Result<(ComplexMatrix, CascadeCache)> {
    expect_representation(sup, Representation::Scattering)?;
    let layout = SupersystemLayout::monolithic(sup, c_label)?;
    connect_layout(layout, vec![sup.matrix.clone()], con.clone())
}

/// Cascade loading for scattering parameters: terminates the ports `c_label`
/// of `s1` with the load system `s2` (which has no free ports of its own).
///
/// Evaluated through S2 (I - S_CC S2)⁻¹ so a singular S2 needs no special
/// treatment.
pub fn cascade_load_s(
    s1: &NetworkSystem,
    c_label: &str,
    s2: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    expect_representation(s1, Representation::Scattering)?;
    let c = s1.partition.set(c_label)?.to_vec();
    let n = s1.partition.complement(&[c_label]);
    if !s2.is_square() || s2.rows() != c.len() {
        return Err(Error::PortSetMismatch {
            context: format!(
                "load has {} ports but `{c_label}` has {}",
                s2.rows(),
                c.len()
            ),
        });
    }
    let s_nn = s1.matrix.select(&n, &n);
    let s_nc = s1.matrix.select(&n, &c);
    let s_cn = s1.matrix.select(&c, &n);
    let s_cc = s1.matrix.select(&c, &c);
    let mut b = s_cc.mul(s2).scale(C64::new(-1.0, 0.0));
    for i in 0..c.len() {
        b[(i, i)] += C64::new(1.0, 0.0);
    }
    let x = solve_linear(&b, &s_cn).map_err(map_interaction)?;
    Ok(s_nn.add(&s_nc.mul(&s2.mul(&x))))
}

/// Impedance cascade loading: Z12 = Z_NN - Z_NC (Z_CC + Z2)⁻¹ Z_CN.
pub fn cascade_load_z(
    z1: &NetworkSystem,
    c_label: &str,
    z2: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    expect_representation(z1, Representation::Impedance)?;
    cascade_load_zy_blocks(z1, c_label, z2)
}

/// Admittance cascade loading: Y12 = Y_NN - Y_NC (Y_CC + Y2)⁻¹ Y_CN.
pub fn cascade_load_y(
    y1: &NetworkSystem,
    c_label: &str,
    y2: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    expect_representation(y1, Representation::Admittance)?;
    cascade_load_zy_blocks(y1, c_label, y2)
}

fn cascade_load_zy_blocks(
    sys: &NetworkSystem,
    c_label: &str,
    load: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let c = sys.partition.set(c_label)?.to_vec();
    let n = sys.partition.complement(&[c_label]);
    if !load.is_square() || load.rows() != c.len() {
        return Err(Error::PortSetMismatch {
            context: format!(
                "load has {} ports but `{c_label}` has {}",
                load.rows(),
                c.len()
            ),
        });
    }
    let m_nn = sys.matrix.select(&n, &n);
    let m_nc = sys.matrix.select(&n, &c);
    let m_cn = sys.matrix.select(&c, &n);
    let m_cc = sys.matrix.select(&c, &c);
    let x = solve_linear(&m_cc.add(load), &m_cn).map_err(map_interaction)?;
    Ok(m_nn.sub(&m_nc.mul(&x)))
}

fn star_blocks(
    u_nn: &ComplexMatrix,
    u_nc: &ComplexMatrix,
    u_cn: &ComplexMatrix,
    u_cc: &ComplexMatrix,
    v_nn: &ComplexMatrix,
    v_nc: &ComplexMatrix,
    v_cn: &ComplexMatrix,
    v_cc: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let m = u_cc.rows();
    let mk_interaction = |left: &ComplexMatrix, right: &ComplexMatrix| {
        let mut a = left.mul(right);
        for i in 0..m {
            a[(i, i)] -= C64::new(1.0, 0.0);
        }
        a
    };
    let a_uv = mk_interaction(u_cc, v_cc);
    // With reciprocal connected blocks the two interaction matrices are
    // transposes of each other, so one factorization serves both solves.
    let symmetric = u_cc.is_symmetric(1e-13) && v_cc.is_symmetric(1e-13);
    let (x_uv_ucn, x_vu_vcn) = if symmetric {
        let lu = LuFactors::factor(&a_uv).map_err(map_interaction)?;
        (
            lu.solve(u_cn).map_err(map_interaction)?,
            lu.solve_transposed(v_cn).map_err(map_interaction)?,
        )
    } else {
        let a_vu = mk_interaction(v_cc, u_cc);
        (
            solve_linear(&a_uv, u_cn).map_err(map_interaction)?,
            solve_linear(&a_vu, v_cn).map_err(map_interaction)?,
        )
    };
    let uu = u_nn.sub(&u_nc.mul(v_cc).mul(&x_uv_ucn));
    let uv = u_nc.mul(&x_vu_vcn).scale(C64::new(-1.0, 0.0));
    let vu = v_nc.mul(&x_uv_ucn).scale(C64::new(-1.0, 0.0));
    let vv = v_nn.sub(&v_nc.mul(u_cc).mul(&x_vu_vcn));

    let (nu, nv) = (u_nn.rows(), v_nn.rows());
    let mut out = ComplexMatrix::zeros(nu + nv, nu + nv);
    out.set_block(0, 0, &uu);
    out.set_block(0, nu, &uv);
    out.set_block(nu, 0, &vu);
    out.set_block(nu, nu, &vv);
    Ok(out)
}

fn star_on_positions(
    u: &ComplexMatrix,
    cu: &[usize],
    v: &ComplexMatrix,
    cv: &[usize],
) -> Result<(ComplexMatrix, Vec<usize>, Vec<usize>)> {
    let nu: Vec<usize> = (0..u.rows()).filter(|i| !cu.contains(i)).collect();
    let nv: Vec<usize> = (0..v.rows()).filter(|i| !cv.contains(i)).collect();
    let out = star_blocks(
        &u.select(&nu, &nu),
        &u.select(&nu, cu),
        &u.select(cu, &nu),
        &u.select(cu, cu),
        &v.select(&nv, &nv),
        &v.select(&nv, cv),
        &v.select(cv, &nv),
        &v.select(cv, cv),
    )?;
    Ok((out, nu, nv))
}

/// Redheffer star product: connects the ports `cu_label` of U to the ports
/// `cv_label` of V, both systems keeping their remaining free ports. The
/// result is ordered [free ports of U, free ports of V].
pub fn redheffer_star(
    u: &NetworkSystem,
    v: &NetworkSystem,
    cu_label: &str,
    cv_label: &str,
) -> Result<ComplexMatrix> {
    expect_representation(u, Representation::Scattering)?;
    expect_representation(v, Representation::Scattering)?;
    let cu = u.partition.set(cu_label)?.to_vec();
    let cv = v.partition.set(cv_label)?.to_vec();
    if cu.len() != cv.len() {
        return Err(Error::PortSetMismatch {
            context: format!("star over sets of sizes {} and {}", cu.len(), cv.len()),
        });
    }
    let nu = u.partition.complement(&[cu_label]);
    let nv = v.partition.complement(&[cv_label]);
    star_blocks(
        &u.matrix.select(&nu, &nu),
        &u.matrix.select(&nu, &cu),
        &u.matrix.select(&cu, &nu),
        &u.matrix.select(&cu, &cu),
        &v.matrix.select(&nv, &nv),
        &v.matrix.select(&nv, &cv),
        &v.matrix.select(&cv, &nv),
        &v.matrix.select(&cv, &cv),
    )
}

/// Impedance analogue of the Redheffer star product:
/// Z~_NN = Z_NN - Z_NC ((Z_CC^U + Z_CC^V)⁻¹ ⊗ [[1,-1],[-1,1]]) Z_CN,
/// realized as sign-patterned block assembly.
pub fn redheffer_star_z(
    u: &NetworkSystem,
    v: &NetworkSystem,
    cu_label: &str,
    cv_label: &str,
) -> Result<ComplexMatrix> {
    expect_representation(u, Representation::Impedance)?;
    expect_representation(v, Representation::Impedance)?;
    let cu = u.partition.set(cu_label)?.to_vec();
    let cv = v.partition.set(cv_label)?.to_vec();
    if cu.len() != cv.len() {
        return Err(Error::PortSetMismatch {
            context: format!("star over sets of sizes {} and {}", cu.len(), cv.len()),
        });
    }
    let nu = u.partition.complement(&[cu_label]);
    let nv = v.partition.complement(&[cv_label]);
    let zsum = u.matrix.select(&cu, &cu).add(&v.matrix.select(&cv, &cv));
    let lu = LuFactors::factor(&zsum).map_err(map_interaction)?;
    let k_ucn = lu.solve(&u.matrix.select(&cu, &nu)).map_err(map_interaction)?;
    let k_vcn = lu.solve(&v.matrix.select(&cv, &nv)).map_err(map_interaction)?;
    let u_nc = u.matrix.select(&nu, &cu);
    let v_nc = v.matrix.select(&nv, &cv);

    let uu = u.matrix.select(&nu, &nu).sub(&u_nc.mul(&k_ucn));
    let uv = u_nc.mul(&k_vcn);
    let vu = v_nc.mul(&k_ucn);
    let vv = v.matrix.select(&nv, &nv).sub(&v_nc.mul(&k_vcn));

    let (n_u, n_v) = (nu.len(), nv.len());
    let mut out = ComplexMatrix::zeros(n_u + n_v, n_u + n_v);
    out.set_block(0, 0, &uu);
    out.set_block(0, n_u, &uv);
    out.set_block(n_u, 0, &vu);
    out.set_block(n_u, n_u, &vv);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionObjective {
    /// keep everything in the supersystem (global method)
    None,
    /// only embed subsystems without free ports, keeping the cascade form
    PreferClosedPorts,
    /// embed the largest independent set of subsystems
    MaxReduction,
}

/// Which subsystems go into the supersystem and which become part of the
/// connection system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionPlan {
    pub supersystem: Vec<usize>,
    pub connection_members: Vec<usize>,
    /// indices into the scheme's join list that remain delta-connections
    pub remaining_joins: Vec<usize>,
    pub fully_reduced: bool,
    /// true iff some connection member keeps free ports, forcing the
    /// star-product path (which returns no cache)
    pub requires_star: bool,
    /// the scheme's connection graph contains an odd cycle, so no plan can
    /// fully reduce it
    pub odd_cycle: bool,
}

fn has_odd_cycle(scheme: &ConnectionScheme) -> bool {
    let n = scheme.systems.len();
    let mut color = vec![None::<bool>; n];
    for start in 0..n {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(false);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            let c = color[node].unwrap();
            for j in &scheme.joins {
                let other = if j.system_a == node {
                    j.system_b
                } else if j.system_b == node {
                    j.system_a
                } else {
                    continue;
                };
                if other == node {
                    return true; // self-join closes an odd cycle
                }
                match color[other] {
                    None => {
                        color[other] = Some(!c);
                        queue.push_back(other);
                    }
                    Some(oc) if oc == c => return true,
                    Some(_) => {}
                }
            }
        }
    }
    false
}

fn finish_plan(scheme: &ConnectionScheme, connection_members: Vec<usize>) -> ReductionPlan {
    let supersystem: Vec<usize> = (0..scheme.systems.len())
        .filter(|i| !connection_members.contains(i))
        .collect();
    let remaining_joins: Vec<usize> = scheme
        .joins
        .iter()
        .enumerate()
        .filter(|(_, j)| {
            !connection_members.contains(&j.system_a) && !connection_members.contains(&j.system_b)
        })
        .map(|(i, _)| i)
        .collect();
    let requires_star = connection_members
        .iter()
        .any(|&m| scheme.free_ports(m) > 0);
    ReductionPlan {
        supersystem,
        fully_reduced: remaining_joins.is_empty(),
        remaining_joins,
        requires_star,
        connection_members,
        odd_cycle: has_odd_cycle(scheme),
    }
}

/// Picks subsystems to move into the connection system: a greedy independent
/// set ordered by descending connected-port count. `None` returns the
/// global-method plan.
pub fn plan_reduction(scheme: &ConnectionScheme, objective: ReductionObjective) -> ReductionPlan {
    let chosen = match objective {
        ReductionObjective::None => Vec::new(),
        _ => {
            let closed_only = objective == ReductionObjective::PreferClosedPorts;
            let mut candidates: Vec<usize> = (0..scheme.systems.len())
                .filter(|&i| scheme.connected_ports(i) > 0 && !scheme.adjacent(i, i))
                .filter(|&i| !closed_only || scheme.free_ports(i) == 0)
                .collect();
            candidates.sort_by_key(|&i| (std::cmp::Reverse(scheme.connected_ports(i)), i));
            let mut chosen: Vec<usize> = Vec::new();
            for c in candidates {
                if chosen.iter().all(|&p| !scheme.adjacent(c, p)) {
                    chosen.push(c);
                }
            }
            chosen.sort_unstable();
            chosen
        }
    };
    finish_plan(scheme, chosen)
}

impl ReductionPlan {
    /// Manual override: treat exactly these members as the connection system.
    pub fn from_embedded(scheme: &ConnectionScheme, members: &[usize]) -> Result<Self> {
        scheme.check_embedded_non_adjacent(members)?;
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for &m in &sorted {
            if m >= scheme.systems.len() {
                return Err(Error::InvalidReduction {
                    context: format!("member {m} out of range"),
                });
            }
        }
        Ok(finish_plan(scheme, sorted))
    }
}

fn delta_pairings_for(
    scheme: &ConnectionScheme,
    layout: &SupersystemLayout,
    join_indices: &[usize],
) -> Result<Vec<DeltaPairing>> {
    join_indices
        .iter()
        .map(|&ji| {
            let j = &scheme.joins[ji];
            let slot_a = layout.slot_of(j.system_a).ok_or_else(|| Error::InvalidReduction {
                context: format!("join {ji} references a member outside the supersystem"),
            })?;
            let slot_b = layout.slot_of(j.system_b).ok_or_else(|| Error::InvalidReduction {
                context: format!("join {ji} references a member outside the supersystem"),
            })?;
            Ok(DeltaPairing {
                first: layout.c_positions(slot_a, &j.set_a)?.to_vec(),
                second: layout.c_positions(slot_b, &j.set_b)?.to_vec(),
            })
        })
        .collect()
}

fn embedded_blocks_for(
    scheme: &ConnectionScheme,
    layout: &SupersystemLayout,
    plan: &ReductionPlan,
) -> Result<Vec<EmbeddedBlock>> {
    let mut blocks = Vec::new();
    for &d in &plan.connection_members {
        let sys = &scheme.systems[d];
        let mut positions = Vec::new();
        let mut local = Vec::new();
        let mut joined_labels: Vec<&str> = Vec::new();
        for j in &scheme.joins {
            let (peer, peer_set, own_set) = if j.system_a == d {
                (j.system_b, &j.set_b, &j.set_a)
            } else if j.system_b == d {
                (j.system_a, &j.set_a, &j.set_b)
            } else {
                continue;
            };
            let peer_slot = layout.slot_of(peer).ok_or_else(|| Error::InvalidReduction {
                context: format!(
                    "embedded `{}` is joined to `{}` which is not in the supersystem",
                    scheme.names[d], scheme.names[peer]
                ),
            })?;
            positions.extend_from_slice(layout.c_positions(peer_slot, peer_set)?);
            local.extend_from_slice(sys.partition.set(own_set)?);
            joined_labels.push(own_set.as_str());
        }
        let free_local = sys.partition.complement(&joined_labels);
        blocks.push(EmbeddedBlock {
            matrix: sys.matrix.clone(),
            positions,
            local,
            free_local,
        });
    }
    Ok(blocks)
}

/// Identity of each free port of the evaluated scheme: (scheme member, local
/// port), in canonical declaration-major order.
fn canonical_free_ports(scheme: &ConnectionScheme) -> Vec<(usize, usize)> {
    let mut list = Vec::new();
    for (id, sys) in scheme.systems.iter().enumerate() {
        let joined = scheme.joined_sets(id);
        for (label, ports) in sys.partition.sets() {
            if !joined.contains(&label.as_str()) {
                list.extend(ports.iter().map(|&p| (id, p)));
            }
        }
    }
    list
}

fn reorder_to_canonical(
    matrix: ComplexMatrix,
    actual: &[(usize, usize)],
    canonical: &[(usize, usize)],
) -> Result<ComplexMatrix> {
    if actual.len() != canonical.len() {
        return Err(Error::ShapeMismatch {
            context: "free port count mismatch during reordering".into(),
        });
    }
    let perm: Vec<usize> = canonical
        .iter()
        .map(|id| {
            actual
                .iter()
                .position(|a| a == id)
                .ok_or_else(|| Error::ShapeMismatch {
                    context: format!("free port {id:?} missing from result"),
                })
        })
        .collect::<Result<_>>()?;
    Ok(matrix.select(&perm, &perm))
}

/// Evaluates a connection scheme according to a reduction plan.
///
/// The global plan assembles the block-diagonal supersystem and the pure
/// delta connection system; reduced plans embed the chosen subsystems into
/// the connection system, using cascade loading when it has no free ports
/// and the Redheffer star product otherwise (the star path returns no
/// cache). Rows and columns of the result are always ordered member-major
/// in scheme declaration order.
pub fn evaluate(
    scheme: &ConnectionScheme,
    plan: &ReductionPlan,
) -> Result<(ComplexMatrix, Option<CascadeCache>)> {
    for sys in &scheme.systems {
        expect_representation(sys, Representation::Scattering)?;
    }
    scheme.check_embedded_non_adjacent(&plan.connection_members)?;
    let mut seen = vec![false; scheme.systems.len()];
    for &m in plan.supersystem.iter().chain(&plan.connection_members) {
        if m >= seen.len() || seen[m] {
            return Err(Error::InvalidReduction {
                context: format!("plan names member {m} twice or out of range"),
            });
        }
        seen[m] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::InvalidReduction {
            context: format!("plan does not place member {missing} anywhere"),
        });
    }

    let layout = SupersystemLayout::build(scheme, &plan.supersystem)?;
    let matrices: Vec<ComplexMatrix> = plan
        .supersystem
        .iter()
        .map(|&i| scheme.systems[i].matrix.clone())
        .collect();
    let pairs = delta_pairings_for(scheme, &layout, &plan.remaining_joins)?;
    let blocks = embedded_blocks_for(scheme, &layout, plan)?;

    if !plan.requires_star {
        let con = embed_connection(&pairs, blocks, layout.c_total)?;
        let (s_tilde, cache) = connect_layout(layout, matrices, con)?;
        return Ok((s_tilde, Some(cache)));
    }

    // star path: the connection system keeps free ports.
    // TODO: support low-rank updates here too; it needs update rules for
    // both star interaction inverses, not just the single cascade one.
    let con = embed_connection(&pairs, blocks, layout.c_total)?;
    let n_n = layout.n_total;
    let n_c = layout.c_total;
    let mut u = ComplexMatrix::zeros(n_n + n_c, n_n + n_c);
    u.set_block(0, 0, &layout.assemble_nn(&matrices));
    u.set_block(0, n_n, &layout.assemble_nc(&matrices));
    u.set_block(n_n, 0, &layout.assemble_cn(&matrices));
    u.set_block(n_n, n_n, &layout.assemble_cc(&matrices));
    let v = con.to_dense();
    let cu: Vec<usize> = (n_n..n_n + n_c).collect();
    let cv: Vec<usize> = (0..n_c).collect();
    let (star, _, _) = star_on_positions(&u, &cu, &v, &cv)?;

    // result order: supersystem free ports, then embedded free ports
    let mut actual: Vec<(usize, usize)> = Vec::new();
    for m in &layout.members {
        actual.extend(m.free_local.iter().map(|&p| (m.scheme_index, p)));
    }
    for &d in &plan.connection_members {
        let joined = scheme.joined_sets(d);
        let free = scheme.systems[d].partition.complement(&joined);
        actual.extend(free.into_iter().map(|p| (d, p)));
    }
    let canonical = canonical_free_ports(scheme);
    let out = reorder_to_canonical(star, &actual, &canonical)?;
    Ok((out, None))
}

/// Reference baseline: folds the subsystems one at a time with the Redheffer
/// star product, in declaration order, resolving every join as soon as both
/// of its systems are present. Result ordered as [`evaluate`].
pub fn iterative_cascade(scheme: &ConnectionScheme) -> Result<ComplexMatrix> {
    for sys in &scheme.systems {
        expect_representation(sys, Representation::Scattering)?;
    }
    if scheme.systems.is_empty() {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    let mut acc = scheme.systems[0].matrix.clone();
    let mut ports: Vec<(usize, usize)> = (0..acc.rows()).map(|p| (0, p)).collect();
    for next in 1..scheme.systems.len() {
        let mut cu = Vec::new();
        let mut cv = Vec::new();
        for j in &scheme.joins {
            let (acc_sys, acc_set, own_set) = if j.system_b == next && j.system_a < next {
                (j.system_a, &j.set_a, &j.set_b)
            } else if j.system_a == next && j.system_b < next {
                (j.system_b, &j.set_b, &j.set_a)
            } else {
                continue;
            };
            for &p in scheme.systems[acc_sys].partition.set(acc_set)? {
                let pos = ports
                    .iter()
                    .position(|&id| id == (acc_sys, p))
                    .ok_or_else(|| Error::InvalidScheme {
                        context: "port already consumed by an earlier join".into(),
                    })?;
                cu.push(pos);
            }
            cv.extend_from_slice(scheme.systems[next].partition.set(own_set)?);
        }
        let (folded, nu, nv) = star_on_positions(&acc, &cu, &scheme.systems[next].matrix, &cv)?;
        let mut new_ports: Vec<(usize, usize)> = nu.iter().map(|&i| ports[i]).collect();
        new_ports.extend(nv.iter().map(|&p| (next, p)));
        acc = folded;
        ports = new_ports;
    }
    // joins between systems with equal index (inner joins) are resolved last
    for j in scheme.joins.iter() {
        if j.system_a != j.system_b {
            continue;
        }
        let mut cu = Vec::new();
        let mut cv = Vec::new();
        for &p in scheme.systems[j.system_a].partition.set(&j.set_a)? {
            cu.push(ports.iter().position(|&id| id == (j.system_a, p)).unwrap());
        }
        for &p in scheme.systems[j.system_b].partition.set(&j.set_b)? {
            cv.push(ports.iter().position(|&id| id == (j.system_b, p)).unwrap());
        }
        // inner connection: treat the joined ports as loaded through a delta
        let n_join = cu.len();
        let all: Vec<usize> = cu.iter().chain(cv.iter()).copied().collect();
        let keep: Vec<usize> = (0..acc.rows()).filter(|i| !all.contains(i)).collect();
        let s_nn = acc.select(&keep, &keep);
        let s_nc = acc.select(&keep, &all);
        let s_cn = acc.select(&all, &keep);
        let s_cc = acc.select(&all, &all);
        let pairs = vec![DeltaPairing {
            first: (0..n_join).collect(),
            second: (n_join..2 * n_join).collect(),
        }];
        let con = delta_system(&pairs, 2 * n_join)?;
        let mut b = con.right_mul_cc(&s_cc).scale(C64::new(-1.0, 0.0));
        for i in 0..2 * n_join {
            b[(i, i)] += C64::new(1.0, 0.0);
        }
        let x = solve_linear(&b, &s_cn).map_err(map_interaction)?;
        acc = s_nn.add(&s_nc.mul(&con.left_mul_cc(&x)));
        ports = keep.iter().map(|&i| ports[i]).collect();
    }
    reorder_to_canonical(acc, &ports, &canonical_free_ports(scheme))
}
