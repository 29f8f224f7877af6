// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Hierarchical equations of motion in an extended Liouville space and the
//! uniform process tensor they generate.
//!
//! With `C(t) = sum_k alpha_k exp(i gamma_k t)` and `C(t)^* = sum_k alpha_tilde_k exp(i gamma_k t)`,
//! the auxiliary densities obey
//!
//! ```text
//! d rho_n/dt = i (sum_k n_k gamma_k) rho_n
//!            - i sum_k [S, rho_{n + e_k}]
//!            - i sum_k n_k (alpha_k S rho_{n - e_k} - alpha_tilde_k rho_{n - e_k} S)
//! ```
//!
//! The extended state stacks `rho_n` as `n_index * L + mu`, so the node matrix
//! of the process tensor is `exp(L_int dt)` itself.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::Eig;
use num_complex::Complex64 as C64;

use crate::bath::BathCorrelation;
use crate::error::{Error, Result};
use crate::linalg::{self, I, ONE};
use crate::liouville::{left_mul, right_mul, DensityVec, QOperator, SuperOp};
use crate::ptmpo::{ProcessTensor, PtNode};

pub const DEFAULT_AUX_CEILING: usize = 2000;

/// Multi-indices `n` with `sum n <= depth`, ordered by level and then lexicographically.
#[derive(Clone, Debug)]
pub struct HierarchySpace {
    pub terms: usize,
    pub depth: usize,
    pub indices: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
}

impl HierarchySpace {
    pub fn new(terms: usize, depth: usize) -> Self {
        let mut indices = Vec::new();
        for level in 0..=depth {
            let mut cur = vec![0u32; terms];
            compositions(level as u32, 0, &mut cur, &mut indices);
        }
        let lookup = indices.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self { terms, depth, indices, lookup }
    }

    /// `C(M + D, M)`, computed without building the hierarchy.
    pub fn count(terms: usize, depth: usize) -> usize {
        let mut c: u128 = 1;
        for i in 1..=terms as u128 {
            c = c * (depth as u128 + i) / i;
            if c > usize::MAX as u128 {
                return usize::MAX;
            }
        }
        c as usize
    }

    pub fn n_aux(&self) -> usize {
        self.indices.len()
    }

    pub fn index_of(&self, n: &[u32]) -> Option<usize> {
        self.lookup.get(n).copied()
    }

    pub fn raise(&self, i: usize, k: usize) -> Option<usize> {
        let mut n = self.indices[i].clone();
        n[k] += 1;
        self.index_of(&n)
    }

    pub fn lower(&self, i: usize, k: usize) -> Option<usize> {
        let mut n = self.indices[i].clone();
        if n[k] == 0 {
            return None;
        }
        n[k] -= 1;
        self.index_of(&n)
    }
}

// Lexicographically descending in the first slot, so e_1 precedes e_2.
fn compositions(remaining: u32, slot: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let m = cur.len();
    if m == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if slot == m - 1 {
        cur[slot] = remaining;
        out.push(cur.clone());
        cur[slot] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        cur[slot] = v;
        compositions(remaining - v, slot + 1, cur, out);
    }
    cur[slot] = 0;
}

/// Interaction part of the extended generator, without the system Liouvillian.
#[derive(Clone, Debug)]
pub struct ExtendedGenerator {
    pub l_int: Array2<C64>,
    pub hierarchy: HierarchySpace,
    pub system_dim: usize,
}

impl ExtendedGenerator {
    pub fn liouville_dim(&self) -> usize {
        self.system_dim * self.system_dim
    }

    /// Largest real part of the spectrum of `L_int`.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        let (ev, _) = self.l_int.eig()?;
        Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }
}

pub fn build_generator(
    corr: &BathCorrelation,
    s_op: &QOperator,
    depth: usize,
    aux_ceiling: usize,
) -> Result<ExtendedGenerator> {
    let m = corr.len();
    let n_aux = HierarchySpace::count(m, depth);
    if n_aux > aux_ceiling {
        return Err(Error::HierarchyTooLarge { n_aux, ceiling: aux_ceiling });
    }
    let h = HierarchySpace::new(m, depth);
    let s = s_op.dim();
    let l = s * s;
    let left = left_mul(s_op).data;
    let right = right_mul(s_op).data;
    let comm = &left - &right;
    let mut gen = Array2::<C64>::zeros((l * n_aux, l * n_aux));
    for (i, n) in h.indices.iter().enumerate() {
        let damp: C64 = n.iter().zip(&corr.terms).map(|(nk, t)| t.gamma * *nk as f64).sum::<C64>() * I;
        for d in 0..l {
            gen[[i * l + d, i * l + d]] += damp;
        }
        for (k, term) in corr.terms.iter().enumerate() {
            if let Some(j) = h.raise(i, k) {
                let mut block = gen.slice_mut(s![i * l..(i + 1) * l, j * l..(j + 1) * l]);
                block.scaled_add(-I, &comm);
            }
            if let Some(j) = h.lower(i, k) {
                let nk = n[k] as f64;
                let mut block = gen.slice_mut(s![i * l..(i + 1) * l, j * l..(j + 1) * l]);
                block.scaled_add(-I * nk * term.alpha, &left);
                block.scaled_add(I * nk * term.alpha_tilde, &right);
            }
        }
    }
    Ok(ExtendedGenerator { l_int: gen, hierarchy: h, system_dim: s })
}

fn node_exponential(gen: &ExtendedGenerator, dt: f64) -> Result<Array2<C64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let scaled = gen.l_int.mapv(|z| z * dt);
    match linalg::expm(&scaled.view()) {
        Ok(e) if linalg::all_finite(&e.view()) => Ok(e),
        _ => Err(Error::Unstable { abscissa: gen.spectral_abscissa().unwrap_or(f64::NAN) }),
    }
}

/// Uniform process tensor with node `exp(L_int dt)` and caps on the empty hierarchy slot.
pub fn heom_pt(gen: &ExtendedGenerator, dt: f64, steps: usize) -> Result<ProcessTensor> {
    let l = gen.liouville_dim();
    let n = gen.hierarchy.n_aux();
    let e = node_exponential(gen, dt)?;
    let norm = linalg::one_norm(&e.view());
    if norm > 1e8 {
        return Err(Error::Unstable { abscissa: gen.spectral_abscissa().unwrap_or(f64::NAN) });
    }
    let mut nodes = Vec::with_capacity(steps);
    if steps == 1 {
        nodes.push(Arc::new(PtNode::dense(1, 1, l, e.slice(s![..l, ..l]).to_owned())?));
    } else if steps > 1 {
        let interior = Arc::new(PtNode::dense(n, n, l, e.clone())?);
        nodes.push(Arc::new(PtNode::dense(n, 1, l, e.slice(s![.., ..l]).to_owned())?));
        for _ in 1..steps - 1 {
            nodes.push(interior.clone());
        }
        nodes.push(Arc::new(PtNode::dense(1, n, l, e.slice(s![..l, ..]).to_owned())?));
    }
    let mut caps = Vec::with_capacity(steps + 1);
    caps.push(Array1::from_elem(1, ONE));
    for _ in 1..steps {
        let mut c = Array1::zeros(n);
        c[0] = ONE;
        caps.push(c);
    }
    if steps > 0 {
        caps.push(Array1::from_elem(1, ONE));
    }
    ProcessTensor::new(
        nodes,
        dt,
        gen.system_dim,
        Some(caps),
        format!("heom(terms={},depth={})", gen.hierarchy.terms, gen.hierarchy.depth),
    )
}

/// Direct time stepping of the extended state: system step, then `exp(L_int dt)`.
/// Returns the physical block at every step, `rho_0..rho_T`.
pub fn heom_solve(
    gen: &ExtendedGenerator,
    props: &[SuperOp],
    rho0: &DensityVec,
    dt: f64,
) -> Result<Vec<DensityVec>> {
    let l = gen.liouville_dim();
    let n = gen.hierarchy.n_aux();
    if rho0.len() != l {
        return Err(Error::Dimension(format!("initial state has length {}, expected {l}", rho0.len())));
    }
    let e = node_exponential(gen, dt)?;
    let mut state = Array1::<C64>::zeros(n * l);
    state.slice_mut(s![..l]).assign(&rho0.data);
    let mut out = vec![rho0.clone()];
    for (k, u) in props.iter().enumerate() {
        if u.dim() != l {
            return Err(Error::Dimension(format!("propagator {k} has dimension {}, expected {l}", u.dim())));
        }
        let blocks = state.view().into_shape_with_order((n, l)).expect("blocks");
        let moved = blocks.dot(&u.data.t());
        let flat = moved.into_shape_with_order(n * l).expect("flat");
        state = e.dot(&flat);
        if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { step: k + 1, what: "hierarchy state".into() });
        }
        out.push(DensityVec::new(state.slice(s![..l]).to_owned()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::ExpTerm;
    use crate::liouville::{hamiltonian_superop, step_propagator};
    use crate::linalg::{kron, ZERO};
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn one_term(alpha: C64, alpha_tilde: C64, gamma: C64) -> BathCorrelation {
        BathCorrelation::new(vec![ExpTerm { alpha, alpha_tilde, gamma }]).unwrap()
    }

    #[test]
    fn hierarchy_ordering_and_count() {
        let h = HierarchySpace::new(2, 2);
        assert_eq!(h.n_aux(), 6);
        assert_eq!(h.indices[0], vec![0, 0]);
        assert_eq!(h.indices[1], vec![1, 0]);
        assert_eq!(h.indices[2], vec![0, 1]);
        assert_eq!(h.raise(0, 1), Some(2));
        assert_eq!(h.lower(0, 0), None);
        assert_eq!(h.raise(3, 0), None);
        for (m, d) in [(4, 4), (4, 6), (3, 5), (1, 7)] {
            assert_eq!(HierarchySpace::new(m, d).n_aux(), HierarchySpace::count(m, d));
        }
        assert_eq!(HierarchySpace::count(4, 6), 210);
    }

    #[test]
    fn depth_zero_generator_is_zero() {
        let corr = one_term(c(0.3, 0.1), c(0.3, -0.1), c(0.5, 1.0));
        let gen = build_generator(&corr, &QOperator::sigma_z().scaled(0.5), 0, 100).unwrap();
        assert_eq!(gen.l_int.dim(), (4, 4));
        assert!(gen.l_int.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn zero_coupling_keeps_only_damping() {
        let corr = one_term(c(0.3, 0.1), c(0.3, -0.1), c(0.5, 1.0));
        let gen = build_generator(&corr, &QOperator::zeros(2), 3, 100).unwrap();
        for (i, n) in gen.hierarchy.indices.iter().enumerate() {
            let want = I * corr.terms[0].gamma * n[0] as f64;
            for d in 0..4 {
                assert_eq!(gen.l_int[[i * 4 + d, i * 4 + d]], want);
            }
        }
        let offdiag: f64 = gen.l_int.indexed_iter().filter(|((a, b), _)| a != b).map(|(_, z)| z.norm()).sum();
        assert_eq!(offdiag, 0.0);
    }

    #[test]
    fn smallest_hierarchy_matches_hand_assembly() {
        let (a, at, g) = (c(0.2, 0.05), c(0.2, -0.05), c(0.3, 0.9));
        let corr = one_term(a, at, g);
        let sz = QOperator::sigma_z().scaled(0.5);
        let gen = build_generator(&corr, &sz, 1, 10).unwrap();
        // column-major: S rho -> I (x) S, rho S -> S^T (x) I
        let id = linalg::identity(2);
        let ls = kron(&id.view(), &sz.data.view());
        let rs = kron(&sz.data.t(), &id.view());
        let mut want = Array2::<C64>::zeros((8, 8));
        for d in 0..4 {
            want[[4 + d, 4 + d]] = I * g;
        }
        want.slice_mut(s![0..4, 4..8]).assign(&((&ls - &rs).mapv(|z| -I * z)));
        want.slice_mut(s![4..8, 0..4]).assign(&(ls.mapv(|z| -I * a * z) + rs.mapv(|z| I * at * z)));
        assert!(linalg::max_abs_diff(&gen.l_int.view(), &want.view()) < 1e-15);
    }

    #[test]
    fn ceiling_is_enforced() {
        let terms = vec![ExpTerm { alpha: ONE, alpha_tilde: ONE, gamma: c(0.0, 1.0) }; 6];
        let corr = BathCorrelation::new(terms).unwrap();
        let err = build_generator(&corr, &QOperator::sigma_z(), 8, 1000).unwrap_err();
        assert!(matches!(err, Error::HierarchyTooLarge { n_aux: 3003, ceiling: 1000 }));
    }

    fn drive(t: usize, seed: f64) -> Vec<SuperOp> {
        (0..t)
            .map(|k| {
                let u = (seed + 0.37 * k as f64).sin();
                let h = QOperator { data: QOperator::sigma_x().scaled(u).data + QOperator::sigma_z().scaled(0.5).data };
                step_propagator(&hamiltonian_superop(&h), 0.05).unwrap()
            })
            .collect()
    }

    #[test]
    fn depth_zero_pt_is_closed_system() {
        let corr = one_term(c(0.3, 0.0), c(0.3, 0.0), c(0.0, 1.0));
        let gen = build_generator(&corr, &QOperator::sigma_z(), 0, 10).unwrap();
        let pt = heom_pt(&gen, 0.05, 8).unwrap();
        let props = drive(8, 0.2);
        let rho0 = DensityVec::basis(2, 0);
        let (fin, _) = pt.contract_forward(&props, &rho0).unwrap();
        let want = props.iter().fold(rho0.clone(), |r, u| u.apply(&r));
        assert!(linalg::vec_max_abs_diff(&fin.data, &want.data) < 1e-13);
    }

    #[test]
    fn decoupled_terms_give_identity_environment() {
        let corr = one_term(ZERO, ZERO, c(0.4, 0.7));
        let gen = build_generator(&corr, &QOperator::sigma_z(), 3, 10).unwrap();
        let pt = heom_pt(&gen, 0.05, 6).unwrap();
        let props = drive(6, 1.0);
        let rho0 = DensityVec::basis(2, 1);
        let traj = pt.trajectory(&props, &rho0).unwrap();
        let mut want = rho0.clone();
        for (k, u) in props.iter().enumerate() {
            want = u.apply(&want);
            assert!(linalg::vec_max_abs_diff(&traj[k + 1].data, &want.data) < 1e-12);
        }
    }

    #[test]
    fn pt_route_matches_direct_integration() {
        let corr = BathCorrelation::new(vec![
            ExpTerm { alpha: c(0.1, -0.03), alpha_tilde: c(0.1, 0.03), gamma: c(0.4, 1.1) },
            ExpTerm { alpha: c(0.05, 0.02), alpha_tilde: c(0.05, -0.02), gamma: c(-0.4, 1.1) },
        ])
        .unwrap();
        let gen = build_generator(&corr, &QOperator::sigma_z().scaled(0.5), 4, 100).unwrap();
        let pt = heom_pt(&gen, 0.05, 30).unwrap();
        assert_eq!(pt.bond_profile()[1], 15);
        assert!(Arc::ptr_eq(&pt.nodes[1], &pt.nodes[17]));
        let props = drive(30, 0.7);
        let rho0 = DensityVec::new(array![c(0.6, 0.), c(0.2, 0.1), c(0.2, -0.1), c(0.4, 0.)]);
        let direct = heom_solve(&gen, &props, &rho0, 0.05).unwrap();
        let via_pt = pt.trajectory(&props, &rho0).unwrap();
        for (a, b) in direct.iter().zip(&via_pt) {
            assert!(linalg::vec_max_abs_diff(&a.data, &b.data) <= 1e-12);
            assert!((a.trace() - ONE).norm() < 1e-8);
        }
    }

    #[test]
    fn bond_profile_of_small_hierarchy() {
        let corr = BathCorrelation::new(vec![
            ExpTerm { alpha: ONE, alpha_tilde: ONE, gamma: c(0.0, 1.0) },
            ExpTerm { alpha: ONE, alpha_tilde: ONE, gamma: c(0.0, 2.0) },
        ])
        .unwrap();
        let gen = build_generator(&corr, &QOperator::sigma_z().scaled(0.5), 2, 100).unwrap();
        let pt = heom_pt(&gen, 0.05, 4).unwrap();
        assert_eq!(pt.bond_profile(), vec![1, 6, 6, 6, 1]);
    }

    #[test]
    fn growing_generator_is_reported_unstable() {
        // A non-decaying exponent with a large amplitude makes the hierarchy explode.
        let corr = one_term(c(1e6, 0.0), c(1e6, 0.0), c(0.0, 1e-9));
        let gen = build_generator(&corr, &QOperator::sigma_z(), 6, 100).unwrap();
        assert!(matches!(heom_pt(&gen, 5.0, 3), Err(Error::Unstable { .. })));
    }
}
