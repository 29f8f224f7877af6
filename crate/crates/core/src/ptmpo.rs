// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Process tensors as matrix-product operators.
//!
//! Node `k` maps bond `k-1` to bond `k`. Its four-index form is
//! `O[a_out, a_in, mu, nu]`; densely it is stored as the matrix
//! `W[a_out * L + mu, a_in * L + nu]`. Extended states are stored with the bond
//! index first, `sigma[a, mu]`, so a forward step is
//! `sigma_k = W vec(sigma_{k-1} U_k^T)`.
//!
//! Besides the boundary caps absorbed into the first and last nodes, a process
//! tensor may carry closure vectors `c_k` for every bond that recover the
//! physical state at step `k` as `rho_k[mu] = sum_a c_k[a] sigma_k[a, mu]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use ndarray_linalg::{JobSvd, QR, SVD, SVDDC};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, ONE};
use crate::liouville::{DensityVec, SuperOp};

pub const FILE_MAGIC: &[u8; 4] = b"PTMP";
pub const FILE_VERSION: u32 = 1;
/// Refuse to densify or serialize a node with more entries than this.
const DENSE_LIMIT: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq)]
pub enum PtNode {
    /// `W[a_out * L + mu, a_in * L + nu]`.
    Dense { chi_out: usize, chi_in: usize, l: usize, w: Array2<C64> },
    /// `O[a, b, mu, nu] = delta_ab maps[a, mu, nu]`.
    BondDiagonal { maps: Array3<C64> },
}

impl PtNode {
    pub fn dense(chi_out: usize, chi_in: usize, l: usize, w: Array2<C64>) -> Result<Self> {
        if w.dim() != (chi_out * l, chi_in * l) {
            return Err(Error::Dimension(format!(
                "node matrix {:?} does not match chi_out={chi_out}, chi_in={chi_in}, L={l}",
                w.dim()
            )));
        }
        if !linalg::all_finite(&w.view()) {
            return Err(Error::NonFinite { step: 0, what: "node entries".into() });
        }
        Ok(PtNode::Dense { chi_out, chi_in, l, w })
    }

    pub fn bond_diagonal(maps: Array3<C64>) -> Result<Self> {
        let (_, a, b) = maps.dim();
        if a != b {
            return Err(Error::NonSquare { rows: a, cols: b });
        }
        if maps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { step: 0, what: "node entries".into() });
        }
        Ok(PtNode::BondDiagonal { maps })
    }

    pub fn identity(l: usize) -> Self {
        PtNode::Dense { chi_out: 1, chi_in: 1, l, w: linalg::identity(l) }
    }

    pub fn chi_out(&self) -> usize {
        match self {
            PtNode::Dense { chi_out, .. } => *chi_out,
            PtNode::BondDiagonal { maps } => maps.dim().0,
        }
    }

    pub fn chi_in(&self) -> usize {
        match self {
            PtNode::Dense { chi_in, .. } => *chi_in,
            PtNode::BondDiagonal { maps } => maps.dim().0,
        }
    }

    pub fn liouville_dim(&self) -> usize {
        match self {
            PtNode::Dense { l, .. } => *l,
            PtNode::BondDiagonal { maps } => maps.dim().1,
        }
    }

    fn dense_len(&self) -> usize {
        let l = self.liouville_dim();
        self.chi_out() * self.chi_in() * l * l
    }

    /// Four-index form `O[a_out, a_in, mu, nu]`.
    pub fn to_array4(&self) -> Result<Array4<C64>> {
        if self.dense_len() > DENSE_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "node with {} entries is too large to densify",
                self.dense_len()
            )));
        }
        let (co, ci, l) = (self.chi_out(), self.chi_in(), self.liouville_dim());
        let mut out = Array4::<C64>::zeros((co, ci, l, l));
        match self {
            PtNode::Dense { w, .. } => {
                for a in 0..co {
                    for b in 0..ci {
                        out.slice_mut(s![a, b, .., ..])
                            .assign(&w.slice(s![a * l..(a + 1) * l, b * l..(b + 1) * l]));
                    }
                }
            }
            PtNode::BondDiagonal { maps } => {
                for a in 0..co {
                    out.slice_mut(s![a, a, .., ..]).assign(&maps.index_axis(Axis(0), a));
                }
            }
        }
        Ok(out)
    }

    pub fn from_array4(t: &Array4<C64>) -> Result<Self> {
        let (co, ci, l, l2) = t.dim();
        if l != l2 {
            return Err(Error::NonSquare { rows: l, cols: l2 });
        }
        let mut w = Array2::<C64>::zeros((co * l, ci * l));
        for a in 0..co {
            for b in 0..ci {
                w.slice_mut(s![a * l..(a + 1) * l, b * l..(b + 1) * l])
                    .assign(&t.slice(s![a, b, .., ..]));
            }
        }
        PtNode::dense(co, ci, l, w)
    }

    /// `vec(y) -> W vec(y)` with `y` shaped `(chi_in, L)`.
    fn apply(&self, y: &Array2<C64>) -> Array2<C64> {
        match self {
            PtNode::Dense { chi_out, l, w, .. } => {
                let flat = y.as_standard_layout();
                let v = flat.as_slice().expect("standard layout");
                let out = w.dot(&ndarray::ArrayView1::from(v));
                out.into_shape_with_order((*chi_out, *l)).expect("node output shape")
            }
            PtNode::BondDiagonal { maps } => {
                let (chi, l, _) = maps.dim();
                let mut out = Array2::<C64>::zeros((chi, l));
                for a in 0..chi {
                    let m = maps.index_axis(Axis(0), a);
                    out.row_mut(a).assign(&m.dot(&y.row(a)));
                }
                out
            }
        }
    }

    /// Transpose action `lambda -> W^T vec(lambda)` with `lambda` shaped `(chi_out, L)`.
    pub(crate) fn apply_transpose(&self, lam: &Array2<C64>) -> Array2<C64> {
        match self {
            PtNode::Dense { chi_in, l, w, .. } => {
                let flat = lam.as_standard_layout();
                let v = flat.as_slice().expect("standard layout");
                // Row-wise accumulation keeps the sweep over `w` contiguous.
                let mut out = Array1::<C64>::zeros(w.ncols());
                for (row, &c) in w.outer_iter().zip(v) {
                    if c != C64::new(0.0, 0.0) {
                        out.scaled_add(c, &row);
                    }
                }
                out.into_shape_with_order((*chi_in, *l)).expect("node output shape")
            }
            PtNode::BondDiagonal { maps } => {
                let (chi, l, _) = maps.dim();
                let mut out = Array2::<C64>::zeros((chi, l));
                for a in 0..chi {
                    let m = maps.index_axis(Axis(0), a);
                    out.row_mut(a).assign(&m.t().dot(&lam.row(a)));
                }
                out
            }
        }
    }
}

/// `sigma[a, mu]` at step `k`; `a` runs over the bond, `mu` over Liouville space.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedState {
    pub data: Array2<C64>,
    pub step: usize,
}

impl ExtendedState {
    pub fn chi(&self) -> usize {
        self.data.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct ProcessTensor {
    pub nodes: Vec<Arc<PtNode>>,
    pub dt: f64,
    pub system_dim: usize,
    /// Closure vectors for bonds `0..=T`, when known.
    pub caps: Option<Vec<Array1<C64>>>,
    pub provenance: String,
}

/// Outcome of [`ProcessTensor::recompress`].
#[derive(Clone, Debug, Default)]
pub struct CompressionReport {
    /// Largest discarded singular value relative to the largest one on its bond.
    pub max_discarded: f64,
    /// Sum over bonds of the discarded Frobenius weight, in the canonical gauge.
    /// When closure vectors are present the weight also covers the reduced
    /// states at intermediate steps.
    pub accumulated: f64,
    /// Frobenius norm of the process tensor.
    pub norm: f64,
    pub profile_before: Vec<usize>,
    pub profile_after: Vec<usize>,
}

impl CompressionReport {
    /// Upper bound on the change of the final state for a given propagator sequence,
    /// `accumulated * prod_k ||U_k||_F * ||rho_0||`.
    pub fn deviation_bound(&self, props: &[SuperOp], rho0: &DensityVec) -> f64 {
        let cond: f64 = props.iter().map(|u| linalg::frobenius(&u.data.view())).product();
        let r = rho0.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        self.accumulated * cond * r
    }
}

fn check_finite(m: &Array2<C64>, step: usize, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step, what: what.into() })
    }
}

impl ProcessTensor {
    pub fn new(
        nodes: Vec<Arc<PtNode>>,
        dt: f64,
        system_dim: usize,
        caps: Option<Vec<Array1<C64>>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let pt = Self { nodes, dt, system_dim, caps, provenance: provenance.into() };
        pt.validate()?;
        Ok(pt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        let l = self.system_dim * self.system_dim;
        let mut prev = 1;
        for (k, node) in self.nodes.iter().enumerate() {
            if node.liouville_dim() != l {
                return Err(Error::Dimension(format!(
                    "node {k} acts on dimension {}, expected {l}",
                    node.liouville_dim()
                )));
            }
            if node.chi_in() != prev {
                return Err(Error::Dimension(format!(
                    "node {k} has chi_in {} but the previous bond is {prev}",
                    node.chi_in()
                )));
            }
            prev = node.chi_out();
        }
        if prev != 1 {
            return Err(Error::Dimension(format!("last bond is {prev}, expected 1")));
        }
        if let Some(caps) = &self.caps {
            let prof = self.bond_profile();
            if caps.len() != prof.len() || caps.iter().zip(&prof).any(|(c, p)| c.len() != *p) {
                return Err(Error::Dimension("closure vectors do not match the bond profile".into()));
            }
        }
        Ok(())
    }

    /// `T` decoupled nodes.
    pub fn identity(steps: usize, system_dim: usize, dt: f64) -> Result<Self> {
        let node = Arc::new(PtNode::identity(system_dim * system_dim));
        let caps = Some(vec![Array1::from_elem(1, ONE); steps + 1]);
        Self::new(vec![node; steps], dt, system_dim, caps, "identity")
    }

    /// Random dense nodes of uniform interior bond `chi`, scaled to keep contractions bounded.
    pub fn random(steps: usize, system_dim: usize, chi: usize, dt: f64, seed: u64, distinct: bool) -> Result<Self> {
        let l = system_dim * system_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |co: usize, ci: usize| -> Result<Arc<PtNode>> {
            let scale = 1.0 / ((ci * l) as f64).sqrt();
            let w = Array2::from_shape_simple_fn((co * l, ci * l), || {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im) * scale
            });
            Ok(Arc::new(PtNode::dense(co, ci, l, w)?))
        };
        let mut nodes = Vec::with_capacity(steps);
        let shared = if steps > 2 { Some(make(chi, chi)?) } else { None };
        for k in 0..steps {
            let ci = if k == 0 { 1 } else { chi };
            let co = if k + 1 == steps { 1 } else { chi };
            match (&shared, ci == chi && co == chi && !distinct) {
                (Some(node), true) => nodes.push(node.clone()),
                _ => nodes.push(make(co, ci)?),
            }
        }
        Self::new(nodes, dt, system_dim, None, format!("random(chi={chi},seed={seed})"))
    }

    pub fn steps(&self) -> usize {
        self.nodes.len()
    }

    pub fn liouville_dim(&self) -> usize {
        self.system_dim * self.system_dim
    }

    /// `chi_k` for bonds `k = 0..=T`.
    pub fn bond_profile(&self) -> Vec<usize> {
        let mut out = vec![self.nodes.first().map(|n| n.chi_in()).unwrap_or(1)];
        out.extend(self.nodes.iter().map(|n| n.chi_out()));
        out
    }

    pub fn max_bond(&self) -> usize {
        self.bond_profile().into_iter().max().unwrap_or(1)
    }

    fn check_props(&self, props: &[SuperOp]) -> Result<()> {
        if props.len() != self.steps() {
            return Err(Error::Dimension(format!(
                "{} propagators for a process tensor of {} steps",
                props.len(),
                self.steps()
            )));
        }
        let l = self.liouville_dim();
        for (k, u) in props.iter().enumerate() {
            if u.dim() != l {
                return Err(Error::Dimension(format!(
                    "propagator {k} has dimension {}, expected {l}",
                    u.dim()
                )));
            }
        }
        Ok(())
    }

    /// Forward sweep. Returns the final state and the extended states `sigma_0..sigma_T`.
    pub fn contract_forward(
        &self,
        props: &[SuperOp],
        rho0: &DensityVec,
    ) -> Result<(DensityVec, Vec<ExtendedState>)> {
        self.check_props(props)?;
        let l = self.liouville_dim();
        if rho0.len() != l {
            return Err(Error::Dimension(format!("initial state has length {}, expected {l}", rho0.len())));
        }
        let mut states = Vec::with_capacity(self.steps() + 1);
        let mut sigma = rho0.data.clone().into_shape_with_order((1, l)).expect("row");
        states.push(ExtendedState { data: sigma.clone(), step: 0 });
        for (k, (node, u)) in self.nodes.iter().zip(props).enumerate() {
            sigma = step_forward(node, &u.data, &sigma);
            check_finite(&sigma, k + 1, "extended state")?;
            states.push(ExtendedState { data: sigma.clone(), step: k + 1 });
        }
        let fin = DensityVec::new(sigma.row(0).to_owned());
        Ok((fin, states))
    }

    /// Final state only, without storing intermediate extended states.
    pub fn propagate(&self, props: &[SuperOp], rho0: &DensityVec) -> Result<DensityVec> {
        self.check_props(props)?;
        let l = self.liouville_dim();
        if rho0.len() != l {
            return Err(Error::Dimension(format!("initial state has length {}, expected {l}", rho0.len())));
        }
        let mut sigma = rho0.data.clone().into_shape_with_order((1, l)).expect("row");
        for (k, (node, u)) in self.nodes.iter().zip(props).enumerate() {
            sigma = step_forward(node, &u.data, &sigma);
            check_finite(&sigma, k + 1, "extended state")?;
        }
        Ok(DensityVec::new(sigma.row(0).to_owned()))
    }

    /// Reduced state at step `k` from an extended state, using the closure vectors.
    pub fn physical_state(&self, state: &ExtendedState) -> Result<DensityVec> {
        let caps = self.caps.as_ref().ok_or_else(|| {
            Error::InvalidParameter("process tensor carries no closure vectors".into())
        })?;
        let c = caps
            .get(state.step)
            .ok_or_else(|| Error::Dimension(format!("step {} is beyond the horizon", state.step)))?;
        if c.len() != state.chi() {
            return Err(Error::Dimension(format!("closure at step {} has length {}", state.step, c.len())));
        }
        Ok(DensityVec::new(c.dot(&state.data)))
    }

    /// Reduced states `rho_0..rho_T`.
    pub fn trajectory(&self, props: &[SuperOp], rho0: &DensityVec) -> Result<Vec<DensityVec>> {
        let caps = self.caps.as_ref().ok_or_else(|| {
            Error::InvalidParameter("process tensor carries no closure vectors".into())
        })?;
        self.check_props(props)?;
        let l = self.liouville_dim();
        if rho0.len() != l {
            return Err(Error::Dimension(format!("initial state has length {}, expected {l}", rho0.len())));
        }
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut sigma = rho0.data.clone().into_shape_with_order((1, l)).expect("row");
        out.push(rho0.clone());
        for (k, (node, u)) in self.nodes.iter().zip(props).enumerate() {
            sigma = step_forward(node, &u.data, &sigma);
            check_finite(&sigma, k + 1, "extended state")?;
            out.push(DensityVec::new(caps[k + 1].dot(&sigma)));
        }
        Ok(out)
    }

    /// Two-sweep SVD recompression with relative threshold `eps_rel`.
    pub fn recompress(&self, eps_rel: f64) -> Result<(ProcessTensor, CompressionReport)> {
        if !(0.0..1.0).contains(&eps_rel) {
            return Err(Error::InvalidParameter(format!("eps_rel must lie in [0, 1), got {eps_rel}")));
        }
        let t = self.steps();
        let l = self.liouville_dim();
        let mut report = CompressionReport { profile_before: self.bond_profile(), ..Default::default() };
        if t == 0 {
            report.profile_after = report.profile_before.clone();
            return Ok((self.clone(), report));
        }
        let mut nodes: Vec<Array4<C64>> = self.nodes.iter().map(|n| n.to_array4()).collect::<Result<_>>()?;
        let mut caps = self.caps.clone();

        // Left-to-right: make nodes 0..T-1 left-orthonormal.
        for k in 0..t - 1 {
            let (co, ci, _, _) = nodes[k].dim();
            let m = nodes[k].view().permuted_axes([1, 2, 3, 0]).as_standard_layout().into_owned();
            let m = m.into_shape_with_order((ci * l * l, co)).expect("reshape");
            let (q, r) = m.qr().map_err(|e| Error::Svd { node: k, msg: e.to_string() })?;
            let r_rank = q.ncols();
            let q4 = q.into_shape_with_order((ci, l, l, r_rank)).expect("reshape");
            nodes[k] = q4.permuted_axes([3, 0, 1, 2]).as_standard_layout().into_owned();
            nodes[k + 1] = absorb_left(&nodes[k + 1], &r);
            if let Some(c) = caps.as_mut() {
                c[k + 1] = r.dot(&c[k + 1]);
            }
        }

        // Right-to-left: truncate each bond by singular values. A closure vector
        // rides along as an extra column so that the kept subspace still
        // reproduces the reduced state on that bond.
        let mut sq_norm = 0.0;
        for k in (1..t).rev() {
            let (co, ci, _, _) = nodes[k].dim();
            let m = nodes[k].view().permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned();
            let m = m.into_shape_with_order((ci, co * l * l)).expect("reshape");
            let width = co * l * l;
            let m = match caps.as_ref() {
                Some(c) => {
                    let mut aug = Array2::<C64>::zeros((ci, width + 1));
                    aug.slice_mut(s![.., ..width]).assign(&m);
                    aug.column_mut(width).assign(&c[k]);
                    aug
                }
                None => m,
            };
            let (u, sv, vt) = svd(&m, k)?;
            let smax = sv.first().cloned().unwrap_or(0.0);
            let keep = if smax == 0.0 {
                1
            } else {
                sv.iter().take_while(|x| **x >= eps_rel * smax && **x > 0.0).count().max(1)
            };
            let discarded: f64 = sv.iter().skip(keep).map(|x| x * x).sum::<f64>();
            if keep < sv.len() && smax > 0.0 {
                report.max_discarded = report.max_discarded.max(sv[keep] / smax);
            }
            report.accumulated += discarded.sqrt();
            if k == 1 {
                sq_norm = sv.iter().map(|x| x * x).sum::<f64>();
            }
            if let Some(c) = caps.as_mut() {
                c[k] = vt.slice(s![..keep, width]).to_owned();
            }
            let vt = vt.slice(s![..keep, ..width]).to_owned();
            let v4 = vt.into_shape_with_order((keep, co, l, l)).expect("reshape");
            nodes[k] = v4.permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned();
            let mut us = u.slice(s![.., ..keep]).to_owned();
            for (j, mut col) in us.columns_mut().into_iter().enumerate() {
                col.mapv_inplace(|z| z * sv[j]);
            }
            nodes[k - 1] = absorb_right(&nodes[k - 1], &us);
        }
        if t == 1 {
            sq_norm = nodes[0].iter().map(|z| z.norm_sqr()).sum();
        }
        report.norm = sq_norm.sqrt();

        let out_nodes = nodes
            .iter()
            .map(|n| PtNode::from_array4(n).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let pt = ProcessTensor::new(
            out_nodes,
            self.dt,
            self.system_dim,
            caps,
            format!("{}+recompress({eps_rel:e})", self.provenance),
        )?;
        report.profile_after = pt.bond_profile();
        Ok((pt, report))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let to_u32 = |x: usize, what: &str| -> Result<u32> {
            u32::try_from(x).map_err(|_| Error::Format(format!("{what} {x} does not fit in u32")))
        };
        w.write_all(FILE_MAGIC)?;
        w.write_all(&FILE_VERSION.to_le_bytes())?;
        w.write_all(&to_u32(self.steps(), "step count")?.to_le_bytes())?;
        w.write_all(&to_u32(self.system_dim, "system dimension")?.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        let mut buf = Vec::new();
        for node in &self.nodes {
            let t4 = node.to_array4()?;
            let (co, ci, _, _) = t4.dim();
            w.write_all(&to_u32(co, "bond")?.to_le_bytes())?;
            w.write_all(&to_u32(ci, "bond")?.to_le_bytes())?;
            buf.clear();
            for z in t4.iter() {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        match &self.caps {
            None => w.write_all(&0u32.to_le_bytes())?,
            Some(caps) => {
                w.write_all(&1u32.to_le_bytes())?;
                for c in caps {
                    w.write_all(&to_u32(c.len(), "closure length")?.to_le_bytes())?;
                    for z in c.iter() {
                        w.write_all(&z.re.to_le_bytes())?;
                        w.write_all(&z.im.to_le_bytes())?;
                    }
                }
            }
        }
        let tag = self.provenance.as_bytes();
        w.write_all(&to_u32(tag.len(), "provenance length")?.to_le_bytes())?;
        w.write_all(tag)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic, "magic")?;
        if &magic != FILE_MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = read_u32(r, "version")?;
        if version != FILE_VERSION {
            return Err(Error::Version { found: version, expected: FILE_VERSION });
        }
        let t = read_u32(r, "step count")? as usize;
        let s = read_u32(r, "system dimension")? as usize;
        let dt = read_f64(r, "dt")?;
        if s == 0 || s > 1 << 12 {
            return Err(Error::Format(format!("implausible system dimension {s}")));
        }
        let l = s * s;
        let mut nodes = Vec::with_capacity(t.min(1 << 20));
        let mut prev = 1usize;
        for k in 0..t {
            let co = read_u32(r, "bond")? as usize;
            let ci = read_u32(r, "bond")? as usize;
            if ci != prev {
                return Err(Error::Format(format!("node {k}: chi_in {ci} does not match previous bond {prev}")));
            }
            let n = co
                .checked_mul(ci)
                .and_then(|x| x.checked_mul(l * l))
                .filter(|n| *n <= DENSE_LIMIT)
                .ok_or_else(|| Error::Format(format!("node {k}: implausible size")))?;
            let mut bytes = vec![0u8; n * 16];
            read_exact(r, &mut bytes, "node data")?;
            let data: Vec<C64> = bytes
                .chunks_exact(16)
                .map(|c| {
                    C64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect();
            let t4 = Array4::from_shape_vec((co, ci, l, l), data).expect("sized above");
            nodes.push(Arc::new(PtNode::from_array4(&t4)?));
            prev = co;
        }
        let caps = match read_u32(r, "closure flag")? {
            0 => None,
            1 => {
                let mut caps = Vec::with_capacity(t + 1);
                for _ in 0..=t {
                    let n = read_u32(r, "closure length")? as usize;
                    if n > DENSE_LIMIT {
                        return Err(Error::Format("implausible closure length".into()));
                    }
                    let mut c = Array1::zeros(n);
                    for z in c.iter_mut() {
                        *z = C64::new(read_f64(r, "closure")?, read_f64(r, "closure")?);
                    }
                    caps.push(c);
                }
                Some(caps)
            }
            f => return Err(Error::Format(format!("unknown closure flag {f}"))),
        };
        let n = read_u32(r, "provenance length")? as usize;
        if n > 1 << 16 {
            return Err(Error::Format("implausible provenance length".into()));
        }
        let mut tag = vec![0u8; n];
        read_exact(r, &mut tag, "provenance")?;
        let provenance = String::from_utf8(tag).map_err(|_| Error::Format("provenance is not UTF-8".into()))?;
        ProcessTensor::new(nodes, dt, s, caps, provenance).map_err(|e| match e {
            Error::Dimension(m) => Error::Format(m),
            other => other,
        })
    }
}

fn step_forward(node: &PtNode, u: &Array2<C64>, sigma: &Array2<C64>) -> Array2<C64> {
    let y = sigma.dot(&u.t());
    node.apply(&y)
}

/// One backward step: returns `(w, lambda_{k-1})` with `w = W^T lambda_k` and
/// `lambda_{k-1} = w U_k`.
pub(crate) fn step_backward(node: &PtNode, u: &Array2<C64>, lam: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let w = node.apply_transpose(lam);
    let prev = w.dot(u);
    (w, prev)
}

/// `node'[a, r, mu, nu] = sum_b R[r, b] node[a, b, mu, nu]`.
fn absorb_left(node: &Array4<C64>, r: &Array2<C64>) -> Array4<C64> {
    let (co, ci, l, _) = node.dim();
    let m = node.view().permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned();
    let m = m.into_shape_with_order((ci, co * l * l)).expect("reshape");
    let out = r.dot(&m);
    let rn = r.nrows();
    out.into_shape_with_order((rn, co, l, l)).expect("reshape").permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned()
}

/// `node'[r, b, mu, nu] = sum_a node[a, b, mu, nu] US[a, r]`.
fn absorb_right(node: &Array4<C64>, us: &Array2<C64>) -> Array4<C64> {
    let (co, ci, l, _) = node.dim();
    let m = node.view().into_shape_with_order((co, ci * l * l)).expect("contiguous");
    let out = us.t().dot(&m);
    out.into_shape_with_order((us.ncols(), ci, l, l)).expect("reshape")
}

fn svd(m: &Array2<C64>, node: usize) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    match m.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => Ok((u, s, vt)),
        _ => match m.svd(true, true) {
            Ok((Some(u), s, Some(vt))) => {
                let k = s.len();
                Ok((u.slice(s![.., ..k]).to_owned(), s, vt.slice(s![..k, ..]).to_owned()))
            }
            Ok(_) => Err(Error::Svd { node, msg: "missing singular vectors".into() }),
            Err(e) => Err(Error::Svd { node, msg: e.to_string() }),
        },
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("file truncated while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(f64::from_le_bytes(b))
}
