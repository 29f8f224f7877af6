// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over the process tensor library.
//!
//! Conventions shared by every function:
//! - Complex numbers are passed as interleaved `double` pairs `(re, im)`.
//! - Operators on the system Hilbert space are `S x S`, row-major.
//! - Density matrices are vectorized column-major: entry `rho[i][j]` sits at
//!   index `i + S * j` of a length `L = S * S` vector.
//! - Superoperators are `L x L`, row-major, acting on such vectors.
//! - Fallible functions return a [`PtmpoStatus`]; on failure a description is
//!   available from [`ptmpo_last_error_message`].

// Entry points are called from C; pointer contracts are stated per function.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use ptmpo::bath::{BathCorrelation, ExpTerm};
use ptmpo::control::{backpropagate, gradient_wrt_propagators, terminal_cost, terminal_costate};
use ptmpo::heom::{build_generator, heom_pt, DEFAULT_AUX_CEILING};
use ptmpo::liouville::{hamiltonian_superop, step_propagator, DensityVec, QOperator, SuperOp};
use ptmpo::ptmpo::ProcessTensor;
use ptmpo::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PtmpoStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    InvalidArgument = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

/// Opaque process tensor handle.
pub struct PtmpoProcessTensor {
    inner: ProcessTensor,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> PtmpoStatus {
    match err {
        Error::Dimension(_) | Error::NonSquare { .. } => PtmpoStatus::Dimension,
        Error::InvalidParameter(_) | Error::Config(_) => PtmpoStatus::InvalidArgument,
        Error::Io(_) => PtmpoStatus::Io,
        Error::Format(_) | Error::Version { .. } => PtmpoStatus::Format,
        _ => PtmpoStatus::Numerical,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PtmpoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PtmpoStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PtmpoStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PtmpoStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: the caller guarantees that a non-null pointer refers to a live value.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: the caller guarantees that a non-null pointer is writable.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: the caller guarantees `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: the caller guarantees `len` writable elements.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    // SAFETY: the caller passes a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) };
    let s = s.to_str().map_err(|_| Fail::Lib(Error::InvalidParameter("path is not valid UTF-8".into())))?;
    Ok(PathBuf::from(s))
}

fn complex(data: &[f64]) -> Vec<C64> {
    data.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

fn write_complex(dst: &mut [f64], src: impl IntoIterator<Item = C64>) {
    for (d, z) in dst.chunks_exact_mut(2).zip(src) {
        d[0] = z.re;
        d[1] = z.im;
    }
}

fn square(data: &[f64], n: usize) -> Array2<C64> {
    Array2::from_shape_vec((n, n), complex(data)).expect("length checked by caller")
}

fn handle<'a>(pt: *const PtmpoProcessTensor) -> Result<&'a ProcessTensor, Fail> {
    Ok(&non_null(pt, "process tensor")?.inner)
}

fn into_handle(pt: ProcessTensor, out: *mut *mut PtmpoProcessTensor) -> Result<(), Fail> {
    let out = out_ptr(out, "output handle")?;
    *out = Box::into_raw(Box::new(PtmpoProcessTensor { inner: pt }));
    Ok(())
}

fn propagators(pt: &ProcessTensor, props: *const f64) -> Result<Vec<SuperOp>, Fail> {
    let l = pt.liouville_dim();
    let data = slice(props, pt.steps() * l * l * 2, "propagators")?;
    Ok(data.chunks_exact(l * l * 2).map(|c| SuperOp { data: square(c, l) }).collect())
}

fn density(p: *const f64, l: usize, what: &'static str) -> Result<DensityVec, Fail> {
    Ok(DensityVec::new(Array1::from(complex(slice(p, 2 * l, what)?))))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
#[no_mangle]
pub extern "C" fn ptmpo_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` has room for `len` bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Reads a process tensor file.
#[no_mangle]
pub extern "C" fn ptmpo_pt_load(path: *const c_char, out: *mut *mut PtmpoProcessTensor) -> PtmpoStatus {
    guard(|| {
        let pt = ProcessTensor::load(&path_arg(path)?)?;
        into_handle(pt, out)
    })
}

/// Writes a process tensor file.
#[no_mangle]
pub extern "C" fn ptmpo_pt_save(pt: *const PtmpoProcessTensor, path: *const c_char) -> PtmpoStatus {
    guard(|| Ok(handle(pt)?.save(&path_arg(path)?)?))
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub extern "C" fn ptmpo_pt_free(pt: *mut PtmpoProcessTensor) {
    if !pt.is_null() {
        // SAFETY: the handle came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(pt) });
    }
}

/// Number of time steps `T`.
#[no_mangle]
pub extern "C" fn ptmpo_pt_steps(pt: *const PtmpoProcessTensor, out: *mut usize) -> PtmpoStatus {
    guard(|| {
        *out_ptr(out, "steps")? = handle(pt)?.steps();
        Ok(())
    })
}

/// System Hilbert space dimension `S`.
#[no_mangle]
pub extern "C" fn ptmpo_pt_system_dim(pt: *const PtmpoProcessTensor, out: *mut usize) -> PtmpoStatus {
    guard(|| {
        *out_ptr(out, "system dimension")? = handle(pt)?.system_dim;
        Ok(())
    })
}

/// Time step.
#[no_mangle]
pub extern "C" fn ptmpo_pt_dt(pt: *const PtmpoProcessTensor, out: *mut f64) -> PtmpoStatus {
    guard(|| {
        *out_ptr(out, "dt")? = handle(pt)?.dt;
        Ok(())
    })
}

/// Bond dimensions for bonds `0..=T` (`T + 1` entries). Fails with
/// `Dimension` when `len` is too small; `out_len` always receives `T + 1`.
#[no_mangle]
pub extern "C" fn ptmpo_pt_bond_profile(
    pt: *const PtmpoProcessTensor,
    buf: *mut usize,
    len: usize,
    out_len: *mut usize,
) -> PtmpoStatus {
    guard(|| {
        let profile = handle(pt)?.bond_profile();
        *out_ptr(out_len, "length")? = profile.len();
        if len < profile.len() {
            return Err(Error::Dimension(format!("bond profile needs {} entries", profile.len())).into());
        }
        slice_mut(buf, profile.len(), "buffer")?.copy_from_slice(&profile);
        Ok(())
    })
}

/// Hierarchy process tensor from `n_terms` exponentials
/// `C(t) = sum_k alpha_k exp(i gamma_k t)`, `C(t)^* = sum_k alpha_tilde_k exp(i gamma_k t)`.
/// `alpha`, `alpha_tilde` and `gamma` hold `n_terms` complex values; `coupling`
/// is the `S x S` system coupling operator.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn ptmpo_heom_build(
    alpha: *const f64,
    alpha_tilde: *const f64,
    gamma: *const f64,
    n_terms: usize,
    coupling: *const f64,
    system_dim: usize,
    depth: usize,
    dt: f64,
    steps: usize,
    out: *mut *mut PtmpoProcessTensor,
) -> PtmpoStatus {
    guard(|| {
        let a = complex(slice(alpha, 2 * n_terms, "alpha")?);
        let at = complex(slice(alpha_tilde, 2 * n_terms, "alpha_tilde")?);
        let g = complex(slice(gamma, 2 * n_terms, "gamma")?);
        let terms = (0..n_terms).map(|k| ExpTerm { alpha: a[k], alpha_tilde: at[k], gamma: g[k] }).collect();
        let corr = BathCorrelation::new(terms)?;
        let s = slice(coupling, 2 * system_dim * system_dim, "coupling")?;
        let s_op = QOperator::new(square(s, system_dim))?;
        let gen = build_generator(&corr, &s_op, depth, DEFAULT_AUX_CEILING)?;
        into_handle(heom_pt(&gen, dt, steps)?, out)
    })
}

/// Recompressed copy with relative singular value threshold `eps_rel`.
/// `max_discarded` (optional) receives the largest discarded relative singular value.
#[no_mangle]
pub extern "C" fn ptmpo_pt_recompress(
    pt: *const PtmpoProcessTensor,
    eps_rel: f64,
    out: *mut *mut PtmpoProcessTensor,
    max_discarded: *mut f64,
) -> PtmpoStatus {
    guard(|| {
        let (small, report) = handle(pt)?.recompress(eps_rel)?;
        if !max_discarded.is_null() {
            *out_ptr(max_discarded, "max_discarded")? = report.max_discarded;
        }
        into_handle(small, out)
    })
}

/// `exp(-i [H, .] dt)` for an `S x S` Hamiltonian; writes `L x L` complex values.
#[no_mangle]
pub extern "C" fn ptmpo_step_propagator(
    hamiltonian: *const f64,
    system_dim: usize,
    dt: f64,
    out_prop: *mut f64,
) -> PtmpoStatus {
    guard(|| {
        let h = QOperator::new(square(slice(hamiltonian, 2 * system_dim * system_dim, "hamiltonian")?, system_dim))?;
        let u = step_propagator(&hamiltonian_superop(&h), dt)?;
        let l = system_dim * system_dim;
        write_complex(slice_mut(out_prop, 2 * l * l, "output propagator")?, u.data.iter().copied());
        Ok(())
    })
}

/// Reduced states `rho_0..rho_T` for `T` step propagators (`T * L * L` complex
/// values) and an initial state (`L` complex values). Writes `(T + 1) * L`
/// complex values.
#[no_mangle]
pub extern "C" fn ptmpo_pt_dynamics(
    pt: *const PtmpoProcessTensor,
    props: *const f64,
    rho0: *const f64,
    out_states: *mut f64,
) -> PtmpoStatus {
    guard(|| {
        let pt = handle(pt)?;
        let l = pt.liouville_dim();
        let props = propagators(pt, props)?;
        let rho0 = density(rho0, l, "rho0")?;
        let traj = pt.trajectory(&props, &rho0)?;
        let out = slice_mut(out_states, 2 * l * traj.len(), "output states")?;
        write_complex(out, traj.iter().flat_map(|r| r.data.iter().copied()));
        Ok(())
    })
}

/// Terminal cost `1 - Re tr(target^dagger rho_T)` and its gradient with respect
/// to every step propagator, `dZ/dU_k[mu][nu]` (`T * L * L` complex values,
/// holomorphic convention: `dZ = Re sum G[mu][nu] dU[mu][nu]`).
#[no_mangle]
pub extern "C" fn ptmpo_pt_gradient(
    pt: *const PtmpoProcessTensor,
    props: *const f64,
    rho0: *const f64,
    target: *const f64,
    out_cost: *mut f64,
    out_grad: *mut f64,
) -> PtmpoStatus {
    guard(|| {
        let pt = handle(pt)?;
        let l = pt.liouville_dim();
        let props = propagators(pt, props)?;
        let rho0 = density(rho0, l, "rho0")?;
        let target = density(target, l, "target")?;
        let (fin, states) = pt.contract_forward(&props, &rho0)?;
        let cost = terminal_cost(&fin, &target)?;
        let costates = backpropagate(pt, &props, &terminal_costate(&target, pt.steps()))?;
        let grads = gradient_wrt_propagators(&states, &costates, pt)?;
        *out_ptr(out_cost, "cost")? = cost;
        let out = slice_mut(out_grad, 2 * l * l * pt.steps(), "output gradient")?;
        write_complex(out, grads.iter().flat_map(|g| g.iter().copied()));
        Ok(())
    })
}
