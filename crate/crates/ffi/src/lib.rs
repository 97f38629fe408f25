//! C ABI over `imac-core`.
//!
//! Objects are opaque handles created by `imac_*_new`/`imac_*_load` and
//! released with the matching `imac_*_free`. Every fallible call returns an
//! [`ImacStatus`]; on failure `imac_last_error()` describes the problem
//! until the next call on the same thread. Panics never cross the boundary.
//!
//! Handles are not internally synchronized for mutation, but a deployed
//! network may be shared read-only across threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use imac_core::analysis::measure_snr;
use imac_core::pipeline::{deploy, forward_analog, forward_digital, DeployedNetwork};
use imac_core::tech::builtin_technology;
use imac_core::{BinarizedModel, BitcellType, Error, FabricConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed weight file; the message carries the byte offset.
    Format = 3,
    Io = 4,
    /// Solver divergence or another numerical failure.
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImacBitcell {
    ZeroT1R = 0,
    OneT1R = 1,
}

impl From<ImacBitcell> for BitcellType {
    fn from(b: ImacBitcell) -> Self {
        match b {
            ImacBitcell::ZeroT1R => BitcellType::ZeroT1R,
            ImacBitcell::OneT1R => BitcellType::OneT1R,
        }
    }
}

/// A binarized network.
pub struct ImacModel(BinarizedModel);

/// Subarray geometry and technology.
pub struct ImacFabric(FabricConfig);

/// A model mapped onto a fabric.
pub struct ImacNetwork(DeployedNetwork);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> ImacStatus {
    match e {
        Error::Format(_) => ImacStatus::Format,
        Error::Io { .. } => ImacStatus::Io,
        e if e.is_numerical() => ImacStatus::Numerical,
        _ => ImacStatus::InvalidArgument,
    }
}

struct Fail(ImacStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ImacStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ImacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ImacStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ImacStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(ImacStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or NULL after a
/// success. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn imac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imac_model_load(path: *const c_char, out: *mut *mut ImacModel) -> ImacStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let model = BinarizedModel::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(ImacModel(model)));
        Ok(())
    })
}

/// Parses an in-memory weight file.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imac_model_from_bytes(data: *const u8, len: usize, out: *mut *mut ImacModel) -> ImacStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let bytes = slice_arg(data, len, "data")?;
        let model = BinarizedModel::from_bytes(bytes).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(ImacModel(model)));
        Ok(())
    })
}

/// Input width of the first layer, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imac_model_input_len(model: *const ImacModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.input_len())
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imac_model_class_count(model: *const ImacModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.class_count())
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn imac_model_free(model: *mut ImacModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fabric of `rows x cols` subarrays using a builtin technology
/// (`"MRAM"`, `"CBRAM"` or `"PCM"`, case-insensitive).
///
/// # Safety
/// `technology` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imac_fabric_new(
    rows: usize,
    cols: usize,
    technology: *const c_char,
    bitcell: ImacBitcell,
    parasitics: bool,
    out: *mut *mut ImacFabric,
) -> ImacStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let name = str_arg(technology, "technology")?;
        let tech = builtin_technology(name)
            .ok_or_else(|| Fail(ImacStatus::InvalidArgument, format!("unknown technology `{name}`")))?;
        let fabric = FabricConfig::new(rows, cols, tech, bitcell.into(), parasitics)?;
        *out = Box::into_raw(Box::new(ImacFabric(fabric)));
        Ok(())
    })
}

/// Sets the neuron noise sigma in volts; 0 disables noise.
///
/// # Safety
/// `fabric` must be a live handle not shared with another thread.
#[no_mangle]
pub unsafe extern "C" fn imac_fabric_set_noise(fabric: *mut ImacFabric, sigma: f64) -> ImacStatus {
    guard(|| {
        let f = fabric.as_mut().ok_or_else(|| null("fabric"))?;
        let mut tech = f.0.technology.clone();
        tech.sigma_noise = sigma;
        tech.validate()?;
        f.0.technology = tech;
        Ok(())
    })
}

/// # Safety
/// `fabric` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn imac_fabric_free(fabric: *mut ImacFabric) {
    if !fabric.is_null() {
        drop(Box::from_raw(fabric));
    }
}

/// Mean differential signal (V) and SNR of one all-+1 subarray at full
/// input. A noiseless fabric reports an infinite SNR.
///
/// # Safety
/// `fabric` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn imac_measure_snr(fabric: *const ImacFabric, signal: *mut f64, snr: *mut f64) -> ImacStatus {
    guard(|| {
        let f = handle(fabric, "fabric")?;
        let signal = out_arg(signal, "signal")?;
        let snr = out_arg(snr, "snr")?;
        let r = measure_snr(&f.0)?;
        *signal = r.signal;
        *snr = r.snr;
        Ok(())
    })
}

/// Partitions and programs `model` onto `fabric`. Both may be freed after
/// the call.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imac_deploy(
    model: *const ImacModel,
    fabric: *const ImacFabric,
    out: *mut *mut ImacNetwork,
) -> ImacStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let net = deploy(&handle(model, "model")?.0, &handle(fabric, "fabric")?.0)?;
        *out = Box::into_raw(Box::new(ImacNetwork(net)));
        Ok(())
    })
}

/// Tiles in the deployed network, or 0 for a NULL handle.
///
/// # Safety
/// `net` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn imac_network_tile_count(net: *const ImacNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.inventory().tiles)
}

/// # Safety
/// `net` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn imac_network_free(net: *mut ImacNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Classifies one image of `len` pixels in [0, 1]. `out_power`, when not NULL,
/// receives the total modeled power in watts.
///
/// # Safety
/// `net` must be a live handle, `pixels` must point to `len` floats and
/// `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imac_forward(
    net: *const ImacNetwork,
    pixels: *const f32,
    len: usize,
    seed: u64,
    out_class: *mut usize,
    out_power: *mut f64,
) -> ImacStatus {
    guard(|| {
        let net = &handle(net, "network")?.0;
        let class = out_arg(out_class, "out_class")?;
        let pixels = slice_arg(pixels, len, "pixels")?;
        let inference = forward_analog(net, &net.encode(pixels)?, seed)?;
        *class = inference.class;
        if let Some(p) = out_power.as_mut() {
            *p = inference.power.total();
        }
        Ok(())
    })
}

/// Integer reference classifier on `len` input bits (0 or 1).
///
/// # Safety
/// `model` must be a live handle, `bits` must point to `len` bytes and
/// `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn imac_forward_digital(
    model: *const ImacModel,
    bits: *const u8,
    len: usize,
    out_class: *mut usize,
) -> ImacStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let class = out_arg(out_class, "out_class")?;
        *class = forward_digital(model, slice_arg(bits, len, "bits")?)?;
        Ok(())
    })
}
