//! C ABI for the fracture-energy library.
//!
//! Conventions:
//! * Objects are opaque handles created by `vf_*_load` / freed by the
//!   matching `vf_*_free`; every handle-returning call yields null on
//!   failure.
//! * Status-returning calls use [`VfStatus`]; anything but `Ok` leaves
//!   a message retrievable with [`vf_last_error_message`] (thread
//!   local, valid until the next failing call on the same thread).
//! * Strings returned through out-parameters are owned by the caller
//!   and must be released with [`vf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;
use varifrac::config::RunConfig;
use varifrac::error::Error;
use varifrac::minimizer::minimize_total;
use varifrac::report::RunReport;
use varifrac::{io, BodyMesh, DiscreteVarifold, EnergyParams};

/// Result codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfStatus {
    Ok = 0,
    IoError = 1,
    ValidationError = 2,
    DensityCheckFailed = 3,
    NoFeasibleCandidate = 4,
    NullArgument = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &Error) -> VfStatus {
    match err {
        Error::Io(_) | Error::Parse { .. } => VfStatus::IoError,
        Error::NoFeasibleCandidate(_) => VfStatus::NoFeasibleCandidate,
        _ => VfStatus::ValidationError,
    }
}

/// Message of the most recent failure on this thread. Never null;
/// empty before any failure. Do not free.
#[no_mangle]
pub extern "C" fn vf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a pointer previously returned by this library
/// through a string out-parameter.
#[no_mangle]
pub unsafe extern "C" fn vf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Option<&'a Path> {
    if path.is_null() {
        set_error("null path argument");
        return None;
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Some(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            None
        }
    }
}

/// Opaque tetrahedral body mesh.
pub struct VfMesh(BodyMesh);

/// Opaque crack surface with multiplicities.
pub struct VfSurface(DiscreteVarifold);

/// Loads a `tetmesh 1` file. Returns null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vf_mesh_load(path: *const c_char) -> *mut VfMesh {
    let Some(path) = path_arg(path) else {
        return ptr::null_mut();
    };
    match io::read_mesh(path) {
        Ok(mesh) => Box::into_raw(Box::new(VfMesh(mesh))),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `mesh` must be null or a pointer from `vf_mesh_load`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vf_mesh_free(mesh: *mut VfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live pointer from `vf_mesh_load`.
#[no_mangle]
pub unsafe extern "C" fn vf_mesh_num_nodes(mesh: *const VfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.nodes.len())
}

/// # Safety
/// `mesh` must be a live pointer from `vf_mesh_load`.
#[no_mangle]
pub unsafe extern "C" fn vf_mesh_num_tets(mesh: *const VfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.tets.len())
}

/// Loads a `trisurf 1` file. Returns null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vf_surface_load(path: *const c_char) -> *mut VfSurface {
    let Some(path) = path_arg(path) else {
        return ptr::null_mut();
    };
    match io::read_surface(path) {
        Ok(v) => Box::into_raw(Box::new(VfSurface(v))),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `surface` must be null or a pointer from `vf_surface_load`.
#[no_mangle]
pub unsafe extern "C" fn vf_surface_free(surface: *mut VfSurface) {
    if !surface.is_null() {
        drop(Box::from_raw(surface));
    }
}

/// Total weight measure (multiplicity-weighted area).
///
/// # Safety
/// `surface` must be a live pointer from `vf_surface_load`.
#[no_mangle]
pub unsafe extern "C" fn vf_surface_mass(surface: *const VfSurface) -> f64 {
    surface.as_ref().map_or(f64::NAN, |s| s.0.mass())
}

/// Total boundary measure.
///
/// # Safety
/// `surface` must be a live pointer from `vf_surface_load`.
#[no_mangle]
pub unsafe extern "C" fn vf_surface_boundary_mass(surface: *const VfSurface) -> f64 {
    surface.as_ref().map_or(f64::NAN, |s| s.0.boundary_mass())
}

/// Crack energy with default parameters, written to `out_total`.
///
/// # Safety
/// `surface` must be a live pointer; `out_total` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vf_surface_crack_energy(
    surface: *const VfSurface,
    out_total: *mut f64,
) -> VfStatus {
    let (Some(s), false) = (surface.as_ref(), out_total.is_null()) else {
        set_error("null argument");
        return VfStatus::NullArgument;
    };
    match s.0.crack_energy(&EnergyParams::default()) {
        Ok(breakdown) => {
            *out_total = breakdown.total;
            VfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Runs the full minimization pipeline from a TOML config file and
/// returns the run report as a JSON string through `out_json`.
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string; `out_json`
/// must be writable. The returned string is freed with
/// `vf_string_free`.
#[no_mangle]
pub unsafe extern "C" fn vf_minimize(
    config_path: *const c_char,
    out_json: *mut *mut c_char,
) -> VfStatus {
    if out_json.is_null() {
        set_error("null out_json argument");
        return VfStatus::NullArgument;
    }
    *out_json = ptr::null_mut();
    let Some(path) = path_arg(config_path) else {
        return VfStatus::NullArgument;
    };
    let run = || -> Result<String, Error> {
        let config = RunConfig::load(path)?;
        let mesh = io::read_mesh(&config.mesh)?;
        let report = minimize_total(
            &mesh,
            &config.density_spec(),
            &config.energy,
            &config.minimizer,
        )?;
        Ok(RunReport::new(&config, &report).to_json())
    };
    match run() {
        Ok(json) => {
            let json: String = json.chars().filter(|c| *c != '\0').collect();
            *out_json = CString::new(json).unwrap().into_raw();
            VfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}
