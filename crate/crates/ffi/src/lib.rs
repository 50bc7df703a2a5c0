//! C ABI over the `voxellate` library.
//!
//! Objects are opaque handles created by `vx_*_new` / `vx_*_generate` /
//! `vx_tessellate` and released with the matching `vx_*_free`. Every call
//! returns a [`VxStatus`]; on failure `vx_last_error_message` describes the
//! problem for the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use voxellate::io::{write_distance_image, write_label_image, ImageMeta};
use voxellate::{Boundary, Domain, Engine, Error, FastOptions, Kind, SiteSet, Tessellation, VoxelGrid};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Format = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VxKind {
    Voronoi = 0,
    JohnsonMehl = 1,
    Laguerre = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VxEngine {
    Brute = 0,
    Fast = 1,
}

// enums travel as integers: an out-of-range value must be an error, not UB
fn kind_of(k: u32) -> Result<Kind, Fail> {
    match k {
        k if k == VxKind::Voronoi as u32 => Ok(Kind::Voronoi),
        k if k == VxKind::JohnsonMehl as u32 => Ok(Kind::JohnsonMehl),
        k if k == VxKind::Laguerre as u32 => Ok(Kind::Laguerre),
        other => Err(Fail(VxStatus::InvalidArgument, format!("unknown kind {other}"))),
    }
}

fn engine_of(e: u32) -> Result<Engine, Fail> {
    match e {
        e if e == VxEngine::Brute as u32 => Ok(Engine::Brute),
        e if e == VxEngine::Fast as u32 => Ok(Engine::Fast),
        other => Err(Fail(VxStatus::InvalidArgument, format!("unknown engine {other}"))),
    }
}

/// Voxel grid over a box domain.
pub struct VxGrid(VoxelGrid);

/// Generating sites of a tessellation.
pub struct VxSites(SiteSet);

/// Completed label and distance images with their counters.
pub struct VxTessellation {
    inner: Tessellation,
    kind: Kind,
    n_sites: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> VxStatus {
    match e {
        Error::InvalidInput(_) => VxStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => VxStatus::DimensionMismatch,
        Error::Format(_) => VxStatus::Format,
        Error::Io(_) => VxStatus::Io,
    }
}

struct Fail(VxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(VxStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VxStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            VxStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn array<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail(VxStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length plus
/// one, so a too-short buffer can be resized and the call repeated.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn vx_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a grid of `counts[0] x ... x counts[d-1]` voxels. `lengths` may
/// be null for the unit box. `periodic` is a boolean.
///
/// # Safety
/// `counts` (and `lengths` when non-null) must hold `d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_new(
    d: usize,
    counts: *const usize,
    lengths: *const f64,
    periodic: c_int,
    out: *mut *mut VxGrid,
) -> VxStatus {
    guard(|| {
        let counts = array(counts, d, "counts")?.to_vec();
        let lengths = if lengths.is_null() { vec![1.0; d] } else { array(lengths, d, "lengths")?.to_vec() };
        let boundary = if periodic != 0 { Boundary::Periodic } else { Boundary::NonPeriodic };
        let grid = VoxelGrid::new(counts, Domain::new(lengths, boundary)?)?;
        put(out, VxGrid(grid))
    })
}

/// # Safety
/// `grid` must come from [`vx_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_free(grid: *mut VxGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of voxels, 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_voxel_count(grid: *const VxGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.n_voxels())
}

/// Draws `n` uniform sites in the grid's domain. `kind` is a [`VxKind`];
/// `growth` and `horizon` are ignored for Voronoi.
///
/// # Safety
/// `grid` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_sites_generate(
    grid: *const VxGrid,
    kind: u32,
    n: usize,
    growth: f64,
    horizon: f64,
    seed: u64,
    out: *mut *mut VxSites,
) -> VxStatus {
    guard(|| {
        let grid = get(grid, "grid")?;
        let kind = kind_of(kind)?;
        let g = kind.is_timed().then_some(growth);
        let sites = voxellate::generate_uniform_sites(grid.0.domain(), n, kind, g, horizon, seed)?;
        put(out, VxSites(sites))
    })
}

/// Sites from caller arrays. `kind` is a [`VxKind`]; `positions` holds
/// `n * d` coordinates, site by site. `births` (n values) and `growth` are
/// required for the timed kinds; `births` may be null for Voronoi.
///
/// # Safety
/// Arrays must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_sites_from_arrays(
    grid: *const VxGrid,
    kind: u32,
    n: usize,
    positions: *const f64,
    births: *const f64,
    growth: f64,
    out: *mut *mut VxSites,
) -> VxStatus {
    guard(|| {
        let grid = get(grid, "grid")?;
        let kind = kind_of(kind)?;
        let d = grid.0.dim();
        let pos = array(positions, n * d, "positions")?.to_vec();
        let births = if kind.is_timed() { Some(array(births, n, "births")?.to_vec()) } else { None };
        let sites = SiteSet::new(kind, grid.0.domain(), pos, births, kind.is_timed().then_some(growth))?;
        put(out, VxSites(sites))
    })
}

/// Number of sites, 0 for a null handle.
///
/// # Safety
/// `sites` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vx_sites_len(sites: *const VxSites) -> usize {
    sites.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `sites` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vx_sites_free(sites: *mut VxSites) {
    if !sites.is_null() {
        drop(Box::from_raw(sites));
    }
}

/// Rasterises `sites` on `grid` with a [`VxEngine`]. `param` may be null (model optimum) or
/// point at a fixed `r0` / `t0` for the fast engine. `prune` enables
/// removal of ineffective timed sites.
///
/// # Safety
/// Handles must be live; `param` null or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vx_tessellate(
    sites: *const VxSites,
    grid: *const VxGrid,
    engine: u32,
    param: *const f64,
    prune: c_int,
    out: *mut *mut VxTessellation,
) -> VxStatus {
    guard(|| {
        let sites = get(sites, "sites")?;
        let grid = get(grid, "grid")?;
        let engine = engine_of(engine)?;
        let opts = FastOptions { override_param: param.as_ref().copied(), prune: prune != 0 };
        let inner = voxellate::tessellate(&sites.0, &grid.0, engine, &opts)?;
        put(out, VxTessellation { inner, kind: sites.0.kind(), n_sites: sites.0.len() })
    })
}

/// # Safety
/// `t` must come from [`vx_tessellate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vx_tessellation_free(t: *mut VxTessellation) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Copies the `N_v` labels (axis 0 fastest) into `out`, which holds `len`
/// values.
///
/// # Safety
/// `t` must be live; `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn vx_tessellation_copy_labels(t: *const VxTessellation, out: *mut u32, len: usize) -> VxStatus {
    guard(|| copy_into(get(t, "tessellation")?.inner.labels.labels(), out, len))
}

/// Copies the `N_v` distances (Euclidean for Voronoi, arrival time otherwise).
///
/// # Safety
/// `t` must be live; `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn vx_tessellation_copy_distances(t: *const VxTessellation, out: *mut f64, len: usize) -> VxStatus {
    guard(|| copy_into(get(t, "tessellation")?.inner.distances.values(), out, len))
}

unsafe fn copy_into<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(VxStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Evaluation counts of step 1 and step 2. Either pointer may be null.
///
/// # Safety
/// `t` must be live; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_tessellation_counters(t: *const VxTessellation, step1: *mut u64, step2: *mut u64) -> VxStatus {
    guard(|| {
        let c = get(t, "tessellation")?.inner.counters;
        if !step1.is_null() {
            *step1 = c.step1_evals;
        }
        if !step2.is_null() {
            *step2 = c.step2_evals;
        }
        Ok(())
    })
}

/// `r0` / `t0` used by the fast engine; NaN for the brute-force engine.
///
/// # Safety
/// `t` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vx_tessellation_param(t: *const VxTessellation, out: *mut f64) -> VxStatus {
    guard(|| {
        let t = get(t, "tessellation")?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = t.inner.param.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Writes the label image (and the distance image when `distances_path`
/// is non-null) with their JSON headers. `seed` is recorded when
/// `has_seed` is non-zero.
///
/// # Safety
/// `t` must be live; paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn vx_tessellation_write(
    t: *const VxTessellation,
    labels_path: *const c_char,
    distances_path: *const c_char,
    has_seed: c_int,
    seed: u64,
) -> VxStatus {
    guard(|| {
        let t = get(t, "tessellation")?;
        let meta = ImageMeta { kind: t.kind, n_sites: t.n_sites, seed: (has_seed != 0).then_some(seed) };
        write_label_image(path(labels_path, "labels path")?, &t.inner.labels, &meta)?;
        if !distances_path.is_null() {
            write_distance_image(path(distances_path, "distances path")?, &t.inner.distances, &meta)?;
        }
        Ok(())
    })
}

/// Cost-optimal investigation-ball volume for `n` sites in a domain of
/// volume `volume`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_optimal_v0(n: usize, volume: f64, out: *mut f64) -> VxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output"));
        }
        *out = voxellate::optimal_v0(n, volume)?;
        Ok(())
    })
}
