//! C ABI for the travel-time laboratory.
//!
//! Metrics and datasets cross the boundary as opaque handles created by a
//! `ttl_*` constructor and released by the matching `ttl_*_free`. Every
//! fallible call returns a [`TtlStatus`]; on failure the message of the
//! last error on the calling thread is available from
//! [`ttl_last_error`]. Panics never unwind into C: they are caught and
//! reported as [`TtlStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ttlab::config::preset;
use ttlab::geodesic::{
    distance, lift_inward, trace, BoundaryVector, ConnectOptions, TraceOptions, TraceStart,
};
use ttlab::inversion::{hausdorff_distance, DataCloud};
use ttlab::metric::MetricModel;
use ttlab::survey::{
    load_dataset, make_travel_time_data, save_dataset, BoundaryGrid, Dataset, Encoding,
    SurveyOptions, TravelTimeDifferenceData,
};
use ttlab::Error;

/// Outcome of a call. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TtlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    Config = 10,
    Parse = 11,
    Shape = 12,
    Domain = 13,
    Io = 14,
    Json = 15,
    InvalidDiffeo = 16,
    Numeric = 20,
    TrappedGeodesic = 21,
    ShootingFailure = 22,
    IncompleteTable = 23,
    AmbiguousScattering = 24,
    Panic = 99,
}

impl From<&Error> for TtlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => TtlStatus::Config,
            Error::Parse { .. } => TtlStatus::Parse,
            Error::Shape(_) => TtlStatus::Shape,
            Error::Domain(_) => TtlStatus::Domain,
            Error::Io(_) => TtlStatus::Io,
            Error::Json(_) => TtlStatus::Json,
            Error::InvalidDiffeo(_) => TtlStatus::InvalidDiffeo,
            Error::Numeric(_) => TtlStatus::Numeric,
            Error::TrappedGeodesic { .. } => TtlStatus::TrappedGeodesic,
            Error::ShootingFailure { .. } => TtlStatus::ShootingFailure,
            Error::IncompleteTable(..) => TtlStatus::IncompleteTable,
            Error::AmbiguousScattering { .. } => TtlStatus::AmbiguousScattering,
        }
    }
}

/// A metric model on the closed unit disc.
pub struct TtlMetric(MetricModel);

/// A loaded or generated dataset.
pub struct TtlData(Dataset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// A failed call: the status and the message stored for `ttl_last_error`.
struct Failure(TtlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(TtlStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(
        TtlStatus::NullPointer,
        format!("`{what}` is a null pointer"),
    )
}

/// Runs `f`, converting its errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TtlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TtlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TtlStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            TtlStatus::InvalidUtf8,
            format!("`{what}` is not valid UTF-8"),
        )
    })
}

/// # Safety
/// `p` is null or points to a live `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for one write.
unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ttl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated when `len > 0`). Returns the length the full message
/// needs including its NUL, or 0 when no error was recorded.
///
/// # Safety
/// `buf` is null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ttl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// A zoo metric by name: `euclidean`, `curvature+0.5`, `curvature-0.5`,
/// `bump` or `radial-bump`.
///
/// # Safety
/// `name` is a NUL-terminated string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_metric_preset(
    name: *const c_char,
    out: *mut *mut TtlMetric,
) -> TtlStatus {
    guard(|| {
        let m = preset(string(name, "name")?)?;
        write_out(out, boxed(TtlMetric(m)), "out")
    })
}

/// A metric from its JSON descriptor.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_metric_from_json(
    json: *const c_char,
    out: *mut *mut TtlMetric,
) -> TtlStatus {
    guard(|| {
        let m: MetricModel = serde_json::from_str(string(json, "json")?).map_err(Error::from)?;
        m.validate()?;
        write_out(out, boxed(TtlMetric(m)), "out")
    })
}

/// # Safety
/// `metric` is null or a handle from a `ttl_metric_*` constructor that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn ttl_metric_free(metric: *mut TtlMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Riemannian distance between the points `x` and `y` (two doubles each).
///
/// # Safety
/// `metric` is a live handle; `x` and `y` point to two doubles; `out` is
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_distance(
    metric: *const TtlMetric,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> TtlStatus {
    guard(|| {
        let m = &handle(metric, "metric")?.0;
        let (x, y) = (point(x, "x")?, point(y, "y")?);
        let d = distance(m, x, y, &ConnectOptions::default())?;
        write_out(out, d, "out")
    })
}

unsafe fn point(p: *const f64, what: &str) -> Result<[f64; 2], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok([*p, *p.add(1)])
}

/// Exit time of the geodesic entering at boundary angle `theta` with
/// tangential component `mu`.
///
/// # Safety
/// `metric` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_exit_time(
    metric: *const TtlMetric,
    theta: f64,
    mu: f64,
    out: *mut f64,
) -> TtlStatus {
    guard(|| {
        let m = &handle(metric, "metric")?.0;
        let bv = BoundaryVector::new(theta, mu)?;
        let opts = TraceOptions {
            record_every: usize::MAX,
            ..TraceOptions::default()
        };
        let tr = trace(m, lift_inward(m, bv)?, TraceStart::Boundary(bv), &opts)?;
        write_out(out, tr.length, "out")
    })
}

/// Travel time data of `n_sources` points (`2 n_sources` doubles,
/// interleaved `x₁, x₂`) on `m` boundary angles, shuffled by `seed`.
///
/// # Safety
/// `metric` is a live handle; `sources` holds `2 n_sources` doubles; `out`
/// is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_travel_time_data(
    metric: *const TtlMetric,
    sources: *const f64,
    n_sources: usize,
    m: usize,
    seed: u64,
    out: *mut *mut TtlData,
) -> TtlStatus {
    guard(|| {
        let model = &handle(metric, "metric")?.0;
        if sources.is_null() && n_sources > 0 {
            return Err(null("sources"));
        }
        let flat = if n_sources == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(sources, 2 * n_sources)
        };
        let pts: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let opts = SurveyOptions {
            seed,
            ..SurveyOptions::default()
        };
        let g = make_travel_time_data(model, &pts, &BoundaryGrid::new(m)?, &opts)?;
        write_out(out, boxed(TtlData(Dataset::TravelTime(g.data))), "out")
    })
}

/// Travel time difference data derived from travel time data.
///
/// # Safety
/// `data` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_difference_data(
    data: *const TtlData,
    out: *mut *mut TtlData,
) -> TtlStatus {
    guard(|| match &handle(data, "data")?.0 {
        Dataset::TravelTime(t) => {
            let d = TravelTimeDifferenceData::from_travel_time_data(t);
            write_out(out, boxed(TtlData(Dataset::TravelTimeDifference(d))), "out")
        }
        _ => Err(Failure(
            TtlStatus::Config,
            "difference data needs travel time data".into(),
        )),
    })
}

/// Reads a dataset file of any kind.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_data_load(path: *const c_char, out: *mut *mut TtlData) -> TtlStatus {
    guard(|| {
        let d = load_dataset(PathBuf::from(string(path, "path")?))?;
        write_out(out, boxed(TtlData(d)), "out")
    })
}

/// Writes a dataset file, in binary when `binary` is nonzero and as text
/// otherwise.
///
/// # Safety
/// `data` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ttl_data_save(
    data: *const TtlData,
    path: *const c_char,
    binary: i32,
) -> TtlStatus {
    guard(|| {
        let d = &handle(data, "data")?.0;
        let enc = if binary != 0 {
            Encoding::Binary
        } else {
            Encoding::Text
        };
        save_dataset(d, PathBuf::from(string(path, "path")?), enc)?;
        Ok(())
    })
}

fn cloud(d: &TtlData) -> Result<DataCloud, Failure> {
    Ok(DataCloud::from_dataset(&d.0)?)
}

/// Number of functions and of boundary angles of a travel time or
/// difference dataset.
///
/// # Safety
/// `data` is a live handle; `functions` and `angles` are valid for one
/// write each.
#[no_mangle]
pub unsafe extern "C" fn ttl_data_shape(
    data: *const TtlData,
    functions: *mut usize,
    angles: *mut usize,
) -> TtlStatus {
    guard(|| {
        let c = cloud(handle(data, "data")?)?;
        write_out(functions, c.len(), "functions")?;
        write_out(angles, c.grid.m, "angles")
    })
}

/// Copies function `index` into `buf`, which must hold one double per
/// boundary angle.
///
/// # Safety
/// `data` is a live handle; `buf` is valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ttl_data_row(
    data: *const TtlData,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> TtlStatus {
    guard(|| {
        let c = cloud(handle(data, "data")?)?;
        let row = c.rows.get(index).ok_or_else(|| {
            Failure(
                TtlStatus::Shape,
                format!("function {index} of {}", c.rows.len()),
            )
        })?;
        if len < row.len() {
            return Err(Failure(
                TtlStatus::BufferTooSmall,
                format!("buffer of {len} doubles for {} values", row.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len());
        Ok(())
    })
}

/// Hausdorff distance between two datasets of the same kind and grid.
///
/// # Safety
/// `a` and `b` are live handles; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ttl_hausdorff(
    a: *const TtlData,
    b: *const TtlData,
    out: *mut f64,
) -> TtlStatus {
    guard(|| {
        let (ca, cb) = (cloud(handle(a, "a")?)?, cloud(handle(b, "b")?)?);
        write_out(out, hausdorff_distance(&ca, &cb)?, "out")
    })
}

/// # Safety
/// `data` is null or a live handle that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ttl_data_free(data: *mut TtlData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}
