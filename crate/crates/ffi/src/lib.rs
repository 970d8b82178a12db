//! C interface to `dynmeans`.
//!
//! Every fallible call returns a [`DmStatus`]; on failure a description is
//! available from [`dm_last_error`] on the same thread. Clusterers are opaque
//! handles created by `dm_clusterer_new*` and released with
//! [`dm_clusterer_free`]. Points are passed row-major, `n * dim` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dynmeans::pipeline::{
    scan_order, DynamicMeans, ParamSpec, ReparamConfig, RunConfig, TimestepRecord,
};
use dynmeans::{dp_means, reparameterize, DynMeansParams};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    /// lambda, Q, tau, N_Q, k_tau, restarts or max_iters out of range
    InvalidParam = 2,
    /// wrong dimension or non-finite coordinate
    InvalidInput = 3,
    /// caller buffer shorter than required
    BufferTooSmall = 4,
    /// no timestep has been clustered yet
    NoResult = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: DmStatus, msg: impl Into<String>) -> DmStatus {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
    status
}

fn guard(f: impl FnOnce() -> DmStatus) -> DmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(DmStatus::Panic, "internal panic"))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Opaque clusterer state.
pub struct DmClusterer {
    inner: DynamicMeans,
    last: Option<TimestepRecord>,
}

/// Convert `(N_Q, k_tau)` into `(Q, tau)` for the given lambda.
///
/// # Safety
/// `q_out` and `tau_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_reparameterize(
    lambda: f64,
    n_q: f64,
    k_tau: f64,
    q_out: *mut f64,
    tau_out: *mut f64,
) -> DmStatus {
    guard(|| {
        if q_out.is_null() || tau_out.is_null() {
            return fail(DmStatus::NullPointer, "q_out and tau_out must not be NULL");
        }
        let params = match ReparamConfig::new(lambda, n_q, k_tau).and_then(|c| reparameterize(&c)) {
            Ok(p) => p,
            Err(e) => return fail(DmStatus::InvalidParam, e.to_string()),
        };
        *q_out = params.q_penalty();
        *tau_out = params.tau();
        DmStatus::Ok
    })
}

unsafe fn create(
    spec: Result<ParamSpec, dynmeans::ParamError>,
    restarts: usize,
    max_iters: usize,
    seed: u64,
    out: *mut *mut DmClusterer,
) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return fail(DmStatus::NullPointer, "out must not be NULL");
        }
        *out = ptr::null_mut();
        let cfg = match spec {
            Ok(spec) => RunConfig::new(spec)
                .with_restarts(restarts)
                .with_max_iters(max_iters)
                .with_seed(seed),
            Err(e) => return fail(DmStatus::InvalidParam, e.to_string()),
        };
        match DynamicMeans::new(&cfg) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DmClusterer { inner, last: None }));
                DmStatus::Ok
            }
            Err(e) => fail(DmStatus::InvalidParam, e.to_string()),
        }
    })
}

/// New clusterer from lambda, Q and tau.
///
/// # Safety
/// `out` must be valid for writes. On success `*out` owns a handle that must
/// be passed to [`dm_clusterer_free`].
#[no_mangle]
pub unsafe extern "C" fn dm_clusterer_new(
    lambda: f64,
    q: f64,
    tau: f64,
    restarts: usize,
    max_iters: usize,
    seed: u64,
    out: *mut *mut DmClusterer,
) -> DmStatus {
    let spec = DynMeansParams::new(lambda, q, tau).map(ParamSpec::from);
    create(spec, restarts, max_iters, seed, out)
}

/// New clusterer from lambda, N_Q and k_tau.
///
/// # Safety
/// Same as [`dm_clusterer_new`].
#[no_mangle]
pub unsafe extern "C" fn dm_clusterer_new_reparam(
    lambda: f64,
    n_q: f64,
    k_tau: f64,
    restarts: usize,
    max_iters: usize,
    seed: u64,
    out: *mut *mut DmClusterer,
) -> DmStatus {
    let spec = ReparamConfig::new(lambda, n_q, k_tau).map(ParamSpec::from);
    create(spec, restarts, max_iters, seed, out)
}

/// Release a clusterer. NULL is ignored.
///
/// # Safety
/// `handle` must come from `dm_clusterer_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dm_clusterer_free(handle: *mut DmClusterer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn rows(points: *const f64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    if n == 0 {
        return Vec::new();
    }
    let flat = slice::from_raw_parts(points, n * dim);
    if dim == 0 {
        return vec![Vec::new(); n];
    }
    flat.chunks_exact(dim).map(<[f64]>::to_vec).collect()
}

/// Cluster the next batch. `labels_out` receives one persistent cluster id
/// per point and may be NULL when `n` is 0.
///
/// # Safety
/// `points` must hold `n * dim` doubles and `labels_out` room for `n` ids.
#[no_mangle]
pub unsafe extern "C" fn dm_clusterer_step(
    handle: *mut DmClusterer,
    points: *const f64,
    n: usize,
    dim: usize,
    labels_out: *mut u64,
) -> DmStatus {
    guard(|| {
        let Some(h) = handle.as_mut() else {
            return fail(DmStatus::NullPointer, "handle must not be NULL");
        };
        if n > 0 && (points.is_null() || labels_out.is_null()) {
            return fail(
                DmStatus::NullPointer,
                "points and labels_out must not be NULL",
            );
        }
        if n.checked_mul(dim).is_none() {
            return fail(DmStatus::InvalidInput, "n * dim overflows");
        }
        let batch = rows(points, n, dim);
        let record = match h.inner.step(&batch) {
            Ok(r) => r,
            Err(e) => return fail(DmStatus::InvalidInput, e.to_string()),
        };
        if n > 0 {
            let out = slice::from_raw_parts_mut(labels_out, n);
            for (o, id) in out.iter_mut().zip(&record.labels.labels) {
                *o = id.0;
            }
        }
        h.last = Some(record);
        DmStatus::Ok
    })
}

/// Number of batches clustered so far.
///
/// # Safety
/// `handle` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn dm_clusterer_timestep(handle: *const DmClusterer) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.timestep())
}

/// Cost, iteration count and convergence flag of the last step.
///
/// # Safety
/// Output pointers must be valid for writes; any of them may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dm_clusterer_last_cost(
    handle: *const DmClusterer,
    cost: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
) -> DmStatus {
    guard(|| {
        let Some(h) = handle.as_ref() else {
            return fail(DmStatus::NullPointer, "handle must not be NULL");
        };
        let Some(last) = &h.last else {
            return fail(DmStatus::NoResult, "no batch has been clustered");
        };
        if !cost.is_null() {
            *cost = last.cost;
        }
        if !iterations.is_null() {
            *iterations = last.iterations;
        }
        if !converged.is_null() {
            *converged = last.converged;
        }
        DmStatus::Ok
    })
}

/// Active clusters of the last step. Writes the count to `count`; when
/// `capacity` is at least that count also fills `ids` (count entries),
/// `centers` (count * dim, row-major) and `weights` (count). Array
/// pointers may be NULL to skip them. Call with capacity 0 to query the size.
///
/// # Safety
/// Non-NULL arrays must have room for `capacity` clusters.
#[no_mangle]
pub unsafe extern "C" fn dm_clusterer_clusters(
    handle: *const DmClusterer,
    ids: *mut u64,
    centers: *mut f64,
    weights: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> DmStatus {
    guard(|| {
        let Some(h) = handle.as_ref() else {
            return fail(DmStatus::NullPointer, "handle must not be NULL");
        };
        if count.is_null() {
            return fail(DmStatus::NullPointer, "count must not be NULL");
        }
        let Some(last) = &h.last else {
            return fail(DmStatus::NoResult, "no batch has been clustered");
        };
        let clusters = &last.clusters;
        *count = clusters.len();
        if capacity < clusters.len() {
            if capacity == 0 {
                return DmStatus::Ok;
            }
            return fail(
                DmStatus::BufferTooSmall,
                format!("{} clusters, capacity {capacity}", clusters.len()),
            );
        }
        let dim = h.inner.dimension().unwrap_or(0);
        for (i, c) in clusters.iter().enumerate() {
            if !ids.is_null() {
                *ids.add(i) = c.id.0;
            }
            if !weights.is_null() {
                *weights.add(i) = c.weight;
            }
            if !centers.is_null() {
                slice::from_raw_parts_mut(centers.add(i * dim), dim).copy_from_slice(&c.center);
            }
        }
        DmStatus::Ok
    })
}

/// One-shot DP-Means. `labels_out` gets a cluster index per point,
/// `n_clusters` the number of clusters and `cost` the final objective.
/// The scan order is shuffled from `seed`.
///
/// # Safety
/// `points` must hold `n * dim` doubles and `labels_out` room for `n`
/// entries. Scalar outputs may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dm_dp_means(
    points: *const f64,
    n: usize,
    dim: usize,
    lambda: f64,
    max_iters: usize,
    seed: u64,
    labels_out: *mut usize,
    n_clusters: *mut usize,
    cost: *mut f64,
) -> DmStatus {
    guard(|| {
        if n > 0 && (points.is_null() || labels_out.is_null()) {
            return fail(
                DmStatus::NullPointer,
                "points and labels_out must not be NULL",
            );
        }
        if n.checked_mul(dim).is_none() {
            return fail(DmStatus::InvalidInput, "n * dim overflows");
        }
        let batch = rows(points, n, dim);
        let order = scan_order(seed, 0, 0, n);
        let result = match dp_means(&batch, lambda, &order, max_iters) {
            Ok(r) => r,
            Err(e @ dynmeans::ClusterError::Param(_)) => {
                return fail(DmStatus::InvalidParam, e.to_string())
            }
            Err(e) => return fail(DmStatus::InvalidInput, e.to_string()),
        };
        if n > 0 {
            slice::from_raw_parts_mut(labels_out, n).copy_from_slice(&result.labels);
        }
        if !n_clusters.is_null() {
            *n_clusters = result.centers.len();
        }
        if !cost.is_null() {
            *cost = result.cost;
        }
        DmStatus::Ok
    })
}
