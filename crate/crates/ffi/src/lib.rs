//! C ABI over the pattern and graph core.
//!
//! Every fallible call returns a [`PlStatus`]; on failure the message is
//! available from [`pl_last_error_message`] on the same thread. Objects are
//! opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use patternlab::experiments::max_clique;
use patternlab::graph::{gen_er, gen_geometric, gen_pa, Graph};
use patternlab::patterns::{pattern_histogram, pattern_tree_descriptor, refine_patterns, tv_distance, PatternHistogram};
use patternlab::rng::RngStream;
use patternlab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    SizeGuard = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

/// Opaque graph handle.
pub struct PlGraph {
    inner: Graph,
}

/// Opaque depth-d pattern histogram handle.
pub struct PlHistogram {
    inner: PatternHistogram,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::NodeOutOfRange { .. } | Error::FeatureOutOfRange { .. } => PlStatus::OutOfRange,
        Error::CliqueGuard(_) => PlStatus::SizeGuard,
        _ => PlStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (PlStatus, String)>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PlStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PlStatus::Internal
        }
    }
}

fn lift(e: Error) -> (PlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PlStatus, String) {
    (PlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn graph_ref<'a>(g: *const PlGraph) -> Result<&'a Graph, (PlStatus, String)> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("graph"))
}

fn emit_graph(out: *mut *mut PlGraph, g: Result<Graph, Error>) -> Result<(), (PlStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let g = g.map_err(lift)?;
    unsafe { *out = Box::into_raw(Box::new(PlGraph { inner: g })) };
    Ok(())
}

/// Copy of the calling thread's last error message, or null if the last call
/// succeeded. Release with [`pl_string_free`].
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn pl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a graph from `num_edges` `(u, v)` pairs laid out flat in `edges`.
/// `features` may be null (every node gets class 0); otherwise it holds `n`
/// classes below `num_classes`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_new(
    n: usize,
    edges: *const usize,
    num_edges: usize,
    features: *const usize,
    num_classes: usize,
    out: *mut *mut PlGraph,
) -> PlStatus {
    guard(|| {
        if edges.is_null() && num_edges > 0 {
            return Err(null("edges"));
        }
        let flat = if num_edges == 0 { &[][..] } else { std::slice::from_raw_parts(edges, 2 * num_edges) };
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        let (features, classes) = if features.is_null() {
            (vec![0; n], num_classes.max(1))
        } else {
            (std::slice::from_raw_parts(features, n).to_vec(), num_classes)
        };
        emit_graph(out, Graph::new(n, &pairs, features, classes))
    })
}

/// G(n, p) from the `(seed, stream)` random stream.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_gen_er(n: usize, p: f64, seed: u64, stream: u64, out: *mut *mut PlGraph) -> PlStatus {
    guard(|| emit_graph(out, gen_er(n, p, &mut RngStream::new(seed, stream))))
}

/// Preferential attachment with `m` edges per new node.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_gen_pa(n: usize, m: usize, seed: u64, stream: u64, out: *mut *mut PlGraph) -> PlStatus {
    guard(|| emit_graph(out, gen_pa(n, m, &mut RngStream::new(seed, stream))))
}

/// Random geometric graph in the unit square with radius `rho`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_gen_geometric(
    n: usize,
    rho: f64,
    seed: u64,
    stream: u64,
    out: *mut *mut PlGraph,
) -> PlStatus {
    guard(|| emit_graph(out, gen_geometric(n, rho, &mut RngStream::new(seed, stream))))
}

/// Node count; 0 for a null handle.
///
/// # Safety
/// `g` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_num_nodes(g: *const PlGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.num_nodes())
}

/// Undirected edge count; 0 for a null handle.
///
/// # Safety
/// `g` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_num_edges(g: *const PlGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.num_edges())
}

/// # Safety
/// `g` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_degree(g: *const PlGraph, v: usize, out: *mut usize) -> PlStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = g.degree(v).map_err(lift)?;
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pl_graph_free(g: *mut PlGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Writes each node's depth-`d` pattern digest as 128 bits split into `hi`
/// and `lo` words. Both buffers must hold `len >= num_nodes` entries.
///
/// # Safety
/// `g` must be a live handle; `hi` and `lo` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pl_refine_digests(g: *const PlGraph, d: usize, hi: *mut u64, lo: *mut u64, len: usize) -> PlStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if hi.is_null() || lo.is_null() {
            return Err(null("digest buffer"));
        }
        if len < g.num_nodes() {
            return Err((PlStatus::BufferTooSmall, format!("need {} entries, got {len}", g.num_nodes())));
        }
        let (r, _) = refine_patterns(g, d);
        let (hi, lo) = (std::slice::from_raw_parts_mut(hi, len), std::slice::from_raw_parts_mut(lo, len));
        for (v, id) in r.deepest().iter().enumerate() {
            let digest = id.digest();
            hi[v] = (digest >> 64) as u64;
            lo[v] = digest as u64;
        }
        Ok(())
    })
}

/// Number of entries [`pl_tree_descriptor`] writes: `(d + 1) * num_classes`.
///
/// # Safety
/// `g` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pl_tree_descriptor_len(g: *const PlGraph, d: usize) -> usize {
    g.as_ref().map_or(0, |g| (d + 1) * g.inner.num_classes())
}

/// Per-layer, per-class node counts of node `v`'s depth-`d` pattern tree,
/// layer-major.
///
/// # Safety
/// `g` must be a live handle; `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pl_tree_descriptor(g: *const PlGraph, v: usize, d: usize, out: *mut u64, len: usize) -> PlStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let desc = pattern_tree_descriptor(g, v, d).map_err(lift)?;
        let counts: Vec<u64> = desc.counts().iter().flatten().copied().collect();
        if len < counts.len() {
            return Err((PlStatus::BufferTooSmall, format!("need {} entries, got {len}", counts.len())));
        }
        std::slice::from_raw_parts_mut(out, counts.len()).copy_from_slice(&counts);
        Ok(())
    })
}

/// Exact maximum clique size; graphs above 60 nodes are refused.
///
/// # Safety
/// `g` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_max_clique(g: *const PlGraph, out: *mut usize) -> PlStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = max_clique(g).map_err(lift)?;
        Ok(())
    })
}

/// Depth-`d` pattern histogram over `count` graphs.
///
/// # Safety
/// `graphs` must hold `count` live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_histogram_new(
    graphs: *const *const PlGraph,
    count: usize,
    d: usize,
    out: *mut *mut PlHistogram,
) -> PlStatus {
    guard(|| {
        if graphs.is_null() || out.is_null() {
            return Err(null("graphs or out"));
        }
        let mut owned = Vec::with_capacity(count);
        for &g in std::slice::from_raw_parts(graphs, count) {
            owned.push(graph_ref(g)?.clone());
        }
        let h = pattern_histogram(&owned, d).map_err(lift)?;
        *out = Box::into_raw(Box::new(PlHistogram { inner: h }));
        Ok(())
    })
}

/// Number of distinct patterns; 0 for a null handle.
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pl_histogram_support_size(h: *const PlHistogram) -> usize {
    h.as_ref().map_or(0, |h| h.inner.len())
}

/// # Safety
/// `h` must come from this library and not be used afterwards; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pl_histogram_free(h: *mut PlHistogram) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Total variation distance between two histograms of equal depth.
///
/// # Safety
/// `a` and `b` must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_tv_distance(a: *const PlHistogram, b: *const PlHistogram, out: *mut f64) -> PlStatus {
    guard(|| {
        let (a, b) = match (a.as_ref(), b.as_ref()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(null("histogram")),
        };
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = tv_distance(&a.inner, &b.inner).map_err(lift)?;
        Ok(())
    })
}
