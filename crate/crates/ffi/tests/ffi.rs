use std::ffi::CStr;
use std::ptr;

use patternlab_ffi::*;

fn last_error() -> Option<String> {
    let p = pl_last_error_message();
    if p.is_null() {
        return None;
    }
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { pl_string_free(p) };
    Some(s)
}

fn path4() -> *mut PlGraph {
    let edges = [0usize, 1, 1, 2, 2, 3];
    let mut g = ptr::null_mut();
    let s = unsafe { pl_graph_new(4, edges.as_ptr(), 3, ptr::null(), 1, &mut g) };
    assert_eq!(s, PlStatus::Ok);
    g
}

#[test]
fn graph_round_trip() {
    let g = path4();
    unsafe {
        assert_eq!(pl_graph_num_nodes(g), 4);
        assert_eq!(pl_graph_num_edges(g), 3);
        let mut deg = 0;
        assert_eq!(pl_graph_degree(g, 1, &mut deg), PlStatus::Ok);
        assert_eq!(deg, 2);
        assert_eq!(pl_graph_degree(g, 9, &mut deg), PlStatus::OutOfRange);
        assert!(last_error().unwrap().contains("out of range"));
        assert_eq!(pl_graph_degree(g, 0, &mut deg), PlStatus::Ok);
        assert!(last_error().is_none());
        pl_graph_free(g);
    }
}

#[test]
fn path_digests_pair_up() {
    let g = path4();
    let (mut hi, mut lo) = ([0u64; 4], [0u64; 4]);
    unsafe {
        assert_eq!(pl_refine_digests(g, 2, hi.as_mut_ptr(), lo.as_mut_ptr(), 4), PlStatus::Ok);
        assert_eq!(pl_refine_digests(g, 2, hi.as_mut_ptr(), lo.as_mut_ptr(), 3), PlStatus::BufferTooSmall);
        pl_graph_free(g);
    }
    let ids: Vec<(u64, u64)> = hi.into_iter().zip(lo).collect();
    assert_eq!(ids[0], ids[3]);
    assert_eq!(ids[1], ids[2]);
    assert_ne!(ids[0], ids[1]);
}

#[test]
fn descriptor_and_clique() {
    let g = path4();
    unsafe {
        let len = pl_tree_descriptor_len(g, 2);
        assert_eq!(len, 3);
        let mut buf = vec![0u64; len];
        assert_eq!(pl_tree_descriptor(g, 0, 2, buf.as_mut_ptr(), len), PlStatus::Ok);
        // Walks from an endpoint: 1, then 1, then back and onwards.
        assert_eq!(buf, vec![1, 1, 2]);
        let mut k = 0;
        assert_eq!(pl_max_clique(g, &mut k), PlStatus::Ok);
        assert_eq!(k, 2);
        pl_graph_free(g);

        let mut big = ptr::null_mut();
        assert_eq!(pl_graph_gen_er(70, 0.1, 1, 0, &mut big), PlStatus::Ok);
        assert_eq!(pl_max_clique(big, &mut k), PlStatus::SizeGuard);
        pl_graph_free(big);
    }
}

#[test]
fn generators_are_seeded() {
    unsafe {
        let (mut a, mut b, mut c) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(pl_graph_gen_pa(30, 2, 5, 1, &mut a), PlStatus::Ok);
        assert_eq!(pl_graph_gen_pa(30, 2, 5, 1, &mut b), PlStatus::Ok);
        assert_eq!(pl_graph_num_edges(a), pl_graph_num_edges(b));
        assert_eq!(pl_graph_gen_geometric(30, 0.3, 5, 1, &mut c), PlStatus::Ok);
        assert_eq!(pl_graph_num_nodes(c), 30);
        let mut bad = ptr::null_mut();
        assert_eq!(pl_graph_gen_er(10, 1.5, 0, 0, &mut bad), PlStatus::InvalidArgument);
        assert!(bad.is_null());
        for g in [a, b, c] {
            pl_graph_free(g);
        }
    }
}

#[test]
fn histograms_and_tv() {
    unsafe {
        let path = path4();
        let mut k4 = ptr::null_mut();
        let edges = [0usize, 1, 0, 2, 0, 3, 1, 2, 1, 3, 2, 3];
        assert_eq!(pl_graph_new(4, edges.as_ptr(), 6, ptr::null(), 1, &mut k4), PlStatus::Ok);
        let (mut ha, mut hb) = (ptr::null_mut(), ptr::null_mut());
        let a = [path as *const PlGraph];
        let b = [k4 as *const PlGraph];
        assert_eq!(pl_histogram_new(a.as_ptr(), 1, 2, &mut ha), PlStatus::Ok);
        assert_eq!(pl_histogram_new(b.as_ptr(), 1, 2, &mut hb), PlStatus::Ok);
        assert_eq!(pl_histogram_support_size(ha), 2);
        let mut tv = -1.0;
        assert_eq!(pl_tv_distance(ha, hb, &mut tv), PlStatus::Ok);
        assert_eq!(tv, 1.0);
        assert_eq!(pl_tv_distance(ha, ha, &mut tv), PlStatus::Ok);
        assert_eq!(tv, 0.0);
        assert_eq!(pl_tv_distance(ha, ptr::null(), &mut tv), PlStatus::NullPointer);
        pl_histogram_free(ha);
        pl_histogram_free(hb);
        pl_graph_free(path);
        pl_graph_free(k4);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        assert_eq!(pl_graph_num_nodes(ptr::null()), 0);
        pl_graph_free(ptr::null_mut());
        pl_histogram_free(ptr::null_mut());
        pl_string_free(ptr::null_mut());
        let mut k = 0;
        assert_eq!(pl_max_clique(ptr::null(), &mut k), PlStatus::NullPointer);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/patternlab.h")).unwrap();
    for name in [
        "pl_graph_new",
        "pl_graph_gen_er",
        "pl_refine_digests",
        "pl_histogram_new",
        "pl_tv_distance",
        "pl_tree_descriptor",
        "pl_max_clique",
        "pl_last_error_message",
        "typedef struct PlGraph PlGraph",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the header and static library.
/// Skipped when no C compiler is available.
#[test]
fn c_program_links_and_runs() {
    use std::process::Command;
    let manifest = env!("CARGO_MANIFEST_DIR");
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libpatternlab_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(format!("-I{manifest}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C smoke exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("nodes=20"));
}
