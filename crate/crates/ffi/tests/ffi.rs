use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use dynmeans::pipeline::{run_sequence, ReparamConfig, RunConfig};
use dynmeans::synth::{generate, SynthConfig};
use dynmeans_ffi::*;

fn last_error() -> String {
    let p = dm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_reparam(lambda: f64, n_q: f64, k_tau: f64, restarts: usize, seed: u64) -> *mut DmClusterer {
    let mut h = ptr::null_mut();
    let status =
        unsafe { dm_clusterer_new_reparam(lambda, n_q, k_tau, restarts, 100, seed, &mut h) };
    assert_eq!(status, DmStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn matches_library_run_on_generated_sequence() {
    let data = generate(&SynthConfig {
        n_steps: 20,
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = RunConfig::new(ReparamConfig::new(0.04, 6.8, 1.01).unwrap())
        .with_restarts(3)
        .with_seed(11);
    let expected = run_sequence(&data.batches, &cfg).unwrap();

    let h = new_reparam(0.04, 6.8, 1.01, 3, 11);
    for (t, batch) in data.batches.iter().enumerate() {
        let flat: Vec<f64> = batch.iter().flatten().copied().collect();
        let mut labels = vec![u64::MAX; batch.len()];
        let status =
            unsafe { dm_clusterer_step(h, flat.as_ptr(), batch.len(), 2, labels.as_mut_ptr()) };
        assert_eq!(status, DmStatus::Ok);
        let want: Vec<u64> = expected.steps[t]
            .labels
            .labels
            .iter()
            .map(|id| id.0)
            .collect();
        assert_eq!(labels, want, "t = {t}");

        let (mut cost, mut iters, mut conv) = (0.0, 0usize, false);
        assert_eq!(
            unsafe { dm_clusterer_last_cost(h, &mut cost, &mut iters, &mut conv) },
            DmStatus::Ok
        );
        assert_eq!(cost, expected.steps[t].cost);
        assert_eq!(iters, expected.steps[t].iterations);

        let mut count = 0;
        let status = unsafe {
            dm_clusterer_clusters(
                h,
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                0,
                &mut count,
            )
        };
        assert_eq!(status, DmStatus::Ok);
        let clusters = &expected.steps[t].clusters;
        assert_eq!(count, clusters.len());
        let mut ids = vec![0u64; count];
        let mut centers = vec![0.0; count * 2];
        let mut weights = vec![0.0; count];
        let status = unsafe {
            dm_clusterer_clusters(
                h,
                ids.as_mut_ptr(),
                centers.as_mut_ptr(),
                weights.as_mut_ptr(),
                count,
                &mut count,
            )
        };
        assert_eq!(status, DmStatus::Ok);
        for (i, c) in clusters.iter().enumerate() {
            assert_eq!(ids[i], c.id.0);
            assert_eq!(&centers[2 * i..2 * i + 2], &c.center[..]);
            assert_eq!(weights[i], c.weight);
        }
    }
    assert_eq!(unsafe { dm_clusterer_timestep(h) }, 20);
    unsafe { dm_clusterer_free(h) };
}

#[test]
fn reparameterize_reference_values() {
    let (mut q, mut tau) = (0.0, 0.0);
    assert_eq!(
        unsafe { dm_reparameterize(0.04, 6.8, 1.01, &mut q, &mut tau) },
        DmStatus::Ok
    );
    assert_eq!(q, 0.0058823529411764705);
    assert_eq!(tau, 0.18413793103448278);

    assert_eq!(
        unsafe { dm_reparameterize(0.04, 1.0, 1.01, &mut q, &mut tau) },
        DmStatus::InvalidParam
    );
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { dm_reparameterize(0.04, 6.8, 1.01, ptr::null_mut(), &mut tau) },
        DmStatus::NullPointer
    );
}

#[test]
fn error_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { dm_clusterer_new(0.0, 0.1, 0.1, 1, 10, 0, &mut h) },
        DmStatus::InvalidParam
    );
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { dm_clusterer_new(1.0, 0.1, 0.1, 0, 10, 0, &mut h) },
        DmStatus::InvalidParam
    );
    assert_eq!(
        unsafe { dm_clusterer_new(1.0, 0.1, 0.1, 1, 10, 0, ptr::null_mut()) },
        DmStatus::NullPointer
    );

    let h = new_reparam(1.0, 5.0, 1.5, 1, 0);
    let mut count = 0;
    let status = unsafe {
        dm_clusterer_clusters(
            h,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            0,
            &mut count,
        )
    };
    assert_eq!(status, DmStatus::NoResult);
    assert_eq!(
        unsafe { dm_clusterer_last_cost(h, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) },
        DmStatus::NoResult
    );

    let pts = [0.0, 0.0, 3.0, 3.0];
    let mut labels = [0u64; 2];
    assert_eq!(
        unsafe { dm_clusterer_step(h, pts.as_ptr(), 2, 2, labels.as_mut_ptr()) },
        DmStatus::Ok
    );
    let mut ids = [0u64; 1];
    let status = unsafe {
        dm_clusterer_clusters(
            h,
            ids.as_mut_ptr(),
            ptr::null_mut(),
            ptr::null_mut(),
            1,
            &mut count,
        )
    };
    assert_eq!(status, DmStatus::BufferTooSmall);
    assert_eq!(count, 2);

    // dimension change after the first batch
    let bad = [0.0, 0.0, 0.0];
    assert_eq!(
        unsafe { dm_clusterer_step(h, bad.as_ptr(), 1, 3, labels.as_mut_ptr()) },
        DmStatus::InvalidInput
    );
    let nan = [f64::NAN, 0.0];
    assert_eq!(
        unsafe { dm_clusterer_step(h, nan.as_ptr(), 1, 2, labels.as_mut_ptr()) },
        DmStatus::InvalidInput
    );
    assert!(last_error().contains("non-finite"));
    assert_eq!(
        unsafe { dm_clusterer_step(h, ptr::null(), 1, 2, labels.as_mut_ptr()) },
        DmStatus::NullPointer
    );
    assert_eq!(
        unsafe { dm_clusterer_step(ptr::null_mut(), pts.as_ptr(), 2, 2, labels.as_mut_ptr()) },
        DmStatus::NullPointer
    );

    // empty batch: null pointers are fine
    assert_eq!(
        unsafe { dm_clusterer_step(h, ptr::null(), 0, 2, ptr::null_mut()) },
        DmStatus::Ok
    );
    assert_eq!(
        unsafe {
            dm_clusterer_clusters(
                h,
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                0,
                &mut count,
            )
        },
        DmStatus::Ok
    );
    assert_eq!(count, 0);
    assert!(dm_last_error().is_null());
    unsafe { dm_clusterer_free(h) };
    unsafe { dm_clusterer_free(ptr::null_mut()) };
}

#[test]
fn dp_means_entry_point() {
    let pts = [0.0, 0.0, 0.1, 0.0, 4.0, 4.0, 4.0, 4.1];
    let mut labels = [9usize; 4];
    let (mut k, mut cost) = (0usize, 0.0);
    let status = unsafe {
        dm_dp_means(
            pts.as_ptr(),
            4,
            2,
            1.0,
            100,
            3,
            labels.as_mut_ptr(),
            &mut k,
            &mut cost,
        )
    };
    assert_eq!(status, DmStatus::Ok);
    assert_eq!(k, 2);
    assert_eq!(labels[0], labels[1]);
    assert_eq!(labels[2], labels[3]);
    assert_ne!(labels[0], labels[2]);
    assert!((cost - (2.0 + 0.005 + 0.005)).abs() < 1e-12);

    let status = unsafe {
        dm_dp_means(
            pts.as_ptr(),
            4,
            2,
            -1.0,
            100,
            3,
            labels.as_mut_ptr(),
            &mut k,
            &mut cost,
        )
    };
    assert_eq!(status, DmStatus::InvalidParam);
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc)
        .arg("--version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|_| cc)
}

#[test]
fn header_compiles_and_links_from_c() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libdynmeans_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");

    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8(run.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 5, "{stdout}");
    // ids persist across batches
    assert_eq!(lines[0], lines[1]);
    assert_eq!(lines[1], lines[2]);
    let ids: Vec<&str> = lines[0].split(' ').collect();
    assert_eq!(ids[0], ids[1]);
    assert_eq!(ids[3], ids[4]);
    assert_ne!(ids[0], ids[3]);
    assert_eq!(lines[3], "clusters 2");
    assert_eq!(lines[4], "q 0.0058823529411764705 tau 0.18413793103448278");
}
