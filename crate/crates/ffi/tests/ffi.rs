use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dectext::embed::{save_embeddings, EmbeddingSet};
use dectext_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dt_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn embeddings_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.emb");
    let set = EmbeddingSet::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5], vec![7, 8, 9]).unwrap();
    save_embeddings(&set, &path).unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(dt_embeddings_load(c_path.as_ptr(), &mut e), DtStatus::Ok);
        assert_eq!((dt_embeddings_n(e), dt_embeddings_d(e)), (3, 2));
        dt_embeddings_free(e);
    }
    assert_eq!(last_error(), "");
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.emb");
    std::fs::write(&junk, b"NOPE....").unwrap();
    let c_junk = CString::new(junk.to_str().unwrap()).unwrap();
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(dt_embeddings_load(c_junk.as_ptr(), &mut e), DtStatus::Format);
        assert!(e.is_null());
        assert_eq!(last_error(), "not an embedding file");
        assert_eq!(dt_embeddings_load(ptr::null(), &mut e), DtStatus::NullPointer);
        let nan = [f32::NAN, 1.0];
        assert_eq!(dt_embeddings_from_rows(nan.as_ptr(), 1, 2, &mut e), DtStatus::Numeric);
        assert!(last_error().contains("row 0"));
        let mut q = [0.0; 2];
        let same = [1.0, 1.0];
        assert_eq!(
            dt_soft_assign([0.0f64].as_ptr(), 1, 1, same.as_ptr(), 2, 1.0, q.as_mut_ptr()),
            DtStatus::InvalidArgument
        );
        let bad = CString::new("[train]\nnonsense = 1").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(dt_train_toml(bad.as_ptr(), &mut r), DtStatus::Format);
        assert!(r.is_null());
        assert!(dt_version().cast::<u8>().read() != 0);
    }
}

#[test]
fn soft_assignment_matches_the_library() {
    let e = [0.0, 0.0, 1.0, 1.0, 3.0, -1.0];
    let c = [0.0, 0.0, 2.0, 0.0];
    let mut q = [0.0; 6];
    unsafe {
        assert_eq!(dt_soft_assign(e.as_ptr(), 3, 2, c.as_ptr(), 2, 1.0, q.as_mut_ptr()), DtStatus::Ok);
    }
    // first row: distances 0 and 4 → kernels 1 and 1/5
    assert!((q[0] - 5.0 / 6.0).abs() < 1e-15);
    for row in q.chunks(2) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn training_is_deterministic_across_the_boundary() {
    let cfg = CString::new("[train]\nepochs = 3\nbatch_size = 64\nhead = \"som\"\nseed = 5\n[data.blobs]\nn = 100\n").unwrap();
    let run = || unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(dt_train_toml(cfg.as_ptr(), &mut r), DtStatus::Ok, "{}", last_error());
        let mut labels = vec![0usize; dt_run_result_len(r)];
        assert_eq!(dt_run_result_labels(r, labels.as_mut_ptr(), 1), DtStatus::InvalidArgument);
        assert_eq!(dt_run_result_labels(r, labels.as_mut_ptr(), labels.len()), DtStatus::Ok);
        let (mut acc, mut nmi) = (0.0, 0.0);
        assert_eq!(dt_run_result_metrics(r, &mut acc, &mut nmi), DtStatus::Ok);
        dt_run_result_free(r);
        (labels, acc, nmi)
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.0.len(), 100);
    assert!(a.1 >= 0.99);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dectext.h")).unwrap();
    for name in [
        "dt_last_error_message",
        "dt_embeddings_load",
        "dt_embeddings_free",
        "dt_evaluate",
        "dt_kmeans",
        "dt_soft_assign",
        "dt_train_toml",
        "dt_run_result_json",
        "dt_string_free",
        "typedef struct DtEmbeddings DtEmbeddings;",
        "DT_STATUS_PANIC = 6",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libdectext_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-o")
        .arg(&bin)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "{}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
