use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use netsample_ffi::*;

fn last_error() -> String {
    let p = ns_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn path_population() -> *mut NsPopulation {
    let edges: Vec<usize> = (0..4).flat_map(|i| [i, i + 1]).collect();
    let mut pop = ptr::null_mut();
    let s = unsafe { ns_population_from_edges(5, edges.as_ptr(), 4, &mut pop) };
    assert_eq!(s, NsStatus::Ok);
    pop
}

#[test]
fn survey_resample_estimate_round_trip() {
    let pop = path_population();
    unsafe {
        assert_eq!(ns_population_node_count(pop), 5);
        assert_eq!(ns_population_edge_count(pop), 4);
        let mut design = std::mem::zeroed::<NsDesignConfig>();
        assert_eq!(ns_design_default(NsDesignKind::Sb, &mut design), NsStatus::Ok);
        assert_eq!(design.coupon_max, 15);
        design.target_n = 5;
        let mut sample = ptr::null_mut();
        assert_eq!(ns_survey_run(pop, &design, 3, &mut sample), NsStatus::Ok);
        assert_eq!(ns_sample_len(sample), 5);
        let mut members = vec![0usize; 5];
        assert_eq!(ns_sample_members(sample, members.as_mut_ptr(), 5), NsStatus::Ok);
        members.sort_unstable();
        assert_eq!(members, vec![0, 1, 2, 3, 4]);

        let mut rc = std::mem::zeroed::<NsResampleConfig>();
        assert_eq!(ns_resample_default(NsResampleMode::Process, 2, &mut rc), NsStatus::Ok);
        rc.iterations = 5000;
        let mut freq = ptr::null_mut();
        assert_eq!(ns_resample_run(sample, &rc, 9, &mut freq), NsStatus::Ok);
        assert_eq!(ns_frequencies_len(freq), 5);
        assert!(ns_frequencies_t_effective(freq) > 0);
        let mut f = vec![0.0; 5];
        assert_eq!(ns_frequencies_copy(freq, f.as_mut_ptr(), 5), NsStatus::Ok);
        assert!(f.iter().all(|&v| v > 0.0 && v <= 1.0));

        let mut exact = vec![0.0; 5];
        assert_eq!(ns_exact_marginals(sample, &rc, exact.as_mut_ptr(), 5), NsStatus::Ok);
        let total: f64 = exact.iter().sum();
        assert!(total > 0.0 && total <= 5.0);

        let name = CString::new("degree").unwrap();
        let mut e = NsEstimate::default();
        assert_eq!(
            ns_estimate(sample, freq, name.as_ptr(), NsEstimator::SampleMean, NsVariance::SimpleN, 0.05, &mut e),
            NsStatus::Ok
        );
        // census of the path: degrees 1,2,2,2,1
        assert!((e.point - 1.6).abs() < 1e-12);
        assert!((e.half_width - 1.959963984540054 * e.variance.sqrt()).abs() < 1e-12);

        ns_frequencies_free(freq);
        ns_sample_free(sample);
        ns_population_free(pop);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut out = 0.0;
        let y = [1.0, 2.0];
        assert_eq!(ns_mu_f(y.as_ptr(), ptr::null(), 2, &mut out), NsStatus::NullArgument);
        assert!(last_error().contains("NULL"));
        let w = [0.5, -1.0];
        assert_eq!(ns_mu_f(y.as_ptr(), w.as_ptr(), 2, &mut out), NsStatus::Data);

        let edges = [0usize, 9];
        let mut pop = ptr::null_mut();
        assert_eq!(ns_population_from_edges(3, edges.as_ptr(), 1, &mut pop), NsStatus::InvalidArgument);
        assert!(pop.is_null());

        let pop = path_population();
        let mut design = std::mem::zeroed::<NsDesignConfig>();
        ns_design_default(NsDesignKind::Rds, &mut design);
        let mut sample = ptr::null_mut();
        assert_eq!(ns_survey_run(pop, &design, 1, &mut sample), NsStatus::Config);
        assert!(last_error().contains("target"), "{}", last_error());

        // a 2-member sample without re-seeding has absorbing states
        let rec = [0usize, 1];
        assert_eq!(ns_sample_from_edges(2, rec.as_ptr(), 1, ptr::null(), 0, &mut sample), NsStatus::Ok);
        let mut rc = std::mem::zeroed::<NsResampleConfig>();
        ns_resample_default(NsResampleMode::Process, 1, &mut rc);
        rc.reseed_p = 0.0;
        let mut m = [0.0; 2];
        assert_eq!(ns_exact_marginals(sample, &rc, m.as_mut_ptr(), 2), NsStatus::Reducible);
        ns_sample_free(sample);
        ns_population_free(pop);

        let missing = CString::new("/nonexistent/edges.txt").unwrap();
        let mut p2 = ptr::null_mut();
        assert_eq!(ns_population_load(missing.as_ptr(), ptr::null(), &mut p2), NsStatus::Data);

        // freeing NULL is a no-op
        ns_population_free(ptr::null_mut());
        ns_sample_free(ptr::null_mut());
        ns_frequencies_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/netsample.h")).unwrap();
    for name in [
        "ns_last_error_message",
        "ns_population_load",
        "ns_population_from_edges",
        "ns_survey_run",
        "ns_resample_run",
        "ns_estimate",
        "ns_exact_marginals",
        "typedef struct NsPopulation NsPopulation",
        "NS_STATUS_REDUCIBLE",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles a C program against the generated header and static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libnetsample_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let out = std::env::temp_dir().join(format!("netsample_c_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(manifest.join("tests/c_smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(
        run.status.success(),
        "C program failed: {}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
