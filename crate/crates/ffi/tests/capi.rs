use std::ffi::{CStr, CString};
use std::ptr;

use aprank_ffi::*;

fn last_error() -> String {
    let p = aprank_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tensor(json: &str) -> *mut AprankTensor {
    let s = CString::new(json).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { aprank_tensor_from_json(s.as_ptr(), &mut t) }, AprankStatus::Ok);
    t
}

const E1_QUARTIC: &str = r#"{"n": 3, "d": 4, "coeffs": [{"alpha": [4, 0, 0], "value": 1.0}]}"#;

#[test]
fn tensor_round_trip_and_eval() {
    let t = tensor(E1_QUARTIC);
    unsafe {
        let (mut n, mut d) = (0, 0);
        assert_eq!(aprank_tensor_shape(t, &mut n, &mut d), AprankStatus::Ok);
        assert_eq!((n, d), (3, 4));

        let x = [1.0, 0.0, 0.0];
        let mut v = 0.0;
        assert_eq!(aprank_tensor_eval(t, x.as_ptr(), 3, &mut v), AprankStatus::Ok);
        assert_eq!(v, 1.0);

        let mut hs = 0.0;
        assert_eq!(aprank_tensor_hs_norm(t, &mut hs), AprankStatus::Ok);
        assert!((hs - 1.0).abs() < 1e-12);

        let (mut l4, mut se) = (0.0, -1.0);
        assert_eq!(aprank_tensor_lr_norm(t, 4.0, 1000, 1, &mut l4, &mut se), AprankStatus::Ok);
        assert!(l4 > 0.0 && l4 < 1.0);
        assert_eq!(se, 0.0);

        let mut s = ptr::null_mut();
        assert_eq!(aprank_tensor_to_json(t, &mut s), AprankStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        aprank_string_free(s);
        let back = tensor(&text);
        let mut w = 0.0;
        assert_eq!(aprank_tensor_eval(back, x.as_ptr(), 3, &mut w), AprankStatus::Ok);
        assert_eq!(w, v);
        aprank_tensor_free(back);
        aprank_tensor_free(t);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let bad = CString::new("{not json").unwrap();
        let mut t = ptr::null_mut();
        assert_eq!(aprank_tensor_from_json(bad.as_ptr(), &mut t), AprankStatus::Parse);
        assert!(t.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(aprank_tensor_from_json(ptr::null(), &mut t), AprankStatus::NullPointer);
        assert!(last_error().contains("null"));

        let t = tensor(E1_QUARTIC);
        let x = [1.0, 0.0];
        let mut v = 0.0;
        assert_eq!(aprank_tensor_eval(t, x.as_ptr(), 2, &mut v), AprankStatus::ShapeMismatch);

        let mut d = ptr::null_mut();
        assert_eq!(aprank_decompose_energy(t, 4.0, -1.0, 100, 0, &mut d), AprankStatus::InvalidArgument);
        assert!(d.is_null());
        aprank_tensor_free(t);

        // freeing null is a no-op
        aprank_tensor_free(ptr::null_mut());
        aprank_decomposition_free(ptr::null_mut());
        aprank_string_free(ptr::null_mut());
    }
}

#[test]
fn algorithms_through_the_abi() {
    let t = tensor(E1_QUARTIC);
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(aprank_decompose_energy(t, 4.0, 0.1, 5000, 3, &mut d), AprankStatus::Ok);
        let mut len = 0;
        assert_eq!(aprank_decomposition_len(d, &mut len), AprankStatus::Ok);
        assert_eq!(len, 1);

        let mut m = ptr::null_mut();
        assert_eq!(aprank_decomposition_materialize(d, &mut m), AprankStatus::Ok);
        let x = [1.0, 0.0, 0.0];
        let mut v = 0.0;
        assert_eq!(aprank_tensor_eval(m, x.as_ptr(), 3, &mut v), AprankStatus::Ok);
        assert!((v - 1.0).abs() < 0.1);
        aprank_tensor_free(m);

        let hs = CString::new("hs").unwrap();
        let mut sparse = ptr::null_mut();
        assert_eq!(aprank_sparsify(d, hs.as_ptr(), 0.5, 1, &mut sparse), AprankStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(aprank_decomposition_to_json(sparse, &mut s), AprankStatus::Ok);
        let json = CStr::from_ptr(s).to_owned();
        aprank_string_free(s);
        let mut parsed = ptr::null_mut();
        assert_eq!(aprank_decomposition_from_json(json.as_ptr(), &mut parsed), AprankStatus::Ok);
        aprank_decomposition_free(parsed);
        aprank_decomposition_free(sparse);

        let bogus = CString::new("l1").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(aprank_sparsify(d, bogus.as_ptr(), 0.5, 1, &mut none), AprankStatus::InvalidArgument);
        aprank_decomposition_free(d);

        let mut fw = ptr::null_mut();
        assert_eq!(aprank_fw_decompose(t, 0.1, 1.0, 2, &mut fw), AprankStatus::Ok);
        aprank_decomposition_free(fw);
        aprank_tensor_free(t);
    }
}

#[test]
fn contract_failure_code() {
    // a nuclear-norm guess far too small: the one-step budget cannot reach
    // the tolerance
    let t = tensor(r#"{"n": 2, "d": 2, "coeffs": [{"alpha": [2, 0], "value": 5.0}, {"alpha": [0, 2], "value": -5.0}]}"#);
    unsafe {
        let mut d = ptr::null_mut();
        let status = aprank_fw_decompose(t, 0.5, 0.01, 0, &mut d);
        assert_eq!(status, AprankStatus::ContractFailure, "{}", last_error());
        assert!(d.is_null());
        aprank_tensor_free(t);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(aprank_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/aprank.h")).unwrap();
    for name in [
        "aprank_tensor_from_json",
        "aprank_tensor_free",
        "aprank_decompose_energy",
        "aprank_sparsify",
        "aprank_fw_decompose",
        "aprank_last_error",
        "typedef struct AprankTensor AprankTensor",
        "APRANK_STATUS_CONTRACT_FAILURE",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"aprank.h\"\nint main(void) { AprankTensor *t = 0; aprank_tensor_free(t); return APRANK_STATUS_OK; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
