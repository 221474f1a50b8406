use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use houseplan_ffi::*;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures");

fn fixture(name: &str) -> CString {
    CString::new(std::fs::read_to_string(Path::new(FIXTURES).join(name)).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = hp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn scene() -> *mut HpScene {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hp_scene_parse(fixture("home_scene.json").as_ptr(), &mut s) }, HpStatus::Ok);
    s
}

#[test]
fn solves_fixture_through_handles() {
    let domain = hp_domain_household();
    let scene = scene();
    assert_eq!(unsafe { hp_scene_node_count(scene) }, 10);
    let mut plan = ptr::null_mut();
    let status = unsafe { hp_solve(domain, scene, fixture("open_and_retrieve.policy").as_ptr(), &mut plan) };
    assert_eq!(status, HpStatus::Ok);
    let text = unsafe { CStr::from_ptr(plan) }.to_str().unwrap().to_owned();
    assert!(text.contains("(open kitchen_cabinet kitchen)"), "{text}");
    assert!(text.contains("; length 4"), "{text}");
    unsafe {
        hp_string_free(plan);
        hp_scene_free(scene);
        hp_domain_free(domain);
    }
}

#[test]
fn parsed_domain_matches_builtin() {
    let text = fixture("household_domain.pddl");
    let mut domain = ptr::null_mut();
    assert_eq!(unsafe { hp_domain_parse(text.as_ptr(), &mut domain) }, HpStatus::Ok);
    assert!(!domain.is_null());
    let scene = scene();
    let mut plan = ptr::null_mut();
    let status = unsafe { hp_solve(domain, scene, fixture("lamp_only.policy").as_ptr(), &mut plan) };
    assert_eq!(status, HpStatus::Ok);
    unsafe {
        hp_string_free(plan);
        hp_scene_free(scene);
        hp_domain_free(domain);
    }
}

#[test]
fn error_codes_and_messages() {
    let mut domain = ptr::null_mut();
    let bad = CString::new("(define (domain broken").unwrap();
    assert_eq!(unsafe { hp_domain_parse(bad.as_ptr(), &mut domain) }, HpStatus::Parse);
    assert!(domain.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { hp_domain_parse(ptr::null(), &mut domain) }, HpStatus::NullArgument);
    assert!(last_error().contains("null"));

    let mut s = ptr::null_mut();
    let not_json = CString::new("{").unwrap();
    assert_eq!(unsafe { hp_scene_parse(not_json.as_ptr(), &mut s) }, HpStatus::Parse);

    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { hp_scene_parse(invalid.as_ptr().cast(), &mut s) },
        HpStatus::InvalidUtf8
    );

    let d = hp_domain_household();
    let sc = scene();
    let mut plan = ptr::null_mut();
    let status = unsafe { hp_solve(d, sc, fixture("misaligned.policy").as_ptr(), &mut plan) };
    assert_eq!(status, HpStatus::Parse);
    assert!(plan.is_null());
    assert!(last_error().contains("subgoal"), "{}", last_error());

    assert_eq!(
        unsafe { hp_solve(ptr::null(), sc, fixture("lamp_only.policy").as_ptr(), &mut plan) },
        HpStatus::NullArgument
    );
    unsafe {
        hp_scene_free(sc);
        hp_domain_free(d);
        hp_scene_free(ptr::null_mut());
        hp_domain_free(ptr::null_mut());
        hp_string_free(ptr::null_mut());
    }
}

#[test]
fn infeasible_subtask_reports_partial_plan() {
    // The second subgoal asks for a powered-on towel, which no action achieves.
    let output = CString::new(
        "<trace>\n1. turn on the lamp\n2. power the towel\n</trace>\n\
         <subgoal k=1>\nobjects: lamp_1\ngoals: (powered-on lamp_1)\n</subgoal>\n\
         <subgoal k=2>\nobjects: towel_1\ngoals: (powered-on towel_1)\n</subgoal>\n",
    )
    .unwrap();
    let d = hp_domain_household();
    let sc = scene();
    let mut plan = ptr::null_mut();
    let status = unsafe { hp_solve(d, sc, output.as_ptr(), &mut plan) };
    assert_eq!(status, HpStatus::Infeasible, "{}", last_error());
    assert!(last_error().starts_with("subtask 2"), "{}", last_error());
    assert!(!plan.is_null());
    let text = unsafe { CStr::from_ptr(plan) }.to_string_lossy().into_owned();
    assert!(text.contains("turn_on lamp_1"), "{text}");
    unsafe {
        hp_string_free(plan);
        hp_scene_free(sc);
        hp_domain_free(d);
    }
}

#[test]
fn reward_values() {
    let mut r = -1.0;
    for (feasible, label, want) in [(true, 2, 1.0), (true, 1, 0.5), (true, 0, 0.0), (false, 2, 0.0), (false, 1, 0.0)] {
        assert_eq!(unsafe { hp_reward(feasible, label, &mut r) }, HpStatus::Ok);
        assert_eq!(r, want);
    }
    assert_eq!(unsafe { hp_reward(true, 3, &mut r) }, HpStatus::InvalidArgument);
    assert_eq!(unsafe { hp_reward(true, 1, ptr::null_mut()) }, HpStatus::NullArgument);
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(hp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/houseplan.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["hp_solve", "hp_scene_parse", "hp_domain_household", "hp_reward", "HP_STATUS_INFEASIBLE"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"houseplan.h\"\nint main(void) { HpDomain *d = hp_domain_household(); hp_domain_free(d); return HP_STATUS_OK; }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let out = Command::new(compiler)
            .args(&extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(header.parent().unwrap())
            .arg(&src)
            .output()
            .unwrap_or_else(|e| panic!("{compiler}: {e}"));
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
