use localworlds_web::{born_json, cascade_json, ghz_json, search_json};

#[test]
fn cascade_rows() {
    let v = cascade_json(0.5, 6).unwrap();
    assert_eq!(v["cascade"]["steps"].as_array().unwrap().len(), 6);
    assert_eq!(cascade_json(0.0, 6).unwrap()["cascade"]["steps"].as_array().unwrap().len(), 2);
    assert!(cascade_json(1.5, 6).is_err());
}

#[test]
fn born_split() {
    let v = born_json(0.7, 1000).unwrap();
    assert_eq!((v["up"].as_u64(), v["down"].as_u64()), (Some(700), Some(300)));
    assert!(born_json(1.2, 10).is_err());
    assert!(born_json(0.5, 0).is_err());
}

#[test]
fn ghz_audits() {
    let v = ghz_json("YYX", 100).unwrap();
    assert_eq!(v["audit_pass"], true);
    assert!(v["summary"][0].as_str().unwrap().contains("YYX product = +1 in 100%"));
    assert!(ghz_json("YY", 100).is_err());
    assert!(ghz_json("QQQ", 100).is_err());
}

#[test]
fn searches() {
    assert_eq!(search_json("single-world").unwrap()["satisfiable"], false);
    assert_eq!(search_json("divergent").unwrap()["satisfiable"], false);
    assert_eq!(search_json("multivalued").unwrap()["satisfiable"], true);
}
