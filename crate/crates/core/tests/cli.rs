use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dofbound"))
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dofbound-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CYCLIC: &str = r#"{"k":3,"m":2,"transmit_sets":[[1,2],[2,3],[3,1]]}"#;

#[test]
fn validate_exit_codes() {
    let good = scratch("good.json", CYCLIC);
    let o = run(&["validate", "--in", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"valid\": true"));

    let bad = scratch(
        "bad.json",
        r#"{"k":3,"m":1,"transmit_sets":[[1,2],[2],[3]]}"#,
    );
    let o = run(&["validate", "--in", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("oversize"));

    let broken = scratch("broken.json", r#"{"k":3,"#);
    let o = run(&["bound", "--in", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte"));
}

#[test]
fn bound_and_profile() {
    let path = scratch("cyc.json", CYCLIC);
    let o = run(&["bound", "--in", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["value"], 2);
    assert_eq!(v["witness"], serde_json::json!([1]));
    assert_eq!(v["i_min"], 1);

    let o = run(&["profile", "--in", path.to_str().unwrap()]);
    assert_eq!(stdout(&o), "i,e_i,candidate\n0,0,3\n1,2,2\n2,3,3\n3,3,3\n");
}

#[test]
fn generate_then_certify() {
    let o = run(&["generate", "--kind", "successive", "--k", "5", "--m", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).trim(),
        r#"{"k":5,"m":2,"transmit_sets":[[1,2],[2,3],[3,4],[4,5],[5]]}"#
    );
    let path = scratch("succ.json", stdout(&o).trim());
    let o = run(&["certify", "--in", path.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "theorem2");
    assert_eq!(v["implied_bound"], 3);

    let o = run(&["certify-m3", "--in", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn search_budget_exit_code() {
    let o = run(&[
        "search-exact",
        "--k",
        "3",
        "--m",
        "2",
        "--max-assignments",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["trials_or_count"], 5);

    let o = run(&["search-exact", "--k", "3", "--m", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["best_value"], 2);
    assert_eq!(v["method"], "exhaustive");

    let path = scratch(
        "big.json",
        &format!(
            r#"{{"k":25,"m":1,"transmit_sets":{:?}}}"#,
            (1..=25).map(|i| vec![i]).collect::<Vec<_>>()
        ),
    );
    let o = run(&["bound", "--in", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn random_search_is_reproducible() {
    let args = [
        "search-random",
        "--k",
        "10",
        "--m",
        "3",
        "--trials",
        "20",
        "--seed",
        "7",
    ];
    let a: serde_json::Value = serde_json::from_str(&stdout(&run(&args))).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout(&run(&args))).unwrap();
    assert_eq!(a["best_assignment"], b["best_assignment"]);
    assert_eq!(a["best_value"], b["best_value"]);
}

#[test]
fn epsilon_commands() {
    let o = run(&["epsilon", "--epsilon", "1/2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["threshold"], 4.0);
    assert_eq!(v["min_cooperation_order"], 5);

    let o = run(&[
        "epsilon",
        "--epsilon",
        "1/2",
        "--k",
        "6",
        "--m",
        "1",
        "--trials",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(
        stdout(&o),
        "trial,success,min_ratio\n0,false,1\n1,false,1\n2,false,1\n"
    );
}

#[test]
fn expansion_and_grid() {
    let path = scratch(
        "id8.json",
        r#"{"k":8,"m":1,"transmit_sets":[[1],[2],[3],[4],[5],[6],[7],[8]]}"#,
    );
    let o = run(&[
        "expansion",
        "--in",
        path.to_str().unwrap(),
        "--alpha",
        "1/4,1/2",
        "--format",
        "csv",
    ]);
    assert_eq!(
        stdout(&o),
        "alpha,size,e_size,ratio\n1/4,2,2,1\n1/2,4,4,1\n"
    );

    let o = run(&[
        "ineq-grid",
        "--max-k",
        "12",
        "--max-m",
        "3",
        "--max-k-m3",
        "15",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["all_true"], true);
}

#[test]
fn verify_inequalities_suite() {
    let out = std::env::temp_dir().join(format!("dofbound-verify-{}.txt", std::process::id()));
    let o = run(&[
        "verify",
        "--suite",
        "inequalities",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("PASS counting_grids"));
}
