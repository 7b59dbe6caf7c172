use std::fs;
use std::process::{Command, Output};

use intelligent_states::fock::{FockState, StateDump};

fn fdis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdis")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn state_dump_round_trips() {
    let o = fdis(&["state", "--f", "harmonious", "--lambda", "0.5", "--z", "0.3,0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dump: StateDump = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(dump.lambda, 0.5);
    assert_eq!(dump.z, [0.3, 0.1]);
    let s = FockState::from_dump(&dump).unwrap();
    assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    assert!(stderr(&o).starts_with("case iv"));
}

#[test]
fn negative_lambda_is_a_value() {
    // parsed as a number, then rejected for diverging rather than as a stray flag
    let o = fdis(&["state", "--f", "identity", "--lambda", "-0.5", "--z", "-0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TruncationNotConverged"), "{}", stderr(&o));
    let o = fdis(&["state", "--f", "identity", "--lambda", "2", "--z", "-0.2,-0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn state_errors_exit_2_with_name() {
    let cases: [(&[&str], &str); 3] = [
        (&["state", "--f", "harmonious", "--lambda", "1", "--z", "1.2"], "OutsideConvergenceDisc"),
        (&["state", "--f", "hydrogen", "--lambda", "-1", "--z", "0.3"], "CaseTwoNoSolution"),
        (&["state", "--f", "identity", "--z", "0.3"], "InvalidParam"),
    ];
    for (args, name) in cases {
        let o = fdis(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains(name), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn vacuum_is_reported_not_failed() {
    let o = fdis(&["state", "--f", "identity", "--lambda", "1", "--z", "0"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("vacuum"));
}

#[test]
fn spectrum_file_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = dir.path().join("levels.txt");
    let levels: Vec<String> = (1..=80).map(|n| format!("{}", n * n)).collect();
    fs::write(&spectrum, levels.join("\n")).unwrap();
    let out = dir.path().join("state.json");
    let f = format!("spectrum:{}", spectrum.display());
    let o = fdis(&["state", "--f", &f, "--lambda", "1", "--z", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let dump: StateDump = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    // e_n = n² gives f(n) = √n, so c_n ∝ z^n / n!
    let s = FockState::from_dump(&dump).unwrap();
    let a = s.amplitudes();
    assert!((a[2].re / a[1].re - 0.25).abs() < 1e-12);
}

#[test]
fn scan_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = fdis(&[
        "scan", "--f", "hydrogen", "--z", "0.3", "--sweep", "lambda=-1:1:3", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "param_name,param_value,mean_n,var_n,mandel_q,var_x,var_p,q1,q2,dX,dP,comm_abs,intelligence_residual,status"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].ends_with(",,,,,,,,,,,,CaseTwoNoSolution"), "{}", rows[0]);
    assert!(rows[2].ends_with(",ok"), "{}", rows[2]);
    assert!(stderr(&o).contains("of 3 points ok"));
}

#[test]
fn scan_json_and_argument_checks() {
    let o = fdis(&["scan", "--f", "identity", "--lambda", "2", "--sweep", "z=0.1:0.5:5", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);

    let o = fdis(&["scan", "--f", "identity", "--sweep", "z=0.1:0.5:5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fdis(&["scan", "--f", "identity", "--lambda", "2", "--z", "0.1", "--sweep", "z=0.1:0.5:5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fdis(&["scan", "--f", "identity", "--lambda", "2", "--sweep", "eta=0.1:0.2:2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_quick_and_fault() {
    let o = fdis(&["verify", "--quick"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let o = fdis(&["verify", "--quick", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
