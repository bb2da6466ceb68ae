use std::process::Command;

fn sim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_edgedis-sim")).args(args).output().unwrap()
}

#[test]
fn single_run_prints_header_row_and_mean() {
    let out = sim(&["--scheme", "datasync", "--n", "8", "--ds", "4MB"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("scheme,n,nd,r,ds_bytes,bs_bytes"));
    assert!(lines[1].starts_with("datasync,8,"));
    assert!(lines[2].contains(",mean,"));
}

#[test]
fn sweep_grid_row_count() {
    let out = sim(&["--ds", "2MB", "--runs", "2", "--sweep", "n=4,8", "--sweep", "cr=5,10,20"]);
    assert!(out.status.success());
    // 6 points, each with 2 runs and a mean row, plus the header
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 6 * 3);
}

#[test]
fn invalid_parameters_exit_2() {
    for args in [
        &["--r", "1.5"][..],
        &["--nd", "0.2"],
        &["--scheme", "paxos"],
        &["--ds", "huge"],
        &["--sweep", "n=4,zero"],
        &["--sweep", "colour=red"],
    ] {
        let out = sim(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(!err.is_empty(), "{args:?}");
    }
}

#[test]
fn stalled_run_exits_1() {
    // A 100 ms horizon cannot fit one cloud round trip.
    let out = sim(&["--ds", "1MB", "--n", "4", "--horizon-ms", "100"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",1"), "{text}");
}

#[test]
fn scenario_subcommand_passes() {
    let out = sim(&["scenario"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("event A: pass"));
    assert!(text.contains("coordinator terms: [4, 5, 7, 8, 9]"));
}

#[test]
fn election_bench_writes_quantiles() {
    let out = sim(&["election-bench", "--n", "8", "--runs", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",q")).count(), 20);
}
