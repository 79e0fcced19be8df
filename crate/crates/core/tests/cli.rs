use std::fs;
use std::process::{Command, Output};

fn rk_ocp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rk-ocp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_writes_one_row_per_node() {
    let out = rk_ocp(&["solve", "--problem", "example31", "--method", "methodC", "--steps", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "k,t,x_1,u_1,p_1");
    assert_eq!(lines.len(), 12);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Jd = "));
    assert!(stderr.contains("iterations = "));
}

#[test]
fn solve_pendulum_writes_monotone_log() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let log = dir.path().join("log.csv");
    let out = rk_ocp(&[
        "solve", "--problem", "pendulum", "--method", "methodB", "--steps", "200",
        "--out", traj.to_str().unwrap(), "--log", log.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&traj).unwrap().lines().count(), 202);

    let log = fs::read_to_string(&log).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("iter,Jd,grad_inf_norm,step_norm,alpha"));
    let costs: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(costs.len() >= 2);
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn csv_output_is_byte_deterministic() {
    let args = ["solve", "--problem", "pendulum", "--method", "methodA", "--steps", "30"];
    assert_eq!(rk_ocp(&args).stdout, rk_ocp(&args).stdout);
    let study = [
        "order-study", "--problem", "example31", "--method", "methodB",
        "--h-grid", "0.1,0.05,0.025", "--target", "stage:3",
    ];
    let first = rk_ocp(&study);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, rk_ocp(&study).stdout);
}

#[test]
fn order_study_reproduces_published_cells() {
    let out = rk_ocp(&[
        "order-study", "--problem", "example31", "--method", "methodC",
        "--h-grid", "0.1,0.05,0.04,0.02,0.01", "--target", "stage:4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,max_error"));
    let published = [1.11e-5, 1.55e-6, 8.08e-7, 1.05e-7, 1.34e-8];
    let errors: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors.len(), published.len());
    for (e, p) in errors.iter().zip(published) {
        assert!((e - p).abs() <= 0.05 * p, "{e} vs {p}");
    }
}

#[test]
fn order_study_on_spring_uses_discrete_reference() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("study.csv");
    let out = rk_ocp(&[
        "order-study", "--problem", "spring", "--method", "trapezoidal",
        "--h-grid", "0.8,0.4,0.2", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 4);
}

#[test]
fn tableau_reports_predicted_orders() {
    let out = rk_ocp(&["tableau", "--method", "methodC"]);
    assert_eq!(out.status.code(), Some(0));
    let predicted: Vec<String> = stdout(&out)
        .lines()
        .skip_while(|l| !l.starts_with("stage"))
        .skip(1)
        .map(|l| l.split_whitespace().last().unwrap().to_string())
        .collect();
    assert_eq!(predicted, ["3", "2", "2", "3"]);
}

#[test]
fn gradcheck_passes_on_pendulum() {
    let out = rk_ocp(&["gradcheck", "--problem", "pendulum", "--method", "euler", "--steps", "3", "--seed", "42"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("PASS"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(rk_ocp(&["tableau", "--method", "no-such-method"]).status.code(), Some(2));
    assert_eq!(rk_ocp(&["solve", "--problem", "example31"]).status.code(), Some(2));
    assert_eq!(
        rk_ocp(&["order-study", "--problem", "example31", "--method", "methodA", "--h-grid", "0.1", "--target", "stage:9"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(rk_ocp(&["solve", "--problem", "example31", "--method", "methodA", "--steps", "0"]).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_one() {
    // A single trapezoidal step over the whole horizon: the implicit stage
    // iteration diverges.
    let out = rk_ocp(&["solve", "--problem", "pendulum", "--method", "trapezoidal", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
