use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cases() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases").canonicalize().unwrap()
}

fn freqmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqmpc")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("freqmpc-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn short_scenario(dir: &Path, controller: &str) -> PathBuf {
    let path = dir.join(format!("{controller}.toml"));
    let text = format!(
        "case = \"{}\"\npartition = \"{}\"\ncontroller = \"{controller}\"\nduration = 0.5\nforecast = \"linear_growth\"\n\n\
         [disturbance]\nkind = \"sinusoidal\"\namplitude = 1.5\nperiod = 40.0\ncutoff = 20.0\nbuses = [4, 5, 6, 7, 8, 9]\n",
        cases().join("ieee9.case").display(),
        cases().join("ieee9.partition").display(),
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_accepts_shipped_cases() {
    for (case, part) in [("ieee9.case", Some("ieee9.partition")), ("ieee39.case", Some("ieee39.partition")), ("two_gen.case", None)] {
        let case = cases().join(case);
        let mut args = vec!["validate".to_string(), "--case".into(), case.display().to_string()];
        if let Some(p) = part {
            args.extend(["--partition".into(), cases().join(p).display().to_string()]);
        }
        let out = freqmpc(&args.iter().map(String::as_str).collect::<Vec<_>>());
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout.contains("threshold ordering ok"));
        assert_eq!(stdout.contains("partition ok"), part.is_some());
    }
}

#[test]
fn validate_rejects_a_broken_case() {
    let dir = scratch("broken");
    let text = std::fs::read_to_string(cases().join("two_gen.case")).unwrap();
    // drop both lines touching bus 3
    let broken: String = text.lines().filter(|l| !l.starts_with("1  1  3") && !l.starts_with("2  2  3")).map(|l| format!("{l}\n")).collect();
    assert_ne!(broken.lines().count(), text.lines().count());
    let path = dir.join("broken.case");
    std::fs::write(&path, broken).unwrap();
    let out = freqmpc(&["validate", "--case", path.to_str().unwrap()]);
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn run_then_report() {
    let dir = scratch("run");
    let mut outs = Vec::new();
    for controller in ["centralized", "none"] {
        let scenario = short_scenario(&dir, controller);
        let out_dir = dir.join(format!("out-{controller}"));
        let out = freqmpc(&["run", "--quiet", "--scenario", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
        let header = trace.lines().next().unwrap();
        assert!(header.starts_with("t,lambda_1,") && header.ends_with(",u_9,V"), "{header}");
        assert_eq!(header.split(',').count(), 1 + 9 + 9 + 9 + 1);
        assert_eq!(trace.lines().count(), 1 + 51);
        assert!(std::fs::read_to_string(out_dir.join("summary.txt")).unwrap().contains("int u_total dt"));
        outs.push(out_dir);
    }
    let out = freqmpc(&["report", "--logs", outs[0].to_str().unwrap(), outs[1].to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("int u_total dt"));
    std::fs::remove_dir_all(&dir).ok();
}
