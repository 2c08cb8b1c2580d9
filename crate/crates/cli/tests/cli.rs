use std::path::PathBuf;
use std::process::{Command, Output};

fn cutoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutoff")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cutoff-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn verify_exit_status() {
    let ok = cutoff(&["verify", "--only", "cos_taylor"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let table = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("cos_taylor,1,")).count(), 1);

    let bad = cutoff(&["verify", "--only", "cos_taylor", "--tolerance", "cos_taylor=-1"]);
    assert_eq!(bad.status.code(), Some(1));

    let unknown = cutoff(&["verify", "--only", "no_such_check"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = scratch("override");
    let cfg = dir.join("profile.conf");
    std::fs::write(&cfg, "# small profile\ncommand = cutoff-profile\ngroup = 1009\nk = 6\nseed = 4\nreplicates = 3\n").unwrap();
    let from_file = cutoff(&["cutoff-profile", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let overridden = cutoff(&["cutoff-profile", "--config", cfg.to_str().unwrap(), "--k", "8", "--alpha", "-1,1"]);
    let text = String::from_utf8(overridden.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("k=8;"));
    assert!(text.contains("alpha=-1e0,1e0"));
    assert_ne!(from_file.stdout, text.as_bytes());

    let wrong = cutoff(&["gap-scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = scratch("repro");
    let args = ["tv-curve", "--group", "4,9", "--k", "3", "--seed", "17", "--replicates", "2", "--t-grid", "log:0.1:50:25"];
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.join(name);
        let mut a: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap().to_string();
        a.extend(["--out", &p]);
        let out = cutoff(&a);
        assert!(out.status.success() && out.stdout.is_empty());
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    assert!(text.starts_with("# cutoff tv-curve version="));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 25);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn refusals() {
    let no_seed = cutoff(&["gap-scan", "--group", "101", "--k", "3"]);
    assert_eq!(no_seed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("seed"));

    let big = ["cutoff-profile", "--group", "100003", "--k", "400", "--seed", "1", "--replicates", "1000"];
    let refused = cutoff(&big);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("budget"));

    let cheeger = cutoff(&["cheeger", "--group", "30", "--k", "2", "--seed", "1"]);
    assert_eq!(cheeger.status.code(), Some(2));
}

#[test]
fn entropic_json_is_one_object() {
    let out = cutoff(&["entropic", "--n", "1e6", "--format", "json"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("\"omega\""));
}
