use cayley_cutoff::entropic::asymptotic_times;
use cayley_cutoff::experiments::{self, tv_curves, Command, ExperimentConfig};
use serde_json::Value;

fn config(command: Command, settings: &[(&str, &str)]) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(command);
    for (k, v) in settings {
        c.set(k, v).unwrap();
    }
    c
}

/// First time at which the curve drops to `level`, linearly interpolated.
fn crossing(points: &[(f64, f64)], level: f64) -> f64 {
    let i = points.iter().position(|&(_, tv)| tv <= level).expect("curve reaches the level");
    assert!(i > 0, "curve starts below {level}");
    let ((t0, d0), (t1, d1)) = (points[i - 1], points[i]);
    t0 + (t1 - t0) * (d0 - level) / (d0 - d1)
}

#[test]
fn window_is_sharp_at_scale() {
    let c = config(Command::TvCurve, &[("group", "100003"), ("k", "400"), ("seed", "11")]);
    let curve = &tv_curves(&c).unwrap()[0];
    let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.t, p.tv)).collect();
    let width = crossing(&pts, 0.25) - crossing(&pts, 0.75);
    // k >> log n here, so the window carries the regime factor on top of t0 / sqrt(k)
    let predicted = asymptotic_times(100003.0, 400, c.model).unwrap().predicted_window;
    assert!(width > 0.0 && width <= 8.0 * predicted, "window {width} vs predicted {predicted}");
    for w in curve.points.windows(2) {
        assert!(w[1].tv <= w[0].tv + 1e-12);
        assert!(w[1].floor <= w[1].tv + 1e-10 && w[1].tv <= w[1].l2_bound + 1e-10);
    }
}

#[test]
fn config_file_and_json_records() {
    let dir = std::env::temp_dir().join(format!("cutoff-exp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("gap.jsonl");
    let mut c = ExperimentConfig::new(Command::GapScan);
    c.apply_file_text(&format!(
        "command = gap-scan\ngroup = 4,9,25\nk = 4\nreplicates = 5\nseed = 3\nformat = json\nout = {}\n",
        out.display()
    ))
    .unwrap();
    assert!(experiments::run(&c).unwrap().write().unwrap().is_none());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["header"]["config_digest"], Value::String(c.digest()));
    let reps: Vec<&Value> = lines[1..].iter().filter(|v| v["label"] == "replicate").collect();
    assert_eq!(reps.len(), 5);
    for (i, r) in reps.iter().enumerate() {
        assert_eq!(r["replicate"], i);
        assert_eq!(r["seed"], 3);
        assert_eq!(r["digest"].as_str().unwrap().len(), 16);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn entropic_report_lists_every_requested_case() {
    let c = config(Command::Entropic, &[("n", "1e6,1e8"), ("k", "2,50"), ("format", "json")]);
    let text = experiments::run(&c).unwrap().render().unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    let rows = doc["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert!(row["solution"]["omega"].as_f64().unwrap() > 0.0);
        assert!(row["asymptotic"]["regime"]["label"].is_string());
    }
    // k = 2 at n = 1e6 is in the few-generator regime and close to its leading form
    assert_eq!(rows[0]["asymptotic"]["regime"]["label"], "k << log n");
    assert!(rows[0]["asymptotic"]["relative_gap"].as_f64().unwrap() < 0.05);
}

#[test]
fn csv_reals_round_trip() {
    let c = config(Command::Spectrum, &[("group", "7"), ("k", "2"), ("seed", "1"), ("model", "directed")]);
    let out = experiments::run(&c).unwrap();
    let text = out.render().unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let re_col = rdr.headers().unwrap().iter().position(|h| h == "re").unwrap();
    let parsed: Vec<f64> = rdr.records().map(|r| r.unwrap()[re_col].parse().unwrap()).collect();
    assert_eq!(parsed, out.table.reals("re"));
    assert_eq!(parsed[0], 1.0);
}
