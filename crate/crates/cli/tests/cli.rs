use std::path::Path;
use std::process::{Command, Output};

use vfold::criteria::{compute_table, select, CriterionSpec};
use vfold::densities::{Setting, TrueDensity};
use vfold::models::collection_by_name;
use vfold::Sample;
use vfold::models::HistogramModel;
use vfold::variance::var_increment;

fn vfold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfold"))
        .args(args)
        .env_remove("VFOLD_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_documents_every_flag() {
    let cases: [(&str, &[&str]); 5] = [
        ("simulate", &["--setting", "--collection", "--n", "--reps", "--seed", "--procedures", "--config", "--out", "--plot-data", "--threads"]),
        ("variance", &["--setting", "--collection", "--n", "--V", "--C", "--mc", "--seed", "--kfit", "--out", "--plot-data"]),
        ("heuristic", &["--setting", "--collection", "--n", "--criterion", "--reps", "--seed", "--renormalize", "--out"]),
        ("bench", &["--n-list", "--v-list", "--d-list", "--repeats", "--seed", "--kernels", "--out"]),
        ("select", &["--data", "--collection", "--criterion", "--setting"]),
    ];
    for (cmd, flags) in cases {
        let out = vfold(&[cmd, "--help"]);
        assert_eq!(code(&out), 0, "{cmd}");
        let text = stdout(&out);
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    assert_eq!(code(&vfold(&["--help"])), 0);
    assert_eq!(code(&vfold(&[])), 2);
    assert_eq!(code(&vfold(&["simualte"])), 2);
}

#[test]
fn simulate_smoke_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let plot = dir.path().join("p.csv");
    let args = |threads: &'static str, file: &Path| -> Vec<String> {
        [
            "simulate", "--setting", "S", "--collection", "dya2", "--n", "500", "--reps", "40",
            "--seed", "42", "--procedures", "penvf:V=5,C=1", "--threads", threads, "--out",
        ]
        .iter()
        .map(|s| s.to_string())
        .chain([path_str(file).to_string()])
        .collect()
    };
    let run = |a: Vec<String>| vfold(&a.iter().map(String::as_str).collect::<Vec<_>>());

    let mut first = args("1", &out);
    first.extend(["--plot-data".to_string(), path_str(&plot).to_string()]);
    let res = run(first);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "procedure,c_or,c_or_se,risk,risk_se");
    assert!(lines[1].starts_with("\"penvf:V=5,C=1\","));
    assert_eq!(lines.len(), 4);
    assert!(std::fs::read_to_string(&plot).unwrap().starts_with("series,x,y,y_se\n"));

    let again = dir.path().join("r3.csv");
    assert_eq!(code(&run(args("3", &again))), 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let via_env = dir.path().join("env.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_vfold"))
        .args([
            "simulate", "--setting", "S", "--collection", "dya2", "--n", "500", "--reps", "40",
            "--seed", "42", "--procedures", "penvf:V=5,C=1", "--out", path_str(&via_env),
        ])
        .env("VFOLD_THREADS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&via_env).unwrap());
}

#[test]
fn simulate_usage_errors() {
    let base = ["simulate", "--collection", "regu", "--n", "50", "--reps", "5", "--seed", "1"];
    let with = |extra: &[&str]| {
        let mut a: Vec<&str> = base.to_vec();
        a.extend_from_slice(extra);
        vfold(&a)
    };
    let missing_out = with(&["--setting", "S"]);
    assert_eq!(code(&missing_out), 2);
    assert!(stderr(&missing_out).contains("--out"));

    let typo = with(&["--setting", "unifrom", "--out", "-"]);
    assert_eq!(code(&typo), 2);
    assert!(stderr(&typo).contains("did you mean \"uniform\""));

    let crit = with(&["--setting", "S", "--procedures", "vfcx:V=5", "--out", "-"]);
    assert_eq!(code(&crit), 2);
    assert!(stderr(&crit).contains("did you mean \"vfcv\""));

    assert_eq!(code(&with(&["--setting", "S", "--procedures", "vfcv:V=500", "--out", "-"])), 2);
    assert_eq!(code(&with(&["--setting", "S", "--threads", "0", "--out", "-"])), 2);

    let no_seed = vfold(&["simulate", "--setting", "S", "--collection", "regu", "--n", "50", "--reps", "5", "--out", "-"]);
    assert_eq!(code(&no_seed), 2);
    assert!(stderr(&no_seed).contains("--seed"));
}

#[test]
fn simulate_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"setting":"L","collection":"regu","n":60,"reps":8,"seed":3,"procedures":["vfcv:V=5","pendim"]}"#,
    )
    .unwrap();
    let res = vfold(&["simulate", "--config", path_str(&cfg), "--out", "-"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(stdout(&res).lines().count(), 1 + 2 + 2);

    let clash = vfold(&["simulate", "--config", path_str(&cfg), "--seed", "4", "--out", "-"]);
    assert_eq!(code(&clash), 2);

    std::fs::write(&cfg, r#"{"setting":"L","collection":"regu","n":60,"reps":0,"seed":3}"#).unwrap();
    assert_eq!(code(&vfold(&["simulate", "--config", path_str(&cfg), "--out", "-"])), 2);
    let missing = dir.path().join("none.json");
    assert_eq!(code(&vfold(&["simulate", "--config", path_str(&missing), "--out", "-"])), 1);
}

#[test]
fn variance_tables() {
    let empty = vfold(&["variance", "--setting", "S", "--collection", "regu", "--n", "100", "--V", "", "--out", "-"]);
    assert_eq!(code(&empty), 0);
    assert_eq!(stdout(&empty), "m1,m2,n,V,C,analytic,first_term,second_term\n");

    let dir = tempfile::tempdir().unwrap();
    let pair = dir.path().join("pair.json");
    std::fs::write(&pair, "[[0, 0.25, 0.5, 0.75, 1], [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1]]").unwrap();
    let coll = format!("file:{}", path_str(&pair));
    let res = vfold(&["variance", "--setting", "S", "--collection", &coll, "--n", "100", "--V", "5", "--C", "1.5", "--out", "-"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = stdout(&res);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let s = TrueDensity::setting(Setting::S);
    let four = HistogramModel::regular(4).unwrap();
    let ten = HistogramModel::regular(10).unwrap();
    let (m1, m2) = if rows[0][1] == "custom:0" { (&ten, &four) } else { (&four, &ten) };
    let lib = var_increment(&s, m1, m2, 100, 5, 1.5).unwrap();
    let row = rows.iter().find(|r| r[0] != r[1]).unwrap();
    assert_eq!(row[5].parse::<f64>().unwrap(), lib.analytic);

    let no_seed = vfold(&["variance", "--setting", "S", "--collection", "regu", "--n", "20", "--V", "2", "--mc", "10", "--out", "-"]);
    assert_eq!(code(&no_seed), 2);
    let mc = vfold(&["variance", "--setting", "S", "--collection", "regu", "--n", "20", "--V", "2", "--mc", "10", "--seed", "1", "--out", "-"]);
    assert_eq!(code(&mc), 0);
    assert!(stdout(&mc).lines().next().unwrap().ends_with(",mc_estimate,mc_se"));
    assert_eq!(code(&vfold(&["variance", "--setting", "S", "--collection", "regu", "--n", "20", "--V", "3", "--out", "-"])), 2);
    assert_eq!(code(&vfold(&["variance", "--setting", "S", "--collection", "regu", "--n", "20", "--V", "2;4", "--out", "-"])), 2);

    let fit = vfold(&["variance", "--setting", "S", "--collection", "regu", "--n", "100", "--V", "2,5,10", "--kfit", "--out", path_str(&dir.path().join("v.csv"))]);
    assert_eq!(code(&fit), 0);
    let value: serde_json::Value = serde_json::from_str(stdout(&fit).trim()).unwrap();
    assert!(value["K4"].as_f64().unwrap() > 0.0);
}

#[test]
fn heuristic_is_deterministic() {
    let args = ["heuristic", "--setting", "S", "--collection", "regu", "--n", "100", "--criterion", "penvf:V=5", "--reps", "50", "--seed", "9", "--out", "-"];
    let a = vfold(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, vfold(&args).stdout);
    assert!(stdout(&a).starts_with("m_dim,sr,phi_bar_sr,freq,freq_se\n"));
    assert_eq!(stdout(&a).lines().count(), 101);
    let bad = vfold(&["heuristic", "--setting", "S", "--collection", "regu", "--n", "100", "--criterion", "vfcv:V=3", "--reps", "5", "--seed", "9", "--out", "-"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn bench_smoke() {
    let ok = vfold(&["bench", "--n-list", "64,128", "--v-list", "2,4", "--d-list", "8", "--repeats", "2", "--seed", "1", "--kernels", "fast,sparse,naive", "--out", "-"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert_eq!(stdout(&ok).lines().count(), 1 + 2 * 2 * 3);
    assert_eq!(code(&vfold(&["bench", "--n-list", "64;128", "--v-list", "2", "--d-list", "8", "--seed", "1", "--out", "-"])), 2);
    assert_eq!(code(&vfold(&["bench", "--n-list", "64", "--v-list", "2", "--d-list", "8", "--seed", "1", "--kernels", "quick", "--out", "-"])), 2);
    assert_eq!(code(&vfold(&["bench", "--n-list", "64", "--v-list", "2", "--d-list", "8", "--out", "-"])), 2);
}

#[test]
fn select_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("u.txt");
    let xs = TrueDensity::uniform().sample(500, 2024).unwrap();
    let text: String = xs.values().iter().map(|x| format!("{x}\n")).collect();
    std::fs::write(&data, format!("# uniform draws\n{text}")).unwrap();
    let res = vfold(&["select", "--data", path_str(&data), "--collection", "regu", "--criterion", "vfcv:V=5"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let value: serde_json::Value = serde_json::from_str(stdout(&res).trim()).unwrap();
    let dim = value["dim"].as_u64().unwrap();
    let sample = Sample::from_reader(std::io::Cursor::new(text.clone())).unwrap();
    let collection = collection_by_name("regu", sample.len()).unwrap();
    let spec: CriterionSpec = "vfcv:V=5".parse().unwrap();
    let table = compute_table(&spec, &sample, &collection, None).unwrap();
    let chosen = &collection.models()[select(&table, &collection).unwrap()];
    assert_eq!(dim, chosen.dim() as u64);
    assert_eq!(value["value"].as_f64().unwrap(), table.values[select(&table, &collection).unwrap()]);
    assert_eq!(value["breakpoints"].as_array().unwrap().len() as u64, dim + 1);
    assert_eq!(value["criterion"], "vfcv:V=5");

    let ideal = vfold(&["select", "--data", path_str(&data), "--criterion", "ideal", "--setting", "uniform"]);
    assert_eq!(code(&ideal), 0);
    assert_eq!(code(&vfold(&["select", "--data", path_str(&data), "--criterion", "ideal"])), 2);

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0.1\n0.2\nzero point three\n").unwrap();
    let res = vfold(&["select", "--data", path_str(&bad), "--criterion", "vfcv:V=2"]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("line 3"));

    let outside = dir.path().join("out.txt");
    std::fs::write(&outside, "0.1\n1.5\n").unwrap();
    let res = vfold(&["select", "--data", path_str(&outside), "--criterion", "vfcv:V=2"]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("line 2"));

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&vfold(&["select", "--data", path_str(&empty), "--criterion", "vfcv:V=2"])), 1);
    let missing = dir.path().join("nope.txt");
    assert_eq!(code(&vfold(&["select", "--data", path_str(&missing), "--criterion", "vfcv:V=2"])), 1);
}
