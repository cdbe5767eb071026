use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use qkinetic::config::{
    parse_config, to_toml, CondensateSection, GasSection, InitialSection, LatticeSection,
    NumericsSection, RunConfig,
};

const SODIUM: [&str; 10] = [
    "--temperature",
    "2e-6",
    "--scattering-length",
    "4.9e-9",
    "--mean-free-path",
    "0.42",
    "--density",
    "1e20",
    "--cell-length",
    "1e-5",
];

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkinetic"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn digest(m: &serde_json::Value, file: &str) -> String {
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["file"] == file)
        .unwrap_or_else(|| panic!("{file} missing from manifest"))["sha256"]
        .as_str()
        .unwrap()
        .to_string()
}

/// `(series, time, observable, index, value)` rows of a long-format file.
fn long_rows(path: &Path) -> Vec<(String, String, String, String, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        r.headers().unwrap(),
        vec!["series", "time", "observable", "index", "value"]
    );
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (
                rec[0].to_string(),
                rec[1].to_string(),
                rec[2].to_string(),
                rec[3].to_string(),
                rec[4].parse().unwrap(),
            )
        })
        .collect()
}

fn out_arg(dir: &Path, name: &str) -> (PathBuf, String) {
    let p = dir.join(name);
    let s = p.to_str().unwrap().to_string();
    (p, s)
}

#[test]
fn regime_sodium_table() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, o) = out_arg(tmp.path(), "r");
    let mut args = vec!["regime", "--out", &o];
    args.extend(SODIUM);
    let out = run(&args, tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("4.5634e-7"), "{stdout}");

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("regime.json")).unwrap()).unwrap();
    let lt = json["lambda_t"].as_f64().unwrap();
    let lc = json["critical_cell_length"].as_f64().unwrap();
    assert!((lt / 4.8e-7 - 1.0).abs() < 0.1, "{lt}");
    assert!((lc / 1e-5 - 1.0).abs() < 0.1, "{lc}");
    let csv_lt = long_rows(&dir.join("regime.csv"))
        .into_iter()
        .find(|r| r.2 == "lambda_t")
        .unwrap()
        .4;
    assert_eq!(csv_lt, lt);
    let m = manifest(&dir);
    assert_eq!(m["command"], "regime");
    for a in m["outputs"].as_array().unwrap() {
        let f = a["file"].as_str().unwrap();
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn kmc_is_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let common = [
        "kmc",
        "--seed",
        "11",
        "--box-length",
        "1e-5",
        "--t-end",
        "2",
        "--trajectories",
        "4",
        "--samples",
        "20",
    ];
    let mut digests = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let (dir, o) = out_arg(tmp.path(), name);
        let mut args = common.to_vec();
        args.extend(["--threads", threads, "--out", &o]);
        let out = run(&args, tmp.path());
        assert!(out.status.success(), "{}", stderr(&out));
        let m = manifest(&dir);
        assert_eq!(m["seed"], 11);
        assert_eq!(m["seed_source"], "given");
        digests.push((digest(&m, "kmc.csv"), digest(&m, "kmc_mean.csv")));
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[0], digests[2]);
}

#[test]
fn kmc_conserves_particles_and_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, o) = out_arg(tmp.path(), "k");
    let out = run(
        &[
            "kmc",
            "--seed",
            "2",
            "--box-length",
            "1e-5",
            "--t-end",
            "3",
            "--out",
            &o,
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = long_rows(&dir.join("kmc.csv"));
    for obs in ["particles", "energy"] {
        let v: Vec<f64> = rows.iter().filter(|r| r.2 == obs).map(|r| r.4).collect();
        assert!(v.len() > 1, "{obs}");
        assert!(v.iter().all(|&x| x == v[0]), "{obs} drifted");
    }
}

#[test]
fn uu_equilibrium_stays_put() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, o) = out_arg(tmp.path(), "u");
    let out = run(
        &[
            "uu",
            "--box-length",
            "1e-5",
            "--t-end",
            "3",
            "--beta",
            "0.8",
            "--mu",
            "-1",
            "--out",
            &o,
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = long_rows(&dir.join("uu.csv"));
    let occ: Vec<_> = rows.iter().filter(|r| r.2 == "occupation").collect();
    let t0 = &occ[0].1;
    let t_last = &occ.last().unwrap().1;
    assert_ne!(t0, t_last);
    let at = |t: &str| -> Vec<(String, f64)> {
        occ.iter()
            .filter(|r| r.1 == t)
            .map(|r| (r.3.clone(), r.4))
            .collect()
    };
    let (first, last) = (at(t0), at(t_last));
    assert_eq!(first.len(), last.len());
    assert!(!first.is_empty());
    for ((i, a), (j, b)) in first.iter().zip(&last) {
        assert_eq!(i, j);
        assert!((a - b).abs() <= 1e-8, "mode {i}: {a} -> {b}");
    }
}

#[test]
fn negative_temperature_is_a_config_error_naming_t() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        "command = \"regime\"\n[gas]\ntemperature = -1.0\nscattering_length = 2.75e-9\n\
         density = 1e20\ncell_length = 1e-5\n",
    )
    .unwrap();
    let out = run(&["regime", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("invalid T"), "{err}");
    assert!(!tmp.path().join("qkinetic-out").exists());
}

#[test]
fn unknown_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[gas]\ntemprature = 1e-6\n").unwrap();
    let out = run(&["regime", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("temprature"), "{}", stderr(&out));
}

#[test]
fn missing_parameter_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["kmc", "--t-end", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("box_length"), "{}", stderr(&out));
}

#[test]
fn command_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "command = \"uu\"\n").unwrap();
    let out = run(&["kmc", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flag_overrides_file_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, o) = out_arg(tmp.path(), "s");
    let cfg = tmp.path().join("c.toml");
    fs::write(
        &cfg,
        "command = \"kmc\"\nseed = 7\n[lattice]\nbox_length = 1e-5\n[numerics]\nt_end = 0.5\n",
    )
    .unwrap();
    let out = run(
        &[
            "kmc",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            &o,
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(manifest(&dir)["seed"], 9);
    let echoed = parse_config(&fs::read_to_string(dir.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.seed, Some(9));
    assert_eq!(echoed.lattice.box_length, Some(1e-5));

    // rerunning the echoed config reproduces the data
    let (dir2, o2) = out_arg(tmp.path(), "s2");
    let out = run(
        &[
            "kmc",
            "--config",
            dir.join("config.toml").to_str().unwrap(),
            "--out",
            &o2,
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        digest(&manifest(&dir), "kmc.csv"),
        digest(&manifest(&dir2), "kmc.csv")
    );
}

#[test]
fn generated_seed_is_reported_and_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, o) = out_arg(tmp.path(), "g");
    let out = run(
        &["kmc", "--box-length", "1e-5", "--t-end", "0.5", "--out", &o],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(&dir);
    assert_eq!(m["seed_source"], "generated");
    let seed = m["seed"].as_u64().unwrap();
    assert!(stderr(&out).contains(&seed.to_string()));
}

#[test]
fn capacity_guard_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, o) = out_arg(tmp.path(), "x");
    let out = run(
        &[
            "kmc",
            "--box-length",
            "1e-5",
            "--t-end",
            "1",
            "--stationary",
            "--out",
            &o,
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("capacity"));
}

#[test]
fn writes_stay_inside_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["basis-check", "--cell-length", "1e-5"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let top: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(top, vec!["qkinetic-out"]);
    let dir = tmp.path().join("qkinetic-out");
    let m = manifest(&dir);
    let mut listed: Vec<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["file"].as_str().unwrap().to_string())
        .collect();
    listed.push("manifest.json".into());
    listed.sort();
    let mut present: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    present.sort();
    assert_eq!(listed, present);
}

#[test]
fn condensate_runs_and_relaxes() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir, o) = out_arg(tmp.path(), "c");
    let out = run(
        &[
            "condensate",
            "--box-length",
            "2e-6",
            "--temperature",
            "1e-6",
            "--scattering-length",
            "2.75e-9",
            "--alpha",
            "-0.5",
            "--samples",
            "10",
            "--out",
            &o,
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = long_rows(&dir.join("condensate.csv"));
    let phi: Vec<f64> = rows
        .iter()
        .filter(|r| r.2 == "phi_abs")
        .map(|r| r.4)
        .collect();
    assert!(phi.windows(2).all(|w| w[1] <= w[0]), "phi grows: {phi:?}");
    assert!(phi.last().unwrap() < &1e-6);
}

fn opt<T: std::fmt::Debug + Clone + 'static>(
    s: impl Strategy<Value = T> + 'static,
) -> BoxedStrategy<Option<T>> {
    proptest::option::of(s).boxed()
}

fn finite() -> BoxedStrategy<f64> {
    prop_oneof![-1e30..1e30f64, -1.0..1.0f64].boxed()
}

prop_compose! {
    fn gas()(mass in opt(finite()), a in opt(finite()), t in opt(finite()),
             rho in opt(finite()), lc in opt(finite()), mfp in opt(finite())) -> GasSection {
        GasSection {
            mass, scattering_length: a, temperature: t, density: rho,
            cell_length: lc, mean_free_path: mfp,
        }
    }
}

prop_compose! {
    fn numerics()(gamma in opt(finite()), t_end in opt(finite()), samples in opt(0usize..1000),
                  trajectories in opt(any::<u64>()), threshold in opt(finite()),
                  tolerance in opt(finite()), eta in opt(finite()),
                  stationary in opt(any::<bool>())) -> NumericsSection {
        NumericsSection {
            gamma, t_end, samples, trajectories, threshold, tolerance, eta, stationary,
        }
    }
}

prop_compose! {
    fn config()(seed in opt(any::<u64>()), threads in opt(0usize..64),
                gas in gas(), numerics in numerics(),
                box_length in opt(finite()), z_max in opt(0u32..10),
                per_mode in opt(finite()),
                occupations in opt(proptest::collection::vec(finite(), 0..6)),
                beta in opt(finite()), mu in opt(finite()),
                alpha in opt(finite()), rho0 in opt(finite()),
                phi in opt((finite(), finite())), dissipation in opt(any::<bool>()),
                out in opt("[a-z][a-z0-9_/]{0,12}")) -> RunConfig {
        RunConfig {
            command: None,
            seed,
            threads,
            out: out.map(PathBuf::from),
            gas,
            lattice: LatticeSection { box_length, z_max },
            numerics,
            initial: InitialSection { per_mode, occupations, beta, mu },
            condensate: CondensateSection {
                alpha, rho0,
                phi_re: phi.map(|p| p.0),
                phi_im: phi.map(|p| p.1),
                dissipation,
            },
        }
    }
}

proptest! {
    #[test]
    fn config_round_trips_through_toml(c in config()) {
        let text = to_toml(&c);
        prop_assert_eq!(parse_config(&text).unwrap(), c);
    }
}
