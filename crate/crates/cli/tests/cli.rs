use std::path::Path;
use std::process::Command;

use q2q1_amg_cli::config::ProblemSource;
use q2q1_amg_cli::experiment::{build_hierarchy, load_generated, Rows};
use q2q1_amg_cli::files::{export_problem, import_problem, read_matrix, MANIFEST};
use q2q1_amg_cli::{run, Config, Mode, Options};

fn config(text: &str) -> q2q1_amg_cli::Resolved {
    Config::from_toml(text).unwrap().resolve().unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_q2q1-amg"))
}

/// CSV with the wall-clock columns removed.
fn without_timings(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !header[i].ends_with("_s")).collect();
    let pick = |l: &str| {
        let cells: Vec<&str> = l.split(',').collect();
        keep.iter().map(|&i| cells[i]).collect::<Vec<_>>().join(",")
    };
    std::iter::once(pick(&header.join(","))).chain(lines.map(pick)).collect::<Vec<_>>().join("\n")
}

#[test]
fn export_import_round_trip_keeps_iteration_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[problem]\nrefinements = [8]\n");
    let ProblemSource::Generated { domain, .. } = cfg.source else { unreachable!() };
    let original = load_generated(domain, 8, 1.0, false, &cfg).unwrap();
    let written = export_problem(dir.path(), &original).unwrap();
    for name in MANIFEST {
        assert!(dir.path().join(name).is_file(), "{name} missing");
        assert!(written.contains(&dir.path().join(name)));
    }
    let b = read_matrix(&dir.path().join("B.mtx")).unwrap();
    assert_eq!(b.n_rows(), original.coords_p.len());
    assert_eq!(b.n_cols(), 2 * original.coords_v.len());

    let imported = import_problem(dir.path()).unwrap();
    assert_eq!(imported.system, original.system);
    assert_eq!(imported.coords_v, original.coords_v);
    assert_eq!(imported.masses.as_ref().unwrap().0, original.masses.as_ref().unwrap().0);

    for s in &cfg.smoothers {
        let params = cfg.hierarchy.with_smoother(s.kind, s.sweeps, s.sweeps);
        let rhs = original.system.rhs();
        let x0 = vec![0.0; rhs.len()];
        let a = build_hierarchy(&original, &params).unwrap().solve(&rhs, &x0, &cfg.gmres).unwrap();
        let b = build_hierarchy(&imported, &params).unwrap().solve(&rhs, &x0, &cfg.gmres).unwrap();
        assert!(a.converged);
        assert_eq!(a.iterations, b.iterations, "{}", s.name);
        assert_eq!(a.x, b.x);
    }
}

#[test]
fn import_mode_reads_an_exported_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config("[problem]\nrefinements = [8]\n[smoother]\nnames = [\"vanka\"]\n");
    let first = run(Mode::Stokes, &cfg, &Options { out: Some(out.clone()), dump_matrices: true, dump_splitting: false }).unwrap();
    let import_dir = out.join("cavity-m8");
    let text = format!("[problem]\ndomain = \"import\"\nimport_dir = {:?}\n[smoother]\nnames = [\"vanka\"]\n", import_dir);
    let second = run(Mode::Stokes, &config(&text), &Options::default()).unwrap();
    let (Rows::Runs(a), Rows::Runs(b)) = (&first.rows, &second.rows) else { panic!("run rows expected") };
    assert_eq!(a[0].iterations, b[0].iterations);
    assert_eq!(a[0].levels, b[0].levels);
    assert_eq!(a[0].complexity, b[0].complexity);
}

#[test]
fn stokes_sweep_table_has_the_expected_columns() {
    let cfg = config("[problem]\nrefinements = [8, 16]\n");
    let report = run(Mode::Stokes, &cfg, &Options::default()).unwrap();
    let table = report.table();
    let header = table.lines().next().unwrap();
    for col in ["Dofs", "Complexity", "l_max", "Its", "Setup", "Solve"] {
        assert!(header.contains(col), "{header}");
    }
    let Rows::Runs(rows) = &report.rows else { panic!() };
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].dofs, 659);
    assert_eq!(rows[2].dofs, 2467);
    assert!(rows.iter().all(|r| r.converged));
}

#[test]
fn tau1_sweep_gives_one_row_per_value() {
    let cfg = config("[problem]\nrefinements = [8]\n[smoother]\nnames = [\"braess-sarazin\"]\n");
    let report = run(Mode::Tau1Sweep, &cfg, &Options::default()).unwrap();
    let csv = report.csv().unwrap();
    let taus: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(taus, ["0.0", "0.05", "0.1", "0.15", "0.2", "0.25"]);
    assert!(report.table().lines().next().unwrap().contains("tau1"));
}

#[test]
fn navier_stokes_mode_reports_picard_steps() {
    let cfg = config("[problem]\nrefinements = [8]\nviscosity = 0.1\n[smoother]\nnames = [\"vanka\"]\n");
    let report = run(Mode::NavierStokes, &cfg, &Options::default()).unwrap();
    let Rows::Runs(rows) = &report.rows else { panic!() };
    assert!(rows[0].converged);
    assert!(rows[0].picard_steps.unwrap() >= 1);
}

#[test]
fn reports_are_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("[problem]\nrefinements = [8]\n");
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        run(Mode::Stokes, &cfg, &Options { out: Some(out.clone()), ..Default::default() }).unwrap();
        std::fs::read_to_string(out.join("stokes.csv")).unwrap()
    };
    let (a, b) = (read("a"), read("b"));
    assert_eq!(without_timings(&a), without_timings(&b));
}

#[test]
fn binary_writes_reports_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, "[problem]\nrefinements = [8]\n[smoother]\nnames = [\"ilu\"]\n").unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["--mode", "stokes", "--dump-matrices", "--dump-splitting", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("cavity-m8"));
    for f in ["stokes.csv", "stokes.txt", "cavity-m8/A.mtx", "cavity-m8/levels/P_0.mtx", "cavity-m8/levels/C_pressure_0.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let c = std::fs::read_to_string(out.join("cavity-m8/levels/C_pressure_0.txt")).unwrap();
    let pattern = read_matrix(&out.join("cavity-m8/levels/pattern_pressure_0.mtx")).unwrap();
    assert_eq!(c.lines().count(), pattern.n_cols());
}

#[test]
fn binary_rejects_bad_configs_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    std::fs::write(&cfg_path, "[smoother]\nnames = [\"vanka\", \"chebyshev\"]\n").unwrap();
    let out = bin().arg("--config").arg(&cfg_path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("smoother.names[1]") && err.contains("chebyshev"), "{err}");

    let out = bin().arg("--config").arg(Path::new("/nonexistent/run.toml")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("/nonexistent/run.toml"));
}

#[test]
fn mac1d_mode_reports_both_placements() {
    let cfg = config("");
    let report = run(Mode::Mac1d, &cfg, &Options::default()).unwrap();
    let Rows::Mac(rows) = &report.rows else { panic!() };
    assert_eq!(rows[0].interior_stencil, "-1 0 2 0 -1");
    assert!(rows[0].sign_changes > rows[1].sign_changes);
}
