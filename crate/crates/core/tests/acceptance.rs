//! Acceptance suite (custom harness). Prints one PASS/FAIL line per
//! criterion and exits non-zero if any criterion fails.

use std::fs;

use cornerlab::cli::checks::{self, Report, Status};
use cornerlab::cli::main_with_args;
use cornerlab::complex::CellComplex;
use cornerlab::models::{self, ModelSpec};
use cornerlab::par;
use cornerlab::tol::Tolerances;

const SEED: u64 = 20240611;
const SAMPLES: usize = 100;

/// Bounds the criteria are stated with. Must equal the version-1 defaults.
fn pinned() -> Tolerances {
    Tolerances {
        version: 1,
        construction: 1e-12,
        exact: 1e-13,
        property: 1e-10,
        decomposition: 1e-13,
        flow: 1e-12,
        hodge: 1e-10,
        solver: 1e-10,
        compat: 1e-9,
        rank: 1e-10,
        angle: 1e-8,
        reduced: 1e-8,
        jacobi: 1e-11,
        brst: 1e-12,
        ultralocal: 1e-12,
        square_abelian: 1e-8,
        square_flow: 1e-6,
        extension: 1e-10,
        slope_target: 2.0,
        slope_window: 0.3,
    }
}

fn cases() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new("maxwell", "interval", 8),
        ModelSpec::new("maxwell", "disk", 2),
        ModelSpec::new("maxwell", "annulus", 1),
        ModelSpec::new("ym_su2", "interval", 4),
        ModelSpec::new("ym_su2", "disk", 1),
        ModelSpec::new("theta_ym", "disk", 2).with_theta(0.7),
        ModelSpec::new("chern_simons_disk", "disk", 1),
        ModelSpec::new("chern_simons_disk", "disk", 2),
        ModelSpec::new("bf_corner", "disk", 1),
    ]
}

struct Criterion {
    id: usize,
    title: &'static str,
    checks: &'static [&'static str],
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "decomposition H = H0 + h, residual <= 1e-13", checks: &["decomposition"] },
    Criterion { id: 2, title: "local Hamiltonian flow, residual <= 1e-12", checks: &["flow_residual"] },
    Criterion { id: 3, title: "Hodge split <= 1e-10, Neumann kernel = b0 dim g", checks: &["hodge_split"] },
    Criterion { id: 4, title: "Gauss law <= 1e-10, incompatible flux rejected", checks: &["gauss_law"] },
    Criterion { id: 5, title: "constraint ideal, justness and stability <= 1e-10", checks: &["annihilators", "justness"] },
    Criterion { id: 6, title: "kernel identification, angles <= 1e-8, gap >= 1", checks: &["kernel_identification"] },
    Criterion { id: 7, title: "second stage and basicness <= 1e-8", checks: &["reduced_form", "sector_form"] },
    Criterion { id: 8, title: "KKS Jacobi and CME <= 1e-11, loop order 2 +- 0.3", checks: &["kks_jacobi", "corner_cme", "loop_cocycle"] },
    Criterion { id: 9, title: "BRST Q^2 <= 1e-12", checks: &["brst"] },
    Criterion { id: 10, title: "ultralocal difference <= 1e-12", checks: &["ultralocal"] },
    Criterion { id: 11, title: "theta: residuals equal to 1e-13, label shifts", checks: &["theta_invariance"] },
    Criterion { id: 12, title: "superselection square 1e-8 / 1e-6 over 50", checks: &["superselection_square"] },
    Criterion { id: 13, title: "central extension orbits <= 1e-10", checks: &["central_extension"] },
];

fn run_one(check: &str, spec: &ModelSpec, tol: &Tolerances) -> Report {
    let def = checks::lookup(check).expect("registered check");
    let cx = CellComplex::build(&spec.mesh, spec.n).expect("mesh");
    let alg = spec.algebra().expect("algebra");
    let model = if spec.name == "bf_corner" { None } else { Some(models::instantiate(spec).expect("model")) };
    checks::run_check(def, spec, model.as_deref(), &cx, &alg, SEED, SAMPLES, tol)
}

fn label(spec: &ModelSpec) -> String {
    format!("{}/{}({})", spec.name, spec.mesh, spec.n)
}

/// Passes when no report fails or errors and at least one report passes.
fn judge(reports: &[(String, Report)]) -> (bool, Vec<String>) {
    let mut notes = vec![];
    let mut any_pass = false;
    let mut ok = true;
    for (case, r) in reports {
        match r.status {
            Status::Pass => any_pass = true,
            Status::Skipped => {}
            Status::Fail => {
                ok = false;
                for a in r.assertions.iter().filter(|a| !a.ok) {
                    notes.push(format!("{case} {}: {} = {} (want {} {})", r.check, a.metric, a.value, a.relation, a.bound));
                }
            }
            Status::Error => {
                ok = false;
                notes.push(format!("{case} {}: error {}", r.check, r.reason.clone().unwrap_or_default()));
            }
        }
    }
    if !any_pass {
        notes.push("no applicable case ran".into());
    }
    (ok && any_pass, notes)
}

fn determinism() -> (bool, Vec<String>) {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 11\nsuite = [\"decomposition\", \"flow_residual\", \"gauss_law\", \"superselection_square\", \"kks_jacobi\"]\n\
         formats = [\"json\", \"csv\"]\nsamples = 20\n[model]\nname = \"maxwell\"\nmesh = \"disk\"\nn = 1\n",
    )
    .unwrap();
    let mut outs = vec![];
    for (k, jobs) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let code = main_with_args([
            "cornerlab",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        if code != 0 {
            return (false, vec![format!("run {k} exited with {code}")]);
        }
        outs.push(out);
    }
    let mut names: Vec<_> = fs::read_dir(&outs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut notes = vec![];
    for n in &names {
        let a = fs::read(outs[0].join(n)).unwrap();
        let b = fs::read(outs[1].join(n)).unwrap_or_default();
        if a != b {
            notes.push(format!("{} differs", n.to_string_lossy()));
        }
    }
    if names.len() != 10 {
        notes.push(format!("expected 10 report files, found {}", names.len()));
    }
    (notes.is_empty(), notes)
}

fn main() {
    let tol = pinned();
    assert_eq!(tol, Tolerances::default(), "tolerance table drifted from version 1");

    let specs = cases();
    let mut jobs = vec![];
    for (ci, c) in CRITERIA.iter().enumerate() {
        for check in c.checks {
            for (si, _) in specs.iter().enumerate() {
                jobs.push((ci, *check, si));
            }
        }
    }
    let reports = par::map_indexed(jobs.len(), |j| {
        let (_, check, si) = jobs[j];
        run_one(check, &specs[si], &tol)
    });

    let mut failed = vec![];
    for (ci, c) in CRITERIA.iter().enumerate() {
        let mine: Vec<(String, Report)> = jobs
            .iter()
            .zip(&reports)
            .filter(|((cj, _, _), _)| *cj == ci)
            .map(|((_, _, si), r)| (label(&specs[*si]), r.clone()))
            .collect();
        let (ok, notes) = judge(&mine);
        let ran = mine.iter().filter(|(_, r)| r.status != Status::Skipped).count();
        println!("criterion {:>2} {} {} [{} cases]", c.id, if ok { "PASS" } else { "FAIL" }, c.title, ran);
        for n in &notes {
            println!("    {n}");
        }
        if !ok {
            failed.push(c.id);
        }
    }
    let (ok, notes) = determinism();
    println!("criterion 14 {} CLI reports byte-identical for equal seeds", if ok { "PASS" } else { "FAIL" });
    for n in &notes {
        println!("    {n}");
    }
    if !ok {
        failed.push(14);
    }
    if failed.is_empty() {
        println!("acceptance: all 14 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
