use std::path::{Path, PathBuf};

use reachtube::certify::{adversarial_complexity, certificate, epsilon_roots, ood_bound};
use reachtube::fit::fit;
use reachtube::par::{self, Execution};
use reachtube::simulate::{
    coverage_experiment, empirical_adv_violation, ood_experiment_with, rho_sweep, simulate_benchmark,
    ExperimentSpec, RunFailure,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::io::{self, fmt_f64, Table};
use crate::results::{Provenance, ResultsDocument, TrajectorySource, TOOL_VERSION};
use crate::settings::{Options, Preset};

const DEFAULT_SIMULATE_N: usize = 1000;
const DEFAULT_N_TRAIN: usize = 200;
const DEFAULT_N_TEST: usize = 2000;
const DEFAULT_REPEATS: usize = 20;
const DEFAULT_EXPERIMENTS: usize = 5;

fn hash_of<T: Serialize>(value: &T) -> String {
    io::sha256_hex(&serde_json::to_vec(value).expect("serializable settings"))
}

fn report_failures(failures: &[RunFailure], what: &str) {
    for f in failures {
        eprintln!("{what} {} failed: {}", f.index, f.error);
    }
}

pub fn simulate(opts: &Options, out: Option<&Path>) -> Result<()> {
    let n = match opts.n.as_deref() {
        None => DEFAULT_SIMULATE_N,
        Some([n]) => *n,
        Some(list) => return Err(CliError::Usage(format!("simulate takes a single --n, got {}", list.len()))),
    };
    let cfg = opts.system();
    let batch = simulate_benchmark(&cfg, n)?;
    io::emit(out, &io::trajectories_to_csv(&batch))?;
    eprintln!("N={} T={} n_x={}", batch.len(), batch.horizon(), batch.dim());
    Ok(())
}

pub fn fit_cmd(opts: &Options, trajectories: &Path, out: Option<&Path>) -> Result<()> {
    let batch = io::read_trajectories(trajectories)?;
    let cfg = opts.fit_config(opts.rho()?, batch.dim())?;
    let source = TrajectorySource {
        path: trajectories.display().to_string(),
        sha256: io::sha256_file(trajectories)?,
        n: batch.len(),
        horizon: batch.horizon(),
        dim: batch.dim(),
    };
    let mut doc = ResultsDocument {
        provenance: Provenance {
            tool_version: TOOL_VERSION.into(),
            config_hash: hash_of(&json!({ "command": "fit", "fit": cfg, "data": source.sha256 })),
            trajectories: source,
            certify_hash: None,
        },
        fit_config: cfg.clone(),
        fit: None,
        size_total: None,
        slack_total: None,
        error: None,
        complexity: None,
        certificate: None,
        validation: Vec::new(),
    };
    match fit(&batch, &cfg) {
        Ok(result) => {
            eprintln!(
                "size_total={} slack_total={} objective={}",
                fmt_f64(result.size_total()),
                fmt_f64(result.slack_total()),
                fmt_f64(result.objective_value)
            );
            doc.size_total = Some(result.size_total());
            doc.slack_total = Some(result.slack_total());
            doc.fit = Some(result);
            io::emit(out, &io::to_json(&doc))
        }
        Err(e) => {
            let err = CliError::from(e);
            if err.exit_code() == 4 {
                doc.error = Some(err.to_string());
                io::emit(out, &io::to_json(&doc))?;
            }
            Err(err)
        }
    }
}

pub fn certify(opts: &Options, results: &Path, test: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let mut doc: ResultsDocument = io::read_json(results)?;
    let fitted = doc
        .fit
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{}: results document holds no fit", results.display())))?;
    let beta = opts.beta()?;
    let tol_active = opts.tol_active()?;

    let source = &doc.provenance.trajectories;
    let data = PathBuf::from(&source.path);
    let batch = io::read_trajectories(&data)?;
    if io::sha256_file(&data)? != source.sha256 {
        return Err(CliError::Usage(format!(
            "{} changed since the fit (SHA-256 mismatch)",
            data.display()
        )));
    }
    let model = &doc.fit_config.perturbation;
    let report = adversarial_complexity(fitted, &batch, model, tol_active)?;
    let mut cert = certificate(batch.len(), beta, &report)?;
    if let Some(mu) = opts.mu_tilde {
        let radius = opts.radius.unwrap_or(model.radius);
        cert = ood_bound(&cert, mu, radius)?;
    }
    eprintln!(
        "s_star={} eps_lo={} eps_hi={}",
        cert.s_star,
        fmt_f64(cert.eps_lo),
        fmt_f64(cert.eps_hi)
    );
    if let Some(path) = test {
        let test_batch = io::read_trajectories(path)?;
        let v = empirical_adv_violation(&fitted.tube, &test_batch, model)?.with_bound(cert.eps_hi);
        eprintln!("v_hat_adv={}", fmt_f64(v.v_hat));
        doc.validation.push(v);
    }
    doc.provenance.certify_hash = Some(hash_of(&json!({
        "command": "certify",
        "beta": beta,
        "tol_active": tol_active,
        "mu_tilde": opts.mu_tilde,
        "radius": opts.radius,
        "test": match test { Some(p) => Some(io::sha256_file(p)?), None => None },
    })));
    doc.complexity = Some(report);
    doc.certificate = Some(cert);
    io::emit(Some(out.unwrap_or(results)), &io::to_json(&doc))
}

fn experiment_spec(opts: &Options, rho: f64) -> Result<ExperimentSpec> {
    Ok(ExperimentSpec {
        fit: opts.fit_config(rho, 2)?,
        n_train: opts.positive("n_train", opts.n_train, DEFAULT_N_TRAIN)?,
        n_test: opts.positive("n_test", opts.n_test, DEFAULT_N_TEST)?,
        beta: opts.beta()?,
        tol_active: opts.tol_active()?,
    })
}

pub fn validate(opts: &Options, out: Option<&Path>) -> Result<()> {
    let cfg = opts.system();
    let spec = experiment_spec(opts, opts.rho()?)?;
    let repeats = opts.positive("repeats", opts.repeats, DEFAULT_REPEATS)?;
    let table = coverage_experiment(&cfg, &spec, repeats)?;
    report_failures(&table.failures, "repeat");
    let mut csv = Table::new(&["repeat", "s_star", "eps_lo", "eps_hi", "v_hat_adv"]);
    for r in &table.rows {
        csv.row(&[
            r.repeat.to_string(),
            r.s_star.to_string(),
            fmt_f64(r.eps_lo),
            fmt_f64(r.eps_hi),
            fmt_f64(r.v_hat_adv),
        ]);
    }
    io::emit(out, &csv.into_string())?;
    eprintln!("v_hat_adv <= eps_hi in {}/{} repeats", table.passes(), repeats);
    all_failed(table.rows.is_empty(), &table.failures)
}

fn all_failed(empty: bool, failures: &[RunFailure]) -> Result<()> {
    match failures.first() {
        Some(f) if empty => Err(CliError::Core(reachtube::Error::Numerical(format!(
            "every run failed; first error: {}",
            f.error
        )))),
        _ => Ok(()),
    }
}

pub fn sweep(opts: &Options, out: Option<&Path>) -> Result<()> {
    let cfg = opts.system();
    let rhos = opts.rhos();
    let spec = experiment_spec(opts, rhos[0])?;
    let table = rho_sweep(&cfg, &spec, &rhos)?;
    report_failures(&table.failures, "rho index");
    let mut csv = Table::new(&["rho", "size_total", "size_rel", "s_star", "eps_hi", "v_hat_adv"]);
    for r in &table.rows {
        csv.row(&[
            fmt_f64(r.rho),
            fmt_f64(r.size_total),
            r.size_rel.map(fmt_f64).unwrap_or_default(),
            r.s_star.to_string(),
            fmt_f64(r.eps_hi),
            fmt_f64(r.v_hat_adv),
        ]);
    }
    io::emit(out, &csv.into_string())?;
    all_failed(table.rows.is_empty(), &table.failures)
}

pub fn epsilon(opts: &Options, out: Option<&Path>) -> Result<()> {
    let ns = opts.n.clone().unwrap_or_else(|| vec![100]);
    let nus = opts.nu.clone().unwrap_or_else(|| vec![0]);
    let betas = opts.betas()?;
    let mut csv = Table::new(&["N", "nu", "beta", "eps_lo", "eps_hi"]);
    for &n in &ns {
        for &nu in &nus {
            if nu > n {
                return Err(CliError::Usage(format!("nu = {nu} exceeds N = {n}")));
            }
            for &beta in &betas {
                let r = epsilon_roots(n, nu, beta)?;
                csv.row(&[n.to_string(), nu.to_string(), fmt_f64(beta), fmt_f64(r.eps_lo), fmt_f64(r.eps_hi)]);
            }
        }
    }
    io::emit(out, &csv.into_string())
}

pub fn ood(opts: &Options, out: Option<&Path>) -> Result<()> {
    let mut opts = opts.clone();
    if opts.preset.is_none() && opts.benchmark.is_none() {
        opts.preset = Some(Preset::PaperSec6b);
    }
    let nominal = opts.system();
    let shifted = opts.shifted_system()?;
    let spec = experiment_spec(&opts, opts.rho()?)?;
    let mu_tilde = opts.mu_tilde()?;
    let experiments = opts.positive("experiments", opts.experiments, DEFAULT_EXPERIMENTS)?;
    let exec = Execution::default();
    let runs = par::map_indices(experiments, exec, |e| {
        ood_experiment_with(&nominal, &shifted, &spec, mu_tilde, e, exec)
    });
    let mut csv = Table::new(&[
        "experiment", "s_star", "eps_lo", "eps_hi", "mu_tilde", "radius", "ood_bound", "v_hat", "v_hat_adv", "pass",
    ]);
    let mut failures = Vec::new();
    for (e, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                let c = &r.certificate;
                csv.row(&[
                    e.to_string(),
                    c.s_star.to_string(),
                    fmt_f64(c.eps_lo),
                    fmt_f64(c.eps_hi),
                    fmt_f64(mu_tilde),
                    fmt_f64(spec.fit.perturbation.radius),
                    fmt_f64(r.bound),
                    fmt_f64(r.v_hat),
                    fmt_f64(r.v_hat_adv),
                    r.pass.to_string(),
                ]);
            }
            Err(err) => failures.push(RunFailure {
                index: e,
                error: err.to_string(),
            }),
        }
    }
    report_failures(&failures, "experiment");
    io::emit(out, &csv.into_string())?;
    all_failed(failures.len() == experiments, &failures)
}
