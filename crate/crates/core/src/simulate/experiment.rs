//! Monte Carlo drivers: coverage of the certificate, the distribution-shift
//! experiment and ρ sweeps.
//!
//! Each run draws its training batch from stream `2r + 1` and its test batch
//! from stream `2r + 2`, so runs are independent of each other and of the
//! order in which they execute. A failing fit is recorded and the remaining
//! runs continue.

use serde::{Deserialize, Serialize};

use super::estimate::{empirical_adv_violation_with, empirical_violation_with};
use super::{simulate_stream, BenchmarkConfig};
use crate::certify::{adversarial_complexity_with, certificate, ood_bound, Certificate};
use crate::error::{Error, Result};
use crate::fit::{fit_with, FitConfig, FitResult};
use crate::par::{self, Execution};

/// What every run of an experiment does: fit `fit` on `n_train`
/// trajectories, certify at confidence `1 − beta` and test on `n_test`
/// fresh trajectories. The fit's perturbation model is also the adversary
/// of the empirical estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub fit: FitConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub beta: f64,
    pub tol_active: f64,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Input("n_train and n_test must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Input(format!("beta = {} must lie in (0, 1)", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub repeat: usize,
    pub s_star: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub v_hat_adv: f64,
    /// `v_hat_adv <= eps_hi`; expected to fail in at most a β fraction of runs.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
    pub failures: Vec<RunFailure>,
}

impl CoverageTable {
    pub fn passes(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }
}

struct Certified {
    fit: FitResult,
    cert: Certificate,
}

fn train(cfg: &BenchmarkConfig, spec: &ExperimentSpec, stream: u64, exec: Execution) -> Result<Certified> {
    let batch = simulate_stream(cfg, spec.n_train, stream, exec)?;
    let fit = fit_with(&batch, &spec.fit, exec)?;
    let report = adversarial_complexity_with(&fit, &batch, &spec.fit.perturbation, spec.tol_active, exec)?;
    let cert = certificate(spec.n_train, spec.beta, &report)?;
    Ok(Certified { fit, cert })
}

fn split<T>(runs: Vec<Result<T>>) -> (Vec<T>, Vec<RunFailure>) {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (index, r) in runs.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(RunFailure {
                index,
                error: e.to_string(),
            }),
        }
    }
    (ok, failures)
}

pub fn coverage_experiment(cfg: &BenchmarkConfig, spec: &ExperimentSpec, n_repeats: usize) -> Result<CoverageTable> {
    coverage_experiment_with(cfg, spec, n_repeats, Execution::default())
}

pub fn coverage_experiment_with(
    cfg: &BenchmarkConfig,
    spec: &ExperimentSpec,
    n_repeats: usize,
    exec: Execution,
) -> Result<CoverageTable> {
    cfg.validate()?;
    spec.validate()?;
    if n_repeats == 0 {
        return Err(Error::Input("n_repeats must be at least 1".into()));
    }
    let runs = par::map_indices(n_repeats, exec, |r| {
        let stream = 2 * r as u64;
        let c = train(cfg, spec, stream + 1, exec)?;
        let test = simulate_stream(cfg, spec.n_test, stream + 2, exec)?;
        let v = empirical_adv_violation_with(&c.fit.tube, &test, &spec.fit.perturbation, exec)?;
        Ok(CoverageRow {
            repeat: r,
            s_star: c.cert.s_star,
            eps_lo: c.cert.eps_lo,
            eps_hi: c.cert.eps_hi,
            v_hat_adv: v.v_hat,
            pass: v.v_hat <= c.cert.eps_hi,
        })
    });
    let (rows, failures) = split(runs);
    Ok(CoverageTable { rows, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub experiment: usize,
    pub certificate: Certificate,
    /// `min(1, eps_hi + mu_tilde / R)`.
    pub bound: f64,
    /// Empirical exclusion of unperturbed shifted test trajectories.
    pub v_hat: f64,
    /// The same test trajectories under the adversary.
    pub v_hat_adv: f64,
    /// `v_hat <= bound`.
    pub pass: bool,
}

/// Fits and certifies on `nominal` data, then tests on data drawn from
/// `shifted` with its own seed. Experiment `e` uses streams `2e + 1` and
/// `2e + 2`.
pub fn ood_experiment(
    nominal: &BenchmarkConfig,
    shifted: &BenchmarkConfig,
    spec: &ExperimentSpec,
    mu_tilde: f64,
    experiment: usize,
) -> Result<OodReport> {
    ood_experiment_with(nominal, shifted, spec, mu_tilde, experiment, Execution::default())
}

pub fn ood_experiment_with(
    nominal: &BenchmarkConfig,
    shifted: &BenchmarkConfig,
    spec: &ExperimentSpec,
    mu_tilde: f64,
    experiment: usize,
    exec: Execution,
) -> Result<OodReport> {
    nominal.validate()?;
    shifted.validate()?;
    spec.validate()?;
    if nominal.horizon != shifted.horizon {
        return Err(Error::Input(format!(
            "nominal horizon {} differs from shifted horizon {}",
            nominal.horizon, shifted.horizon
        )));
    }
    let stream = 2 * experiment as u64;
    let c = train(nominal, spec, stream + 1, exec)?;
    let cert = ood_bound(&c.cert, mu_tilde, spec.fit.perturbation.radius)?;
    let bound = cert.ood.as_ref().map(|o| o.bound).unwrap_or(cert.eps_hi);
    let test = simulate_stream(shifted, spec.n_test, stream + 2, exec)?;
    let v = empirical_violation_with(&c.fit.tube, &test, exec)?;
    let v_adv = empirical_adv_violation_with(&c.fit.tube, &test, &spec.fit.perturbation, exec)?;
    Ok(OodReport {
        experiment,
        certificate: cert,
        bound,
        v_hat: v.v_hat,
        v_hat_adv: v_adv.v_hat,
        pass: v.v_hat <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub size_total: f64,
    pub slack_total: f64,
    /// `size_total / size_total(ρ₀)`; `None` when the first fit failed or
    /// had zero size.
    pub size_rel: Option<f64>,
    pub s_star: usize,
    pub eps_hi: f64,
    pub v_hat_adv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Indices refer to positions in the ρ list.
    pub failures: Vec<RunFailure>,
}

/// One fit per ρ on a shared training batch (stream 1) and a shared test
/// batch (stream 2). The list must be nonempty and ascending.
pub fn rho_sweep(cfg: &BenchmarkConfig, spec: &ExperimentSpec, rhos: &[f64]) -> Result<SweepTable> {
    rho_sweep_with(cfg, spec, rhos, Execution::default())
}

pub fn rho_sweep_with(
    cfg: &BenchmarkConfig,
    spec: &ExperimentSpec,
    rhos: &[f64],
    exec: Execution,
) -> Result<SweepTable> {
    cfg.validate()?;
    spec.validate()?;
    if rhos.is_empty() {
        return Err(Error::Input("rho list is empty".into()));
    }
    if rhos.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Input("rho list must be sorted ascending".into()));
    }
    let batch = simulate_stream(cfg, spec.n_train, 1, exec)?;
    let test = simulate_stream(cfg, spec.n_test, 2, exec)?;
    let model = &spec.fit.perturbation;
    let runs = par::map_indices(rhos.len(), exec, |j| {
        let fit_cfg = spec.fit.clone().with_rho(rhos[j]);
        let fit = fit_with(&batch, &fit_cfg, exec)?;
        let report = adversarial_complexity_with(&fit, &batch, model, spec.tol_active, exec)?;
        let cert = certificate(spec.n_train, spec.beta, &report)?;
        let v = empirical_adv_violation_with(&fit.tube, &test, model, exec)?;
        Ok(SweepRow {
            rho: rhos[j],
            size_total: fit.size_total(),
            slack_total: fit.slack_total(),
            size_rel: None,
            s_star: cert.s_star,
            eps_hi: cert.eps_hi,
            v_hat_adv: v.v_hat,
        })
    });
    let first = match &runs[0] {
        Ok(row) if row.size_total != 0.0 => Some(row.size_total),
        _ => None,
    };
    let (mut rows, failures) = split(runs);
    for row in &mut rows {
        row.size_rel = first.map(|s0| row.size_total / s0);
    }
    Ok(SweepTable { rows, failures })
}
