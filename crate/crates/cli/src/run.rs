//! Executes a scenario and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::value::RawValue;

use nhp_core::certificates::{
    barbalat_verdict, certificate_catalog, fenchel_check, fit_gain, psi_eval, psi_sup,
    robust_gain_inequality_check, sector_estimates_check, verify, wfgs_check, Battery, Certificate,
    CertificateFamily, Form, Origin, Verdict,
};
use nhp_core::composition::{composition_theorem_report, CompositeMode};
use nhp_core::nonlinearity::IntegralLaw;
use nhp_core::signals::uniform_grid;
use nhp_core::systems::{simulate, SystemKind, SystemModel, Trajectory};

use crate::config::{BatteryKind, Check, Diagnostics, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(Diagnostics),
    #[error("{context}: {message}")]
    Simulation { context: String, message: String },
    #[error("{context}: {message}")]
    Analysis { context: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 3 for configuration problems, 4 for simulation or analysis failures,
    /// 5 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Simulation { .. } | CliError::Analysis { .. } => 4,
            CliError::Io { .. } => 5,
        }
    }

    fn analysis(context: impl Into<String>, e: impl std::fmt::Display) -> Self {
        CliError::Analysis {
            context: context.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Fail => "FAIL",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub status: Status,
    pub summary: String,
    pub details: Box<RawValue>,
}

#[derive(Debug, Serialize)]
pub struct ScenarioReport {
    pub title: Option<String>,
    pub system: String,
    pub status: Status,
    pub exit_code: i32,
    pub checks: Vec<CheckResult>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

impl ScenarioReport {
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| format!("{} {} {}", c.check, c.status.as_str(), c.summary))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `check,status,summary` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,status,summary\n");
        for c in &self.checks {
            out.push_str(&format!("{},{},\"{}\"\n", c.check, c.status.as_str(), c.summary.replace('"', "'")));
        }
        out
    }
}

/// Which checks to run and where to write.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Restricts the scenario's checks to these; `None` runs them all.
    pub only: Option<Vec<Check>>,
    /// Checks to run when the restriction leaves nothing.
    pub fallback: Vec<Check>,
    pub workers: usize,
    /// Writes `trajectory.csv` even when no check needs the trajectory.
    pub always_simulate: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            only: None,
            fallback: Vec::new(),
            workers: nhp_core::default_workers(),
            always_simulate: false,
        }
    }
}

fn raw<T: Serialize>(value: &T) -> Box<RawValue> {
    let text = serde_json::to_string(value).expect("report serializes");
    RawValue::from_string(text).expect("serializer emits valid JSON")
}

fn write(dir: &Path, name: &str, contents: &str, artifacts: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
    artifacts.push(name.to_string());
    Ok(())
}

fn certificate(cfg: &ScenarioConfig, form: Form) -> Result<Certificate, CliError> {
    let gain = match form {
        Form::Nhp => cfg.certificate.nhp_gain,
        Form::Anhp => cfg.certificate.anhp_gain,
    };
    let sys = &cfg.system;
    let built = match gain {
        Some(g) => CertificateFamily::for_system(sys, form).and_then(|f| f.build(sys, g, Origin::Fitted)),
        None => certificate_catalog(sys, form),
    };
    built.map_err(|e| CliError::analysis(format!("{} certificate", form.as_str()), e))
}

fn battery(cfg: &ScenarioConfig, workers: usize) -> Battery {
    let b = &cfg.battery;
    let mut out = match b.kind {
        BatteryKind::Standard => Battery::standard(),
        BatteryKind::Sines => Battery::sines(),
        BatteryKind::ConstantTail => {
            Battery::constant_tail(nhp_core::certificates::barbalat_horizon(&cfg.system))
        }
    };
    if let Some(h) = b.horizon {
        out = out.with_horizon(h);
    }
    if let Some(cap) = b.output_cap {
        out = out.with_output_cap(cap);
    }
    out.with_workers(workers)
}

/// Runs the requested checks, writes artifacts into `opts.out_dir` and
/// returns the report. The exit code is 0 when every check passes, 1 on any
/// FAIL and 2 when the worst outcome is INCONCLUSIVE.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioReport, CliError> {
    let mut checks: Vec<Check> = match &opts.only {
        Some(only) => cfg.checks.iter().copied().filter(|c| only.contains(c)).collect(),
        None => cfg.checks.clone(),
    };
    if checks.is_empty() {
        checks = opts.fallback.clone();
    }
    fs::create_dir_all(&opts.out_dir).map_err(|source| CliError::Io {
        path: opts.out_dir.clone(),
        source,
    })?;
    let mut artifacts = Vec::new();
    let traj = if opts.always_simulate || checks.iter().any(|c| c.needs_trajectory()) {
        let tr = simulate(&cfg.system, &cfg.input, &cfg.initial_state, &cfg.solver).map_err(|e| {
            CliError::Simulation {
                context: format!("simulating {}", cfg.system.label()),
                message: e.to_string(),
            }
        })?;
        write(&opts.out_dir, "trajectory.csv", &tr.to_csv(), &mut artifacts)?;
        Some(tr)
    } else {
        None
    };
    let mut results = Vec::new();
    let mut verified = false;
    for check in &checks {
        match check {
            Check::Pointwise | Check::Integral => {
                // one verification per form serves both checks
                if !verified {
                    verified = true;
                    let tr = traj.as_ref().expect("simulated");
                    let want_pw = checks.contains(&Check::Pointwise);
                    let want_int = checks.contains(&Check::Integral);
                    for &form in &cfg.certificate.forms {
                        results.extend(verify_form(cfg, tr, form, want_pw, want_int, &opts.out_dir, &mut artifacts)?);
                    }
                }
            }
            Check::Wfgs => results.push(wfgs(cfg, traj.as_ref().expect("simulated"))?),
            Check::Barbalat => results.push(barbalat(cfg, traj.as_ref().expect("simulated"))?),
            Check::RobustGain => results.push(robust_gain(traj.as_ref().expect("simulated"))?),
            Check::Fenchel => results.push(fenchel(cfg)?),
            Check::Sector => results.push(sector(cfg)?),
            Check::Psi => results.push(psi(cfg)?),
            Check::Compose => results.push(compose(cfg, opts.workers)?),
            Check::FitGain => {
                for &form in &cfg.certificate.forms {
                    results.push(fit(cfg, form, opts.workers)?);
                }
            }
        }
    }
    let status = results.iter().map(|r| r.status).max().unwrap_or(Status::Pass);
    let exit_code = match status {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::Inconclusive => 2,
    };
    artifacts.push("verdict.json".to_string());
    let report = ScenarioReport {
        title: cfg.title.clone(),
        system: cfg.system.label(),
        status,
        exit_code,
        checks: results,
        artifacts,
    };
    let path = opts.out_dir.join("verdict.json");
    fs::write(&path, report.to_json()).map_err(|source| CliError::Io { path, source })?;
    Ok(report)
}

fn verify_form(
    cfg: &ScenarioConfig,
    tr: &Trajectory,
    form: Form,
    want_pw: bool,
    want_int: bool,
    dir: &Path,
    artifacts: &mut Vec<String>,
) -> Result<Vec<CheckResult>, CliError> {
    let cert = certificate(cfg, form)?;
    let rep = verify(&cert, tr, cfg.tolerances).map_err(|e| CliError::analysis("verify", e))?;
    write(dir, &format!("margin_{}.csv", form.as_str()), &rep.margin_csv(), artifacts)?;
    let mut out = Vec::new();
    let gain = cert.gain.map_or(String::new(), |g| format!(" gain {g}"));
    if want_pw {
        out.push(CheckResult {
            check: format!("pointwise/{}", form.as_str()),
            status: Status::from_bool(rep.pass_pointwise),
            summary: format!(
                "min margin {:.6e} at t = {:.6} (tol {:.3e}){gain}",
                rep.min_margin, rep.argmin_time, rep.tolerances.pointwise
            ),
            details: raw(&rep),
        });
    }
    if want_int {
        out.push(CheckResult {
            check: format!("integral/{}", form.as_str()),
            status: Status::from_bool(rep.pass_integral),
            summary: format!("slack {:.6e} (tol {:.3e}){gain}", rep.slack, rep.tolerances.integral),
            details: raw(&rep),
        });
    }
    Ok(out)
}

fn wfgs(cfg: &ScenarioConfig, tr: &Trajectory) -> Result<CheckResult, CliError> {
    let cert = certificate(cfg, Form::Nhp)?;
    let alpha = cert
        .supply
        .output_cost
        .as_ref()
        .ok_or_else(|| CliError::analysis("wfgs", "NHP certificate has no output cost"))?;
    let v0 = cert.storage.eval(&cfg.system, &cfg.initial_state, tr.inputs()[0]);
    let rep = wfgs_check(tr, alpha, &cert.supply.input_gain, v0, cfg.wfgs_p)
        .map_err(|e| CliError::analysis("wfgs", e))?;
    Ok(CheckResult {
        check: "wfgs".into(),
        status: Status::from_bool(rep.holds),
        summary: format!(
            "min slack {:.6e} at t = {:.6}, gain estimate {:.6}",
            rep.min_slack, rep.argmin_time, rep.gain_estimate
        ),
        details: raw(&rep),
    })
}

fn barbalat(cfg: &ScenarioConfig, tr: &Trajectory) -> Result<CheckResult, CliError> {
    let rep = barbalat_verdict(tr, &certificate(cfg, Form::Nhp)?, &certificate(cfg, Form::Anhp)?, &cfg.barbalat)
        .map_err(|e| CliError::analysis("barbalat", e))?;
    Ok(CheckResult {
        check: "barbalat".into(),
        status: match rep.verdict {
            Verdict::Pass => Status::Pass,
            Verdict::Inconclusive => Status::Inconclusive,
            Verdict::Fail => Status::Fail,
        },
        summary: format!("tail sup {:.6e}: {}", rep.tail_sup, rep.reason),
        details: raw(&rep),
    })
}

fn robust_gain(tr: &Trajectory) -> Result<CheckResult, CliError> {
    let SystemKind::PiLoop {
        proportional,
        integral: IntegralLaw::Sign { ki, ks, .. },
    } = *tr.system().kind()
    else {
        return Err(CliError::analysis("robust-gain", "needs a nonsmooth PI loop"));
    };
    let rep = robust_gain_inequality_check(tr, proportional.min_slope(), ki, ks)
        .map_err(|e| CliError::analysis("robust-gain", e))?;
    Ok(CheckResult {
        check: "robust-gain".into(),
        status: Status::from_bool(rep.holds),
        summary: format!("min slack {:.6e} at t = {:.6}", rep.min_slack, rep.argmin_time),
        details: raw(&rep),
    })
}

fn fenchel(cfg: &ScenarioConfig) -> Result<CheckResult, CliError> {
    let lambda = cfg.system.rate().expect("checked at parse time");
    let rep = fenchel_check(lambda, cfg.grid).map_err(|e| CliError::analysis("fenchel", e))?;
    Ok(CheckResult {
        check: "fenchel".into(),
        status: Status::from_bool(rep.holds),
        summary: format!("min slack {:.6e} over {} points", rep.min_slack, rep.points),
        details: raw(&rep),
    })
}

fn sector(cfg: &ScenarioConfig) -> Result<CheckResult, CliError> {
    let SystemKind::SectorHp {
        nonlinearity,
        lower,
        upper,
        ..
    } = *cfg.system.kind()
    else {
        return Err(CliError::analysis("sector", "needs sector_hp"));
    };
    let rep = sector_estimates_check(lower, upper, &nonlinearity, cfg.grid)
        .map_err(|e| CliError::analysis("sector", e))?;
    Ok(CheckResult {
        check: "sector".into(),
        status: Status::from_bool(rep.holds()),
        summary: format!(
            "membership {:.3e}, power estimate {:.3e}; shortcut slack {:.3e} (not asserted)",
            rep.membership.min_slack, rep.power_estimate.min_slack, rep.shortcut.min_slack
        ),
        details: raw(&rep),
    })
}

#[derive(Serialize)]
struct PsiReport {
    #[serde(serialize_with = "nhp_core::format::f17")]
    max_deviation: f64,
    #[serde(serialize_with = "nhp_core::format::f17")]
    tolerance: f64,
    #[serde(serialize_with = "nhp_core::format::f17_slice")]
    s: Vec<f64>,
    #[serde(serialize_with = "nhp_core::format::f17_slice")]
    closed_form: Vec<f64>,
    #[serde(serialize_with = "nhp_core::format::f17_slice")]
    grid_sup: Vec<f64>,
}

/// Compares the closed-form `psi` with a brute-force grid supremum.
fn psi(cfg: &ScenarioConfig) -> Result<CheckResult, CliError> {
    let SystemKind::PiLoop {
        proportional,
        integral,
    } = *cfg.system.kind()
    else {
        return Err(CliError::analysis("psi", "needs a PI loop"));
    };
    let half = cfg.grid.half_width.min(10.0);
    let s = uniform_grid(-half, half, 41);
    let r = uniform_grid(-4.0 * (1.0 + half), 4.0 * (1.0 + half), 400_001);
    let closed: Vec<f64> = s
        .iter()
        .map(|&si| match integral {
            IntegralLaw::Sign { ki, ks, smoothing } if smoothing == 0.0 => {
                psi_eval(proportional.min_slope(), ki, ks, si)
            }
            _ => psi_sup(&proportional, &integral, si),
        })
        .collect();
    let grid_sup: Vec<f64> = s
        .iter()
        .map(|&si| {
            r.iter()
                .map(|&ri| proportional.value(ri) * (2.0 * si - integral.force(ri)))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let scale = closed.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-4 * scale;
    let max_deviation = closed
        .iter()
        .zip(&grid_sup)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let rep = PsiReport {
        max_deviation,
        tolerance,
        s,
        closed_form: closed,
        grid_sup,
    };
    Ok(CheckResult {
        check: "psi".into(),
        status: Status::from_bool(max_deviation <= tolerance),
        summary: format!("max |psi - grid sup| {max_deviation:.3e} (tol {tolerance:.3e})"),
        details: raw(&rep),
    })
}

fn compose(cfg: &ScenarioConfig, workers: usize) -> Result<CheckResult, CliError> {
    let g: &SystemModel = cfg.downstream.as_ref().expect("checked at parse time");
    let rep = composition_theorem_report(&cfg.system, g, &battery(cfg, workers))
        .map_err(|e| CliError::analysis("compose", e))?;
    let status = match (rep.mode, rep.components_valid, rep.all_pass) {
        (_, false, _) => Status::Fail,
        (CompositeMode::Empirical, true, _) => Status::Inconclusive,
        (CompositeMode::Certified, true, ok) => Status::from_bool(ok),
    };
    let summary = match rep.first_failing_stage {
        Some(stage) => format!("{:?} mode, first failing stage {stage:?}", rep.mode),
        None => {
            let w = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.6}"));
            format!(
                "{:?} mode on {} probes, weights nhp {} anhp {}",
                rep.mode,
                rep.probe_ids.len(),
                w(rep.weight_nhp),
                w(rep.weight_anhp)
            )
        }
    };
    Ok(CheckResult {
        check: "compose".into(),
        status,
        summary: summary.to_lowercase(),
        details: raw(&rep),
    })
}

fn fit(cfg: &ScenarioConfig, form: Form, workers: usize) -> Result<CheckResult, CliError> {
    let family = CertificateFamily::for_system(&cfg.system, form).map_err(|e| CliError::analysis("fit-gain", e))?;
    let check = format!("fit-gain/{}", form.as_str());
    match fit_gain(&cfg.system, family, &battery(cfg, workers), &cfg.fit) {
        Ok(f) => {
            let ok = f.reference_gain.is_none_or(|r| f.gain <= r + 1e-2);
            let reference = f.reference_gain.map_or("none".to_string(), |r| format!("{r}"));
            Ok(CheckResult {
                check,
                status: Status::from_bool(ok),
                summary: format!("fitted {:.6} (reference {reference}) over {} probes", f.gain, f.probes),
                details: raw(&f),
            })
        }
        Err(e @ nhp_core::Error::NoPassingGain { .. }) => Ok(CheckResult {
            check,
            status: Status::Fail,
            summary: e.to_string(),
            details: raw(&e.to_string()),
        }),
        Err(e) => Err(CliError::analysis("fit-gain", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn scenario(extra: &str) -> ScenarioConfig {
        parse_config(&format!(
            "{extra}\n[system]\nname = \"linear_hp\"\nlambda = 1.0\n\n[input]\nkind = \"sinusoid\"\namplitude = 1.0\nomega = 1.0\n"
        ))
        .unwrap()
    }

    #[test]
    fn passing_scenario_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = scenario("checks = [\"pointwise\", \"integral\"]");
        let rep = run_scenario(&cfg, &RunOptions::new(dir.path())).unwrap();
        assert_eq!(rep.exit_code, 0, "{:?}", rep.summary_lines());
        assert_eq!(rep.checks.len(), 4);
        for f in ["trajectory.csv", "margin_nhp.csv", "margin_anhp.csv", "verdict.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("verdict.json")).unwrap()).unwrap();
        assert_eq!(json["status"], "PASS");
    }

    #[test]
    fn deflated_gain_fails() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = scenario("checks = [\"pointwise\"]\n[certificate]\nforms = [\"nhp\"]\nnhp_gain = 0.8");
        let rep = run_scenario(&cfg, &RunOptions::new(dir.path())).unwrap();
        assert_eq!(rep.exit_code, 1);
    }

    #[test]
    fn sine_input_leaves_convergence_inconclusive() {
        let dir = tempfile::tempdir().unwrap();
        let rep = run_scenario(&scenario("checks = [\"barbalat\"]"), &RunOptions::new(dir.path())).unwrap();
        assert_eq!(rep.exit_code, 2);
    }

    #[test]
    fn fallback_applies_when_filter_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut opts = RunOptions::new(dir.path());
        opts.only = Some(vec![Check::FitGain]);
        opts.fallback = vec![Check::FitGain];
        let rep = run_scenario(&scenario("checks = [\"pointwise\"]"), &opts).unwrap();
        assert_eq!(rep.checks.len(), 2);
        assert_eq!(rep.checks[0].check, "fit-gain/nhp");
        assert_eq!(rep.checks[1].check, "fit-gain/anhp");
        assert!(!dir.path().join("trajectory.csv").exists());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Config(Diagnostics(vec![])).exit_code(), 3);
        assert_eq!(CliError::analysis("x", "y").exit_code(), 4);
        let io = CliError::Io {
            path: "p".into(),
            source: std::io::Error::other("x"),
        };
        assert_eq!(io.exit_code(), 5);
    }
}
