use serde::Serialize;

use super::check::{verify, CheckTolerances, VerdictReport};
use super::Certificate;
use crate::error::Result;
use crate::parallel::{default_workers, map_ordered};
use crate::signals::InputSignal;
use crate::systems::{simulate, SolverConfig, SystemModel, Trajectory};

/// A named test input.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: String,
    pub input: InputSignal,
}

impl Probe {
    pub fn new(id: impl Into<String>, input: InputSignal) -> Self {
        Probe {
            id: id.into(),
            input,
        }
    }
}

/// A set of probe inputs run from the zero state over a common horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    pub probes: Vec<Probe>,
    pub horizon: f64,
    /// Defaults to adaptive RK45 over the horizon.
    pub solver: Option<SolverConfig>,
    /// Probes whose output exceeds this are skipped rather than checked.
    pub output_cap: Option<f64>,
    pub workers: usize,
}

pub const STANDARD_HORIZON: f64 = 20.0;
pub const STANDARD_OMEGAS: [f64; 3] = [0.1, 1.0, 10.0];
pub const STANDARD_AMPLITUDES: [f64; 3] = [0.1, 1.0, 3.0];

fn ramp_hold() -> Probe {
    Probe::new("ramp_hold", InputSignal::ramp_hold(1.0, 2.0).expect("valid"))
}

fn smoothed_step() -> Probe {
    Probe::new(
        "smoothed_step",
        InputSignal::smoothed_step(1.0, 1.0, 0.2).expect("valid"),
    )
}

fn zero() -> Probe {
    Probe::new("zero", InputSignal::constant(0.0).expect("valid"))
}

impl Battery {
    pub fn new(probes: Vec<Probe>, horizon: f64) -> Self {
        Battery {
            probes,
            horizon,
            solver: None,
            output_cap: None,
            workers: default_workers(),
        }
    }

    /// Sines at `omega in {0.1, 1, 10}` and amplitude `{0.1, 1, 3}`, a ramp
    /// to 2 held from `t = 2`, a smoothed unit step at `t = 1`, and zero;
    /// horizon 20.
    pub fn standard() -> Self {
        let mut probes = Vec::new();
        for &w in &STANDARD_OMEGAS {
            for &a in &STANDARD_AMPLITUDES {
                probes.push(Probe::new(
                    format!("sine_w{w}_a{a}"),
                    InputSignal::sinusoid(a, w).expect("valid"),
                ));
            }
        }
        probes.extend([ramp_hold(), smoothed_step(), zero()]);
        Battery::new(probes, STANDARD_HORIZON)
    }

    /// The inputs of the standard battery that are constant after some time.
    pub fn constant_tail(horizon: f64) -> Self {
        Battery::new(vec![ramp_hold(), smoothed_step(), zero()], horizon)
    }

    /// Only the sinusoidal probes of the standard battery.
    pub fn sines() -> Self {
        let mut b = Battery::standard();
        b.probes.retain(|p| p.id.starts_with("sine"));
        b
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = Some(solver);
        self
    }

    pub fn with_output_cap(mut self, cap: f64) -> Self {
        self.output_cap = Some(cap);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = self.solver.unwrap_or_else(|| SolverConfig::rk45(self.horizon));
        cfg.horizon = self.horizon;
        cfg
    }

    /// Simulates every probe from the zero state, in parallel, in probe order.
    pub fn simulate(&self, sys: &SystemModel) -> Vec<ProbeRun> {
        let cfg = self.solver_config();
        let x0 = vec![0.0; sys.state_dim()];
        map_ordered(&self.probes, self.workers, |_, p| {
            let outcome = match simulate(sys, &p.input, &x0, &cfg) {
                Ok(tr) => match self.output_cap {
                    Some(cap) if tr.outputs().iter().any(|y| y.abs() > cap) => {
                        ProbeOutcome::Skipped(format!("|y| exceeds cap {cap}"))
                    }
                    _ => ProbeOutcome::Ran(Box::new(tr)),
                },
                Err(e) => ProbeOutcome::Failed(e.to_string()),
            };
            ProbeRun {
                id: p.id.clone(),
                outcome,
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum ProbeOutcome {
    Ran(Box<Trajectory>),
    Skipped(String),
    /// Simulation error (divergence, step underflow).
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct ProbeRun {
    pub id: String,
    pub outcome: ProbeOutcome,
}

impl ProbeRun {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        match &self.outcome {
            ProbeOutcome::Ran(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeIssue {
    pub probe_id: String,
    pub reason: String,
}

/// Certificate verdicts over a battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub certificate: String,
    pub all_pass: bool,
    pub reports: Vec<VerdictReport>,
    pub skipped: Vec<ProbeIssue>,
    pub errors: Vec<ProbeIssue>,
}

impl BatteryReport {
    /// The smallest pointwise margin over all probes.
    pub fn worst_margin(&self) -> f64 {
        self.reports
            .iter()
            .map(|r| r.min_margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn failing_probes(&self) -> Vec<&str> {
        self.reports
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.probe_id.as_str())
            .chain(self.errors.iter().map(|e| e.probe_id.as_str()))
            .collect()
    }
}

/// Checks `cert` on pre-computed runs.
pub fn verify_runs(cert: &Certificate, runs: &[ProbeRun], tol: CheckTolerances) -> Result<BatteryReport> {
    let mut out = BatteryReport {
        certificate: cert.label.clone(),
        all_pass: true,
        reports: Vec::new(),
        skipped: Vec::new(),
        errors: Vec::new(),
    };
    for run in runs {
        match &run.outcome {
            ProbeOutcome::Ran(tr) => {
                let rep = verify(cert, tr, tol)?.with_probe_id(&run.id);
                out.all_pass &= rep.passed();
                out.reports.push(rep);
            }
            ProbeOutcome::Skipped(reason) => out.skipped.push(ProbeIssue {
                probe_id: run.id.clone(),
                reason: reason.clone(),
            }),
            ProbeOutcome::Failed(reason) => {
                out.all_pass = false;
                out.errors.push(ProbeIssue {
                    probe_id: run.id.clone(),
                    reason: reason.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Simulates the battery on `cert`'s system and checks every probe.
pub fn verify_battery(cert: &Certificate, battery: &Battery, tol: CheckTolerances) -> Result<BatteryReport> {
    verify_runs(cert, &battery.simulate(&cert.system), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{certificate_catalog, Form};
    use crate::systems::linear_hp;

    #[test]
    fn standard_battery_layout() {
        let b = Battery::standard();
        assert_eq!(b.probes.len(), 12);
        assert_eq!(b.horizon, 20.0);
        assert_eq!(b.probes[0].id, "sine_w0.1_a0.1");
        assert_eq!(Battery::constant_tail(5.0).probes.len(), 3);
        assert!(Battery::constant_tail(5.0)
            .probes
            .iter()
            .all(|p| p.input.constant_after().is_some()));
    }

    #[test]
    fn linear_certificate_passes_standard_battery() {
        let sys = linear_hp(1.0).unwrap();
        let cert = certificate_catalog(&sys, Form::Nhp).unwrap();
        let rep = verify_battery(&cert, &Battery::standard(), CheckTolerances::default()).unwrap();
        assert!(rep.all_pass, "{:?}", rep.failing_probes());
        assert_eq!(rep.reports.len(), 12);
        assert!(rep.worst_margin() >= -1e-8);
    }
}
