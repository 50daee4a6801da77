use serde::Serialize;

use super::Certificate;
use crate::error::{Error, Result};
use crate::format::{csv_row, f17};
use crate::signals::{simpson_with_jumps, Trace};
use crate::systems::Trajectory;

/// Explicit tolerance overrides; `None` selects the solver-coupled defaults
/// `tol_pw = 1e-8 + 10 rtol scale` and
/// `tol_int = 1e-8 + 10 rtol scale T + 2 |int dV - (V(T) - V(0))|`, with
/// `scale = max(1, |s|, |dV/dt|)` over the run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CheckTolerances {
    pub pointwise: Option<f64>,
    pub integral: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppliedTolerances {
    #[serde(serialize_with = "f17")]
    pub pointwise: f64,
    #[serde(serialize_with = "f17")]
    pub integral: f64,
    /// `|int dV/dt dt - (V(T) - V(0))|` by the quadrature used for the slack.
    #[serde(serialize_with = "f17")]
    pub quadrature_error: f64,
    #[serde(serialize_with = "f17")]
    pub solver_rtol: f64,
}

/// Outcome of checking one certificate along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictReport {
    pub probe_id: String,
    pub certificate: String,
    pub pass_pointwise: bool,
    pub pass_integral: bool,
    /// `min_i s(t_i) - dV/dt(t_i)`.
    #[serde(serialize_with = "f17")]
    pub min_margin: f64,
    #[serde(serialize_with = "f17")]
    pub argmin_time: f64,
    /// `int s dt + V(0) - V(T)`.
    #[serde(serialize_with = "f17")]
    pub slack: f64,
    /// `int (s - dV/dt) dt`.
    #[serde(serialize_with = "f17")]
    pub margin_integral: f64,
    pub tolerances: AppliedTolerances,
    #[serde(skip)]
    pub margin: Trace,
}

impl VerdictReport {
    pub fn passed(&self) -> bool {
        self.pass_pointwise && self.pass_integral
    }

    pub fn with_probe_id(mut self, id: impl Into<String>) -> Self {
        self.probe_id = id.into();
        self
    }

    /// CSV with header `t,margin`.
    pub fn margin_csv(&self) -> String {
        let mut out = String::from("t,margin\n");
        for (&t, &m) in self.margin.times().iter().zip(self.margin.values()) {
            out.push_str(&csv_row([t, m]));
            out.push('\n');
        }
        out
    }
}

fn ensure_same_system(cert: &Certificate, traj: &Trajectory) -> Result<()> {
    if &cert.system != traj.system() {
        return Err(Error::SystemMismatch {
            certificate: cert.system.label(),
            trajectory: traj.system().label(),
        });
    }
    Ok(())
}

/// `dV/dt` at sample `i` from the storage gradients.
pub fn storage_derivative(cert: &Certificate, traj: &Trajectory, i: usize) -> f64 {
    cert.storage.derivative(
        traj.system(),
        &traj.states()[i],
        traj.inputs()[i],
        traj.input_rates()[i],
    )
}

fn storage_derivative_left(cert: &Certificate, traj: &Trajectory, i: usize) -> f64 {
    cert.storage.derivative(
        traj.system(),
        &traj.states()[i],
        traj.inputs()[i],
        traj.input_rates_left()[i],
    )
}

pub fn storage_values(cert: &Certificate, traj: &Trajectory) -> Vec<f64> {
    (0..traj.len())
        .map(|i| cert.storage.eval(traj.system(), &traj.states()[i], traj.inputs()[i]))
        .collect()
}

pub fn supply_values(cert: &Certificate, traj: &Trajectory) -> Vec<f64> {
    (0..traj.len())
        .map(|i| {
            cert.supply.eval(
                traj.input_rates()[i],
                traj.outputs()[i],
                traj.output_rates()[i],
            )
        })
        .collect()
}

fn supply_values_left(cert: &Certificate, traj: &Trajectory) -> Vec<f64> {
    (0..traj.len())
        .map(|i| {
            cert.supply.eval(
                traj.input_rates_left()[i],
                traj.outputs()[i],
                traj.output_rates_left()[i],
            )
        })
        .collect()
}

/// Pointwise and integral dissipation checks in one pass.
///
/// At input kinks both one-sided values of the margin are checked, and the
/// integrals use a Simpson rule restarted at each kink.
pub fn verify(cert: &Certificate, traj: &Trajectory, tol: CheckTolerances) -> Result<VerdictReport> {
    ensure_same_system(cert, traj)?;
    let t = traj.times();
    let s = supply_values(cert, traj);
    let s_left = supply_values_left(cert, traj);
    let v = storage_values(cert, traj);
    let vdot: Vec<f64> = (0..traj.len()).map(|i| storage_derivative(cert, traj, i)).collect();
    let vdot_left: Vec<f64> = (0..traj.len())
        .map(|i| storage_derivative_left(cert, traj, i))
        .collect();
    let margin: Vec<f64> = s.iter().zip(&vdot).map(|(a, b)| a - b).collect();
    let margin_left: Vec<f64> = s_left.iter().zip(&vdot_left).map(|(a, b)| a - b).collect();
    let (argmin, min_margin) = margin
        .iter()
        .zip(&margin_left)
        .map(|(a, b)| a.min(*b))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty trajectory");
    let scale = s
        .iter()
        .chain(&vdot)
        .chain(&s_left)
        .chain(&vdot_left)
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let rtol = traj.stats().relative_tolerance;
    let horizon = traj.horizon();
    let delta_v = v[v.len() - 1] - v[0];
    let quadrature_error = (simpson_with_jumps(t, &vdot, &vdot_left) - delta_v).abs();
    let tol_pw = tol.pointwise.unwrap_or(1e-8 + 10.0 * rtol * scale);
    let tol_int = tol
        .integral
        .unwrap_or(1e-8 + 10.0 * rtol * scale * horizon + 2.0 * quadrature_error);
    let slack = simpson_with_jumps(t, &s, &s_left) - delta_v;
    let nonfinite = !min_margin.is_finite() || !slack.is_finite();
    Ok(VerdictReport {
        probe_id: String::new(),
        certificate: cert.label.clone(),
        pass_pointwise: !nonfinite && min_margin >= -tol_pw,
        pass_integral: !nonfinite && slack >= -tol_int,
        min_margin,
        argmin_time: t[argmin],
        slack,
        margin_integral: simpson_with_jumps(t, &margin, &margin_left),
        tolerances: AppliedTolerances {
            pointwise: tol_pw,
            integral: tol_int,
            quadrature_error,
            solver_rtol: rtol,
        },
        margin: Trace::new(t.to_vec(), margin)?,
    })
}

pub fn check_pointwise(cert: &Certificate, traj: &Trajectory, tol_pw: Option<f64>) -> Result<VerdictReport> {
    verify(
        cert,
        traj,
        CheckTolerances {
            pointwise: tol_pw,
            integral: None,
        },
    )
}

pub fn check_integral(cert: &Certificate, traj: &Trajectory, tol_int: Option<f64>) -> Result<VerdictReport> {
    verify(
        cert,
        traj,
        CheckTolerances {
            pointwise: None,
            integral: tol_int,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{certificate_catalog, CertificateFamily, Form, Origin};
    use crate::signals::InputSignal;
    use crate::systems::{linear_hp, simulate, SolverConfig};

    #[test]
    fn zero_run_has_zero_slack() {
        let sys = linear_hp(1.0).unwrap();
        let cert = certificate_catalog(&sys, Form::Nhp).unwrap();
        let tr = simulate(&sys, &InputSignal::constant(0.0).unwrap(), &[0.0], &SolverConfig::rk45(5.0)).unwrap();
        let rep = verify(&cert, &tr, CheckTolerances::default()).unwrap();
        assert_eq!(rep.slack, 0.0);
        assert_eq!(rep.min_margin, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn catalog_certificate_passes_and_corrupted_fails() {
        let sys = linear_hp(1.0).unwrap();
        let u = InputSignal::sinusoid(1.0, 1.0).unwrap();
        let tr = simulate(&sys, &u, &[0.0], &SolverConfig::rk45(20.0)).unwrap();
        let good = certificate_catalog(&sys, Form::Nhp).unwrap();
        let rep = check_pointwise(&good, &tr, None).unwrap();
        assert!(rep.pass_pointwise && rep.pass_integral);
        // margin integral and slack agree up to quadrature error
        assert!((rep.slack - rep.margin_integral).abs() < 1e-6);
        let bad = CertificateFamily::LinearNhp.build(&sys, 0.5, Origin::Custom).unwrap();
        let rep = check_pointwise(&bad, &tr, None).unwrap();
        assert!(!rep.pass_pointwise);
        assert!(rep.min_margin < 0.0);
    }

    #[test]
    fn mismatched_system_rejected() {
        let cert = certificate_catalog(&linear_hp(2.0).unwrap(), Form::Nhp).unwrap();
        let sys = linear_hp(1.0).unwrap();
        let tr = simulate(&sys, &InputSignal::constant(0.0).unwrap(), &[0.0], &SolverConfig::rk45(1.0)).unwrap();
        assert!(matches!(verify(&cert, &tr, CheckTolerances::default()), Err(Error::SystemMismatch { .. })));
    }

    #[test]
    fn report_json_fields() {
        let sys = linear_hp(1.0).unwrap();
        let cert = certificate_catalog(&sys, Form::Nhp).unwrap();
        let tr = simulate(&sys, &InputSignal::constant(0.0).unwrap(), &[0.0], &SolverConfig::rk45(1.0)).unwrap();
        let rep = verify(&cert, &tr, CheckTolerances::default()).unwrap().with_probe_id("zero");
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["pass_pointwise", "pass_integral", "min_margin", "argmin_time", "slack", "tolerances", "probe_id"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(rep.margin_csv().starts_with("t,margin\n"));
    }
}
