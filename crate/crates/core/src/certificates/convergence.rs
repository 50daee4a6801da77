use serde::Serialize;

use super::check::{verify, CheckTolerances};
use super::{Certificate, Form};
use crate::error::{invalid, Result};
use crate::format::f17;
use crate::signals::{cumulative_trapezoid_with_jumps, trapezoid_window, window_sup, GainFunction};
use crate::systems::{SystemModel, Trajectory};

/// Prefix check of `int_0^t alpha(|y|) <= int_0^t beta(|du|) + V0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WfgsReport {
    pub holds: bool,
    #[serde(serialize_with = "f17")]
    pub min_slack: f64,
    #[serde(serialize_with = "f17")]
    pub argmin_time: f64,
    /// `sup_t ((int |y|^p - V0)_+ / int |du|^p)^(1/p)` over prefixes with
    /// nonzero input cost.
    #[serde(serialize_with = "f17")]
    pub gain_estimate: f64,
    pub prefixes: usize,
}

/// Runs the prefix check over every grid time of `traj`.
///
/// The tolerance per prefix is `1e-8 + 1e-6 (int alpha + int beta + V0)`.
pub fn wfgs_check(
    traj: &Trajectory,
    alpha: &GainFunction,
    beta: &GainFunction,
    v0: f64,
    p: f64,
) -> Result<WfgsReport> {
    let y = traj.outputs();
    prefix_check(
        traj.times(),
        [y, y],
        [traj.input_rates(), traj.input_rates_left()],
        alpha,
        beta,
        v0,
        p,
    )
}

/// [`wfgs_check`] on explicit signals, each given as `[right, left]` sample
/// values so that jumps at kinks are integrated correctly.
pub(crate) fn prefix_check(
    t: &[f64],
    out: [&[f64]; 2],
    rate: [&[f64]; 2],
    alpha: &GainFunction,
    beta: &GainFunction,
    v0: f64,
    p: f64,
) -> Result<WfgsReport> {
    if !(p >= 1.0) {
        return Err(invalid("p", format!("exponent must be >= 1, got {p}")));
    }
    let integral = |sig: [&[f64]; 2], f: &dyn Fn(f64) -> f64| {
        let right: Vec<f64> = sig[0].iter().map(|&v| f(v)).collect();
        let left: Vec<f64> = sig[1].iter().map(|&v| f(v)).collect();
        cumulative_trapezoid_with_jumps(t, &right, &left)
    };
    let ia = integral(out, &|v| alpha.eval(v));
    let iy = integral(out, &|v: f64| v.abs().powf(p));
    let ib = integral(rate, &|v| beta.eval(v));
    let iu = integral(rate, &|v: f64| v.abs().powf(p));
    let mut rep = WfgsReport {
        holds: true,
        min_slack: f64::INFINITY,
        argmin_time: 0.0,
        gain_estimate: 0.0,
        prefixes: t.len(),
    };
    for i in 0..t.len() {
        let slack = ib[i] + v0 - ia[i];
        if slack < rep.min_slack {
            rep.min_slack = slack;
            rep.argmin_time = t[i];
        }
        if slack < -(1e-8 + 1e-6 * (ia[i] + ib[i] + v0.abs())) {
            rep.holds = false;
        }
        if iu[i] > 1e-300 {
            let g = ((iy[i] - v0).max(0.0) / iu[i]).powf(1.0 / p);
            rep.gain_estimate = rep.gain_estimate.max(g);
        }
    }
    Ok(rep)
}

/// Thresholds of the convergence verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarbalatThresholds {
    /// Tail bound on `|y|`.
    pub output: f64,
    /// Largest accepted increment of the gain integrals over the tail window.
    pub integral: f64,
    /// Fraction of the horizon forming the tail window.
    pub window_fraction: f64,
    /// A tail sup below `decay_ratio` times the preceding window's sup counts
    /// as still decaying.
    pub decay_ratio: f64,
    /// Output threshold relative to the peak `|y|` instead of absolute.
    pub relative: bool,
}

impl Default for BarbalatThresholds {
    fn default() -> Self {
        BarbalatThresholds {
            output: 1e-3,
            integral: 1e-6,
            window_fraction: 0.2,
            decay_ratio: 0.99,
            relative: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarbalatReport {
    pub verdict: Verdict,
    pub reason: String,
    #[serde(serialize_with = "f17")]
    pub tail_sup: f64,
    #[serde(serialize_with = "f17")]
    pub previous_window_sup: f64,
    #[serde(serialize_with = "f17")]
    pub threshold: f64,
    #[serde(serialize_with = "f17")]
    pub beta_integral: f64,
    #[serde(serialize_with = "f17")]
    pub beta1_integral: f64,
    #[serde(serialize_with = "f17")]
    pub beta_tail_increment: f64,
    #[serde(serialize_with = "f17")]
    pub beta1_tail_increment: f64,
    pub certificates_pass: bool,
    pub still_decaying: bool,
}

/// Horizon `20 / lambda_min` used for convergence runs.
pub fn barbalat_horizon(sys: &SystemModel) -> f64 {
    20.0 / sys.nominal_rate()
}

/// Convergence verdict from an NHP and an ANHP certificate along `traj`.
///
/// PASS needs both certificates to hold, both gain integrals to have stopped
/// growing over the tail window, and the tail sup of `|y|` under threshold.
/// A tail above threshold is INCONCLUSIVE while it is still decaying or the
/// hypotheses are unmet, and FAIL once it has stagnated.
pub fn barbalat_verdict(
    traj: &Trajectory,
    cert_nhp: &Certificate,
    cert_anhp: &Certificate,
    thresholds: &BarbalatThresholds,
) -> Result<BarbalatReport> {
    if cert_nhp.form != Form::Nhp || cert_anhp.form != Form::Anhp {
        return Err(invalid(
            "certificates",
            "convergence verdict needs one NHP and one ANHP certificate",
        ));
    }
    let f = thresholds.window_fraction;
    if !(f > 0.0 && f <= 0.5) {
        return Err(invalid("window_fraction", "must lie in (0, 0.5]"));
    }
    let certificates_pass = verify(cert_nhp, traj, CheckTolerances::default())?.passed()
        && verify(cert_anhp, traj, CheckTolerances::default())?.passed();
    let t = traj.times();
    let end = traj.horizon();
    let start = end * (1.0 - f);
    let prev_start = end * (1.0 - 2.0 * f);
    let y = traj.output_trace();
    let tail_sup = window_sup(&y, start, end);
    let previous_window_sup = window_sup(&y, prev_start, start);
    let threshold = if thresholds.relative {
        thresholds.output * window_sup(&y, 0.0, end).max(f64::MIN_POSITIVE)
    } else {
        thresholds.output
    };
    let gain_integrals = |g: &GainFunction| {
        let w: Vec<f64> = traj.input_rates().iter().map(|&d| g.eval(d)).collect();
        (
            trapezoid_window(t, &w, 0.0, end),
            trapezoid_window(t, &w, start, end),
        )
    };
    let (beta_integral, beta_tail_increment) = gain_integrals(&cert_nhp.supply.input_gain);
    let (beta1_integral, beta1_tail_increment) = gain_integrals(&cert_anhp.supply.input_gain);
    let converged = beta_tail_increment <= thresholds.integral && beta1_tail_increment <= thresholds.integral;
    let still_decaying = tail_sup < thresholds.decay_ratio * previous_window_sup;
    let (verdict, reason) = if !certificates_pass {
        (Verdict::Inconclusive, "a certificate fails on this trajectory".to_string())
    } else if !converged {
        (
            Verdict::Inconclusive,
            "gain integrals still growing over the tail window".to_string(),
        )
    } else if tail_sup <= threshold {
        (Verdict::Pass, "output tail below threshold".to_string())
    } else if still_decaying {
        (
            Verdict::Inconclusive,
            format!("tail sup {tail_sup:.3e} above threshold but still decaying; horizon too short"),
        )
    } else {
        (
            Verdict::Fail,
            format!("tail sup {tail_sup:.3e} stagnates above threshold {threshold:.3e}"),
        )
    };
    Ok(BarbalatReport {
        verdict,
        reason,
        tail_sup,
        previous_window_sup,
        threshold,
        beta_integral,
        beta1_integral,
        beta_tail_increment,
        beta1_tail_increment,
        certificates_pass,
        still_decaying,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::certificate_catalog;
    use crate::signals::InputSignal;
    use crate::systems::{linear_hp, simulate, SolverConfig};

    fn pair(sys: &SystemModel) -> (Certificate, Certificate) {
        (
            certificate_catalog(sys, Form::Nhp).unwrap(),
            certificate_catalog(sys, Form::Anhp).unwrap(),
        )
    }

    #[test]
    fn ramp_hold_passes_sine_is_inconclusive() {
        let sys = linear_hp(1.0).unwrap();
        let (n, a) = pair(&sys);
        let cfg = SolverConfig::rk45(barbalat_horizon(&sys));
        let ramp = simulate(&sys, &InputSignal::ramp_hold(1.0, 2.0).unwrap(), &[0.0], &cfg).unwrap();
        let rep = barbalat_verdict(&ramp, &n, &a, &BarbalatThresholds::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{}", rep.reason);
        let sine = simulate(&sys, &InputSignal::sinusoid(1.0, 1.0).unwrap(), &[0.0], &cfg).unwrap();
        let rep = barbalat_verdict(&sine, &n, &a, &BarbalatThresholds::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert!(barbalat_verdict(&sine, &a, &n, &BarbalatThresholds::default()).is_err());
    }

    #[test]
    fn wfgs_examples() {
        let sys = linear_hp(1.0).unwrap();
        let sq = GainFunction::square();
        let zero = simulate(&sys, &InputSignal::constant(0.0).unwrap(), &[0.0], &SolverConfig::rk45(5.0)).unwrap();
        let rep = wfgs_check(&zero, &sq, &sq, 0.0, 2.0).unwrap();
        assert!(rep.holds && rep.min_slack == 0.0);
        let sine = simulate(&sys, &InputSignal::sinusoid(1.0, 0.3).unwrap(), &[0.0], &SolverConfig::rk45(60.0)).unwrap();
        assert!(wfgs_check(&sine, &sq, &sq, 0.0, 2.0).unwrap().holds);
        let deflated = GainFunction::quadratic(0.5);
        assert!(!wfgs_check(&sine, &sq, &deflated, 0.0, 2.0).unwrap().holds);
    }
}
