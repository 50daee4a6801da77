use serde::Serialize;

use super::battery::{verify_runs, Battery, ProbeRun};
use super::check::CheckTolerances;
use super::{CertificateFamily, Origin};
use crate::error::{invalid, Error, Result};
use crate::format::{f17, f17_opt};
use crate::signals::trapezoid;
use crate::systems::SystemModel;

/// Bisection settings for [`fit_gain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub lo: f64,
    pub hi: f64,
    /// Bracket width at which bisection stops.
    pub tol: f64,
    /// Doublings of `hi` allowed when the initial upper bound fails.
    pub max_expansions: usize,
    /// Multiples of the fitted gain re-checked for monotonicity.
    pub spot_factors: [f64; 3],
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lo: 1e-3,
            hi: 10.0,
            tol: 1e-3,
            max_expansions: 40,
            spot_factors: [1.1, 2.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitEvaluation {
    #[serde(serialize_with = "f17")]
    pub gain: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub family: CertificateFamily,
    /// Smallest passing gain found (upper end of the final bracket).
    #[serde(serialize_with = "f17")]
    pub gain: f64,
    /// Closed-form gain for comparison, if the family has one.
    #[serde(serialize_with = "f17_opt")]
    pub reference_gain: Option<f64>,
    /// `max_probe sqrt(int y^2 / int du^2)`, only for quadratic NHP families.
    #[serde(serialize_with = "f17_opt")]
    pub empirical_gain: Option<f64>,
    pub evaluations: Vec<FitEvaluation>,
    pub probes: usize,
}

/// Smallest gain of `family` whose certificate passes the pointwise check on
/// every probe of `battery`, by bisection. The battery is simulated once.
///
/// Passing is assumed monotone in the gain; a fail above a pass anywhere in
/// the evaluation log is reported as [`Error::MonotonicityViolation`].
pub fn fit_gain(
    sys: &SystemModel,
    family: CertificateFamily,
    battery: &Battery,
    cfg: &FitConfig,
) -> Result<FitResult> {
    if !(cfg.tol > 0.0 && cfg.lo < cfg.hi) {
        return Err(invalid("fit", "need tol > 0 and lo < hi"));
    }
    let runs = battery.simulate(sys);
    fit_on_runs(sys, family, &runs, cfg)
}

pub(crate) fn fit_on_runs(
    sys: &SystemModel,
    family: CertificateFamily,
    runs: &[ProbeRun],
    cfg: &FitConfig,
) -> Result<FitResult> {
    let floor = family.min_gain() * (1.0 + 1e-9);
    let mut evaluations: Vec<FitEvaluation> = Vec::new();
    let passes = |gain: f64, log: &mut Vec<FitEvaluation>| -> Result<bool> {
        let cert = family.build(sys, gain, Origin::Fitted)?;
        let rep = verify_runs(&cert, runs, CheckTolerances::default())?;
        let pass = rep.all_pass;
        log.push(FitEvaluation { gain, pass });
        Ok(pass)
    };
    let mut lo = cfg.lo.max(floor);
    let mut hi = cfg.hi.max(lo * 2.0);
    let mut expansions = 0;
    while !passes(hi, &mut evaluations)? {
        if expansions == cfg.max_expansions {
            return Err(Error::NoPassingGain { lo, hi });
        }
        lo = hi;
        hi *= 2.0;
        expansions += 1;
    }
    if passes(lo, &mut evaluations)? {
        hi = lo;
    } else {
        while hi - lo > cfg.tol {
            let mid = 0.5 * (lo + hi);
            if passes(mid, &mut evaluations)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    for factor in cfg.spot_factors {
        passes(hi * factor, &mut evaluations)?;
    }
    check_monotone(&evaluations)?;
    let empirical_gain = match family {
        CertificateFamily::LinearNhp | CertificateFamily::SectorNhp => Some(
            runs.iter()
                .filter_map(|r| r.trajectory())
                .filter_map(|tr| {
                    let y2: Vec<f64> = tr.outputs().iter().map(|y| y * y).collect();
                    let u2: Vec<f64> = tr.input_rates().iter().map(|d| d * d).collect();
                    let den = trapezoid(tr.times(), &u2);
                    (den > 0.0).then(|| (trapezoid(tr.times(), &y2) / den).sqrt())
                })
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    Ok(FitResult {
        family,
        gain: hi,
        reference_gain: family.reference_gain(sys).map(|(g, _)| g),
        empirical_gain,
        evaluations,
        probes: runs.len(),
    })
}

fn check_monotone(log: &[FitEvaluation]) -> Result<()> {
    let lowest_pass = log
        .iter()
        .filter(|e| e.pass)
        .map(|e| e.gain)
        .fold(f64::INFINITY, f64::min);
    match log.iter().filter(|e| !e.pass && e.gain > lowest_pass).map(|e| e.gain).next() {
        Some(failing) => Err(Error::MonotonicityViolation {
            passing: lowest_pass,
            failing,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::linear_hp;

    #[test]
    fn linear_fit_approaches_reciprocal_rate() {
        let sys = linear_hp(2.0).unwrap();
        let fit = fit_gain(&sys, CertificateFamily::LinearNhp, &Battery::standard(), &FitConfig::default()).unwrap();
        assert!(fit.gain <= 0.5 + 1e-2, "{}", fit.gain);
        assert!(fit.gain > 0.4, "{}", fit.gain);
        assert_eq!(fit.reference_gain, Some(0.5));
    }

    #[test]
    fn monotonicity_log_check() {
        let ok = [
            FitEvaluation { gain: 1.0, pass: false },
            FitEvaluation { gain: 2.0, pass: true },
        ];
        assert!(check_monotone(&ok).is_ok());
        let bad = [
            FitEvaluation { gain: 1.0, pass: true },
            FitEvaluation { gain: 2.0, pass: false },
        ];
        assert!(matches!(check_monotone(&bad), Err(Error::MonotonicityViolation { .. })));
    }
}
