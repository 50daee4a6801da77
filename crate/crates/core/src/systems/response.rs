use serde::Serialize;

use super::{simulate, SolverConfig, SystemModel};
use crate::error::{require_positive, Result};
use crate::format::f17;
use crate::signals::{simpson_with_jumps, InputSignal};

/// Steady-state response to `sin(omega t)`, as the complex gain `re + i im`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyResponse {
    #[serde(serialize_with = "f17")]
    pub omega: f64,
    #[serde(serialize_with = "f17")]
    pub re: f64,
    #[serde(serialize_with = "f17")]
    pub im: f64,
}

impl FrequencyResponse {
    pub fn magnitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn phase(&self) -> f64 {
        self.im.atan2(self.re)
    }
}

/// Measures the response of `sys` from the zero state by projecting the
/// output onto `sin` and `cos` over four periods, after settling for at
/// least `40 / nominal_rate`.
pub fn frequency_response(sys: &SystemModel, omega: f64) -> Result<FrequencyResponse> {
    require_positive("omega", omega)?;
    let period = std::f64::consts::TAU / omega;
    let settle = (40.0 / sys.nominal_rate() / period).ceil() * period;
    let max_step = (0.1 / omega).min(0.05);
    let input = InputSignal::sinusoid(1.0, omega)?;
    let warmup = simulate(
        sys,
        &input,
        &vec![0.0; sys.state_dim()],
        &SolverConfig::rk45(settle).with_max_step(max_step),
    )?;
    // `settle` is a whole number of periods, so the input restarts in phase
    let x_settled = warmup.states()[warmup.len() - 1].clone();
    let cfg = SolverConfig::rk45(4.0 * period).with_max_step(max_step);
    let tr = simulate(sys, &input, &x_settled, &cfg)?;
    let (t, y) = (tr.times(), tr.outputs());
    let project = |f: fn(f64) -> f64| {
        let w: Vec<f64> = t.iter().zip(y).map(|(&ti, &yi)| yi * f(omega * ti)).collect();
        2.0 * simpson_with_jumps(t, &w, &w) / (4.0 * period)
    };
    Ok(FrequencyResponse {
        omega,
        re: project(f64::sin),
        im: project(f64::cos),
    })
}
