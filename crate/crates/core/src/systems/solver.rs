use serde::Serialize;

use super::{SolverStats, SystemModel, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::signals::InputSignal;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with error control.
    Rk45 {
        rtol: f64,
        atol: f64,
        min_step: f64,
        max_step: f64,
    },
}

/// Integrator settings for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub method: Method,
    pub horizon: f64,
    /// Runs abort once `|y|` exceeds this.
    pub output_limit: f64,
}

pub const DEFAULT_RTOL: f64 = 1e-9;
pub const DEFAULT_ATOL: f64 = 1e-12;
pub const DEFAULT_MIN_STEP: f64 = 1e-12;
pub const DEFAULT_MAX_STEP: f64 = 0.05;
pub const DEFAULT_OUTPUT_LIMIT: f64 = 50.0;

const STEP_BUDGET: usize = 20_000_000;
const EVENT_RESOLUTION: f64 = 1e-9;
// Exact-sign PI loops: a state this close to rest on `y = 0` is held at rest
// while `|dd| < ks`. Past this point the true solution creeps into the origin
// through ever smaller crossings that only cost steps.
const STICK_VELOCITY: f64 = 1e-4;
const STICK_EXCURSION: f64 = 1e-8;
const STICK_SCAN: usize = 8;

impl SolverConfig {
    /// Adaptive RK45 with the default tolerances.
    pub fn rk45(horizon: f64) -> Self {
        SolverConfig {
            method: Method::Rk45 {
                rtol: DEFAULT_RTOL,
                atol: DEFAULT_ATOL,
                min_step: DEFAULT_MIN_STEP,
                max_step: DEFAULT_MAX_STEP,
            },
            horizon,
            output_limit: DEFAULT_OUTPUT_LIMIT,
        }
    }

    pub fn rk4(step: f64, horizon: f64) -> Self {
        SolverConfig {
            method: Method::Rk4 { step },
            horizon,
            output_limit: DEFAULT_OUTPUT_LIMIT,
        }
    }

    /// Replaces the adaptive tolerances; no effect on RK4.
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        if let Method::Rk45 {
            rtol: r, atol: a, ..
        } = &mut self.method
        {
            *r = rtol;
            *a = atol;
        }
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        if let Method::Rk45 { max_step: m, .. } = &mut self.method {
            *m = max_step;
        }
        self
    }

    /// Effective relative accuracy: `rtol` for RK45, `clamp(h^4, 1e-12, 1e-4)` for RK4.
    pub fn relative_tolerance(&self) -> f64 {
        match self.method {
            Method::Rk45 { rtol, .. } => rtol,
            Method::Rk4 { step } => step.powi(4).clamp(1e-12, 1e-4),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.output_limit > 0.0) {
            return Err(invalid("output_limit", "must be positive"));
        }
        match self.method {
            Method::Rk4 { step } => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(invalid("step", format!("must be positive, got {step}")));
                }
            }
            Method::Rk45 {
                rtol,
                atol,
                min_step,
                max_step,
            } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    return Err(invalid("tolerances", "rtol and atol must be positive"));
                }
                if !(min_step > 0.0 && min_step <= max_step && max_step.is_finite()) {
                    return Err(invalid(
                        "step bounds",
                        format!("need 0 < min_step <= max_step, got {min_step}, {max_step}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Integrates `sys` from `x0` under `input` over `[0, cfg.horizon]`.
///
/// Input breakpoints are hit exactly. Stages evaluated at the right end of a
/// segment see the input's left limit, so kinks in `du` do not cost order.
pub fn simulate(
    sys: &SystemModel,
    input: &InputSignal,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if x0.len() != sys.state_dim() {
        return Err(Error::StateDimension {
            system: sys.label(),
            expected: sys.state_dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial state", "must be finite"));
    }
    let mut run = Run::new(sys, input, cfg);
    run.record(0.0, x0.to_vec())?;
    let mut edges = vec![0.0];
    edges.extend(
        input
            .breakpoints()
            .into_iter()
            .filter(|&b| b > 0.0 && b < cfg.horizon),
    );
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges.push(cfg.horizon);
    for seg in edges.windows(2) {
        match cfg.method {
            Method::Rk4 { step } => run.rk4_segment(seg[0], seg[1], step)?,
            Method::Rk45 {
                rtol,
                atol,
                min_step,
                max_step,
            } => run.rk45_segment(seg[0], seg[1], rtol, atol, min_step, max_step)?,
        }
    }
    run.stats.relative_tolerance = cfg.relative_tolerance();
    Trajectory::from_states(sys.clone(), run.t, run.x, run.u, run.du, run.stats)?
        .with_left_input_rates(run.du_left)
}

struct Run<'a> {
    sys: &'a SystemModel,
    input: &'a InputSignal,
    limit: f64,
    dim: usize,
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
    u: Vec<f64>,
    du: Vec<f64>,
    du_left: Vec<f64>,
    stats: SolverStats,
}

// Dormand-Prince tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl<'a> Run<'a> {
    fn new(sys: &'a SystemModel, input: &'a InputSignal, cfg: &SolverConfig) -> Self {
        Run {
            sys,
            input,
            limit: cfg.output_limit,
            dim: sys.state_dim(),
            t: Vec::new(),
            x: Vec::new(),
            u: Vec::new(),
            du: Vec::new(),
            du_left: Vec::new(),
            stats: SolverStats::default(),
        }
    }

    fn rhs(&self, time: f64, seg_end: f64, x: &[f64], out: &mut [f64]) {
        let (u, du) = if time >= seg_end {
            self.input.eval_left(seg_end)
        } else {
            self.input.eval(time)
        };
        self.sys.dynamics(x, u, du, out);
    }

    fn record(&mut self, time: f64, x: Vec<f64>) -> Result<()> {
        let (u, du) = self.input.eval(time);
        let y = self.sys.output(&x, u);
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::Divergence {
                time,
                reason: "non-finite state".into(),
            });
        }
        if y.abs() > self.limit {
            return Err(Error::Divergence {
                time,
                reason: format!("|y| = {} exceeds limit {}", y.abs(), self.limit),
            });
        }
        self.t.push(time);
        self.x.push(x);
        self.u.push(u);
        self.du.push(du);
        self.du_left
            .push(if time > 0.0 { self.input.eval_left(time).1 } else { du });
        Ok(())
    }

    /// The sticking level if `x` is close enough to rest on the switching
    /// surface at time `t` that the sign term holds it there.
    fn sticks(&self, t: f64, x: &[f64]) -> Option<f64> {
        let ks = self.sys.sticking_level()?;
        let (y, v) = (x[0], x[1]);
        let margin = ks - self.input.eval(t).1.abs();
        let resting = y.abs() <= EVENT_RESOLUTION
            && v.abs() <= STICK_VELOCITY
            && v * v <= 2.0 * margin * STICK_EXCURSION;
        (margin > 0.0 && resting).then_some(ks)
    }

    /// Holds the state at rest from `t` until `|dd|` reaches `ks` or the
    /// segment ends; returns the release time.
    fn hold_at_rest(&mut self, mut t: f64, b: f64, ks: f64, step: f64) -> Result<f64> {
        let rest = vec![0.0; self.dim];
        let input = self.input;
        let released = |s: f64| input.eval(s).1.abs() >= ks;
        while t < b {
            let t_next = (t + step).min(b);
            let mut bracket = None;
            let mut prev = t;
            for j in 1..=STICK_SCAN {
                let s = if j == STICK_SCAN { t_next } else { t + (t_next - t) * j as f64 / STICK_SCAN as f64 };
                if released(s) {
                    bracket = Some((prev, s));
                    break;
                }
                prev = s;
            }
            self.stats.accepted_steps += 1;
            if let Some((mut lo, mut hi)) = bracket {
                while hi - lo > EVENT_RESOLUTION {
                    let mid = 0.5 * (lo + hi);
                    if released(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                self.record(hi, rest)?;
                return Ok(hi);
            }
            self.record(t_next, rest.clone())?;
            t = t_next;
        }
        Ok(b)
    }

    fn last_state(&self) -> Vec<f64> {
        self.x[self.x.len() - 1].clone()
    }

    fn rk4_segment(&mut self, a: f64, b: f64, step: f64) -> Result<()> {
        let n = ((b - a) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        let d = self.dim;
        let mut x = self.last_state();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut tmp = vec![0.0; d];
        for i in 0..n {
            let t0 = a + i as f64 * h;
            let t1 = if i + 1 == n { b } else { a + (i + 1) as f64 * h };
            let h = t1 - t0;
            self.rhs(t0, b, &x, &mut k1);
            for j in 0..d {
                tmp[j] = x[j] + 0.5 * h * k1[j];
            }
            self.rhs(t0 + 0.5 * h, b, &tmp, &mut k2);
            for j in 0..d {
                tmp[j] = x[j] + 0.5 * h * k2[j];
            }
            self.rhs(t0 + 0.5 * h, b, &tmp, &mut k3);
            for j in 0..d {
                tmp[j] = x[j] + h * k3[j];
            }
            self.rhs(t1, b, &tmp, &mut k4);
            for j in 0..d {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            self.stats.accepted_steps += 1;
            self.record(t1, x.clone())?;
        }
        Ok(())
    }

    fn rk45_segment(
        &mut self,
        a: f64,
        b: f64,
        rtol: f64,
        atol: f64,
        min_step: f64,
        max_step: f64,
    ) -> Result<()> {
        let d = self.dim;
        let mut t = a;
        let mut x = self.last_state();
        let mut k = vec![vec![0.0; d]; 7];
        let mut stage = vec![0.0; d];
        let mut x_new = vec![0.0; d];
        let mut h = max_step.min(0.01 * (b - a).max(min_step));
        self.rhs(t, b, &x, &mut k[0]);
        while t < b {
            if let Some(ks) = self.sticks(t, &x) {
                t = self.hold_at_rest(t, b, ks, max_step)?;
                x.iter_mut().for_each(|v| *v = 0.0);
                if t >= b {
                    break;
                }
                self.rhs(t, b, &x, &mut k[0]);
                h = h.min(1e-3).max(min_step);
            }
            if self.stats.accepted_steps + self.stats.rejected_steps > STEP_BUDGET {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
            let last = t + h >= b - 1e-12 * b.abs().max(1.0);
            let h_try = if last { b - t } else { h };
            for s in 1..7 {
                for j in 0..d {
                    let mut acc = x[j];
                    for (r, kr) in k.iter().enumerate().take(s) {
                        acc += h_try * A[s][r] * kr[j];
                    }
                    stage[j] = acc;
                }
                let ts = if s >= 5 && last { b } else { t + C[s] * h_try };
                self.rhs(ts, b, &stage, &mut k[s]);
                if s == 6 {
                    x_new.copy_from_slice(&stage);
                }
            }
            let mut err: f64 = 0.0;
            for j in 0..d {
                let e: f64 = (0..7).map(|s| E[s] * k[s][j]).sum::<f64>() * h_try;
                let sc = atol + rtol * x[j].abs().max(x_new[j].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                err = f64::INFINITY;
            }
            let crossed = match (self.sys.switching_signal(&x), self.sys.switching_signal(&x_new)) {
                (Some(s0), Some(s1)) => s0 * s1 < 0.0 && h_try > EVENT_RESOLUTION,
                _ => false,
            };
            // A step straddling the switch at event resolution is accepted
            // whatever its error estimate, which the jump dominates.
            let at_event = h_try <= EVENT_RESOLUTION
                && matches!(
                    (self.sys.switching_signal(&x), self.sys.switching_signal(&x_new)),
                    (Some(s0), Some(s1)) if s0 * s1 <= 0.0
                );
            if (err <= 1.0 || at_event) && !crossed {
                t = if last { b } else { t + h_try };
                x.copy_from_slice(&x_new);
                self.stats.accepted_steps += 1;
                self.stats.max_error_estimate = self.stats.max_error_estimate.max(err);
                self.record(t, x.clone())?;
                // FSAL: the 7th stage is the next first stage.
                let k6 = k[6].clone();
                k[0].copy_from_slice(&k6);
                if last || self.sys.switching_signal(&x).is_some() {
                    self.rhs(t, b, &x, &mut k[0]);
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h_try * factor).min(max_step);
                if last {
                    h = h.max(min_step);
                }
            } else {
                self.stats.rejected_steps += 1;
                h = if crossed {
                    0.5 * h_try
                } else {
                    h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
                };
                if h < min_step {
                    return Err(Error::StepUnderflow { time: t, step: h });
                }
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(Error::Divergence {
                        time: t,
                        reason: "non-finite state".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{cubic_hp, linear_hp, nonsmooth_pi, pi_closed_loop, sinh_hp};
    use crate::nonlinearity::{IntegralLaw, ProportionalLaw};

    #[test]
    fn zero_input_stays_at_rest() {
        let sys = linear_hp(1.0).unwrap();
        let tr = simulate(&sys, &InputSignal::constant(0.0).unwrap(), &[0.0], &SolverConfig::rk45(5.0)).unwrap();
        assert!(tr.outputs().iter().all(|&y| y == 0.0));
        assert_eq!(tr.times()[0], 0.0);
        assert_eq!(tr.horizon(), 5.0);
    }

    #[test]
    fn step_response_decays_exponentially() {
        let sys = linear_hp(1.0).unwrap();
        let u = InputSignal::constant(1.0).unwrap();
        let tr = simulate(&sys, &u, &[0.0], &SolverConfig::rk45(5.0)).unwrap();
        for (&t, &y) in tr.times().iter().zip(tr.outputs()) {
            assert!((y - (-t).exp()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn cubic_closed_form() {
        let sys = cubic_hp(1.0).unwrap();
        let tr = simulate(&sys, &InputSignal::constant(1.0).unwrap(), &[0.0], &SolverConfig::rk45(4.0)).unwrap();
        let x_end = tr.states().last().unwrap()[0];
        assert!((x_end - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn sine_frequency_response() {
        let sys = linear_hp(1.0).unwrap();
        let u = InputSignal::sinusoid(1.0, 1.0).unwrap();
        let tr = simulate(&sys, &u, &[0.0], &SolverConfig::rk45(30.0)).unwrap();
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        for (&t, &y) in tr.times().iter().zip(tr.outputs()) {
            if t > 20.0 {
                let expected = amp * (t + std::f64::consts::FRAC_PI_4).sin();
                assert!((y - expected).abs() < 1e-4, "t = {t}");
            }
        }
    }

    #[test]
    fn critically_damped_pi() {
        let sys = pi_closed_loop(ProportionalLaw::Linear { kp: 2.0 }, IntegralLaw::Linear { ki: 1.0 }).unwrap();
        let tr = simulate(&sys, &InputSignal::constant(0.0).unwrap(), &[1.0, 0.0], &SolverConfig::rk45(10.0)).unwrap();
        for (&t, &y) in tr.times().iter().zip(tr.outputs()) {
            assert!((y - (1.0 + t) * (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_is_fourth_order_on_ramp_hold_pi() {
        let sys = pi_closed_loop(ProportionalLaw::Linear { kp: 1.0 }, IntegralLaw::Linear { ki: 2.0 }).unwrap();
        let u = InputSignal::ramp_hold(1.0, 2.0).unwrap();
        let reference = simulate(&sys, &u, &[0.0, 0.0], &SolverConfig::rk45(6.0).with_tolerances(1e-12, 1e-14)).unwrap();
        let y_ref = *reference.outputs().last().unwrap();
        let err = |h: f64| {
            let tr = simulate(&sys, &u, &[0.0, 0.0], &SolverConfig::rk4(h, 6.0)).unwrap();
            (tr.outputs().last().unwrap() - y_ref).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn divergence_guard() {
        let sys = linear_hp(1.0).unwrap();
        let u = InputSignal::ramp_hold(100.0, 10.0).unwrap();
        let r = simulate(&sys, &u, &[0.0], &SolverConfig::rk45(10.0));
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn dimension_and_config_errors() {
        let sys = linear_hp(1.0).unwrap();
        let u = InputSignal::constant(0.0).unwrap();
        assert!(matches!(
            simulate(&sys, &u, &[0.0, 1.0], &SolverConfig::rk45(1.0)),
            Err(Error::StateDimension { .. })
        ));
        assert!(simulate(&sys, &u, &[0.0], &SolverConfig::rk45(-1.0)).is_err());
        assert!(simulate(&sys, &u, &[0.0], &SolverConfig::rk4(0.0, 1.0)).is_err());
    }

    #[test]
    fn sinh_step_halving() {
        let sys = sinh_hp(1.0).unwrap();
        let u = InputSignal::sinusoid(5.0, 1.0).unwrap();
        let full = simulate(&sys, &u, &[0.0], &SolverConfig::rk45(10.0)).unwrap();
        let half = simulate(&sys, &u, &[0.0], &SolverConfig::rk45(10.0).with_max_step(0.025)).unwrap();
        let a = full.outputs().last().unwrap();
        let b = half.outputs().last().unwrap();
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn exact_sign_mode_runs() {
        let sys = nonsmooth_pi(1.0, 1.0, 1.0, 0.0).unwrap();
        let smooth = nonsmooth_pi(1.0, 1.0, 1.0, 1e-4).unwrap();
        let u = InputSignal::constant(0.0).unwrap();
        let a = simulate(&sys, &u, &[1.0, 0.0], &SolverConfig::rk45(5.0)).unwrap();
        let b = simulate(&smooth, &u, &[1.0, 0.0], &SolverConfig::rk45(5.0)).unwrap();
        let yb = b.output_trace();
        for (&t, &y) in a.times().iter().zip(a.outputs()) {
            assert!((y - yb.interpolate(t)).abs() < 1e-2);
        }
    }

    #[test]
    fn exact_sign_sticks_under_weak_forcing() {
        let sys = nonsmooth_pi(1.0, 1.0, 1.0, 0.0).unwrap();
        let u = InputSignal::sinusoid(1.0, 0.1).unwrap();
        let tr = simulate(&sys, &u, &[0.0, 0.0], &SolverConfig::rk45(10.0)).unwrap();
        assert!(tr.outputs().iter().all(|y| y.abs() < 1e-8));
    }
}
