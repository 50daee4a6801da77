use serde::Serialize;

use super::storage::StorageFunction;
use crate::error::{invalid, require_positive, Error, Result};
use crate::format::f17;
use crate::nonlinearity::{IntegralLaw, ProportionalLaw, SectorNonlinearity, TANH_GAP};
use crate::signals::{cumulative_trapezoid_with_jumps, uniform_grid};
use crate::systems::{SystemKind, Trajectory};

/// Closed-form PI gain `kp max(2|s| - ks, 0)^2 / (4 ki)`.
pub fn psi_eval(kp: f64, ki: f64, ks: f64, s: f64) -> f64 {
    let e = (2.0 * s.abs() - ks).max(0.0);
    kp * e * e / (4.0 * ki)
}

/// Upper bound on `sup_r kp r (2s - ki r - ks tanh(r / smoothing))`.
///
/// `r tanh(r / d) >= |r| - TANH_GAP d` gives the first bound, dropping the
/// sign term entirely gives `kp s^2 / ki`.
pub fn psi_smoothed_bound(kp: f64, ki: f64, ks: f64, smoothing: f64, s: f64) -> f64 {
    if smoothing <= 0.0 {
        return psi_eval(kp, ki, ks, s);
    }
    (psi_eval(kp, ki, ks, s) + kp * ks * TANH_GAP * smoothing).min(kp * s * s / ki)
}

/// `max_{r in grid} kp r (2s - ki r - ks sgn r)`.
pub fn psi_numeric_sup(kp: f64, ki: f64, ks: f64, s: f64, r_grid: &[f64]) -> f64 {
    r_grid
        .iter()
        .map(|&r| {
            let sgn = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            kp * r * (2.0 * s - ki * r - ks * sgn)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sup_r G(r) (2s - f(r))` for general laws: expanding grid search, then
/// golden-section refinement around the best grid point.
pub fn psi_sup(proportional: &ProportionalLaw, integral: &IntegralLaw, s: f64) -> f64 {
    let h = |r: f64| proportional.value(r) * (2.0 * s - integral.force(r));
    let mut half_width = 4.0 * (1.0 + s.abs());
    let n = 801;
    loop {
        let grid = uniform_grid(-half_width, half_width, n);
        let (idx, best) = grid
            .iter()
            .map(|&r| h(r))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if (idx == 0 || idx == n - 1) && half_width < 1e6 {
            half_width *= 4.0;
            continue;
        }
        let step = grid[1] - grid[0];
        let (mut a, mut b) = (grid[idx] - step, grid[idx] + step);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (h(c), h(d));
        for _ in 0..80 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = h(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = h(d);
            }
        }
        // r = 0 always gives 0, and the smoothed sign makes small r matter.
        return best.max(fc).max(fd).max(0.0);
    }
}

/// Result of a grid inequality check: the smallest slack and where it occurs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackReport {
    pub name: String,
    pub holds: bool,
    #[serde(serialize_with = "f17")]
    pub min_slack: f64,
    pub argmin: [f64; 2],
    pub points: usize,
    /// `false` for slacks that are measured and reported but not asserted.
    pub asserted: bool,
}

impl SlackReport {
    fn new(name: &str, asserted: bool) -> Self {
        SlackReport {
            name: name.into(),
            holds: true,
            min_slack: f64::INFINITY,
            argmin: [f64::NAN; 2],
            points: 0,
            asserted,
        }
    }

    fn record(&mut self, slack: f64, at: [f64; 2], tol: f64) {
        self.points += 1;
        if slack < self.min_slack {
            self.min_slack = slack;
            self.argmin = at;
        }
        if slack < -tol {
            self.holds = false;
        }
    }
}

/// Square grid `[-half_width, half_width]^2` with `per_axis` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub per_axis: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, per_axis: usize) -> Self {
        GridSpec {
            half_width,
            per_axis,
        }
    }

    fn axis(&self) -> Vec<f64> {
        uniform_grid(-self.half_width, self.half_width, self.per_axis)
    }
}

/// Checks `|y du| <= (lambda/2) y sinh(y) + du arsinh(du / lambda)` on a grid
/// over `(y, du)`.
pub fn fenchel_check(lambda: f64, grid: GridSpec) -> Result<SlackReport> {
    require_positive("lambda", lambda)?;
    if grid.per_axis < 2 {
        return Err(invalid("grid", "need at least 2 points per axis"));
    }
    let axis = grid.axis();
    let mut rep = SlackReport::new("fenchel", true);
    for &y in &axis {
        let ys = 0.5 * lambda * y * y.sinh();
        for &v in &axis {
            let rhs = ys + v * (v / lambda).asinh();
            let slack = rhs - (y * v).abs();
            rep.record(slack, [y, v], 1e-12 * (1.0 + rhs.abs()));
        }
    }
    Ok(rep)
}

/// Sector inequalities with `p = phi(q)` on a grid over `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorEstimates {
    #[serde(serialize_with = "f17")]
    pub lower: f64,
    #[serde(serialize_with = "f17")]
    pub upper: f64,
    /// `(p - a q)(p - b q) <= 0`.
    pub membership: SlackReport,
    /// `p q >= (p^2 + a b q^2) / (a + b)`.
    pub power_estimate: SlackReport,
    /// `p^2 <= (a + b) p q - a b q^2`, the rearranged membership inequality.
    pub quadratic_estimate: SlackReport,
    /// `p^2 <= a b q^2 - (a + b) p q`, measured as written; not asserted.
    pub chain_as_written: SlackReport,
    /// `p^2 <= a b q^2`, measured; not asserted.
    pub shortcut: SlackReport,
}

impl SectorEstimates {
    /// All asserted inequalities hold.
    pub fn holds(&self) -> bool {
        self.membership.holds && self.power_estimate.holds && self.quadratic_estimate.holds
    }
}

/// Evaluates the sector inequalities on `per_axis` points of
/// `[-half_width, half_width]` (the second grid axis is unused).
pub fn sector_estimates_check(
    lower: f64,
    upper: f64,
    phi: &SectorNonlinearity,
    grid: GridSpec,
) -> Result<SectorEstimates> {
    require_positive("sector lower bound", lower)?;
    if !(upper >= lower && upper.is_finite()) {
        return Err(invalid("sector upper bound", "must be finite and >= lower"));
    }
    let mut out = SectorEstimates {
        lower,
        upper,
        membership: SlackReport::new("membership", true),
        power_estimate: SlackReport::new("power_estimate", true),
        quadratic_estimate: SlackReport::new("quadratic_estimate", true),
        chain_as_written: SlackReport::new("chain_as_written", false),
        shortcut: SlackReport::new("shortcut", false),
    };
    let (a, b) = (lower, upper);
    for q in uniform_grid(-grid.half_width, grid.half_width, grid.per_axis) {
        let p = phi.eval(q);
        let at = [q, p];
        let tol = 1e-12 * (1.0 + p * p + q * q);
        out.membership.record(-(p - a * q) * (p - b * q), at, tol);
        out.power_estimate
            .record(p * q - (p * p + a * b * q * q) / (a + b), at, tol);
        out.quadratic_estimate
            .record((a + b) * p * q - a * b * q * q - p * p, at, tol);
        out.chain_as_written
            .record(a * b * q * q - (a + b) * p * q - p * p, at, tol);
        out.shortcut.record(a * b * q * q - p * p, at, tol);
    }
    Ok(out)
}

/// Prefix check of the nonsmooth-PI gain inequality
/// `int (kp ki y^2 + kp ks |y| + kp dy^2) <= int (psi(dd) + 4 dd^2 / kp) + V(0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustGainReport {
    pub holds: bool,
    #[serde(serialize_with = "f17")]
    pub min_slack: f64,
    #[serde(serialize_with = "f17")]
    pub argmin_time: f64,
    #[serde(serialize_with = "f17")]
    pub initial_storage: f64,
    /// Extra right-hand side per unit time from tanh smoothing:
    /// `2 kp ks TANH_GAP smoothing`.
    #[serde(serialize_with = "f17")]
    pub smoothing_allowance_rate: f64,
    #[serde(serialize_with = "f17")]
    pub final_cost: f64,
    #[serde(serialize_with = "f17")]
    pub final_bound: f64,
    pub samples: usize,
}

/// Runs the prefix check on a trajectory of a PI loop with
/// `G = kp y`, `f = ki y + ks sgn(y)` (possibly smoothed).
pub fn robust_gain_inequality_check(
    traj: &Trajectory,
    kp: f64,
    ki: f64,
    ks: f64,
) -> Result<RobustGainReport> {
    require_positive("kp", kp)?;
    require_positive("ki", ki)?;
    require_positive("ks", ks)?;
    let SystemKind::PiLoop {
        proportional,
        integral,
    } = traj.system().kind()
    else {
        return Err(Error::SystemMismatch {
            certificate: "nonsmooth_pi gain inequality".into(),
            trajectory: traj.system().label(),
        });
    };
    let smoothing = integral.smoothing();
    let t = traj.times();
    let y = traj.outputs();
    let cost = |dy: &[f64]| -> Vec<f64> {
        (0..t.len())
            .map(|i| kp * ki * y[i] * y[i] + kp * ks * y[i].abs() + kp * dy[i] * dy[i])
            .collect()
    };
    let gain = |dd: &[f64]| -> Vec<f64> {
        dd.iter()
            .map(|&d| psi_eval(kp, ki, ks, d) + 4.0 * d * d / kp)
            .collect()
    };
    let lhs = cumulative_trapezoid_with_jumps(
        t,
        &cost(traj.output_rates()),
        &cost(traj.output_rates_left()),
    );
    let rhs = cumulative_trapezoid_with_jumps(
        t,
        &gain(traj.input_rates()),
        &gain(traj.input_rates_left()),
    );
    let storage = StorageFunction::PiEnergy {
        proportional: *proportional,
        integral: *integral,
    };
    let sys = traj.system();
    let v: Vec<f64> = (0..t.len())
        .map(|i| storage.eval(sys, &traj.states()[i], traj.inputs()[i]))
        .collect();
    let vdot = |dd: &[f64]| -> Vec<f64> {
        (0..t.len())
            .map(|i| storage.derivative(sys, &traj.states()[i], traj.inputs()[i], dd[i]))
            .collect()
    };
    let vdot_int = cumulative_trapezoid_with_jumps(
        t,
        &vdot(traj.input_rates()),
        &vdot(traj.input_rates_left()),
    );
    let rate = 2.0 * kp * ks * TANH_GAP * smoothing;
    let rtol = traj.stats().relative_tolerance;
    let mut rep = RobustGainReport {
        holds: true,
        min_slack: f64::INFINITY,
        argmin_time: 0.0,
        initial_storage: v[0],
        smoothing_allowance_rate: rate,
        final_cost: lhs[lhs.len() - 1],
        final_bound: rhs[rhs.len() - 1] + v[0] + rate * t[t.len() - 1],
        samples: t.len(),
    };
    let mut quad = 0.0f64;
    for i in 0..t.len() {
        quad = quad.max((vdot_int[i] - (v[i] - v[0])).abs());
        let slack = rhs[i] + v[0] + rate * t[i] - lhs[i];
        let scale = 1.0 + lhs[i].abs() + rhs[i].abs();
        let tol = 1e-8 + 10.0 * rtol * scale + 2.0 * quad;
        if slack < rep.min_slack {
            rep.min_slack = slack;
            rep.argmin_time = t[i];
        }
        if slack < -tol {
            rep.holds = false;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_examples() {
        assert_eq!(psi_eval(1.0, 1.0, 1.0, 0.0), 0.0);
        assert_eq!(psi_eval(1.0, 1.0, 1.0, 1.0), 0.25);
        assert_eq!(psi_eval(1.0, 1.0, 1.0, -1.0), 0.25);
        assert_eq!(psi_eval(2.0, 1.0, 1.0, 0.4), 0.0);
        let grid = uniform_grid(-10.0, 10.0, 100_001);
        let numeric = psi_numeric_sup(1.0, 1.0, 1.0, 1.0, &grid);
        assert!((numeric - 0.25).abs() < 1e-4);
    }

    #[test]
    fn general_sup_matches_closed_form() {
        let g = ProportionalLaw::Linear { kp: 1.5 };
        let f = IntegralLaw::Sign {
            ki: 0.7,
            ks: 0.4,
            smoothing: 0.0,
        };
        for &s in &[-3.0, -0.5, 0.0, 0.1, 0.9, 2.5] {
            let closed = psi_eval(1.5, 0.7, 0.4, s);
            assert!((psi_sup(&g, &f, s) - closed).abs() < 1e-9, "s = {s}");
        }
        let lin = IntegralLaw::Linear { ki: 2.0 };
        assert!((psi_sup(&g, &lin, 1.0) - 1.5 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn smoothed_bound_dominates_smoothed_sup() {
        let g = ProportionalLaw::Linear { kp: 1.0 };
        for &delta in &[1e-3, 0.1, 1.0] {
            let f = IntegralLaw::Sign {
                ki: 1.0,
                ks: 1.0,
                smoothing: delta,
            };
            for &s in &[0.0, 0.3, 0.5, 0.6, 1.0, 4.0] {
                let sup = psi_sup(&g, &f, s);
                let bound = psi_smoothed_bound(1.0, 1.0, 1.0, delta, s);
                assert!(sup <= bound + 1e-12, "delta {delta} s {s}: {sup} > {bound}");
            }
        }
    }

    #[test]
    fn fenchel_small_cases() {
        let rep = fenchel_check(1.0, GridSpec::new(10.0, 201)).unwrap();
        assert!(rep.holds);
        // grid includes the origin, where the slack is exactly 0
        assert_eq!(rep.min_slack, 0.0);
        let one = 0.5 * 1f64.sinh();
        assert!((one - 0.5876005968219007).abs() < 1e-15);
        assert!(fenchel_check(0.0, GridSpec::new(1.0, 3)).is_err());
    }

    #[test]
    fn sector_estimates_for_linear_shape() {
        let phi = SectorNonlinearity::RationalBlend {
            inner_slope: 1.0,
            outer_slope: 1.0,
        };
        let rep = sector_estimates_check(1.0, 1.0, &phi, GridSpec::new(10.0, 101)).unwrap();
        assert!(rep.holds());
        assert!(rep.power_estimate.min_slack.abs() < 1e-12);
    }

    #[test]
    fn shortcut_fails_for_steep_linear_shape() {
        let phi = SectorNonlinearity::RationalBlend {
            inner_slope: 1.5,
            outer_slope: 1.5,
        };
        let rep = sector_estimates_check(1.0, 2.0, &phi, GridSpec::new(2.0, 5)).unwrap();
        assert!(rep.holds());
        assert!(!rep.shortcut.holds);
        // at q = 2: p^2 = 9 against a b q^2 = 8
        assert!((rep.shortcut.min_slack + 1.0).abs() < 1e-12);
    }
}
