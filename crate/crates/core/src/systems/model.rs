use serde::Serialize;

use crate::error::{invalid, require_positive, Result};
use crate::nonlinearity::{IntegralLaw, ProportionalLaw, SectorNonlinearity};
use crate::signals::uniform_grid;

/// Structure of a catalog system.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SystemKind {
    /// `dx = rate (u - x)`, `y = u - x`.
    LinearHp { rate: f64 },
    /// `dx = rate sinh(u - x)`, `y = u - x`.
    SinhHp { rate: f64 },
    /// `dx = rate (u - x)^3`, `y = u - x`.
    CubicHp { rate: f64 },
    /// `dx = rate phi(u - x)`, `y = u - x`, with `phi` in `[lower, upper]`.
    SectorHp {
        rate: f64,
        nonlinearity: SectorNonlinearity,
        lower: f64,
        upper: f64,
    },
    /// `y'' + g(y) y' + f(y) = d'` with state `(y, y')` and input `d`.
    PiLoop {
        proportional: ProportionalLaw,
        integral: IntegralLaw,
    },
    /// Output of `upstream` drives `downstream`; state is `(x_up, x_down)`.
    Series {
        upstream: Box<SystemModel>,
        downstream: Box<SystemModel>,
    },
}

/// A SISO state-space system `dx = f(x, u)`, `y = g(x, u)`.
///
/// PI loops consume the input derivative in their dynamics, so every
/// evaluation takes both `u` and `du`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemModel {
    name: &'static str,
    kind: SystemKind,
}

/// Catalog names, in listing order.
pub const CATALOG: [&str; 6] = [
    "linear_hp",
    "sinh_hp",
    "cubic_hp",
    "sector_hp",
    "pi",
    "nonsmooth_pi",
];

/// The catalog entry `name` with its default parameters: rate 1 for the
/// filters, the tanh blend in `[0.5, 1]` for `sector_hp`,
/// `G = y + 0.5 y^3`, `f = y` for `pi`, and `kp = ki = ks = 1` with the
/// default smoothing for `nonsmooth_pi`.
pub fn default_system(name: &str) -> Result<SystemModel> {
    match name {
        "linear_hp" => linear_hp(1.0),
        "sinh_hp" => sinh_hp(1.0),
        "cubic_hp" => cubic_hp(1.0),
        "sector_hp" => sector_hp(1.0, SectorSpec::natural(SectorNonlinearity::catalog()[2])),
        "pi" => pi_closed_loop(
            ProportionalLaw::LinearCubic { kp: 1.0, k3: 0.5 },
            IntegralLaw::Linear { ki: 1.0 },
        ),
        "nonsmooth_pi" => nonsmooth_pi(1.0, 1.0, 1.0, DEFAULT_SIGN_SMOOTHING),
        _ => Err(invalid(
            "system",
            format!("unknown system `{name}`; expected one of {}", CATALOG.join(", ")),
        )),
    }
}

const CHECK_GRID_HALF_WIDTH: f64 = 10.0;
const CHECK_GRID_POINTS: usize = 10_001;

pub fn linear_hp(rate: f64) -> Result<SystemModel> {
    require_positive("lambda", rate)?;
    Ok(SystemModel {
        name: "linear_hp",
        kind: SystemKind::LinearHp { rate },
    })
}

pub fn sinh_hp(rate: f64) -> Result<SystemModel> {
    require_positive("lambda", rate)?;
    Ok(SystemModel {
        name: "sinh_hp",
        kind: SystemKind::SinhHp { rate },
    })
}

pub fn cubic_hp(rate: f64) -> Result<SystemModel> {
    require_positive("lambda", rate)?;
    Ok(SystemModel {
        name: "cubic_hp",
        kind: SystemKind::CubicHp { rate },
    })
}

/// Declared sector bounds plus a concrete nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorSpec {
    pub lower: f64,
    pub upper: f64,
    pub nonlinearity: SectorNonlinearity,
}

impl SectorSpec {
    /// Uses the tightest sector implied by the nonlinearity's slopes.
    pub fn natural(nonlinearity: SectorNonlinearity) -> Self {
        let (lower, upper) = nonlinearity.natural_sector();
        SectorSpec {
            lower,
            upper,
            nonlinearity,
        }
    }
}

/// Builds the sector-bounded filter after checking
/// `(phi(q) - lower q)(phi(q) - upper q) <= 0` on `q in [-10, 10]`.
pub fn sector_hp(rate: f64, spec: SectorSpec) -> Result<SystemModel> {
    require_positive("lambda", rate)?;
    spec.nonlinearity.validate()?;
    require_positive("sector lower bound", spec.lower)?;
    if !(spec.upper.is_finite() && spec.upper >= spec.lower) {
        return Err(invalid(
            "sector upper bound",
            format!("must be finite and >= lower bound {}", spec.lower),
        ));
    }
    for q in uniform_grid(-CHECK_GRID_HALF_WIDTH, CHECK_GRID_HALF_WIDTH, CHECK_GRID_POINTS) {
        let p = spec.nonlinearity.eval(q);
        let product = (p - spec.lower * q) * (p - spec.upper * q);
        if product > 1e-12 * (1.0 + p * p) {
            return Err(invalid(
                "nonlinearity",
                format!(
                    "phi({q}) = {p} leaves the sector [{}, {}]",
                    spec.lower, spec.upper
                ),
            ));
        }
    }
    Ok(SystemModel {
        name: "sector_hp",
        kind: SystemKind::SectorHp {
            rate,
            nonlinearity: spec.nonlinearity,
            lower: spec.lower,
            upper: spec.upper,
        },
    })
}

/// PI closed loop `y'' + g(y) y' + f(y) = d'` after checking
/// `G(0) = F(0) = 0`, `g >= g0 > 0` and `y f(y) > 0` on a grid.
pub fn pi_closed_loop(
    proportional: ProportionalLaw,
    integral: IntegralLaw,
) -> Result<SystemModel> {
    build_pi("pi", proportional, integral)
}

/// PI control with a sign term in the integral action:
/// `G(y) = kp y`, `f(y) = ki y + ks sgn(y)`. `smoothing > 0` replaces the
/// sign by `tanh(y / smoothing)`; `smoothing = 0` keeps the discontinuity.
pub fn nonsmooth_pi(kp: f64, ki: f64, ks: f64, smoothing: f64) -> Result<SystemModel> {
    build_pi(
        "nonsmooth_pi",
        ProportionalLaw::Linear { kp },
        IntegralLaw::Sign { ki, ks, smoothing },
    )
}

/// Default tanh width for the sign term.
pub const DEFAULT_SIGN_SMOOTHING: f64 = 1e-3;

fn build_pi(
    name: &'static str,
    proportional: ProportionalLaw,
    integral: IntegralLaw,
) -> Result<SystemModel> {
    proportional.validate()?;
    integral.validate()?;
    if proportional.value(0.0) != 0.0 || integral.potential(0.0) != 0.0 {
        return Err(invalid("pi laws", "G(0) and F(0) must vanish"));
    }
    let g0 = proportional.min_slope();
    for y in uniform_grid(-CHECK_GRID_HALF_WIDTH, CHECK_GRID_HALF_WIDTH, CHECK_GRID_POINTS) {
        if proportional.slope(y) < g0 {
            return Err(invalid("proportional", format!("g({y}) < g0 = {g0}")));
        }
        if y != 0.0 && !(y * integral.force(y) > 0.0) {
            return Err(invalid("integral", format!("y f(y) <= 0 at y = {y}")));
        }
    }
    Ok(SystemModel {
        name,
        kind: SystemKind::PiLoop {
            proportional,
            integral,
        },
    })
}

impl SystemModel {
    pub(crate) fn series(upstream: SystemModel, downstream: SystemModel) -> SystemModel {
        SystemModel {
            name: "series",
            kind: SystemKind::Series {
                upstream: Box::new(upstream),
                downstream: Box::new(downstream),
            },
        }
    }

    /// Catalog name (`linear_hp`, ..., `nonsmooth_pi`, or `series`).
    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Name with parameters, e.g. `linear_hp(lambda=2)`.
    pub fn label(&self) -> String {
        match &self.kind {
            SystemKind::LinearHp { rate }
            | SystemKind::SinhHp { rate }
            | SystemKind::CubicHp { rate } => format!("{}(lambda={rate})", self.name),
            SystemKind::SectorHp {
                rate, lower, upper, ..
            } => format!("sector_hp(lambda={rate}, sector=[{lower}, {upper}])"),
            SystemKind::PiLoop {
                proportional,
                integral,
            } => format!(
                "{}(kp={}, ki={}, ks={}, smoothing={})",
                self.name,
                proportional.min_slope(),
                integral.linear_gain(),
                integral.sign_gain(),
                integral.smoothing()
            ),
            SystemKind::Series {
                upstream,
                downstream,
            } => format!("{} -> {}", upstream.label(), downstream.label()),
        }
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn state_dim(&self) -> usize {
        match &self.kind {
            SystemKind::PiLoop { .. } => 2,
            SystemKind::Series {
                upstream,
                downstream,
            } => upstream.state_dim() + downstream.state_dim(),
            _ => 1,
        }
    }

    /// Rate constant of the first-order filters.
    pub fn rate(&self) -> Option<f64> {
        match self.kind {
            SystemKind::LinearHp { rate }
            | SystemKind::SinhHp { rate }
            | SystemKind::CubicHp { rate }
            | SystemKind::SectorHp { rate, .. } => Some(rate),
            _ => None,
        }
    }

    /// A decay rate used to size simulation horizons: `lambda` for the
    /// filters (`lambda * lower` for sector filters) and the slowest
    /// linearized decay rate for PI loops.
    pub fn nominal_rate(&self) -> f64 {
        match &self.kind {
            SystemKind::LinearHp { rate }
            | SystemKind::SinhHp { rate }
            | SystemKind::CubicHp { rate } => *rate,
            SystemKind::SectorHp { rate, lower, .. } => rate * lower,
            SystemKind::PiLoop {
                proportional,
                integral,
            } => {
                let damping = proportional.slope(0.0);
                let stiffness = integral.stiffness_at_zero();
                let disc = damping * damping - 4.0 * stiffness;
                if disc < 0.0 {
                    0.5 * damping
                } else {
                    0.5 * (damping - disc.sqrt())
                }
            }
            SystemKind::Series {
                upstream,
                downstream,
            } => upstream.nominal_rate().min(downstream.nominal_rate()),
        }
    }

    /// `(upstream, downstream)` components of a series system.
    pub fn series_parts(&self) -> Option<(&SystemModel, &SystemModel)> {
        match &self.kind {
            SystemKind::Series {
                upstream,
                downstream,
            } => Some((upstream, downstream)),
            _ => None,
        }
    }

    /// Resistor current `lambda phi(y)` of the filter examples.
    fn filter_flow(&self, y: f64) -> f64 {
        match &self.kind {
            SystemKind::LinearHp { rate } => rate * y,
            SystemKind::SinhHp { rate } => rate * y.sinh(),
            SystemKind::CubicHp { rate } => rate * y * y * y,
            SystemKind::SectorHp {
                rate, nonlinearity, ..
            } => rate * nonlinearity.eval(y),
            _ => unreachable!("filter_flow on a non-filter system"),
        }
    }

    /// Writes `dx/dt` into `dx`.
    pub fn dynamics(&self, x: &[f64], u: f64, du: f64, dx: &mut [f64]) {
        match &self.kind {
            SystemKind::PiLoop {
                proportional,
                integral,
            } => {
                let (y, v) = (x[0], x[1]);
                dx[0] = v;
                dx[1] = du - proportional.slope(y) * v - integral.force(y);
            }
            SystemKind::Series {
                upstream,
                downstream,
            } => {
                let split = upstream.state_dim();
                let (xu, xd) = x.split_at(split);
                let (dxu, dxd) = dx.split_at_mut(split);
                upstream.dynamics(xu, u, du, dxu);
                let mid = upstream.output(xu, u);
                let dmid = upstream.output_derivative(xu, u, du);
                downstream.dynamics(xd, mid, dmid, dxd);
            }
            _ => dx[0] = self.filter_flow(u - x[0]),
        }
    }

    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        match &self.kind {
            SystemKind::PiLoop { .. } => x[0],
            SystemKind::Series {
                upstream,
                downstream,
            } => {
                let (xu, xd) = x.split_at(upstream.state_dim());
                downstream.output(xd, upstream.output(xu, u))
            }
            _ => u - x[0],
        }
    }

    /// `dy/dt` by the chain rule, hand-coded per catalog entry.
    pub fn output_derivative(&self, x: &[f64], u: f64, du: f64) -> f64 {
        match &self.kind {
            SystemKind::PiLoop { .. } => x[1],
            SystemKind::Series {
                upstream,
                downstream,
            } => {
                let (xu, xd) = x.split_at(upstream.state_dim());
                let mid = upstream.output(xu, u);
                let dmid = upstream.output_derivative(xu, u, du);
                downstream.output_derivative(xd, mid, dmid)
            }
            _ => du - self.filter_flow(u - x[0]),
        }
    }

    /// `(dy/dx, dy/du)`.
    pub fn output_gradient(&self, x: &[f64], u: f64) -> (Vec<f64>, f64) {
        match &self.kind {
            SystemKind::PiLoop { .. } => (vec![1.0, 0.0], 0.0),
            SystemKind::Series {
                upstream,
                downstream,
            } => {
                let (xu, xd) = x.split_at(upstream.state_dim());
                let (gu_x, gu_u) = upstream.output_gradient(xu, u);
                let (gd_x, gd_u) = downstream.output_gradient(xd, upstream.output(xu, u));
                let mut grad: Vec<f64> = gu_x.iter().map(|g| gd_u * g).collect();
                grad.extend(gd_x);
                (grad, gd_u * gu_u)
            }
            _ => (vec![-1.0], 1.0),
        }
    }

    /// Dry-friction level `ks` of a PI loop with an exact sign term: at rest
    /// on `y = 0` the sign term can balance any `|dd| < ks`.
    pub(crate) fn sticking_level(&self) -> Option<f64> {
        match &self.kind {
            SystemKind::PiLoop { integral, .. } if integral.is_discontinuous() => Some(integral.sign_gain()),
            _ => None,
        }
    }

    /// Signal whose sign change marks a discontinuity of the right-hand side.
    pub(crate) fn switching_signal(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            SystemKind::PiLoop { integral, .. } if integral.is_discontinuous() => Some(x[0]),
            SystemKind::Series {
                upstream,
                downstream,
            } => {
                let (xu, xd) = x.split_at(upstream.state_dim());
                upstream
                    .switching_signal(xu)
                    .or_else(|| downstream.switching_signal(xd))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rhs(sys: &SystemModel, x: &[f64], u: f64, du: f64) -> Vec<f64> {
        let mut dx = vec![0.0; sys.state_dim()];
        sys.dynamics(x, u, du, &mut dx);
        dx
    }

    #[test]
    fn linear_filter_substitution() {
        let s = linear_hp(1.0).unwrap();
        assert_eq!(rhs(&s, &[0.0], 1.0, 0.0), vec![1.0]);
        assert_eq!(s.output(&[0.0], 1.0), 1.0);
        let s2 = linear_hp(2.0).unwrap();
        assert_eq!(rhs(&s2, &[3.0], 3.0, 0.0), vec![0.0]);
        assert_eq!(s2.output(&[3.0], 3.0), 0.0);
        // dy = du - lambda y
        assert_eq!(s2.output_derivative(&[1.0], 2.0, 0.5), 0.5 - 2.0);
    }

    #[test]
    fn rejects_nonpositive_rates() {
        assert!(linear_hp(0.0).is_err());
        assert!(sinh_hp(-1.0).is_err());
        assert!(cubic_hp(f64::NAN).is_err());
    }

    #[test]
    fn sinh_and_cubic_evaluations() {
        let s = sinh_hp(1.0).unwrap();
        assert_eq!(rhs(&s, &[0.7], 0.7, 0.0), vec![0.0]);
        assert!((rhs(&s, &[0.0], 1.0, 0.0)[0] - 1.1752011936438014).abs() < 1e-15);
        let c = cubic_hp(2.0).unwrap();
        assert_eq!(rhs(&c, &[1.0], 1.0, 0.0), vec![0.0]);
        assert_eq!(rhs(&c, &[0.0], 2.0, 0.0), vec![16.0]);
        assert_eq!(cubic_hp(1.0).unwrap().output_derivative(&[0.0], 2.0, 0.0), -8.0);
    }

    #[test]
    fn unit_sector_is_linear() {
        let phi = SectorNonlinearity::RationalBlend {
            inner_slope: 1.0,
            outer_slope: 1.0,
        };
        let s = sector_hp(1.5, SectorSpec::natural(phi)).unwrap();
        let l = linear_hp(1.5).unwrap();
        for &(x, u) in &[(0.0, 1.0), (2.0, -1.0), (0.3, 0.31)] {
            assert_eq!(rhs(&s, &[x], u, 0.0), rhs(&l, &[x], u, 0.0));
        }
    }

    #[test]
    fn sector_violation_rejected() {
        let phi = SectorNonlinearity::RationalBlend {
            inner_slope: 2.0,
            outer_slope: 1.0,
        };
        let declared = SectorSpec {
            lower: 1.0,
            upper: 1.5,
            nonlinearity: phi,
        };
        assert!(sector_hp(1.0, declared).is_err());
        assert!(sector_hp(1.0, SectorSpec::natural(phi)).is_ok());
    }

    #[test]
    fn linear_pi_recovers_second_order_loop() {
        let s = pi_closed_loop(
            ProportionalLaw::Linear { kp: 2.0 },
            IntegralLaw::Linear { ki: 3.0 },
        )
        .unwrap();
        // y'' = d' - kp y' - ki y
        assert_eq!(rhs(&s, &[0.5, -1.0], 9.0, 0.25), vec![-1.0, 0.25 + 2.0 - 1.5]);
        assert_eq!(rhs(&s, &[0.0, 0.0], 0.0, 0.0), vec![0.0, 0.0]);
        assert_eq!(s.output(&[0.5, -1.0], 9.0), 0.5);
        assert_eq!(s.output_derivative(&[0.5, -1.0], 9.0, 0.0), -1.0);
    }

    #[test]
    fn nonsmooth_pi_force() {
        let s = nonsmooth_pi(1.0, 2.0, 0.5, 1e-3).unwrap();
        let SystemKind::PiLoop { integral, .. } = s.kind() else {
            panic!()
        };
        assert!((integral.force(1.0) - 2.5).abs() < 1e-12);
        assert_eq!(integral.force(0.0), 0.0);
        assert!(nonsmooth_pi(-1.0, 1.0, 1.0, 1e-3).is_err());
        assert!(nonsmooth_pi(1.0, 1.0, 1.0, -1e-3).is_err());
    }

    #[test]
    fn nominal_rates() {
        assert_eq!(linear_hp(0.5).unwrap().nominal_rate(), 0.5);
        let pi = pi_closed_loop(
            ProportionalLaw::Linear { kp: 2.0 },
            IntegralLaw::Linear { ki: 1.0 },
        )
        .unwrap();
        assert!((pi.nominal_rate() - 1.0).abs() < 1e-12);
        assert!((nonsmooth_pi(1.0, 1.0, 1.0, 1e-3).unwrap().nominal_rate() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn series_output_gradient_chains() {
        let s = SystemModel::series(linear_hp(1.0).unwrap(), linear_hp(2.0).unwrap());
        assert_eq!(s.state_dim(), 2);
        let x = [0.3, -0.2];
        let u = 1.1;
        let (gx, gu) = s.output_gradient(&x, u);
        // y2 = (u - x0) - x1
        assert_eq!(gx, vec![-1.0, -1.0]);
        assert_eq!(gu, 1.0);
        assert!((s.output(&x, u) - (u - x[0] - x[1])).abs() < 1e-15);
    }
}
