use serde::Serialize;

use crate::nonlinearity::{IntegralLaw, ProportionalLaw};
use crate::systems::SystemModel;

/// Closed-form storage functions `V(x, u)`.
///
/// The output-based forms are functions of `y = g(x, u)` only; their
/// gradients follow from the system's output gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StorageFunction {
    /// `c y^2`.
    OutputQuadratic { coefficient: f64 },
    /// `c y^4`.
    OutputQuartic { coefficient: f64 },
    /// `c cosh(y)`.
    OutputCosh { coefficient: f64 },
    /// `(dy + G(y))^2 + 4 F(y) + dy^2` on the PI state `(y, dy)`.
    PiEnergy {
        proportional: ProportionalLaw,
        integral: IntegralLaw,
    },
    /// `w V_up(x_up, u) + V_down(x_down, y_up)` on a series state.
    Series {
        upstream_weight: f64,
        upstream: Box<StorageFunction>,
        downstream: Box<StorageFunction>,
    },
}

impl StorageFunction {
    /// Value and derivative in `y` of the output-based forms.
    fn output_profile(&self, y: f64) -> Option<(f64, f64)> {
        match *self {
            StorageFunction::OutputQuadratic { coefficient: c } => Some((c * y * y, 2.0 * c * y)),
            StorageFunction::OutputQuartic { coefficient: c } => {
                let y2 = y * y;
                Some((c * y2 * y2, 4.0 * c * y2 * y))
            }
            StorageFunction::OutputCosh { coefficient: c } => Some((c * y.cosh(), c * y.sinh())),
            _ => None,
        }
    }

    pub fn eval(&self, sys: &SystemModel, x: &[f64], u: f64) -> f64 {
        if let Some((v, _)) = self.output_profile(sys.output(x, u)) {
            return v;
        }
        match self {
            StorageFunction::PiEnergy {
                proportional,
                integral,
            } => {
                let (y, v) = (x[0], x[1]);
                let a = v + proportional.value(y);
                a * a + 4.0 * integral.potential(y) + v * v
            }
            StorageFunction::Series {
                upstream_weight,
                upstream,
                downstream,
            } => {
                let (h, g) = sys.series_parts().expect("series storage on a series system");
                let (xh, xg) = x.split_at(h.state_dim());
                upstream_weight * upstream.eval(h, xh, u) + downstream.eval(g, xg, h.output(xh, u))
            }
            _ => unreachable!(),
        }
    }

    /// `(dV/dx, dV/du)`.
    pub fn gradient(&self, sys: &SystemModel, x: &[f64], u: f64) -> (Vec<f64>, f64) {
        if let Some((_, dv)) = self.output_profile(sys.output(x, u)) {
            let (gx, gu) = sys.output_gradient(x, u);
            return (gx.into_iter().map(|g| dv * g).collect(), dv * gu);
        }
        match self {
            StorageFunction::PiEnergy {
                proportional,
                integral,
            } => {
                let (y, v) = (x[0], x[1]);
                let a = v + proportional.value(y);
                let dy = 2.0 * a * proportional.slope(y) + 4.0 * integral.force(y);
                let dv = 2.0 * a + 2.0 * v;
                (vec![dy, dv], 0.0)
            }
            StorageFunction::Series {
                upstream_weight,
                upstream,
                downstream,
            } => {
                let (h, g) = sys.series_parts().expect("series storage on a series system");
                let (xh, xg) = x.split_at(h.state_dim());
                let mid = h.output(xh, u);
                let (vh_x, vh_u) = upstream.gradient(h, xh, u);
                let (vg_x, vg_mid) = downstream.gradient(g, xg, mid);
                let (mid_x, mid_u) = h.output_gradient(xh, u);
                let mut grad: Vec<f64> = vh_x
                    .iter()
                    .zip(&mid_x)
                    .map(|(a, m)| upstream_weight * a + vg_mid * m)
                    .collect();
                grad.extend(vg_x);
                (grad, upstream_weight * vh_u + vg_mid * mid_u)
            }
            _ => unreachable!(),
        }
    }

    /// `dV/dt = dV/dx . f(x, u, du) + dV/du . du`.
    pub fn derivative(&self, sys: &SystemModel, x: &[f64], u: f64, du: f64) -> f64 {
        let (gx, gu) = self.gradient(sys, x, u);
        let mut dx = vec![0.0; sys.state_dim()];
        sys.dynamics(x, u, du, &mut dx);
        gx.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>() + gu * du
    }

    /// Whether the form is nonnegative for every state (coefficients checked).
    pub fn is_nonnegative_form(&self) -> bool {
        match self {
            StorageFunction::OutputQuadratic { coefficient }
            | StorageFunction::OutputQuartic { coefficient }
            | StorageFunction::OutputCosh { coefficient } => *coefficient >= 0.0,
            StorageFunction::PiEnergy { .. } => true,
            StorageFunction::Series {
                upstream_weight,
                upstream,
                downstream,
            } => {
                *upstream_weight >= 0.0
                    && upstream.is_nonnegative_form()
                    && downstream.is_nonnegative_form()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{linear_hp, nonsmooth_pi};

    #[test]
    fn quadratic_derivative_examples() {
        let sys = linear_hp(1.0).unwrap();
        let v = StorageFunction::OutputQuadratic { coefficient: 1.0 };
        // y = u - x = 0
        assert_eq!(v.derivative(&sys, &[1.0], 1.0, 0.7), 0.0);
        // y = 1, du = 0: 2 y (du - y) = -2
        assert_eq!(v.derivative(&sys, &[0.0], 1.0, 0.0), -2.0);
    }

    #[test]
    fn pi_energy_derivative_matches_direct_formula() {
        let sys = nonsmooth_pi(1.3, 0.8, 0.5, 0.1).unwrap();
        let crate::systems::SystemKind::PiLoop {
            proportional,
            integral,
        } = *sys.kind()
        else {
            panic!()
        };
        let v = StorageFunction::PiEnergy {
            proportional,
            integral,
        };
        for &(y, dy, dd) in &[(0.3, -0.2, 0.5), (-1.0, 2.0, 0.0), (0.0, 0.0, 1.0)] {
            let direct = -2.0 * integral.force(y) * proportional.value(y)
                - 2.0 * proportional.slope(y) * dy * dy
                + 4.0 * dy * dd
                + 2.0 * proportional.value(y) * dd;
            let via_grad = v.derivative(&sys, &[y, dy], 0.0, dd);
            assert!((direct - via_grad).abs() < 1e-12);
        }
    }
}
