//! Static scalar nonlinearities shared by the system catalog, storage functions
//! and gain functions: sector-bounded resistors and the proportional/integral
//! laws of the PI closed loops.

use serde::Serialize;

use crate::error::{invalid, require_positive, Result};

/// `max_{z >= 0} z (1 - tanh z)`, attained near `z = 0.63923`.
///
/// Bounds the gap `|y| - y tanh(y / delta) <= TANH_GAP * delta`.
pub const TANH_GAP: f64 = 0.278_464_542_761_073_8;

/// A concrete nonlinear resistor `p = phi(q)`.
///
/// Each catalog shape has slope `inner_slope` near the origin and
/// `outer_slope` far away, so it lies in the sector spanned by the two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectorNonlinearity {
    /// Slope `inner_slope` on `|q| <= knee`, `outer_slope` beyond.
    SaturatedLinear {
        inner_slope: f64,
        outer_slope: f64,
        knee: f64,
    },
    /// `outer_slope * q + (inner_slope - outer_slope) * q / (1 + |q|)`.
    RationalBlend { inner_slope: f64, outer_slope: f64 },
    /// `outer_slope * q + (inner_slope - outer_slope) * tanh(q)`.
    TanhBlend { inner_slope: f64, outer_slope: f64 },
}

impl SectorNonlinearity {
    pub fn eval(&self, q: f64) -> f64 {
        match *self {
            SectorNonlinearity::SaturatedLinear {
                inner_slope,
                outer_slope,
                knee,
            } => {
                if q.abs() <= knee {
                    inner_slope * q
                } else {
                    q.signum() * (inner_slope * knee + outer_slope * (q.abs() - knee))
                }
            }
            SectorNonlinearity::RationalBlend {
                inner_slope,
                outer_slope,
            } => outer_slope * q + (inner_slope - outer_slope) * q / (1.0 + q.abs()),
            SectorNonlinearity::TanhBlend {
                inner_slope,
                outer_slope,
            } => outer_slope * q + (inner_slope - outer_slope) * q.tanh(),
        }
    }

    /// One example of each shape: a saturation in `[0.25, 1]`, a rational
    /// blend in `[0.5, 2]` and a tanh blend in `[0.5, 1]`.
    pub fn catalog() -> [SectorNonlinearity; 3] {
        [
            SectorNonlinearity::SaturatedLinear {
                inner_slope: 1.0,
                outer_slope: 0.25,
                knee: 1.0,
            },
            SectorNonlinearity::RationalBlend {
                inner_slope: 2.0,
                outer_slope: 0.5,
            },
            SectorNonlinearity::TanhBlend {
                inner_slope: 1.0,
                outer_slope: 0.5,
            },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            SectorNonlinearity::SaturatedLinear { .. } => "saturated_linear",
            SectorNonlinearity::RationalBlend { .. } => "rational_blend",
            SectorNonlinearity::TanhBlend { .. } => "tanh_blend",
        }
    }

    /// Slope at the origin.
    pub fn slope_at_zero(&self) -> f64 {
        match *self {
            SectorNonlinearity::SaturatedLinear { inner_slope, .. }
            | SectorNonlinearity::RationalBlend { inner_slope, .. }
            | SectorNonlinearity::TanhBlend { inner_slope, .. } => inner_slope,
        }
    }

    /// The tightest sector `[lower, upper]` implied by the two slopes.
    pub fn natural_sector(&self) -> (f64, f64) {
        let (a, b) = self.slopes();
        (a.min(b), a.max(b))
    }

    fn slopes(&self) -> (f64, f64) {
        match *self {
            SectorNonlinearity::SaturatedLinear {
                inner_slope,
                outer_slope,
                ..
            }
            | SectorNonlinearity::RationalBlend {
                inner_slope,
                outer_slope,
            }
            | SectorNonlinearity::TanhBlend {
                inner_slope,
                outer_slope,
            } => (inner_slope, outer_slope),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.slopes();
        require_positive("inner_slope", a)?;
        require_positive("outer_slope", b)?;
        if let SectorNonlinearity::SaturatedLinear { knee, .. } = *self {
            require_positive("knee", knee)?;
        }
        Ok(())
    }
}

/// Proportional term `G` of the PI law, with `g = G'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProportionalLaw {
    /// `G(y) = kp y`.
    Linear { kp: f64 },
    /// `G(y) = kp y + k3 y^3` with `k3 >= 0`.
    LinearCubic { kp: f64, k3: f64 },
}

impl ProportionalLaw {
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            ProportionalLaw::Linear { kp } => kp * y,
            ProportionalLaw::LinearCubic { kp, k3 } => kp * y + k3 * y * y * y,
        }
    }

    pub fn slope(&self, y: f64) -> f64 {
        match *self {
            ProportionalLaw::Linear { kp } => kp,
            ProportionalLaw::LinearCubic { kp, k3 } => kp + 3.0 * k3 * y * y,
        }
    }

    /// Lower bound `g0` on the slope.
    pub fn min_slope(&self) -> f64 {
        match *self {
            ProportionalLaw::Linear { kp } | ProportionalLaw::LinearCubic { kp, .. } => kp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProportionalLaw::Linear { kp } => require_positive("kp", kp),
            ProportionalLaw::LinearCubic { kp, k3 } => {
                require_positive("kp", kp)?;
                if !(k3.is_finite() && k3 >= 0.0) {
                    return Err(invalid("k3", format!("must be nonnegative, got {k3}")));
                }
                Ok(())
            }
        }
    }
}

/// Integral term of the PI law: force `f` and its potential `F` with `F' = f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegralLaw {
    /// `f(y) = ki y`, `F(y) = ki y^2 / 2`.
    Linear { ki: f64 },
    /// `f(y) = ki y + ks sgn(y)`. With `smoothing > 0` the sign is replaced
    /// by `tanh(y / smoothing)` and `|y|` in `F` by `smoothing * ln cosh(y / smoothing)`.
    Sign { ki: f64, ks: f64, smoothing: f64 },
}

impl IntegralLaw {
    pub fn force(&self, y: f64) -> f64 {
        match *self {
            IntegralLaw::Linear { ki } => ki * y,
            IntegralLaw::Sign { ki, ks, smoothing } => ki * y + ks * smoothed_sign(y, smoothing),
        }
    }

    pub fn potential(&self, y: f64) -> f64 {
        match *self {
            IntegralLaw::Linear { ki } => 0.5 * ki * y * y,
            IntegralLaw::Sign { ki, ks, smoothing } => {
                let abs_part = if smoothing > 0.0 {
                    smoothing * ln_cosh(y / smoothing)
                } else {
                    y.abs()
                };
                0.5 * ki * y * y + ks * abs_part
            }
        }
    }

    /// `f'(0)`, infinite for an unsmoothed sign.
    pub fn stiffness_at_zero(&self) -> f64 {
        match *self {
            IntegralLaw::Linear { ki } => ki,
            IntegralLaw::Sign { ki, ks, smoothing } => {
                if smoothing > 0.0 {
                    ki + ks / smoothing
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn linear_gain(&self) -> f64 {
        match *self {
            IntegralLaw::Linear { ki } | IntegralLaw::Sign { ki, .. } => ki,
        }
    }

    pub fn sign_gain(&self) -> f64 {
        match *self {
            IntegralLaw::Linear { .. } => 0.0,
            IntegralLaw::Sign { ks, .. } => ks,
        }
    }

    pub fn smoothing(&self) -> f64 {
        match *self {
            IntegralLaw::Linear { .. } => 0.0,
            IntegralLaw::Sign { smoothing, .. } => smoothing,
        }
    }

    /// True when `f` has a jump at the origin.
    pub fn is_discontinuous(&self) -> bool {
        matches!(*self, IntegralLaw::Sign { smoothing, .. } if smoothing == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            IntegralLaw::Linear { ki } => require_positive("ki", ki),
            IntegralLaw::Sign { ki, ks, smoothing } => {
                require_positive("ki", ki)?;
                require_positive("ks", ks)?;
                if !(smoothing.is_finite() && smoothing >= 0.0) {
                    return Err(invalid(
                        "smoothing",
                        format!("must be nonnegative, got {smoothing}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn smoothed_sign(y: f64, smoothing: f64) -> f64 {
    if smoothing > 0.0 {
        (y / smoothing).tanh()
    } else if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `ln cosh z` without overflow.
pub(crate) fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_gap_is_the_maximum() {
        let h = |z: f64| z * (1.0 - z.tanh());
        let grid_max = (0..=200_000)
            .map(|i| h(i as f64 * 2.5e-5))
            .fold(f64::MIN, f64::max);
        // grid spacing 2.5e-5 bounds the sampling loss by about 1e-10
        assert!(grid_max <= TANH_GAP && TANH_GAP - grid_max < 1e-9);
        assert!(h(0.639_232_262_467_344_1) <= TANH_GAP + 1e-16);
    }

    #[test]
    fn ln_cosh_matches_direct_formula() {
        for &z in &[0.0, 0.3, -2.0, 10.0] {
            let direct = f64::cosh(z).ln();
            assert!((ln_cosh(z) - direct).abs() < 1e-13, "z = {z}");
        }
        assert!((ln_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn potential_is_antiderivative_of_force() {
        let law = IntegralLaw::Sign {
            ki: 1.3,
            ks: 0.7,
            smoothing: 0.05,
        };
        let h = 1e-5;
        for &y in &[-1.0, -0.02, 0.0, 0.03, 2.0] {
            let fd = (law.potential(y + h) - law.potential(y - h)) / (2.0 * h);
            assert!((fd - law.force(y)).abs() < 1e-6, "y = {y}");
        }
        assert_eq!(law.potential(0.0), 0.0);
    }

    #[test]
    fn rational_blend_example() {
        let phi = SectorNonlinearity::RationalBlend {
            inner_slope: 2.0,
            outer_slope: 1.0,
        };
        assert!((phi.eval(1.0) - 1.5).abs() < 1e-15);
        assert_eq!(phi.natural_sector(), (1.0, 2.0));
    }

    #[test]
    fn saturated_linear_is_continuous_at_knee() {
        let phi = SectorNonlinearity::SaturatedLinear {
            inner_slope: 2.0,
            outer_slope: 1.0,
            knee: 0.5,
        };
        let eps = 1e-12;
        assert!((phi.eval(0.5 + eps) - phi.eval(0.5 - eps)).abs() < 1e-10);
        assert!((phi.eval(-3.0) + 1.0 + 2.5).abs() < 1e-14);
    }

    #[test]
    fn exact_sign_law() {
        let law = IntegralLaw::Sign {
            ki: 1.0,
            ks: 2.0,
            smoothing: 0.0,
        };
        assert_eq!(law.force(0.5), 2.5);
        assert_eq!(law.force(-0.5), -2.5);
        assert_eq!(law.force(0.0), 0.0);
        assert_eq!(law.potential(-1.0), 2.5);
        assert!(law.is_discontinuous());
    }
}
