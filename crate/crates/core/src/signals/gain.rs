use serde::Serialize;

use crate::certificates::{psi_eval, psi_smoothed_bound, psi_sup};
use crate::nonlinearity::{IntegralLaw, ProportionalLaw};

/// A closed-form gain function evaluated on a magnitude `s = |v| >= 0`.
///
/// These fill the input-cost slot `beta(|du/dt|)` and the output-cost slots
/// `alpha(|y|)`, `alpha_1(|dy/dt|)` of supply rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainFunction {
    /// `gamma^p s^p`.
    Power { gamma: f64, exponent: f64 },
    /// `scale * s * sinh(s)`.
    SSinh { scale: f64 },
    /// `scale * s * arsinh(s / rate)`.
    SArsinh { scale: f64, rate: f64 },
    /// Closed-form PI gain `kp max(2s - ks, 0)^2 / (4 ki)`.
    PiPsi { kp: f64, ki: f64, ks: f64 },
    /// Upper bound on the PI gain when the sign is tanh-smoothed:
    /// `min(psi(s) + kp ks TANH_GAP smoothing, kp s^2 / ki)`.
    PiPsiSmoothed {
        kp: f64,
        ki: f64,
        ks: f64,
        smoothing: f64,
    },
    /// `max(sup_r G(r)(2s - f(r)), sup_r G(r)(-2s - f(r)))`, computed numerically.
    PsiSup {
        proportional: ProportionalLaw,
        integral: IntegralLaw,
    },
    /// `f(s) G(s)`: the PI output cost. Even in `s` for the catalog laws.
    PiOutputCost {
        proportional: ProportionalLaw,
        integral: IntegralLaw,
    },
    Scaled {
        factor: f64,
        inner: Box<GainFunction>,
    },
    Sum { terms: Vec<GainFunction> },
}

impl GainFunction {
    /// `s^2`.
    pub fn square() -> Self {
        GainFunction::Power {
            gamma: 1.0,
            exponent: 2.0,
        }
    }

    /// `gamma^2 s^2`.
    pub fn quadratic(gamma: f64) -> Self {
        GainFunction::Power {
            gamma,
            exponent: 2.0,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        if factor == 1.0 {
            self
        } else {
            GainFunction::Scaled {
                factor,
                inner: Box::new(self),
            }
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        match self {
            GainFunction::Power { gamma, exponent } => (gamma * s).powf(*exponent),
            GainFunction::SSinh { scale } => scale * s * s.sinh(),
            GainFunction::SArsinh { scale, rate } => scale * s * (s / rate).asinh(),
            GainFunction::PiPsi { kp, ki, ks } => psi_eval(*kp, *ki, *ks, s),
            GainFunction::PiPsiSmoothed {
                kp,
                ki,
                ks,
                smoothing,
            } => psi_smoothed_bound(*kp, *ki, *ks, *smoothing, s),
            GainFunction::PsiSup {
                proportional,
                integral,
            } => psi_sup(proportional, integral, s).max(psi_sup(proportional, integral, -s)),
            GainFunction::PiOutputCost {
                proportional,
                integral,
            } => integral.force(s) * proportional.value(s),
            GainFunction::Scaled { factor, inner } => factor * inner.eval(s),
            GainFunction::Sum { terms } => terms.iter().map(|g| g.eval(s)).sum(),
        }
    }

    /// For a pure power law, `(gamma, exponent)`.
    pub fn as_power(&self) -> Option<(f64, f64)> {
        match *self {
            GainFunction::Power { gamma, exponent } => Some((gamma, exponent)),
            _ => None,
        }
    }

    /// Checks continuity, zero-only-at-zero and monotonicity on a log-spaced
    /// grid over `(0, s_max]`.
    pub fn check_class(&self, s_max: f64) -> ClassCheck {
        let grid = log_grid(1e-6 * s_max.min(1.0), s_max, 2000);
        let at_zero = self.eval(0.0);
        let values: Vec<f64> = grid.iter().map(|&s| self.eval(s)).collect();
        let zero_only_at_zero = at_zero == 0.0 && values.iter().all(|&v| v > 0.0);
        let nondecreasing = values
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs());
        let continuous = grid.iter().zip(&values).all(|(&s, &v)| {
            let nudged = self.eval(s * (1.0 + 1e-9));
            v.is_finite() && (nudged - v).abs() <= 1e-6 * (1.0 + v.abs())
        }) && (self.eval(grid[0]) - at_zero).abs() <= 1e-3 * (1.0 + values[values.len() - 1].abs());
        ClassCheck {
            continuous,
            zero_only_at_zero,
            nondecreasing,
        }
    }

    /// Checks `self(s) >= gamma^p s^p` on the same grid.
    pub fn dominates_power(&self, gamma: f64, exponent: f64, s_max: f64) -> bool {
        log_grid(1e-6 * s_max.min(1.0), s_max, 2000)
            .into_iter()
            .all(|s| {
                let bound = (gamma * s).powf(exponent);
                self.eval(s) >= bound * (1.0 - 1e-12)
            })
    }
}

/// Outcome of [`GainFunction::check_class`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassCheck {
    pub continuous: bool,
    pub zero_only_at_zero: bool,
    pub nondecreasing: bool,
}

impl ClassCheck {
    pub fn holds(&self) -> bool {
        self.continuous && self.zero_only_at_zero && self.nondecreasing
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(GainFunction::quadratic(2.0).eval(3.0), 36.0);
        assert_eq!(GainFunction::quadratic(2.0).eval(-3.0), 36.0);
        let ss = GainFunction::SSinh { scale: 1.0 };
        assert!((ss.eval(1.0) - 1f64.sinh()).abs() < 1e-15);
        let sa = GainFunction::SArsinh {
            scale: 1.0,
            rate: 2.0,
        };
        assert!((sa.eval(2.0) - 2.0 * 1f64.asinh()).abs() < 1e-15);
        let sum = GainFunction::Sum {
            terms: vec![GainFunction::square(), GainFunction::square().scaled(3.0)],
        };
        assert_eq!(sum.eval(2.0), 16.0);
    }

    #[test]
    fn catalog_gains_are_class_k() {
        let gains = [
            GainFunction::square(),
            GainFunction::Power {
                gamma: 0.5,
                exponent: 4.0 / 3.0,
            },
            GainFunction::SSinh { scale: 1.0 },
            GainFunction::SArsinh {
                scale: 2.0,
                rate: 0.5,
            },
        ];
        for g in &gains {
            assert!(g.check_class(10.0).holds(), "{g:?}");
        }
    }

    #[test]
    fn psi_alone_has_a_dead_zone() {
        let psi = GainFunction::PiPsi {
            kp: 1.0,
            ki: 1.0,
            ks: 1.0,
        };
        let check = psi.check_class(5.0);
        assert!(!check.zero_only_at_zero);
        assert!(check.nondecreasing && check.continuous);
        let supply_input = GainFunction::Sum {
            terms: vec![psi, GainFunction::quadratic(2.0)],
        };
        assert!(supply_input.check_class(5.0).holds());
    }

    #[test]
    fn power_domination() {
        assert!(GainFunction::square().dominates_power(1.0, 2.0, 100.0));
        assert!(!GainFunction::square().dominates_power(1.1, 2.0, 100.0));
        let sixth = GainFunction::Power {
            gamma: 1.0,
            exponent: 6.0,
        };
        assert!(sixth.dominates_power(1.0, 6.0, 10.0));
    }
}
