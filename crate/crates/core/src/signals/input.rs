use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_finite, require_positive, Result};

/// One term `amplitude * sin(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl SineComponent {
    fn eval(&self, t: f64) -> (f64, f64) {
        let arg = self.omega * t + self.phase;
        (
            self.amplitude * arg.sin(),
            self.amplitude * self.omega * arg.cos(),
        )
    }
}

/// Polynomial `sum_k coeffs[k] (t - start)^k`, active from `start` until the
/// next piece begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPiece {
    pub start: f64,
    pub coeffs: Vec<f64>,
}

impl PolynomialPiece {
    fn eval(&self, t: f64) -> (f64, f64) {
        let s = t - self.start;
        let mut value = 0.0;
        let mut slope = 0.0;
        for &c in self.coeffs.iter().rev() {
            slope = slope * s + value;
            value = value * s + c;
        }
        (value, slope)
    }
}

/// Kind and parameters of an analytic test input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalSpec {
    Constant {
        value: f64,
    },
    /// Transition from 0 to `amplitude` over `[start, start + width]` with the
    /// C1 cubic kernel `3s^2 - 2s^3`.
    StepSmoothed {
        amplitude: f64,
        start: f64,
        width: f64,
    },
    /// `slope * min(t, hold_time)`.
    RampHold {
        slope: f64,
        hold_time: f64,
    },
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    SumOfSinusoids {
        components: Vec<SineComponent>,
    },
    PiecewisePolynomial {
        pieces: Vec<PolynomialPiece>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Analytic(SignalSpec),
    /// Cubic Hermite interpolation of sampled values and slopes.
    Sampled {
        t: Vec<f64>,
        v: Vec<f64>,
        dv: Vec<f64>,
        /// Left-limit derivatives; equal to `dv` except at kinks.
        dv_left: Vec<f64>,
    },
}

/// A scalar input `u(t)` with an exact derivative, defined for `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal(Repr);

/// Validates `spec` and builds the signal.
pub fn make_signal(spec: SignalSpec) -> Result<InputSignal> {
    match &spec {
        SignalSpec::Constant { value } => require_finite("value", *value)?,
        SignalSpec::StepSmoothed {
            amplitude,
            start,
            width,
        } => {
            require_finite("amplitude", *amplitude)?;
            if !(start.is_finite() && *start >= 0.0) {
                return Err(invalid("start", format!("must be nonnegative, got {start}")));
            }
            require_positive("width", *width)?;
        }
        SignalSpec::RampHold { slope, hold_time } => {
            require_finite("slope", *slope)?;
            require_positive("hold_time", *hold_time)?;
        }
        SignalSpec::Sinusoid {
            amplitude,
            omega,
            phase,
        } => {
            require_finite("amplitude", *amplitude)?;
            require_positive("omega", *omega)?;
            require_finite("phase", *phase)?;
        }
        SignalSpec::SumOfSinusoids { components } => {
            if components.is_empty() {
                return Err(invalid("components", "at least one sinusoid is required"));
            }
            for c in components {
                require_finite("amplitude", c.amplitude)?;
                require_positive("omega", c.omega)?;
                require_finite("phase", c.phase)?;
            }
        }
        SignalSpec::PiecewisePolynomial { pieces } => validate_pieces(pieces)?,
    }
    Ok(InputSignal(Repr::Analytic(spec)))
}

fn validate_pieces(pieces: &[PolynomialPiece]) -> Result<()> {
    let Some(first) = pieces.first() else {
        return Err(invalid("pieces", "at least one piece is required"));
    };
    if first.start != 0.0 {
        return Err(invalid("pieces", "the first piece must start at t = 0"));
    }
    for p in pieces {
        if p.coeffs.is_empty() {
            return Err(invalid("coeffs", "every piece needs at least one coefficient"));
        }
        if p.coeffs.iter().any(|c| !c.is_finite()) || !p.start.is_finite() {
            return Err(invalid("pieces", "coefficients and starts must be finite"));
        }
    }
    for w in pieces.windows(2) {
        if w[1].start <= w[0].start {
            return Err(invalid("pieces", "piece starts must be strictly increasing"));
        }
        let left = w[0].eval(w[1].start).0;
        let right = w[1].eval(w[1].start).0;
        if (left - right).abs() > 1e-9 * (1.0 + left.abs().max(right.abs())) {
            return Err(invalid(
                "pieces",
                format!(
                    "value jumps from {left} to {right} at t = {}; inputs must be continuous",
                    w[1].start
                ),
            ));
        }
    }
    Ok(())
}

impl InputSignal {
    pub fn constant(value: f64) -> Result<Self> {
        make_signal(SignalSpec::Constant { value })
    }

    pub fn sinusoid(amplitude: f64, omega: f64) -> Result<Self> {
        make_signal(SignalSpec::Sinusoid {
            amplitude,
            omega,
            phase: 0.0,
        })
    }

    pub fn ramp_hold(slope: f64, hold_time: f64) -> Result<Self> {
        make_signal(SignalSpec::RampHold { slope, hold_time })
    }

    pub fn smoothed_step(amplitude: f64, start: f64, width: f64) -> Result<Self> {
        make_signal(SignalSpec::StepSmoothed {
            amplitude,
            start,
            width,
        })
    }

    /// Cubic Hermite interpolant through samples `(t, v, dv)`; held constant
    /// after the last sample.
    pub fn from_samples(t: Vec<f64>, v: Vec<f64>, dv: Vec<f64>) -> Result<Self> {
        let dv_left = dv.clone();
        InputSignal::from_samples_with_kinks(t, v, dv, dv_left)
    }

    /// Like [`InputSignal::from_samples`] but with separate right (`dv`) and
    /// left (`dv_left`) derivatives at each knot. Knots where they differ are
    /// reported as breakpoints.
    pub fn from_samples_with_kinks(
        t: Vec<f64>,
        v: Vec<f64>,
        dv: Vec<f64>,
        dv_left: Vec<f64>,
    ) -> Result<Self> {
        let n = t.len();
        if n < 2 || v.len() != n || dv.len() != n || dv_left.len() != n {
            return Err(invalid("samples", "need >= 2 samples with matching lengths"));
        }
        if t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("samples", "times must start at 0 and increase strictly"));
        }
        if v.iter().chain(&dv).chain(&dv_left).any(|x| !x.is_finite()) {
            return Err(invalid("samples", "values must be finite"));
        }
        Ok(InputSignal(Repr::Sampled { t, v, dv, dv_left }))
    }

    pub fn spec(&self) -> Option<&SignalSpec> {
        match &self.0 {
            Repr::Analytic(spec) => Some(spec),
            Repr::Sampled { .. } => None,
        }
    }

    /// Exact value and derivative at `t`.
    ///
    /// # Panics
    /// If `t` is negative or NaN.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        assert!(t >= 0.0, "input evaluated at negative time {t}");
        match &self.0 {
            Repr::Analytic(spec) => eval_spec(spec, t),
            Repr::Sampled { t: ts, v, dv, dv_left } => hermite(ts, v, dv, dv_left, t),
        }
    }

    /// Left limit of [`InputSignal::eval`]; differs only at breakpoints where
    /// the derivative jumps.
    pub fn eval_left(&self, t: f64) -> (f64, f64) {
        match &self.0 {
            Repr::Analytic(SignalSpec::RampHold { slope, hold_time }) if t <= *hold_time => {
                (slope * t, *slope)
            }
            Repr::Analytic(SignalSpec::PiecewisePolynomial { pieces }) => {
                let idx = pieces.partition_point(|p| p.start < t).saturating_sub(1);
                pieces[idx].eval(t)
            }
            Repr::Sampled { t: ts, v, dv_left, .. } => match ts.binary_search_by(|x| x.total_cmp(&t)) {
                Ok(i) if i > 0 => (v[i], dv_left[i]),
                _ => self.eval(t),
            },
            _ => self.eval(t),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    /// The time after which the signal is exactly constant, if any.
    pub fn constant_after(&self) -> Option<f64> {
        match &self.0 {
            Repr::Analytic(spec) => match spec {
                SignalSpec::Constant { .. } => Some(0.0),
                SignalSpec::StepSmoothed { start, width, .. } => Some(start + width),
                SignalSpec::RampHold { hold_time, .. } => Some(*hold_time),
                SignalSpec::Sinusoid { amplitude, .. } => (*amplitude == 0.0).then_some(0.0),
                SignalSpec::SumOfSinusoids { components } => components
                    .iter()
                    .all(|c| c.amplitude == 0.0)
                    .then_some(0.0),
                SignalSpec::PiecewisePolynomial { pieces } => {
                    let last = pieces.last().expect("validated non-empty");
                    last.coeffs[1..]
                        .iter()
                        .all(|&c| c == 0.0)
                        .then_some(last.start)
                }
            },
            Repr::Sampled { t, .. } => t.last().copied(),
        }
    }

    /// Times where the derivative (or a higher one) is discontinuous.
    /// Integrators step exactly onto these.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.0 {
            Repr::Analytic(spec) => match spec {
                SignalSpec::StepSmoothed { start, width, .. } => {
                    let mut b = vec![*start, start + width];
                    b.retain(|&x| x > 0.0);
                    b
                }
                SignalSpec::RampHold { hold_time, .. } => vec![*hold_time],
                SignalSpec::PiecewisePolynomial { pieces } => {
                    pieces.iter().skip(1).map(|p| p.start).collect()
                }
                _ => Vec::new(),
            },
            Repr::Sampled { t, dv, dv_left, .. } => {
                let mut b: Vec<f64> = (1..t.len() - 1)
                    .filter(|&i| dv[i] != dv_left[i])
                    .map(|i| t[i])
                    .collect();
                b.push(t[t.len() - 1]);
                b
            }
        }
    }
}

fn eval_spec(spec: &SignalSpec, t: f64) -> (f64, f64) {
    match spec {
        SignalSpec::Constant { value } => (*value, 0.0),
        SignalSpec::StepSmoothed {
            amplitude,
            start,
            width,
        } => {
            if t <= *start {
                (0.0, 0.0)
            } else if t >= start + width {
                (*amplitude, 0.0)
            } else {
                let s = (t - start) / width;
                (
                    amplitude * s * s * (3.0 - 2.0 * s),
                    amplitude * 6.0 * s * (1.0 - s) / width,
                )
            }
        }
        SignalSpec::RampHold { slope, hold_time } => {
            if t < *hold_time {
                (slope * t, *slope)
            } else {
                (slope * hold_time, 0.0)
            }
        }
        SignalSpec::Sinusoid {
            amplitude,
            omega,
            phase,
        } => SineComponent {
            amplitude: *amplitude,
            omega: *omega,
            phase: *phase,
        }
        .eval(t),
        SignalSpec::SumOfSinusoids { components } => {
            components.iter().fold((0.0, 0.0), |(v, d), c| {
                let (cv, cd) = c.eval(t);
                (v + cv, d + cd)
            })
        }
        SignalSpec::PiecewisePolynomial { pieces } => {
            let idx = pieces.partition_point(|p| p.start <= t).saturating_sub(1);
            pieces[idx].eval(t)
        }
    }
}

fn hermite(ts: &[f64], v: &[f64], dv: &[f64], dv_left: &[f64], t: f64) -> (f64, f64) {
    let n = ts.len();
    if t >= ts[n - 1] {
        return (v[n - 1], 0.0);
    }
    let i = ts.partition_point(|&x| x <= t).saturating_sub(1).min(n - 2);
    let h = ts[i + 1] - ts[i];
    let s = (t - ts[i]) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * v[i] + h10 * h * dv[i] + h01 * v[i + 1] + h11 * h * dv_left[i + 1];
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let slope = d00 * v[i] + d10 * dv[i] + d01 * v[i + 1] + d11 * dv_left[i + 1];
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_constant() {
        let u = InputSignal::constant(0.0).unwrap();
        for &t in &[0.0, 1.0, 1e6] {
            assert_eq!(u.eval(t), (0.0, 0.0));
        }
        assert_eq!(InputSignal::constant(3.0).unwrap().eval(7.0), (3.0, 0.0));
    }

    #[test]
    fn sine_values() {
        let u = InputSignal::sinusoid(1.0, 2.0).unwrap();
        let (v, d) = u.eval(1.0);
        assert_eq!(v, 2f64.sin());
        assert_eq!(d, 2.0 * 2f64.cos());
        assert_eq!(InputSignal::sinusoid(2.0, 1.0).unwrap().eval(0.0), (0.0, 2.0));
    }

    #[test]
    fn ramp_hold_pieces() {
        let u = InputSignal::ramp_hold(1.0, 2.0).unwrap();
        assert_eq!(u.eval(1.0), (1.0, 1.0));
        assert_eq!(u.eval(5.0), (2.0, 0.0));
        assert_eq!(u.eval(2.0), (2.0, 0.0));
        assert_eq!(u.constant_after(), Some(2.0));
    }

    #[test]
    fn smoothed_step_tail_is_flat() {
        let u = InputSignal::smoothed_step(1.0, 0.0, 0.1).unwrap();
        let (v, d) = u.eval(5.0);
        assert_eq!(v, 1.0);
        assert!(d.abs() < 1e-12);
        // kernel midpoint: value 1/2, slope 1.5 / width
        let (v, d) = u.eval(0.05);
        assert!(close(v, 0.5, 1e-15));
        assert!(close(d, 15.0, 1e-12));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(InputSignal::smoothed_step(1.0, 0.0, 0.0).is_err());
        assert!(InputSignal::smoothed_step(1.0, 0.0, -1.0).is_err());
        assert!(InputSignal::sinusoid(1.0, 0.0).is_err());
        assert!(make_signal(SignalSpec::PiecewisePolynomial { pieces: vec![] }).is_err());
        assert!(make_signal(SignalSpec::SumOfSinusoids { components: vec![] }).is_err());
        let jump = SignalSpec::PiecewisePolynomial {
            pieces: vec![
                PolynomialPiece {
                    start: 0.0,
                    coeffs: vec![0.0, 1.0],
                },
                PolynomialPiece {
                    start: 1.0,
                    coeffs: vec![5.0],
                },
            ],
        };
        assert!(make_signal(jump).is_err());
    }

    #[test]
    fn piecewise_polynomial_matches_ramp_hold() {
        let pp = make_signal(SignalSpec::PiecewisePolynomial {
            pieces: vec![
                PolynomialPiece {
                    start: 0.0,
                    coeffs: vec![0.0, 1.0],
                },
                PolynomialPiece {
                    start: 2.0,
                    coeffs: vec![2.0],
                },
            ],
        })
        .unwrap();
        let rh = InputSignal::ramp_hold(1.0, 2.0).unwrap();
        for &t in &[0.0, 0.5, 1.999, 2.0, 3.0] {
            assert_eq!(pp.eval(t), rh.eval(t));
        }
        assert_eq!(pp.constant_after(), Some(2.0));
        let quad = make_signal(SignalSpec::PiecewisePolynomial {
            pieces: vec![PolynomialPiece {
                start: 0.0,
                coeffs: vec![1.0, -2.0, 3.0],
            }],
        })
        .unwrap();
        assert_eq!(quad.eval(2.0), (9.0, 10.0));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| (t * t * t - 2.0 * t, 3.0 * t * t - 2.0);
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let (v, dv): (Vec<f64>, Vec<f64>) = t.iter().map(|&x| f(x)).unzip();
        let u = InputSignal::from_samples(t, v, dv).unwrap();
        for &x in &[0.0, 0.17, 1.5, 2.99] {
            let (a, b) = u.eval(x);
            let (ea, eb) = f(x);
            assert!(close(a, ea, 1e-12) && close(b, eb, 1e-11), "t = {x}");
        }
    }

    #[test]
    fn spec_deserializes_from_tagged_form() {
        let spec: SignalSpec =
            serde_json::from_str(r#"{"kind":"ramp-hold","slope":0.5,"hold_time":3}"#).unwrap();
        assert_eq!(
            spec,
            SignalSpec::RampHold {
                slope: 0.5,
                hold_time: 3.0
            }
        );
    }
}
