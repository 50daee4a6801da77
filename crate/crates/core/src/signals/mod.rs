//! Test inputs, sampled traces and the integrals every certificate check uses.

mod gain;
mod input;
mod trace;

pub use gain::{ClassCheck, GainFunction};
pub use input::{make_signal, InputSignal, PolynomialPiece, SignalSpec, SineComponent};
pub use trace::{
    cumulative_trapezoid, cumulative_trapezoid_with_jumps, simpson_with_jumps, trapezoid, uniform_grid, Trace,
    Window,
};

pub(crate) use trace::{interpolate, trapezoid_window};

use crate::error::{invalid, Error, Result};

/// Default fraction of the horizon treated as the tail.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

/// `(int_window |v|^p dt)^(1/p)` by the trapezoid rule.
pub fn lp_seminorm(tr: &Trace, p: f64, window: Window) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid("p", format!("exponent must be >= 1, got {p}")));
    }
    window.check_within(tr)?;
    let w: Vec<f64> = tr.values().iter().map(|v| v.abs().powf(p)).collect();
    let integral = trapezoid_window(tr.times(), &w, window.start, window.end);
    Ok(integral.max(0.0).powf(1.0 / p))
}

/// `int_window g(|v(t)|) dt` by the trapezoid rule.
pub fn integrate_gain(tr: &Trace, g: &GainFunction, window: Window) -> Result<f64> {
    window.check_within(tr)?;
    let w: Vec<f64> = tr.values().iter().map(|&v| g.eval(v)).collect();
    Ok(trapezoid_window(tr.times(), &w, window.start, window.end))
}

/// Second-order finite differences on the trace's own grid: central in the
/// interior, three-point one-sided at the ends. Non-uniform grids are handled.
pub fn numeric_derivative(tr: &Trace) -> Result<Trace> {
    let n = tr.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let t = tr.times();
    let v = tr.values();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        d[i] = (h1 * h1 * v[i + 1] - h2 * h2 * v[i - 1] - (h1 * h1 - h2 * h2) * v[i])
            / (h1 * h2 * (h1 + h2));
    }
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * v[0] + (h1 + h2) / (h1 * h2) * v[1]
        - h1 / (h2 * (h1 + h2)) * v[2];
    let (hb, ha) = (t[n - 1] - t[n - 2], t[n - 2] - t[n - 3]);
    d[n - 1] = (2.0 * hb + ha) / (hb * (hb + ha)) * v[n - 1] - (hb + ha) / (hb * ha) * v[n - 2]
        + hb / (ha * (hb + ha)) * v[n - 3];
    Trace::new(t.to_vec(), d)
}

/// Supremum of `|v|` over the final `fraction` of the trace duration.
/// The value interpolated at the window start is included.
pub fn tail_sup(tr: &Trace, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid(
            "window_fraction",
            format!("must lie in (0, 1), got {fraction}"),
        ));
    }
    let start = tr.end() - fraction * (tr.end() - tr.start());
    Ok(window_sup(tr, start, tr.end()))
}

pub(crate) fn window_sup(tr: &Trace, start: f64, end: f64) -> f64 {
    let t = tr.times();
    let v = tr.values();
    let edge = interpolate(t, v, start).abs().max(interpolate(t, v, end).abs());
    t.iter()
        .zip(v)
        .filter(|(&ti, _)| ti >= start && ti <= end)
        .fold(edge, |m, (_, &vi)| m.max(vi.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(end: f64, h: f64) -> Vec<f64> {
        let n = (end / h).round() as usize + 1;
        uniform_grid(0.0, end, n)
    }

    #[test]
    fn lp_examples() {
        let ones = Trace::from_fn(&grid(4.0, 0.5), |_| 1.0).unwrap();
        assert!((lp_seminorm(&ones, 2.0, Window::up_to(4.0)).unwrap() - 2.0).abs() < 1e-14);
        let zeros = ones.map(|_| 0.0);
        assert_eq!(lp_seminorm(&zeros, 3.0, Window::new(1.0, 2.5)).unwrap(), 0.0);
        let sine = Trace::from_fn(&grid(2.0 * PI, 2.0 * PI / 6284.0), f64::sin).unwrap();
        let norm = lp_seminorm(&sine, 2.0, Window::up_to(2.0 * PI)).unwrap();
        assert!((norm - PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn lp_rejects_bad_arguments() {
        let tr = Trace::from_fn(&grid(1.0, 0.1), |t| t).unwrap();
        assert!(lp_seminorm(&tr, 0.5, Window::up_to(1.0)).is_err());
        assert!(matches!(
            lp_seminorm(&tr, 2.0, Window::up_to(2.0)),
            Err(Error::WindowOutsideTrace { .. })
        ));
    }

    #[test]
    fn gain_integral_examples() {
        let zeros = Trace::from_fn(&grid(3.0, 0.1), |_| 0.0).unwrap();
        let ss = GainFunction::SSinh { scale: 1.0 };
        assert_eq!(integrate_gain(&zeros, &ss, Window::up_to(3.0)).unwrap(), 0.0);
        let ones = zeros.map(|_| 1.0);
        let g = GainFunction::quadratic(2.0);
        assert!((integrate_gain(&ones, &g, Window::up_to(3.0)).unwrap() - 12.0).abs() < 1e-12);
        let ramp = Trace::from_fn(&grid(1.0, 1e-3), |t| t).unwrap();
        let third = integrate_gain(&ramp, &GainFunction::square(), Window::up_to(1.0)).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn derivative_examples() {
        let g = grid(3.0, 0.01);
        let c = Trace::from_fn(&g, |_| 4.0).unwrap();
        assert!(numeric_derivative(&c).unwrap().values().iter().all(|&d| d.abs() < 1e-10));
        let lin = Trace::from_fn(&g, |t| t).unwrap();
        assert!(numeric_derivative(&lin)
            .unwrap()
            .values()
            .iter()
            .all(|&d| (d - 1.0).abs() < 1e-10));
        let h = 1e-3;
        let s = Trace::from_fn(&grid(3.0, h), f64::sin).unwrap();
        let d = numeric_derivative(&s).unwrap();
        let n = d.len();
        for i in 1..n - 1 {
            let t = d.times()[i];
            assert!((d.values()[i] - t.cos()).abs() < 1e-5);
        }
        assert!(numeric_derivative(&Trace::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn derivative_on_nonuniform_grid() {
        let t: Vec<f64> = (0..200).map(|i| (i as f64 * 0.01).powf(1.3)).collect();
        let tr = Trace::from_fn(&t, |x| x * x).unwrap();
        let d = numeric_derivative(&tr).unwrap();
        for (x, dx) in d.times().iter().zip(d.values()) {
            assert!((dx - 2.0 * x).abs() < 1e-10, "t = {x}");
        }
    }

    #[test]
    fn tail_sup_examples() {
        let g = grid(10.0, 1e-3);
        let zeros = Trace::from_fn(&g, |_| 0.0).unwrap();
        assert_eq!(tail_sup(&zeros, 0.2).unwrap(), 0.0);
        let decay = Trace::from_fn(&g, |t| (-t).exp()).unwrap();
        assert!((tail_sup(&decay, 0.2).unwrap() - (-8f64).exp()).abs() < 1e-12);
        assert_eq!(tail_sup(&decay.map(|_| 1.0), 0.2).unwrap(), 1.0);
        assert!(tail_sup(&decay, 1.0).is_err());
    }
}
