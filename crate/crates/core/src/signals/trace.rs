use crate::error::{Error, Result};
use crate::format::csv_row;

/// A sampled signal on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl Trace {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.len() != v.len() {
            return Err(Error::MalformedTrace(format!(
                "{} times but {} values",
                t.len(),
                v.len()
            )));
        }
        if t.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: t.len(),
            });
        }
        if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedTrace(format!(
                "time grid not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Trace { t, v })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Trace::new(grid.to_vec(), grid.iter().map(|&t| f(t)).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn full_window(&self) -> Window {
        Window {
            start: self.start(),
            end: self.end(),
        }
    }

    /// Linear interpolation, clamped to the end samples.
    pub fn interpolate(&self, time: f64) -> f64 {
        interpolate(&self.t, &self.v, time)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Trace {
        Trace {
            t: self.t.clone(),
            v: self.v.iter().map(|&x| f(x)).collect(),
        }
    }

    /// CSV with header `t,v`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v\n");
        for (&t, &v) in self.t.iter().zip(&self.v) {
            out.push_str(&csv_row([t, v]));
            out.push('\n');
        }
        out
    }
}

/// Closed integration window `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Window { start, end }
    }

    /// `[0, end]`.
    pub fn up_to(end: f64) -> Self {
        Window { start: 0.0, end }
    }

    pub(crate) fn check_within(&self, tr: &Trace) -> Result<()> {
        let slop = 1e-12 * (1.0 + tr.end().abs());
        if !(self.start <= self.end)
            || self.start < tr.start() - slop
            || self.end > tr.end() + slop
        {
            return Err(Error::WindowOutsideTrace {
                start: self.start,
                end: self.end,
                support_start: tr.start(),
                support_end: tr.end(),
            });
        }
        Ok(())
    }
}

pub(crate) fn interpolate(t: &[f64], v: &[f64], time: f64) -> f64 {
    let n = t.len();
    if time <= t[0] {
        return v[0];
    }
    if time >= t[n - 1] {
        return v[n - 1];
    }
    let i = t.partition_point(|&x| x <= time) - 1;
    let w = (time - t[i]) / (t[i + 1] - t[i]);
    v[i] + w * (v[i + 1] - v[i])
}

/// Trapezoid rule over the piecewise-linear interpolant of `(t, w)`
/// restricted to `[a, b]`.
pub(crate) fn trapezoid_window(t: &[f64], w: &[f64], a: f64, b: f64) -> f64 {
    let a = a.max(t[0]);
    let b = b.min(t[t.len() - 1]);
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut prev_t = a;
    let mut prev_w = interpolate(t, w, a);
    let first = t.partition_point(|&x| x <= a);
    for i in first..t.len() {
        if t[i] >= b {
            break;
        }
        total += 0.5 * (prev_w + w[i]) * (t[i] - prev_t);
        prev_t = t[i];
        prev_w = w[i];
    }
    let end_w = interpolate(t, w, b);
    total + 0.5 * (prev_w + end_w) * (b - prev_t)
}

/// Running trapezoid integral; element `i` is the integral over `[t_0, t_i]`.
pub fn cumulative_trapezoid(t: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..t.len() {
        acc += 0.5 * (w[i] + w[i - 1]) * (t[i] - t[i - 1]);
        out.push(acc);
    }
    out
}

pub fn trapezoid(t: &[f64], w: &[f64]) -> f64 {
    cumulative_trapezoid(t, w).last().copied().unwrap_or(0.0)
}

/// Running trapezoid integral of an integrand with jumps at sample times:
/// `left[i]` is its left limit at `t[i]` and closes interval `i - 1`.
pub fn cumulative_trapezoid_with_jumps(t: &[f64], right: &[f64], left: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..t.len() {
        acc += 0.5 * (right[i - 1] + left[i]) * (t[i] - t[i - 1]);
        out.push(acc);
    }
    out
}

/// Composite Simpson rule on a nonuniform grid, restarted at every sample
/// where `left` and `right` differ. A segment with an odd number of
/// intervals closes with the quadratic through its last three samples; a
/// single-interval segment falls back to the trapezoid rule.
pub fn simpson_with_jumps(t: &[f64], right: &[f64], left: &[f64]) -> f64 {
    let n = t.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut a = 0;
    while a < n - 1 {
        let mut b = a + 1;
        while b < n - 1 && left[b] == right[b] {
            b += 1;
        }
        // nodes a..=b, using the right value at a and the left value at b
        let f = |i: usize| if i == a { right[i] } else { left[i] };
        let mut i = a;
        while i + 2 <= b {
            let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
            let hs = h0 + h1;
            total += hs / 6.0
                * ((2.0 - h1 / h0) * f(i) + hs * hs / (h0 * h1) * f(i + 1) + (2.0 - h0 / h1) * f(i + 2));
            i += 2;
        }
        if i < b {
            if b - a >= 2 {
                let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
                total += h1 / 6.0
                    * (-h1 * h1 / (h0 * (h0 + h1)) * f(i - 1)
                        + (3.0 * h0 + h1) / h0 * f(i)
                        + (3.0 * h0 + 2.0 * h1) / (h0 + h1) * f(i + 1));
            } else {
                total += 0.5 * (f(i) + f(i + 1)) * (t[i + 1] - t[i]);
            }
        }
        a = b;
    }
    total
}

/// `n` evenly spaced points covering `[start, end]`.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let h = (end - start) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { end } else { start + i as f64 * h })
        .collect()
}
