use serde::Serialize;

use super::SystemModel;
use crate::error::{Error, Result};
use crate::format::{csv_row, f17};
use crate::signals::Trace;

/// Step counts and error estimates reported by the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct SolverStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest scaled local error estimate of an accepted step (adaptive only).
    #[serde(serialize_with = "f17")]
    pub max_error_estimate: f64,
    /// Relative tolerance the run was held to, used to scale check tolerances.
    #[serde(serialize_with = "f17")]
    pub relative_tolerance: f64,
}

/// Sampled solution of a [`SystemModel`]. Outputs are recomputed from the
/// stored states and inputs, never integrated separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    system: SystemModel,
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
    u: Vec<f64>,
    du: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    // Left limits of du and dy; they differ from du, dy only at input kinks.
    du_left: Vec<f64>,
    dy_left: Vec<f64>,
    stats: SolverStats,
}

impl Trajectory {
    pub fn from_states(
        system: SystemModel,
        t: Vec<f64>,
        x: Vec<Vec<f64>>,
        u: Vec<f64>,
        du: Vec<f64>,
        stats: SolverStats,
    ) -> Result<Self> {
        let n = t.len();
        if x.len() != n || u.len() != n || du.len() != n {
            return Err(Error::MalformedTrace(
                "state and input samples must match the time grid".into(),
            ));
        }
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedTrace(
                "time grid must start at 0 and increase strictly".into(),
            ));
        }
        let dim = system.state_dim();
        if let Some(bad) = x.iter().find(|xi| xi.len() != dim) {
            return Err(Error::StateDimension {
                system: system.label(),
                expected: dim,
                got: bad.len(),
            });
        }
        let y = (0..n).map(|i| system.output(&x[i], u[i])).collect();
        let dy: Vec<f64> = (0..n)
            .map(|i| system.output_derivative(&x[i], u[i], du[i]))
            .collect();
        Ok(Trajectory {
            system,
            t,
            x,
            u,
            du_left: du.clone(),
            dy_left: dy.clone(),
            du,
            y,
            dy,
            stats,
        })
    }

    /// Attaches left limits of the input rate, for inputs whose rate jumps
    /// at some sample times.
    pub fn with_left_input_rates(mut self, du_left: Vec<f64>) -> Result<Self> {
        if du_left.len() != self.t.len() {
            return Err(Error::MalformedTrace(
                "left input rates must match the time grid".into(),
            ));
        }
        self.dy_left = (0..self.t.len())
            .map(|i| self.system.output_derivative(&self.x[i], self.u[i], du_left[i]))
            .collect();
        self.du_left = du_left;
        Ok(self)
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn stats(&self) -> &SolverStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn inputs(&self) -> &[f64] {
        &self.u
    }

    pub fn input_rates(&self) -> &[f64] {
        &self.du
    }

    /// Left limits of the input rate; equal to [`Self::input_rates`] away
    /// from kinks.
    pub fn input_rates_left(&self) -> &[f64] {
        &self.du_left
    }

    pub fn output_rates_left(&self) -> &[f64] {
        &self.dy_left
    }

    /// Sample indices where the input rate jumps.
    pub fn kinks(&self) -> Vec<usize> {
        (0..self.t.len()).filter(|&i| self.du_left[i] != self.du[i]).collect()
    }

    pub fn outputs(&self) -> &[f64] {
        &self.y
    }

    pub fn output_rates(&self) -> &[f64] {
        &self.dy
    }

    fn trace(&self, v: &[f64]) -> Trace {
        Trace::new(self.t.clone(), v.to_vec()).expect("trajectory grid is validated")
    }

    pub fn state_trace(&self, k: usize) -> Trace {
        let v: Vec<f64> = self.x.iter().map(|xi| xi[k]).collect();
        self.trace(&v)
    }

    pub fn input_trace(&self) -> Trace {
        self.trace(&self.u)
    }

    pub fn input_rate_trace(&self) -> Trace {
        self.trace(&self.du)
    }

    pub fn output_trace(&self) -> Trace {
        self.trace(&self.y)
    }

    pub fn output_rate_trace(&self) -> Trace {
        self.trace(&self.dy)
    }

    /// Sub-trajectory restricted to states `range` driven by the given
    /// input samples; used to split series runs.
    pub(crate) fn component(
        &self,
        system: SystemModel,
        range: std::ops::Range<usize>,
        u: Vec<f64>,
        du: Vec<f64>,
        du_left: Vec<f64>,
    ) -> Result<Trajectory> {
        let x = self.x.iter().map(|xi| xi[range.clone()].to_vec()).collect();
        Trajectory::from_states(system, self.t.clone(), x, u, du, self.stats)?
            .with_left_input_rates(du_left)
    }

    /// CSV with header `t,x0[,x1...],u,du,y,dy`.
    pub fn to_csv(&self) -> String {
        let dim = self.system.state_dim();
        let mut out = String::from("t");
        for k in 0..dim {
            out.push_str(&format!(",x{k}"));
        }
        out.push_str(",u,du,y,dy\n");
        for i in 0..self.t.len() {
            let row = std::iter::once(self.t[i])
                .chain(self.x[i].iter().copied())
                .chain([self.u[i], self.du[i], self.y[i], self.dy[i]]);
            out.push_str(&csv_row(row));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{linear_hp, nonsmooth_pi};

    #[test]
    fn outputs_recomputed_from_states() {
        let sys = linear_hp(2.0).unwrap();
        let tr = Trajectory::from_states(
            sys,
            vec![0.0, 1.0],
            vec![vec![0.0], vec![0.5]],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            SolverStats::default(),
        )
        .unwrap();
        assert_eq!(tr.outputs(), &[1.0, 0.5]);
        assert_eq!(tr.output_rates(), &[-2.0, -1.0]);
    }

    #[test]
    fn csv_header_matches_dimension() {
        let sys = nonsmooth_pi(1.0, 1.0, 1.0, 1e-3).unwrap();
        let tr = Trajectory::from_states(
            sys,
            vec![0.0, 0.5],
            vec![vec![1.0, 0.0], vec![0.9, -0.1]],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            SolverStats::default(),
        )
        .unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,x0,x1,u,du,y,dy\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn rejects_bad_grids() {
        let sys = linear_hp(1.0).unwrap();
        let r = Trajectory::from_states(
            sys.clone(),
            vec![0.1, 1.0],
            vec![vec![0.0], vec![0.0]],
            vec![0.0; 2],
            vec![0.0; 2],
            SolverStats::default(),
        );
        assert!(r.is_err());
        let r = Trajectory::from_states(
            sys,
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![0.0; 2],
            vec![0.0; 2],
            SolverStats::default(),
        );
        assert!(matches!(r, Err(Error::StateDimension { .. })));
    }
}
