//! Series interconnections.
//!
//! A series system feeds the output `y1` of an upstream system `H` into a
//! downstream system `G`. If `H` carries an asymptotic certificate bounding
//! `dy1/dt` by `du/dt` and `G` a certificate bounding its output by the rate
//! of its input, the weighted sum of the two storages certifies the cascade:
//! the intermediate terms cancel whenever `w alpha_H1 >= beta_G`.

use serde::Serialize;

use crate::certificates::{
    barbalat_verdict, certificate_catalog, prefix_check, storage_values, verify, BarbalatReport,
    BarbalatThresholds, Battery, Certificate, CheckTolerances, Form, Origin, ProbeIssue,
    StorageFunction, SupplyRate, VerdictReport,
};
use crate::error::{invalid, require_positive, Error, Result};
use crate::format::{f17, f17_opt, f17_slice};
use crate::parallel::map_ordered;
use crate::signals::{GainFunction, InputSignal};
use crate::systems::{simulate, SolverConfig, SystemModel, Trajectory};

/// Largest step used for the stage runs of [`SeriesSystem::simulate_staged`],
/// so the Hermite interpolant of the intermediate signal stays accurate.
pub const STAGED_MAX_STEP: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSystem {
    model: SystemModel,
}

/// Cascades `upstream` into `downstream`; the stacked state is
/// `(x_upstream, x_downstream)`.
pub fn compose_series(upstream: &SystemModel, downstream: &SystemModel) -> SeriesSystem {
    SeriesSystem {
        model: SystemModel::series(upstream.clone(), downstream.clone()),
    }
}

impl SeriesSystem {
    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn upstream(&self) -> &SystemModel {
        self.model.series_parts().expect("series model").0
    }

    pub fn downstream(&self) -> &SystemModel {
        self.model.series_parts().expect("series model").1
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    /// Integrates the stacked dynamics in one run.
    pub fn simulate(&self, input: &InputSignal, x0: &[f64], cfg: &SolverConfig) -> Result<SeriesTrajectory> {
        SeriesTrajectory::split(simulate(&self.model, input, x0, cfg)?)
    }

    /// Runs `H` alone, then drives `G` with the Hermite interpolant of the
    /// sampled `(y1, dy1/dt)`. Both runs use steps of at most
    /// [`STAGED_MAX_STEP`].
    pub fn simulate_staged(&self, input: &InputSignal, x0: &[f64], cfg: &SolverConfig) -> Result<StagedRun> {
        if x0.len() != self.state_dim() {
            return Err(Error::StateDimension {
                system: self.model.label(),
                expected: self.state_dim(),
                got: x0.len(),
            });
        }
        let cfg = match cfg.method {
            crate::systems::Method::Rk45 { max_step, .. } => cfg.with_max_step(max_step.min(STAGED_MAX_STEP)),
            crate::systems::Method::Rk4 { .. } => *cfg,
        };
        let (nh, h, g) = (self.upstream().state_dim(), self.upstream(), self.downstream());
        let upstream = simulate(h, input, &x0[..nh], &cfg)?;
        let mid = InputSignal::from_samples_with_kinks(
            upstream.times().to_vec(),
            upstream.outputs().to_vec(),
            upstream.output_rates().to_vec(),
            upstream.output_rates_left().to_vec(),
        )?;
        let downstream = simulate(g, &mid, &x0[nh..], &cfg)?;
        Ok(StagedRun { upstream, downstream })
    }
}

/// A series run split into its components. The downstream trajectory's
/// input is the upstream output and its rate, so component certificates can
/// be checked on it directly.
#[derive(Debug, Clone)]
pub struct SeriesTrajectory {
    pub composite: Trajectory,
    pub upstream: Trajectory,
    pub downstream: Trajectory,
}

impl SeriesTrajectory {
    pub fn split(composite: Trajectory) -> Result<Self> {
        let sys = composite.system().clone();
        let Some((h, g)) = sys.series_parts() else {
            return Err(invalid("trajectory", "not a trajectory of a series system"));
        };
        let nh = h.state_dim();
        let upstream = composite.component(
            h.clone(),
            0..nh,
            composite.inputs().to_vec(),
            composite.input_rates().to_vec(),
            composite.input_rates_left().to_vec(),
        )?;
        let downstream = composite.component(
            g.clone(),
            nh..sys.state_dim(),
            upstream.outputs().to_vec(),
            upstream.output_rates().to_vec(),
            upstream.output_rates_left().to_vec(),
        )?;
        Ok(SeriesTrajectory {
            composite,
            upstream,
            downstream,
        })
    }

    /// The intermediate signal `y1`.
    pub fn intermediate(&self) -> &[f64] {
        self.upstream.outputs()
    }

    pub fn intermediate_rates(&self) -> &[f64] {
        self.upstream.output_rates()
    }
}

#[derive(Debug, Clone)]
pub struct StagedRun {
    pub upstream: Trajectory,
    pub downstream: Trajectory,
}

impl StagedRun {
    /// `sup |y2_staged - y2_other|` at the sample times of `other`, with the
    /// staged output interpolated by cubic Hermite through `(y2, dy2/dt)`.
    pub fn sup_output_difference(&self, other: &Trajectory) -> f64 {
        let d = &self.downstream;
        let (t, y, dy) = (d.times(), d.outputs(), d.output_rates());
        let dy_left = d.output_rates_left();
        other
            .times()
            .iter()
            .zip(other.outputs())
            .map(|(&ti, &yi)| (hermite_at(t, y, dy, dy_left, ti) - yi).abs())
            .fold(0.0, f64::max)
    }
}

fn hermite_at(t: &[f64], y: &[f64], dy: &[f64], dy_left: &[f64], time: f64) -> f64 {
    let n = t.len();
    if time <= t[0] {
        return y[0];
    }
    if time >= t[n - 1] {
        return y[n - 1];
    }
    let i = t.partition_point(|&x| x <= time) - 1;
    let h = t[i + 1] - t[i];
    let s = (time - t[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y[i]
        + (s3 - 2.0 * s2 + s) * h * dy[i]
        + (-2.0 * s3 + 3.0 * s2) * y[i + 1]
        + (s3 - s2) * h * dy_left[i + 1]
}

/// `sup_{0 < s <= range} num(s) / den(s)` on a log grid reaching down to
/// `1e-8 range`. Fails when the ratio keeps growing towards zero, `den`
/// vanishes, or the ratio is not finite.
pub fn dominance_weight(num: &GainFunction, den: &GainFunction, range: f64) -> Result<f64> {
    require_positive("range", range)?;
    let n = 4001;
    let (a, b) = ((1e-8 * range).ln(), range.ln());
    let mut sup_all = 0.0f64;
    let mut sup_upper = 0.0f64;
    for i in 0..n {
        let s = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
        let d = den.eval(s);
        if !(d > 0.0) {
            return Err(Error::IncompatibleGains(format!("rate cost vanishes at {s:e}")));
        }
        let r = num.eval(s) / d;
        if !r.is_finite() {
            return Err(Error::IncompatibleGains(format!("ratio not finite at {s:e}")));
        }
        sup_all = sup_all.max(r);
        if s >= 1e-6 * range {
            sup_upper = sup_upper.max(r);
        }
    }
    if sup_all > sup_upper * (1.0 + 1e-2) {
        return Err(Error::IncompatibleGains(format!(
            "downstream input gain is not dominated by the upstream rate cost near zero \
             (ratio {sup_upper:.3e} at 1e-6 range, {sup_all:.3e} at 1e-8 range)"
        )));
    }
    Ok(sup_all)
}

/// Weighted-sum certificate of `H -> G` from `H`'s ANHP certificate and a
/// certificate of `G`, valid while `|dy1/dt| <= rate_range`.
///
/// With `w = sup beta_G / alpha_H1`, the storage is `w V_H1 + V_G` and the
/// supply `w beta_H1(|du|)` minus `G`'s cost. The result has `G`'s form.
pub fn composite_certificate(cert_h: &Certificate, cert_g: &Certificate, rate_range: f64) -> Result<Certificate> {
    if cert_h.form != Form::Anhp {
        return Err(invalid("upstream certificate", "must be of ANHP form"));
    }
    let alpha_h1 = cert_h
        .supply
        .rate_cost
        .as_ref()
        .ok_or_else(|| invalid("upstream certificate", "has no rate cost"))?;
    let weight = dominance_weight(&cert_g.supply.input_gain, alpha_h1, rate_range)?;
    let series = compose_series(&cert_h.system, &cert_g.system);
    let gain = match (cert_h.gain, cert_g.gain) {
        (Some(a), Some(b)) => Some(a * b),
        _ => None,
    };
    Ok(Certificate {
        system: series.model,
        label: format!("composite {} of [{}] then [{}]", cert_g.form.as_str(), cert_h.label, cert_g.label),
        form: cert_g.form,
        storage: StorageFunction::Series {
            upstream_weight: weight,
            upstream: Box::new(cert_h.storage.clone()),
            downstream: Box::new(cert_g.storage.clone()),
        },
        supply: SupplyRate {
            input_gain: cert_h.supply.input_gain.clone().scaled(weight),
            output_cost: cert_g.supply.output_cost.clone(),
            rate_cost: cert_g.supply.rate_cost.clone(),
        },
        gain,
        origin: Origin::Derived,
    })
}

/// The NHP/ANHP pair used for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCertificates {
    pub nhp: Certificate,
    pub anhp: Certificate,
}

impl ComponentCertificates {
    pub fn catalog(sys: &SystemModel) -> Result<Self> {
        Ok(ComponentCertificates {
            nhp: certificate_catalog(sys, Form::Nhp)?,
            anhp: certificate_catalog(sys, Form::Anhp)?,
        })
    }

    fn validate(&self, role: &'static str) -> Result<()> {
        if self.nhp.form != Form::Nhp || self.anhp.form != Form::Anhp || self.nhp.system != self.anhp.system {
            return Err(invalid(role, "need an NHP and an ANHP certificate of the same system"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Upstream certificates on the upstream run.
    A,
    /// Downstream certificates on the intermediate signal.
    B,
    /// Composite NHP bound.
    C,
    /// Composite ANHP bound.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeMode {
    /// A composite certificate was built and is checked.
    Certified,
    /// Gain functions are incompatible; composite gains are only measured.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub probe_id: String,
    pub check: String,
    #[serde(serialize_with = "f17")]
    pub min_margin: f64,
    #[serde(serialize_with = "f17")]
    pub slack: f64,
}

/// Per-probe verdicts, one array entry per checked probe. Stages `c` and
/// `d` are `null` in empirical mode.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StageArrays {
    pub a: Vec<bool>,
    pub b: Vec<bool>,
    pub c: Vec<Option<bool>>,
    pub d: Vec<Option<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionReport {
    pub upstream: String,
    pub downstream: String,
    pub mode: CompositeMode,
    pub incompatibility: Option<String>,
    /// Largest `|dy1/dt|` over the battery; the composite certificates are
    /// built for this range.
    #[serde(serialize_with = "f17")]
    pub intermediate_rate_range: f64,
    #[serde(serialize_with = "f17_opt")]
    pub weight_nhp: Option<f64>,
    #[serde(serialize_with = "f17_opt")]
    pub weight_anhp: Option<f64>,
    /// `gamma_G gamma1_H`, when both supplies are quadratic.
    #[serde(serialize_with = "f17_opt")]
    pub gamma_prod_nhp: Option<f64>,
    /// `gamma1_G gamma1_H`, when both supplies are quadratic.
    #[serde(serialize_with = "f17_opt")]
    pub gamma_prod_anhp: Option<f64>,
    pub probe_ids: Vec<String>,
    pub stages: StageArrays,
    /// `sup_t (int y2^2 / int du^2)^(1/2)` per probe.
    #[serde(serialize_with = "f17_slice")]
    pub measured_gain_nhp: Vec<f64>,
    /// `sup_t (int dy2^2 / int du^2)^(1/2)` per probe.
    #[serde(serialize_with = "f17_slice")]
    pub measured_gain_anhp: Vec<f64>,
    /// `min_t (w alpha_H1 - beta_G)(|dy1/dt|)` per probe (certified mode);
    /// nonnegative when the intermediate terms cancel.
    #[serde(serialize_with = "f17_slice")]
    pub min_telescoping_gap: Vec<f64>,
    /// Composite convergence verdicts for probes constant after some time.
    pub barbalat: Vec<Option<BarbalatReport>>,
    pub failures: Vec<StageFailure>,
    pub first_failing_stage: Option<Stage>,
    pub skipped: Vec<ProbeIssue>,
    pub errors: Vec<ProbeIssue>,
    /// Stages `a` and `b` pass on every probe, so the composite claim applies.
    pub components_valid: bool,
    /// Every stage passes on every probe (certified mode only).
    pub all_pass: bool,
    pub notes: Vec<String>,
}

const HIGHER_ORDER_NOTE: &str = "Only first-order certificates are composed. A variant bounding the \
output by the k-th input derivative (k >= 2) is not checked: a nonlinear system does not commute \
with differentiation, so the factorisation behind the composite bound does not carry over.";

fn is_quadratic(cert: &Certificate) -> bool {
    let cost = cert.supply.output_cost.as_ref().or(cert.supply.rate_cost.as_ref());
    matches!(cert.supply.input_gain.as_power(), Some((_, e)) if e == 2.0)
        && matches!(cost.and_then(GainFunction::as_power), Some((g, e)) if g == 1.0 && e == 2.0)
}

/// Exercises the composition result for `H -> G` with catalog certificates.
pub fn composition_theorem_report(h: &SystemModel, g: &SystemModel, battery: &Battery) -> Result<CompositionReport> {
    composition_report_with(
        &ComponentCertificates::catalog(h)?,
        &ComponentCertificates::catalog(g)?,
        battery,
    )
}

struct ProbeChecks {
    a: bool,
    b: bool,
    c: Option<bool>,
    d: Option<bool>,
    gain_nhp: f64,
    gain_anhp: f64,
    gap: Option<f64>,
    barbalat: Option<BarbalatReport>,
    failures: Vec<StageFailure>,
}

/// [`composition_theorem_report`] with explicit component certificates,
/// e.g. to inject a deliberately weakened one.
pub fn composition_report_with(
    h: &ComponentCertificates,
    g: &ComponentCertificates,
    battery: &Battery,
) -> Result<CompositionReport> {
    h.validate("upstream certificates")?;
    g.validate("downstream certificates")?;
    let series = compose_series(&h.nhp.system, &g.nhp.system);
    let cfg = battery.solver_config();
    let x0 = vec![0.0; series.state_dim()];
    let runs = map_ordered(&battery.probes, battery.workers, |_, p| {
        series.simulate(&p.input, &x0, &cfg)
    });

    let mut report = CompositionReport {
        upstream: h.nhp.system.label(),
        downstream: g.nhp.system.label(),
        mode: CompositeMode::Certified,
        incompatibility: None,
        intermediate_rate_range: 0.0,
        weight_nhp: None,
        weight_anhp: None,
        gamma_prod_nhp: None,
        gamma_prod_anhp: None,
        probe_ids: Vec::new(),
        stages: StageArrays::default(),
        measured_gain_nhp: Vec::new(),
        measured_gain_anhp: Vec::new(),
        min_telescoping_gap: Vec::new(),
        barbalat: Vec::new(),
        failures: Vec::new(),
        first_failing_stage: None,
        skipped: Vec::new(),
        errors: Vec::new(),
        components_valid: true,
        all_pass: true,
        notes: vec![HIGHER_ORDER_NOTE.to_string()],
    };

    let mut kept = Vec::new();
    for (probe, run) in battery.probes.iter().zip(runs) {
        match run {
            Ok(st) => {
                let over_cap = battery.output_cap.is_some_and(|cap| {
                    st.intermediate().iter().chain(st.composite.outputs()).any(|y| y.abs() > cap)
                });
                if over_cap {
                    report.skipped.push(ProbeIssue {
                        probe_id: probe.id.clone(),
                        reason: "output exceeds cap".into(),
                    });
                } else {
                    kept.push((probe, st));
                }
            }
            Err(e) => report.errors.push(ProbeIssue {
                probe_id: probe.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let range = kept
        .iter()
        .flat_map(|(_, st)| st.intermediate_rates().iter().chain(st.upstream.output_rates_left()))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let range = if range > 0.0 { range } else { 1.0 };
    report.intermediate_rate_range = range;

    let composites = composite_certificate(&h.anhp, &g.nhp, range)
        .and_then(|c| Ok((c, composite_certificate(&h.anhp, &g.anhp, range)?)));
    let composites = match composites {
        Ok(pair) => Some(pair),
        Err(Error::IncompatibleGains(why)) => {
            report.mode = CompositeMode::Empirical;
            report.notes.push(format!("composite bound not certified: {why}"));
            report.incompatibility = Some(why);
            None
        }
        Err(e) => return Err(e),
    };
    if let Some((cn, ca)) = &composites {
        report.weight_nhp = upstream_weight(cn);
        report.weight_anhp = upstream_weight(ca);
        if is_quadratic(&h.anhp) && is_quadratic(&g.nhp) {
            report.gamma_prod_nhp = cn.gain;
        }
        if is_quadratic(&h.anhp) && is_quadratic(&g.anhp) {
            report.gamma_prod_anhp = ca.gain;
        }
    }

    let gamma_prod = (report.gamma_prod_nhp, report.gamma_prod_anhp);
    let checks = map_ordered(&kept, battery.workers, |_, (probe, st)| {
        let tail = probe.input.constant_after().is_some();
        check_probe(&probe.id, tail, st, h, g, composites.as_ref(), gamma_prod)
    });
    for ((probe, _), res) in kept.iter().zip(checks) {
        let pc = res?;
        report.probe_ids.push(probe.id.clone());
        report.stages.a.push(pc.a);
        report.stages.b.push(pc.b);
        report.stages.c.push(pc.c);
        report.stages.d.push(pc.d);
        report.measured_gain_nhp.push(pc.gain_nhp);
        report.measured_gain_anhp.push(pc.gain_anhp);
        if let Some(gap) = pc.gap {
            report.min_telescoping_gap.push(gap);
        }
        report.barbalat.push(pc.barbalat);
        report.failures.extend(pc.failures);
    }
    report.components_valid =
        report.errors.is_empty() && report.stages.a.iter().chain(&report.stages.b).all(|&v| v);
    report.all_pass = report.components_valid
        && report.mode == CompositeMode::Certified
        && report.stages.c.iter().chain(&report.stages.d).all(|v| *v == Some(true));
    report.first_failing_stage = report.failures.iter().map(|f| f.stage).min_by_key(|s| *s as u8);
    if !report.components_valid {
        report
            .notes
            .push("a component certificate fails; the composite claim does not apply".into());
    }
    Ok(report)
}

fn upstream_weight(cert: &Certificate) -> Option<f64> {
    match &cert.storage {
        StorageFunction::Series { upstream_weight, .. } => Some(*upstream_weight),
        _ => None,
    }
}

fn record(failures: &mut Vec<StageFailure>, id: &str, stage: Stage, rep: &VerdictReport) -> bool {
    if !rep.passed() {
        failures.push(StageFailure {
            stage,
            probe_id: id.to_string(),
            check: rep.certificate.clone(),
            min_margin: rep.min_margin,
            slack: rep.slack,
        });
    }
    rep.passed()
}

/// Stage `c` or `d`: the composite certificate on the composite run, the
/// prefix bound it implies, and the measured gain against the product.
#[allow(clippy::too_many_arguments)]
fn composite_stage(
    failures: &mut Vec<StageFailure>,
    id: &str,
    stage: Stage,
    cert: &Certificate,
    tr: &Trajectory,
    out: [&[f64]; 2],
    gamma: Option<f64>,
    measured: f64,
) -> Result<bool> {
    let rep = verify(cert, tr, CheckTolerances::default())?;
    let mut pass = record(failures, id, stage, &rep);
    let cost = cert
        .supply
        .output_cost
        .as_ref()
        .or(cert.supply.rate_cost.as_ref())
        .ok_or_else(|| invalid("composite certificate", "has no cost term"))?;
    let v0 = storage_values(cert, tr)[0];
    let du = [tr.input_rates(), tr.input_rates_left()];
    let prefix = prefix_check(tr.times(), out, du, cost, &cert.supply.input_gain, v0, 2.0)?;
    if !prefix.holds {
        failures.push(StageFailure {
            stage,
            probe_id: id.to_string(),
            check: format!("prefix bound of {}", cert.label),
            min_margin: prefix.min_slack,
            slack: prefix.min_slack,
        });
        pass = false;
    }
    if let Some(gp) = gamma {
        if measured > gp * (1.0 + 1e-6) + 1e-9 {
            failures.push(StageFailure {
                stage,
                probe_id: id.to_string(),
                check: format!("measured gain {measured} above product {gp}"),
                min_margin: gp - measured,
                slack: gp - measured,
            });
            pass = false;
        }
    }
    Ok(pass)
}

fn check_probe(
    id: &str,
    constant_tail: bool,
    st: &SeriesTrajectory,
    h: &ComponentCertificates,
    g: &ComponentCertificates,
    composites: Option<&(Certificate, Certificate)>,
    gamma_prod: (Option<f64>, Option<f64>),
) -> Result<ProbeChecks> {
    let tol = CheckTolerances::default();
    let mut failures = Vec::new();
    let mut a = true;
    for cert in [&h.nhp, &h.anhp] {
        a &= record(&mut failures, id, Stage::A, &verify(cert, &st.upstream, tol)?);
    }
    let mut b = true;
    for cert in [&g.nhp, &g.anhp] {
        b &= record(&mut failures, id, Stage::B, &verify(cert, &st.downstream, tol)?);
    }

    let tr = &st.composite;
    let t = tr.times();
    let du = [tr.input_rates(), tr.input_rates_left()];
    let y2 = tr.outputs();
    let dy2 = [tr.output_rates(), tr.output_rates_left()];
    let sq = GainFunction::square();
    let gain_nhp = prefix_check(t, [y2, y2], du, &sq, &sq, 0.0, 2.0)?.gain_estimate;
    let gain_anhp = prefix_check(t, dy2, du, &sq, &sq, 0.0, 2.0)?.gain_estimate;

    let (mut c, mut d, mut gap, mut barbalat) = (None, None, None, None);
    if let Some((cn, ca)) = composites {
        c = Some(composite_stage(&mut failures, id, Stage::C, cn, tr, [y2, y2], gamma_prod.0, gain_nhp)?);
        d = Some(composite_stage(&mut failures, id, Stage::D, ca, tr, dy2, gamma_prod.1, gain_anhp)?);
        let w = upstream_weight(cn).expect("series storage");
        let alpha_h1 = h.anhp.supply.rate_cost.as_ref().expect("validated");
        gap = Some(
            st.intermediate_rates()
                .iter()
                .chain(st.upstream.output_rates_left())
                .map(|&r| w * alpha_h1.eval(r) - g.nhp.supply.input_gain.eval(r))
                .fold(f64::INFINITY, f64::min),
        );
        if constant_tail {
            barbalat = Some(barbalat_verdict(tr, cn, ca, &BarbalatThresholds::default())?);
        }
    }
    Ok(ProbeChecks {
        a,
        b,
        c,
        d,
        gain_nhp,
        gain_anhp,
        gap,
        barbalat,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{CertificateFamily, Verdict};
    use crate::systems::{cubic_hp, linear_hp};

    #[test]
    fn zero_input_keeps_everything_zero() {
        let s = compose_series(&linear_hp(1.0).unwrap(), &linear_hp(2.0).unwrap());
        let st = s
            .simulate(&InputSignal::constant(0.0).unwrap(), &[0.0, 0.0], &SolverConfig::rk45(3.0))
            .unwrap();
        assert!(st.composite.outputs().iter().all(|&y| y == 0.0));
        assert!(st.intermediate().iter().all(|&y| y == 0.0));
        assert!(st.downstream.outputs().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn downstream_component_sees_intermediate_signal() {
        let s = compose_series(&linear_hp(1.0).unwrap(), &linear_hp(2.0).unwrap());
        let st = s
            .simulate(&InputSignal::sinusoid(1.0, 1.0).unwrap(), &[0.0, 0.0], &SolverConfig::rk45(5.0))
            .unwrap();
        assert_eq!(st.downstream.inputs(), st.intermediate());
        assert_eq!(st.downstream.input_rates(), st.intermediate_rates());
        for (a, b) in st.downstream.outputs().iter().zip(st.composite.outputs()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn linear_weights_are_squared_gains() {
        let h = ComponentCertificates::catalog(&linear_hp(1.0).unwrap()).unwrap();
        let g = ComponentCertificates::catalog(&linear_hp(1.0).unwrap()).unwrap();
        let cn = composite_certificate(&h.anhp, &g.nhp, 5.0).unwrap();
        let ca = composite_certificate(&h.anhp, &g.anhp, 5.0).unwrap();
        assert!((upstream_weight(&cn).unwrap() - 1.0).abs() < 1e-12);
        assert!((upstream_weight(&ca).unwrap() - 4.0).abs() < 1e-12);
        assert!((cn.gain.unwrap() - 2.0).abs() < 1e-12);
        assert!((ca.gain.unwrap() - 4.0).abs() < 1e-12);
        assert!(composite_certificate(&g.nhp, &g.nhp, 1.0).is_err());
    }

    #[test]
    fn mixed_exponents_are_incompatible() {
        // sixth-power rate cost cannot dominate a quadratic input gain near zero
        let cubic = cubic_hp(1.0).unwrap();
        let h_anhp = CertificateFamily::CubicAnhp.build(&cubic, 2.0, Origin::Custom).unwrap();
        let g = certificate_catalog(&linear_hp(1.0).unwrap(), Form::Nhp).unwrap();
        assert!(matches!(
            composite_certificate(&h_anhp, &g, 1.0),
            Err(Error::IncompatibleGains(_))
        ));
    }

    #[test]
    fn linear_cascade_report_passes_on_constant_tail_probes() {
        let lin = linear_hp(1.0).unwrap();
        let rep = composition_theorem_report(&lin, &lin, &Battery::constant_tail(20.0)).unwrap();
        assert!(rep.all_pass, "{:?}", rep.failures);
        assert_eq!(rep.stages.a.len(), 3);
        let ramp = rep.probe_ids.iter().position(|p| p == "ramp_hold").unwrap();
        assert_eq!(rep.barbalat[ramp].as_ref().unwrap().verdict, Verdict::Pass);
        assert!(rep.min_telescoping_gap.iter().all(|&g| g >= -1e-12));
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["stages"]["c"].is_array());
    }
}
