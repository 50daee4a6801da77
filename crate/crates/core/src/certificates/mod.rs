//! Storage functions, supply rates and the checks built on them.

mod battery;
mod catalog;
mod check;
mod convergence;
mod fit;
mod inequalities;
mod storage;

pub use battery::{
    verify_battery, verify_runs, Battery, BatteryReport, Probe, ProbeIssue, ProbeOutcome,
    ProbeRun, STANDARD_AMPLITUDES, STANDARD_HORIZON, STANDARD_OMEGAS,
};
pub use catalog::{
    certificate_catalog, sinh_unscaled_certificate, Certificate, CertificateFamily, Form,
    Origin, SupplyRate,
};
pub use check::{
    check_integral, check_pointwise, storage_derivative, storage_values, supply_values, verify,
    AppliedTolerances, CheckTolerances, VerdictReport,
};
pub use convergence::{
    barbalat_horizon, barbalat_verdict, wfgs_check, BarbalatReport, BarbalatThresholds, Verdict,
    WfgsReport,
};
pub(crate) use convergence::prefix_check;
pub use fit::{fit_gain, FitConfig, FitEvaluation, FitResult};
pub use inequalities::{
    fenchel_check, psi_eval, psi_numeric_sup, psi_smoothed_bound, psi_sup,
    robust_gain_inequality_check, sector_estimates_check, GridSpec, RobustGainReport,
    SectorEstimates, SlackReport,
};
pub use storage::StorageFunction;
