use serde::Serialize;

use super::fit::{fit_gain, FitConfig};
use super::storage::StorageFunction;
use super::Battery;
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::IntegralLaw;
use crate::signals::GainFunction;
use crate::systems::{SystemKind, SystemModel};

/// Which dissipation inequality a certificate claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `dV/dt <= beta(|du|) - alpha(|y|)`.
    Nhp,
    /// `dV1/dt <= beta1(|du|) - alpha1(|dy|)`.
    Anhp,
}

impl Form {
    pub fn as_str(self) -> &'static str {
        match self {
            Form::Nhp => "nhp",
            Form::Anhp => "anhp",
        }
    }
}

impl std::str::FromStr for Form {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nhp" => Ok(Form::Nhp),
            "anhp" => Ok(Form::Anhp),
            other => Err(invalid("form", format!("expected nhp or anhp, got {other:?}"))),
        }
    }
}

/// Where a certificate's constants came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Standard closed-form constants for the family.
    Analytic,
    /// Constants derived here from the same estimates.
    Derived,
    /// Constants located numerically by [`fit_gain`].
    Fitted,
    /// Caller-supplied (including deliberately corrupted) constants.
    Custom,
}

/// Supply rate `beta(|du|) - alpha(|y|) - alpha1(|dy|)`; either cost may be absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupplyRate {
    pub input_gain: GainFunction,
    pub output_cost: Option<GainFunction>,
    pub rate_cost: Option<GainFunction>,
}

impl SupplyRate {
    pub fn nhp(input_gain: GainFunction, output_cost: GainFunction) -> Self {
        SupplyRate {
            input_gain,
            output_cost: Some(output_cost),
            rate_cost: None,
        }
    }

    pub fn anhp(input_gain: GainFunction, rate_cost: GainFunction) -> Self {
        SupplyRate {
            input_gain,
            output_cost: None,
            rate_cost: Some(rate_cost),
        }
    }

    pub fn eval(&self, du: f64, y: f64, dy: f64) -> f64 {
        let mut s = self.input_gain.eval(du);
        if let Some(a) = &self.output_cost {
            s -= a.eval(y);
        }
        if let Some(a) = &self.rate_cost {
            s -= a.eval(dy);
        }
        s
    }
}

/// A storage function and supply rate claimed for one system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(skip)]
    pub system: SystemModel,
    pub label: String,
    pub form: Form,
    pub storage: StorageFunction,
    pub supply: SupplyRate,
    /// `gamma` (NHP) or `gamma1` (ANHP) when the supply has a single gain.
    pub gain: Option<f64>,
    pub origin: Origin,
}

/// One-parameter certificate families used by the catalog and [`fit_gain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateFamily {
    /// `V = g^2 lambda y^2`, `s = g^2 du^2 - y^2`.
    LinearNhp,
    /// `V = (g^2 - 2) lambda y^2`, `s = g^2 du^2 - dy^2`.
    LinearAnhp,
    /// `V = (g/2) y^2`, `s = g du arsinh(du / lambda) - y sinh(y)`.
    SinhNhp,
    /// `V = 2 (g^2 - 2) lambda cosh(y)`, `s = g^2 du^2 - dy^2`.
    SinhAnhp,
    /// `V = 2 A y^2` with `A = g^(4/3) lambda^(1/3) / 3`, `s = g^(4/3) |du|^(4/3) - y^4`.
    CubicNhp,
    /// `V = (lambda g^2 / 2) y^4`, `s = g^2 du^2 - |dy|^6`.
    CubicAnhp,
    /// `V = g^2 lambda_eff y^2`, `s = g^2 du^2 - y^2`, with
    /// `lambda_eff = lambda a b / (a + b)` for the sector `[a, b]`.
    SectorNhp,
    /// `V = lambda (a + b) y^2`, `s = g^2 du^2 - dy^2`.
    SectorAnhp,
}

impl CertificateFamily {
    pub fn for_system(sys: &SystemModel, form: Form) -> Result<Self> {
        use CertificateFamily::*;
        Ok(match (sys.kind(), form) {
            (SystemKind::LinearHp { .. }, Form::Nhp) => LinearNhp,
            (SystemKind::LinearHp { .. }, Form::Anhp) => LinearAnhp,
            (SystemKind::SinhHp { .. }, Form::Nhp) => SinhNhp,
            (SystemKind::SinhHp { .. }, Form::Anhp) => SinhAnhp,
            (SystemKind::CubicHp { .. }, Form::Nhp) => CubicNhp,
            (SystemKind::CubicHp { .. }, Form::Anhp) => CubicAnhp,
            (SystemKind::SectorHp { .. }, Form::Nhp) => SectorNhp,
            (SystemKind::SectorHp { .. }, Form::Anhp) => SectorAnhp,
            _ => {
                return Err(Error::UnknownPairing {
                    system: sys.label(),
                    form: format!("{} gain family", form.as_str()),
                })
            }
        })
    }

    pub fn form(self) -> Form {
        use CertificateFamily::*;
        match self {
            LinearNhp | SinhNhp | CubicNhp | SectorNhp => Form::Nhp,
            LinearAnhp | SinhAnhp | CubicAnhp | SectorAnhp => Form::Anhp,
        }
    }

    /// Gain given in closed form, if any, and whether it comes from the
    /// standard constants (`Analytic`) or was derived here.
    pub fn reference_gain(self, sys: &SystemModel) -> Option<(f64, Origin)> {
        use CertificateFamily::*;
        let lambda = sys.rate()?;
        match self {
            LinearNhp | CubicNhp => Some((1.0 / lambda, Origin::Analytic)),
            LinearAnhp | SinhAnhp => Some((2.0, Origin::Analytic)),
            SinhNhp => Some((2.0 / lambda, Origin::Analytic)),
            CubicAnhp => None,
            SectorNhp => {
                let (a, b) = sector_bounds(sys)?;
                Some(((a + b) / (lambda * a * b), Origin::Derived))
            }
            SectorAnhp => {
                let (a, b) = sector_bounds(sys)?;
                Some(((1.0 + b / (2.0 * a)).sqrt(), Origin::Derived))
            }
        }
    }

    /// Infimum of admissible gains (below it the storage turns negative).
    pub fn min_gain(self) -> f64 {
        match self {
            CertificateFamily::LinearAnhp | CertificateFamily::SinhAnhp => 2f64.sqrt(),
            _ => 0.0,
        }
    }

    pub fn build(self, sys: &SystemModel, gain: f64, origin: Origin) -> Result<Certificate> {
        use CertificateFamily::*;
        if CertificateFamily::for_system(sys, self.form()).ok() != Some(self) {
            return Err(Error::UnknownPairing {
                system: sys.label(),
                form: format!("{self:?}"),
            });
        }
        if !(gain > self.min_gain() && gain.is_finite()) {
            return Err(invalid(
                "gain",
                format!("must exceed {} for {self:?}, got {gain}", self.min_gain()),
            ));
        }
        let lambda = sys.rate().expect("filter family");
        let g2 = gain * gain;
        let square = GainFunction::square();
        let (storage, supply, text) = match self {
            LinearNhp => (
                StorageFunction::OutputQuadratic {
                    coefficient: g2 * lambda,
                },
                SupplyRate::nhp(GainFunction::quadratic(gain), square),
                "V = g^2 lambda y^2, s = g^2 du^2 - y^2",
            ),
            LinearAnhp => (
                StorageFunction::OutputQuadratic {
                    coefficient: (g2 - 2.0) * lambda,
                },
                SupplyRate::anhp(GainFunction::quadratic(gain), square),
                "V = (g^2 - 2) lambda y^2, s = g^2 du^2 - dy^2",
            ),
            SinhNhp => (
                StorageFunction::OutputQuadratic {
                    coefficient: 0.5 * gain,
                },
                SupplyRate::nhp(
                    GainFunction::SArsinh {
                        scale: gain,
                        rate: lambda,
                    },
                    GainFunction::SSinh { scale: 1.0 },
                ),
                "V = (g/2) y^2, s = g du arsinh(du/lambda) - y sinh(y)",
            ),
            SinhAnhp => (
                StorageFunction::OutputCosh {
                    coefficient: 2.0 * (g2 - 2.0) * lambda,
                },
                SupplyRate::anhp(GainFunction::quadratic(gain), square),
                "V = 2 (g^2 - 2) lambda cosh(y), s = g^2 du^2 - dy^2",
            ),
            CubicNhp => (
                StorageFunction::OutputQuadratic {
                    coefficient: 2.0 * gain.powf(4.0 / 3.0) * lambda.cbrt() / 3.0,
                },
                SupplyRate::nhp(
                    GainFunction::Power {
                        gamma: gain,
                        exponent: 4.0 / 3.0,
                    },
                    GainFunction::Power {
                        gamma: 1.0,
                        exponent: 4.0,
                    },
                ),
                "V = 2A y^2 with A = g^(4/3) lambda^(1/3) / 3, s = g^(4/3) |du|^(4/3) - y^4",
            ),
            CubicAnhp => (
                StorageFunction::OutputQuartic {
                    coefficient: 0.5 * lambda * g2,
                },
                SupplyRate::anhp(
                    GainFunction::quadratic(gain),
                    GainFunction::Power {
                        gamma: 1.0,
                        exponent: 6.0,
                    },
                ),
                "V = (lambda g^2 / 2) y^4, s = g^2 du^2 - |dy|^6",
            ),
            SectorNhp => {
                let (a, b) = sector_bounds(sys).expect("sector system");
                (
                    StorageFunction::OutputQuadratic {
                        coefficient: g2 * lambda * a * b / (a + b),
                    },
                    SupplyRate::nhp(GainFunction::quadratic(gain), square),
                    "V = g^2 lambda_eff y^2, s = g^2 du^2 - y^2",
                )
            }
            SectorAnhp => {
                let (a, b) = sector_bounds(sys).expect("sector system");
                (
                    StorageFunction::OutputQuadratic {
                        coefficient: lambda * (a + b),
                    },
                    SupplyRate::anhp(GainFunction::quadratic(gain), square),
                    "V = lambda (a + b) y^2, s = g^2 du^2 - dy^2",
                )
            }
        };
        Ok(Certificate {
            system: sys.clone(),
            label: format!(
                "{} {} [{text}] g = {gain}",
                sys.label(),
                self.form().as_str()
            ),
            form: self.form(),
            storage,
            supply,
            gain: Some(gain),
            origin,
        })
    }
}

fn sector_bounds(sys: &SystemModel) -> Option<(f64, f64)> {
    match *sys.kind() {
        SystemKind::SectorHp { lower, upper, .. } => Some((lower, upper)),
        _ => None,
    }
}

/// The standard certificate for a catalog system.
///
/// Families without closed-form constants (the cubic filter's ANHP
/// certificate) are fitted on the standard battery.
pub fn certificate_catalog(sys: &SystemModel, form: Form) -> Result<Certificate> {
    if let SystemKind::PiLoop { .. } = sys.kind() {
        return pi_certificate(sys, form);
    }
    let family = CertificateFamily::for_system(sys, form)?;
    match family.reference_gain(sys) {
        Some((gain, origin)) => family.build(sys, gain, origin),
        None => {
            let fit = fit_gain(sys, family, &Battery::standard(), &FitConfig::default())?;
            family.build(sys, fit.gain, Origin::Fitted)
        }
    }
}

/// The sinh filter's NHP certificate with the unscaled supply
/// `g du arsinh(du) - y sinh(y)`, `g = 2 / lambda`.
///
/// For `lambda >= 1` it is implied by the scaled certificate; below that it
/// is strictly stronger.
pub fn sinh_unscaled_certificate(sys: &SystemModel) -> Result<Certificate> {
    let SystemKind::SinhHp { rate } = *sys.kind() else {
        return Err(Error::UnknownPairing {
            system: sys.label(),
            form: "unscaled sinh nhp".into(),
        });
    };
    let gain = 2.0 / rate;
    Ok(Certificate {
        system: sys.clone(),
        label: format!("{} nhp [V = (g/2) y^2, s = g du arsinh(du) - y sinh(y)] g = {gain}", sys.label()),
        form: Form::Nhp,
        storage: StorageFunction::OutputQuadratic {
            coefficient: 0.5 * gain,
        },
        supply: SupplyRate::nhp(
            GainFunction::SArsinh {
                scale: gain,
                rate: 1.0,
            },
            GainFunction::SSinh { scale: 1.0 },
        ),
        gain: Some(gain),
        origin: Origin::Analytic,
    })
}

/// `V = (dy + G)^2 + 4F + dy^2`,
/// `s = psi(dd) + 4 dd^2 / g0 - f(y) G(y) - g0 dy^2`.
///
/// The same pair certifies both forms: the output cost covers NHP, the rate
/// cost ANHP.
fn pi_certificate(sys: &SystemModel, form: Form) -> Result<Certificate> {
    let SystemKind::PiLoop {
        proportional,
        integral,
    } = *sys.kind()
    else {
        unreachable!()
    };
    let g0 = proportional.min_slope();
    let psi = match (sys.name(), integral) {
        ("nonsmooth_pi", IntegralLaw::Sign { ki, ks, smoothing }) => {
            if smoothing > 0.0 {
                GainFunction::PiPsiSmoothed {
                    kp: g0,
                    ki,
                    ks,
                    smoothing,
                }
            } else {
                GainFunction::PiPsi { kp: g0, ki, ks }
            }
        }
        _ => GainFunction::PsiSup {
            proportional,
            integral,
        },
    };
    Ok(Certificate {
        system: sys.clone(),
        label: format!(
            "{} {} [V = (dy + G)^2 + 4F + dy^2, s = psi(dd) + 4 dd^2/g0 - f G - g0 dy^2]",
            sys.label(),
            form.as_str()
        ),
        form,
        storage: StorageFunction::PiEnergy {
            proportional,
            integral,
        },
        supply: SupplyRate {
            input_gain: GainFunction::Sum {
                terms: vec![psi, GainFunction::quadratic(2.0 / g0.sqrt())],
            },
            output_cost: Some(GainFunction::PiOutputCost {
                proportional,
                integral,
            }),
            rate_cost: Some(GainFunction::quadratic(g0.sqrt())),
        },
        gain: None,
        origin: Origin::Analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{fit_gain, verify_battery, Battery, CheckTolerances, FitConfig};
    use crate::nonlinearity::SectorNonlinearity;
    use crate::systems::{linear_hp, nonsmooth_pi, sector_hp, sinh_hp, SectorSpec};

    #[test]
    fn linear_catalog_constants() {
        let sys = linear_hp(1.0).unwrap();
        let nhp = certificate_catalog(&sys, Form::Nhp).unwrap();
        assert_eq!(nhp.gain, Some(1.0));
        assert_eq!(nhp.storage, StorageFunction::OutputQuadratic { coefficient: 1.0 });
        assert_eq!(nhp.supply.eval(2.0, 1.0, 0.0), 3.0);
        let anhp = certificate_catalog(&sys, Form::Anhp).unwrap();
        assert_eq!(anhp.gain, Some(2.0));
        assert_eq!(anhp.storage, StorageFunction::OutputQuadratic { coefficient: 2.0 });
    }

    #[test]
    fn sinh_gain_scales_inversely() {
        let sys = sinh_hp(2.0).unwrap();
        assert_eq!(certificate_catalog(&sys, Form::Nhp).unwrap().gain, Some(1.0));
    }

    #[test]
    fn pi_supply_terms() {
        let sys = nonsmooth_pi(1.0, 1.0, 1.0, 0.0).unwrap();
        let c = certificate_catalog(&sys, Form::Nhp).unwrap();
        // psi(1) + 4 - f(0) G(0) - 0 = 4.25
        assert!((c.supply.eval(1.0, 0.0, 0.0) - 4.25).abs() < 1e-12);
        assert!((c.supply.eval(0.0, 0.0, 1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn families_reject_bad_gains() {
        let sys = linear_hp(1.0).unwrap();
        assert!(CertificateFamily::LinearAnhp.build(&sys, 1.2, Origin::Custom).is_err());
        assert!(CertificateFamily::SinhNhp.build(&sys, 1.0, Origin::Custom).is_err());
        assert!("ANHP".parse::<Form>().is_ok() && "x".parse::<Form>().is_err());
    }

    #[test]
    fn unscaled_sinh_certificate_passes_for_slow_rates_and_up() {
        let battery = Battery::standard().with_output_cap(5.0);
        for lambda in [1.0, 2.0] {
            let cert = sinh_unscaled_certificate(&sinh_hp(lambda).unwrap()).unwrap();
            let rep = verify_battery(&cert, &battery, CheckTolerances::default()).unwrap();
            assert!(rep.all_pass && rep.errors.is_empty(), "lambda {lambda}: {:?}", rep.failing_probes());
        }
        assert!(sinh_unscaled_certificate(&linear_hp(1.0).unwrap()).is_err());
    }

    #[test]
    fn sector_closed_forms_are_not_beaten_by_fitting() {
        for phi in SectorNonlinearity::catalog() {
            let sys = sector_hp(1.0, SectorSpec::natural(phi)).unwrap();
            for form in [Form::Nhp, Form::Anhp] {
                let family = CertificateFamily::for_system(&sys, form).unwrap();
                let fit = fit_gain(&sys, family, &Battery::standard(), &FitConfig::default()).unwrap();
                let reference = fit.reference_gain.unwrap();
                assert!(fit.gain <= reference + 1e-2, "{phi:?} {form:?}: {} > {reference}", fit.gain);
            }
        }
    }
}
