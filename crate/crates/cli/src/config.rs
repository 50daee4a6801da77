//! Scenario files: TOML with position-aware, accumulating diagnostics.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use toml::de::{DeTable, DeValue};
use toml::Spanned;

use nhp_core::certificates::{BarbalatThresholds, CheckTolerances, FitConfig, Form, GridSpec};
use nhp_core::nonlinearity::{IntegralLaw, ProportionalLaw, SectorNonlinearity};
use nhp_core::signals::{make_signal, InputSignal, PolynomialPiece, SignalSpec, SineComponent};
use nhp_core::systems::{
    cubic_hp, linear_hp, nonsmooth_pi, pi_closed_loop, sector_hp, sinh_hp, SectorSpec, SolverConfig,
    SystemModel, CATALOG, DEFAULT_SIGN_SMOOTHING,
};

/// A checkable claim a scenario can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Pointwise,
    Integral,
    Wfgs,
    Barbalat,
    Fenchel,
    Sector,
    Psi,
    RobustGain,
    Compose,
    FitGain,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::Pointwise,
        Check::Integral,
        Check::Wfgs,
        Check::Barbalat,
        Check::Fenchel,
        Check::Sector,
        Check::Psi,
        Check::RobustGain,
        Check::Compose,
        Check::FitGain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Pointwise => "pointwise",
            Check::Integral => "integral",
            Check::Wfgs => "wfgs",
            Check::Barbalat => "barbalat",
            Check::Fenchel => "fenchel",
            Check::Sector => "sector",
            Check::Psi => "psi",
            Check::RobustGain => "robust-gain",
            Check::Compose => "compose",
            Check::FitGain => "fit-gain",
        }
    }

    fn parse(s: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Checks that run on the scenario's simulated trajectory.
    pub fn needs_trajectory(self) -> bool {
        matches!(
            self,
            Check::Pointwise | Check::Integral | Check::Wfgs | Check::Barbalat | Check::RobustGain
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BatteryKind {
    Standard,
    ConstantTail,
    Sines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    pub kind: BatteryKind,
    /// Defaults to the battery's own horizon (or `20 / lambda_min` for `constant_tail`).
    pub horizon: Option<f64>,
    pub output_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateConfig {
    pub forms: Vec<Form>,
    /// Replaces the catalog gain of the NHP certificate.
    pub nhp_gain: Option<f64>,
    pub anhp_gain: Option<f64>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub title: Option<String>,
    pub system: SystemModel,
    pub downstream: Option<SystemModel>,
    pub input: InputSignal,
    pub initial_state: Vec<f64>,
    pub solver: SolverConfig,
    pub checks: Vec<Check>,
    pub certificate: CertificateConfig,
    pub tolerances: CheckTolerances,
    pub battery: BatteryConfig,
    pub barbalat: BarbalatThresholds,
    pub grid: GridSpec,
    pub fit: FitConfig,
    /// Exponent of the prefix gain check.
    pub wfgs_p: f64,
    pub output_dir: Option<PathBuf>,
    /// Exit code the scenario is designed to produce; used by the corpus runner.
    pub expect_exit: Option<i32>,
}

/// One problem in a scenario file, at 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// Every problem found in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

struct Reader<'s> {
    src: &'s str,
    errors: Vec<Diagnostic>,
}

type Table<'i> = DeTable<'i>;

const TOP_KEYS: [&str; 15] = [
    "title",
    "checks",
    "output_dir",
    "expect_exit",
    "initial_state",
    "system",
    "downstream",
    "input",
    "solver",
    "certificate",
    "tolerances",
    "battery",
    "barbalat",
    "grid",
    "fit",
];

impl<'s> Reader<'s> {
    fn error(&mut self, span: Range<usize>, message: impl Into<String>) {
        let before = &self.src[..span.start.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
        self.errors.push(Diagnostic {
            line,
            column,
            message: message.into(),
        });
    }

    fn reject_unknown(&mut self, table: &Table<'_>, section: &str, allowed: &[&str]) {
        for (k, _) in table.iter() {
            if !allowed.contains(&k.get_ref().as_ref()) {
                let msg = if section.is_empty() {
                    format!("unknown key `{}`", k.get_ref())
                } else {
                    format!("unknown key `{}` in [{section}]", k.get_ref())
                };
                self.error(k.span(), msg);
            }
        }
    }

    fn get<'t, 'i>(table: &'t Table<'i>, key: &str) -> Option<&'t Spanned<DeValue<'i>>> {
        table.iter().find(|(k, _)| k.get_ref().as_ref() == key).map(|(_, v)| v)
    }

    fn number(&mut self, v: &Spanned<DeValue<'_>>, key: &str) -> Option<f64> {
        let parsed = match v.get_ref() {
            DeValue::Float(f) => parse_float(f.as_str()),
            DeValue::Integer(i) => i64::from_str_radix(&i.as_str().replace('_', ""), i.radix())
                .ok()
                .map(|n| n as f64),
            _ => None,
        };
        if parsed.is_none() {
            self.error(v.span(), format!("`{key}` must be a number"));
        }
        parsed
    }

    fn f64_opt(&mut self, table: &Table<'_>, key: &str) -> Option<f64> {
        let v = Self::get(table, key)?;
        self.number(v, key)
    }

    fn f64_or(&mut self, table: &Table<'_>, key: &str, default: f64) -> f64 {
        self.f64_opt(table, key).unwrap_or(default)
    }

    /// A number that must be strictly positive, e.g. a rate.
    fn positive(&mut self, table: &Table<'_>, key: &str, default: Option<f64>) -> Option<f64> {
        let Some(v) = Self::get(table, key) else {
            if default.is_none() {
                self.error(table_span(table), format!("missing `{key}`"));
            }
            return default;
        };
        let x = self.number(v, key)?;
        if !(x > 0.0 && x.is_finite()) {
            self.error(v.span(), format!("{key} must be positive (got {x})"));
            return None;
        }
        Some(x)
    }

    /// An optional strictly positive number with no default.
    fn positive_opt(&mut self, table: &Table<'_>, key: &str) -> Option<f64> {
        Self::get(table, key)?;
        self.positive(table, key, Some(f64::NAN))
    }

    fn nonnegative(&mut self, table: &Table<'_>, key: &str, default: f64) -> Option<f64> {
        let Some(v) = Self::get(table, key) else {
            return Some(default);
        };
        let x = self.number(v, key)?;
        if !(x >= 0.0 && x.is_finite()) {
            self.error(v.span(), format!("{key} must be nonnegative (got {x})"));
            return None;
        }
        Some(x)
    }

    fn string<'t>(&mut self, table: &'t Table<'_>, key: &str) -> Option<(&'t str, Range<usize>)> {
        let v = Self::get(table, key)?;
        match v.get_ref().as_str() {
            Some(s) => Some((s, v.span())),
            None => {
                self.error(v.span(), format!("`{key}` must be a string"));
                None
            }
        }
    }

    fn subtable<'t, 'i>(&mut self, table: &'t Table<'i>, key: &str) -> Option<&'t Table<'i>> {
        let v = Self::get(table, key)?;
        match v.get_ref().as_table() {
            Some(t) => Some(t),
            None => {
                self.error(v.span(), format!("`{key}` must be a table"));
                None
            }
        }
    }

    fn number_array(&mut self, v: &Spanned<DeValue<'_>>, key: &str) -> Option<Vec<f64>> {
        let Some(items) = v.get_ref().as_array() else {
            self.error(v.span(), format!("`{key}` must be an array of numbers"));
            return None;
        };
        let parsed: Vec<Option<f64>> = items.iter().map(|x| self.number(x, key)).collect();
        parsed.into_iter().collect()
    }

    fn system(&mut self, table: &Table<'_>, section: &str) -> Option<SystemModel> {
        let Some((name, name_span)) = self.string(table, "name") else {
            if Self::get(table, "name").is_none() {
                self.error(table_span(table), format!("[{section}] needs a `name`"));
            }
            return None;
        };
        let allowed: &[&str] = match name {
            "linear_hp" | "sinh_hp" | "cubic_hp" => &["name", "lambda"],
            "sector_hp" => &["name", "lambda", "nonlinearity", "inner_slope", "outer_slope", "knee", "lower", "upper"],
            "pi" => &["name", "kp", "k3", "ki"],
            "nonsmooth_pi" => &["name", "kp", "ki", "ks", "smoothing"],
            _ => {
                self.error(
                    name_span,
                    format!("unknown system `{name}`; expected one of {}", CATALOG.join(", ")),
                );
                return None;
            }
        };
        self.reject_unknown(table, section, allowed);
        let built = match name {
            "linear_hp" | "sinh_hp" | "cubic_hp" => {
                let lambda = self.positive(table, "lambda", Some(1.0))?;
                match name {
                    "linear_hp" => linear_hp(lambda),
                    "sinh_hp" => sinh_hp(lambda),
                    _ => cubic_hp(lambda),
                }
            }
            "sector_hp" => {
                let lambda = self.positive(table, "lambda", Some(1.0));
                let phi = self.nonlinearity(table);
                let (lambda, phi) = (lambda?, phi?);
                let (lo, hi) = phi.natural_sector();
                let lower = self.positive(table, "lower", Some(lo));
                let upper = self.positive(table, "upper", Some(hi));
                sector_hp(
                    lambda,
                    SectorSpec {
                        lower: lower?,
                        upper: upper?,
                        nonlinearity: phi,
                    },
                )
            }
            "pi" => {
                let kp = self.positive(table, "kp", Some(1.0));
                let k3 = self.nonnegative(table, "k3", 0.5);
                let ki = self.positive(table, "ki", Some(1.0));
                pi_closed_loop(
                    ProportionalLaw::LinearCubic { kp: kp?, k3: k3? },
                    IntegralLaw::Linear { ki: ki? },
                )
            }
            _ => {
                let kp = self.positive(table, "kp", Some(1.0));
                let ki = self.positive(table, "ki", Some(1.0));
                let ks = self.positive(table, "ks", Some(1.0));
                let smoothing = self.nonnegative(table, "smoothing", DEFAULT_SIGN_SMOOTHING);
                nonsmooth_pi(kp?, ki?, ks?, smoothing?)
            }
        };
        match built {
            Ok(sys) => Some(sys),
            Err(e) => {
                self.error(table_span(table), format!("[{section}]: {e}"));
                None
            }
        }
    }

    fn nonlinearity(&mut self, table: &Table<'_>) -> Option<SectorNonlinearity> {
        let (name, span) = match self.string(table, "nonlinearity") {
            Some(x) => x,
            None if Self::get(table, "nonlinearity").is_some() => return None,
            None => return Some(SectorNonlinearity::catalog()[2]),
        };
        let Some(base) = SectorNonlinearity::catalog().into_iter().find(|p| p.name() == name) else {
            let names: Vec<&str> = SectorNonlinearity::catalog().iter().map(|p| p.name()).collect();
            self.error(span, format!("unknown nonlinearity `{name}`; expected one of {}", names.join(", ")));
            return None;
        };
        Some(match base {
            SectorNonlinearity::SaturatedLinear {
                inner_slope,
                outer_slope,
                knee,
            } => SectorNonlinearity::SaturatedLinear {
                inner_slope: self.positive(table, "inner_slope", Some(inner_slope))?,
                outer_slope: self.positive(table, "outer_slope", Some(outer_slope))?,
                knee: self.positive(table, "knee", Some(knee))?,
            },
            SectorNonlinearity::RationalBlend {
                inner_slope,
                outer_slope,
            } => SectorNonlinearity::RationalBlend {
                inner_slope: self.positive(table, "inner_slope", Some(inner_slope))?,
                outer_slope: self.positive(table, "outer_slope", Some(outer_slope))?,
            },
            SectorNonlinearity::TanhBlend {
                inner_slope,
                outer_slope,
            } => SectorNonlinearity::TanhBlend {
                inner_slope: self.positive(table, "inner_slope", Some(inner_slope))?,
                outer_slope: self.positive(table, "outer_slope", Some(outer_slope))?,
            },
        })
    }

    fn input(&mut self, table: &Table<'_>) -> Option<InputSignal> {
        let Some((kind, kind_span)) = self.string(table, "kind") else {
            if Self::get(table, "kind").is_none() {
                self.error(table_span(table), "[input] needs a `kind`");
            }
            return None;
        };
        let (allowed, spec): (&[&str], Option<SignalSpec>) = match kind {
            "constant" => (
                &["kind", "value"],
                Some(SignalSpec::Constant {
                    value: self.f64_or(table, "value", 0.0),
                }),
            ),
            "sinusoid" => (
                &["kind", "amplitude", "omega", "phase"],
                Some(SignalSpec::Sinusoid {
                    amplitude: self.f64_or(table, "amplitude", 1.0),
                    omega: self.positive(table, "omega", Some(1.0))?,
                    phase: self.f64_or(table, "phase", 0.0),
                }),
            ),
            "ramp-hold" => (
                &["kind", "slope", "hold_time"],
                Some(SignalSpec::RampHold {
                    slope: self.f64_or(table, "slope", 1.0),
                    hold_time: self.positive(table, "hold_time", Some(2.0))?,
                }),
            ),
            "step-smoothed" => (
                &["kind", "amplitude", "start", "width"],
                Some(SignalSpec::StepSmoothed {
                    amplitude: self.f64_or(table, "amplitude", 1.0),
                    start: self.nonnegative(table, "start", 1.0)?,
                    width: self.positive(table, "width", Some(0.2))?,
                }),
            ),
            "sum-of-sinusoids" => (&["kind", "components"], self.components(table)),
            "piecewise-polynomial" => (&["kind", "pieces"], self.pieces(table)),
            _ => {
                self.error(
                    kind_span,
                    format!(
                        "unknown input kind `{kind}`; expected constant, sinusoid, ramp-hold, \
                         step-smoothed, sum-of-sinusoids or piecewise-polynomial"
                    ),
                );
                return None;
            }
        };
        self.reject_unknown(table, "input", allowed);
        match make_signal(spec?) {
            Ok(s) => Some(s),
            Err(e) => {
                self.error(table_span(table), format!("[input]: {e}"));
                None
            }
        }
    }

    fn array_of_tables<'t, 'i>(&mut self, table: &'t Table<'i>, key: &str) -> Option<Vec<&'t Table<'i>>> {
        let Some(v) = Self::get(table, key) else {
            self.error(table_span(table), format!("missing `{key}`"));
            return None;
        };
        let tables: Option<Vec<_>> = v
            .get_ref()
            .as_array()
            .and_then(|a| a.iter().map(|x| x.get_ref().as_table()).collect());
        if tables.is_none() {
            self.error(v.span(), format!("`{key}` must be an array of tables"));
        }
        tables
    }

    fn components(&mut self, table: &Table<'_>) -> Option<SignalSpec> {
        let mut components = Vec::new();
        for t in self.array_of_tables(table, "components")? {
            self.reject_unknown(t, "input.components", &["amplitude", "omega", "phase"]);
            components.push(SineComponent {
                amplitude: self.f64_or(t, "amplitude", 1.0),
                omega: self.positive(t, "omega", Some(1.0))?,
                phase: self.f64_or(t, "phase", 0.0),
            });
        }
        Some(SignalSpec::SumOfSinusoids { components })
    }

    fn pieces(&mut self, table: &Table<'_>) -> Option<SignalSpec> {
        let mut pieces = Vec::new();
        for t in self.array_of_tables(table, "pieces")? {
            self.reject_unknown(t, "input.pieces", &["start", "coeffs"]);
            let start = self.nonnegative(t, "start", 0.0)?;
            let coeffs = match Self::get(t, "coeffs") {
                Some(v) => self.number_array(v, "coeffs")?,
                None => {
                    self.error(table_span(t), "missing `coeffs`");
                    return None;
                }
            };
            pieces.push(PolynomialPiece { start, coeffs });
        }
        Some(SignalSpec::PiecewisePolynomial { pieces })
    }

    fn checks(&mut self, root: &Table<'_>) -> Vec<(Check, Range<usize>)> {
        let Some(v) = Self::get(root, "checks") else {
            return Vec::new();
        };
        let Some(items) = v.get_ref().as_array() else {
            self.error(v.span(), "`checks` must be an array of strings");
            return Vec::new();
        };
        let mut out = Vec::new();
        for item in items.iter() {
            match item.get_ref().as_str().map(|s| (s, Check::parse(s))) {
                Some((_, Some(c))) => {
                    if !out.iter().any(|(x, _)| *x == c) {
                        out.push((c, item.span()));
                    }
                }
                Some((s, None)) => {
                    let names: Vec<&str> = Check::ALL.iter().map(|c| c.name()).collect();
                    self.error(item.span(), format!("unknown check `{s}`; expected one of {}", names.join(", ")));
                }
                None => self.error(item.span(), "`checks` entries must be strings"),
            }
        }
        out
    }

    fn solver(&mut self, table: Option<&Table<'_>>, default_horizon: f64) -> Option<SolverConfig> {
        let empty = Table::default();
        let t = table.unwrap_or(&empty);
        self.reject_unknown(
            t,
            "solver",
            &["method", "horizon", "rtol", "atol", "max_step", "step", "output_limit"],
        );
        let method = match self.string(t, "method") {
            Some((m, span)) if m != "rk45" && m != "rk4" => {
                self.error(span, format!("unknown method `{m}`; expected rk45 or rk4"));
                return None;
            }
            Some((m, _)) => m.to_string(),
            None => "rk45".to_string(),
        };
        let horizon = self.positive(t, "horizon", Some(default_horizon))?;
        let mut cfg = if method == "rk4" {
            SolverConfig::rk4(self.positive(t, "step", Some(1e-2))?, horizon)
        } else {
            let mut c = SolverConfig::rk45(horizon);
            let rtol = self.positive(t, "rtol", Some(nhp_core::systems::DEFAULT_RTOL));
            let atol = self.positive(t, "atol", Some(nhp_core::systems::DEFAULT_ATOL));
            c = c.with_tolerances(rtol?, atol?);
            if let Some(m) = self.positive(t, "max_step", Some(nhp_core::systems::DEFAULT_MAX_STEP)) {
                c = c.with_max_step(m);
            }
            c
        };
        cfg.output_limit = self.positive(t, "output_limit", Some(cfg.output_limit))?;
        Some(cfg)
    }

    fn certificate(&mut self, table: Option<&Table<'_>>) -> CertificateConfig {
        let mut out = CertificateConfig {
            forms: vec![Form::Nhp, Form::Anhp],
            nhp_gain: None,
            anhp_gain: None,
        };
        let Some(t) = table else { return out };
        self.reject_unknown(t, "certificate", &["forms", "nhp_gain", "anhp_gain"]);
        if let Some(v) = Self::get(t, "forms") {
            let names: Option<Vec<&str>> = v
                .get_ref()
                .as_array()
                .and_then(|a| a.iter().map(|x| x.get_ref().as_str()).collect());
            let forms: Option<Vec<Form>> = names.as_ref().and_then(|n| {
                n.iter()
                    .map(|s| match *s {
                        "nhp" => Some(Form::Nhp),
                        "anhp" => Some(Form::Anhp),
                        _ => None,
                    })
                    .collect()
            });
            match forms {
                Some(f) if !f.is_empty() => out.forms = f,
                _ => self.error(v.span(), "`forms` must be a nonempty array of \"nhp\" / \"anhp\""),
            }
        }
        out.nhp_gain = self.positive_opt(t, "nhp_gain");
        out.anhp_gain = self.positive_opt(t, "anhp_gain");
        out
    }

    fn battery(&mut self, table: Option<&Table<'_>>) -> BatteryConfig {
        let mut out = BatteryConfig {
            kind: BatteryKind::Standard,
            horizon: None,
            output_cap: None,
        };
        let Some(t) = table else { return out };
        self.reject_unknown(t, "battery", &["name", "horizon", "output_cap"]);
        if let Some((name, span)) = self.string(t, "name") {
            out.kind = match name {
                "standard" => BatteryKind::Standard,
                "constant_tail" => BatteryKind::ConstantTail,
                "sines" => BatteryKind::Sines,
                _ => {
                    self.error(
                        span,
                        format!("unknown battery `{name}`; expected standard, constant_tail or sines"),
                    );
                    BatteryKind::Standard
                }
            };
        }
        out.horizon = self.positive_opt(t, "horizon");
        out.output_cap = self.positive_opt(t, "output_cap");
        out
    }
}

fn parse_float(text: &str) -> Option<f64> {
    match text {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" | "+nan" | "-nan" => Some(f64::NAN),
        _ => text.replace('_', "").parse().ok(),
    }
}

/// Span of the first key in `table`, or the file start for an empty table.
fn table_span(table: &Table<'_>) -> Range<usize> {
    table.iter().next().map_or(0..0, |(k, _)| k.span())
}

/// Parses and validates a scenario. All problems are collected before
/// returning, each with its position.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, Diagnostics> {
    let mut r = Reader {
        src: text,
        errors: Vec::new(),
    };
    let (root, syntax) = DeTable::parse_recoverable(text);
    for e in syntax {
        let span = e.span().unwrap_or(0..0);
        r.error(span, e.message().to_string());
    }
    // values recovered around a syntax error are unreliable
    if !r.errors.is_empty() {
        return Err(Diagnostics(r.errors));
    }
    let root = root.into_inner();
    r.reject_unknown(&root, "", &TOP_KEYS);

    let title = r.string(&root, "title").map(|(s, _)| s.to_string());
    let output_dir = r.string(&root, "output_dir").map(|(s, _)| PathBuf::from(s));
    let expect_exit = r.f64_opt(&root, "expect_exit").map(|x| x as i32);
    let checks = r.checks(&root);

    let system = match r.subtable(&root, "system") {
        Some(t) => r.system(t, "system"),
        None => {
            if Reader::get(&root, "system").is_none() {
                r.error(0..0, "missing [system] table");
            }
            None
        }
    };
    let downstream = r.subtable(&root, "downstream").and_then(|t| r.system(t, "downstream"));
    if downstream.is_none() && Reader::get(&root, "downstream").is_none() {
        if let Some((_, span)) = checks.iter().find(|(c, _)| *c == Check::Compose) {
            r.error(span.clone(), "check `compose` needs a [downstream] system");
        }
    }
    let input = match r.subtable(&root, "input") {
        Some(t) => r.input(t),
        None if Reader::get(&root, "input").is_some() => None,
        None => make_signal(SignalSpec::Constant { value: 0.0 }).ok(),
    };
    let default_horizon = match (&system, checks.iter().any(|(c, _)| *c == Check::Barbalat)) {
        (Some(s), true) => nhp_core::certificates::barbalat_horizon(s),
        _ => nhp_core::certificates::STANDARD_HORIZON,
    };
    let solver_table = r.subtable(&root, "solver");
    let solver = r.solver(solver_table, default_horizon);
    let certificate_table = r.subtable(&root, "certificate");
    let certificate = r.certificate(certificate_table);

    let mut tolerances = CheckTolerances::default();
    if let Some(t) = r.subtable(&root, "tolerances") {
        r.reject_unknown(t, "tolerances", &["pointwise", "integral"]);
        tolerances.pointwise = r.positive_opt(t, "pointwise");
        tolerances.integral = r.positive_opt(t, "integral");
    }
    let battery_table = r.subtable(&root, "battery");
    let battery = r.battery(battery_table);

    let mut barbalat = BarbalatThresholds::default();
    if let Some(t) = r.subtable(&root, "barbalat") {
        r.reject_unknown(t, "barbalat", &["output", "integral", "window_fraction", "relative"]);
        barbalat.output = r.positive(t, "output", Some(barbalat.output)).unwrap_or(barbalat.output);
        barbalat.integral = r.positive(t, "integral", Some(barbalat.integral)).unwrap_or(barbalat.integral);
        let f = r.positive(t, "window_fraction", Some(barbalat.window_fraction));
        match f {
            Some(f) if f <= 0.5 => barbalat.window_fraction = f,
            Some(f) => {
                let span = Reader::get(t, "window_fraction").map_or(0..0, |v| v.span());
                r.error(span, format!("window_fraction must lie in (0, 0.5] (got {f})"));
            }
            None => {}
        }
        if let Some(v) = Reader::get(t, "relative") {
            match v.get_ref().as_bool() {
                Some(b) => barbalat.relative = b,
                None => r.error(v.span(), "`relative` must be a boolean"),
            }
        }
    }

    let mut grid = GridSpec::new(10.0, 1000);
    if let Some(t) = r.subtable(&root, "grid") {
        r.reject_unknown(t, "grid", &["half_width", "per_axis"]);
        grid.half_width = r.positive(t, "half_width", Some(grid.half_width)).unwrap_or(grid.half_width);
        if let Some(n) = r.positive(t, "per_axis", Some(grid.per_axis as f64)) {
            grid.per_axis = n as usize;
        }
    }

    let mut fit = FitConfig::default();
    let mut wfgs_p = 2.0;
    if let Some(t) = r.subtable(&root, "fit") {
        r.reject_unknown(t, "fit", &["lo", "hi", "tol", "wfgs_p"]);
        fit.lo = r.positive(t, "lo", Some(fit.lo)).unwrap_or(fit.lo);
        fit.hi = r.positive(t, "hi", Some(fit.hi)).unwrap_or(fit.hi);
        fit.tol = r.positive(t, "tol", Some(fit.tol)).unwrap_or(fit.tol);
        wfgs_p = r.positive(t, "wfgs_p", Some(2.0)).unwrap_or(2.0);
    }

    let initial_state = match (Reader::get(&root, "initial_state"), &system) {
        (Some(v), Some(sys)) => {
            let x = r.number_array(v, "initial_state");
            if let Some(x) = &x {
                if x.len() != sys.state_dim() {
                    r.error(
                        v.span(),
                        format!("initial_state has {} entries, `{}` has {} states", x.len(), sys.name(), sys.state_dim()),
                    );
                }
            }
            x
        }
        (Some(v), None) => r.number_array(v, "initial_state"),
        (None, Some(sys)) => Some(vec![0.0; sys.state_dim()]),
        (None, None) => None,
    };

    if let Some(sys) = &system {
        for (c, span) in &checks {
            let reason = applicability(*c, sys);
            if let Some(reason) = reason {
                r.error(span.clone(), format!("check `{}` {reason}", c.name()));
            }
        }
    }

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|d| (d.line, d.column));
        return Err(Diagnostics(r.errors));
    }
    Ok(ScenarioConfig {
        title,
        system: system.expect("no errors"),
        downstream,
        input: input.expect("no errors"),
        initial_state: initial_state.expect("no errors"),
        solver: solver.expect("no errors"),
        checks: checks.into_iter().map(|(c, _)| c).collect(),
        certificate,
        tolerances,
        battery,
        barbalat,
        grid,
        fit,
        wfgs_p,
        output_dir,
        expect_exit,
    })
}

/// Why `check` cannot run on `sys`, if it cannot.
impl Check {
    /// Whether the check is defined for this system.
    pub fn applies_to(self, sys: &SystemModel) -> bool {
        applicability(self, sys).is_none()
    }
}

fn applicability(check: Check, sys: &SystemModel) -> Option<&'static str> {
    use nhp_core::systems::SystemKind;
    match check {
        Check::Fenchel if !matches!(sys.kind(), SystemKind::SinhHp { .. }) => Some("applies to sinh_hp only"),
        Check::Sector if !matches!(sys.kind(), SystemKind::SectorHp { .. }) => Some("applies to sector_hp only"),
        Check::Psi if !matches!(sys.kind(), SystemKind::PiLoop { .. }) => Some("applies to pi and nonsmooth_pi only"),
        Check::RobustGain if sys.name() != "nonsmooth_pi" => Some("applies to nonsmooth_pi only"),
        Check::FitGain if matches!(sys.kind(), SystemKind::PiLoop { .. }) => {
            Some("has no one-parameter family for PI loops")
        }
        _ => None,
    }
}
