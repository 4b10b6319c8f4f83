//! TOML experiment files.
//!
//! ```toml
//! mu = 2.0
//! h0 = 2.0
//! kernel = { family = "laplace", beta = 1.0 }
//! a = { mean = 1.0, modes = [[0.5, 1.0, 0.0], [0.3, 1.4142135623, 0.0]] }
//! b = { mean = 1.0 }
//!
//! [analysis]
//! window_fraction = 0.5
//!
//! [sweep]
//! parameter = "mu"
//! values = [0.01, 0.1, 1.0]
//! ```
//!
//! Everything except `mu`, `h0`, `kernel`, `a` and `b` has a default; see
//! [`defaults`].

use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::forcing::{GrowthLaw, QuasiPeriodicSignal, SpatialEnvelope};
use crate::kernels::{truncate, AnyKernel, KernelSpec};
use crate::solver::{ConvolutionMethod, InitialShape, RunConfig, SolverError};

pub mod defaults {
    pub const D: f64 = 1.0;
    pub const DX: f64 = 0.1;
    pub const WINDOW_HALFWIDTH: f64 = 200.0;
    pub const DT: f64 = 0.01;
    pub const HORIZON: f64 = 100.0;
    pub const RECORD_EVERY: f64 = 1.0;
    pub const SNAPSHOT_EVERY: f64 = 10.0;
    pub const INITIAL_AMPLITUDE: f64 = 0.5;
    pub const WINDOW_FRACTION: f64 = 0.5;
    pub const EPS_FRACTION: f64 = 0.5;
    pub const WIDTH_THRESHOLD: f64 = 20.0;
    pub const DECAY_TOL: f64 = 1e-3;
}

/// One problem with one key.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("ParseError at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("ValidationError: {}", join(.0))]
    Validation(Vec<FieldError>),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    pub window_fraction: f64,
    pub eps_fraction: f64,
    pub width_threshold: f64,
    pub decay_tol: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            window_fraction: defaults::WINDOW_FRACTION,
            eps_fraction: defaults::EPS_FRACTION,
            width_threshold: defaults::WIDTH_THRESHOLD,
            decay_tol: defaults::DECAY_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Mu,
    H0,
    D,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Mu => "mu",
            SweepParameter::H0 => "h0",
            SweepParameter::D => "d",
        }
    }

    /// Copy of `run` with this parameter set to `value`.
    pub fn apply(self, run: &RunConfig<f64>, value: f64) -> RunConfig<f64> {
        let mut cfg = run.clone();
        match self {
            SweepParameter::Mu => cfg.mu = value,
            SweepParameter::H0 => cfg.h0 = value,
            SweepParameter::D => cfg.d = value,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub run: RunConfig<f64>,
    pub analysis: AnalysisSettings,
    pub sweep: Option<SweepAxis>,
    /// The file as given, echoed next to run outputs.
    pub source: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mu: Spanned<f64>,
    h0: Spanned<f64>,
    kernel: Spanned<RawKernel>,
    a: Spanned<RawSignal>,
    b: Spanned<RawSignal>,
    d: Option<Spanned<f64>>,
    dx: Option<Spanned<f64>>,
    window_halfwidth: Option<Spanned<f64>>,
    dt: Option<Spanned<f64>>,
    horizon: Option<Spanned<f64>>,
    record_every: Option<Spanned<f64>>,
    snapshot_every: Option<Spanned<f64>>,
    initial: Option<Spanned<RawInitial>>,
    envelope: Option<Spanned<RawEnvelope>>,
    convolution: Option<Spanned<String>>,
    analysis: Option<RawAnalysis>,
    sweep: Option<RawSweep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: String,
    sigma: Option<f64>,
    beta: Option<f64>,
    radius: Option<f64>,
    exponent: Option<f64>,
    scale: Option<f64>,
    cutoff: Option<f64>,
    width: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    mean: f64,
    #[serde(default)]
    modes: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default = "parabolic")]
    shape: String,
    #[serde(default = "initial_amplitude")]
    amplitude: f64,
}

fn parabolic() -> String {
    "parabolic".into()
}

fn initial_amplitude() -> f64 {
    defaults::INITIAL_AMPLITUDE
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    amplitude: f64,
    wavelength: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    window_fraction: Option<Spanned<f64>>,
    eps_fraction: Option<Spanned<f64>>,
    width_threshold: Option<Spanned<f64>>,
    decay_tol: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: Spanned<String>,
    values: Spanned<Vec<f64>>,
}

struct Checker<'a> {
    text: &'a str,
    errors: Vec<FieldError>,
}

impl<'a> Checker<'a> {
    fn line(&self, span: Range<usize>) -> usize {
        line_of(self.text, span.start)
    }

    fn fail(&mut self, key: &str, span: Option<Range<usize>>, message: impl Into<String>) {
        let line = span.map(|s| self.line(s));
        self.errors.push(FieldError { key: key.into(), line, message: message.into() });
    }

    fn number(
        &mut self,
        key: &str,
        value: &Option<Spanned<f64>>,
        default: f64,
        ok: impl Fn(f64) -> bool,
        requirement: &str,
    ) -> f64 {
        match value {
            Some(v) => self.checked(key, v, ok, requirement),
            None => default,
        }
    }

    fn checked(&mut self, key: &str, v: &Spanned<f64>, ok: impl Fn(f64) -> bool, requirement: &str) -> f64 {
        let x = *v.get_ref();
        if !(x.is_finite() && ok(x)) {
            self.fail(key, Some(v.span()), format!("{key} must be {requirement}"));
        }
        x
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn build_kernel(raw: &RawKernel) -> Result<AnyKernel<f64>, String> {
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| format!("family `{}` needs `{name}`", raw.family));
    let allowed: &[&str] = match raw.family.as_str() {
        "gaussian" => &["sigma"],
        "laplace" => &["beta"],
        "compact_bump" => &["radius"],
        "power_law" => &["exponent", "scale"],
        other => {
            return Err(format!("unknown family `{other}` (expected gaussian, laplace, compact_bump or power_law)"))
        }
    };
    let present = [
        ("sigma", raw.sigma),
        ("beta", raw.beta),
        ("radius", raw.radius),
        ("exponent", raw.exponent),
        ("scale", raw.scale),
    ];
    if let Some((name, _)) = present.iter().find(|(n, v)| v.is_some() && !allowed.contains(n)) {
        return Err(format!("`{name}` does not apply to family `{}`", raw.family));
    }
    let base = match raw.family.as_str() {
        "gaussian" => KernelSpec::gaussian(need("sigma", raw.sigma)?),
        "laplace" => KernelSpec::laplace(need("beta", raw.beta)?),
        "compact_bump" => KernelSpec::compact_bump(need("radius", raw.radius)?),
        _ => KernelSpec::power_law(need("exponent", raw.exponent)?, need("scale", raw.scale)?),
    }
    .map_err(|e| e.to_string())?;
    match (raw.cutoff, raw.width) {
        (None, None) => Ok(base.into()),
        (Some(n), w) => Ok(truncate(&base, n, w.unwrap_or(1.0)).map_err(|e| e.to_string())?.into()),
        (None, Some(_)) => Err("`width` needs `cutoff`".into()),
    }
}

fn build_signal(raw: &RawSignal) -> Result<QuasiPeriodicSignal<f64>, String> {
    let modes: Vec<(f64, f64, f64)> = raw.modes.iter().map(|m| (m[0], m[1], m[2])).collect();
    QuasiPeriodicSignal::new(raw.mean, &modes).map_err(|e| e.to_string())
}

/// Which key a cross-field solver complaint is about.
fn solver_key(message: &str) -> &'static str {
    if message.starts_with("dt") {
        "dt"
    } else if message.starts_with("window") || message.starts_with("grid") {
        "window_halfwidth"
    } else if message.starts_with("initial") {
        "initial"
    } else {
        "config"
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let mut ck = Checker { text, errors: Vec::new() };

    let d = ck.number("d", &raw.d, defaults::D, positive, "positive");
    let mu = ck.checked("mu", &raw.mu, |x| x >= 0.0, "non-negative");
    let h0 = ck.checked("h0", &raw.h0, positive, "positive");
    let dx = ck.number("dx", &raw.dx, defaults::DX, positive, "positive");
    let window_halfwidth =
        ck.number("window_halfwidth", &raw.window_halfwidth, defaults::WINDOW_HALFWIDTH, positive, "positive");
    let dt = ck.number("dt", &raw.dt, defaults::DT, positive, "positive");
    let horizon = ck.number("horizon", &raw.horizon, defaults::HORIZON, |x| x >= 0.0, "non-negative");
    let record_every = ck.number("record_every", &raw.record_every, defaults::RECORD_EVERY, positive, "positive");
    let snapshot_every =
        ck.number("snapshot_every", &raw.snapshot_every, defaults::SNAPSHOT_EVERY, positive, "positive");

    let kernel = build_kernel(raw.kernel.get_ref()).map_err(|m| ck.fail("kernel", Some(raw.kernel.span()), m)).ok();
    let a = build_signal(raw.a.get_ref()).map_err(|m| ck.fail("a", Some(raw.a.span()), m)).ok();
    let b = build_signal(raw.b.get_ref()).map_err(|m| ck.fail("b", Some(raw.b.span()), m)).ok();
    let growth = match (a, b) {
        (Some(a), Some(b)) => GrowthLaw::new(a, b).map_err(|e| ck.fail("b", Some(raw.b.span()), e.to_string())).ok(),
        _ => None,
    };

    let initial = match &raw.initial {
        None => Some(InitialShape::Parabolic { amplitude: defaults::INITIAL_AMPLITUDE }),
        Some(s) => {
            let r = s.get_ref();
            if !(r.amplitude > 0.0 && r.amplitude.is_finite()) {
                ck.fail("initial.amplitude", Some(s.span()), "initial.amplitude must be positive");
            }
            match r.shape.as_str() {
                "parabolic" => Some(InitialShape::Parabolic { amplitude: r.amplitude }),
                "cosine" => Some(InitialShape::Cosine { amplitude: r.amplitude }),
                other => {
                    ck.fail("initial.shape", Some(s.span()), format!("unknown shape `{other}` (parabolic or cosine)"));
                    None
                }
            }
        }
    };
    let envelope = match &raw.envelope {
        None => None,
        Some(s) => {
            let r = s.get_ref();
            SpatialEnvelope::new(r.amplitude, r.wavelength)
                .map_err(|e| ck.fail("envelope", Some(s.span()), e.to_string()))
                .ok()
        }
    };
    let convolution = match &raw.convolution {
        None => ConvolutionMethod::default(),
        Some(s) => match s.get_ref().as_str() {
            "fft" => ConvolutionMethod::Fft,
            "direct" => ConvolutionMethod::Direct,
            other => {
                ck.fail("convolution", Some(s.span()), format!("unknown method `{other}` (fft or direct)"));
                ConvolutionMethod::default()
            }
        },
    };

    let analysis = match &raw.analysis {
        None => AnalysisSettings::default(),
        Some(r) => AnalysisSettings {
            window_fraction: ck.number(
                "analysis.window_fraction",
                &r.window_fraction,
                defaults::WINDOW_FRACTION,
                |x| x > 0.0 && x <= 0.5,
                "in (0, 0.5]",
            ),
            eps_fraction: ck.number(
                "analysis.eps_fraction",
                &r.eps_fraction,
                defaults::EPS_FRACTION,
                |x| x > 0.0 && x < 1.0,
                "in (0, 1)",
            ),
            width_threshold: ck.number(
                "analysis.width_threshold",
                &r.width_threshold,
                defaults::WIDTH_THRESHOLD,
                positive,
                "positive",
            ),
            decay_tol: ck.number("analysis.decay_tol", &r.decay_tol, defaults::DECAY_TOL, positive, "positive"),
        },
    };

    let sweep = raw.sweep.as_ref().and_then(|r| {
        let parameter = match r.parameter.get_ref().as_str() {
            "mu" => SweepParameter::Mu,
            "h0" => SweepParameter::H0,
            "d" => SweepParameter::D,
            other => {
                ck.fail("sweep.parameter", Some(r.parameter.span()), format!("cannot sweep `{other}` (mu, h0 or d)"));
                return None;
            }
        };
        let values = r.values.get_ref();
        if values.len() < 2 {
            ck.fail("sweep.values", Some(r.values.span()), "sweep.values needs at least 2 values");
            return None;
        }
        if values.iter().any(|v| !v.is_finite()) {
            ck.fail("sweep.values", Some(r.values.span()), "sweep.values must be finite");
            return None;
        }
        Some(SweepAxis { parameter, values: values.clone() })
    });

    if !ck.errors.is_empty() {
        return Err(ConfigError::Validation(ck.errors));
    }
    let (Some(kernel), Some(growth), Some(initial)) = (kernel, growth, initial) else {
        unreachable!("a missing component always records an error");
    };
    let run = RunConfig {
        d,
        mu,
        h0,
        kernel,
        growth,
        envelope,
        initial,
        dx,
        window_halfwidth,
        dt,
        horizon,
        record_every,
        snapshot_every,
        convolution,
    };
    if let Err(SolverError::InvalidConfig(message)) = run.validate() {
        let key = solver_key(&message);
        let line = match key {
            "dt" => raw.dt.as_ref().map(|s| line_of(text, s.span().start)),
            "window_halfwidth" => raw.window_halfwidth.as_ref().map(|s| line_of(text, s.span().start)),
            _ => None,
        };
        return Err(ConfigError::Validation(vec![FieldError { key: key.into(), line, message }]));
    }
    Ok(ExperimentConfig { run, analysis, sweep, source: text.to_string() })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "mu = 2.0\nh0 = 2\nkernel = { family = \"laplace\", beta = 1.0 }\na = { mean = 1.0 }\nb = { mean = 1.0 }\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.run.d, defaults::D);
        assert_eq!(cfg.run.dx, defaults::DX);
        assert_eq!(cfg.run.horizon, defaults::HORIZON);
        assert_eq!(cfg.run.h0, 2.0);
        assert_eq!(cfg.run.convolution, ConvolutionMethod::Fft);
        assert_eq!(cfg.analysis, AnalysisSettings::default());
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn negative_d_is_a_validation_error() {
        let err = parse_config(&format!("{MINIMAL}d = -1\n")).unwrap_err();
        let ConfigError::Validation(errors) = &err else { panic!("{err}") };
        assert_eq!(errors[0].key, "d");
        assert_eq!(errors[0].line, Some(6));
        assert!(err.to_string().contains("d must be positive"));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let err = parse_config(&format!("{MINIMAL}foo = 3\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 6, .. }), "{err}");
        assert!(err.to_string().contains("foo"));
        let err = parse_config("mu = 1\nh0 = 1\nkernel = { family = \"gaussian\", sigma = 1, bogus = 2 }\na = { mean = 1 }\nb = { mean = 1 }\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn missing_required_key() {
        let err = parse_config(
            "h0 = 2\nkernel = { family = \"laplace\", beta = 1.0 }\na = { mean = 1.0 }\nb = { mean = 1.0 }\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("mu"), "{err}");
    }

    #[test]
    fn sweep_and_kernel_checks() {
        let err = parse_config(&format!("{MINIMAL}[sweep]\nparameter = \"mu\"\nvalues = [1.0]\n")).unwrap_err();
        assert!(err.to_string().contains("sweep.values"), "{err}");
        let cfg = parse_config(&format!("{MINIMAL}[sweep]\nparameter = \"h0\"\nvalues = [1.0, 2.0]\n")).unwrap();
        assert_eq!(cfg.sweep.unwrap().parameter, SweepParameter::H0);
        let err = parse_config(&MINIMAL.replace("beta", "sigma")).unwrap_err();
        assert!(err.to_string().contains("kernel"), "{err}");
        let truncated = MINIMAL.replace(
            "{ family = \"laplace\", beta = 1.0 }",
            "{ family = \"power_law\", exponent = 2.0, scale = 1.0, cutoff = 20.0, width = 1.0 }",
        );
        assert!(matches!(parse_config(&truncated).unwrap().run.kernel, AnyKernel::Truncated(_)));
    }

    #[test]
    fn cross_field_errors_name_the_key() {
        let err = parse_config(&format!("{MINIMAL}dt = 0.5\n")).unwrap_err();
        let ConfigError::Validation(errors) = &err else { panic!("{err}") };
        assert_eq!(errors[0].key, "dt");
        let err = parse_config(&format!("{MINIMAL}window_halfwidth = 3.0\n")).unwrap_err();
        let ConfigError::Validation(errors) = &err else { panic!("{err}") };
        assert_eq!(errors[0].key, "window_halfwidth");
    }
}
