//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::profile::ProfileKind;
use crate::pulse_data::{shock_threshold, PulseParams};

/// Every recognised key, in echo order.
pub const KEYS: [&str; 17] = [
    "params.delta",
    "params.eps0",
    "params.p",
    "profile.kind",
    "profile.amplitude",
    "profile.margin",
    "grid.r_min",
    "grid.r_max",
    "grid.points_per_pulse",
    "time.cfl",
    "time.t_max",
    "fan.count",
    "detect.mu_stop",
    "detect.d2_cap",
    "output.dir",
    "sweep.delta",
    "sweep.p",
];

/// Smallest accepted `grid.points_per_pulse`.
pub const MIN_POINTS_PER_PULSE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// Use this amplitude as given.
    Fixed(f64),
    /// Tune the amplitude so that `max Q = margin * threshold`.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSettings {
    pub kind: ProfileKind,
    pub amplitude: Amplitude,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    pub r_min: f64,
    pub r_max: f64,
    pub points_per_pulse: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSettings {
    pub cfl: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectSettings {
    pub mu_stop: f64,
    /// Multiplier: the absolute cap on `max |d_r v|` is
    /// `d2_cap * max |d_r v|(t = 1) / delta`.
    pub d2_cap: f64,
}

/// A fully validated run configuration.
///
/// `params.amplitude` mirrors a fixed `profile.amplitude` and is zero in
/// auto mode; [`RunConfig::resolve_params`] gives the amplitude actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PulseParams,
    pub profile: ProfileSettings,
    pub grid: GridSettings,
    pub time: TimeSettings,
    pub fan_count: usize,
    pub detect: DetectSettings,
    pub output_dir: PathBuf,
    pub sweep_delta: Vec<f64>,
    pub sweep_p: Vec<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PulseParams {
                delta: 0.1,
                eps0: 0.5,
                p: 1,
                amplitude: 0.0,
            },
            profile: ProfileSettings {
                kind: ProfileKind::StandardBump,
                amplitude: Amplitude::Auto,
                margin: 2.0,
            },
            grid: GridSettings {
                r_min: 0.2,
                r_max: 2.2,
                points_per_pulse: 200,
            },
            time: TimeSettings {
                cfl: 0.4,
                t_max: 1.75,
            },
            fan_count: crate::acoustic_geometry::DEFAULT_FAN_COUNT,
            detect: DetectSettings {
                mu_stop: 0.05,
                d2_cap: 1e3,
            },
            output_dir: PathBuf::from("out"),
            sweep_delta: Vec::new(),
            sweep_p: Vec::new(),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValidation {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| format!("cannot parse list entry '{}'", x.trim())))
        .collect()
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse::<T>().map_err(|_| format!("cannot parse '{value}'"))
}

impl RunConfig {
    /// Apply one `key = value` assignment, without cross-field validation.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "params.delta" => self.params.delta = parse_num(value)?,
            "params.eps0" => self.params.eps0 = parse_num(value)?,
            "params.p" => self.params.p = parse_num(value)?,
            "profile.kind" => self.profile.kind = value.parse().map_err(|e: Error| e.to_string())?,
            "profile.amplitude" => {
                self.profile.amplitude = if value == "auto" {
                    Amplitude::Auto
                } else {
                    Amplitude::Fixed(parse_num(value)?)
                };
            }
            "profile.margin" => self.profile.margin = parse_num(value)?,
            "grid.r_min" => self.grid.r_min = parse_num(value)?,
            "grid.r_max" => self.grid.r_max = parse_num(value)?,
            "grid.points_per_pulse" => self.grid.points_per_pulse = parse_num(value)?,
            "time.cfl" => self.time.cfl = parse_num(value)?,
            "time.t_max" => self.time.t_max = parse_num(value)?,
            "fan.count" => self.fan_count = parse_num(value)?,
            "detect.mu_stop" => self.detect.mu_stop = parse_num(value)?,
            "detect.d2_cap" => self.detect.d2_cap = parse_num(value)?,
            "output.dir" => {
                if value.is_empty() {
                    return Err("output directory must not be empty".into());
                }
                self.output_dir = PathBuf::from(value);
            }
            "sweep.delta" => self.sweep_delta = parse_list(value)?,
            "sweep.p" => self.sweep_p = parse_list(value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        if key == "profile.amplitude" {
            self.params.amplitude = match self.profile.amplitude {
                Amplitude::Fixed(a) => a,
                Amplitude::Auto => 0.0,
            };
        }
        Ok(())
    }

    /// Parse config text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::ConfigParse {
                path: origin.to_string(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            if let Some(k) = KEYS.iter().find(|k| **k == key) {
                if seen.contains(k) {
                    return Err(err(format!("duplicate key '{key}'")));
                }
                seen.push(k);
            }
            config.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        Ok(config)
    }

    /// Apply `key=value` overrides in order.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for (idx, item) in overrides.iter().enumerate() {
            let err = |message: String| Error::ConfigParse {
                path: "--set".into(),
                line: idx + 1,
                message,
            };
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{item}'")))?;
            self.set(key.trim(), value).map_err(|m| err(format!("{}: {m}", key.trim())))?;
        }
        Ok(())
    }

    /// Pulse widths and exponents a run of this config may touch.
    fn deltas(&self) -> Vec<f64> {
        let mut d = vec![self.params.delta];
        d.extend(&self.sweep_delta);
        d
    }

    fn exponents(&self) -> Vec<u32> {
        let mut p = vec![self.params.p];
        p.extend(&self.sweep_p);
        p
    }

    pub fn validate(&self) -> Result<()> {
        let check = |params: PulseParams, key: &str| {
            params.validate().map_err(|e| invalid(key, e.to_string()))
        };
        check(self.params, "params")?;
        for &d in &self.sweep_delta {
            check(self.params.with_delta(d), "sweep.delta")?;
        }
        for &p in &self.sweep_p {
            check(PulseParams { p, ..self.params }, "sweep.p")?;
        }
        match self.profile.amplitude {
            Amplitude::Fixed(a) if !(a >= 0.0 && a.is_finite()) => {
                return Err(invalid("profile.amplitude", "must be 'auto' or a non-negative number"));
            }
            Amplitude::Auto => {
                for p in self.exponents() {
                    let params = PulseParams { p, ..self.params };
                    if shock_threshold(&params).is_err() {
                        return Err(invalid(
                            "profile.amplitude",
                            format!(
                                "auto amplitude needs p <= p_c = {}, got p = {p}; give a fixed amplitude",
                                params.p_c()
                            ),
                        ));
                    }
                }
            }
            _ => {}
        }
        if !(self.profile.margin > 0.0 && self.profile.margin.is_finite()) {
            return Err(invalid("profile.margin", "must be positive"));
        }
        let g = &self.grid;
        if !(g.r_min > 0.0 && g.r_min.is_finite()) {
            return Err(invalid("grid.r_min", "must be positive"));
        }
        for d in self.deltas() {
            if g.r_min >= 1.0 - d {
                return Err(invalid(
                    "grid.r_min",
                    format!("must lie below the pulse shell edge 1 - delta = {}", 1.0 - d),
                ));
            }
        }
        if !(g.r_max > self.time.t_max && g.r_max.is_finite()) {
            return Err(invalid(
                "grid.r_max",
                "must exceed time.t_max so outgoing characteristics stay on the grid",
            ));
        }
        if g.points_per_pulse < MIN_POINTS_PER_PULSE {
            return Err(invalid(
                "grid.points_per_pulse",
                format!("must be at least {MIN_POINTS_PER_PULSE}"),
            ));
        }
        if !(self.time.cfl > 0.0 && self.time.cfl < 1.0) {
            return Err(invalid("time.cfl", "time.cfl must be in (0,1)"));
        }
        if !(self.time.t_max > 1.0 && self.time.t_max.is_finite()) {
            return Err(invalid("time.t_max", "must exceed the initial time 1"));
        }
        if self.fan_count < 8 {
            return Err(invalid("fan.count", "must be at least 8"));
        }
        if !(self.detect.mu_stop > 0.0 && self.detect.mu_stop < 1.0) {
            return Err(invalid("detect.mu_stop", "must be in (0,1)"));
        }
        if !(self.detect.d2_cap > 0.0 && self.detect.d2_cap.is_finite()) {
            return Err(invalid("detect.d2_cap", "must be positive"));
        }
        Ok(())
    }

    /// Parameters with the amplitude resolved (tuned in auto mode).
    pub fn resolve_params(&self) -> Result<PulseParams> {
        let base = PulseParams {
            amplitude: 1.0,
            ..self.params
        };
        let amplitude = match self.profile.amplitude {
            Amplitude::Fixed(a) => a,
            Amplitude::Auto => {
                let target = self.profile.margin * shock_threshold(&base)?;
                crate::pulse_data::tune_amplitude(self.profile.kind, &base, target)?
            }
        };
        let params = base.with_amplitude(amplitude);
        params.validate()?;
        Ok(params)
    }

    /// Canonical `key = value` text; parses back to the same config.
    pub fn to_text(&self) -> String {
        let join = |xs: Vec<String>| xs.join(", ");
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "params.delta" => self.params.delta.to_string(),
                "params.eps0" => self.params.eps0.to_string(),
                "params.p" => self.params.p.to_string(),
                "profile.kind" => self.profile.kind.to_string(),
                "profile.amplitude" => match self.profile.amplitude {
                    Amplitude::Fixed(a) => a.to_string(),
                    Amplitude::Auto => "auto".into(),
                },
                "profile.margin" => self.profile.margin.to_string(),
                "grid.r_min" => self.grid.r_min.to_string(),
                "grid.r_max" => self.grid.r_max.to_string(),
                "grid.points_per_pulse" => self.grid.points_per_pulse.to_string(),
                "time.cfl" => self.time.cfl.to_string(),
                "time.t_max" => self.time.t_max.to_string(),
                "fan.count" => self.fan_count.to_string(),
                "detect.mu_stop" => self.detect.mu_stop.to_string(),
                "detect.d2_cap" => self.detect.d2_cap.to_string(),
                "output.dir" => self.output_dir.display().to_string(),
                "sweep.delta" => join(self.sweep_delta.iter().map(|d| d.to_string()).collect()),
                "sweep.p" => join(self.sweep_p.iter().map(|p| p.to_string()).collect()),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Write the resolved config as `config.txt` into `dir`.
    pub fn echo_into(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("config.txt");
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Read, override and validate a config file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = RunConfig::parse(&text, &path.display().to_string())?;
    config.apply_overrides(overrides)?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "# header\nparams.delta = 0.1\n\nparams.bogus = 3\n";
        match RunConfig::parse(text, "x.cfg") {
            Err(Error::ConfigParse { path, line, message }) => {
                assert_eq!(path, "x.cfg");
                assert_eq!(line, 4);
                assert!(message.contains("params.bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            RunConfig::parse("params.p = 1\nparams.p = 2", "x"),
            Err(Error::ConfigParse { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse("params.delta 0.1", "x"),
            Err(Error::ConfigParse { line: 1, .. })
        ));
    }

    #[test]
    fn inline_comments_and_lists() {
        let c = RunConfig::parse("sweep.delta = 0.2, 0.1 # two\nsweep.p = 1,2\nprofile.amplitude = 0.3", "x")
            .unwrap();
        assert_eq!(c.sweep_delta, vec![0.2, 0.1]);
        assert_eq!(c.sweep_p, vec![1, 2]);
        assert_eq!(c.profile.amplitude, Amplitude::Fixed(0.3));
        assert_eq!(c.params.amplitude, 0.3);
    }

    #[test]
    fn overrides_apply_last() {
        let mut c = RunConfig::parse("params.delta = 0.1", "x").unwrap();
        c.apply_overrides(&["params.delta=0.05".into()]).unwrap();
        assert_eq!(c.params.delta, 0.05);
        assert!(matches!(
            c.apply_overrides(&["nonsense".into()]),
            Err(Error::ConfigParse { line: 1, .. })
        ));
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = RunConfig::default();
        c.time.cfl = 1.5;
        match c.validate() {
            Err(Error::ConfigValidation { key, message }) => {
                assert_eq!(key, "time.cfl");
                assert!(message.contains("time.cfl must be in (0,1)"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut c = RunConfig::default();
        c.params.p = 3;
        assert!(matches!(c.validate(), Err(Error::ConfigValidation { key, .. }) if key == "profile.amplitude"));
        c.profile.amplitude = Amplitude::Fixed(0.2);
        c.validate().unwrap();
        let mut c = RunConfig::default();
        c.grid.r_min = 0.95;
        assert!(matches!(c.validate(), Err(Error::ConfigValidation { key, .. }) if key == "grid.r_min"));
    }

    #[test]
    fn auto_amplitude_hits_margin() {
        let c = RunConfig::default();
        let params = c.resolve_params().unwrap();
        let phi0 = crate::profile::make_profile(c.profile.kind, params.amplitude).unwrap();
        let phi1 = crate::pulse_data::build_phi1(&phi0, &params);
        let m = crate::pulse_data::shock_margin(&phi0, &phi1, &params).unwrap();
        assert!((m.q_max - 4.0).abs() < 1e-6, "{}", m.q_max);
    }

    proptest! {
        #[test]
        fn echo_round_trips(
            delta in 0.01f64..0.5, eps0 in 0.05f64..0.95, p in 1u32..4,
            amp in proptest::option::of(0.0f64..1.0), ppp in 10usize..500,
            deltas in proptest::collection::vec(0.01f64..0.5, 0..5),
        ) {
            let mut c = RunConfig::default();
            c.params.delta = delta;
            c.params.eps0 = eps0;
            c.params.p = p;
            c.profile.amplitude = amp.map_or(Amplitude::Auto, Amplitude::Fixed);
            c.params.amplitude = amp.unwrap_or(0.0);
            c.grid.points_per_pulse = ppp;
            c.sweep_delta = deltas;
            prop_assert_eq!(RunConfig::parse(&c.to_text(), "echo").unwrap(), c);
        }
    }
}
