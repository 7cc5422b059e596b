//! Run configuration schema (TOML, or a JSON sidecar from an earlier run).
//!
//! ```toml
//! # circuit: at most one of `netlist_file`, `[netlist]`, `[icta]`;
//! # the canonical amplifier when none is given
//! netlist_file = "embedding.toml"
//!
//! [solver]
//! spacing = 1e6
//! points = 32768
//!
//! [sweep]
//! kind = "profile"     # zjj | fom | gainmap | profile | compression | emission
//! f_dc = 12e9
//! ic = 280e-9          # or: flux = 0.32 (with optional ic_max)
//! power_dbm = -140.0
//! signal = { start = 3e9, stop = 9e9, step = 40e6 }
//! ```
//!
//! Axis-valued fields take a number, a list, or `{ start, stop, step }`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{build_icta, IctaParams, Netlist, NetlistFile};
use crate::design::{canonical_icta, ic_of_flux, FluxBias};
use crate::solver::SolverSettings;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Zjj,
    Fom,
    Gainmap,
    Profile,
    Compression,
    Emission,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Zjj => "zjj",
            SweepKind::Fom => "fom",
            SweepKind::Gainmap => "gainmap",
            SweepKind::Profile => "profile",
            SweepKind::Compression => "compression",
            SweepKind::Emission => "emission",
        }
    }
}

/// Parameter of a gain map's second axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapY {
    FDc,
    Ic,
    PowerDbm,
}

/// A number, an explicit list, or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Scalar(f64),
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
    Values { values: Vec<f64> },
}

impl Axis {
    pub fn values(&self) -> std::result::Result<Vec<f64>, String> {
        let v = match self {
            Axis::Scalar(x) => vec![*x],
            Axis::List(v) | Axis::Values { values: v } => v.clone(),
            Axis::Range { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Err("range needs finite start/stop and a positive step".into());
                }
                if stop < start {
                    return Err("range stop is below start".into());
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                if n > 10_000_000 {
                    return Err("range has more than 10^7 points".into());
                }
                (0..=n).map(|i| start + step * i as f64).collect()
            }
        };
        if v.is_empty() {
            return Err("axis is empty".into());
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err("axis has non-finite values".into());
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err("axis must be strictly increasing".into());
        }
        Ok(v)
    }

    pub fn scalar(&self) -> std::result::Result<f64, String> {
        match self.values()?.as_slice() {
            [x] => Ok(*x),
            v => Err(format!("expected a single value, got {}", v.len())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RippleSearch {
    pub min_period: f64,
    pub max_period: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SweepKind>,
    /// Wave port name; the first wave port by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_dc: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_axis: Option<MapY>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple: Option<RippleSearch>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netlist_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netlist: Option<NetlistFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icta: Option<IctaParams>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Output directory, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Sidecar layout; only the `config` member is read back.
#[derive(Deserialize)]
struct SidecarConfig {
    config: RunConfig,
}

/// Validation failure tied to a position in the configuration text.
fn located(source: &str, text: &str, path: &[&str], message: &str) -> Error {
    match key_line(text, path) {
        Some(line) => Error::Config(format!("{source}:{line}: {}: {message}", path.join("."))),
        None => Error::Config(format!("{source}: {}: {message}", path.join("."))),
    }
}

/// 1-based line of `table.key` (or a top-level key) in TOML text.
fn key_line(text: &str, path: &[&str]) -> Option<usize> {
    let (table, key) = match path {
        [key] => (None, *key),
        [table, key, ..] => (Some(*table), *key),
        [] => return None,
    };
    let mut current: Option<String> = None;
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[') {
            let name = name.trim_start_matches('[').trim_end_matches(']').trim();
            current = Some(name.to_string());
            if table.is_none() && name == key {
                return Some(i + 1);
            }
            if Some(name) == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        let in_scope = match table {
            None => current.is_none(),
            Some(t) => current.as_deref() == Some(t),
        };
        let is_key = line
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='));
        let dotted = table.is_some_and(|t| {
            current.is_none()
                && line
                    .strip_prefix(&format!("{t}.{key}"))
                    .is_some_and(|rest| rest.trim_start().starts_with('='))
        });
        if (in_scope && is_key) || dotted {
            return Some(i + 1);
        }
    }
    table_line
}

/// Configuration with its source text kept for error positions.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: String,
    text: String,
    base: PathBuf,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses TOML, or JSON when the text starts with `{` (a sidecar).
    pub fn parse(text: &str, source: &str, base: PathBuf) -> Result<Self> {
        let config = if text.trim_start().starts_with('{') {
            serde_json::from_str::<SidecarConfig>(text)
                .map(|s| s.config)
                .or_else(|_| serde_json::from_str::<RunConfig>(text))
                .map_err(|e| Error::Config(format!("{source}:{}: {e}", e.line())))?
        } else {
            toml::from_str::<RunConfig>(text).map_err(|e| {
                let line = e
                    .span()
                    .map(|s| 1 + text[..s.start.min(text.len())].matches('\n').count());
                let msg = e.message().to_string();
                match line {
                    Some(l) => Error::Config(format!("{source}:{l}: {msg}")),
                    None => Error::Config(format!("{source}: {msg}")),
                }
            })?
        };
        Ok(LoadedConfig {
            config,
            source: source.to_string(),
            text: text.to_string(),
            base,
        })
    }

    /// Built-in defaults for a run without a configuration file.
    pub fn defaults() -> Self {
        LoadedConfig {
            config: RunConfig::default(),
            source: "<defaults>".into(),
            text: String::new(),
            base: PathBuf::new(),
        }
    }

    pub fn error(&self, path: &[&str], message: impl AsRef<str>) -> Error {
        if self.text.trim_start().starts_with('{') {
            // positions in a sidecar are not tracked
            return Error::Config(format!(
                "{}: {}: {}",
                self.source,
                path.join("."),
                message.as_ref()
            ));
        }
        located(&self.source, &self.text, path, message.as_ref())
    }

    pub fn netlist(&self) -> Result<Netlist> {
        let c = &self.config;
        let given = [
            c.netlist_file.is_some(),
            c.netlist.is_some(),
            c.icta.is_some(),
        ];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(self.error(
                &["netlist"],
                "give at most one of netlist_file, [netlist] and [icta]",
            ));
        }
        if let Some(file) = &c.netlist_file {
            let path = self.base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| self.error(&["netlist_file"], format!("{}: {e}", path.display())))?;
            return Netlist::from_toml_str(&text)
                .map_err(|e| self.error(&["netlist_file"], format!("{}: {e}", path.display())));
        }
        if let Some(inline) = &c.netlist {
            return inline
                .to_netlist()
                .map_err(|e| self.error(&["netlist"], e.to_string()));
        }
        let params = c.icta.unwrap_or(canonical_icta().params);
        build_icta(&params).map_err(|e| self.error(&["icta"], e.to_string()))
    }

    /// Settings in the `[solver]` table, validated.
    pub fn solver(&self) -> Result<SolverSettings> {
        let s = self.config.solver;
        s.validate().map_err(|e| {
            self.error(
                &["solver"],
                e.to_string().trim_start_matches("configuration error: "),
            )
        })?;
        Ok(s)
    }

    pub fn axis(&self, key: &str, axis: &Option<Axis>, default: Axis) -> Result<Vec<f64>> {
        axis.as_ref()
            .unwrap_or(&default)
            .values()
            .map_err(|m| self.error(&["sweep", key], m))
    }

    pub fn scalar(&self, key: &str, axis: &Option<Axis>, default: f64) -> Result<f64> {
        match axis {
            None => Ok(default),
            Some(a) => a.scalar().map_err(|m| self.error(&["sweep", key], m)),
        }
    }

    /// Critical currents from `ic`, or from `flux` through the SQUID model.
    pub fn critical_currents(&self, default: Axis) -> Result<Vec<f64>> {
        let s = &self.config.sweep;
        match (&s.ic, &s.flux) {
            (Some(_), Some(_)) => {
                Err(self.error(&["sweep", "flux"], "give either ic or flux, not both"))
            }
            (_, Some(flux)) => {
                let ic_max = s.ic_max.unwrap_or(canonical_icta().ic_squid_max);
                let fl = flux
                    .values()
                    .map_err(|m| self.error(&["sweep", "flux"], m))?;
                let mut out = fl
                    .iter()
                    .map(|&f| ic_of_flux(FluxBias { flux: f, ic_max }))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| self.error(&["sweep", "flux"], e.to_string()))?;
                out.sort_by(f64::total_cmp);
                out.dedup();
                Ok(out)
            }
            (ic, None) => {
                let v = self.axis("ic", ic, default)?;
                if v.iter().any(|x| *x < 0.0) {
                    return Err(self.error(&["sweep", "ic"], "critical current must be >= 0"));
                }
                Ok(v)
            }
        }
    }

    pub fn critical_current(&self, default: f64) -> Result<f64> {
        match self.critical_currents(Axis::Scalar(default))?.as_slice() {
            [x] => Ok(*x),
            v => Err(self.error(
                &["sweep", "ic"],
                format!("expected a single value, got {}", v.len()),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_forms() {
        assert_eq!(Axis::Scalar(2.0).values().unwrap(), vec![2.0]);
        assert_eq!(
            Axis::Range {
                start: 1.0,
                stop: 2.0,
                step: 0.25
            }
            .values()
            .unwrap(),
            vec![1.0, 1.25, 1.5, 1.75, 2.0]
        );
        assert!(Axis::List(vec![]).values().is_err());
        assert!(Axis::List(vec![2.0, 1.0]).values().is_err());
        assert!(Axis::Range {
            start: 1.0,
            stop: 2.0,
            step: 0.0
        }
        .values()
        .is_err());
        assert!(Axis::List(vec![1.0, 2.0]).scalar().is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "[solver]\nspacing = 1e7\n\n[sweep]\nkind = \"profile\"\nsignl = 3\n";
        let err = LoadedConfig::parse(text, "c.toml", PathBuf::new()).unwrap_err();
        assert!(err.to_string().contains("c.toml:6"), "{err}");
    }

    #[test]
    fn validation_errors_carry_line_numbers() {
        let text = "[sweep]\nkind = \"profile\"\n\nsignal = []\n";
        let c = LoadedConfig::parse(text, "c.toml", PathBuf::new()).unwrap();
        let err = c
            .axis("signal", &c.config.sweep.signal, Axis::Scalar(1.0))
            .unwrap_err();
        assert!(
            err.to_string()
                .contains("c.toml:4: sweep.signal: axis is empty"),
            "{err}"
        );
    }

    #[test]
    fn flux_maps_to_critical_current() {
        let text = "[sweep]\nflux = 0.5\n";
        let c = LoadedConfig::parse(text, "c.toml", PathBuf::new()).unwrap();
        assert_eq!(c.critical_current(1.0).unwrap(), 0.0);
    }

    #[test]
    fn conflicting_circuits_are_rejected() {
        let text = "netlist_file = \"x.toml\"\n[icta]\nlp = 1e-9\n";
        let c = LoadedConfig::parse(text, "c.toml", PathBuf::new()).unwrap();
        assert!(c.netlist().is_err());
    }
}
