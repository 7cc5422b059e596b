//! Command-line front end: configuration in, CSV data plus a JSON sidecar out.
//!
//! Every run writes `<command>.csv` and `<command>.json` into the output
//! directory. The sidecar echoes the fully resolved configuration, so passing
//! it back as `--config` regenerates the same CSV.

mod config;
mod output;

pub use config::{Axis, LoadedConfig, MapY, RippleSearch, RunConfig, SweepConfig, SweepKind};
pub use output::{Table, FLOAT_FORMAT_DIGITS};

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::circuit::{FrequencyGrid, Netlist, NetlistFile};
use crate::frankenstein::PortKind;
use crate::solver::{BiasPoint, Solver, SolverSettings};
use crate::sweeps::{
    band_metrics, compression_set, emission_vs_ic, gain_map_fdc, gain_map_ic, gain_map_power,
    gain_profile, rapp_fit, raw_p1db, CompressionCurve, GainMap,
};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "icta",
    version,
    about = "Harmonic-balance simulator for DC-biased Josephson parametric amplifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML, or a JSON sidecar of an earlier run).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores by default. Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Reserved. The solver is deterministic and draws no random numbers.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Impedance seen by the junction.
    Zjj,
    /// Emission figure of merit `Re Z_JJ(f) / f`.
    Fom,
    /// Gain map over signal frequency and f_dc, I_c or input power.
    Gainmap,
    /// Gain versus signal frequency with band metrics.
    Profile,
    /// Gain versus input power at each signal frequency.
    Compression,
    /// Compression sweep followed by a Rapp fit per frequency.
    Fit,
    /// Pump power leaving the wave port at the Josephson frequency.
    Emission,
    /// Print the run plan without simulating.
    Describe,
}

impl Command {
    fn kind(self) -> Option<SweepKind> {
        Some(match self {
            Command::Zjj => SweepKind::Zjj,
            Command::Fom => SweepKind::Fom,
            Command::Gainmap => SweepKind::Gainmap,
            Command::Profile => SweepKind::Profile,
            Command::Compression | Command::Fit => SweepKind::Compression,
            Command::Emission => SweepKind::Emission,
            Command::Describe => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Zjj => "zjj",
            Command::Fom => "fom",
            Command::Gainmap => "gainmap",
            Command::Profile => "profile",
            Command::Compression => "compression",
            Command::Fit => "fit",
            Command::Emission => "emission",
            Command::Describe => "describe",
        }
    }
}

const DEFAULT_F_DC: f64 = 12e9;
const DEFAULT_IC: f64 = 280e-9;
const DEFAULT_POWER: f64 = -140.0;

fn default_signal() -> Axis {
    Axis::Range {
        start: 3e9,
        stop: 9e9,
        step: 40e6,
    }
}

/// Fully resolved sweep, every axis explicit.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Zjj {
        frequencies: Vec<f64>,
    },
    Fom {
        frequencies: Vec<f64>,
    },
    Gainmap {
        axis: MapY,
        signal: Vec<f64>,
        y: Vec<f64>,
        f_dc: f64,
        ic: f64,
        phi0: f64,
        power_dbm: f64,
        phase: f64,
    },
    Profile {
        signal: Vec<f64>,
        f_dc: f64,
        ic: f64,
        phi0: f64,
        power_dbm: f64,
        phase: f64,
        threshold_db: f64,
        ripple: Option<RippleSearch>,
    },
    Compression {
        signal: Vec<f64>,
        powers_dbm: Vec<f64>,
        f_dc: f64,
        ic: f64,
        phi0: f64,
        phase: f64,
    },
    Emission {
        f_dc: f64,
        ic: Vec<f64>,
        bandwidth: f64,
    },
}

/// Everything needed to execute a run.
#[derive(Debug, Clone)]
pub struct Plan {
    pub command: Command,
    pub kind: SweepKind,
    pub netlist: Netlist,
    pub settings: SolverSettings,
    pub port: usize,
    pub job: Job,
    /// Configuration echo with every default filled in.
    pub resolved: RunConfig,
}

impl Plan {
    pub fn new(loaded: &LoadedConfig, command: Command) -> Result<Self> {
        let cfg = &loaded.config;
        let kind = match (command.kind(), cfg.sweep.kind) {
            (Some(k), Some(c)) if k != c => {
                return Err(loaded.error(
                    &["sweep", "kind"],
                    format!(
                        "configuration is a `{}` sweep, not `{}`",
                        c.name(),
                        command.name()
                    ),
                ))
            }
            (Some(k), _) => k,
            (None, Some(c)) => c,
            (None, None) => {
                return Err(loaded.error(&["sweep", "kind"], "describe needs a sweep kind"))
            }
        };
        let netlist = loaded.netlist()?;
        let settings = loaded.solver()?;
        let s = &cfg.sweep;
        let needs_solver = !matches!(kind, SweepKind::Zjj | SweepKind::Fom);
        if needs_solver {
            netlist
                .junction_port()
                .map_err(|e| loaded.error(&["netlist"], e.to_string()))?;
        }
        let port = match &s.port {
            Some(name) => {
                let i = netlist.port_index(name).ok_or_else(|| {
                    loaded.error(&["sweep", "port"], format!("no port named `{name}`"))
                })?;
                if !matches!(netlist.ports()[i].kind, PortKind::Wave { .. }) {
                    return Err(
                        loaded.error(&["sweep", "port"], format!("`{name}` is not a wave port"))
                    );
                }
                i
            }
            None => match netlist.wave_ports().first() {
                Some(&i) => i,
                None if needs_solver => {
                    return Err(loaded.error(&["netlist"], "circuit has no wave port"))
                }
                None => 0,
            },
        };
        let phi0 = s.phi0.unwrap_or(0.0);
        let phase = s.phase.unwrap_or(0.0);
        if !(phi0.is_finite() && phase.is_finite()) {
            return Err(loaded.error(&["sweep", "phase"], "phases must be finite"));
        }
        let grid = settings.grid()?;
        let check_bias = |f_dc: f64, key: &str| -> Result<()> {
            BiasPoint::on_grid(f_dc, 0.0, 0.0, &grid)
                .map(|_| ())
                .map_err(|e| loaded.error(&["sweep", key], e.to_string()))
        };
        let check_band = |values: &[f64], key: &str| -> Result<()> {
            match values.iter().find(|f| grid.bin(**f).is_none_or(|k| k == 0)) {
                Some(f) => Err(loaded.error(
                    &["sweep", key],
                    format!("{f} Hz is outside the solver band (0, {}] Hz", grid.f_max()),
                )),
                None => Ok(()),
            }
        };
        let f_dc = loaded.scalar("f_dc", &s.f_dc, DEFAULT_F_DC);

        let job = match kind {
            SweepKind::Zjj | SweepKind::Fom => {
                let frequencies = loaded.axis(
                    "frequency",
                    &s.frequency,
                    Axis::Range {
                        start: 1e8,
                        stop: 15e9,
                        step: 1e7,
                    },
                )?;
                if frequencies[0] < 0.0 {
                    return Err(loaded.error(&["sweep", "frequency"], "frequencies must be >= 0"));
                }
                if kind == SweepKind::Fom && frequencies[0] == 0.0 {
                    return Err(loaded.error(&["sweep", "frequency"], "fom is undefined at 0 Hz"));
                }
                if kind == SweepKind::Zjj {
                    Job::Zjj { frequencies }
                } else {
                    Job::Fom { frequencies }
                }
            }
            SweepKind::Gainmap => {
                let axis = s.map_axis.unwrap_or(MapY::FDc);
                let signal = loaded.axis("signal", &s.signal, default_signal())?;
                check_band(&signal, "signal")?;
                let (y, f_dc, ic, power_dbm) = match axis {
                    MapY::FDc => {
                        let y = loaded.axis("f_dc", &s.f_dc, Axis::Scalar(DEFAULT_F_DC))?;
                        for f in &y {
                            check_bias(*f, "f_dc")?;
                        }
                        let p = loaded.scalar("power_dbm", &s.power_dbm, DEFAULT_POWER)?;
                        (y, f64::NAN, loaded.critical_current(DEFAULT_IC)?, p)
                    }
                    MapY::Ic => {
                        let y = loaded.critical_currents(Axis::Scalar(DEFAULT_IC))?;
                        let p = loaded.scalar("power_dbm", &s.power_dbm, DEFAULT_POWER)?;
                        (y, f_dc?, f64::NAN, p)
                    }
                    MapY::PowerDbm => {
                        let y =
                            loaded.axis("power_dbm", &s.power_dbm, Axis::Scalar(DEFAULT_POWER))?;
                        (y, f_dc?, loaded.critical_current(DEFAULT_IC)?, f64::NAN)
                    }
                };
                if axis != MapY::FDc {
                    check_bias(f_dc, "f_dc")?;
                }
                Job::Gainmap {
                    axis,
                    signal,
                    y,
                    f_dc,
                    ic,
                    phi0,
                    power_dbm,
                    phase,
                }
            }
            SweepKind::Profile => {
                let signal = loaded.axis("signal", &s.signal, default_signal())?;
                check_band(&signal, "signal")?;
                let f_dc = f_dc?;
                check_bias(f_dc, "f_dc")?;
                let threshold_db = s.threshold_db.unwrap_or(10.0);
                if !threshold_db.is_finite() {
                    return Err(loaded.error(&["sweep", "threshold_db"], "must be finite"));
                }
                if let Some(r) = s.ripple {
                    if !(r.min_period > 0.0 && r.max_period > r.min_period) {
                        return Err(
                            loaded.error(&["sweep", "ripple"], "need 0 < min_period < max_period")
                        );
                    }
                }
                Job::Profile {
                    signal,
                    f_dc,
                    ic: loaded.critical_current(DEFAULT_IC)?,
                    phi0,
                    power_dbm: loaded.scalar("power_dbm", &s.power_dbm, DEFAULT_POWER)?,
                    phase,
                    threshold_db,
                    ripple: s.ripple,
                }
            }
            SweepKind::Compression => {
                let signal = loaded.axis("signal", &s.signal, Axis::List(vec![5e9]))?;
                check_band(&signal, "signal")?;
                let f_dc = f_dc?;
                check_bias(f_dc, "f_dc")?;
                Job::Compression {
                    signal,
                    powers_dbm: loaded.axis(
                        "power_dbm",
                        &s.power_dbm,
                        Axis::Range {
                            start: -150.0,
                            stop: -90.0,
                            step: 2.0,
                        },
                    )?,
                    f_dc,
                    ic: loaded.critical_current(DEFAULT_IC)?,
                    phi0,
                    phase,
                }
            }
            SweepKind::Emission => {
                let f_dc = f_dc?;
                check_bias(f_dc, "f_dc")?;
                let bandwidth = s.bandwidth.unwrap_or(settings.spacing);
                if !(bandwidth.is_finite() && bandwidth >= 0.0) {
                    return Err(loaded.error(&["sweep", "bandwidth"], "must be >= 0"));
                }
                Job::Emission {
                    f_dc,
                    ic: loaded.critical_currents(Axis::Range {
                        start: 0.0,
                        stop: 300e-9,
                        step: 25e-9,
                    })?,
                    bandwidth,
                }
            }
        };

        let resolved = resolve(cfg, &netlist, settings, kind, port, &job);
        Ok(Plan {
            command,
            kind,
            netlist,
            settings,
            port,
            job,
            resolved,
        })
    }

    /// Number of harmonic-balance solves the run performs.
    pub fn solve_count(&self) -> usize {
        let grid = self.settings.grid().expect("validated");
        let degenerate = |f_dc: f64, f: f64| match (grid.bin(f), grid.bin(f_dc)) {
            (Some(s), Some(d)) => 2 * s == d,
            _ => false,
        };
        match &self.job {
            Job::Zjj { .. } | Job::Fom { .. } => 0,
            Job::Gainmap {
                axis, signal, y, ..
            } => match axis {
                MapY::PowerDbm => 1 + signal.len() * y.len(),
                _ => y.len() * (1 + signal.len()),
            },
            Job::Profile { signal, f_dc, .. } => {
                let f_dc = crate::solver::round_bias(*f_dc, &grid).unwrap_or(*f_dc);
                1 + signal
                    .iter()
                    .map(|&f| {
                        if degenerate(f_dc, f) {
                            crate::sweeps::DEGENERATE_PHASES
                        } else {
                            1
                        }
                    })
                    .sum::<usize>()
            }
            Job::Compression {
                signal, powers_dbm, ..
            } => 1 + signal.len() * powers_dbm.len(),
            Job::Emission { ic, .. } => ic.len(),
        }
    }

    /// Rough peak memory [bytes] for `threads` workers.
    pub fn memory_estimate(&self, threads: usize) -> (usize, usize) {
        let n = self.settings.points;
        let p = self.netlist.ports().len();
        let c = std::mem::size_of::<crate::C64>();
        let m = 2 * n * self.settings.zero_pad.max(1);
        let shared = n * p * p * c + n * (1 + 2 * p) * c;
        // FFT buffers plus a handful of spectra per solve and a warm-start seed
        let worker = m * 8 + 3 * (m / 2 + 1) * c + (6 + p) * n * c;
        (shared, worker * threads.max(1))
    }

    pub fn describe(&self, threads: usize) -> String {
        let g = self.settings.grid().expect("validated");
        let mut out = String::new();
        let line = |out: &mut String, s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(&mut out, format!("kind: {}", self.kind.name()));
        let ports: Vec<String> = self
            .netlist
            .ports()
            .iter()
            .map(|p| match p.kind {
                PortKind::Wave { impedance } => format!("{} (wave, {impedance} ohm)", p.name),
                PortKind::VoltageBias => format!("{} (voltage-bias)", p.name),
                PortKind::CurrentBias => format!("{} (current-bias)", p.name),
            })
            .collect();
        line(
            &mut out,
            format!(
                "circuit: {} elements, ports {}, hash {}",
                self.netlist.elements().len(),
                ports.join(", "),
                &self.netlist.content_hash()[..16]
            ),
        );
        line(
            &mut out,
            format!(
                "grid: spacing {:e} Hz, {} bins, f_max {:e} Hz, {} time samples",
                g.spacing(),
                g.points(),
                g.f_max(),
                2 * g.points() * self.settings.zero_pad
            ),
        );
        let axis = |name: &str, v: &[f64]| {
            format!(
                "{name}: {} points [{:e}, {:e}]",
                v.len(),
                v[0],
                v[v.len() - 1]
            )
        };
        match &self.job {
            Job::Zjj { frequencies } | Job::Fom { frequencies } => {
                line(&mut out, axis("frequency", frequencies));
            }
            Job::Gainmap {
                signal, y, axis: a, ..
            } => {
                line(&mut out, axis("signal", signal));
                line(&mut out, axis(output::map_column(*a), y));
                line(&mut out, format!("cells: {}", signal.len() * y.len()));
            }
            Job::Profile { signal, .. } => line(&mut out, axis("signal", signal)),
            Job::Compression {
                signal, powers_dbm, ..
            } => {
                line(&mut out, axis("signal", signal));
                line(&mut out, axis("power_dbm", powers_dbm));
            }
            Job::Emission { ic, .. } => line(&mut out, axis("ic", ic)),
        }
        line(&mut out, format!("solves: {}", self.solve_count()));
        let (shared, workers) = self.memory_estimate(threads);
        line(
            &mut out,
            format!(
                "memory: {:.1} MiB ({:.1} MiB response, {:.1} MiB for {threads} workers)",
                (shared + workers) as f64 / 1048576.0,
                shared as f64 / 1048576.0,
                workers as f64 / 1048576.0
            ),
        );
        out
    }
}

fn list(v: &[f64]) -> Option<Axis> {
    Some(Axis::List(v.to_vec()))
}

fn resolve(
    cfg: &RunConfig,
    net: &Netlist,
    settings: SolverSettings,
    kind: SweepKind,
    port: usize,
    job: &Job,
) -> RunConfig {
    let (netlist, icta) = if cfg.netlist_file.is_some() || cfg.netlist.is_some() {
        (Some(NetlistFile::from_netlist(net)), None)
    } else {
        (None, Some(cfg.icta.unwrap_or_default()))
    };
    let mut sweep = SweepConfig {
        kind: Some(kind),
        port: net.ports().get(port).map(|p| p.name.clone()),
        ..Default::default()
    };
    match job {
        Job::Zjj { frequencies } | Job::Fom { frequencies } => {
            sweep.port = None;
            sweep.frequency = list(frequencies);
        }
        Job::Gainmap {
            axis,
            signal,
            y,
            f_dc,
            ic,
            phi0,
            power_dbm,
            phase,
        } => {
            sweep.map_axis = Some(*axis);
            sweep.signal = list(signal);
            sweep.phi0 = Some(*phi0);
            sweep.phase = Some(*phase);
            let (fy, iy, py) = match axis {
                MapY::FDc => (
                    list(y),
                    Some(Axis::Scalar(*ic)),
                    Some(Axis::Scalar(*power_dbm)),
                ),
                MapY::Ic => (
                    Some(Axis::Scalar(*f_dc)),
                    list(y),
                    Some(Axis::Scalar(*power_dbm)),
                ),
                MapY::PowerDbm => (Some(Axis::Scalar(*f_dc)), Some(Axis::Scalar(*ic)), list(y)),
            };
            sweep.f_dc = fy;
            sweep.ic = iy;
            sweep.power_dbm = py;
        }
        Job::Profile {
            signal,
            f_dc,
            ic,
            phi0,
            power_dbm,
            phase,
            threshold_db,
            ripple,
        } => {
            sweep.signal = list(signal);
            sweep.f_dc = Some(Axis::Scalar(*f_dc));
            sweep.ic = Some(Axis::Scalar(*ic));
            sweep.phi0 = Some(*phi0);
            sweep.power_dbm = Some(Axis::Scalar(*power_dbm));
            sweep.phase = Some(*phase);
            sweep.threshold_db = Some(*threshold_db);
            sweep.ripple = *ripple;
        }
        Job::Compression {
            signal,
            powers_dbm,
            f_dc,
            ic,
            phi0,
            phase,
        } => {
            sweep.signal = list(signal);
            sweep.power_dbm = list(powers_dbm);
            sweep.f_dc = Some(Axis::Scalar(*f_dc));
            sweep.ic = Some(Axis::Scalar(*ic));
            sweep.phi0 = Some(*phi0);
            sweep.phase = Some(*phase);
        }
        Job::Emission {
            f_dc,
            ic,
            bandwidth,
        } => {
            sweep.f_dc = Some(Axis::Scalar(*f_dc));
            sweep.ic = list(ic);
            sweep.bandwidth = Some(*bandwidth);
        }
    }
    RunConfig {
        netlist_file: None,
        netlist,
        icta,
        solver: settings,
        sweep,
        output: None,
    }
}

/// Result of executing a plan.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    pub summary: serde_json::Value,
    pub warnings: Vec<String>,
    pub solves: usize,
}

fn masked_warning(masked: usize, total: usize) -> Vec<String> {
    if masked == 0 {
        Vec::new()
    } else {
        vec![format!(
            "{masked} of {total} points did not converge and are flagged"
        )]
    }
}

fn map_table(map: &GainMap) -> Table {
    let mut t = Table::new(&[
        map.y_axis.column(),
        "f_s_hz",
        "gain_db",
        "converged",
        "power_error",
    ]);
    for (r, y) in map.y.iter().enumerate() {
        for (c, f) in map.signal.iter().enumerate() {
            let i = map.index(r, c);
            t.row()
                .float(*y)
                .float(*f)
                .float(map.gain_db[i])
                .flag(map.converged[i])
                .float(map.power_error[i]);
        }
    }
    t
}

fn compression_table(curves: &[CompressionCurve]) -> Table {
    let mut t = Table::new(&["f_s_hz", "power_dbm", "gain_db", "converged", "power_error"]);
    for c in curves {
        for i in 0..c.powers_dbm.len() {
            t.row()
                .float(c.frequency)
                .float(c.powers_dbm[i])
                .float(c.gains_db[i])
                .flag(c.converged[i])
                .float(c.power_error[i]);
        }
    }
    t
}

impl Plan {
    pub fn execute(&self) -> Result<RunOutput> {
        if let Job::Zjj { frequencies } | Job::Fom { frequencies } = &self.job {
            return self.linear(frequencies);
        }
        let solver = Solver::new(&self.netlist, self.settings)?;
        let out = match &self.job {
            Job::Zjj { .. } | Job::Fom { .. } => unreachable!("handled above"),
            Job::Gainmap {
                axis,
                signal,
                y,
                f_dc,
                ic,
                phi0,
                power_dbm,
                phase,
            } => {
                let map = match axis {
                    MapY::FDc => {
                        gain_map_fdc(&solver, self.port, signal, y, *ic, *power_dbm, *phase)?
                    }
                    MapY::Ic => {
                        gain_map_ic(&solver, self.port, signal, y, *f_dc, *power_dbm, *phase)?
                    }
                    MapY::PowerDbm => {
                        let b = solver.bias(*f_dc, *ic, *phi0)?;
                        gain_map_power(&solver, &b, self.port, signal, y, *phase)?
                    }
                };
                let masked = map.converged.iter().filter(|c| !**c).count();
                RunOutput {
                    table: map_table(&map),
                    summary: json!({
                        "cells": map.gain_db.len(),
                        "masked": masked,
                        "max_gain_db": map.gain_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    }),
                    warnings: masked_warning(masked, map.gain_db.len()),
                    solves: 0,
                }
            }
            Job::Profile {
                signal,
                f_dc,
                ic,
                phi0,
                power_dbm,
                phase,
                threshold_db,
                ripple,
            } => {
                let b = solver.bias(*f_dc, *ic, *phi0)?;
                let p = gain_profile(&solver, &b, self.port, signal, *power_dbm, *phase)?;
                let mut t = Table::new(&[
                    "f_s_hz",
                    "gain_db",
                    "converged",
                    "iterations",
                    "power_error",
                    "envelope_min_db",
                    "envelope_max_db",
                ]);
                for (i, pt) in p.points.iter().enumerate() {
                    let r = t
                        .row()
                        .float(p.frequencies[i])
                        .float(pt.gain_db)
                        .flag(pt.converged)
                        .int(pt.iterations)
                        .float(pt.power_error);
                    match p.envelope[i] {
                        Some((lo, hi)) => r.float(lo).float(hi),
                        None => r.empty().empty(),
                    };
                }
                let masked = p.points.iter().filter(|x| !x.converged).count();
                let ripple = ripple.map(|r| match p.ripple_period(r.min_period, r.max_period) {
                    Ok(v) => json!(v),
                    Err(e) => json!(e.to_string()),
                });
                RunOutput {
                    table: t,
                    summary: json!({
                        "bias": b,
                        "band": band_metrics(&p, *threshold_db),
                        "ripple_period_hz": ripple,
                        "masked": masked,
                    }),
                    warnings: masked_warning(masked, p.points.len()),
                    solves: 0,
                }
            }
            Job::Compression {
                signal,
                powers_dbm,
                f_dc,
                ic,
                phi0,
                phase,
            } => {
                let b = solver.bias(*f_dc, *ic, *phi0)?;
                let curves = compression_set(&solver, &b, self.port, signal, powers_dbm, *phase)?;
                let total = signal.len() * powers_dbm.len();
                let masked = curves
                    .iter()
                    .flat_map(|c| &c.converged)
                    .filter(|c| !**c)
                    .count();
                if self.command == Command::Fit {
                    self.fit(&curves, masked, total)
                } else {
                    RunOutput {
                        table: compression_table(&curves),
                        summary: json!({ "bias": b, "masked": masked }),
                        warnings: masked_warning(masked, total),
                        solves: 0,
                    }
                }
            }
            Job::Emission {
                f_dc,
                ic,
                bandwidth,
            } => {
                let e = emission_vs_ic(&solver, self.port, *f_dc, ic, *bandwidth)?;
                let mut t = Table::new(&[
                    "ic_a",
                    "power_w",
                    "power_dbm",
                    "photon_rate_per_s",
                    "converged",
                ]);
                for x in &e {
                    t.row()
                        .float(x.ic)
                        .float(x.power_w)
                        .float(x.power_dbm)
                        .float(x.photon_rate)
                        .flag(x.converged);
                }
                let masked = e.iter().filter(|x| !x.converged).count();
                let monotone = e.windows(2).all(|w| w[1].power_w > w[0].power_w);
                RunOutput {
                    table: t,
                    summary: json!({
                        "f_dc_hz": e.first().map(|x| x.f_dc),
                        "increasing_in_ic": monotone,
                        "masked": masked,
                    }),
                    warnings: masked_warning(masked, e.len()),
                    solves: 0,
                }
            }
        };
        Ok(RunOutput {
            solves: solver.solves(),
            ..out
        })
    }

    fn linear(&self, frequencies: &[f64]) -> Result<RunOutput> {
        let z: Vec<crate::C64> = frequencies
            .iter()
            .map(|&f| crate::circuit::z_jj_at(&self.netlist, f))
            .collect::<Result<_>>()?;
        let table = if self.kind == SweepKind::Zjj {
            let mut t = Table::new(&["f_hz", "re_zjj_ohm", "im_zjj_ohm"]);
            for (f, z) in frequencies.iter().zip(&z) {
                t.row().float(*f).float(z.re).float(z.im);
            }
            t
        } else {
            let mut t = Table::new(&["f_hz", "re_zjj_over_f_ohm_per_hz"]);
            for (f, z) in frequencies.iter().zip(&z) {
                t.row().float(*f).float(z.re / f);
            }
            t
        };
        let reference = self.netlist.ports().iter().find_map(|p| match p.kind {
            PortKind::Wave { impedance } => Some(impedance),
            _ => None,
        });
        let band = reference.and_then(|r| {
            let re: Vec<f64> = z.iter().map(|z| z.re).collect();
            crate::design::band_report(frequencies, &re, r).ok()
        });
        Ok(RunOutput {
            table,
            summary: json!({ "band": band }),
            warnings: Vec::new(),
            solves: 0,
        })
    }

    fn fit(&self, curves: &[CompressionCurve], masked: usize, total: usize) -> RunOutput {
        let mut t = Table::new(&[
            "f_s_hz",
            "g0_db",
            "psat_dbm",
            "p",
            "p1db_dbm",
            "raw_p1db_dbm",
            "rms_residual_db",
            "status",
        ]);
        let mut p1db = Vec::new();
        let mut warnings = masked_warning(masked, total);
        for c in curves {
            let raw = raw_p1db(c);
            let r = t.row().float(c.frequency);
            match rapp_fit(c) {
                Ok(fit) => {
                    p1db.push(fit.p1db_dbm());
                    r.float(10.0 * fit.g0.log10())
                        .float(crate::units::watts_to_dbm(fit.psat))
                        .float(fit.p)
                        .float(fit.p1db_dbm())
                        .opt(raw)
                        .float(fit.residual)
                        .text("ok");
                }
                Err(e) => {
                    warnings.push(format!("{:e} Hz: {e}", c.frequency));
                    let status = match e {
                        Error::NotFittable(_) => "not-fittable",
                        _ => "fit-failed",
                    };
                    r.empty()
                        .empty()
                        .empty()
                        .empty()
                        .opt(raw)
                        .empty()
                        .text(status);
                }
            }
        }
        let mean = (!p1db.is_empty()).then(|| p1db.iter().sum::<f64>() / p1db.len() as f64);
        RunOutput {
            table: t,
            summary: json!({
                "fitted": p1db.len(),
                "curves": curves.len(),
                "mean_p1db_dbm": mean,
                "masked": masked,
            }),
            warnings,
            solves: 0,
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    software: String,
    command: &'a str,
    data: String,
    columns: &'a [String],
    rows: usize,
    netlist_hash: String,
    grid: serde_json::Value,
    solves: usize,
    threads: usize,
    wall_time_s: f64,
    summary: &'a serde_json::Value,
    warnings: &'a [String],
    config: &'a RunConfig,
}

/// Runs a parsed command line; returns the process exit status.
pub fn run(cli: Cli) -> Result<()> {
    let loaded = match &cli.config {
        Some(path) => LoadedConfig::from_file(path)?,
        None => LoadedConfig::defaults(),
    };
    let plan = Plan::new(&loaded, cli.command)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(Error::Config("--threads must be at least 1".into()));
            }
            b = b.num_threads(n);
        }
        b.build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
    };
    let threads = pool.current_num_threads();
    if cli.command == Command::Describe {
        print!("{}", plan.describe(threads));
        return Ok(());
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| loaded.config.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    let start = Instant::now();
    let result = pool.install(|| plan.execute())?;
    let wall = start.elapsed().as_secs_f64();

    let name = cli.command.name();
    let data = format!("{name}.csv");
    std::fs::write(out_dir.join(&data), result.table.to_csv())?;
    let grid = plan.settings.grid()?;
    let sidecar = Sidecar {
        software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        command: name,
        data: data.clone(),
        columns: result.table.columns(),
        rows: result.table.len(),
        netlist_hash: plan.netlist.content_hash(),
        grid: grid_json(&grid, plan.settings.zero_pad),
        solves: result.solves,
        threads,
        wall_time_s: wall,
        summary: &result.summary,
        warnings: &result.warnings,
        config: &plan.resolved,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(out_dir.join(format!("{name}.json")), json + "\n")?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{name}: {} rows, {} solves, {wall:.2} s -> {}",
        result.table.len(),
        result.solves,
        out_dir.join(data).display()
    );
    Ok(())
}

fn grid_json(grid: &FrequencyGrid, zero_pad: usize) -> serde_json::Value {
    json!({
        "spacing_hz": grid.spacing(),
        "points": grid.points(),
        "f_max_hz": grid.f_max(),
        "time_samples": 2 * grid.points() * zero_pad,
    })
}

/// Entry point of the `icta` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.seed.is_some() {
        eprintln!("note: --seed is reserved and has no effect");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
