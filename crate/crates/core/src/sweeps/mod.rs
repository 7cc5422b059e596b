//! Sweep drivers: gain maps, gain profiles, compression curves, pump emission
//! and ripple analysis.
//!
//! Every driver fans independent chains out over the rayon pool and merges
//! them in input order, so results do not depend on the thread count.

mod features;
mod rapp;

pub use features::{map_features, ripple_period, MapFeatures, RegionFeature};
pub use rapp::{rapp_fit, rapp_gain_db, raw_p1db, RappFit};

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frankenstein::PortKind;
use crate::solver::{BiasPoint, SolutionState, Solver, Stimulus};
use crate::units::{photon_rate, watts_to_dbm};
use crate::{Error, Result, C64};

/// Phases sampled at the degenerate point `f_s = f_dc/2`.
pub const DEGENERATE_PHASES: usize = 8;

/// One solved signal point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub gain_db: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Relative power-balance defect.
    pub power_error: f64,
}

fn check_axis(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidSweep(format!("{what} axis is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSweep(format!(
            "{what} axis has non-finite values"
        )));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSweep(format!(
            "{what} axis must be strictly increasing"
        )));
    }
    Ok(())
}

fn wave_port(solver: &Solver, port: usize) -> Result<f64> {
    match solver.matrix().kinds().get(port) {
        Some(PortKind::Wave { impedance }) => Ok(*impedance),
        _ => Err(Error::InvalidSweep(format!(
            "port {port} is not a wave port"
        ))),
    }
}

/// Pump-only steady state, used to seed signal solves.
pub fn pump_state(solver: &Solver, bias: &BiasPoint) -> Result<SolutionState> {
    solver.solve(bias, &Stimulus::none(), None)
}

fn solve_point(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    f_s: f64,
    p_in: f64,
    phase: f64,
    initial: Option<&[C64]>,
) -> Result<(GainPoint, SolutionState)> {
    let state = solver.solve(bias, &Stimulus::tone(port, f_s, p_in, phase), initial)?;
    let point = GainPoint {
        gain_db: state.gain_db(port, f_s, solver.grid())?,
        converged: state.converged,
        iterations: state.iterations,
        power_error: state
            .power_balance(solver.matrix().kinds())
            .relative_error(),
    };
    Ok((point, state))
}

pub fn is_degenerate(solver: &Solver, bias: &BiasPoint, f_s: f64) -> bool {
    let g = solver.grid();
    match (g.bin(f_s), g.bin(bias.f_dc)) {
        (Some(s), Some(d)) => 2 * s == d,
        _ => false,
    }
}

/// Gain at the degenerate point over [`DEGENERATE_PHASES`] stimulus phases:
/// phase-averaged power gain plus the min/max envelope [dB].
fn degenerate_point(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    f_s: f64,
    p_in: f64,
    initial: Option<&[C64]>,
) -> Result<(GainPoint, (f64, f64))> {
    let mut lin = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut agg = GainPoint {
        gain_db: 0.0,
        converged: true,
        iterations: 0,
        power_error: 0.0,
    };
    for m in 0..DEGENERATE_PHASES {
        let phase = TAU * m as f64 / DEGENERATE_PHASES as f64;
        let (p, _) = solve_point(solver, bias, port, f_s, p_in, phase, initial)?;
        lin += 10f64.powf(p.gain_db / 10.0);
        lo = lo.min(p.gain_db);
        hi = hi.max(p.gain_db);
        agg.converged &= p.converged;
        agg.iterations += p.iterations;
        agg.power_error = agg.power_error.max(p.power_error);
    }
    agg.gain_db = 10.0 * (lin / DEGENERATE_PHASES as f64).log10();
    Ok((agg, (lo, hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainProfile {
    pub bias: BiasPoint,
    pub power_dbm: f64,
    pub frequencies: Vec<f64>,
    pub points: Vec<GainPoint>,
    /// Min/max over stimulus phase where the point is degenerate.
    pub envelope: Vec<Option<(f64, f64)>>,
}

impl GainProfile {
    pub fn gains_db(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gain_db).collect()
    }

    /// Gains with degenerate and unconverged points bridged linearly from
    /// their nearest usable neighbours.
    pub fn smooth_gains_db(&self) -> Result<Vec<f64>> {
        let usable: Vec<usize> = (0..self.points.len())
            .filter(|&i| self.envelope[i].is_none() && self.points[i].converged)
            .collect();
        if usable.len() < 2 {
            return Err(Error::InvalidSweep(
                "profile has fewer than two usable points".into(),
            ));
        }
        let f = &self.frequencies;
        Ok((0..self.points.len())
            .map(|i| {
                let hi = usable
                    .partition_point(|&u| u < i)
                    .min(usable.len() - 1)
                    .max(1);
                let (a, b) = (usable[hi - 1], usable[hi]);
                if a == i || b == i {
                    return self.points[i].gain_db;
                }
                let (ga, gb) = (self.points[a].gain_db, self.points[b].gain_db);
                ga + (gb - ga) * (f[i] - f[a]) / (f[b] - f[a])
            })
            .collect())
    }

    /// Dominant ripple period of [`GainProfile::smooth_gains_db`].
    pub fn ripple_period(&self, min_period: f64, max_period: f64) -> Result<f64> {
        ripple_period(
            &self.frequencies,
            &self.smooth_gains_db()?,
            min_period,
            max_period,
        )
    }
}

/// Longest contiguous run of converged points at or above a gain threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandMetrics {
    pub threshold_db: f64,
    pub start: f64,
    pub stop: f64,
    pub bandwidth: f64,
    pub average_gain_db: f64,
    pub points: usize,
}

/// Gain versus signal frequency at a fixed bias; degenerate points are
/// reported as phase averages with their envelope.
pub fn gain_profile(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    frequencies: &[f64],
    p_in: f64,
    phase: f64,
) -> Result<GainProfile> {
    check_axis(frequencies, "signal frequency")?;
    wave_port(solver, port)?;
    let pump = pump_state(solver, bias)?;
    let seed = pump.converged.then_some(pump.current.as_slice());
    let results = frequencies
        .par_iter()
        .map(|&f| {
            if is_degenerate(solver, bias, f) {
                degenerate_point(solver, bias, port, f, p_in, seed).map(|(p, e)| (p, Some(e)))
            } else {
                solve_point(solver, bias, port, f, p_in, phase, seed).map(|(p, _)| (p, None))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (points, envelope) = results.into_iter().unzip();
    Ok(GainProfile {
        bias: *bias,
        power_dbm: p_in,
        frequencies: frequencies.to_vec(),
        points,
        envelope,
    })
}

pub fn band_metrics(profile: &GainProfile, threshold_db: f64) -> Option<BandMetrics> {
    let ok: Vec<bool> = profile
        .points
        .iter()
        .map(|p| p.converged && p.gain_db >= threshold_db)
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < ok.len() {
        if !ok[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < ok.len() && ok[i] {
            i += 1;
        }
        let width = profile.frequencies[i - 1] - profile.frequencies[start];
        let better = match best {
            None => true,
            Some((a, b)) => width > profile.frequencies[b] - profile.frequencies[a],
        };
        if better {
            best = Some((start, i - 1));
        }
    }
    let (a, b) = best?;
    let span = &profile.points[a..=b];
    Some(BandMetrics {
        threshold_db,
        start: profile.frequencies[a],
        stop: profile.frequencies[b],
        bandwidth: profile.frequencies[b] - profile.frequencies[a],
        average_gain_db: span.iter().map(|p| p.gain_db).sum::<f64>() / span.len() as f64,
        points: span.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionCurve {
    pub frequency: f64,
    pub phase: f64,
    pub bias: Option<BiasPoint>,
    pub powers_dbm: Vec<f64>,
    pub gains_db: Vec<f64>,
    pub converged: Vec<bool>,
    pub power_error: Vec<f64>,
}

impl CompressionCurve {
    /// Curve from externally supplied data, all points marked converged.
    pub fn from_points(frequency: f64, powers_dbm: Vec<f64>, gains_db: Vec<f64>) -> Self {
        let n = powers_dbm.len();
        CompressionCurve {
            frequency,
            phase: 0.0,
            bias: None,
            powers_dbm,
            gains_db,
            converged: vec![true; n],
            power_error: vec![0.0; n],
        }
    }
}

/// Gain versus input power at one signal frequency, warm-started along
/// ascending power.
pub fn compression_sweep(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    f_s: f64,
    powers_dbm: &[f64],
    phase: f64,
) -> Result<CompressionCurve> {
    let pump = pump_state(solver, bias)?;
    compression_chain(solver, bias, port, f_s, powers_dbm, phase, &pump)
}

fn compression_chain(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    f_s: f64,
    powers_dbm: &[f64],
    phase: f64,
    pump: &SolutionState,
) -> Result<CompressionCurve> {
    check_axis(powers_dbm, "input power")?;
    wave_port(solver, port)?;
    let mut seed: Option<Vec<C64>> = pump.converged.then(|| pump.current.clone());
    let mut curve = CompressionCurve {
        frequency: f_s,
        phase,
        bias: Some(*bias),
        powers_dbm: powers_dbm.to_vec(),
        gains_db: Vec::with_capacity(powers_dbm.len()),
        converged: Vec::with_capacity(powers_dbm.len()),
        power_error: Vec::with_capacity(powers_dbm.len()),
    };
    for &p in powers_dbm {
        let (point, state) = solve_point(solver, bias, port, f_s, p, phase, seed.as_deref())?;
        curve.gains_db.push(point.gain_db);
        curve.converged.push(point.converged);
        curve.power_error.push(point.power_error);
        if state.converged {
            seed = Some(state.current);
        }
    }
    Ok(curve)
}

/// Compression curves for several signal frequencies, chains in parallel.
pub fn compression_set(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    frequencies: &[f64],
    powers_dbm: &[f64],
    phase: f64,
) -> Result<Vec<CompressionCurve>> {
    check_axis(frequencies, "signal frequency")?;
    let pump = pump_state(solver, bias)?;
    frequencies
        .par_iter()
        .map(|&f| compression_chain(solver, bias, port, f, powers_dbm, phase, &pump))
        .collect()
}

/// Min/max gain [dB] per point across signal phases.
pub type Envelope = Vec<(f64, f64)>;

/// Compression at the degenerate point for [`DEGENERATE_PHASES`] phases;
/// returns the per-phase curves and the min/max envelope per power.
pub fn degenerate_compression(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    powers_dbm: &[f64],
) -> Result<(Vec<CompressionCurve>, Envelope)> {
    let f_s = bias.f_dc / 2.0;
    let pump = pump_state(solver, bias)?;
    let curves = (0..DEGENERATE_PHASES)
        .into_par_iter()
        .map(|m| {
            let phase = TAU * m as f64 / DEGENERATE_PHASES as f64;
            compression_chain(solver, bias, port, f_s, powers_dbm, phase, &pump)
        })
        .collect::<Result<Vec<_>>>()?;
    let envelope = (0..powers_dbm.len())
        .map(|i| {
            curves
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c.gains_db[i]), hi.max(c.gains_db[i]))
                })
        })
        .collect();
    Ok((curves, envelope))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapAxis {
    JosephsonFrequency,
    CriticalCurrent,
    InputPower,
}

impl MapAxis {
    pub fn column(self) -> &'static str {
        match self {
            MapAxis::JosephsonFrequency => "f_dc_hz",
            MapAxis::CriticalCurrent => "ic_a",
            MapAxis::InputPower => "power_dbm",
        }
    }
}

/// Gain over signal frequency (x) and one bias or drive parameter (y).
/// Values are row-major with one row per y value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMap {
    pub y_axis: MapAxis,
    pub signal: Vec<f64>,
    pub y: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub converged: Vec<bool>,
    pub power_error: Vec<f64>,
}

impl GainMap {
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.signal.len() + col
    }

    pub fn gain(&self, row: usize, col: usize) -> f64 {
        self.gain_db[self.index(row, col)]
    }

    pub fn masked(&self, row: usize, col: usize) -> bool {
        !self.converged[self.index(row, col)]
    }

    fn from_rows(y_axis: MapAxis, signal: &[f64], y: &[f64], rows: Vec<Vec<GainPoint>>) -> Self {
        let cells: Vec<GainPoint> = rows.into_iter().flatten().collect();
        GainMap {
            y_axis,
            signal: signal.to_vec(),
            y: y.to_vec(),
            gain_db: cells.iter().map(|c| c.gain_db).collect(),
            converged: cells.iter().map(|c| c.converged).collect(),
            power_error: cells.iter().map(|c| c.power_error).collect(),
        }
    }
}

/// One map row at a fixed bias, warm-started along the signal axis.
fn signal_row(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    signal: &[f64],
    p_in: f64,
    phase: f64,
) -> Result<Vec<GainPoint>> {
    let pump = pump_state(solver, bias)?;
    let base = pump.converged.then(|| pump.current.clone());
    let mut seed = base.clone();
    let mut row = Vec::with_capacity(signal.len());
    for &f in signal {
        let (point, state) = solve_point(solver, bias, port, f, p_in, phase, seed.as_deref())?;
        seed = if state.converged {
            Some(state.current)
        } else {
            base.clone()
        };
        row.push(point);
    }
    Ok(row)
}

/// Gain map over signal frequency and Josephson frequency; rows in parallel.
pub fn gain_map_fdc(
    solver: &Solver,
    port: usize,
    signal: &[f64],
    f_dc: &[f64],
    ic: f64,
    p_in: f64,
    phase: f64,
) -> Result<GainMap> {
    check_axis(signal, "signal frequency")?;
    check_axis(f_dc, "f_dc")?;
    wave_port(solver, port)?;
    let biases = f_dc
        .iter()
        .map(|&f| solver.bias(f, ic, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let rows = biases
        .par_iter()
        .map(|b| signal_row(solver, b, port, signal, p_in, phase))
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = biases.iter().map(|b| b.f_dc).collect();
    Ok(GainMap::from_rows(
        MapAxis::JosephsonFrequency,
        signal,
        &y,
        rows,
    ))
}

/// Gain map over signal frequency and critical current; rows in parallel.
pub fn gain_map_ic(
    solver: &Solver,
    port: usize,
    signal: &[f64],
    ic: &[f64],
    f_dc: f64,
    p_in: f64,
    phase: f64,
) -> Result<GainMap> {
    check_axis(signal, "signal frequency")?;
    check_axis(ic, "critical current")?;
    wave_port(solver, port)?;
    let biases = ic
        .iter()
        .map(|&i| solver.bias(f_dc, i, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let rows = biases
        .par_iter()
        .map(|b| signal_row(solver, b, port, signal, p_in, phase))
        .collect::<Result<Vec<_>>>()?;
    Ok(GainMap::from_rows(
        MapAxis::CriticalCurrent,
        signal,
        ic,
        rows,
    ))
}

/// Gain map over signal frequency and input power, warm-started along
/// ascending power per frequency.
pub fn gain_map_power(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    signal: &[f64],
    powers_dbm: &[f64],
    phase: f64,
) -> Result<GainMap> {
    let curves = compression_set(solver, bias, port, signal, powers_dbm, phase)?;
    let rows = (0..powers_dbm.len())
        .map(|i| {
            curves
                .iter()
                .map(|c| GainPoint {
                    gain_db: c.gains_db[i],
                    converged: c.converged[i],
                    iterations: 0,
                    power_error: c.power_error[i],
                })
                .collect()
        })
        .collect();
    Ok(GainMap::from_rows(
        MapAxis::InputPower,
        signal,
        powers_dbm,
        rows,
    ))
}

/// Power leaving a wave port within a band around the Josephson frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub f_dc: f64,
    pub ic: f64,
    pub power_w: f64,
    pub power_dbm: f64,
    pub photon_rate: f64,
    pub converged: bool,
}

pub fn pump_emission(
    solver: &Solver,
    bias: &BiasPoint,
    port: usize,
    bandwidth: f64,
) -> Result<Emission> {
    let z = wave_port(solver, port)?;
    if !(bandwidth.is_finite() && bandwidth >= 0.0) {
        return Err(Error::InvalidSweep(
            "emission bandwidth must be >= 0".into(),
        ));
    }
    let state = pump_state(solver, bias)?;
    let g = solver.grid();
    let power_w: f64 = (1..g.points())
        .filter(|&k| (g.frequency(k) - bias.f_dc).abs() <= bandwidth / 2.0 + 1e-9 * g.spacing())
        .map(|k| state.outgoing_power(port, k, z))
        .sum();
    Ok(Emission {
        f_dc: bias.f_dc,
        ic: bias.ic,
        power_w,
        power_dbm: watts_to_dbm(power_w),
        photon_rate: photon_rate(power_w, bias.f_dc),
        converged: state.converged,
    })
}

/// Emission at a fixed Josephson frequency for each critical current.
pub fn emission_vs_ic(
    solver: &Solver,
    port: usize,
    f_dc: f64,
    ic: &[f64],
    bandwidth: f64,
) -> Result<Vec<Emission>> {
    check_axis(ic, "critical current")?;
    ic.par_iter()
        .map(|&i| pump_emission(solver, &solver.bias(f_dc, i, 0.0)?, port, bandwidth))
        .collect()
}
