//! Fixed-point harmonic balance of the junction against its linear embedding.
//!
//! Each iteration forms the junction voltage from the external drive and the
//! previous junction current, integrates it to the phase, and evaluates the
//! Josephson current `I_c sin φ` in the time domain:
//!
//! ```text
//! V_n(ω) = Σ_i F_Ji(ω) a_in_i(ω) + F_JJ(ω) I_{n−1}(ω)
//! φ_n(t) = 2π f_dc t + φ₀ + F⁻¹{ (2e/ħ) V_n(ω) / (jω) }     ω ≠ 0
//! I_n(t) = I_c sin φ_n(t)
//! ```
//!
//! The DC junction voltage is the stiff bias and enters only through the
//! ramp. Outgoing port quantities are `a_out_i = Σ_j F_ij a_in_j + F_iJ I_J`.

mod spectral;

pub use spectral::SpectralEngine;

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{FrequencyGrid, Netlist};
use crate::frankenstein::{self, FrankensteinMatrix, JunctionRow, PortKind};
use crate::units::{dbm_to_watts, josephson_voltage, wave_amplitude};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    /// Josephson frequency [Hz].
    pub f_dc: f64,
    /// Effective critical current [A].
    pub ic: f64,
    /// Phase reference [rad].
    pub phi0: f64,
}

impl BiasPoint {
    /// Validated bias with `f_dc` rounded onto `grid`.
    pub fn on_grid(f_dc: f64, ic: f64, phi0: f64, grid: &FrequencyGrid) -> Result<Self> {
        if !(ic.is_finite() && ic >= 0.0) {
            return Err(Error::InvalidBias(format!(
                "critical current must be >= 0, got {ic}"
            )));
        }
        if !phi0.is_finite() {
            return Err(Error::InvalidBias(format!(
                "phase reference must be finite, got {phi0}"
            )));
        }
        Ok(BiasPoint {
            f_dc: round_bias(f_dc, grid)?,
            ic,
            phi0: phi0.rem_euclid(TAU),
        })
    }

    /// DC bias voltage `h f_dc / 2e` [V].
    pub fn voltage(&self) -> f64 {
        josephson_voltage(self.f_dc)
    }
}

/// Nearest multiple of the grid spacing, refusing values that round to zero
/// or whose second harmonic leaves the grid.
pub fn round_bias(f_dc: f64, grid: &FrequencyGrid) -> Result<f64> {
    if !(f_dc.is_finite() && f_dc > 0.0) {
        return Err(Error::InvalidBias(format!(
            "f_dc must be positive, got {f_dc}"
        )));
    }
    let k = (f_dc / grid.spacing()).round();
    if k == 0.0 {
        return Err(Error::InvalidBias(format!(
            "f_dc = {f_dc} Hz is below the grid spacing {} Hz",
            grid.spacing()
        )));
    }
    let rounded = k * grid.spacing();
    if !grid.covers_bias(rounded) {
        return Err(Error::InvalidBias(format!(
            "2 f_dc = {} Hz exceeds f_max = {} Hz",
            2.0 * rounded,
            grid.f_max()
        )));
    }
    Ok(rounded)
}

/// Incident tone at one wave port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub port: usize,
    pub frequency: f64,
    pub power_dbm: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub tones: Vec<Tone>,
}

impl Stimulus {
    pub fn none() -> Self {
        Stimulus::default()
    }

    pub fn tone(port: usize, frequency: f64, power_dbm: f64, phase: f64) -> Self {
        Stimulus {
            tones: vec![Tone {
                port,
                frequency,
                power_dbm,
                phase,
            }],
        }
    }

    /// Incident amplitudes per (port, bin), tones sharing a bin summed.
    pub fn resolve(&self, kinds: &[PortKind], grid: &FrequencyGrid) -> Result<Vec<Drive>> {
        let mut out: Vec<Drive> = Vec::new();
        for t in &self.tones {
            let Some(kind) = kinds.get(t.port) else {
                return Err(Error::InvalidStimulus(format!(
                    "no port with index {}",
                    t.port
                )));
            };
            let PortKind::Wave { impedance } = *kind else {
                return Err(Error::InvalidStimulus(format!(
                    "port {} is not a wave port",
                    t.port
                )));
            };
            if !(t.power_dbm.is_finite() && t.phase.is_finite()) {
                return Err(Error::InvalidStimulus("non-finite power or phase".into()));
            }
            let bin = grid
                .bin(t.frequency)
                .filter(|&k| k > 0 && t.frequency > 0.0);
            let Some(bin) = bin else {
                return Err(Error::InvalidStimulus(format!(
                    "tone at {} Hz outside (0, {}) Hz",
                    t.frequency,
                    grid.f_max()
                )));
            };
            let a = C64::from_polar(
                wave_amplitude(dbm_to_watts(t.power_dbm), impedance),
                t.phase,
            );
            match out.iter_mut().find(|d| d.port == t.port && d.bin == bin) {
                Some(d) => d.amplitude += a,
                None => out.push(Drive {
                    port: t.port,
                    bin,
                    amplitude: a,
                }),
            }
        }
        Ok(out)
    }
}

/// Resolved incident wave on one grid bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub port: usize,
    pub bin: usize,
    pub amplitude: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub spacing: f64,
    pub points: usize,
    /// Residual tolerance as a fraction of `I_c`.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Under-relaxation weight of the new iterate.
    pub relaxation: f64,
    pub zero_pad: usize,
    /// Reference impedance of the intermediate scattering matrix [Ω].
    pub reference_impedance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let g = FrequencyGrid::default_solver();
        SolverSettings {
            spacing: g.spacing(),
            points: g.points(),
            tolerance: 1e-12,
            max_iter: 10_000,
            relaxation: 1.0,
            zero_pad: 4,
            reference_impedance: 50.0,
        }
    }
}

impl SolverSettings {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.spacing, self.points)
    }

    pub fn with_grid(self, grid: FrequencyGrid) -> Self {
        SolverSettings {
            spacing: grid.spacing(),
            points: grid.points(),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        let bad = |what: &str| Err(Error::Config(format!("solver: {what}")));
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return bad("relaxation must lie in (0, 1]");
        }
        if self.zero_pad == 0 {
            return bad("zero_pad must be at least 1");
        }
        if !(self.reference_impedance.is_finite() && self.reference_impedance > 0.0) {
            return bad("reference_impedance must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolutionState {
    pub bias: BiasPoint,
    /// Junction current `I_J(ω)` [A], current injected into the circuit.
    pub current: Vec<C64>,
    /// Junction voltage `V_J(ω)` [V]; the DC bin is the bias voltage.
    pub voltage: Vec<C64>,
    /// Outgoing quantity per port per bin (see [`frankenstein`]).
    pub outgoing: Vec<Vec<C64>>,
    pub incoming: Vec<Drive>,
    pub iterations: usize,
    pub converged: bool,
    /// Last iteration delta `max_ω |I_n − I_{n−1}|` as a fraction of `I_c`.
    pub residual: f64,
}

/// Per-iteration view handed to an observer.
pub struct IterationView<'a> {
    pub iteration: usize,
    /// `I_c sin φ(t)` samples over one period.
    pub current_samples: &'a [f64],
    /// Candidate spectrum computed from these samples.
    pub current: &'a [C64],
    pub residual: f64,
}

/// Fixed-point iteration on one junction row. `initial` defaults to zero.
pub fn iterate(
    row: &JunctionRow,
    engine: &SpectralEngine,
    bias: &BiasPoint,
    drives: &[Drive],
    settings: &SolverSettings,
    initial: Option<&[C64]>,
) -> Result<(Vec<C64>, usize, bool, f64)> {
    iterate_observed(row, engine, bias, drives, settings, initial, None)
}

/// Iterations without a new best residual before the relaxation is halved.
const STALL_WINDOW: usize = 40;
const MIN_RELAXATION: f64 = 1.0 / 64.0;

/// [`iterate`] with an optional per-iteration observer. When the residual
/// stops improving the relaxation is halved, down to 1/64.
#[allow(clippy::too_many_arguments)]
pub fn iterate_observed(
    row: &JunctionRow,
    engine: &SpectralEngine,
    bias: &BiasPoint,
    drives: &[Drive],
    settings: &SolverSettings,
    initial: Option<&[C64]>,
    mut observer: Option<&mut dyn FnMut(&IterationView)>,
) -> Result<(Vec<C64>, usize, bool, f64)> {
    let n = engine.grid().points();
    check_alignment(row, engine, bias)?;
    if let Some(d) = drives.iter().find(|d| d.bin == 0 || d.bin >= n) {
        return Err(Error::GridMismatch(format!(
            "drive bin {} off the grid",
            d.bin
        )));
    }

    let mut external = vec![ZERO; n];
    for d in drives {
        external[d.bin] += row.from_port[d.port][d.bin] * d.amplitude;
    }

    let mut current = match initial {
        Some(init) if init.len() == n => init.to_vec(),
        Some(init) => {
            return Err(Error::GridMismatch(format!(
                "initial spectrum has {} bins, grid has {n}",
                init.len()
            )))
        }
        None => vec![ZERO; n],
    };
    let ic = bias.ic;
    let mut alpha = settings.relaxation;
    let mut last_gain = 0;
    let limit = settings.tolerance * ic;
    let mut ws = engine.workspace();
    let mut voltage = vec![ZERO; n];
    let mut candidate = vec![ZERO; n];
    let mut best: Option<(Vec<C64>, f64)> = None;
    let mut delta = f64::INFINITY;

    for iteration in 1..=settings.max_iter {
        for k in 1..n {
            voltage[k] = external[k] + row.self_impedance[k] * current[k];
        }
        engine.phase_into(&voltage, bias, &mut ws);
        for x in ws.time.iter_mut() {
            *x = ic * x.sin();
        }
        let samples_view = observer.is_some().then(|| ws.time.clone());
        engine.analyze_into(&mut ws, &mut candidate);

        delta = 0.0;
        let mut finite = true;
        for k in 0..n {
            let d = (candidate[k] - current[k]).norm();
            finite &= d.is_finite();
            delta = f64::max(delta, d);
        }
        if !finite {
            return Err(Error::Diverged { iteration });
        }
        if let (Some(obs), Some(samples)) = (observer.as_mut(), samples_view.as_deref()) {
            obs(&IterationView {
                iteration,
                current_samples: samples,
                current: &candidate,
                residual: delta,
            });
        }
        for k in 0..n {
            current[k] = if alpha == 1.0 {
                candidate[k]
            } else {
                current[k] * (1.0 - alpha) + candidate[k] * alpha
            };
        }
        if delta < limit || delta == 0.0 {
            let r = if ic > 0.0 { delta / ic } else { 0.0 };
            return Ok((current, iteration, true, r));
        }
        if best.as_ref().is_none_or(|(_, r)| delta < *r) {
            best = Some((current.clone(), delta));
            last_gain = iteration;
        } else if iteration - last_gain >= STALL_WINDOW && alpha > MIN_RELAXATION {
            // a marginal mode stalls the plain iteration: damp and restart
            // from the best state seen so far
            alpha = (alpha * 0.5).max(MIN_RELAXATION);
            last_gain = iteration;
            if let Some((state, _)) = &best {
                current.copy_from_slice(state);
            }
        }
    }
    let (state, r) = best.unwrap_or((current, delta));
    let r = if ic > 0.0 { r / ic } else { 0.0 };
    Ok((state, settings.max_iter, false, r))
}

fn check_alignment(row: &JunctionRow, engine: &SpectralEngine, bias: &BiasPoint) -> Result<()> {
    let grid = engine.grid();
    if row.points != grid.points() || row.grid.is_some_and(|g| g != *grid) {
        return Err(Error::GridMismatch(format!(
            "response sampled on {} points, solver grid has {}",
            row.points,
            grid.points()
        )));
    }
    let k = bias.f_dc / grid.spacing();
    if (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() == 0.0 {
        return Err(Error::GridMismatch(format!(
            "f_dc = {} Hz is not a multiple of {} Hz",
            bias.f_dc,
            grid.spacing()
        )));
    }
    if !grid.covers_bias(bias.f_dc) {
        return Err(Error::InvalidBias(format!(
            "2 f_dc = {} Hz exceeds f_max = {} Hz",
            2.0 * bias.f_dc,
            grid.f_max()
        )));
    }
    Ok(())
}

/// Outgoing quantities at every port: `a_out_i = Σ_{j≠J} F_ij a_in_j + F_iJ I_J`.
/// The voltage-bias port is driven by the bias voltage at DC.
pub fn outputs(
    fm: &FrankensteinMatrix,
    row: &JunctionRow,
    bias: &BiasPoint,
    drives: &[Drive],
    current: &[C64],
) -> Vec<Vec<C64>> {
    let np = fm.kinds().len();
    let mut out: Vec<Vec<C64>> = (0..np)
        .map(|i| {
            row.to_port[i]
                .iter()
                .zip(current)
                .map(|(f, c)| f * c)
                .collect()
        })
        .collect();
    for d in drives {
        let f = fm.at(d.bin);
        for (i, o) in out.iter_mut().enumerate() {
            o[d.bin] += f[(i, d.port)] * d.amplitude;
        }
    }
    let f0 = fm.at(0);
    for (j, kind) in fm.kinds().iter().enumerate() {
        if *kind == PortKind::VoltageBias {
            for (i, o) in out.iter_mut().enumerate() {
                o[0] += f0[(i, j)] * bias.voltage();
            }
        }
    }
    out
}

/// Netlist sampled and ready to solve repeatedly. Clones share the solve
/// counter.
#[derive(Debug, Clone)]
pub struct Solver {
    matrix: FrankensteinMatrix,
    row: JunctionRow,
    engine: SpectralEngine,
    settings: SolverSettings,
    solves: Arc<AtomicUsize>,
}

impl Solver {
    pub fn new(net: &Netlist, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        net.junction_port()?;
        let grid = settings.grid()?;
        let matrix = frankenstein::sample(net, &grid, settings.reference_impedance)?;
        Self::from_matrix(matrix, settings)
    }

    pub fn from_matrix(matrix: FrankensteinMatrix, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        let grid = settings.grid()?;
        let row = matrix.junction_row()?;
        if row.points != grid.points() || matrix.grid().is_some_and(|g| *g != grid) {
            return Err(Error::GridMismatch(
                "response matrix sampled on a different grid".into(),
            ));
        }
        Ok(Solver {
            matrix,
            row,
            engine: SpectralEngine::new(grid, settings.zero_pad),
            settings,
            solves: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.engine.grid()
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn matrix(&self) -> &FrankensteinMatrix {
        &self.matrix
    }

    pub fn row(&self) -> &JunctionRow {
        &self.row
    }

    pub fn engine(&self) -> &SpectralEngine {
        &self.engine
    }

    /// Number of solves started so far.
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn bias(&self, f_dc: f64, ic: f64, phi0: f64) -> Result<BiasPoint> {
        BiasPoint::on_grid(f_dc, ic, phi0, self.grid())
    }

    pub fn solve(
        &self,
        bias: &BiasPoint,
        stimulus: &Stimulus,
        initial: Option<&[C64]>,
    ) -> Result<SolutionState> {
        self.solve_observed(bias, stimulus, initial, None)
    }

    pub fn solve_observed(
        &self,
        bias: &BiasPoint,
        stimulus: &Stimulus,
        initial: Option<&[C64]>,
        observer: Option<&mut dyn FnMut(&IterationView)>,
    ) -> Result<SolutionState> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        let drives = stimulus.resolve(self.matrix.kinds(), self.grid())?;
        let (current, iterations, converged, residual) = iterate_observed(
            &self.row,
            &self.engine,
            bias,
            &drives,
            &self.settings,
            initial,
            observer,
        )?;
        let n = current.len();
        let mut voltage = vec![ZERO; n];
        for d in &drives {
            voltage[d.bin] += self.row.from_port[d.port][d.bin] * d.amplitude;
        }
        for k in 1..n {
            voltage[k] += self.row.self_impedance[k] * current[k];
        }
        voltage[0] = C64::new(bias.voltage(), 0.0);
        let outgoing = outputs(&self.matrix, &self.row, bias, &drives, &current);
        Ok(SolutionState {
            bias: *bias,
            current,
            voltage,
            outgoing,
            incoming: drives,
            iterations,
            converged,
            residual,
        })
    }
}

impl SolutionState {
    fn incident(&self, port: usize, bin: usize) -> Option<C64> {
        self.incoming
            .iter()
            .find(|d| d.port == port && d.bin == bin)
            .map(|d| d.amplitude)
    }

    /// `20 log₁₀ |a_out / a_in|` at the bin of `frequency` on `port`.
    pub fn gain_db(&self, port: usize, frequency: f64, grid: &FrequencyGrid) -> Result<f64> {
        let no_tone = || Error::NoTone {
            port: port.to_string(),
            frequency,
        };
        let bin = grid.bin(frequency).ok_or_else(no_tone)?;
        let a_in = self.incident(port, bin).ok_or_else(no_tone)?;
        Ok(20.0 * (self.outgoing[port][bin].norm() / a_in.norm()).log10())
    }

    /// Outgoing power at one bin of a wave port [W].
    pub fn outgoing_power(&self, port: usize, bin: usize, impedance: f64) -> f64 {
        bin_power(self.outgoing[port][bin], bin, impedance)
    }

    pub fn power_balance(&self, kinds: &[PortKind]) -> PowerBalance {
        let mut wave_out = 0.0;
        let mut wave_in = 0.0;
        let mut dc_supplied = 0.0;
        for (i, kind) in kinds.iter().enumerate() {
            match *kind {
                PortKind::Wave { impedance } => {
                    wave_out += self.outgoing[i]
                        .iter()
                        .enumerate()
                        .map(|(k, a)| bin_power(*a, k, impedance))
                        .sum::<f64>();
                    wave_in += self
                        .incoming
                        .iter()
                        .filter(|d| d.port == i)
                        .map(|d| bin_power(d.amplitude, d.bin, impedance))
                        .sum::<f64>();
                }
                PortKind::VoltageBias => {
                    dc_supplied += self.bias.voltage() * self.outgoing[i][0].re
                }
                PortKind::CurrentBias => {}
            }
        }
        PowerBalance {
            wave_out,
            wave_in,
            dc_supplied,
        }
    }
}

fn bin_power(a: C64, bin: usize, impedance: f64) -> f64 {
    if bin == 0 {
        a.re * a.re / impedance
    } else {
        a.norm_sqr() / (2.0 * impedance)
    }
}

/// Power bookkeeping of a solved state [W].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBalance {
    pub wave_out: f64,
    pub wave_in: f64,
    /// `V_dc · I_DC` delivered by the bias source.
    pub dc_supplied: f64,
}

impl PowerBalance {
    /// `|(P_out − P_in) − P_dc|` relative to the larger side; zero when both vanish.
    pub fn relative_error(&self) -> f64 {
        let net = self.wave_out - self.wave_in;
        let scale = net.abs().max(self.dc_supplied.abs());
        if scale == 0.0 {
            0.0
        } else {
            (net - self.dc_supplied).abs() / scale
        }
    }
}
