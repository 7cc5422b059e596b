//! One-sided spectra on the solver grid and their real time-domain samples.
//!
//! A spectrum holds peak phasors `A_k` for `k = 0..N`, meaning
//! `x(t) = A_0 + Σ_{k≥1} Re(A_k e^{jω_k t})`. Time signals are sampled at
//! `M = 2·N·pad` points over one period `1/Δf`; bins `N..M/2` are the zero
//! padding.

use std::f64::consts::TAU;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::circuit::FrequencyGrid;
use crate::solver::BiasPoint;
use crate::units::JOSEPHSON_RATE;
use crate::C64;

#[derive(Clone)]
pub struct SpectralEngine {
    grid: FrequencyGrid,
    samples: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for SpectralEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralEngine")
            .field("grid", &self.grid)
            .field("samples", &self.samples)
            .finish()
    }
}

/// Reusable buffers for one sequential solve.
pub(crate) struct Workspace {
    pub(crate) half: Vec<C64>,
    pub(crate) time: Vec<f64>,
    scratch_fwd: Vec<C64>,
    scratch_inv: Vec<C64>,
}

impl SpectralEngine {
    pub fn new(grid: FrequencyGrid, zero_pad: usize) -> Self {
        let samples = 2 * grid.points() * zero_pad.max(1);
        let mut planner = RealFftPlanner::<f64>::new();
        SpectralEngine {
            grid,
            samples,
            forward: planner.plan_fft_forward(samples),
            inverse: planner.plan_fft_inverse(samples),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Time samples per period.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace {
            half: self.inverse.make_input_vec(),
            time: self.inverse.make_output_vec(),
            scratch_fwd: self.forward.make_scratch_vec(),
            scratch_inv: self.inverse.make_scratch_vec(),
        }
    }

    /// Real samples of a one-sided spectrum, written to `ws.time`.
    pub(crate) fn synthesize_into(&self, spectrum: &[C64], ws: &mut Workspace) {
        let n = self.grid.points();
        debug_assert_eq!(spectrum.len(), n);
        ws.half.fill(C64::new(0.0, 0.0));
        ws.half[0] = C64::new(spectrum[0].re, 0.0);
        for (h, s) in ws.half[1..n].iter_mut().zip(&spectrum[1..]) {
            *h = s * 0.5;
        }
        self.inverse
            .process_with_scratch(&mut ws.half, &mut ws.time, &mut ws.scratch_inv)
            .expect("buffer sizes come from the plan");
    }

    /// One-sided spectrum of the samples in `ws.time` (consumed), truncated to
    /// the grid.
    pub(crate) fn analyze_into(&self, ws: &mut Workspace, out: &mut [C64]) {
        self.forward
            .process_with_scratch(&mut ws.time, &mut ws.half, &mut ws.scratch_fwd)
            .expect("buffer sizes come from the plan");
        let scale = 2.0 / self.samples as f64;
        out[0] = C64::new(ws.half[0].re / self.samples as f64, 0.0);
        for (o, h) in out.iter_mut().zip(&ws.half).skip(1) {
            *o = h * scale;
        }
    }

    /// Real samples of a one-sided spectrum.
    pub fn synthesize(&self, spectrum: &[C64]) -> Vec<f64> {
        let mut ws = self.workspace();
        self.synthesize_into(spectrum, &mut ws);
        ws.time
    }

    /// One-sided spectrum of real samples, truncated to the grid.
    pub fn analyze(&self, samples: &[f64]) -> Vec<C64> {
        let mut ws = self.workspace();
        ws.time.copy_from_slice(samples);
        let mut out = vec![C64::new(0.0, 0.0); self.grid.points()];
        self.analyze_into(&mut ws, &mut out);
        out
    }

    /// Phase increment per sample of the bias ramp, exact in units of a turn.
    fn ramp(&self, bias: &BiasPoint) -> impl Fn(usize) -> f64 {
        let m = self.samples as u64;
        let k_dc = (bias.f_dc / self.grid.spacing()).round() as u64;
        let phi0 = bias.phi0;
        move |n| ((k_dc * n as u64) % m) as f64 / m as f64 * TAU + phi0
    }

    /// Junction phase `2π f_dc t + φ₀ + φ_AC(t)`, where the AC part integrates
    /// the `k ≥ 1` voltage bins. The DC bin of `voltage` is ignored.
    pub(crate) fn phase_into(&self, voltage: &[C64], bias: &BiasPoint, ws: &mut Workspace) {
        let n = self.grid.points();
        ws.half.fill(C64::new(0.0, 0.0));
        for (k, (h, v)) in ws.half[..n].iter_mut().zip(voltage).enumerate().skip(1) {
            let w = TAU * self.grid.frequency(k);
            // ½ · (2e/ħ) V_k / (jω)
            *h = v * C64::new(0.0, -0.5 * JOSEPHSON_RATE / w);
        }
        self.inverse
            .process_with_scratch(&mut ws.half, &mut ws.time, &mut ws.scratch_inv)
            .expect("buffer sizes come from the plan");
        let ramp = self.ramp(bias);
        for (i, x) in ws.time.iter_mut().enumerate() {
            *x += ramp(i);
        }
    }

    pub fn phase_update(&self, voltage: &[C64], bias: &BiasPoint) -> Vec<f64> {
        let mut ws = self.workspace();
        self.phase_into(voltage, bias, &mut ws);
        ws.time
    }

    /// Junction current samples and their one-sided spectrum.
    pub fn junction_current(&self, phase: &[f64], ic: f64) -> (Vec<f64>, Vec<C64>) {
        let samples: Vec<f64> = phase.iter().map(|p| ic * p.sin()).collect();
        let spectrum = self.analyze(&samples);
        (samples, spectrum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> SpectralEngine {
        SpectralEngine::new(FrequencyGrid::new(1e8, 256).unwrap(), 4)
    }

    fn bias(f_dc: f64, phi0: f64) -> BiasPoint {
        BiasPoint {
            f_dc,
            ic: 1e-7,
            phi0,
        }
    }

    #[test]
    fn synthesis_and_analysis_are_inverse() {
        let e = engine();
        let mut s = vec![C64::new(0.0, 0.0); 256];
        s[0] = C64::new(0.3, 0.0);
        s[7] = C64::new(1.0, -2.0);
        s[255] = C64::new(-0.5, 0.25);
        let x = e.synthesize(&s);
        let t7 = 3.0 / e.samples() as f64;
        let expect = 0.3
            + (s[7] * C64::from_polar(1.0, TAU * 7.0 * t7 * 1.0)).re
            + (s[255] * C64::from_polar(1.0, TAU * 255.0 * t7)).re;
        assert!((x[3] - expect).abs() < 1e-12);
        let back = e.analyze(&x);
        for k in 0..256 {
            assert!((back[k] - s[k]).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn zero_voltage_gives_bare_ramp() {
        let e = engine();
        let b = bias(5e9, 0.7);
        let phi = e.phase_update(&vec![C64::new(0.0, 0.0); 256], &b);
        for (n, p) in phi.iter().enumerate().step_by(97) {
            let t = n as f64 / (e.samples() as f64 * 1e8);
            let expect = (TAU * 5e9 * t + 0.7).rem_euclid(TAU);
            assert!((p.rem_euclid(TAU) - expect).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn cosine_voltage_integrates_to_sine_phase() {
        let e = engine();
        let (v0, f1) = (1e-6, 2.3e9);
        let mut v = vec![C64::new(0.0, 0.0); 256];
        v[23] = C64::new(v0, 0.0);
        let mut phi = e.phase_update(&v, &bias(1e8, 0.0));
        let amp = JOSEPHSON_RATE * v0 / (TAU * f1);
        for (n, p) in phi.iter_mut().enumerate() {
            let t = n as f64 / (e.samples() as f64 * 1e8);
            let expect = TAU * 1e8 * t + amp * (TAU * f1 * t).sin();
            assert!((*p - expect).abs() < 1e-9 * amp.max(1.0), "n={n}");
        }
    }

    #[test]
    fn pure_ramp_current_is_one_line() {
        let e = engine();
        let phi = e.phase_update(&vec![C64::new(0.0, 0.0); 256], &bias(1.2e10, 0.0));
        let (_, s) = e.junction_current(&phi, 2e-7);
        for (k, a) in s.iter().enumerate() {
            let expect = if k == 120 { 2e-7 } else { 0.0 };
            assert!((a.norm() - expect).abs() < 1e-20, "k={k}");
        }
        // sin is the cosine phasor lagging by π/2
        assert!((s[120] - C64::new(0.0, -2e-7)).norm() < 1e-20);
    }

    #[test]
    fn constant_phase_gives_dc_only() {
        let e = engine();
        let (_, s) = e.junction_current(&vec![0.4; e.samples()], 3e-7);
        assert!((s[0].re - 3e-7 * 0.4f64.sin()).abs() < 1e-20);
        assert!(s[1..].iter().all(|a| a.norm() < 1e-20));
    }
}
