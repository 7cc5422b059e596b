//! Rapp AM-AM saturation model and its least-squares fit.
//!
//! `P_out = G₀ P_in / [1 + (G₀ P_in / P_sat)^{2p}]^{1/(2p)}`

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::sweeps::CompressionCurve;
use crate::units::{dbm_to_watts, watts_to_dbm};
use crate::{Error, Result};

const DB: f64 = 10.0 / LN_10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RappFit {
    /// Small-signal power gain (linear).
    pub g0: f64,
    /// Input saturation power [W].
    pub psat: f64,
    /// Knee smoothness.
    pub p: f64,
    /// RMS gain residual [dB].
    pub residual: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl RappFit {
    /// Model gain [dB] at input power `p_in` [W].
    pub fn gain_db(&self, p_in: f64) -> f64 {
        rapp_gain_db(self.g0, self.psat, self.p, p_in)
    }

    /// Input power [dBm] where the model gain is 1 dB below `G₀`:
    /// `(P_sat/G₀)·(10^{0.2p} − 1)^{1/(2p)}`.
    pub fn p1db_dbm(&self) -> f64 {
        let a = 0.2 * self.p * LN_10;
        // ln(10^{0.2p} − 1) without overflow
        let ln_term = a + (-(-a).exp()).ln_1p();
        watts_to_dbm(self.psat / self.g0 * (ln_term / (2.0 * self.p)).exp())
    }
}

pub fn rapp_gain_db(g0: f64, psat: f64, p: f64, p_in: f64) -> f64 {
    let z = 2.0 * p * (g0 * p_in / psat).ln();
    DB * g0.ln() - DB * softplus(z) / (2.0 * p)
}

/// Residuals and Jacobian with respect to `(ln G₀, ln P_sat, ln p)`.
fn model(theta: &[f64; 3], x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let (g0, psat, p) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
    let mut r = Vec::with_capacity(x.len());
    let mut jac = Vec::with_capacity(x.len());
    for (&pin, &g) in x.iter().zip(y) {
        let lnx = (g0 * pin / psat).ln();
        let z = 2.0 * p * lnx;
        let s = sigmoid(z);
        r.push(DB * g0.ln() - DB * softplus(z) / (2.0 * p) - g);
        jac.push([
            DB * (1.0 - s),
            DB * s,
            DB * (softplus(z) / (2.0 * p) - lnx * s),
        ]);
    }
    (r, jac)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_row_slice(&a.concat());
    let x = m.lu().solve(&nalgebra::Vector3::from_row_slice(&b))?;
    Some([x[0], x[1], x[2]])
}

/// Levenberg–Marquardt from one starting point; returns `(θ, SSE)`.
fn levenberg_marquardt(start: [f64; 3], x: &[f64], y: &[f64]) -> Option<([f64; 3], f64)> {
    let mut theta = start;
    let (mut r, mut jac) = model(&theta, x, y);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (ri, ji) in r.iter().zip(&jac) {
            for a in 0..3 {
                jtr[a] += ji[a] * ri;
                for b in 0..3 {
                    jtj[a][b] += ji[a] * ji[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve3(damped, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
            // keep the knee inside a sane range
            trial[2] = trial[2].clamp((0.02f64).ln(), (1e4f64).ln());
            let (tr, tj) = model(&trial, x, y);
            let tc = sum_sq(&tr);
            if tc.is_finite() && tc < cost {
                let rel = (cost - tc) / cost.max(1e-300);
                theta = trial;
                r = tr;
                jac = tj;
                cost = tc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return Some((theta, cost));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    cost.is_finite().then_some((theta, cost))
}

/// Fits the Rapp model to the converged points of `curve`.
pub fn rapp_fit(curve: &CompressionCurve) -> Result<RappFit> {
    let (powers, gains): (Vec<f64>, Vec<f64>) = curve
        .powers_dbm
        .iter()
        .zip(&curve.gains_db)
        .zip(&curve.converged)
        .filter(|(_, ok)| **ok)
        .map(|((p, g), _)| (*p, *g))
        .unzip();
    if powers.len() < 4 {
        return Err(Error::NotFittable(format!(
            "{} converged points, need at least 4",
            powers.len()
        )));
    }
    let finite = gains.iter().all(|g| g.is_finite());
    let max = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = gains.iter().cloned().fold(f64::INFINITY, f64::min);
    if !finite {
        return Err(Error::FitFailed("non-finite gain values".into()));
    }
    if max - min < 1.5 {
        return Err(Error::NotFittable(format!(
            "gain varies by {:.3} dB, need at least 1.5 dB of compression",
            max - min
        )));
    }
    check_monotone(&gains)?;

    let x: Vec<f64> = powers.iter().map(|p| dbm_to_watts(*p)).collect();
    let g_lin = gains[..3.min(gains.len())].iter().sum::<f64>() / 3.0f64.min(gains.len() as f64);
    let g0 = 10f64.powf(g_lin / 10.0);
    // rough 1 dB crossing for the saturation guess
    let cross = gains
        .iter()
        .position(|g| *g <= g_lin - 1.0)
        .map(|i| x[i])
        .unwrap_or(*x.last().unwrap());
    let mut best: Option<([f64; 3], f64)> = None;
    for p0 in [0.3, 0.7, 1.5, 3.0, 8.0, 30.0] {
        for scale in [0.3, 1.0, 3.0] {
            let start = [g0.ln(), (g0 * cross * scale).ln(), f64::ln(p0)];
            if let Some((theta, cost)) = levenberg_marquardt(start, &x, &gains) {
                if best.is_none_or(|(_, c)| cost < c) {
                    best = Some((theta, cost));
                }
            }
        }
    }
    let Some((theta, cost)) = best else {
        return Err(Error::FitFailed("no starting point converged".into()));
    };
    let fit = RappFit {
        g0: theta[0].exp(),
        psat: theta[1].exp(),
        p: theta[2].exp(),
        residual: (cost / x.len() as f64).sqrt(),
    };
    if !(fit.g0.is_finite() && fit.psat.is_finite() && fit.p.is_finite()) {
        return Err(Error::FitFailed("parameters left the finite range".into()));
    }
    if fit.residual > 0.5 {
        return Err(Error::FitFailed(format!(
            "RMS residual {:.3} dB, model does not describe the data",
            fit.residual
        )));
    }
    Ok(fit)
}

/// Rejects curves that rise again by more than noise after compressing,
/// the signature of phase-sensitive or injection-locked operation.
fn check_monotone(gains: &[f64]) -> Result<()> {
    let span = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - gains.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = (0.1 * span).max(0.3);
    let mut running_min = f64::INFINITY;
    for (i, g) in gains.iter().enumerate() {
        if *g > running_min + tol {
            return Err(Error::FitFailed(format!(
                "gain rises by {:.2} dB at point {i} after compressing",
                g - running_min
            )));
        }
        running_min = running_min.min(*g);
    }
    if gains.last() >= gains.first() {
        return Err(Error::FitFailed("gain does not compress with power".into()));
    }
    Ok(())
}

/// Input power [dBm] of the first 1 dB drop below the small-signal gain,
/// linearly interpolated; `None` if the grid never reaches it.
pub fn raw_p1db(curve: &CompressionCurve) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .powers_dbm
        .iter()
        .zip(&curve.gains_db)
        .zip(&curve.converged)
        .filter(|(_, ok)| **ok)
        .map(|((p, g), _)| (*p, *g))
        .collect();
    let n0 = pts.len().min(3);
    if n0 == 0 {
        return None;
    }
    let target = pts[..n0].iter().map(|p| p.1).sum::<f64>() / n0 as f64 - 1.0;
    pts.windows(2).find_map(|w| {
        let ((p0, g0), (p1, g1)) = (w[0], w[1]);
        (g0 > target && g1 <= target).then(|| p0 + (target - g0) * (p1 - p0) / (g1 - g0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(g0_db: f64, psat_dbm: f64, p: f64, noise: f64, seed: u64) -> CompressionCurve {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let p1 = psat_dbm - g0_db;
        let powers: Vec<f64> = (0..=100).map(|i| p1 - 30.0 + 0.45 * i as f64).collect();
        let gains = powers
            .iter()
            .map(|&pin| {
                let n = if noise > 0.0 {
                    normal.sample(&mut rng)
                } else {
                    0.0
                };
                rapp_gain_db(
                    10f64.powf(g0_db / 10.0),
                    dbm_to_watts(psat_dbm),
                    p,
                    dbm_to_watts(pin),
                ) + n
            })
            .collect();
        CompressionCurve::from_points(6e9, powers, gains)
    }

    #[test]
    fn closed_form_p1db_matches_model() {
        for p in [0.5, 1.0, 2.5, 10.0] {
            let fit = RappFit {
                g0: 100.0,
                psat: 1e-13,
                p,
                residual: 0.0,
            };
            let p1 = dbm_to_watts(fit.p1db_dbm());
            assert!((fit.gain_db(p1) - (20.0 - 1.0)).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn hard_clip_limit() {
        let fit = RappFit {
            g0: 100.0,
            psat: 1e-13,
            p: 5e3,
            residual: 0.0,
        };
        let corner = watts_to_dbm(1e-13 / 100.0 * 10f64.powf(0.1));
        assert!((fit.p1db_dbm() - corner).abs() < 1e-3);
    }

    #[test]
    fn noiseless_round_trip() {
        let fit = rapp_fit(&synthetic(20.0, -100.0, 1.5, 0.0, 0)).unwrap();
        assert!((10.0 * fit.g0.log10() - 20.0).abs() < 1e-6);
        assert!((watts_to_dbm(fit.psat) + 100.0).abs() < 1e-6);
        assert!((fit.p - 1.5).abs() < 1e-6);
        let again = rapp_fit(&CompressionCurve::from_points(
            6e9,
            synthetic(20.0, -100.0, 1.5, 0.0, 0).powers_dbm.clone(),
            synthetic(20.0, -100.0, 1.5, 0.0, 0)
                .powers_dbm
                .iter()
                .map(|p| fit.gain_db(dbm_to_watts(*p)))
                .collect(),
        ))
        .unwrap();
        assert!((again.p / fit.p - 1.0).abs() < 1e-3);
    }

    #[test]
    fn noisy_recovery_within_two_percent() {
        let fit = rapp_fit(&synthetic(20.0, -100.0, 1.5, 0.05, 7)).unwrap();
        assert!((fit.g0 / 100.0 - 1.0).abs() < 0.02);
        assert!((fit.psat / dbm_to_watts(-100.0) - 1.0).abs() < 0.02);
        assert!((fit.p / 1.5 - 1.0).abs() < 0.02, "p = {}", fit.p);
    }

    #[test]
    fn large_knee_is_recovered_as_large() {
        let fit = rapp_fit(&synthetic(20.0, -100.0, 200.0, 0.0, 0)).unwrap();
        assert!(fit.p > 20.0, "p = {}", fit.p);
        let corner = -120.0 + 1.0;
        assert!((fit.p1db_dbm() - corner).abs() < 0.1);
    }

    #[test]
    fn linear_curve_is_not_fittable() {
        let c = CompressionCurve::from_points(
            6e9,
            (0..20).map(|i| -140.0 + i as f64).collect(),
            vec![10.0; 20],
        );
        assert!(matches!(rapp_fit(&c), Err(Error::NotFittable(_))));
    }

    #[test]
    fn non_monotone_curve_fails() {
        let powers: Vec<f64> = (0..30).map(|i| -140.0 + i as f64).collect();
        let gains = powers
            .iter()
            .map(|p| 10.0 + 4.0 * ((p + 125.0) / 3.0).sin())
            .collect();
        let c = CompressionCurve::from_points(6e9, powers, gains);
        assert!(matches!(rapp_fit(&c), Err(Error::FitFailed(_))));
    }

    #[test]
    fn raw_crossing_interpolates() {
        let c = CompressionCurve::from_points(
            6e9,
            vec![-130.0, -120.0, -110.0, -100.0, -90.0],
            vec![10.0, 10.0, 10.0, 9.5, 8.5],
        );
        assert!((raw_p1db(&c).unwrap() - -95.0).abs() < 1e-12);
    }
}
