//! Canonical amplifier parameters, flux tuning of the critical current and
//! first-order band diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{build_icta, z_jj, FrequencyGrid, IctaParams, Netlist};
use crate::frankenstein::PortKind;
use crate::{Error, Result};

/// Version stamp of the canonical parameter set.
pub const CANONICAL_VERSION: &str = "icta-canonical-1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignTargets {
    pub gain_db: f64,
    pub center_frequency: f64,
    pub fractional_bandwidth: f64,
    pub network_impedance: f64,
}

impl Default for DesignTargets {
    fn default() -> Self {
        DesignTargets {
            gain_db: 20.0,
            center_frequency: 6e9,
            fractional_bandwidth: 0.25,
            network_impedance: 81.7,
        }
    }
}

impl DesignTargets {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.gain_db,
            self.center_frequency,
            self.fractional_bandwidth,
            self.network_impedance,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive || self.fractional_bandwidth >= 1.0 {
            return Err(Error::Config(
                "design targets must be positive with fractional bandwidth < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Fabricated design: embedding values plus junction data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalIcta {
    pub params: IctaParams,
    /// Maximum critical current of one junction [A].
    pub ic_max_per_junction: f64,
    /// Zero-flux critical current of the two-junction SQUID [A].
    pub ic_squid_max: f64,
    pub targets: DesignTargets,
    pub version: &'static str,
}

pub fn canonical_icta() -> CanonicalIcta {
    CanonicalIcta {
        params: IctaParams::default(),
        ic_max_per_junction: 600e-9,
        ic_squid_max: 1.2e-6,
        targets: DesignTargets::default(),
        version: CANONICAL_VERSION,
    }
}

impl CanonicalIcta {
    pub fn netlist(&self) -> Result<Netlist> {
        build_icta(&self.params)
    }

    /// Content hash of the canonical netlist.
    pub fn hash(&self) -> Result<String> {
        Ok(self.netlist()?.content_hash())
    }

    /// `1/(2π√(L_s C_s))` [Hz].
    pub fn series_resonance(&self) -> f64 {
        1.0 / (2.0 * PI * (self.params.ls * self.params.cs).sqrt())
    }

    /// `1/(2π√(L_p C_p))` [Hz].
    pub fn parallel_resonance(&self) -> f64 {
        1.0 / (2.0 * PI * (self.params.lp * self.params.cp).sqrt())
    }
}

/// External flux through a symmetric SQUID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxBias {
    /// Flux in units of the flux quantum.
    pub flux: f64,
    /// Zero-flux SQUID critical current [A].
    pub ic_max: f64,
}

/// Symmetric SQUID without loop inductance: `I_c,max |cos(π Φ/Φ₀)|`.
pub fn ic_of_flux(bias: FluxBias) -> Result<f64> {
    if !(bias.ic_max.is_finite() && bias.ic_max > 0.0) {
        return Err(Error::InvalidBias(format!(
            "maximum critical current must be positive, got {}",
            bias.ic_max
        )));
    }
    if !bias.flux.is_finite() {
        return Err(Error::InvalidBias("flux must be finite".into()));
    }
    // reduce first so that half-integer flux gives an exact zero
    let r = bias.flux.rem_euclid(1.0);
    if r == 0.5 {
        return Ok(0.0);
    }
    Ok(bias.ic_max * (PI * r).cos().abs())
}

/// Zero-flux SQUID critical current for which `flux` yields `ic`.
pub fn calibrate_squid_max(flux: f64, ic: f64) -> Result<f64> {
    let c = (PI * flux).cos().abs();
    if c < 1e-12 {
        return Err(Error::InvalidBias(
            "flux at full frustration cannot be calibrated".into(),
        ));
    }
    Ok(ic / c)
}

/// Where the junction sees more than the reference impedance, and how
/// sharply `Re Z_JJ` rolls off on either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub reference_impedance: f64,
    /// Edges of the widest contiguous span with `Re Z_JJ > reference`.
    pub band: Option<(f64, f64)>,
    pub peak_frequency: f64,
    pub peak_resistance: f64,
    /// 10–90 % widths of the lower and upper flanks [Hz].
    pub lower_rolloff: Option<f64>,
    pub upper_rolloff: Option<f64>,
    /// Upper over lower roll-off width.
    pub asymmetry: Option<f64>,
}

impl BandReport {
    pub fn contains(&self, f: f64) -> bool {
        self.band.is_some_and(|(lo, hi)| f >= lo && f <= hi)
    }
}

fn crossing(f0: f64, v0: f64, f1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        f0
    } else {
        f0 + (level - v0) * (f1 - f0) / (v1 - v0)
    }
}

/// Band diagnostics of `Re Z_JJ` on `grid`, referenced to the first wave
/// port impedance.
pub fn band_check(net: &Netlist, grid: &FrequencyGrid) -> Result<BandReport> {
    let reference = net
        .ports()
        .iter()
        .find_map(|p| match p.kind {
            PortKind::Wave { impedance } => Some(impedance),
            _ => None,
        })
        .ok_or_else(|| Error::InvalidNetlist("band check needs a wave port".into()))?;
    let z = z_jj(net, grid)?;
    let f: Vec<f64> = grid.frequencies().collect();
    let r: Vec<f64> = z.iter().map(|z| z.re).collect();
    band_report(&f, &r, reference)
}

pub fn band_report(f: &[f64], r: &[f64], reference: f64) -> Result<BandReport> {
    let n = f.len();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < n {
        if r[i] <= reference {
            i += 1;
            continue;
        }
        let a = i;
        while i < n && r[i] > reference {
            i += 1;
        }
        if best.is_none_or(|(x, y)| f[i - 1] - f[a] > f[y] - f[x]) {
            best = Some((a, i - 1));
        }
    }
    let (peak_idx, peak) = r
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .ok_or_else(|| Error::InvalidGrid("empty grid".into()))?;
    let Some((a, b)) = best else {
        return Ok(BandReport {
            reference_impedance: reference,
            band: None,
            peak_frequency: f[peak_idx],
            peak_resistance: peak,
            lower_rolloff: None,
            upper_rolloff: None,
            asymmetry: None,
        });
    };
    let band = (
        if a > 0 {
            crossing(f[a - 1], r[a - 1], f[a], r[a], reference)
        } else {
            f[a]
        },
        if b + 1 < n {
            crossing(f[b], r[b], f[b + 1], r[b + 1], reference)
        } else {
            f[b]
        },
    );
    let vpk = r[a..=b].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (hi90, lo10) = (0.9 * vpk, 0.1 * vpk);

    let lower = (|| {
        let i90 = (0..=b).find(|&i| r[i] >= hi90)?;
        let i10 = (0..i90).rev().find(|&i| r[i] <= lo10)?;
        let f90 = crossing(f[i90 - 1], r[i90 - 1], f[i90], r[i90], hi90);
        let f10 = crossing(f[i10], r[i10], f[i10 + 1], r[i10 + 1], lo10);
        Some(f90 - f10)
    })();
    let upper = (|| {
        let i90 = (a..n).rev().find(|&i| i <= b && r[i] >= hi90)?;
        let i10 = (i90 + 1..n).find(|&i| r[i] <= lo10)?;
        let f90 = crossing(f[i90], r[i90], f[i90 + 1], r[i90 + 1], hi90);
        let f10 = crossing(f[i10 - 1], r[i10 - 1], f[i10], r[i10], lo10);
        Some(f10 - f90)
    })();
    Ok(BandReport {
        reference_impedance: reference,
        band: Some(band),
        peak_frequency: f[peak_idx],
        peak_resistance: peak,
        lower_rolloff: lower,
        upper_rolloff: upper,
        asymmetry: lower.zip(upper).map(|(l, u)| u / l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_values() {
        let d = canonical_icta();
        assert_eq!(d.params.lp, 1.38e-9);
        assert_eq!(d.params.cp, 530e-15);
        assert_eq!(d.params.ls, 1.94e-9);
        assert_eq!(d.params.cs, 373e-15);
        assert_eq!(d.params.inverter_impedance, 58.8);
        assert_eq!(d.params.inverter_frequency, 5.88e9);
        assert_eq!(d.ic_max_per_junction, 600e-9);
        assert_eq!(d.ic_squid_max, 2.0 * d.ic_max_per_junction);
        let t = d.targets;
        assert_eq!(
            (
                t.gain_db,
                t.center_frequency,
                t.fractional_bandwidth,
                t.network_impedance
            ),
            (20.0, 6e9, 0.25, 81.7)
        );
        t.validate().unwrap();
        assert!((d.series_resonance() / 5.9e9 - 1.0).abs() < 0.01);
        assert_eq!(d.hash().unwrap(), canonical_icta().hash().unwrap());
    }

    #[test]
    fn flux_model_symmetries() {
        let ic = |flux| {
            ic_of_flux(FluxBias {
                flux,
                ic_max: 1.2e-6,
            })
            .unwrap()
        };
        assert_eq!(ic(0.0), 1.2e-6);
        assert_eq!(ic(0.5), 0.0);
        assert_eq!(ic(-0.5), 0.0);
        for x in [0.07, 0.29, 0.32, 0.34, 0.61] {
            assert!((ic(x) - ic(-x)).abs() < 1e-20);
            assert!((ic(x) - ic(x + 1.0)).abs() < 1e-18);
            assert!((ic(x) - ic(x - 3.0)).abs() < 1e-18);
        }
        assert!(ic_of_flux(FluxBias {
            flux: 0.1,
            ic_max: 0.0
        })
        .is_err());
    }

    #[test]
    fn calibration_reproduces_target_current() {
        let max = calibrate_squid_max(0.32, 280e-9).unwrap();
        let back = ic_of_flux(FluxBias {
            flux: 0.32,
            ic_max: max,
        })
        .unwrap();
        assert!((back - 280e-9).abs() < 1e-18);
        assert!(calibrate_squid_max(0.5, 280e-9).is_err());
    }

    #[test]
    fn canonical_band_and_asymmetry() {
        let net = canonical_icta().netlist().unwrap();
        let rep = band_check(&net, &FrequencyGrid::new(5e6, 4096).unwrap()).unwrap();
        let (lo, hi) = rep.band.unwrap();
        assert!(lo < 4.5e9 && lo > 3e9, "lower edge {lo}");
        assert!(hi > 7.5e9 && hi < 10e9, "upper edge {hi}");
        assert!(rep.asymmetry.unwrap() > 1.0, "{rep:?}");
    }

    #[test]
    fn bare_port_has_no_band() {
        let net = Netlist::builder()
            .port("rf", "x", PortKind::Wave { impedance: 50.0 })
            .port("jj", "x", PortKind::CurrentBias)
            .build()
            .unwrap();
        let rep = band_check(&net, &FrequencyGrid::new(1e8, 128).unwrap()).unwrap();
        assert!(rep.band.is_none());
    }
}
