//! Feature extraction on sweep results: map topology and ripple period.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::sweeps::{GainMap, MapAxis};
use crate::{Error, Result};

/// Connected high-gain region of a f_dc map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionFeature {
    pub cells: usize,
    /// Fraction of region cells whose signal and idler both lie in the band
    /// (one axis step of slack).
    pub in_band_fraction: f64,
    /// Fraction of strictly in-band cells covered by the region.
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapFeatures {
    /// Median gain on `f_dc = f_s` minus the median of off-line neighbours [dB].
    pub pump_line_contrast_db: f64,
    pub pump_line_cells: usize,
    /// Mean `|gain − neighbour mean|` on `f_dc = 2 f_s` [dB].
    pub degenerate_line_contrast_db: f64,
    pub degenerate_line_cells: usize,
    pub region: RegionFeature,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        return 0.0;
    }
    (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
}

/// Extracts the line features and the largest high-gain region from a
/// `f_dc` map, given the band `(lo, hi)` where the junction sees a high
/// impedance.
pub fn map_features(map: &GainMap, band: (f64, f64), threshold_db: f64) -> Result<MapFeatures> {
    if map.y_axis != MapAxis::JosephsonFrequency {
        return Err(Error::InvalidSweep(
            "feature extraction needs an f_dc map".into(),
        ));
    }
    let (nx, ny) = (map.signal.len(), map.y.len());
    if nx < 5 || ny < 3 {
        return Err(Error::InvalidSweep(
            "map too small for feature extraction".into(),
        ));
    }
    let dx = step(&map.signal);
    let tol = 0.25 * dx;
    let on_pump = |r: usize, c: usize| (map.y[r] - map.signal[c]).abs() < tol;
    let on_degenerate = |r: usize, c: usize| (map.y[r] - 2.0 * map.signal[c]).abs() < tol;
    let near_line =
        |r: usize, c: usize| (map.y[r] - map.signal[c]).abs() < 1.5 * dx || on_degenerate(r, c);
    let ok = |r: usize, c: usize| !map.masked(r, c) && map.gain(r, c).is_finite();

    let mut pump_on = Vec::new();
    let mut pump_off = Vec::new();
    let mut degen = Vec::new();
    for r in 0..ny {
        for c in 0..nx {
            if !ok(r, c) {
                continue;
            }
            if on_pump(r, c) {
                pump_on.push(map.gain(r, c));
                for cc in [c.wrapping_sub(3), c + 3] {
                    if cc < nx && ok(r, cc) {
                        pump_off.push(map.gain(r, cc));
                    }
                }
            }
            if on_degenerate(r, c) {
                let nb: Vec<f64> = [c.wrapping_sub(1), c + 1]
                    .into_iter()
                    .filter(|&cc| cc < nx && ok(r, cc))
                    .map(|cc| map.gain(r, cc))
                    .collect();
                if !nb.is_empty() {
                    let mean = nb.iter().sum::<f64>() / nb.len() as f64;
                    degen.push((map.gain(r, c) - mean).abs());
                }
            }
        }
    }

    // largest 4-connected component above threshold, line cells excluded
    let high = |r: usize, c: usize| ok(r, c) && !near_line(r, c) && map.gain(r, c) >= threshold_db;
    let mut label = vec![usize::MAX; nx * ny];
    let mut components: Vec<Vec<(usize, usize)>> = Vec::new();
    for r0 in 0..ny {
        for c0 in 0..nx {
            if label[r0 * nx + c0] != usize::MAX || !high(r0, c0) {
                continue;
            }
            let id = components.len();
            let mut cells = Vec::new();
            let mut queue = VecDeque::from([(r0, c0)]);
            label[r0 * nx + c0] = id;
            while let Some((r, c)) = queue.pop_front() {
                cells.push((r, c));
                let nbrs = [
                    (r.wrapping_sub(1), c),
                    (r + 1, c),
                    (r, c.wrapping_sub(1)),
                    (r, c + 1),
                ];
                for (rr, cc) in nbrs {
                    if rr < ny && cc < nx && label[rr * nx + cc] == usize::MAX && high(rr, cc) {
                        label[rr * nx + cc] = id;
                        queue.push_back((rr, cc));
                    }
                }
            }
            components.push(cells);
        }
    }
    let in_band = |r: usize, c: usize, slack: f64| {
        let (fs, fi) = (map.signal[c], map.y[r] - map.signal[c]);
        fs >= band.0 - slack && fs <= band.1 + slack && fi >= band.0 - slack && fi <= band.1 + slack
    };
    let region = match components.iter().max_by_key(|c| c.len()) {
        None => RegionFeature {
            cells: 0,
            in_band_fraction: 0.0,
            coverage: 0.0,
        },
        Some(cells) => {
            let inside = cells.iter().filter(|(r, c)| in_band(*r, *c, dx)).count();
            let mut strict = 0usize;
            let mut covered = 0usize;
            for r in 0..ny {
                for c in 0..nx {
                    if in_band(r, c, 0.0) && !near_line(r, c) {
                        strict += 1;
                        if cells.contains(&(r, c)) {
                            covered += 1;
                        }
                    }
                }
            }
            RegionFeature {
                cells: cells.len(),
                in_band_fraction: inside as f64 / cells.len() as f64,
                coverage: if strict == 0 {
                    0.0
                } else {
                    covered as f64 / strict as f64
                },
            }
        }
    };

    Ok(MapFeatures {
        pump_line_contrast_db: median(pump_on.clone()) - median(pump_off),
        pump_line_cells: pump_on.len(),
        degenerate_line_contrast_db: if degen.is_empty() {
            f64::NAN
        } else {
            degen.iter().sum::<f64>() / degen.len() as f64
        },
        degenerate_line_cells: degen.len(),
        region,
    })
}

/// Dominant period [Hz] of a ripple sampled on a uniform frequency axis,
/// searched between `min_period` and `max_period`. A least-squares quadratic
/// is removed and a Hann window applied before a zero-padded FFT; the peak is
/// refined by parabolic interpolation.
pub fn ripple_period(
    frequencies: &[f64],
    values: &[f64],
    min_period: f64,
    max_period: f64,
) -> Result<f64> {
    let n = frequencies.len();
    if n < 8 || values.len() != n {
        return Err(Error::InvalidSweep(
            "ripple analysis needs at least 8 samples".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSweep(
            "ripple analysis needs finite values".into(),
        ));
    }
    let df = step(frequencies);
    if frequencies
        .windows(2)
        .any(|w| ((w[1] - w[0]) - df).abs() > 1e-6 * df)
    {
        return Err(Error::InvalidSweep(
            "ripple analysis needs a uniform axis".into(),
        ));
    }
    let residual = detrend_quadratic(values);
    let len = (64 * n).next_power_of_two();
    let mut input = vec![0.0; len];
    for (i, v) in residual.iter().enumerate() {
        let w = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos();
        input[i] = v * w;
    }
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(len);
    let mut spectrum = fft.make_output_vec();
    fft.process(&mut input, &mut spectrum)
        .expect("buffer sizes come from the plan");
    let span = len as f64 * df;
    // bin q corresponds to a period of span / q
    let q_lo = ((span / max_period).floor() as usize).max(1);
    let q_hi = ((span / min_period).ceil() as usize).min(spectrum.len() - 2);
    if q_lo >= q_hi {
        return Err(Error::InvalidSweep(
            "period range not resolvable on this axis".into(),
        ));
    }
    let mag = |q: usize| spectrum[q].norm();
    let q = (q_lo..=q_hi)
        .max_by(|a, b| mag(*a).total_cmp(&mag(*b)))
        .expect("non-empty range");
    let (a, b, c) = (mag(q - 1), mag(q), mag(q + 1));
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 0.0 {
        0.5 * (a - c) / denom
    } else {
        0.0
    };
    Ok(span / (q as f64 + shift.clamp(-0.5, 0.5)))
}

/// Residual of `values` after a least-squares quadratic in the sample index.
fn detrend_quadratic(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let x = |i: usize| 2.0 * i as f64 / (n - 1) as f64 - 1.0;
    let a = DMatrix::from_fn(n, 3, |i, j| x(i).powi(j as i32));
    let b = DVector::from_column_slice(values);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .expect("both factors were computed");
    (b - a * coef).iter().copied().collect()
}
