//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Numeric arguments restrict the run to those criteria, e.g.
//! `cargo test --test acceptance -- 5 7`.

use icta::circuit::{build_icta, Cable, Element, FrequencyGrid, IctaParams, Netlist};
use icta::design::band_check;
use icta::frankenstein::{from_frankenstein, sample, to_frankenstein, PortKind};
use icta::solver::{IterationView, Solver, SolverSettings, Stimulus};
use icta::sweeps::{
    band_metrics, compression_set, emission_vs_ic, gain_map_fdc, gain_profile, is_degenerate,
    map_features, rapp_fit, rapp_gain_db, CompressionCurve, GainProfile,
};
use icta::units::{dbm_to_watts, photon_rate, watts_to_dbm, JOSEPHSON_RATE};
use icta::{CMatrix, C64};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::TAU;
use std::time::{Duration, Instant};

const Z0: f64 = 50.0;
const F_DC: f64 = 12e9;
const IC: f64 = 280e-9;
const POWER_DBM: f64 = -140.0;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn(&mut Shared) -> Outcome);

fn axis(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn canonical() -> Netlist {
    build_icta(&IctaParams::default()).unwrap()
}

fn with_cable(cable: Cable) -> Netlist {
    build_icta(&IctaParams {
        cable: Some(cable),
        ..Default::default()
    })
    .unwrap()
}

/// 10 MHz spacing, 40.96 GHz bandwidth: used for the wide sweeps.
fn coarse() -> SolverSettings {
    SolverSettings::default().with_grid(FrequencyGrid::new(10e6, 4096).unwrap())
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "out of range"
    }
}

/// Power-balance defects of converged solves with the signal inside the band.
#[derive(Default)]
struct Balance {
    count: usize,
    worst: f64,
}

impl Balance {
    fn add(&mut self, f: f64, band: (f64, f64), converged: bool, error: f64) {
        if converged && f >= band.0 && f <= band.1 {
            self.count += 1;
            self.worst = self.worst.max(error);
        }
    }

    fn profile(&mut self, p: &GainProfile, band: (f64, f64)) {
        for (f, pt) in p.frequencies.iter().zip(&p.points) {
            self.add(*f, band, pt.converged, pt.power_error);
        }
    }

    fn curves(&mut self, curves: &[CompressionCurve], band: (f64, f64)) {
        for c in curves {
            for (ok, e) in c.converged.iter().zip(&c.power_error) {
                self.add(c.frequency, band, *ok, *e);
            }
        }
    }
}

#[derive(Default)]
struct Shared {
    balance: Balance,
    profile: Option<(GainProfile, f64, f64)>,
}

fn band_of(net: &Netlist, grid: &FrequencyGrid) -> Result<(f64, f64), String> {
    band_check(net, grid)
        .map_err(|e| e.to_string())?
        .band
        .ok_or_else(|| "no band with Re Z_JJ above 50 ohm".to_string())
}

fn criterion_1(shared: &mut Shared) -> Outcome {
    let t = Instant::now();
    let net = canonical();
    let s = Solver::new(&net, SolverSettings::default()).map_err(|e| e.to_string())?;
    let b = s.bias(F_DC, IC, 0.0).map_err(|e| e.to_string())?;
    let f = axis(3e9, 9e9, 40e6);
    let p = gain_profile(&s, &b, 0, &f, POWER_DBM, 0.0).map_err(|e| e.to_string())?;
    let band = band_metrics(&p, 10.0).ok_or("no contiguous 10 dB band")?;

    // compression at the centres of eight equal slices of the band
    let step = s.grid().spacing() * 10.0;
    let signal: Vec<f64> = (0..8)
        .map(|i| {
            let x = band.start + band.bandwidth * (i as f64 + 0.5) / 8.0;
            let x = (x / step).round() * step;
            if is_degenerate(&s, &b, x) {
                x + 4.0 * step
            } else {
                x
            }
        })
        .collect();
    let powers = axis(-150.0, -90.0, 3.0);
    let curves = compression_set(&s, &b, 0, &signal, &powers, 0.0).map_err(|e| e.to_string())?;
    let fits: Vec<f64> = curves
        .iter()
        .filter_map(|c| rapp_fit(c).ok().map(|r| r.p1db_dbm()))
        .collect();
    let elapsed = t.elapsed();

    let rf_band = band_of(&net, s.grid())?;
    shared.balance.profile(&p, rf_band);
    shared.balance.curves(&curves, rf_band);
    shared.profile = Some((p, band.start, band.stop));

    let mean_p1db = fits.iter().sum::<f64>() / fits.len().max(1) as f64;
    let gain_ok = within(band.average_gain_db, 10.0, 1.5);
    let width_ok = within(band.bandwidth, 3.25e9, 0.15 * 3.25e9);
    let p1db_ok = fits.len() == curves.len() && within(mean_p1db, -113.0, 3.0);
    let time_ok = elapsed < Duration::from_secs(600);
    Ok((
        gain_ok && width_ok && p1db_ok && time_ok,
        format!(
            "average gain {:.2} dB ({}), >=10 dB plateau {:.3}-{:.3} GHz = {:.2} GHz ({}), \
             mean fitted P1dB {:.1} dBm over {}/{} curves ({}), runtime {:.0} s ({})",
            band.average_gain_db,
            mark(gain_ok),
            band.start / 1e9,
            band.stop / 1e9,
            band.bandwidth / 1e9,
            mark(width_ok),
            mean_p1db,
            fits.len(),
            curves.len(),
            mark(p1db_ok),
            elapsed.as_secs_f64(),
            mark(time_ok),
        ),
    ))
}

fn criterion_2(shared: &mut Shared) -> Outcome {
    let net = canonical();
    let s = Solver::new(&net, coarse()).map_err(|e| e.to_string())?;
    let signal = axis(3e9, 10e9, 0.25e9);
    let f_dc = axis(8e9, 18e9, 0.25e9);
    let m =
        gain_map_fdc(&s, 0, &signal, &f_dc, 200e-9, POWER_DBM, 0.0).map_err(|e| e.to_string())?;
    let band = band_of(&net, s.grid())?;
    for (i, fs) in m.signal.iter().enumerate() {
        for r in 0..m.y.len() {
            let k = m.index(r, i);
            shared
                .balance
                .add(*fs, band, m.converged[k], m.power_error[k]);
        }
    }
    let x = map_features(&m, band, 3.0).map_err(|e| e.to_string())?;
    let region_ok =
        x.region.cells > 0 && x.region.in_band_fraction >= 0.8 && x.region.coverage >= 0.5;
    let pump_ok = x.pump_line_cells > 0 && x.pump_line_contrast_db >= 3.0;
    let degen_ok = x.degenerate_line_cells > 0 && x.degenerate_line_contrast_db >= 1.0;
    Ok((
        region_ok && pump_ok && degen_ok,
        format!(
            "region {} cells, {:.2} in band {:.2}-{:.2} GHz, coverage {:.2} ({}); \
             f_dc=f_s line {:.1} dB over {} cells ({}); f_dc=2f_s line {:.1} dB over {} cells ({})",
            x.region.cells,
            x.region.in_band_fraction,
            band.0 / 1e9,
            band.1 / 1e9,
            x.region.coverage,
            mark(region_ok),
            x.pump_line_contrast_db,
            x.pump_line_cells,
            mark(pump_ok),
            x.degenerate_line_contrast_db,
            x.degenerate_line_cells,
            mark(degen_ok),
        ),
    ))
}

fn criterion_3(shared: &mut Shared) -> Outcome {
    let f = axis(4.5e9, 7.5e9, 20e6);
    let mut pass = true;
    let mut parts = Vec::new();
    for (cable, target, tol) in [
        (Cable::semi_rigid_330mm(), 320e6, 10e6),
        (Cable::semi_rigid_100mm(), 1.06e9, 0.1e9),
    ] {
        let net = with_cable(cable);
        let s = Solver::new(&net, coarse()).map_err(|e| e.to_string())?;
        let b = s.bias(F_DC, IC, 0.0).map_err(|e| e.to_string())?;
        let p = gain_profile(&s, &b, 0, &f, POWER_DBM, 0.0).map_err(|e| e.to_string())?;
        shared.balance.profile(&p, band_of(&net, s.grid())?);
        let period = p.ripple_period(150e6, 2.5e9).map_err(|e| e.to_string())?;
        let ok = within(period, target, tol);
        pass &= ok;
        parts.push(format!(
            "{:.0} mm: {:.1} MHz vs {:.0} +/- {:.0} MHz ({})",
            cable.length * 1e3,
            period / 1e6,
            target / 1e6,
            tol / 1e6,
            mark(ok)
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn criterion_4(shared: &mut Shared) -> Outcome {
    let b = &shared.balance;
    Ok((
        b.count > 0 && b.worst <= 1e-8,
        format!(
            "{} converged in-band solves, worst relative defect {:.2e}",
            b.count, b.worst
        ),
    ))
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn random_s(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    // keep well inside the unit circle so every port kind stays invertible
    let scale = 0.8 / m.norm();
    m * C64::new(scale, 0.0)
}

fn criterion_5(_: &mut Shared) -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kind_of = |i: usize| match i % 3 {
        0 => PortKind::Wave { impedance: Z0 },
        1 => PortKind::VoltageBias,
        _ => PortKind::CurrentBias,
    };
    let mut worst = [0.0f64; 4];
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let s = random_s(&mut rng, n);

        let matched = to_frankenstein(
            &[1e9],
            std::slice::from_ref(&s),
            &vec![PortKind::Wave { impedance: Z0 }; n],
            Z0,
        )
        .map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(rel(matched.at(0), &s));

        let r = 10f64.powf(rng.random_range(0.0..4.0));
        let one = CMatrix::from_element(1, 1, C64::new((r - Z0) / (r + Z0), 0.0));
        let v = to_frankenstein(
            &[0.0],
            std::slice::from_ref(&one),
            &[PortKind::VoltageBias],
            Z0,
        )
        .map_err(|e| e.to_string())?;
        let i = to_frankenstein(&[0.0], &[one], &[PortKind::CurrentBias], Z0)
            .map_err(|e| e.to_string())?;
        let s11 = s[(0, 0)];
        let z = to_frankenstein(
            &[1e9],
            &[CMatrix::from_element(1, 1, s11)],
            &[PortKind::CurrentBias],
            Z0,
        )
        .map_err(|e| e.to_string())?;
        let closed = (1.0 + s11) / (1.0 - s11) * Z0;
        worst[1] = worst[1]
            .max((v.at(0)[(0, 0)].re * r - 1.0).abs())
            .max((i.at(0)[(0, 0)].re / r - 1.0).abs())
            .max((z.at(0)[(0, 0)] - closed).norm() / closed.norm());

        let kinds: Vec<PortKind> = (0..n)
            .map(|k| kind_of(k + rng.random_range(0..3)))
            .collect();
        let fm = to_frankenstein(&[2e9], std::slice::from_ref(&s), &kinds, Z0)
            .map_err(|e| e.to_string())?;
        let back = from_frankenstein(&fm).map_err(|e| e.to_string())?;
        worst[2] = worst[2].max(rel(&back[0], &s));
    }
    let grid = FrequencyGrid::new(50e6, 512).unwrap();
    for net in [
        canonical(),
        with_cable(Cable::semi_rigid_330mm()),
        build_icta(&IctaParams {
            junction_capacitance: 10e-15,
            ..Default::default()
        })
        .unwrap(),
    ] {
        let base = sample(&net, &grid, Z0).map_err(|e| e.to_string())?;
        for z0 in [25.0, 75.0, 300.0] {
            let other = sample(&net, &grid, z0).map_err(|e| e.to_string())?;
            for k in 0..grid.points() {
                worst[3] = worst[3].max(rel(other.at(k), base.at(k)));
            }
        }
    }
    let elapsed = t.elapsed();
    let ok = worst.iter().all(|w| *w < 1e-10) && elapsed < Duration::from_secs(10);
    Ok((
        ok,
        format!(
            "F=S {:.1e}, closed forms {:.1e}, round trip {:.1e}, reference independence {:.1e}, {:.2} s",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            elapsed.as_secs_f64()
        ),
    ))
}

fn small() -> SolverSettings {
    SolverSettings::default().with_grid(FrequencyGrid::new(1e8, 256).unwrap())
}

fn criterion_6(_: &mut Shared) -> Outcome {
    // no critical current: the first iterate is the answer
    let s = Solver::new(&canonical(), small()).map_err(|e| e.to_string())?;
    let b = s.bias(F_DC, 0.0, 0.0).map_err(|e| e.to_string())?;
    let st = s
        .solve(&b, &Stimulus::tone(0, 5e9, POWER_DBM, 0.0), None)
        .map_err(|e| e.to_string())?;
    let linear_ok = st.iterations == 1 && st.converged;

    // resistor-shunted junction: sidebands of the phase-modulated pump
    let mut worst_side: f64 = 0.0;
    for depth in [0.01, 0.02, 0.03, 0.05] {
        let ic = 1e-7;
        let w = TAU * F_DC;
        let r = depth * w / (JOSEPHSON_RATE * ic);
        let net = Netlist::builder()
            .shunt("r", "j", Element::ShuntResistor(r))
            .port("jj", "j", PortKind::CurrentBias)
            .build()
            .map_err(|e| e.to_string())?;
        let s = Solver::new(&net, small()).map_err(|e| e.to_string())?;
        let b = s.bias(F_DC, ic, 0.0).map_err(|e| e.to_string())?;
        let st = s
            .solve(&b, &Stimulus::none(), None)
            .map_err(|e| e.to_string())?;
        let k = s.grid().bin(F_DC).ok_or("pump off grid")?;
        let delta = JOSEPHSON_RATE * r * st.current[k].norm() / w;
        let first_order = ic * delta / 2.0;
        for got in [st.current[2 * k].norm(), st.current[0].re.abs()] {
            worst_side = worst_side.max((got / first_order - 1.0).abs());
        }
    }

    // conjugate symmetry of every iterate's full spectrum
    let s = Solver::new(&canonical(), small()).map_err(|e| e.to_string())?;
    let b = s.bias(F_DC, IC, 0.4).map_err(|e| e.to_string())?;
    let m = s.engine().samples();
    let fft = rustfft::FftPlanner::<f64>::new().plan_fft_forward(m);
    let mut iterations = 0;
    let mut worst_sym: f64 = 0.0;
    let mut check = |view: &IterationView| {
        let mut buf: Vec<C64> = view
            .current_samples
            .iter()
            .map(|x| C64::new(*x, 0.0))
            .collect();
        fft.process(&mut buf);
        let scale = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for k in 1..m / 2 {
            worst_sym = worst_sym.max((buf[m - k] - buf[k].conj()).norm() / scale);
        }
        iterations += 1;
    };
    let st = s
        .solve_observed(
            &b,
            &Stimulus::tone(0, 5e9, POWER_DBM, 0.0),
            None,
            Some(&mut check),
        )
        .map_err(|e| e.to_string())?;
    let sym_ok = iterations == st.iterations && worst_sym < 1e-13;
    let side_ok = worst_side < 0.01;
    Ok((
        linear_ok && side_ok && sym_ok,
        format!(
            "I_c=0 converged in {} iteration(s) ({}); worst sideband deviation {:.2}% ({}); \
             Hermitian defect {:.1e} over {} iterations ({})",
            if linear_ok { 1 } else { 0 },
            mark(linear_ok),
            100.0 * worst_side,
            mark(side_ok),
            worst_sym,
            iterations,
            mark(sym_ok),
        ),
    ))
}

fn criterion_7(_: &mut Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for g0_db in [10.0, 15.0, 20.0] {
        for psat_dbm in [-110.0, -100.0, -90.0] {
            // knees from the soft end the amplifier shows up to a Rapp p of 1
            for p in [0.35, 0.6, 1.0] {
                let (g0, psat) = (10f64.powf(g0_db / 10.0), dbm_to_watts(psat_dbm));
                let knee = psat_dbm - g0_db;
                let powers = axis(knee - 30.0, knee + 15.0, 0.1);
                let gains = powers
                    .iter()
                    .map(|&pin| {
                        rapp_gain_db(g0, psat, p, dbm_to_watts(pin)) + noise.sample(&mut rng)
                    })
                    .collect();
                match rapp_fit(&CompressionCurve::from_points(6e9, powers, gains)) {
                    Ok(fit) => {
                        let e = (fit.g0 / g0 - 1.0)
                            .abs()
                            .max((fit.psat / psat - 1.0).abs())
                            .max((fit.p / p - 1.0).abs());
                        worst = worst.max(e);
                        failures += usize::from(e > 0.02);
                    }
                    Err(_) => failures += 1,
                }
            }
        }
    }
    Ok((
        failures == 0,
        format!(
            "27 curves, {failures} outside 2%, worst parameter error {:.2}%",
            100.0 * worst
        ),
    ))
}

fn criterion_8(_: &mut Shared) -> Outcome {
    let rate = photon_rate(dbm_to_watts(-105.0), 12.261e9);
    let rate_ok = (rate - 3.5e9).abs() <= 0.5e9;
    let s = Solver::new(&canonical(), coarse()).map_err(|e| e.to_string())?;
    let ic = axis(0.0, 280e-9, 40e-9);
    let e = emission_vs_ic(&s, 0, 12.26e9, &ic, s.grid().spacing()).map_err(|e| e.to_string())?;
    let rising = e.iter().all(|x| x.converged) && e.windows(2).all(|w| w[1].power_w > w[0].power_w);
    let levels: Vec<String> = e[1..]
        .iter()
        .map(|x| format!("{:.1}", watts_to_dbm(x.power_w)))
        .collect();
    Ok((
        rate_ok && rising,
        format!(
            "-105 dBm at 12.261 GHz = {:.2e} photons/s ({}); emission at 40..280 nA: [{}] dBm ({})",
            rate,
            mark(rate_ok),
            levels.join(", "),
            if rising {
                "increasing"
            } else {
                "not increasing"
            },
        ),
    ))
}

fn criterion_9(shared: &mut Shared) -> Outcome {
    if shared.profile.is_none() {
        criterion_1(shared)?;
    }
    let (coarse_profile, start, stop) = shared.profile.as_ref().unwrap();
    // every fifth point of the criterion-1 band
    let picks: Vec<usize> = coarse_profile
        .frequencies
        .iter()
        .enumerate()
        .filter(|(_, f)| **f >= *start && **f <= *stop)
        .map(|(i, _)| i)
        .step_by(5)
        .collect();
    let f: Vec<f64> = picks
        .iter()
        .map(|&i| coarse_profile.frequencies[i])
        .collect();
    let base = picks
        .iter()
        .map(|&i| coarse_profile.points[i].gain_db)
        .sum::<f64>()
        / f.len() as f64;

    let g = FrequencyGrid::default_solver();
    let fine = SolverSettings::default()
        .with_grid(FrequencyGrid::new(g.spacing() / 2.0, 2 * g.points()).unwrap());
    let s = Solver::new(&canonical(), fine).map_err(|e| e.to_string())?;
    let b = s.bias(F_DC, IC, 0.0).map_err(|e| e.to_string())?;
    let p = gain_profile(&s, &b, 0, &f, POWER_DBM, 0.0).map_err(|e| e.to_string())?;
    let halved = p.gains_db().iter().sum::<f64>() / f.len() as f64;
    let all_converged = p.points.iter().all(|x| x.converged);
    let change = (halved - base).abs();
    Ok((
        all_converged && change < 0.1,
        format!(
            "average over {} band points: {:.4} dB at {:.1} MHz, {:.4} dB at {:.1} MHz, change {:.1e} dB",
            f.len(),
            base,
            g.spacing() / 1e6,
            halved,
            g.spacing() / 2e6,
            change
        ),
    ))
}

fn main() {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [Criterion; 9] = [
        ("gain profile and compression", criterion_1),
        ("gain map topology", criterion_2),
        ("cable ripple periods", criterion_3),
        ("power conservation", criterion_4),
        ("conversion identities", criterion_5),
        ("solver oracles", criterion_6),
        ("Rapp fit round trip", criterion_7),
        ("pump emission", criterion_8),
        ("grid convergence", criterion_9),
    ];
    let mut shared = Shared::default();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = run(&mut shared).unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "criterion {n} ({name}): {} [{:.1} s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
