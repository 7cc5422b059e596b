use std::f64::consts::PI;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::units::SPEED_OF_LIGHT;
use crate::{Error, Result, C64};

/// 2×2 transfer (ABCD) matrix relating `(V1, I1)` to `(V2, I2)`, with `I2`
/// leaving port 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Abcd {
    pub fn identity() -> Self {
        Self {
            a: C64::new(1.0, 0.0),
            b: C64::new(0.0, 0.0),
            c: C64::new(0.0, 0.0),
            d: C64::new(1.0, 0.0),
        }
    }

    pub fn series(z: C64) -> Self {
        Self {
            b: z,
            ..Self::identity()
        }
    }

    pub fn shunt(y: C64) -> Self {
        Self {
            c: y,
            ..Self::identity()
        }
    }

    pub fn determinant(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Input impedance with port 2 terminated in `load`.
    pub fn input_impedance(&self, load: C64) -> C64 {
        (self.a * load + self.b) / (self.c * load + self.d)
    }

    pub fn max_abs_diff(&self, other: &Abcd) -> f64 {
        [
            (self.a - other.a).norm(),
            (self.b - other.b).norm(),
            (self.c - other.c).norm(),
            (self.d - other.d).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl Mul for Abcd {
    type Output = Abcd;

    fn mul(self, r: Abcd) -> Abcd {
        Abcd {
            a: self.a * r.a + self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.c * r.b + self.d * r.d,
        }
    }
}

/// Left-to-right product of a non-empty chain of two-ports.
pub fn cascade(chain: &[Abcd]) -> Result<Abcd> {
    let (first, rest) = chain.split_first().ok_or(Error::EmptyChain)?;
    Ok(rest.iter().fold(*first, |acc, m| acc * *m))
}

/// How the electrical length of a transmission line is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineLength {
    /// Line is a quarter wavelength long at `frequency` [Hz].
    QuarterWave { frequency: f64 },
    /// Physical length [m] with relative phase velocity `velocity_factor`.
    Physical { length: f64, velocity_factor: f64 },
}

impl LineLength {
    /// One-way propagation delay [s].
    pub fn delay(&self) -> f64 {
        match *self {
            LineLength::QuarterWave { frequency } => 0.25 / frequency,
            LineLength::Physical {
                length,
                velocity_factor,
            } => length / (velocity_factor * SPEED_OF_LIGHT),
        }
    }
}

/// A lumped or distributed linear element. Values are SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    SeriesInductor(f64),
    SeriesCapacitor(f64),
    SeriesResistor(f64),
    ShuntInductor(f64),
    ShuntCapacitor(f64),
    ShuntResistor(f64),
    TransmissionLine { impedance: f64, length: LineLength },
}

impl Element {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Element::SeriesInductor(_) => "series-inductor",
            Element::SeriesCapacitor(_) => "series-capacitor",
            Element::SeriesResistor(_) => "series-resistor",
            Element::ShuntInductor(_) => "shunt-inductor",
            Element::ShuntCapacitor(_) => "shunt-capacitor",
            Element::ShuntResistor(_) => "shunt-resistor",
            Element::TransmissionLine { .. } => "transmission-line",
        }
    }

    pub fn is_shunt(&self) -> bool {
        matches!(
            self,
            Element::ShuntInductor(_) | Element::ShuntCapacitor(_) | Element::ShuntResistor(_)
        )
    }

    pub fn is_lossless(&self) -> bool {
        !matches!(self, Element::SeriesResistor(_) | Element::ShuntResistor(_))
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidElement {
                name: name.to_string(),
                reason: reason.to_string(),
            })
        };
        let check = |v: f64, what: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                bad(&format!("{what} must be positive and finite, got {v}"))
            }
        };
        match *self {
            Element::SeriesInductor(v) | Element::ShuntInductor(v) => check(v, "inductance"),
            Element::SeriesCapacitor(v) | Element::ShuntCapacitor(v) => check(v, "capacitance"),
            Element::SeriesResistor(v) | Element::ShuntResistor(v) => check(v, "resistance"),
            Element::TransmissionLine { impedance, length } => {
                check(impedance, "characteristic impedance")?;
                match length {
                    LineLength::QuarterWave { frequency } => {
                        check(frequency, "quarter-wave frequency")
                    }
                    LineLength::Physical {
                        length,
                        velocity_factor,
                    } => {
                        check(length, "length")?;
                        check(velocity_factor, "velocity factor")
                    }
                }
            }
        }
    }

    /// Electrical length `θ = ωτ` of a transmission line at `f`.
    pub fn electrical_length(&self, f: f64) -> Option<f64> {
        match self {
            Element::TransmissionLine { length, .. } => Some(2.0 * PI * f * length.delay()),
            _ => None,
        }
    }

    /// ABCD matrix at frequency `f` [Hz].
    pub fn abcd(&self, f: f64) -> Result<Abcd> {
        self.validate(self.kind_name())?;
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "frequency must be >= 0, got {f}"
            )));
        }
        let w = 2.0 * PI * f;
        let j = C64::i();
        Ok(match *self {
            Element::SeriesInductor(l) => Abcd::series(j * w * l),
            Element::SeriesCapacitor(c) => {
                if f == 0.0 {
                    // open circuit: not representable as a finite ABCD series element
                    return Err(Error::InvalidElement {
                        name: "series-capacitor".into(),
                        reason: "series capacitor has no finite ABCD matrix at DC".into(),
                    });
                }
                Abcd::series(1.0 / (j * w * c))
            }
            Element::SeriesResistor(r) => Abcd::series(C64::new(r, 0.0)),
            Element::ShuntInductor(l) => {
                if f == 0.0 {
                    return Err(Error::InvalidElement {
                        name: "shunt-inductor".into(),
                        reason: "shunt inductor has no finite ABCD matrix at DC".into(),
                    });
                }
                Abcd::shunt(1.0 / (j * w * l))
            }
            Element::ShuntCapacitor(c) => Abcd::shunt(j * w * c),
            Element::ShuntResistor(r) => Abcd::shunt(C64::new(1.0 / r, 0.0)),
            Element::TransmissionLine { impedance, .. } => {
                let theta = self.electrical_length(f).unwrap_or(0.0);
                let (s, c) = theta.sin_cos();
                // snap the closed-form zeros so an exact quarter wave is an exact inverter
                let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
                let (s, c) = (snap(s), snap(c));
                Abcd {
                    a: C64::new(c, 0.0),
                    b: j * impedance * s,
                    c: j * s / impedance,
                    d: C64::new(c, 0.0),
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qw() -> Element {
        Element::TransmissionLine {
            impedance: 58.8,
            length: LineLength::QuarterWave { frequency: 5.88e9 },
        }
    }

    #[test]
    fn series_inductor_is_identity_at_dc() {
        let m = Element::SeriesInductor(1e-9).abcd(0.0).unwrap();
        assert_eq!(m, Abcd::identity());
    }

    #[test]
    fn quarter_wave_is_an_inverter() {
        let m = qw().abcd(5.88e9).unwrap();
        assert_eq!(m.a, C64::new(0.0, 0.0));
        assert_eq!(m.d, C64::new(0.0, 0.0));
        assert!((m.b - C64::new(0.0, 58.8)).norm() < 1e-12);
        assert!((m.c - C64::new(0.0, 1.0 / 58.8)).norm() < 1e-15);
        // Z0² / Z_L transformation
        let zin = m.input_impedance(C64::new(50.0, 0.0));
        assert!((zin.re - 58.8 * 58.8 / 50.0).abs() < 1e-9);
    }

    #[test]
    fn shunt_capacitor_form() {
        let (c, f) = (1e-12, 3e9);
        let m = Element::ShuntCapacitor(c).abcd(f).unwrap();
        assert_eq!(m.a, C64::new(1.0, 0.0));
        assert_eq!(m.b, C64::new(0.0, 0.0));
        assert!((m.c - C64::new(0.0, 2.0 * PI * f * c)).norm() < 1e-15);
        assert_eq!(m.d, C64::new(1.0, 0.0));
    }

    #[test]
    fn two_quarter_waves_make_a_half_wave() {
        let m = qw().abcd(5.88e9).unwrap();
        let h = cascade(&[m, m]).unwrap();
        assert!((h.a + 1.0).norm() < 1e-12);
        assert!((h.d + 1.0).norm() < 1e-12);
        assert!(h.b.norm() < 1e-12 && h.c.norm() < 1e-12);
    }

    #[test]
    fn cascade_identities() {
        let m = Element::SeriesInductor(2e-9).abcd(4e9).unwrap();
        assert_eq!(cascade(&[m]).unwrap(), m);
        assert_eq!(cascade(&[m, Abcd::identity()]).unwrap(), m);
        assert!(matches!(cascade(&[]), Err(Error::EmptyChain)));
    }

    #[test]
    fn non_finite_value_rejected() {
        assert!(Element::SeriesInductor(f64::NAN).abcd(1e9).is_err());
        assert!(Element::ShuntResistor(-5.0).abcd(1e9).is_err());
        assert!(Element::TransmissionLine {
            impedance: 50.0,
            length: LineLength::Physical {
                length: f64::INFINITY,
                velocity_factor: 0.7
            }
        }
        .abcd(1e9)
        .is_err());
    }

    #[test]
    fn cable_delay_is_linear_in_length() {
        let v = 1.0 / 2f64.sqrt();
        let long = LineLength::Physical {
            length: 0.33,
            velocity_factor: v,
        }
        .delay();
        let short = LineLength::Physical {
            length: 0.11,
            velocity_factor: v,
        }
        .delay();
        assert!((long / short - 3.0).abs() < 1e-12);
        // standing-wave period v / 2ℓ for the 330 mm cable
        let period = 1.0 / (2.0 * long);
        assert!((period - 321.2e6).abs() < 1e6, "{period}");
    }
}
