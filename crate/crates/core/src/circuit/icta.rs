//! Builder for the impedance-transformed amplifier embedding.
//!
//! ```text
//!  rf ──[cable]── plane ──[λ/4]── inv ──Cs── mid ──Ls── jj ──Lp── bias ── DC port
//!                                                         │           │
//!                                                     Cp (+Cj)      Cdec
//!                                                         │           │
//!                                                        gnd         gnd
//! ```
//!
//! The junction port sits at `jj`. The bias inductor doubles as the
//! inductor of the parallel resonator; the decoupling capacitor grounds the
//! bias node at RF.

use serde::{Deserialize, Serialize};

use crate::circuit::{Element, LineLength, Netlist};
use crate::frankenstein::PortKind;
use crate::Result;

pub const NODE_RF: &str = "rf";
pub const NODE_JUNCTION: &str = "jj";
pub const NODE_BIAS: &str = "bias";
const NODE_DC: &str = "dc";

/// Series cable between the wave port and the amplifier reference plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cable {
    /// Physical length [m].
    pub length: f64,
    /// Relative phase velocity.
    pub velocity_factor: f64,
    /// Characteristic impedance [Ω].
    pub impedance: f64,
}

impl Cable {
    /// 330 mm at 1/√2 relative phase velocity, 55 Ω.
    pub fn semi_rigid_330mm() -> Self {
        Cable {
            length: 0.330,
            velocity_factor: std::f64::consts::FRAC_1_SQRT_2,
            impedance: 55.0,
        }
    }

    /// 100 mm, otherwise as [`Cable::semi_rigid_330mm`].
    pub fn semi_rigid_100mm() -> Self {
        Cable {
            length: 0.100,
            ..Self::semi_rigid_330mm()
        }
    }

    pub fn element(&self) -> Element {
        Element::TransmissionLine {
            impedance: self.impedance,
            length: LineLength::Physical {
                length: self.length,
                velocity_factor: self.velocity_factor,
            },
        }
    }

    /// One-way electrical delay [s].
    pub fn delay(&self) -> f64 {
        LineLength::Physical {
            length: self.length,
            velocity_factor: self.velocity_factor,
        }
        .delay()
    }
}

/// Flat resistive output impedance of the DC bias filter, rolled off above
/// `cutoff` by a shunt capacitor on the bias node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasFilter {
    pub resistance: f64,
    pub cutoff: f64,
}

impl Default for BiasFilter {
    fn default() -> Self {
        BiasFilter {
            resistance: 5.0,
            cutoff: 1e9,
        }
    }
}

/// Component values of the embedding. `Default` is the fabricated design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IctaParams {
    /// Parallel resonator (and bias-tee) inductance [H].
    pub lp: f64,
    /// Parallel resonator capacitance [F].
    pub cp: f64,
    /// Series resonator inductance [H].
    pub ls: f64,
    /// Series resonator capacitance [F].
    pub cs: f64,
    /// Quarter-wave inverter characteristic impedance [Ω].
    pub inverter_impedance: f64,
    /// Quarter-wave inverter design frequency [Hz].
    pub inverter_frequency: f64,
    /// Wave port impedance [Ω].
    pub port_impedance: f64,
    /// On-chip RF decoupling capacitor on the bias node [F].
    pub decoupling_capacitance: f64,
    /// Junction parasitic capacitance [F]; zero omits the element.
    pub junction_capacitance: f64,
    pub cable: Option<Cable>,
    pub bias_filter: Option<BiasFilter>,
}

impl Default for IctaParams {
    fn default() -> Self {
        IctaParams {
            lp: 1.38e-9,
            cp: 530e-15,
            ls: 1.94e-9,
            cs: 373e-15,
            inverter_impedance: 58.8,
            inverter_frequency: 5.88e9,
            port_impedance: 50.0,
            decoupling_capacitance: 20e-12,
            junction_capacitance: 0.0,
            cable: None,
            bias_filter: None,
        }
    }
}

pub fn build_icta(params: &IctaParams) -> Result<Netlist> {
    let mut b = Netlist::builder();
    let plane = if let Some(cable) = &params.cable {
        b = b.series("cable", NODE_RF, "plane", cable.element());
        "plane"
    } else {
        NODE_RF
    };
    b = b
        .series(
            "inverter",
            plane,
            "inv",
            Element::TransmissionLine {
                impedance: params.inverter_impedance,
                length: LineLength::QuarterWave {
                    frequency: params.inverter_frequency,
                },
            },
        )
        .series("cs", "inv", "mid", Element::SeriesCapacitor(params.cs))
        .series(
            "ls",
            "mid",
            NODE_JUNCTION,
            Element::SeriesInductor(params.ls),
        )
        .shunt("cp", NODE_JUNCTION, Element::ShuntCapacitor(params.cp));
    if params.junction_capacitance > 0.0 {
        b = b.shunt(
            "cj",
            NODE_JUNCTION,
            Element::ShuntCapacitor(params.junction_capacitance),
        );
    }
    b = b
        .series(
            "lp",
            NODE_JUNCTION,
            NODE_BIAS,
            Element::SeriesInductor(params.lp),
        )
        .shunt(
            "cdec",
            NODE_BIAS,
            Element::ShuntCapacitor(params.decoupling_capacitance),
        );
    let dc_node = if let Some(filter) = &params.bias_filter {
        let c_filter = 1.0 / (2.0 * std::f64::consts::PI * filter.cutoff * filter.resistance);
        b = b
            .series(
                "rbias",
                NODE_DC,
                NODE_BIAS,
                Element::SeriesResistor(filter.resistance),
            )
            .shunt("cfilt", NODE_DC, Element::ShuntCapacitor(c_filter));
        NODE_DC
    } else {
        NODE_BIAS
    };
    b.port(
        "rf",
        NODE_RF,
        PortKind::Wave {
            impedance: params.port_impedance,
        },
    )
    .port("jj", NODE_JUNCTION, PortKind::CurrentBias)
    .port("dc", dc_node, PortKind::VoltageBias)
    .build()
}
