//! Structured-text netlist schema (TOML).
//!
//! ```toml
//! [[port]]
//! name = "rf"
//! node = "rf"
//! kind = "wave"          # wave | voltage-bias | current-bias
//! impedance = 50.0       # wave ports only
//!
//! [[element]]
//! name = "tl"
//! kind = "transmission-line"
//! from = "rf"
//! to = "b"
//! impedance = 58.8
//! quarter_wave_frequency = 5.88e9   # or: length = 0.33, velocity_factor = 0.7071
//!
//! [[element]]
//! name = "cp"
//! kind = "shunt-capacitor"
//! node = "jj"
//! capacitance = 530e-15
//! ```
//!
//! Series elements and lines use `from`/`to`, shunt elements use `node`.
//! Element order is preserved.

use serde::{Deserialize, Serialize};

use crate::circuit::{Connection, Element, LineLength, Netlist, Placed, Port};
use crate::frankenstein::PortKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortRecord {
    pub name: String,
    pub node: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impedance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementRecord {
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inductance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacitance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resistance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impedance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quarter_wave_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetlistFile {
    #[serde(default)]
    pub port: Vec<PortRecord>,
    #[serde(default)]
    pub element: Vec<ElementRecord>,
}

fn required(value: Option<f64>, field: &str, name: &str) -> Result<f64> {
    value.ok_or_else(|| Error::InvalidNetlist(format!("element `{name}` missing `{field}`")))
}

impl ElementRecord {
    fn to_placed(&self) -> Result<Placed> {
        let n = self.name.as_str();
        let element = match self.kind.as_str() {
            "series-inductor" => {
                Element::SeriesInductor(required(self.inductance, "inductance", n)?)
            }
            "shunt-inductor" => Element::ShuntInductor(required(self.inductance, "inductance", n)?),
            "series-capacitor" => {
                Element::SeriesCapacitor(required(self.capacitance, "capacitance", n)?)
            }
            "shunt-capacitor" => {
                Element::ShuntCapacitor(required(self.capacitance, "capacitance", n)?)
            }
            "series-resistor" => {
                Element::SeriesResistor(required(self.resistance, "resistance", n)?)
            }
            "shunt-resistor" => Element::ShuntResistor(required(self.resistance, "resistance", n)?),
            "transmission-line" => {
                let length = match (
                    self.quarter_wave_frequency,
                    self.length,
                    self.velocity_factor,
                ) {
                    (Some(frequency), None, None) => LineLength::QuarterWave { frequency },
                    (None, Some(length), Some(velocity_factor)) => LineLength::Physical {
                        length,
                        velocity_factor,
                    },
                    _ => {
                        return Err(Error::InvalidElement {
                            name: n.into(),
                            reason: "transmission line needs exactly one of \
                                     `quarter_wave_frequency` or (`length` + `velocity_factor`)"
                                .into(),
                        })
                    }
                };
                Element::TransmissionLine {
                    impedance: required(self.impedance, "impedance", n)?,
                    length,
                }
            }
            other => {
                return Err(Error::InvalidNetlist(format!(
                    "element `{n}`: unknown kind `{other}`"
                )))
            }
        };
        let connection = if element.is_shunt() {
            match (&self.node, &self.from, &self.to) {
                (Some(node), None, None) => Connection::Shunt(node.clone()),
                _ => {
                    return Err(Error::InvalidNetlist(format!(
                        "shunt element `{n}` needs `node` only"
                    )))
                }
            }
        } else {
            match (&self.node, &self.from, &self.to) {
                (None, Some(a), Some(b)) => Connection::Between(a.clone(), b.clone()),
                _ => {
                    return Err(Error::InvalidNetlist(format!(
                        "element `{n}` needs `from` and `to`"
                    )))
                }
            }
        };
        Ok(Placed {
            name: self.name.clone(),
            element,
            connection,
        })
    }

    fn from_placed(p: &Placed) -> Self {
        let mut r = ElementRecord {
            name: p.name.clone(),
            kind: p.element.kind_name().to_string(),
            ..Default::default()
        };
        match &p.connection {
            Connection::Shunt(n) => r.node = Some(n.clone()),
            Connection::Between(a, b) => {
                r.from = Some(a.clone());
                r.to = Some(b.clone());
            }
        }
        match p.element {
            Element::SeriesInductor(v) | Element::ShuntInductor(v) => r.inductance = Some(v),
            Element::SeriesCapacitor(v) | Element::ShuntCapacitor(v) => r.capacitance = Some(v),
            Element::SeriesResistor(v) | Element::ShuntResistor(v) => r.resistance = Some(v),
            Element::TransmissionLine { impedance, length } => {
                r.impedance = Some(impedance);
                match length {
                    LineLength::QuarterWave { frequency } => {
                        r.quarter_wave_frequency = Some(frequency)
                    }
                    LineLength::Physical {
                        length,
                        velocity_factor,
                    } => {
                        r.length = Some(length);
                        r.velocity_factor = Some(velocity_factor);
                    }
                }
            }
        }
        r
    }
}

impl PortRecord {
    fn to_port(&self) -> Result<Port> {
        let kind = match (self.kind.as_str(), self.impedance) {
            ("wave", Some(impedance)) => PortKind::Wave { impedance },
            ("wave", None) => {
                return Err(Error::InvalidNetlist(format!(
                    "wave port `{}` needs `impedance`",
                    self.name
                )))
            }
            ("voltage-bias", None) => PortKind::VoltageBias,
            ("current-bias", None) => PortKind::CurrentBias,
            ("voltage-bias" | "current-bias", Some(_)) => {
                return Err(Error::InvalidNetlist(format!(
                    "bias port `{}` takes no `impedance`",
                    self.name
                )))
            }
            (other, _) => {
                return Err(Error::InvalidNetlist(format!(
                    "port `{}`: unknown kind `{other}`",
                    self.name
                )))
            }
        };
        Ok(Port {
            name: self.name.clone(),
            node: self.node.clone(),
            kind,
        })
    }

    fn from_port(p: &Port) -> Self {
        let (kind, impedance) = match p.kind {
            PortKind::Wave { impedance } => ("wave", Some(impedance)),
            PortKind::VoltageBias => ("voltage-bias", None),
            PortKind::CurrentBias => ("current-bias", None),
        };
        PortRecord {
            name: p.name.clone(),
            node: p.node.clone(),
            kind: kind.into(),
            impedance,
        }
    }
}

impl NetlistFile {
    pub fn to_netlist(&self) -> Result<Netlist> {
        let elements = self
            .element
            .iter()
            .map(ElementRecord::to_placed)
            .collect::<Result<Vec<_>>>()?;
        let ports = self
            .port
            .iter()
            .map(PortRecord::to_port)
            .collect::<Result<Vec<_>>>()?;
        Netlist::from_parts(elements, ports)
    }

    pub fn from_netlist(net: &Netlist) -> Self {
        NetlistFile {
            port: net.ports().iter().map(PortRecord::from_port).collect(),
            element: net
                .elements()
                .iter()
                .map(ElementRecord::from_placed)
                .collect(),
        }
    }
}

impl Netlist {
    pub fn from_toml_str(text: &str) -> Result<Netlist> {
        let file: NetlistFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.to_netlist()
    }

    /// Canonical text form; also the input to [`Netlist::content_hash`].
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&NetlistFile::from_netlist(self)).expect("netlist records serialize")
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_icta, IctaParams};

    #[test]
    fn text_round_trip_preserves_netlist() {
        let net = build_icta(&IctaParams {
            cable: Some(crate::circuit::Cable::semi_rigid_330mm()),
            ..Default::default()
        })
        .unwrap();
        let text = net.to_toml_string();
        let back = Netlist::from_toml_str(&text).unwrap();
        assert_eq!(net, back);
        assert_eq!(net.content_hash(), back.content_hash());
    }

    #[test]
    fn parses_documented_schema() {
        let text = r#"
            [[port]]
            name = "rf"
            node = "rf"
            kind = "wave"
            impedance = 50.0

            [[port]]
            name = "jj"
            node = "jj"
            kind = "current-bias"

            [[element]]
            name = "tl"
            kind = "transmission-line"
            from = "rf"
            to = "jj"
            impedance = 58.8
            quarter_wave_frequency = 5.88e9

            [[element]]
            name = "cp"
            kind = "shunt-capacitor"
            node = "jj"
            capacitance = 530e-15
        "#;
        let net = Netlist::from_toml_str(text).unwrap();
        assert_eq!(net.elements().len(), 2);
        assert_eq!(net.junction_port().unwrap(), 1);
    }

    #[test]
    fn line_needs_exactly_one_length_form() {
        let text = r#"
            [[port]]
            name = "rf"
            node = "a"
            kind = "wave"
            impedance = 50.0

            [[element]]
            name = "tl"
            kind = "transmission-line"
            from = "a"
            to = "b"
            impedance = 50.0
            quarter_wave_frequency = 5e9
            length = 0.1
            velocity_factor = 0.7
        "#;
        assert!(matches!(
            Netlist::from_toml_str(text),
            Err(Error::InvalidElement { .. })
        ));
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let text = "[[port]]\nname = \"rf\"\nnode = 3\n";
        let err = Netlist::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
