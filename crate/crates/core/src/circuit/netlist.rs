use std::collections::{BTreeMap, BTreeSet};

use crate::circuit::Element;
use crate::frankenstein::PortKind;
use crate::{Error, Result};

/// Node names treated as the common reference.
pub const GROUND_NAMES: [&str; 3] = ["gnd", "0", "ground"];

pub fn is_ground(node: &str) -> bool {
    GROUND_NAMES.contains(&node)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Connection {
    /// Element from `node` to ground.
    Shunt(String),
    /// Element between two nodes (transmission lines share the ground return).
    Between(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placed {
    pub name: String,
    pub element: Element,
    pub connection: Connection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    pub node: String,
    pub kind: PortKind,
}

/// Linear embedding circuit: placed elements plus boundary-condition ports.
///
/// Each port is referenced to ground. Construction through
/// [`NetlistBuilder::build`] validates element values, port names and
/// connectivity; amplifier-specific requirements (one junction port, one DC
/// bias port, at least one wave port) are checked by
/// [`Netlist::validate_amplifier`].
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    elements: Vec<Placed>,
    ports: Vec<Port>,
}

#[derive(Debug, Default, Clone)]
pub struct NetlistBuilder {
    elements: Vec<Placed>,
    ports: Vec<Port>,
}

impl NetlistBuilder {
    pub fn series(mut self, name: &str, from: &str, to: &str, element: Element) -> Self {
        self.elements.push(Placed {
            name: name.into(),
            element,
            connection: Connection::Between(from.into(), to.into()),
        });
        self
    }

    pub fn shunt(mut self, name: &str, node: &str, element: Element) -> Self {
        self.elements.push(Placed {
            name: name.into(),
            element,
            connection: Connection::Shunt(node.into()),
        });
        self
    }

    pub fn place(mut self, placed: Placed) -> Self {
        self.elements.push(placed);
        self
    }

    pub fn port(mut self, name: &str, node: &str, kind: PortKind) -> Self {
        self.ports.push(Port {
            name: name.into(),
            node: node.into(),
            kind,
        });
        self
    }

    pub fn build(self) -> Result<Netlist> {
        let net = Netlist {
            elements: self.elements,
            ports: self.ports,
        };
        net.validate()?;
        Ok(net)
    }
}

impl Netlist {
    pub fn builder() -> NetlistBuilder {
        NetlistBuilder::default()
    }

    pub fn from_parts(elements: Vec<Placed>, ports: Vec<Port>) -> Result<Self> {
        let net = Netlist { elements, ports };
        net.validate()?;
        Ok(net)
    }

    pub fn elements(&self) -> &[Placed] {
        &self.elements
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn port_kinds(&self) -> Vec<PortKind> {
        self.ports.iter().map(|p| p.kind).collect()
    }

    pub fn port_index(&self, name: &str) -> Option<usize> {
        self.ports.iter().position(|p| p.name == name)
    }

    /// Index of the unique current-bias port, where the junction attaches.
    pub fn junction_port(&self) -> Result<usize> {
        let found: Vec<usize> = self
            .ports
            .iter()
            .enumerate()
            .filter(|(_, p)| p.kind == PortKind::CurrentBias)
            .map(|(i, _)| i)
            .collect();
        match found.as_slice() {
            [j] => Ok(*j),
            [] => Err(Error::MissingJunction("no current-bias port".into())),
            _ => Err(Error::MissingJunction(format!(
                "{} current-bias ports, expected exactly one",
                found.len()
            ))),
        }
    }

    /// Index of the unique voltage-bias (DC supply) port, if any.
    pub fn dc_port(&self) -> Option<usize> {
        self.ports
            .iter()
            .position(|p| p.kind == PortKind::VoltageBias)
    }

    pub fn wave_ports(&self) -> Vec<usize> {
        self.ports
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.kind, PortKind::Wave { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_lossless(&self) -> bool {
        self.elements.iter().all(|p| p.element.is_lossless())
    }

    /// Non-ground node names in first-appearance order.
    pub fn nodes(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |n: &str| {
            if !is_ground(n) && seen.insert(n.to_string()) {
                out.push(n.to_string());
            }
        };
        for p in &self.elements {
            match &p.connection {
                Connection::Shunt(n) => push(n),
                Connection::Between(a, b) => {
                    push(a);
                    push(b);
                }
            }
        }
        for p in &self.ports {
            push(&p.node);
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for p in &self.elements {
            p.element.validate(&p.name)?;
            if !names.insert(p.name.as_str()) {
                return Err(Error::InvalidNetlist(format!(
                    "duplicate element name `{}`",
                    p.name
                )));
            }
            match &p.connection {
                Connection::Shunt(n) => {
                    if !p.element.is_shunt() {
                        return Err(Error::InvalidNetlist(format!(
                            "`{}`: {} needs two nodes",
                            p.name,
                            p.element.kind_name()
                        )));
                    }
                    if is_ground(n) {
                        return Err(Error::InvalidNetlist(format!(
                            "`{}`: shunt element placed on ground",
                            p.name
                        )));
                    }
                }
                Connection::Between(a, b) => {
                    if p.element.is_shunt() {
                        return Err(Error::InvalidNetlist(format!(
                            "`{}`: {} takes a single node",
                            p.name,
                            p.element.kind_name()
                        )));
                    }
                    if a == b {
                        return Err(Error::InvalidNetlist(format!(
                            "`{}`: both terminals on node `{a}`",
                            p.name
                        )));
                    }
                }
            }
        }
        if self.ports.is_empty() {
            return Err(Error::InvalidNetlist("netlist has no ports".into()));
        }
        let mut port_names = BTreeSet::new();
        for p in &self.ports {
            p.kind.validate()?;
            if !port_names.insert(p.name.as_str()) {
                return Err(Error::InvalidNetlist(format!(
                    "duplicate port name `{}`",
                    p.name
                )));
            }
            if is_ground(&p.node) {
                return Err(Error::InvalidNetlist(format!(
                    "port `{}` placed on ground",
                    p.name
                )));
            }
        }
        self.check_connected()
    }

    /// Union-find over nodes; every port ties its node to ground.
    fn check_connected(&self) -> Result<()> {
        let nodes = self.nodes();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            index.insert(n.as_str(), i + 1);
        }
        let id = |n: &str| if is_ground(n) { 0 } else { index[n] };
        let mut parent: Vec<usize> = (0..=nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut union = |a: usize, b: usize| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        };
        for p in &self.elements {
            match &p.connection {
                Connection::Shunt(n) => union(id(n), 0),
                Connection::Between(a, b) => {
                    union(id(a), id(b));
                    if matches!(p.element, Element::TransmissionLine { .. }) {
                        union(id(a), 0);
                    }
                }
            }
        }
        for p in &self.ports {
            union(id(&p.node), 0);
        }
        let root = find(&mut parent, 0);
        for n in &nodes {
            if find(&mut parent, id(n)) != root {
                return Err(Error::InvalidNetlist(format!(
                    "node `{n}` is not connected to any port"
                )));
            }
        }
        Ok(())
    }

    /// Requirements of an amplifier embedding: exactly one junction port,
    /// exactly one DC bias port and at least one wave port.
    pub fn validate_amplifier(&self) -> Result<()> {
        self.junction_port()?;
        let dc = self
            .ports
            .iter()
            .filter(|p| p.kind == PortKind::VoltageBias)
            .count();
        if dc != 1 {
            return Err(Error::InvalidNetlist(format!(
                "expected exactly one voltage-bias port, found {dc}"
            )));
        }
        if self.wave_ports().is_empty() {
            return Err(Error::InvalidNetlist("no wave port".into()));
        }
        Ok(())
    }
}
