//! Modified nodal analysis of a netlist at one frequency.
//!
//! Unknowns are the non-ground node voltages followed by branch currents for
//! inductors (so an inductor is an exact short at DC), transmission lines (two
//! currents each, stamped through their ABCD relation so a quarter-wave line
//! needs no special case) and shorted ports.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::circuit::netlist::{is_ground, Connection, Netlist};
use crate::circuit::Element;
use crate::linalg::{solve_with_condition, CMatrix};
use crate::{Error, Result, C64};

/// How a port is closed while the response of another port is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Termination {
    Impedance(f64),
    Short,
    Open,
}

/// Beyond this the system is treated as singular and re-evaluated through
/// its limit.
const SINGULAR_CONDITION: f64 = 1e14;
const LIMIT_OFFSET: f64 = 1e-9;

pub(crate) struct Mna<'a> {
    net: &'a Netlist,
    node_index: HashMap<&'a str, usize>,
    n_nodes: usize,
}

impl<'a> Mna<'a> {
    pub(crate) fn new(net: &'a Netlist) -> Self {
        let mut node_index = HashMap::new();
        let mut n = 0;
        let mut visit = |name: &'a str| {
            if !is_ground(name) && !node_index.contains_key(name) {
                node_index.insert(name, n);
                n += 1;
            }
        };
        for p in net.elements() {
            match &p.connection {
                Connection::Shunt(a) => visit(a),
                Connection::Between(a, b) => {
                    visit(a);
                    visit(b);
                }
            }
        }
        for p in net.ports() {
            visit(&p.node);
        }
        Mna {
            net,
            node_index,
            n_nodes: n,
        }
    }

    fn node(&self, name: &str) -> Option<usize> {
        if is_ground(name) {
            None
        } else {
            Some(self.node_index[name])
        }
    }

    fn unknowns(&self, terms: &[Termination]) -> usize {
        let branches: usize = self
            .net
            .elements()
            .iter()
            .map(|p| match p.element {
                Element::SeriesInductor(_) | Element::ShuntInductor(_) => 1,
                Element::TransmissionLine { .. } => 2,
                _ => 0,
            })
            .sum();
        let shorts = terms.iter().filter(|t| **t == Termination::Short).count();
        self.n_nodes + branches + shorts
    }

    fn assemble(&self, f: f64, terms: &[Termination]) -> Result<CMatrix> {
        let size = self.unknowns(terms);
        let mut a = CMatrix::zeros(size, size);
        let w = 2.0 * PI * f;
        let j = C64::i();
        let mut next = self.n_nodes;

        let admit = |a: &mut CMatrix, n1: Option<usize>, n2: Option<usize>, y: C64| {
            if let Some(p) = n1 {
                a[(p, p)] += y;
            }
            if let Some(q) = n2 {
                a[(q, q)] += y;
            }
            if let (Some(p), Some(q)) = (n1, n2) {
                a[(p, q)] -= y;
                a[(q, p)] -= y;
            }
        };

        for placed in self.net.elements() {
            let (n1, n2) = match &placed.connection {
                Connection::Shunt(x) => (self.node(x), None),
                Connection::Between(x, y) => (self.node(x), self.node(y)),
            };
            match placed.element {
                Element::SeriesCapacitor(c) | Element::ShuntCapacitor(c) => {
                    admit(&mut a, n1, n2, j * w * c)
                }
                Element::SeriesResistor(r) | Element::ShuntResistor(r) => {
                    admit(&mut a, n1, n2, C64::new(1.0 / r, 0.0))
                }
                Element::SeriesInductor(l) | Element::ShuntInductor(l) => {
                    let k = next;
                    next += 1;
                    // branch current k flows n1 -> n2 through the inductor
                    if let Some(p) = n1 {
                        a[(p, k)] += 1.0;
                        a[(k, p)] += 1.0;
                    }
                    if let Some(q) = n2 {
                        a[(q, k)] -= 1.0;
                        a[(k, q)] -= 1.0;
                    }
                    a[(k, k)] -= j * w * l;
                }
                Element::TransmissionLine { .. } => {
                    let m = placed.element.abcd(f)?;
                    let (i1, i2) = (next, next + 1);
                    next += 2;
                    // i1 leaves n1 into the line, i2 leaves the line into n2
                    if let Some(p) = n1 {
                        a[(p, i1)] += 1.0;
                        a[(i1, p)] += 1.0;
                    }
                    if let Some(q) = n2 {
                        a[(q, i2)] -= 1.0;
                        a[(i1, q)] -= m.a;
                        a[(i2, q)] -= m.c;
                    }
                    a[(i1, i2)] -= m.b;
                    a[(i2, i1)] += 1.0;
                    a[(i2, i2)] -= m.d;
                }
            }
        }

        for (port, term) in self.net.ports().iter().zip(terms) {
            let p = self.node(&port.node).expect("ports are never on ground");
            match *term {
                Termination::Impedance(z) => a[(p, p)] += C64::new(1.0 / z, 0.0),
                Termination::Short => {
                    let k = next;
                    next += 1;
                    a[(p, k)] += 1.0;
                    a[(k, p)] += 1.0;
                }
                Termination::Open => {}
            }
        }
        debug_assert_eq!(next, size);
        Ok(a)
    }

    fn try_port_response(&self, f: f64, terms: &[Termination]) -> Result<Option<CMatrix>> {
        let a = self.assemble(f, terms)?;
        let np = self.net.ports().len();
        let mut rhs = CMatrix::zeros(a.nrows(), np);
        for (col, port) in self.net.ports().iter().enumerate() {
            let p = self.node(&port.node).expect("ports are never on ground");
            rhs[(p, col)] = C64::new(1.0, 0.0);
        }
        let Some((x, cond)) = solve_with_condition(&a, &rhs) else {
            return Ok(None);
        };
        if cond > SINGULAR_CONDITION {
            return Ok(None);
        }
        let mut out = CMatrix::zeros(np, np);
        for (row, port) in self.net.ports().iter().enumerate() {
            let p = self.node(&port.node).expect("ports are never on ground");
            for col in 0..np {
                out[(row, col)] = x[(p, col)];
            }
        }
        Ok(Some(out))
    }

    /// Port voltages per unit current injected at each port, with every port
    /// closed by `terms`. Lossless resonances that make the system singular
    /// are evaluated as the mean of the two one-sided limits.
    pub(crate) fn port_response(&self, f: f64, terms: &[Termination]) -> Result<CMatrix> {
        if let Some(z) = self.try_port_response(f, terms)? {
            return Ok(z);
        }
        let (lo, hi) = if f > 0.0 {
            (f * (1.0 - LIMIT_OFFSET), f * (1.0 + LIMIT_OFFSET))
        } else {
            (1e-3, 2e-3)
        };
        match (
            self.try_port_response(lo, terms)?,
            self.try_port_response(hi, terms)?,
        ) {
            (Some(a), Some(b)) => Ok((a + b) * C64::new(0.5, 0.0)),
            _ => Err(Error::SingularCircuit { frequency: f }),
        }
    }
}
