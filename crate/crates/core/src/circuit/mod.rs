//! Linear embedding networks.
//!
//! A [`Netlist`] places two-terminal elements and transmission lines between
//! named nodes and declares ports referenced to ground. Scattering matrices
//! are obtained by modified nodal analysis with every port terminated in the
//! reference impedance; [`z_jj`] evaluates the junction-port impedance with
//! each port closed by its ideal boundary condition instead.

mod element;
mod format;
mod grid;
mod icta;
mod mna;
mod netlist;

pub use element::{cascade, Abcd, Element, LineLength};
pub use format::{ElementRecord, NetlistFile, PortRecord};
pub use grid::FrequencyGrid;
pub use icta::{build_icta, BiasFilter, Cable, IctaParams, NODE_BIAS, NODE_JUNCTION, NODE_RF};
pub use netlist::{is_ground, Connection, Netlist, NetlistBuilder, Placed, Port};

pub(crate) use mna::{Mna, Termination};

use crate::frankenstein::PortKind;
use crate::linalg::CMatrix;
use crate::{Error, Result, C64};

/// ABCD matrix of a single element; see [`Element::abcd`].
pub fn abcd(element: &Element, f: f64) -> Result<Abcd> {
    element.abcd(f)
}

/// Voltage scattering matrix over all ports at `f`, every port referenced to
/// `reference_impedance` regardless of its kind.
pub fn s_matrix(net: &Netlist, f: f64, reference_impedance: f64) -> Result<CMatrix> {
    if !(reference_impedance.is_finite() && reference_impedance > 0.0) {
        return Err(Error::InvalidPort(format!(
            "reference impedance must be positive, got {reference_impedance}"
        )));
    }
    let terms = vec![Termination::Impedance(reference_impedance); net.ports().len()];
    let z = Mna::new(net).port_response(f, &terms)?;
    let n = z.nrows();
    Ok(z * C64::new(2.0 / reference_impedance, 0.0) - CMatrix::identity(n, n))
}

/// Each port closed by its ideal boundary condition: wave ports by their
/// impedance, voltage-bias ports shorted (stiff source), current-bias ports
/// open.
pub(crate) fn native_terminations(net: &Netlist) -> Vec<Termination> {
    net.ports()
        .iter()
        .map(|p| match p.kind {
            PortKind::Wave { impedance } => Termination::Impedance(impedance),
            PortKind::VoltageBias => Termination::Short,
            PortKind::CurrentBias => Termination::Open,
        })
        .collect()
}

/// Impedance seen from the junction port at a single frequency.
pub fn z_jj_at(net: &Netlist, f: f64) -> Result<C64> {
    let j = net.junction_port()?;
    let z = Mna::new(net).port_response(f, &native_terminations(net))?;
    Ok(z[(j, j)])
}

/// Impedance looking into the linear circuit from the junction port at each
/// grid frequency.
pub fn z_jj(net: &Netlist, grid: &FrequencyGrid) -> Result<Vec<C64>> {
    let j = net.junction_port()?;
    let mna = Mna::new(net);
    let terms = native_terminations(net);
    grid.frequencies()
        .map(|f| mna.port_response(f, &terms).map(|z| z[(j, j)]))
        .collect()
}

/// `Re Z_JJ(f) / f` at the positive grid frequencies, as `(f, value)` pairs.
pub fn emission_fom(net: &Netlist, grid: &FrequencyGrid) -> Result<Vec<(f64, f64)>> {
    let z = z_jj(net, grid)?;
    Ok(emission_fom_from(grid, &z))
}

pub fn emission_fom_from(grid: &FrequencyGrid, z: &[C64]) -> Vec<(f64, f64)> {
    grid.frequencies()
        .zip(z)
        .skip(1)
        .map(|(f, z)| (f, z.re / f))
        .collect()
}
