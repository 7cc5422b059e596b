//! Generalized response matrix for mixed port boundary conditions.
//!
//! Every port carries an incoming and an outgoing quantity whose meaning
//! depends on its kind:
//!
//! | kind          | in        | out                      |
//! |---------------|-----------|--------------------------|
//! | wave (Z_i)    | wave [V]  | wave [V]                 |
//! | voltage-bias  | voltage   | current drawn from it    |
//! | current-bias  | current   | voltage across it        |
//!
//! `a_out = F a_in` with `F = (K + L S)(M + N S)⁻¹`, where `S` is the voltage
//! scattering matrix referenced to `Z₀` and `K, L, M, N` are diagonal.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{FrequencyGrid, Mna, Netlist, Termination};
use crate::linalg::{diag, solve_with_condition, CMatrix};
use crate::{Error, Result, C64};

/// Conversions whose `(M + N S)` is worse conditioned than this are refused.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PortKind {
    Wave { impedance: f64 },
    VoltageBias,
    CurrentBias,
}

/// Physical meaning of an incoming or outgoing port quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Wave,
    Voltage,
    Current,
}

impl Quantity {
    pub fn unit(self) -> &'static str {
        match self {
            Quantity::Wave | Quantity::Voltage => "V",
            Quantity::Current => "A",
        }
    }
}

/// Unit of a single entry `F_ij = out_i / in_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryUnit {
    Dimensionless,
    Ohm,
    Siemens,
}

impl EntryUnit {
    pub fn of(out: Quantity, input: Quantity) -> Self {
        match (out.unit(), input.unit()) {
            ("V", "A") => EntryUnit::Ohm,
            ("A", "V") => EntryUnit::Siemens,
            _ => EntryUnit::Dimensionless,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            EntryUnit::Dimensionless => "1",
            EntryUnit::Ohm => "V/A",
            EntryUnit::Siemens => "A/V",
        }
    }
}

/// A port quantity tagged with its meaning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tagged {
    pub value: C64,
    pub quantity: Quantity,
}

impl PortKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PortKind::Wave { impedance } if !(impedance.is_finite() && impedance > 0.0) => Err(
                Error::InvalidPort(format!("wave impedance must be positive, got {impedance}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn incoming(&self) -> Quantity {
        match self {
            PortKind::Wave { .. } => Quantity::Wave,
            PortKind::VoltageBias => Quantity::Voltage,
            PortKind::CurrentBias => Quantity::Current,
        }
    }

    pub fn outgoing(&self) -> Quantity {
        match self {
            PortKind::Wave { .. } => Quantity::Wave,
            PortKind::VoltageBias => Quantity::Current,
            PortKind::CurrentBias => Quantity::Voltage,
        }
    }

    fn klmn_entries(&self, z0: f64) -> [f64; 4] {
        match *self {
            PortKind::VoltageBias => [1.0 / z0, -1.0 / z0, 1.0, 1.0],
            PortKind::CurrentBias => [1.0, 1.0, 1.0 / z0, -1.0 / z0],
            PortKind::Wave { impedance } => {
                let r = impedance / z0;
                [
                    0.5 * (1.0 - r),
                    0.5 * (1.0 + r),
                    0.5 * (1.0 + r),
                    0.5 * (1.0 - r),
                ]
            }
        }
    }
}

/// Diagonal conversion matrices `(K, L, M, N)` for the given port kinds.
pub fn klmn(kinds: &[PortKind], z0: f64) -> Result<(CMatrix, CMatrix, CMatrix, CMatrix)> {
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(Error::InvalidPort(format!(
            "reference impedance must be positive, got {z0}"
        )));
    }
    let mut cols = [vec![], vec![], vec![], vec![]];
    for kind in kinds {
        kind.validate()?;
        for (col, v) in cols.iter_mut().zip(kind.klmn_entries(z0)) {
            col.push(C64::new(v, 0.0));
        }
    }
    let [k, l, m, n] = cols;
    Ok((diag(&k), diag(&l), diag(&m), diag(&n)))
}

/// `F` at one frequency: solves `(M + N S)ᵀ Fᵀ = (K + L S)ᵀ`.
fn convert_one(
    s: &CMatrix,
    (k, l, m, n): &(CMatrix, CMatrix, CMatrix, CMatrix),
    frequency: f64,
) -> Result<CMatrix> {
    let lhs = (m + n * s).transpose();
    let rhs = (k + l * s).transpose();
    match solve_with_condition(&lhs, &rhs) {
        Some((ft, cond)) if cond <= CONDITION_LIMIT => Ok(ft.transpose()),
        Some((_, cond)) => Err(Error::SingularConversion {
            frequency,
            condition: cond,
        }),
        None => Err(Error::SingularConversion {
            frequency,
            condition: f64::INFINITY,
        }),
    }
}

/// Sampled `F(f)` with the port-kind metadata needed to interpret it.
#[derive(Debug, Clone)]
pub struct FrankensteinMatrix {
    frequencies: Vec<f64>,
    matrices: Vec<CMatrix>,
    kinds: Vec<PortKind>,
    names: Vec<String>,
    reference_impedance: f64,
    grid: Option<FrequencyGrid>,
}

/// Converts per-frequency scattering matrices (all ports referenced to `z0`).
pub fn to_frankenstein(
    frequencies: &[f64],
    s: &[CMatrix],
    kinds: &[PortKind],
    z0: f64,
) -> Result<FrankensteinMatrix> {
    if frequencies.len() != s.len() {
        return Err(Error::GridMismatch(format!(
            "{} frequencies for {} matrices",
            frequencies.len(),
            s.len()
        )));
    }
    let n = kinds.len();
    if let Some(bad) = s.iter().find(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::InvalidPort(format!(
            "{}x{} scattering matrix for {n} ports",
            bad.nrows(),
            bad.ncols()
        )));
    }
    let conv = klmn(kinds, z0)?;
    let matrices = frequencies
        .par_iter()
        .zip(s)
        .map(|(&f, s)| convert_one(s, &conv, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrankensteinMatrix {
        frequencies: frequencies.to_vec(),
        matrices,
        kinds: kinds.to_vec(),
        names: (0..n).map(|i| format!("p{i}")).collect(),
        reference_impedance: z0,
        grid: None,
    })
}

/// Recovers `S = (F N − L)⁻¹ (K − F M)` from `F`.
pub fn from_frankenstein(fm: &FrankensteinMatrix) -> Result<Vec<CMatrix>> {
    let (k, l, m, n) = klmn(&fm.kinds, fm.reference_impedance)?;
    fm.frequencies
        .iter()
        .zip(&fm.matrices)
        .map(|(&f, fmat)| {
            let lhs = fmat * &n - &l;
            let rhs = &k - fmat * &m;
            solve_with_condition(&lhs, &rhs)
                .map(|(s, _)| s)
                .ok_or(Error::SingularConversion {
                    frequency: f,
                    condition: f64::INFINITY,
                })
        })
        .collect()
}

/// Samples `F` of `net` on every point of `grid`, going through `S` at `z0`.
pub fn sample(net: &Netlist, grid: &FrequencyGrid, z0: f64) -> Result<FrankensteinMatrix> {
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(Error::InvalidPort(format!(
            "reference impedance must be positive, got {z0}"
        )));
    }
    let mna = Mna::new(net);
    let np = net.ports().len();
    let terms = vec![Termination::Impedance(z0); np];
    let freqs: Vec<f64> = grid.frequencies().collect();
    let s = freqs
        .par_iter()
        .map(|&f| {
            mna.port_response(f, &terms)
                .map(|z| z * C64::new(2.0 / z0, 0.0) - CMatrix::identity(np, np))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fm = to_frankenstein(&freqs, &s, &net.port_kinds(), z0)?;
    fm.names = net.ports().iter().map(|p| p.name.clone()).collect();
    fm.grid = Some(*grid);
    Ok(fm)
}

impl FrankensteinMatrix {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn at(&self, index: usize) -> &CMatrix {
        &self.matrices[index]
    }

    pub fn kinds(&self) -> &[PortKind] {
        &self.kinds
    }

    pub fn port_names(&self) -> &[String] {
        &self.names
    }

    pub fn reference_impedance(&self) -> f64 {
        self.reference_impedance
    }

    /// Grid the matrix was sampled on, when built by [`sample`].
    pub fn grid(&self) -> Option<&FrequencyGrid> {
        self.grid.as_ref()
    }

    pub fn unit(&self, i: usize, j: usize) -> EntryUnit {
        EntryUnit::of(self.kinds[i].outgoing(), self.kinds[j].incoming())
    }

    /// Applies `F` at frequency index `index` to tagged inputs, checking that
    /// every input has the quantity its port expects.
    pub fn apply(&self, index: usize, a_in: &[Tagged]) -> Result<Vec<Tagged>> {
        if a_in.len() != self.kinds.len() {
            return Err(Error::InvalidPort(format!(
                "{} inputs for {} ports",
                a_in.len(),
                self.kinds.len()
            )));
        }
        for (i, (t, kind)) in a_in.iter().zip(&self.kinds).enumerate() {
            if t.quantity != kind.incoming() {
                return Err(Error::InvalidPort(format!(
                    "port `{}` expects {:?} input, got {:?}",
                    self.names[i],
                    kind.incoming(),
                    t.quantity
                )));
            }
        }
        let f = &self.matrices[index];
        Ok(self
            .kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| Tagged {
                value: (0..a_in.len()).map(|j| f[(i, j)] * a_in[j].value).sum(),
                quantity: kind.outgoing(),
            })
            .collect())
    }

    /// Row and column data of the junction port used by the solver.
    pub fn junction_row(&self) -> Result<JunctionRow> {
        let junction = self
            .kinds
            .iter()
            .position(|k| *k == PortKind::CurrentBias)
            .ok_or_else(|| Error::MissingJunction("no current-bias port".into()))?;
        if self
            .kinds
            .iter()
            .filter(|k| **k == PortKind::CurrentBias)
            .count()
            > 1
        {
            return Err(Error::MissingJunction(
                "more than one current-bias port".into(),
            ));
        }
        let np = self.kinds.len();
        let mut self_impedance: Vec<C64> = self
            .matrices
            .iter()
            .map(|m| m[(junction, junction)])
            .collect();
        if self.frequencies.first() == Some(&0.0) {
            // stiff bias: the DC junction voltage is the source voltage alone
            self_impedance[0] = C64::new(0.0, 0.0);
        }
        let column = |i: usize, j: usize| self.matrices.iter().map(|m| m[(i, j)]).collect();
        Ok(JunctionRow {
            junction,
            self_impedance,
            from_port: (0..np).map(|i| column(junction, i)).collect(),
            to_port: (0..np).map(|i| column(i, junction)).collect(),
            kinds: self.kinds.clone(),
            grid: self.grid,
            points: self.frequencies.len(),
        })
    }

    /// Columnar text: frequency, then Re/Im of every entry in row-major order.
    pub fn write_columns<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.kinds.len();
        write!(w, "frequency_hz")?;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (&self.names[i], &self.names[j]);
                let u = self.unit(i, j).symbol();
                write!(w, ",re_F_{a}_{b}[{u}],im_F_{a}_{b}[{u}]")?;
            }
        }
        writeln!(w)?;
        for (f, m) in self.frequencies.iter().zip(&self.matrices) {
            write!(w, "{f:.11e}")?;
            for i in 0..n {
                for j in 0..n {
                    write!(w, ",{:.11e},{:.11e}", m[(i, j)].re, m[(i, j)].im)?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Junction-port slice of `F`: `V_J = Σ_i from_port[i] a_in_i + self_impedance I_J`
/// and `a_out_i = Σ_j F_ij a_in_j + to_port[i] I_J`.
#[derive(Debug, Clone)]
pub struct JunctionRow {
    pub junction: usize,
    /// `F_JJ` per frequency, zero at DC.
    pub self_impedance: Vec<C64>,
    /// `F_Ji` per port per frequency.
    pub from_port: Vec<Vec<C64>>,
    /// `F_iJ` per port per frequency.
    pub to_port: Vec<Vec<C64>>,
    pub kinds: Vec<PortKind>,
    pub grid: Option<FrequencyGrid>,
    pub points: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_icta, s_matrix, z_jj, Element, IctaParams};

    const Z0: f64 = 50.0;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn one_by_one(s: C64) -> CMatrix {
        CMatrix::from_element(1, 1, s)
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn table_entries() {
        let (k, l, m, n) = klmn(&[PortKind::Wave { impedance: Z0 }], Z0).unwrap();
        assert_eq!(
            (k[(0, 0)], l[(0, 0)], m[(0, 0)], n[(0, 0)]),
            (c(0.0), c(1.0), c(1.0), c(0.0))
        );
        let (k, l, m, n) = klmn(&[PortKind::VoltageBias], Z0).unwrap();
        assert_eq!(
            (k[(0, 0)], l[(0, 0)], m[(0, 0)], n[(0, 0)]),
            (c(0.02), c(-0.02), c(1.0), c(1.0))
        );
        let (k, l, m, n) = klmn(&[PortKind::CurrentBias], Z0).unwrap();
        assert_eq!(
            (k[(0, 0)], l[(0, 0)], m[(0, 0)], n[(0, 0)]),
            (c(1.0), c(1.0), c(0.02), c(-0.02))
        );
        assert!(klmn(&[PortKind::Wave { impedance: 0.0 }], Z0).is_err());
        assert!(klmn(&[PortKind::VoltageBias], -1.0).is_err());
    }

    #[test]
    fn matched_wave_ports_give_s() {
        let s = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.1, 0.3),
                C64::new(0.5, -0.2),
                C64::new(0.5, -0.2),
                C64::new(-0.4, 0.1),
            ],
        );
        let kinds = [PortKind::Wave { impedance: Z0 }; 2];
        let fm = to_frankenstein(&[1e9], std::slice::from_ref(&s), &kinds, Z0).unwrap();
        assert!((fm.at(0) - s).norm() < 1e-15);
    }

    #[test]
    fn resistor_closed_forms() {
        for r in [1.0, 17.0, 50.0, 330.0, 1e4] {
            let s = c((r - Z0) / (r + Z0));
            let v =
                to_frankenstein(&[0.0], &[one_by_one(s)], &[PortKind::VoltageBias], Z0).unwrap();
            assert!(rel(v.at(0)[(0, 0)], c(1.0 / r)) < 1e-12);
            let i =
                to_frankenstein(&[0.0], &[one_by_one(s)], &[PortKind::CurrentBias], Z0).unwrap();
            assert!(rel(i.at(0)[(0, 0)], c(r)) < 1e-12);
            assert!(rel(i.at(0)[(0, 0)], (1.0 + s) / (1.0 - s) * Z0) < 1e-12);
        }
    }

    #[test]
    fn open_seen_from_current_bias_is_singular() {
        let err = to_frankenstein(&[4e9], &[one_by_one(c(1.0))], &[PortKind::CurrentBias], Z0);
        assert!(
            matches!(err, Err(Error::SingularConversion { frequency, .. }) if frequency == 4e9)
        );
    }

    #[test]
    fn icta_junction_entry_matches_z_jj_and_is_reference_independent() {
        let net = build_icta(&IctaParams::default()).unwrap();
        let grid = FrequencyGrid::new(50e6, 512).unwrap();
        let f50 = sample(&net, &grid, 50.0).unwrap();
        let f75 = sample(&net, &grid, 75.0).unwrap();
        let z = z_jj(&net, &grid).unwrap();
        let j = net.junction_port().unwrap();
        for (k, z) in z.iter().enumerate().skip(1) {
            assert!(rel(f50.at(k)[(j, j)], *z) < 1e-9, "k={k}");
            let d = (f50.at(k) - f75.at(k)).norm() / f50.at(k).norm();
            assert!(d < 1e-10, "k={k}: {d}");
        }
        let row = f50.junction_row().unwrap();
        assert_eq!(row.self_impedance[0], c(0.0));
        assert_eq!(row.junction, j);
    }

    #[test]
    fn round_trip_recovers_s() {
        let net = build_icta(&IctaParams {
            junction_capacitance: 10e-15,
            ..Default::default()
        })
        .unwrap();
        let grid = FrequencyGrid::new(100e6, 256).unwrap();
        let fm = sample(&net, &grid, Z0).unwrap();
        let back = from_frankenstein(&fm).unwrap();
        for (k, f) in grid.frequencies().enumerate() {
            let s = s_matrix(&net, f, Z0).unwrap();
            assert!((&back[k] - &s).norm() < 1e-10, "f={f}");
        }
    }

    #[test]
    fn through_connection_junction_sees_port_impedance() {
        let net = Netlist::builder()
            .port("rf", "x", PortKind::Wave { impedance: 50.0 })
            .port("jj", "x", PortKind::CurrentBias)
            .build()
            .unwrap();
        let grid = FrequencyGrid::new(1e9, 16).unwrap();
        let row = sample(&net, &grid, 75.0).unwrap().junction_row().unwrap();
        for z in &row.self_impedance[1..] {
            assert!(rel(*z, c(50.0)) < 1e-12);
        }
    }

    #[test]
    fn reactive_one_ports_follow_closed_forms() {
        let f = 3.3e9;
        let w = 2.0 * std::f64::consts::PI * f;
        for (el, z) in [
            (Element::ShuntInductor(2e-9), C64::new(0.0, w * 2e-9)),
            (
                Element::ShuntCapacitor(1e-12),
                C64::new(0.0, -1.0 / (w * 1e-12)),
            ),
            (Element::ShuntResistor(120.0), c(120.0)),
        ] {
            for kind in [
                PortKind::VoltageBias,
                PortKind::CurrentBias,
                PortKind::Wave { impedance: 30.0 },
            ] {
                let net = Netlist::builder()
                    .shunt("x", "n", el)
                    .port("p", "n", kind)
                    .build()
                    .unwrap();
                let s = s_matrix(&net, f, Z0).unwrap();
                let got = to_frankenstein(&[f], &[s], &[kind], Z0).unwrap().at(0)[(0, 0)];
                let expect = match kind {
                    PortKind::VoltageBias => 1.0 / z,
                    PortKind::CurrentBias => z,
                    PortKind::Wave { impedance } => (z - impedance) / (z + impedance),
                };
                assert!(
                    rel(got, expect) < 1e-10,
                    "{el:?} {kind:?}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn units_follow_port_contract() {
        let net = build_icta(&IctaParams::default()).unwrap();
        let grid = FrequencyGrid::new(1e9, 16).unwrap();
        let fm = sample(&net, &grid, Z0).unwrap();
        let (rf, jj, dc) = (0, 1, 2);
        assert_eq!(fm.unit(rf, rf), EntryUnit::Dimensionless);
        assert_eq!(fm.unit(jj, jj), EntryUnit::Ohm);
        assert_eq!(fm.unit(dc, dc), EntryUnit::Siemens);
        assert_eq!(fm.unit(rf, jj), EntryUnit::Ohm);
        assert_eq!(fm.unit(dc, rf), EntryUnit::Siemens);
        let a_in = [
            Tagged {
                value: c(1e-6),
                quantity: Quantity::Wave,
            },
            Tagged {
                value: c(1e-9),
                quantity: Quantity::Current,
            },
            Tagged {
                value: c(0.0),
                quantity: Quantity::Voltage,
            },
        ];
        let out = fm.apply(6, &a_in).unwrap();
        let q: Vec<_> = out.iter().map(|t| t.quantity).collect();
        assert_eq!(q, [Quantity::Wave, Quantity::Voltage, Quantity::Current]);
        let mut wrong = a_in;
        wrong[1].quantity = Quantity::Voltage;
        assert!(fm.apply(6, &wrong).is_err());
    }

    #[test]
    fn column_export_has_header_and_rows() {
        let net = build_icta(&IctaParams::default()).unwrap();
        let grid = FrequencyGrid::new(1e9, 4).unwrap();
        let mut buf = Vec::new();
        sample(&net, &grid, Z0)
            .unwrap()
            .write_columns(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0].split(',').count(), 1 + 2 * 9);
        assert!(lines[0].contains("re_F_jj_jj[V/A]"));
    }
}
