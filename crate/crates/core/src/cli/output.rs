//! Deterministic CSV tables.

use crate::cli::MapY;

/// Digits after the decimal point in scientific notation (12 significant).
pub const FLOAT_FORMAT_DIGITS: usize = 11;

/// Header plus rows of pre-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub struct RowBuilder<'a> {
    cells: &'a mut Vec<String>,
}

impl RowBuilder<'_> {
    pub fn float(self, v: f64) -> Self {
        self.cells.push(format!("{v:.FLOAT_FORMAT_DIGITS$e}"));
        self
    }

    pub fn opt(self, v: Option<f64>) -> Self {
        match v {
            Some(v) => self.float(v),
            None => self.empty(),
        }
    }

    pub fn int(self, v: usize) -> Self {
        self.cells.push(v.to_string());
        self
    }

    pub fn flag(self, v: bool) -> Self {
        self.cells.push(if v { "1" } else { "0" }.into());
        self
    }

    pub fn text(self, v: &str) -> Self {
        self.cells.push(v.into());
        self
    }

    pub fn empty(self) -> Self {
        self.cells.push(String::new());
        self
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self) -> RowBuilder<'_> {
        self.rows.push(Vec::with_capacity(self.columns.len()));
        RowBuilder {
            cells: self.rows.last_mut().expect("just pushed"),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            debug_assert_eq!(r.len(), self.columns.len());
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn map_column(axis: MapY) -> &'static str {
    match axis {
        MapY::FDc => "f_dc",
        MapY::Ic => "ic",
        MapY::PowerDbm => "power_dbm",
    }
}
