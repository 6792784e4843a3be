//! Design export: a TOML header describing the dual-grid parameters,
//! followed by a `[domains]` marker and the rendered domain list, one
//! `length_nm,sign` pair per line.

use std::fmt::Write as _;

use serde::Deserialize;

use crate::dualgrid::{DualGridDesign, ReciprocalBasis};
use crate::error::{QpmError, Result};
use crate::grating::{Domain, DomainSequence, Sign};

pub const FORMAT_ID: &str = "qpm-design-v1";
const DOMAINS_MARKER: &str = "[domains]";

/// Parsed design file.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignExport {
    pub design: DualGridDesign,
    pub domains: DomainSequence,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    targets_per_m: Vec<f64>,
    basis_per_m: Vec<f64>,
    orders: Vec<Vec<i32>>,
    tile_lengths_um: Vec<f64>,
    duties: Vec<f64>,
    phases: Vec<f64>,
    total_length_mm: f64,
    domain_count: usize,
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

/// Serializes the design and its rendered domains.
pub fn write_design(design: &DualGridDesign, domains: &DomainSequence) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# dual-grid poling design");
    let _ = writeln!(out, "format = \"{FORMAT_ID}\"");
    let _ = writeln!(out, "targets_per_m = {}", list(&design.basis.targets));
    let _ = writeln!(out, "basis_per_m = {}", list(&design.basis.vectors));
    let rows: Vec<String> = design
        .basis
        .orders
        .iter()
        .map(|r| {
            format!(
                "[{}]",
                r.iter().map(i32::to_string).collect::<Vec<_>>().join(", ")
            )
        })
        .collect();
    let _ = writeln!(out, "orders = [{}]", rows.join(", "));
    let tiles_um: Vec<f64> = design.tile_lengths.iter().map(|a| a * 1e6).collect();
    let _ = writeln!(out, "tile_lengths_um = {}", list(&tiles_um));
    let _ = writeln!(out, "duties = {}", list(&design.duties));
    let _ = writeln!(out, "phases = {}", list(&design.phases));
    let _ = writeln!(out, "total_length_mm = {:?}", design.total_length * 1e3);
    let _ = writeln!(out, "domain_count = {}", domains.len());
    let _ = writeln!(out, "{DOMAINS_MARKER}");
    let _ = writeln!(out, "length_nm,sign");
    for d in domains.domains() {
        let _ = writeln!(out, "{:?},{}", d.length * 1e9, d.sign);
    }
    out
}

/// Parses a file produced by [`write_design`]. The domain list is taken as
/// the authoritative structure.
pub fn read_design(text: &str) -> Result<DesignExport> {
    let mut header = String::new();
    let mut lines = text.lines();
    let mut found = false;
    for line in lines.by_ref() {
        if line.trim() == DOMAINS_MARKER {
            found = true;
            break;
        }
        header.push_str(line);
        header.push('\n');
    }
    if !found {
        return Err(QpmError::Parse(format!(
            "design file lacks a `{DOMAINS_MARKER}` section"
        )));
    }
    let h: Header = toml::from_str(&header).map_err(|e| QpmError::Parse(e.to_string()))?;
    if h.format != FORMAT_ID {
        return Err(QpmError::Parse(format!(
            "unsupported design format `{}`",
            h.format
        )));
    }

    let mut domains = Vec::with_capacity(h.domain_count);
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("length")) {
            continue;
        }
        let (len, sign) = line
            .split_once(',')
            .ok_or_else(|| QpmError::Parse(format!("bad domain line `{line}`")))?;
        let length_nm: f64 = len
            .trim()
            .parse()
            .map_err(|_| QpmError::Parse(format!("bad domain length `{len}`")))?;
        let sign: i32 = sign
            .trim()
            .trim_start_matches('+')
            .parse()
            .map_err(|_| QpmError::Parse(format!("bad domain sign `{sign}`")))?;
        domains.push(Domain {
            length: length_nm * 1e-9,
            sign: Sign::from_i32(sign)?,
        });
    }
    if domains.len() != h.domain_count {
        return Err(QpmError::Parse(format!(
            "header announces {} domains, file lists {}",
            h.domain_count,
            domains.len()
        )));
    }
    let basis = ReciprocalBasis {
        vectors: h.basis_per_m,
        orders: h.orders,
        targets: h.targets_per_m,
    };
    basis.validate()?;
    let design = DualGridDesign::new(
        basis,
        h.tile_lengths_um.iter().map(|a| a * 1e-6).collect(),
        h.duties,
        h.total_length_mm * 1e-3,
    )?
    .with_phases(h.phases)?;
    Ok(DesignExport {
        design,
        domains: DomainSequence::new(domains)?,
    })
}
