//! Crystal description files.
//!
//! A crystal file lists lengthwise sections from the input facet. At most
//! one section is split into parallel `channels`; every other section spans
//! the full width and is shared by all channels.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qpm_core::design_file::read_design;
use qpm_core::dualgrid::{solve_basis, BasisConvention, DualGridDesign};
use qpm_core::{
    Channel, CouplingSet, MultigratingCrystal, PeriodicGrating, Process, QpmError, Sign, Structure,
};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dimensions {
    length_mm: f64,
    width_mm: f64,
    thickness_mm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Couplings {
    d33_pm_per_v: f64,
    d32_pm_per_v: f64,
    d24_pm_per_v: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SectionSpec {
    Periodic {
        length_mm: f64,
        period_um: f64,
        #[serde(default = "half")]
        duty: f64,
        #[serde(default)]
        phase_offset: f64,
        process: Option<String>,
    },
    Uniform {
        length_mm: f64,
        #[serde(default = "plus")]
        sign: i32,
    },
    Dualgrid {
        length_mm: f64,
        design: Option<PathBuf>,
        targets_per_m: Option<Vec<f64>>,
        processes: Option<Vec<String>>,
        basis: Option<String>,
        #[serde(default = "one")]
        max_order: u32,
        split: Option<Vec<f64>>,
        duties: Option<Vec<f64>>,
        phases: Option<Vec<f64>>,
    },
    Channels {
        length_mm: f64,
        channels: Vec<ChannelSpec>,
    },
}

#[derive(Debug, Deserialize)]
struct ChannelSpec {
    name: String,
    width_mm: f64,
    #[serde(flatten)]
    section: SectionSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrystalFile {
    name: String,
    coeff_set: Option<String>,
    expansion_set: Option<String>,
    dimensions: Dimensions,
    couplings: Option<Couplings>,
    sections: Vec<SectionSpec>,
}

fn half() -> f64 {
    0.5
}
fn plus() -> i32 {
    1
}
fn one() -> u32 {
    1
}

/// Process a structure was built to phasematch, and the grating frequency
/// it uses for it.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignTarget {
    pub process: Option<Process>,
    pub k: f64,
}

/// Ingested crystal description.
#[derive(Debug, Clone)]
pub struct CrystalSpec {
    pub name: String,
    pub coeff_set: Option<String>,
    pub expansion_set: Option<String>,
    pub couplings: CouplingSet,
    pub crystal: MultigratingCrystal,
    /// Design targets per channel, in section order.
    pub targets: Vec<Vec<DesignTarget>>,
}

fn parse_processes(labels: &Option<Vec<String>>, n: usize) -> anyhow::Result<Vec<Option<Process>>> {
    match labels {
        None => Ok(vec![None; n]),
        Some(v) => {
            if v.len() != n {
                bail!("{} process labels for {} targets", v.len(), n);
            }
            v.iter().map(|s| Ok(Some(s.parse::<Process>()?))).collect()
        }
    }
}

fn build_section(
    spec: &SectionSpec,
    base: &Path,
) -> anyhow::Result<(Structure, Vec<DesignTarget>)> {
    match spec {
        SectionSpec::Periodic {
            length_mm,
            period_um,
            duty,
            phase_offset,
            process,
        } => {
            let g = PeriodicGrating::new(period_um * 1e-6, *duty, length_mm * 1e-3)?
                .with_offset(*phase_offset)?;
            let process = process.as_deref().map(str::parse::<Process>).transpose()?;
            let k = g.wavevector();
            Ok((Structure::Periodic(g), vec![DesignTarget { process, k }]))
        }
        SectionSpec::Uniform { length_mm, sign } => Ok((
            Structure::Uniform {
                length: length_mm * 1e-3,
                sign: Sign::from_i32(*sign)?,
            },
            vec![],
        )),
        SectionSpec::Dualgrid {
            length_mm,
            design,
            targets_per_m,
            processes,
            basis,
            max_order,
            split,
            duties,
            phases,
        } => {
            let length = length_mm * 1e-3;
            if let Some(path) = design {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading design file {}", path.display()))?;
                let export = read_design(&text)?;
                let total = export.domains.total_length();
                if (total - length).abs() > 1e-9 * length {
                    bail!(
                        "design file {} is {:.6} mm long, section is {:.6} mm",
                        path.display(),
                        total * 1e3,
                        length_mm
                    );
                }
                let labels = parse_processes(processes, export.design.basis.targets.len())?;
                let targets = export
                    .design
                    .basis
                    .targets
                    .iter()
                    .zip(labels)
                    .map(|(k, process)| DesignTarget { process, k: *k })
                    .collect();
                return Ok((Structure::Domains(export.domains), targets));
            }
            let targets = targets_per_m
                .as_ref()
                .context("dualgrid section needs `targets_per_m` or `design`")?;
            let convention = match basis.as_deref() {
                Some("sum") => BasisConvention::SumAndSecond,
                Some("search") => BasisConvention::Search,
                None if targets.len() == 2 => BasisConvention::SumAndSecond,
                None => BasisConvention::Search,
                Some(other) => bail!("unknown basis convention `{other}` (use sum or search)"),
            };
            let b = solve_basis(targets, *max_order, convention)?;
            let d = b.dimension();
            let split = split.clone().context("dualgrid section needs `split`")?;
            let duties = duties.clone().unwrap_or_else(|| default_duties(d));
            let mut design = DualGridDesign::from_split(b, &split, duties, length)?;
            if let Some(ph) = phases {
                design = design.with_phases(ph.clone())?;
            }
            let labels = parse_processes(processes, targets.len())?;
            let t = targets
                .iter()
                .zip(labels)
                .map(|(k, process)| DesignTarget { process, k: *k })
                .collect();
            Ok((Structure::DualGrid(design), t))
        }
        SectionSpec::Channels { .. } => bail!("channel sections cannot be nested"),
    }
}

/// Tile duties used when none are given: one family at 50%, otherwise the
/// first family positive and the rest negative.
pub fn default_duties(families: usize) -> Vec<f64> {
    if families == 1 {
        vec![0.5]
    } else {
        let mut v = vec![0.0; families];
        v[0] = 1.0;
        v
    }
}

impl CrystalSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading crystal file {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> anyhow::Result<Self> {
        let file: CrystalFile = toml::from_str(text).map_err(|e| QpmError::Parse(e.to_string()))?;
        let dims = &file.dimensions;
        let couplings = match &file.couplings {
            Some(c) => CouplingSet::new(c.d33_pm_per_v, c.d32_pm_per_v, c.d24_pm_per_v)?,
            None => CouplingSet::ktp(),
        };

        let split_count = file
            .sections
            .iter()
            .filter(|s| matches!(s, SectionSpec::Channels { .. }))
            .count();
        if split_count > 1 {
            return Err(
                QpmError::Config("at most one section may be split into channels".into()).into(),
            );
        }

        // (name, width, sections, targets) per channel
        let mut paths: Vec<(String, f64, Vec<Structure>, Vec<DesignTarget>)> =
            match file.sections.iter().find_map(|s| match s {
                SectionSpec::Channels { channels, .. } => Some(channels),
                _ => None,
            }) {
                Some(chs) => chs
                    .iter()
                    .map(|c| (c.name.clone(), c.width_mm * 1e-3, Vec::new(), Vec::new()))
                    .collect(),
                None => vec![(
                    "main".to_string(),
                    dims.width_mm * 1e-3,
                    Vec::new(),
                    Vec::new(),
                )],
            };

        for section in &file.sections {
            match section {
                SectionSpec::Channels {
                    length_mm,
                    channels,
                } => {
                    for (path, ch) in paths.iter_mut().zip(channels) {
                        let (s, t) = build_section(&ch.section, base)
                            .with_context(|| format!("channel `{}`", ch.name))?;
                        if (s.length() - length_mm * 1e-3).abs() > 1e-9 * length_mm * 1e-3 {
                            return Err(QpmError::Config(format!(
                                "channel `{}` is {:.6} mm long inside a {length_mm} mm section",
                                ch.name,
                                s.length() * 1e3
                            ))
                            .into());
                        }
                        path.2.push(s);
                        path.3.extend(t);
                    }
                }
                other => {
                    let (s, t) = build_section(other, base)?;
                    for path in paths.iter_mut() {
                        path.2.push(s.clone());
                        path.3.extend(t.iter().cloned());
                    }
                }
            }
        }

        let mut targets = Vec::with_capacity(paths.len());
        let channels = paths
            .into_iter()
            .map(|(name, width, sections, t)| {
                targets.push(t);
                Channel {
                    name,
                    width,
                    sections,
                }
            })
            .collect();
        let crystal = MultigratingCrystal::new(
            (
                dims.length_mm * 1e-3,
                dims.width_mm * 1e-3,
                dims.thickness_mm * 1e-3,
            ),
            channels,
        )?;
        Ok(Self {
            name: file.name,
            coeff_set: file.coeff_set,
            expansion_set: file.expansion_set,
            couplings,
            crystal,
            targets,
        })
    }
}
