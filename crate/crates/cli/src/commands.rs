use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use qpm_core::design_file::{read_design, write_design};
use qpm_core::dualgrid::{
    build_tiling, optimize_design, solve_basis, BasisConvention, DualGridDesign, OptimizeOptions,
};
use qpm_core::mismatch::{
    calibrate_from_two_points, reference_calibration_points, CalibratedMismatch, Calibration,
    CalibrationPoint,
};
use qpm_core::shg::{
    fwhm, peak_over_mismatch, sweep, Fixed, DEFAULT_TEMP_STEP_C, DEFAULT_WAVELENGTH_STEP_M,
};
use qpm_core::{
    fourier_coefficient, qpm_period, CoefficientLibrary, CouplingSet, CrystalDispersion,
    DomainSequence, ExpansionModel, MismatchModel, PeriodicGrating, Process, QpmError, ShgSetup,
    SweepSpec, SweepVariable,
};

use crate::crystal::{default_duties, CrystalSpec, DesignTarget};
use crate::{BasisArg, Cli, Command, StructureArgs, VariableArg};

const NM: f64 = 1e-9;
const UM: f64 = 1e-6;
const MM: f64 = 1e-3;

/// Fundamental wavelength at which the calibrated type-II law is anchored.
const CALIBRATION_LAMBDA_M: f64 = 1560.0 * NM;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Mismatch {
            process,
            lambda_nm,
            temp_c,
            calibrated,
        } => cmd_mismatch(cli, (*process).into(), *lambda_nm, *temp_c, *calibrated),
        Command::Calibrate {
            points,
            at_c,
            rigid,
        } => cmd_calibrate(cli, points, *at_c, *rigid),
        Command::Design {
            targets,
            couplings,
            length_mm,
            split,
            duties,
            phases,
            basis,
            max_order,
            step,
        } => cmd_design(
            cli,
            DesignArgs {
                targets,
                couplings,
                length_mm: *length_mm,
                split,
                duties,
                phases,
                basis: *basis,
                max_order: *max_order,
                step: *step,
            },
        ),
        Command::Render { structure } => cmd_render(cli, structure),
        Command::Fourier { structure, k } => cmd_fourier(cli, structure, k),
        Command::Sweep {
            crystal,
            channel,
            process,
            variable,
            min,
            max,
            step,
            lambda_nm,
            temp_c,
            calibrated,
        } => cmd_sweep(
            cli,
            SweepArgs {
                crystal,
                channel: channel.as_deref(),
                process: (*process).into(),
                variable: *variable,
                min: *min,
                max: *max,
                step: *step,
                lambda_nm: *lambda_nm,
                temp_c: *temp_c,
                calibrated: *calibrated,
            },
        ),
        Command::Report {
            crystal,
            lambda_nm,
            t_min,
            t_max,
            calibrated,
        } => cmd_report(cli, crystal, *lambda_nm, *t_min, *t_max, *calibrated),
    }
}

fn emit(cli: &Cli, text: &str) -> anyhow::Result<()> {
    match &cli.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn config(msg: impl Into<String>) -> anyhow::Error {
    QpmError::Config(msg.into()).into()
}

fn library(cli: &Cli) -> anyhow::Result<CoefficientLibrary> {
    match &cli.coeff_file {
        None => Ok(CoefficientLibrary::bundled()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading coefficient file {}", path.display()))?;
            Ok(CoefficientLibrary::parse(&text)?)
        }
    }
}

/// Dispersion and expansion models, the command line overriding the crystal
/// file.
fn materials(
    cli: &Cli,
    crystal: Option<&CrystalSpec>,
) -> anyhow::Result<(CrystalDispersion, ExpansionModel)> {
    let lib = library(cli)?;
    let coeff = cli
        .coeff_set
        .as_deref()
        .or(crystal.and_then(|c| c.coeff_set.as_deref()))
        .unwrap_or("default");
    let expansion = cli
        .expansion_set
        .as_deref()
        .or(crystal.and_then(|c| c.expansion_set.as_deref()))
        .unwrap_or("ktp-x");
    Ok((lib.dispersion_set(coeff)?, lib.expansion_set(expansion)?))
}

fn calibrated_model(
    dispersion: CrystalDispersion,
    expansion: &ExpansionModel,
) -> anyhow::Result<CalibratedMismatch> {
    let (p1, p2) = reference_calibration_points();
    Ok(CalibratedMismatch {
        dispersion,
        process: Process::Yzy,
        calibration: calibrate_from_two_points(p1, p2, expansion)?,
        anchor_lambda_m: CALIBRATION_LAMBDA_M,
    })
}

fn mismatch_model(
    dispersion: CrystalDispersion,
    expansion: &ExpansionModel,
    calibrated: bool,
) -> anyhow::Result<Box<dyn MismatchModel>> {
    Ok(if calibrated {
        Box::new(calibrated_model(dispersion, expansion)?)
    } else {
        Box::new(dispersion)
    })
}

fn cmd_mismatch(
    cli: &Cli,
    process: Process,
    lambda_nm: f64,
    temp_c: f64,
    calibrated: bool,
) -> anyhow::Result<()> {
    let (dispersion, expansion) = materials(cli, None)?;
    let model = mismatch_model(dispersion, &expansion, calibrated)?;
    let dk = model.mismatch(process, lambda_nm * NM, temp_c)?;
    let period = qpm_period(dk, 1)?;
    let mut out = String::new();
    writeln!(out, "process = {process}")?;
    writeln!(out, "lambda_nm = {lambda_nm}")?;
    writeln!(out, "temp_C = {temp_c}")?;
    writeln!(out, "model = {}", model.describe())?;
    writeln!(out, "delta_k_per_m = {dk:.6e}")?;
    writeln!(out, "period_um = {:.4}", period / UM)?;
    emit(cli, &out)
}

fn parse_point(s: &str) -> anyhow::Result<CalibrationPoint> {
    let (t, dk) = s
        .split_once(':')
        .ok_or_else(|| config(format!("calibration point `{s}` is not T_C:dk_per_m")))?;
    let t: f64 = t
        .trim()
        .parse()
        .map_err(|_| config(format!("bad temperature in `{s}`")))?;
    let dk: f64 = dk
        .trim()
        .parse()
        .map_err(|_| config(format!("bad mismatch in `{s}`")))?;
    Ok(CalibrationPoint::new(t, dk)?)
}

fn cmd_calibrate(cli: &Cli, points: &[String], at_c: f64, rigid: bool) -> anyhow::Result<()> {
    let (p1, p2) = match points {
        [] => reference_calibration_points(),
        [a, b] => (parse_point(a)?, parse_point(b)?),
        _ => return Err(config("give exactly two --point values")),
    };
    let expansion = if rigid {
        ExpansionModel::rigid()
    } else {
        materials(cli, None)?.1
    };
    let cal: Calibration = calibrate_from_two_points(p1, p2, &expansion)?;
    let dk = cal.extrapolate(at_c);
    let mut out = String::new();
    writeln!(out, "expansion = {}", expansion.name)?;
    writeln!(out, "point1 = {} C, {:.6e} m^-1", p1.temp_c, p1.design_dk)?;
    writeln!(out, "point2 = {} C, {:.6e} m^-1", p2.temp_c, p2.design_dk)?;
    writeln!(out, "slope_per_m_per_K = {:.4}", cal.slope)?;
    writeln!(out, "anchor_delta_k_per_m = {:.6e}", cal.anchor_dk)?;
    writeln!(out, "temp_C = {at_c}")?;
    writeln!(out, "delta_k_per_m = {dk:.6e}")?;
    writeln!(out, "period_um = {:.4}", qpm_period(dk, 1)? / UM)?;
    emit(cli, &out)
}

struct DesignArgs<'a> {
    targets: &'a [f64],
    couplings: &'a [f64],
    length_mm: f64,
    split: &'a [f64],
    duties: &'a [f64],
    phases: &'a [f64],
    basis: Option<BasisArg>,
    max_order: u32,
    step: Option<f64>,
}

fn convention(arg: Option<BasisArg>, targets: usize) -> BasisConvention {
    match arg {
        Some(BasisArg::Sum) => BasisConvention::SumAndSecond,
        Some(BasisArg::Search) => BasisConvention::Search,
        None => OptimizeOptions::for_targets(targets).convention,
    }
}

fn cmd_design(cli: &Cli, a: DesignArgs<'_>) -> anyhow::Result<()> {
    let n = a.targets.len();
    let couplings = if a.couplings.is_empty() {
        vec![1.0; n]
    } else {
        a.couplings.to_vec()
    };
    if couplings.len() != n {
        return Err(config(format!(
            "{n} targets but {} couplings",
            couplings.len()
        )));
    }
    let length = a.length_mm * MM;
    let convention = convention(a.basis, n);
    let phases = (!a.phases.is_empty()).then(|| a.phases.to_vec());

    let (design, candidates) = if !a.split.is_empty() || n == 1 {
        let basis = solve_basis(a.targets, a.max_order, convention)?;
        let d = basis.dimension();
        let mut split = if a.split.is_empty() {
            vec![1.0]
        } else {
            a.split.to_vec()
        };
        if split.len() + 1 == d {
            split.push(1.0 - split.iter().sum::<f64>());
        }
        let duties = if a.duties.is_empty() {
            default_duties(d)
        } else {
            a.duties.to_vec()
        };
        let mut design = DualGridDesign::from_split(basis, &split, duties, length)?;
        if let Some(ph) = phases {
            design = design.with_phases(ph)?;
        }
        (design, None)
    } else {
        if !a.duties.is_empty() {
            return Err(config(
                "--duties needs --split; the optimizer chooses duties itself",
            ));
        }
        let mut options = OptimizeOptions::for_targets(n);
        options.convention = convention;
        options.max_order = a.max_order;
        options.phases = phases;
        if let Some(s) = a.step {
            options.split_step = s;
        }
        let opt = optimize_design(a.targets, &couplings, length, &options)?;
        (opt.design, Some(opt.candidates.len()))
    };
    let seq = build_tiling(&design)?;

    let mut report = String::new();
    writeln!(
        report,
        "targets_per_m = {}",
        join(a.targets.iter().map(|k| format!("{k:.6e}")))
    )?;
    writeln!(
        report,
        "basis_per_m = {}",
        join(design.basis.vectors.iter().map(|k| format!("{k:.6e}")))
    )?;
    for (k, row) in a.targets.iter().zip(&design.basis.orders) {
        writeln!(report, "orders[{k:.6e}] = {row:?}")?;
    }
    writeln!(
        report,
        "tile_lengths_um = {}",
        join(design.tile_lengths.iter().map(|t| format!("{:.4}", t / UM)))
    )?;
    writeln!(
        report,
        "duties = {}",
        join(design.duties.iter().map(|d| format!("{d}")))
    )?;
    writeln!(report, "duality_sum = {:.6}", design.duality_sum())?;
    writeln!(report, "length_mm = {}", a.length_mm)?;
    writeln!(report, "domain_count = {}", seq.len())?;
    if let Some(c) = candidates {
        writeln!(report, "candidates_evaluated = {c}")?;
    }
    let mut weighted = Vec::with_capacity(n);
    for (k, d) in a.targets.iter().zip(&couplings) {
        let g = fourier_coefficient(&seq, *k).norm();
        weighted.push((d * g).powi(2));
        writeln!(report, "abs_G[{k:.6e}] = {g:.12e}")?;
    }
    let hi = weighted.iter().cloned().fold(0.0, f64::max);
    let lo = weighted.iter().cloned().fold(f64::INFINITY, f64::min);
    if n > 1 && hi > 0.0 {
        writeln!(report, "balance_ratio = {:.4}", lo / hi)?;
    }

    match &cli.output {
        Some(path) => {
            std::fs::write(path, write_design(&design, &seq))
                .with_context(|| format!("writing {}", path.display()))?;
            writeln!(report, "design_file = {}", path.display())?;
            print!("{report}");
        }
        None => print!("{report}"),
    }
    Ok(())
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

/// A rendered structure and the spatial frequencies it was designed for.
struct Resolved {
    id: String,
    seq: DomainSequence,
    targets: Vec<DesignTarget>,
}

fn pick_channel<'a>(
    spec: &'a CrystalSpec,
    name: Option<&str>,
) -> anyhow::Result<Vec<(usize, &'a qpm_core::Channel)>> {
    let all: Vec<_> = spec.crystal.channels.iter().enumerate().collect();
    match name {
        None => Ok(all),
        Some(n) => all
            .into_iter()
            .find(|(_, c)| c.name == n)
            .map(|c| vec![c])
            .ok_or_else(|| config(format!("crystal `{}` has no channel `{n}`", spec.name))),
    }
}

fn resolve(s: &StructureArgs) -> anyhow::Result<Resolved> {
    if let Some(path) = &s.design {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading design file {}", path.display()))?;
        let export = read_design(&text)?;
        let targets = export
            .design
            .basis
            .targets
            .iter()
            .map(|k| DesignTarget {
                process: None,
                k: *k,
            })
            .collect();
        return Ok(Resolved {
            id: path.display().to_string(),
            seq: export.domains,
            targets,
        });
    }
    if let Some(path) = &s.crystal {
        let spec = CrystalSpec::load(path)?;
        let chosen = pick_channel(&spec, s.channel.as_deref())?;
        if chosen.len() != 1 {
            return Err(config(format!(
                "crystal `{}` has {} channels; pick one with --channel",
                spec.name,
                chosen.len()
            )));
        }
        let (i, ch) = chosen[0];
        return Ok(Resolved {
            id: format!("{}/{}", spec.name, ch.name),
            seq: ch.render()?,
            targets: spec.targets[i].clone(),
        });
    }
    if let Some(p) = s.period_um {
        let g = PeriodicGrating::new(p * UM, s.duty, s.length_mm * MM)?.with_offset(s.offset)?;
        return Ok(Resolved {
            id: format!("periodic {p} um"),
            seq: g.render(),
            targets: vec![DesignTarget {
                process: None,
                k: g.wavevector(),
            }],
        });
    }
    Err(config("give one of --design, --crystal or --period-um"))
}

fn cmd_render(cli: &Cli, s: &StructureArgs) -> anyhow::Result<()> {
    let r = resolve(s)?;
    let mut out = String::new();
    writeln!(out, "# structure: {}", r.id)?;
    writeln!(out, "# domains: {}", r.seq.len())?;
    writeln!(out, "# total_length_mm: {:?}", r.seq.total_length() / MM)?;
    writeln!(out, "length_nm,sign")?;
    for d in r.seq.domains() {
        writeln!(out, "{:?},{}", d.length / NM, d.sign)?;
    }
    emit(cli, &out)
}

fn cmd_fourier(cli: &Cli, s: &StructureArgs, k: &[f64]) -> anyhow::Result<()> {
    let r = resolve(s)?;
    let ks: Vec<f64> = if k.is_empty() {
        r.targets.iter().map(|t| t.k).collect()
    } else {
        k.to_vec()
    };
    if ks.is_empty() {
        return Err(config("structure has no design frequencies; pass --k"));
    }
    let mut out = String::new();
    writeln!(out, "# structure: {}", r.id)?;
    writeln!(out, "k_per_m,abs_G,re_G,im_G")?;
    for k in ks {
        let g = fourier_coefficient(&r.seq, k);
        writeln!(out, "{k:.6e},{:.12e},{:.12e},{:.12e}", g.norm(), g.re, g.im)?;
    }
    emit(cli, &out)
}

struct SweepArgs<'a> {
    crystal: &'a Path,
    channel: Option<&'a str>,
    process: Process,
    variable: VariableArg,
    min: f64,
    max: f64,
    step: Option<f64>,
    lambda_nm: f64,
    temp_c: f64,
    calibrated: bool,
}

fn cmd_sweep(cli: &Cli, a: SweepArgs<'_>) -> anyhow::Result<()> {
    let spec = CrystalSpec::load(a.crystal)?;
    let (dispersion, expansion) = materials(cli, Some(&spec))?;
    let model = mismatch_model(dispersion, &expansion, a.calibrated)?;
    let setup = ShgSetup {
        process: a.process,
        couplings: &spec.couplings,
        mismatch: model.as_ref(),
        expansion: &expansion,
    };
    let (sweep_spec, fixed) = match a.variable {
        VariableArg::Temperature => (
            SweepSpec {
                variable: SweepVariable::Temperature,
                min: a.min,
                max: a.max,
                step: a.step.unwrap_or(DEFAULT_TEMP_STEP_C),
            },
            Fixed::WavelengthM(a.lambda_nm * NM),
        ),
        VariableArg::Wavelength => (
            SweepSpec {
                variable: SweepVariable::Wavelength,
                min: a.min * NM,
                max: a.max * NM,
                step: a.step.map_or(DEFAULT_WAVELENGTH_STEP_M, |s| s * NM),
            },
            Fixed::TemperatureC(a.temp_c),
        ),
    };
    sweep_spec.grid()?;

    let channels = pick_channel(&spec, a.channel)?;
    let mut curves = Vec::with_capacity(channels.len());
    for (_, ch) in &channels {
        let seq = ch.render()?;
        let mut curve = sweep(&seq, &setup, &sweep_spec, fixed)?;
        curve.metadata.structure_id = format!("{}/{}", spec.name, ch.name);
        curves.push((ch.name.clone(), curve));
    }

    match &cli.output {
        Some(dir) if curves.len() > 1 => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, curve) in &curves {
                let path = dir.join(format!("{name}.csv"));
                std::fs::write(&path, curve.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        _ => {
            let text: Vec<String> = curves.iter().map(|(_, c)| c.to_csv()).collect();
            emit(cli, &text.join("\n"))
        }
    }
}

fn cmd_report(
    cli: &Cli,
    crystal: &Path,
    lambda_nm: f64,
    t_min: f64,
    t_max: f64,
    calibrated: bool,
) -> anyhow::Result<()> {
    let spec = CrystalSpec::load(crystal)?;
    let (dispersion, expansion) = materials(cli, Some(&spec))?;
    let model = mismatch_model(dispersion, &expansion, calibrated)?;
    let couplings: &CouplingSet = &spec.couplings;
    let t_spec = SweepSpec {
        variable: SweepVariable::Temperature,
        min: t_min,
        max: t_max,
        step: DEFAULT_TEMP_STEP_C,
    };
    t_spec.grid()?;

    let mut out = String::new();
    let (l, w, t) = spec.crystal.dimensions;
    writeln!(out, "crystal = {}", spec.name)?;
    writeln!(out, "dimensions_mm = {} x {} x {}", l / MM, w / MM, t / MM)?;
    writeln!(out, "model = {}", model.describe())?;
    writeln!(out, "expansion = {}", expansion.name)?;
    writeln!(
        out,
        "couplings_pm_per_V = d33 {}, d32 {}, d24 {}",
        couplings.d33, couplings.d32, couplings.d24
    )?;
    writeln!(out, "lambda_nm = {lambda_nm}")?;
    writeln!(out, "window_C = [{t_min}, {t_max}]")?;

    for (i, ch) in spec.crystal.channels.iter().enumerate() {
        let seq = ch.render()?;
        writeln!(out)?;
        writeln!(out, "[channel {}]", ch.name)?;
        writeln!(out, "width_mm = {}", ch.width / MM)?;
        writeln!(
            out,
            "sections = {}",
            join(
                ch.sections
                    .iter()
                    .map(|s| format!("{} {} mm", s.kind(), s.length() / MM))
            )
        )?;
        writeln!(out, "domain_count = {}", seq.len())?;

        // Peak efficiency at perfect phasematching of each design target,
        // relative to the first ZZZ target when there is one.
        let mut peaks: Vec<(Process, f64)> = Vec::new();
        for target in &spec.targets[i] {
            let g = fourier_coefficient(&seq, target.k).norm();
            let Some(process) = target.process else {
                writeln!(out, "abs_G[{:.6e}] = {g:.12e}", target.k)?;
                continue;
            };
            let d = couplings.d_eff(process);
            let (_, eta) = peak_over_mismatch(&seq, d, target.k, 0.01 * target.k);
            writeln!(out, "{process}.abs_G[{:.6e}] = {g:.12e}", target.k)?;
            writeln!(out, "{process}.peak_eta_rel = {eta:.6e}")?;
            peaks.push((process, eta));
        }
        if let Some(&(_, base)) = peaks.iter().find(|(p, _)| *p == Process::Zzz) {
            for (p, eta) in peaks.iter().filter(|(p, _)| *p != Process::Zzz) {
                writeln!(out, "{p}.peak_ratio_to_ZZZ = {:.4}", eta / base)?;
            }
        }

        for (process, _) in &peaks {
            let setup = ShgSetup {
                process: *process,
                couplings,
                mismatch: model.as_ref(),
                expansion: &expansion,
            };
            let curve = sweep(&seq, &setup, &t_spec, Fixed::WavelengthM(lambda_nm * NM))?;
            if let Some((tp, eta)) = curve.argmax() {
                writeln!(out, "{process}.window_argmax_C = {tp}")?;
                writeln!(out, "{process}.window_max_eta_rel = {eta:.6e}")?;
            }
            match fwhm(&curve) {
                Ok(width) => writeln!(out, "{process}.fwhm_C = {width:.4}")?,
                Err(e) => writeln!(out, "{process}.fwhm_C = undefined ({e})")?,
            }
        }
    }
    emit(cli, &out)
}
