//! End-to-end checks on the two-section triple-SHG crystal.

use qpm_core::dualgrid::{build_tiling, solve_basis};
use qpm_core::shg::{peak_over_mismatch, sweep, Fixed};
use qpm_core::{
    phase_mismatch, BasisConvention, CouplingSet, CrystalDispersion, DomainSequence,
    DualGridDesign, ExpansionModel, PeriodicGrating, Process, ShgSetup, SweepSpec, SweepVariable,
};

const ZZZ: f64 = 2.510e5;
const ZYY: f64 = 9.061e5;
const SPLIT: [f64; 2] = [0.6206, 0.3794];

fn dual_grid(targets: [f64; 2]) -> DomainSequence {
    let basis = solve_basis(&targets, 1, BasisConvention::SumAndSecond).unwrap();
    let design = DualGridDesign::from_split(basis, &SPLIT, vec![1.0, 0.0], 5e-3).unwrap();
    build_tiling(&design).unwrap()
}

fn yzy_channel(period_um: f64) -> DomainSequence {
    PeriodicGrating::new(period_um * 1e-6, 0.5, 5e-3)
        .unwrap()
        .render()
}

#[test]
fn full_crystal_peak_ordering() {
    let c = CouplingSet::ktp();
    let seq = dual_grid([ZZZ, ZYY]).concat(&yzy_channel(46.3));
    let k_yzy = 2.0 * std::f64::consts::PI / 46.3e-6;
    let peak = |p: Process, k: f64| peak_over_mismatch(&seq, c.d_eff(p), k, 0.01 * k).1;
    let zzz = peak(Process::Zzz, ZZZ);
    let zyy = peak(Process::Zyy, ZYY);
    let yzy = peak(Process::Yzy, k_yzy);
    assert!(yzy > zzz && zzz > zyy);
    assert!(
        (yzy / zzz - 1.92).abs() <= 0.05 * 1.92,
        "YZY/ZZZ = {}",
        yzy / zzz
    );
    assert!(
        (zyy / zzz - 0.70).abs() <= 0.05 * 0.70,
        "ZYY/ZZZ = {}",
        zyy / zzz
    );
}

fn temperature_peak(seq: &DomainSequence, expansion: &ExpansionModel) -> (f64, f64) {
    let dispersion = CrystalDispersion::default_ktp();
    let couplings = CouplingSet::ktp();
    let setup = ShgSetup {
        process: Process::Zzz,
        couplings: &couplings,
        mismatch: &dispersion,
        expansion,
    };
    let spec = SweepSpec {
        variable: SweepVariable::Temperature,
        min: 15.0,
        max: 65.0,
        step: 0.05,
    };
    sweep(seq, &setup, &spec, Fixed::WavelengthM(1560e-9))
        .unwrap()
        .argmax()
        .unwrap()
}

#[test]
fn expansion_shifts_peak_but_keeps_height() {
    let seq = dual_grid([ZZZ, ZYY]);
    let (t_rigid, eta_rigid) = temperature_peak(&seq, &ExpansionModel::rigid());
    let (t_exp, eta_exp) = temperature_peak(&seq, &ExpansionModel::default_ktp());
    assert!(t_exp != t_rigid, "peak did not move ({t_exp} °C)");
    assert!(
        (eta_exp / eta_rigid - 1.0).abs() < 5e-3,
        "{eta_exp} vs {eta_rigid}"
    );
}

#[test]
fn zzz_and_zyy_wavelength_peaks_coincide_at_operating_point() {
    // Design for the model's own mismatches at 1560 nm, 37 °C, so that the
    // stretched grating matches both processes there.
    let dispersion = CrystalDispersion::default_ktp();
    let expansion = ExpansionModel::default_ktp();
    let stretch = expansion.expansion_factor(37.0).unwrap();
    let target = |p| phase_mismatch(&dispersion, p, 1560e-9, 37.0).unwrap() * stretch;
    let seq = dual_grid([target(Process::Zzz), target(Process::Zyy)]);

    let couplings = CouplingSet::ktp();
    let spec = SweepSpec {
        variable: SweepVariable::Wavelength,
        min: 1555e-9,
        max: 1565e-9,
        step: 0.01e-9,
    };
    let peak_nm = |process| {
        let setup = ShgSetup {
            process,
            couplings: &couplings,
            mismatch: &dispersion,
            expansion: &expansion,
        };
        sweep(&seq, &setup, &spec, Fixed::TemperatureC(37.0))
            .unwrap()
            .argmax()
            .unwrap()
            .0
            * 1e9
    };
    let zzz = peak_nm(Process::Zzz);
    let zyy = peak_nm(Process::Zyy);
    assert!((zzz - zyy).abs() < 1.0, "ZZZ {zzz} nm, ZYY {zyy} nm");
    assert!((zzz - 1560.0).abs() < 0.5 && (zyy - 1560.0).abs() < 0.5);
}
