//! Material phase mismatch of polarization-defined SHG/downconversion
//! processes, conversion to poling periods, and temperature calibration.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::dispersion::{Axis, CrystalDispersion, ExpansionModel};
use crate::error::{QpmError, Result};

/// Central finite-difference step for temperature derivatives, K.
pub const SLOPE_STEP_K: f64 = 0.1;

/// Three-wave process named pump-polarization first, then the two signal
/// (fundamental) polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Process {
    /// Type-0.
    Zzz,
    /// Type-I.
    Zyy,
    /// Type-II.
    Yzy,
    /// Type-II, signal order swapped.
    Yyz,
}

impl Process {
    pub const ALL: [Process; 4] = [Process::Zzz, Process::Zyy, Process::Yzy, Process::Yyz];

    pub fn pump_axis(self) -> Axis {
        match self {
            Process::Zzz | Process::Zyy => Axis::Z,
            Process::Yzy | Process::Yyz => Axis::Y,
        }
    }

    pub fn signal_axes(self) -> (Axis, Axis) {
        match self {
            Process::Zzz => (Axis::Z, Axis::Z),
            Process::Zyy => (Axis::Y, Axis::Y),
            Process::Yzy => (Axis::Z, Axis::Y),
            Process::Yyz => (Axis::Y, Axis::Z),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Process::Zzz => "ZZZ",
            Process::Zyy => "ZYY",
            Process::Yzy => "YZY",
            Process::Yyz => "YYZ",
        }
    }

    /// Representative with the signal pair in canonical order; YZY and YYZ
    /// share one mismatch.
    pub fn canonical(self) -> Process {
        match self {
            Process::Yyz => Process::Yzy,
            p => p,
        }
    }

    pub fn same_mismatch(self, other: Process) -> bool {
        self.canonical() == other.canonical()
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Process {
    type Err = QpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ZZZ" => Ok(Process::Zzz),
            "ZYY" => Ok(Process::Zyy),
            "YZY" => Ok(Process::Yzy),
            "YYZ" => Ok(Process::Yyz),
            _ => Err(QpmError::Parse(format!("unknown process `{s}`"))),
        }
    }
}

/// `k_SH − k₁ − k₂` for degenerate SHG of `lambda_fund_m`. Negative for the
/// type-II process in KTP.
pub fn signed_phase_mismatch(
    dispersion: &CrystalDispersion,
    process: Process,
    lambda_fund_m: f64,
    temp_c: f64,
) -> Result<f64> {
    let lambda_sh = lambda_fund_m / 2.0;
    let (s1, s2) = process.signal_axes();
    let n_sh = dispersion.index(process.pump_axis(), lambda_sh, temp_c)?;
    let n1 = dispersion.index(s1, lambda_fund_m, temp_c)?;
    let n2 = dispersion.index(s2, lambda_fund_m, temp_c)?;
    Ok(2.0 * PI / lambda_sh * n_sh - 2.0 * PI / lambda_fund_m * (n1 + n2))
}

/// Magnitude of the material phase mismatch, m⁻¹.
///
/// The χ⁽²⁾ sign pattern is real, so its spectrum satisfies |G(−k)| = |G(k)|
/// and only the magnitude selects the grating frequency.
pub fn phase_mismatch(
    dispersion: &CrystalDispersion,
    process: Process,
    lambda_fund_m: f64,
    temp_c: f64,
) -> Result<f64> {
    signed_phase_mismatch(dispersion, process, lambda_fund_m, temp_c).map(f64::abs)
}

/// Poling period `2π·order/Δk` for quasi-phasematching at the given order.
pub fn qpm_period(delta_k: f64, order: u32) -> Result<f64> {
    if !(delta_k > 0.0) || !delta_k.is_finite() {
        return Err(QpmError::Domain(format!(
            "phase mismatch must be positive, got {delta_k}"
        )));
    }
    if order == 0 {
        return Err(QpmError::Domain("QPM order must be at least 1".into()));
    }
    Ok(2.0 * PI * f64::from(order) / delta_k)
}

/// Something that yields the phase mismatch of a process at (λ, T).
pub trait MismatchModel {
    fn mismatch(&self, process: Process, lambda_fund_m: f64, temp_c: f64) -> Result<f64>;

    /// Short identifier used in report metadata.
    fn describe(&self) -> String;
}

impl MismatchModel for CrystalDispersion {
    fn mismatch(&self, process: Process, lambda_fund_m: f64, temp_c: f64) -> Result<f64> {
        phase_mismatch(self, process, lambda_fund_m, temp_c)
    }

    fn describe(&self) -> String {
        format!(
            "sellmeier:{} (Z={}, Y={})",
            self.name, self.z.name, self.y.name
        )
    }
}

/// Temperature derivative of a model's mismatch with a central difference.
pub fn mismatch_slope_with_step(
    model: &dyn MismatchModel,
    process: Process,
    lambda_fund_m: f64,
    temp_c: f64,
    step_k: f64,
) -> Result<f64> {
    let hi = model.mismatch(process, lambda_fund_m, temp_c + step_k)?;
    let lo = model.mismatch(process, lambda_fund_m, temp_c - step_k)?;
    Ok((hi - lo) / (2.0 * step_k))
}

/// dΔk/dT in m⁻¹/K, central difference with [`SLOPE_STEP_K`].
pub fn mismatch_slope(
    dispersion: &CrystalDispersion,
    process: Process,
    lambda_fund_m: f64,
    temp_c: f64,
) -> Result<f64> {
    mismatch_slope_with_step(dispersion, process, lambda_fund_m, temp_c, SLOPE_STEP_K)
}

/// A measured QPM temperature for a grating whose room-temperature spatial
/// frequency is `design_dk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub temp_c: f64,
    pub design_dk: f64,
}

impl CalibrationPoint {
    pub fn new(temp_c: f64, design_dk: f64) -> Result<Self> {
        if !(design_dk > 0.0) {
            return Err(QpmError::Domain(format!(
                "calibration mismatch must be positive, got {design_dk}"
            )));
        }
        Ok(Self { temp_c, design_dk })
    }
}

/// Linear mismatch-vs-temperature law fitted through two calibration points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// m⁻¹/K
    pub slope: f64,
    pub anchor_temp_c: f64,
    pub anchor_dk: f64,
}

impl Calibration {
    pub fn extrapolate(&self, temp_c: f64) -> f64 {
        self.anchor_dk + self.slope * (temp_c - self.anchor_temp_c)
    }
}

/// Fits the material mismatch line through two QPM observations.
///
/// At a QPM temperature the material mismatch equals the grating frequency
/// there, which is the room-temperature design value divided by the
/// expansion factor.
pub fn calibrate_from_two_points(
    p1: CalibrationPoint,
    p2: CalibrationPoint,
    expansion: &ExpansionModel,
) -> Result<Calibration> {
    if p1.temp_c == p2.temp_c {
        return Err(QpmError::DegenerateFit(format!(
            "both calibration points are at {} °C",
            p1.temp_c
        )));
    }
    let dk1 = p1.design_dk / expansion.expansion_factor(p1.temp_c)?;
    let dk2 = p2.design_dk / expansion.expansion_factor(p2.temp_c)?;
    let slope = (dk2 - dk1) / (p2.temp_c - p1.temp_c);
    Ok(Calibration {
        slope,
        anchor_temp_c: p1.temp_c,
        anchor_dk: dk1,
    })
}

/// The two type-II observations that fix the calibrated model: QPM at
/// 248.7 °C and 300.1 °C for gratings designed at 1.398e5 and 1.410e5 m⁻¹.
pub fn reference_calibration_points() -> (CalibrationPoint, CalibrationPoint) {
    (
        CalibrationPoint {
            temp_c: 248.7,
            design_dk: 1.398e5,
        },
        CalibrationPoint {
            temp_c: 300.1,
            design_dk: 1.410e5,
        },
    )
}

/// Sellmeier mismatch with one process replaced by a calibrated linear law
/// in temperature. Wavelength dependence of the calibrated process comes from
/// the Sellmeier model, offset so that the law holds at `anchor_lambda_m`.
#[derive(Debug, Clone)]
pub struct CalibratedMismatch {
    pub dispersion: CrystalDispersion,
    pub process: Process,
    pub calibration: Calibration,
    pub anchor_lambda_m: f64,
}

impl MismatchModel for CalibratedMismatch {
    fn mismatch(&self, process: Process, lambda_fund_m: f64, temp_c: f64) -> Result<f64> {
        if !process.same_mismatch(self.process) {
            return phase_mismatch(&self.dispersion, process, lambda_fund_m, temp_c);
        }
        let base = self.calibration.extrapolate(temp_c);
        if lambda_fund_m == self.anchor_lambda_m {
            return Ok(base);
        }
        let here = phase_mismatch(&self.dispersion, process, lambda_fund_m, temp_c)?;
        let anchor = phase_mismatch(&self.dispersion, process, self.anchor_lambda_m, temp_c)?;
        Ok(base + here - anchor)
    }

    fn describe(&self) -> String {
        format!(
            "{} with {} calibrated to {:.4e} m^-1 + {:.3} m^-1/K (T - {} C)",
            self.dispersion.describe(),
            self.process,
            self.calibration.anchor_dk,
            self.calibration.slope,
            self.calibration.anchor_temp_c
        )
    }
}
