//! Relative SHG efficiency of a poled structure in the plane-wave,
//! undepleted-pump limit, temperature/wavelength sweeps, bandwidths, and a
//! coupled-amplitude integrator used as an independent oracle.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::dispersion::ExpansionModel;
use crate::error::{QpmError, Result};
use crate::grating::DomainSequence;
use crate::mismatch::{MismatchModel, Process};

/// Default temperature scan step, °C.
pub const DEFAULT_TEMP_STEP_C: f64 = 0.25;
/// Default wavelength scan step, metres.
pub const DEFAULT_WAVELENGTH_STEP_M: f64 = 0.05e-9;

/// Effective nonlinear coefficients, pm/V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSet {
    pub d33: f64,
    pub d32: f64,
    pub d24: f64,
}

impl CouplingSet {
    pub fn new(d33: f64, d32: f64, d24: f64) -> Result<Self> {
        if !(d33 > 0.0 && d32 > 0.0 && d24 > 0.0) {
            return Err(QpmError::Domain(
                "nonlinear coefficients must be positive".into(),
            ));
        }
        Ok(Self { d33, d32, d24 })
    }

    /// d₃₃ = 15.4 pm/V, d₃₂ = d₂₄ = 3.75 pm/V.
    pub fn ktp() -> Self {
        Self {
            d33: 15.4,
            d32: 3.75,
            d24: 3.75,
        }
    }

    pub fn d_eff(&self, process: Process) -> f64 {
        match process {
            Process::Zzz => self.d33,
            Process::Zyy => self.d32,
            Process::Yzy | Process::Yyz => self.d24,
        }
    }
}

/// Everything needed to evaluate a process on a structure besides (λ, T).
#[derive(Clone, Copy)]
pub struct ShgSetup<'a> {
    pub process: Process,
    pub couplings: &'a CouplingSet,
    pub mismatch: &'a dyn MismatchModel,
    pub expansion: &'a ExpansionModel,
}

/// `d_eff²·L_T²·|G_T(Δk)|²`, arbitrary units.
///
/// `G_T` is the Fourier coefficient of the structure with every domain
/// stretched by the expansion factor at `temp_c`.
pub fn shg_efficiency(
    seq: &DomainSequence,
    setup: &ShgSetup<'_>,
    lambda_fund_m: f64,
    temp_c: f64,
) -> Result<f64> {
    let dk = setup
        .mismatch
        .mismatch(setup.process, lambda_fund_m, temp_c)?;
    let stretch = setup.expansion.expansion_factor(temp_c)?;
    if seq.is_empty() {
        return Ok(0.0);
    }
    // Integral over the stretched structure = stretch·I(Δk·stretch).
    let integral = seq.spectrum_integral(dk * stretch) * stretch;
    let d = setup.couplings.d_eff(setup.process);
    Ok(d * d * integral.norm_sqr())
}

/// Efficiency at a given residual-free mismatch, `d²·L²·|G(k)|²`.
pub fn efficiency_at_mismatch(seq: &DomainSequence, d_eff: f64, k: f64) -> f64 {
    d_eff * d_eff * seq.spectrum_integral(k).norm_sqr()
}

/// Peak of `d²·L²·|G(k)|²` within `±half_window` of `target_k`, located by
/// a coarse scan and golden-section refinement. Returns `(k_peak, η_peak)`.
pub fn peak_over_mismatch(
    seq: &DomainSequence,
    d_eff: f64,
    target_k: f64,
    half_window: f64,
) -> (f64, f64) {
    let f = |k: f64| efficiency_at_mismatch(seq, d_eff, k);
    let n = 400;
    let step = 2.0 * half_window / f64::from(n);
    let mut best = (target_k, f(target_k));
    for i in 0..=n {
        let k = target_k - half_window + step * f64::from(i);
        let v = f(k);
        if v > best.1 {
            best = (k, v);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let k = 0.5 * (a + b);
    let v = f(k);
    if v > best.1 {
        (k, v)
    } else {
        best
    }
}

/// `((d_a·G_a)/(d_b·G_b))²`.
pub fn peak_efficiency_ratio(d_a: f64, g_a: f64, d_b: f64, g_b: f64) -> f64 {
    let r = (d_a * g_a) / (d_b * g_b);
    r * r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Temperature,
    Wavelength,
}

impl SweepVariable {
    pub fn column_header(self) -> &'static str {
        match self {
            SweepVariable::Temperature => "temperature_C",
            SweepVariable::Wavelength => "wavelength_nm",
        }
    }

    /// Internal value (°C or m) to the CSV unit (°C or nm).
    fn to_output(self, x: f64) -> f64 {
        match self {
            SweepVariable::Temperature => x,
            SweepVariable::Wavelength => x * 1e9,
        }
    }
}

/// Sweep grid. Temperatures in °C, wavelengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(QpmError::Config(format!(
                "sweep step must be positive, got {}",
                self.step
            )));
        }
        if !(self.min < self.max) {
            return Err(QpmError::Config(format!(
                "sweep range must satisfy min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.min + self.step * i as f64).collect())
    }
}

/// The coordinate held fixed during a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fixed {
    WavelengthM(f64),
    TemperatureC(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveMetadata {
    pub process: String,
    pub structure_id: String,
    pub fixed: String,
    pub coefficient_sets: String,
}

/// Sampled relative efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyCurve {
    pub variable: SweepVariable,
    /// (x, η) with x in °C or metres, strictly increasing.
    pub samples: Vec<(f64, f64)>,
    pub metadata: CurveMetadata,
}

impl EfficiencyCurve {
    pub fn argmax(&self) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for &(x, y) in &self.samples {
            if best.is_none_or(|(_, by)| y > by) {
                best = Some((x, y));
            }
        }
        best
    }

    /// CSV with `#` metadata lines, a header row, then one sample per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let m = &self.metadata;
        let _ = writeln!(out, "# process: {}", m.process);
        let _ = writeln!(out, "# structure: {}", m.structure_id);
        let _ = writeln!(out, "# fixed: {}", m.fixed);
        let _ = writeln!(out, "# coefficient_sets: {}", m.coefficient_sets);
        let _ = writeln!(out, "{},eta_rel", self.variable.column_header());
        for &(x, y) in &self.samples {
            let _ = writeln!(
                out,
                "{},{:.9e}",
                round_for_output(self.variable.to_output(x)),
                y
            );
        }
        out
    }
}

// Grid points like 5 + 0.25·i print cleanly; this strips accumulated
// representation noise beyond 1e-9 of the output unit.
fn round_for_output(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Samples [`shg_efficiency`] on the grid of `spec`.
pub fn sweep(
    seq: &DomainSequence,
    setup: &ShgSetup<'_>,
    spec: &SweepSpec,
    fixed: Fixed,
) -> Result<EfficiencyCurve> {
    let grid = spec.grid()?;
    let samples = match (spec.variable, fixed) {
        (SweepVariable::Temperature, Fixed::WavelengthM(l)) => grid
            .into_iter()
            .map(|t| shg_efficiency(seq, setup, l, t).map(|e| (t, e)))
            .collect::<Result<Vec<_>>>()?,
        (SweepVariable::Wavelength, Fixed::TemperatureC(t)) => grid
            .into_iter()
            .map(|l| shg_efficiency(seq, setup, l, t).map(|e| (l, e)))
            .collect::<Result<Vec<_>>>()?,
        _ => {
            return Err(QpmError::Config(
                "temperature sweeps fix the wavelength and vice versa".into(),
            ))
        }
    };
    let fixed = match fixed {
        Fixed::WavelengthM(l) => format!("wavelength_nm={}", round_for_output(l * 1e9)),
        Fixed::TemperatureC(t) => format!("temperature_C={t}"),
    };
    Ok(EfficiencyCurve {
        variable: spec.variable,
        samples,
        metadata: CurveMetadata {
            process: setup.process.label().to_string(),
            structure_id: String::new(),
            fixed,
            coefficient_sets: format!(
                "{}; expansion={}",
                setup.mismatch.describe(),
                setup.expansion.name
            ),
        },
    })
}

/// Full width at half maximum, linearly interpolated, in the curve's
/// x units.
pub fn fwhm(curve: &EfficiencyCurve) -> Result<f64> {
    let s = &curve.samples;
    let (imax, &(_, ymax)) = s
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .ok_or_else(|| QpmError::BandwidthUndefined("empty curve".into()))?;
    if imax == 0 || imax + 1 == s.len() {
        return Err(QpmError::BandwidthUndefined(
            "maximum lies on the sweep boundary".into(),
        ));
    }
    if !(ymax > 0.0) {
        return Err(QpmError::BandwidthUndefined(
            "curve has no positive maximum".into(),
        ));
    }
    let half = 0.5 * ymax;
    let cross = |i: usize, j: usize| {
        let (x0, y0) = s[i];
        let (x1, y1) = s[j];
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    };
    let left = (1..=imax)
        .rev()
        .find(|&i| s[i - 1].1 < half)
        .map(|i| cross(i - 1, i))
        .ok_or_else(|| QpmError::BandwidthUndefined("half level not crossed below peak".into()))?;
    let right = (imax..s.len() - 1)
        .find(|&i| s[i + 1].1 < half)
        .map(|i| cross(i, i + 1))
        .ok_or_else(|| QpmError::BandwidthUndefined("half level not crossed above peak".into()))?;
    Ok(right - left)
}

/// Phase error per integration step, radians; together with the eight-step
/// minimum per domain this sets the step size.
const ODE_MAX_PHASE_STEP: f64 = 0.25;
const ODE_MIN_STEPS_PER_DOMAIN: usize = 8;

/// Integrates
/// `dA_SH/dz = iκ g(z) A_f² e^{iΔkz}`, `dA_f/dz = iκ g(z) A_SH A_f* e^{−iΔkz}`
/// through the structure (stretched by the expansion factor) with classical
/// RK4, landing exactly on every domain boundary. Returns the output SH
/// amplitude; κ is d_eff in pm/V so that `|A_SH|²/|A_f|⁴` matches
/// [`shg_efficiency`] in the undepleted limit.
pub fn ode_oracle(
    seq: &DomainSequence,
    setup: &ShgSetup<'_>,
    lambda_fund_m: f64,
    temp_c: f64,
    input_amplitude: Complex64,
) -> Result<Complex64> {
    if seq.is_empty() {
        return Err(QpmError::Config(
            "cannot integrate through an empty structure".into(),
        ));
    }
    let dk = setup
        .mismatch
        .mismatch(setup.process, lambda_fund_m, temp_c)?;
    let stretch = setup.expansion.expansion_factor(temp_c)?;
    let kappa = setup.couplings.d_eff(setup.process);
    let i = Complex64::new(0.0, 1.0);

    let rhs = |z: f64, g: f64, sh: Complex64, f: Complex64| -> (Complex64, Complex64) {
        let ph = Complex64::from_polar(1.0, dk * z);
        let dsh = i * kappa * g * f * f * ph;
        let df = i * kappa * g * sh * f.conj() * ph.conj();
        (dsh, df)
    };

    let mut sh = Complex64::new(0.0, 0.0);
    let mut f = input_amplitude;
    let mut z = 0.0;
    for d in seq.domains() {
        let len = d.length * stretch;
        let g = d.sign.value();
        let by_phase = (dk.abs() * len / ODE_MAX_PHASE_STEP).ceil() as usize;
        let n = by_phase.max(ODE_MIN_STEPS_PER_DOMAIN);
        let h = len / n as f64;
        for s in 0..n {
            let z0 = z + h * s as f64;
            let (k1s, k1f) = rhs(z0, g, sh, f);
            let (k2s, k2f) = rhs(z0 + 0.5 * h, g, sh + k1s * (0.5 * h), f + k1f * (0.5 * h));
            let (k3s, k3f) = rhs(z0 + 0.5 * h, g, sh + k2s * (0.5 * h), f + k2f * (0.5 * h));
            let (k4s, k4f) = rhs(z0 + h, g, sh + k3s * h, f + k3f * h);
            sh += (k1s + k2s * 2.0 + k3s * 2.0 + k4s) * (h / 6.0);
            f += (k1f + k2f * 2.0 + k3f * 2.0 + k4f) * (h / 6.0);
        }
        z += len;
    }
    Ok(sh)
}

/// `|A_SH|²/|A_f|⁴` from the integrator, directly comparable with
/// [`shg_efficiency`] when the input is weak.
pub fn ode_efficiency(
    seq: &DomainSequence,
    setup: &ShgSetup<'_>,
    lambda_fund_m: f64,
    temp_c: f64,
    input_amplitude: f64,
) -> Result<f64> {
    let a = ode_oracle(
        seq,
        setup,
        lambda_fund_m,
        temp_c,
        Complex64::new(input_amplitude, 0.0),
    )?;
    Ok(a.norm_sqr() / input_amplitude.powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::CrystalDispersion;
    use crate::grating::PeriodicGrating;
    use crate::mismatch::{phase_mismatch, qpm_period};
    use std::f64::consts::PI;

    const NM: f64 = 1e-9;

    /// A mismatch that is fixed in λ and linear in T.
    struct Linear {
        dk0: f64,
        slope: f64,
    }

    impl MismatchModel for Linear {
        fn mismatch(&self, _: Process, _: f64, t: f64) -> Result<f64> {
            Ok(self.dk0 + self.slope * (t - 25.0))
        }
        fn describe(&self) -> String {
            "linear".into()
        }
    }

    fn rigid() -> ExpansionModel {
        ExpansionModel::rigid()
    }

    #[test]
    fn couplings_map_processes() {
        let c = CouplingSet::ktp();
        assert_eq!(c.d_eff(Process::Zzz), 15.4);
        assert_eq!(c.d_eff(Process::Zyy), 3.75);
        assert_eq!(c.d_eff(Process::Yyz), c.d_eff(Process::Yzy));
        assert!(CouplingSet::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn peak_at_exact_qpm() {
        let d = CrystalDispersion::default_ktp();
        let c = CouplingSet::ktp();
        let e = rigid();
        let dk = phase_mismatch(&d, Process::Yzy, 1560.0 * NM, 30.0).unwrap();
        let seq = PeriodicGrating::new(qpm_period(dk, 1).unwrap(), 0.5, 5e-3)
            .unwrap()
            .render();
        let setup = ShgSetup {
            process: Process::Yzy,
            couplings: &c,
            mismatch: &d,
            expansion: &e,
        };
        let peak = shg_efficiency(&seq, &setup, 1560.0 * NM, 30.0).unwrap();
        for i in -20..=20 {
            let t = 30.0 + 0.25 * f64::from(i);
            assert!(shg_efficiency(&seq, &setup, 1560.0 * NM, t).unwrap() <= peak * (1.0 + 1e-9));
        }
    }

    #[test]
    fn ratio_arithmetic() {
        let r = peak_efficiency_ratio(3.75, 0.3855, 15.4, 0.112);
        assert!((r - 0.70).abs() < 0.01);
        let r = peak_efficiency_ratio(3.75, 2.0 / PI, 15.4, 0.112);
        assert!((r - 1.92).abs() < 0.01);
    }

    #[test]
    fn sweep_grid_validation() {
        let bad = SweepSpec {
            variable: SweepVariable::Temperature,
            min: 5.0,
            max: 65.0,
            step: 0.0,
        };
        assert!(matches!(bad.grid(), Err(QpmError::Config(_))));
        let bad = SweepSpec {
            step: 1.0,
            min: 10.0,
            max: 5.0,
            ..bad
        };
        assert!(bad.grid().is_err());
        let ok = SweepSpec {
            min: 5.0,
            max: 65.0,
            step: 0.25,
            ..bad
        };
        let g = ok.grid().unwrap();
        assert_eq!(g.len(), 241);
        assert_eq!(g[240], 65.0);
    }

    #[test]
    fn empty_structure_gives_zero_curve() {
        let c = CouplingSet::ktp();
        let m = Linear {
            dk0: 1.35e5,
            slope: 22.0,
        };
        let e = rigid();
        let setup = ShgSetup {
            process: Process::Yzy,
            couplings: &c,
            mismatch: &m,
            expansion: &e,
        };
        let spec = SweepSpec {
            variable: SweepVariable::Temperature,
            min: 5.0,
            max: 65.0,
            step: 1.0,
        };
        let curve = sweep(
            &DomainSequence::empty(),
            &setup,
            &spec,
            Fixed::WavelengthM(1560.0 * NM),
        )
        .unwrap();
        assert!(curve.samples.iter().all(|(_, y)| *y == 0.0));
    }

    fn sinc2_curve(span: f64, length: f64, n: usize) -> EfficiencyCurve {
        let samples = (0..n)
            .map(|i| {
                let x = -span + 2.0 * span * i as f64 / (n - 1) as f64;
                let a = 0.5 * x * length;
                let y = if a == 0.0 { 1.0 } else { (a.sin() / a).powi(2) };
                (x, y)
            })
            .collect();
        EfficiencyCurve {
            variable: SweepVariable::Temperature,
            samples,
            metadata: CurveMetadata::default(),
        }
    }

    #[test]
    fn fwhm_of_sinc_squared() {
        let l = 5e-3;
        let curve = sinc2_curve(2.0 * PI / l, l, 4001);
        let w = fwhm(&curve).unwrap();
        let expected = 0.886 * 2.0 * PI / l;
        assert!((w / expected - 1.0).abs() < 0.01, "{w} vs {expected}");
    }

    #[test]
    fn fwhm_errors() {
        let curve = EfficiencyCurve {
            variable: SweepVariable::Temperature,
            samples: vec![(0.0, 3.0), (1.0, 2.0), (2.0, 1.0)],
            metadata: CurveMetadata::default(),
        };
        assert!(matches!(fwhm(&curve), Err(QpmError::BandwidthUndefined(_))));
        let flat = EfficiencyCurve {
            samples: vec![(0.0, 0.9), (1.0, 1.0), (2.0, 0.9)],
            ..curve
        };
        assert!(matches!(fwhm(&flat), Err(QpmError::BandwidthUndefined(_))));
    }

    #[test]
    fn temperature_fwhm_scales_inversely_with_length() {
        let c = CouplingSet::ktp();
        let m = Linear {
            dk0: 1.35e5,
            slope: 22.34,
        };
        let e = rigid();
        let setup = ShgSetup {
            process: Process::Yzy,
            couplings: &c,
            mismatch: &m,
            expansion: &e,
        };
        let width = |len: f64, span: f64| {
            let seq = PeriodicGrating::new(2.0 * PI / 1.35e5, 0.5, len)
                .unwrap()
                .render();
            let spec = SweepSpec {
                variable: SweepVariable::Temperature,
                min: 25.0 - span,
                max: 25.0 + span,
                step: 0.05,
            };
            fwhm(&sweep(&seq, &setup, &spec, Fixed::WavelengthM(1560.0 * NM)).unwrap()).unwrap()
        };
        let w5 = width(5e-3, 60.0);
        let w10 = width(10e-3, 30.0);
        assert!((w5 / w10 - 2.0).abs() < 0.04, "{w5} {w10}");
    }

    #[test]
    fn ode_matches_fourier_model_at_peak() {
        let c = CouplingSet::ktp();
        let m = Linear {
            dk0: 2.5e5,
            slope: 10.0,
        };
        let e = rigid();
        let setup = ShgSetup {
            process: Process::Zzz,
            couplings: &c,
            mismatch: &m,
            expansion: &e,
        };
        let period = 2.0 * PI / 2.5e5;
        let seq = PeriodicGrating::new(period, 0.5, 1000.0 * period)
            .unwrap()
            .render();
        let eta = shg_efficiency(&seq, &setup, 1560.0 * NM, 25.0).unwrap();
        let ode = ode_efficiency(&seq, &setup, 1560.0 * NM, 25.0, 1e-4).unwrap();
        assert!((ode / eta - 1.0).abs() < 1e-3, "{ode} vs {eta}");
    }

    #[test]
    fn ode_zero_input_and_empty_structure() {
        let c = CouplingSet::ktp();
        let m = Linear {
            dk0: 2.5e5,
            slope: 0.0,
        };
        let e = rigid();
        let setup = ShgSetup {
            process: Process::Zzz,
            couplings: &c,
            mismatch: &m,
            expansion: &e,
        };
        let seq = PeriodicGrating::new(2.0 * PI / 2.5e5, 0.5, 1e-3)
            .unwrap()
            .render();
        let out = ode_oracle(&seq, &setup, 1560.0 * NM, 25.0, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(out, Complex64::new(0.0, 0.0));
        assert!(matches!(
            ode_oracle(
                &DomainSequence::empty(),
                &setup,
                1560.0 * NM,
                25.0,
                Complex64::new(1.0, 0.0)
            ),
            Err(QpmError::Config(_))
        ));
    }

    #[test]
    fn depletion_conserves_power() {
        // |A_f|² + |A_SH|² is conserved by the coupled equations.
        let c = CouplingSet::ktp();
        let m = Linear {
            dk0: 2.5e5,
            slope: 0.0,
        };
        let e = rigid();
        let setup = ShgSetup {
            process: Process::Zzz,
            couplings: &c,
            mismatch: &m,
            expansion: &e,
        };
        let period = 2.0 * PI / 2.5e5;
        let seq = PeriodicGrating::new(period, 0.5, 400.0 * period)
            .unwrap()
            .render();
        // Strong input: noticeable conversion.
        let a0 = 100.0;
        let sh = ode_oracle(&seq, &setup, 1560.0 * NM, 25.0, Complex64::new(a0, 0.0)).unwrap();
        let undepleted = shg_efficiency(&seq, &setup, 1560.0 * NM, 25.0).unwrap() * a0.powi(4);
        assert!(sh.norm_sqr() < undepleted);
        assert!(sh.norm_sqr() < a0 * a0);
    }

    #[test]
    fn csv_layout() {
        let curve = EfficiencyCurve {
            variable: SweepVariable::Wavelength,
            samples: vec![(1559.95e-9, 0.5), (1560.0e-9, 1.0)],
            metadata: CurveMetadata {
                process: "ZZZ".into(),
                structure_id: "s".into(),
                fixed: "temperature_C=37".into(),
                coefficient_sets: "default".into(),
            },
        };
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[..4].iter().all(|l| l.starts_with('#')));
        assert_eq!(lines[4], "wavelength_nm,eta_rel");
        assert!(lines[5].starts_with("1559.95,"));
        assert!(lines[6].starts_with("1560,"));
    }
}
