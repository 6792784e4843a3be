//! Temperature-dependent refractive indices of the crystal's Y and Z axes and
//! the thermal expansion of the poling axis.
//!
//! Coefficient sets are data: they are read from a TOML file (a copy is
//! bundled, see [`CoefficientLibrary::bundled`]) so alternative published
//! sets can be swapped in without rebuilding.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{QpmError, Result};

/// Default reference temperature for corrections, °C.
pub const DEFAULT_T_REF_C: f64 = 25.0;

/// Temperature window accepted by all temperature-dependent models, °C.
pub const TEMPERATURE_RANGE_C: (f64, f64) = (-50.0, 400.0);

const BUNDLED: &str = include_str!("../data/coefficients.toml");

/// Crystal axis carrying a field polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Axis {
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Y => write!(f, "Y"),
            Axis::Z => write!(f, "Z"),
        }
    }
}

impl FromStr for Axis {
    type Err = QpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Y" | "y" => Ok(Axis::Y),
            "Z" | "z" => Ok(Axis::Z),
            other => Err(QpmError::Parse(format!("unknown axis `{other}`"))),
        }
    }
}

fn check_temperature(temp_c: f64) -> Result<()> {
    let (min_c, max_c) = TEMPERATURE_RANGE_C;
    if !(min_c..=max_c).contains(&temp_c) {
        return Err(QpmError::TemperatureRange {
            temp_c,
            min_c,
            max_c,
        });
    }
    Ok(())
}

/// Functional form of the room-temperature dispersion.
#[derive(Debug, Clone, PartialEq)]
pub enum DispersionForm {
    /// `n² = A + Σ Bᵢ λ²/(λ² − Cᵢ) − F λ²`, λ in μm.
    MultiPole {
        a: f64,
        f: f64,
        poles: Vec<(f64, f64)>,
    },
    /// `n² = A + Σ Bᵢ/(λ² − Cᵢ) − F λ²`, λ in μm.
    Pole {
        a: f64,
        f: f64,
        poles: Vec<(f64, f64)>,
    },
}

impl DispersionForm {
    fn from_coefficients(form_id: &str, c: &[f64]) -> Result<Self> {
        if c.len() < 2 || !c.len().is_multiple_of(2) {
            return Err(QpmError::Parse(format!(
                "form `{form_id}` expects [A, F, B1, C1, ...], got {} coefficients",
                c.len()
            )));
        }
        let poles = c[2..].chunks(2).map(|p| (p[0], p[1])).collect();
        match form_id {
            "sellmeier-multipole" => Ok(DispersionForm::MultiPole {
                a: c[0],
                f: c[1],
                poles,
            }),
            "sellmeier-pole" => Ok(DispersionForm::Pole {
                a: c[0],
                f: c[1],
                poles,
            }),
            other => Err(QpmError::Parse(format!(
                "unknown dispersion form `{other}`"
            ))),
        }
    }

    fn index_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        match self {
            DispersionForm::MultiPole { a, f, poles } => {
                a + poles.iter().map(|(b, c)| b * l2 / (l2 - c)).sum::<f64>() - f * l2
            }
            DispersionForm::Pole { a, f, poles } => {
                a + poles.iter().map(|(b, c)| b / (l2 - c)).sum::<f64>() - f * l2
            }
        }
    }
}

/// Polynomial thermo-optic correction
/// `Δn = n₁(λ)·ΔT + n₂(λ)·ΔT²` with `nₖ(λ) = Σₘ cₖₘ/λᵐ` (λ in μm).
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoOptic {
    pub name: String,
    pub t_ref_c: f64,
    pub linear: Vec<f64>,
    pub quadratic: Vec<f64>,
    pub source: String,
}

impl ThermoOptic {
    /// A correction that is identically zero.
    pub fn none() -> Self {
        Self {
            name: "none".into(),
            t_ref_c: DEFAULT_T_REF_C,
            linear: vec![],
            quadratic: vec![],
            source: String::new(),
        }
    }

    fn poly(coeffs: &[f64], lambda_um: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c / lambda_um.powi(m as i32))
            .sum()
    }

    /// Index change relative to `t_ref_c`; exactly zero at the reference.
    pub fn delta_n(&self, lambda_um: f64, temp_c: f64) -> f64 {
        let dt = temp_c - self.t_ref_c;
        Self::poly(&self.linear, lambda_um) * dt + Self::poly(&self.quadratic, lambda_um) * dt * dt
    }
}

/// Refractive index model for one crystal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SellmeierModel {
    pub name: String,
    pub axis: Axis,
    pub form: DispersionForm,
    /// Valid vacuum wavelength range in metres.
    pub valid_range_m: (f64, f64),
    pub thermo: ThermoOptic,
    pub source: String,
}

impl SellmeierModel {
    pub fn check_wavelength(&self, lambda_m: f64) -> Result<()> {
        let (lo, hi) = self.valid_range_m;
        let slack = 1e-12 * hi;
        if !(lo - slack..=hi + slack).contains(&lambda_m) {
            return Err(QpmError::WavelengthRange {
                model: self.name.clone(),
                wavelength_nm: lambda_m * 1e9,
                min_nm: lo * 1e9,
                max_nm: hi * 1e9,
            });
        }
        Ok(())
    }

    /// `n(λ, T) = n_sellmeier(λ) + Δn(λ, T)`; λ in metres, T in °C.
    pub fn refractive_index(&self, lambda_m: f64, temp_c: f64) -> Result<f64> {
        self.check_wavelength(lambda_m)?;
        check_temperature(temp_c)?;
        let lambda_um = lambda_m * 1e6;
        Ok(self.form.index_squared(lambda_um).sqrt() + self.thermo.delta_n(lambda_um, temp_c))
    }
}

/// Free-function form of [`SellmeierModel::refractive_index`].
pub fn refractive_index(model: &SellmeierModel, lambda_m: f64, temp_c: f64) -> Result<f64> {
    model.refractive_index(lambda_m, temp_c)
}

/// Thermal expansion of the poling axis:
/// `L(T)/L(T_ref) = 1 + α₁ΔT + α₂ΔT²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionModel {
    pub name: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub t_ref_c: f64,
    pub source: String,
}

impl ExpansionModel {
    pub fn new(alpha1: f64, alpha2: f64, t_ref_c: f64) -> Self {
        Self {
            name: "custom".into(),
            alpha1,
            alpha2,
            t_ref_c,
            source: String::new(),
        }
    }

    /// No expansion; the factor is 1 at every temperature.
    pub fn rigid() -> Self {
        Self {
            name: "rigid".into(),
            ..Self::new(0.0, 0.0, DEFAULT_T_REF_C)
        }
    }

    pub fn expansion_factor(&self, temp_c: f64) -> Result<f64> {
        check_temperature(temp_c)?;
        let dt = temp_c - self.t_ref_c;
        Ok(1.0 + self.alpha1 * dt + self.alpha2 * dt * dt)
    }
}

/// Free-function form of [`ExpansionModel::expansion_factor`].
pub fn expansion_factor(model: &ExpansionModel, temp_c: f64) -> Result<f64> {
    model.expansion_factor(temp_c)
}

/// Y and Z index models of one crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalDispersion {
    pub name: String,
    pub y: SellmeierModel,
    pub z: SellmeierModel,
}

impl CrystalDispersion {
    pub fn axis(&self, axis: Axis) -> &SellmeierModel {
        match axis {
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn index(&self, axis: Axis, lambda_m: f64, temp_c: f64) -> Result<f64> {
        self.axis(axis).refractive_index(lambda_m, temp_c)
    }

    /// The shipped default set.
    pub fn default_ktp() -> Self {
        CoefficientLibrary::bundled()
            .dispersion_set("default")
            .expect("bundled coefficient file defines the default set")
    }
}

// ---- coefficient data file ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DispersionRecord {
    name: String,
    axis: Axis,
    form: String,
    coefficients: Vec<f64>,
    lambda_range_um: [f64; 2],
    #[serde(default)]
    source: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThermoRecord {
    name: String,
    axis: Axis,
    form: String,
    #[serde(default = "default_t_ref")]
    t_ref_c: f64,
    coefficients: Vec<f64>,
    #[allow(dead_code)]
    lambda_range_um: Option<[f64; 2]>,
    #[serde(default)]
    source: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpansionRecord {
    name: String,
    form: String,
    #[serde(default = "default_t_ref")]
    t_ref_c: f64,
    coefficients: Vec<f64>,
    #[serde(default)]
    source: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetRecord {
    name: String,
    z: String,
    y: String,
    thermo_z: Option<String>,
    thermo_y: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientFile {
    #[serde(default)]
    dispersion: Vec<DispersionRecord>,
    #[serde(default)]
    thermo_optic: Vec<ThermoRecord>,
    #[serde(default)]
    expansion: Vec<ExpansionRecord>,
    #[serde(default)]
    set: Vec<SetRecord>,
}

fn default_t_ref() -> f64 {
    DEFAULT_T_REF_C
}

/// All coefficient sets defined in one data file, looked up by name.
#[derive(Debug, Clone, Default)]
pub struct CoefficientLibrary {
    dispersion: HashMap<String, (Axis, DispersionForm, (f64, f64), String)>,
    thermo: HashMap<String, (Axis, ThermoOptic)>,
    expansion: HashMap<String, ExpansionModel>,
    sets: HashMap<String, SetRecord>,
}

impl CoefficientLibrary {
    /// The library compiled into the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled coefficient file is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: CoefficientFile =
            toml::from_str(text).map_err(|e| QpmError::Parse(e.to_string()))?;
        let mut lib = CoefficientLibrary::default();
        for rec in file.dispersion {
            let form = DispersionForm::from_coefficients(&rec.form, &rec.coefficients)?;
            let [lo, hi] = rec.lambda_range_um;
            if !(lo > 0.0 && hi > lo) {
                return Err(QpmError::Parse(format!(
                    "invalid wavelength range in `{}`",
                    rec.name
                )));
            }
            lib.dispersion.insert(
                rec.name,
                (rec.axis, form, (lo * 1e-6, hi * 1e-6), rec.source),
            );
        }
        for rec in file.thermo_optic {
            if rec.form != "poly-thermo-optic" {
                return Err(QpmError::Parse(format!(
                    "unknown thermo-optic form `{}`",
                    rec.form
                )));
            }
            if rec.coefficients.len() % 2 != 0 {
                return Err(QpmError::Parse(format!(
                    "`{}`: thermo-optic coefficients must split evenly into linear and quadratic halves",
                    rec.name
                )));
            }
            let half = rec.coefficients.len() / 2;
            let model = ThermoOptic {
                name: rec.name.clone(),
                t_ref_c: rec.t_ref_c,
                linear: rec.coefficients[..half].to_vec(),
                quadratic: rec.coefficients[half..].to_vec(),
                source: rec.source,
            };
            lib.thermo.insert(rec.name, (rec.axis, model));
        }
        for rec in file.expansion {
            if rec.form != "poly-expansion" || rec.coefficients.len() != 2 {
                return Err(QpmError::Parse(format!(
                    "`{}`: expansion must use form poly-expansion with [a1, a2]",
                    rec.name
                )));
            }
            lib.expansion.insert(
                rec.name.clone(),
                ExpansionModel {
                    name: rec.name,
                    alpha1: rec.coefficients[0],
                    alpha2: rec.coefficients[1],
                    t_ref_c: rec.t_ref_c,
                    source: rec.source,
                },
            );
        }
        for rec in file.set {
            lib.sets.insert(rec.name.clone(), rec);
        }
        // Validate every bundle eagerly so a bad file fails at load time.
        let names: Vec<String> = lib.sets.keys().cloned().collect();
        for name in names {
            lib.dispersion_set(&name)?;
        }
        Ok(lib)
    }

    pub fn set_names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.sets.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn expansion_names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.expansion.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    fn axis_model(&self, name: &str, thermo: Option<&str>, axis: Axis) -> Result<SellmeierModel> {
        let (rec_axis, form, range, source) = self
            .dispersion
            .get(name)
            .ok_or_else(|| QpmError::UnknownSet(name.to_string()))?;
        if *rec_axis != axis {
            return Err(QpmError::Config(format!(
                "dispersion record `{name}` is for axis {rec_axis}, expected {axis}"
            )));
        }
        let thermo = match thermo {
            None => ThermoOptic::none(),
            Some(t) => {
                let (t_axis, model) = self
                    .thermo
                    .get(t)
                    .ok_or_else(|| QpmError::UnknownSet(t.to_string()))?;
                if *t_axis != axis {
                    return Err(QpmError::Config(format!(
                        "thermo-optic record `{t}` is for axis {t_axis}, expected {axis}"
                    )));
                }
                model.clone()
            }
        };
        Ok(SellmeierModel {
            name: name.to_string(),
            axis,
            form: form.clone(),
            valid_range_m: *range,
            thermo,
            source: source.clone(),
        })
    }

    /// Assembles the named Y/Z bundle.
    pub fn dispersion_set(&self, name: &str) -> Result<CrystalDispersion> {
        let set = self
            .sets
            .get(name)
            .ok_or_else(|| QpmError::UnknownSet(name.to_string()))?;
        Ok(CrystalDispersion {
            name: name.to_string(),
            y: self.axis_model(&set.y, set.thermo_y.as_deref(), Axis::Y)?,
            z: self.axis_model(&set.z, set.thermo_z.as_deref(), Axis::Z)?,
        })
    }

    pub fn expansion_set(&self, name: &str) -> Result<ExpansionModel> {
        self.expansion
            .get(name)
            .cloned()
            .ok_or_else(|| QpmError::UnknownSet(name.to_string()))
    }
}

impl ExpansionModel {
    /// The shipped default KTP poling-axis expansion.
    pub fn default_ktp() -> Self {
        CoefficientLibrary::bundled()
            .expansion_set("ktp-x")
            .expect("bundled coefficient file defines ktp-x")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NM: f64 = 1e-9;

    fn ktp() -> CrystalDispersion {
        CrystalDispersion::default_ktp()
    }

    #[test]
    fn evaluation_is_deterministic() {
        let d = ktp();
        let a = d.z.refractive_index(1560.0 * NM, 25.0).unwrap();
        let b = d.z.refractive_index(1560.0 * NM, 25.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // Δn = Δk·λ_f/(4π) for a degenerate process; Δk_ZZZ = 2.510e5 m⁻¹ and
    // Δk_ZYY = 9.061e5 m⁻¹ force these differences.
    #[test]
    fn index_differences_match_mismatch_values() {
        let d = ktp();
        let lf = 1560.0 * NM;
        let forced = |dk: f64| dk * lf / (4.0 * std::f64::consts::PI);
        assert!((forced(2.510e5) - 0.0312).abs() < 1e-4);
        assert!((forced(9.061e5) - 0.1125).abs() < 1e-3);

        let zz = d.z.refractive_index(780.0 * NM, 25.0).unwrap()
            - d.z.refractive_index(lf, 25.0).unwrap();
        let zy = d.z.refractive_index(780.0 * NM, 25.0).unwrap()
            - d.y.refractive_index(lf, 25.0).unwrap();
        assert!(
            (zz / 0.0312 - 1.0).abs() < 0.02,
            "n_Z(780) - n_Z(1560) = {zz}"
        );
        assert!(
            (zy / 0.1125 - 1.0).abs() < 0.02,
            "n_Z(780) - n_Y(1560) = {zy}"
        );
    }

    #[test]
    fn out_of_range_wavelength_names_model() {
        let d = ktp();
        let err = d.y.refractive_index(2500.0 * NM, 25.0).unwrap_err();
        match &err {
            QpmError::WavelengthRange { model, .. } => assert_eq!(model, "konig2004-y"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("konig2004-y"));
    }

    #[test]
    fn thermo_correction_vanishes_at_reference() {
        let d = ktp();
        for i in 0..=100 {
            let l_um = 0.5 + 0.012 * f64::from(i);
            assert_eq!(d.z.thermo.delta_n(l_um, 25.0), 0.0);
            assert_eq!(d.y.thermo.delta_n(l_um, 25.0), 0.0);
        }
    }

    #[test]
    fn expansion_factor_examples() {
        let e = ExpansionModel::default_ktp();
        assert_eq!(e.expansion_factor(25.0).unwrap(), 1.0);
        let dt: f64 = 248.7 - 25.0;
        let oracle = 1.0 + 6.7e-6 * dt + 11e-9 * dt * dt;
        let got = e.expansion_factor(248.7).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!(got > 1.0015 && got < 1.0021, "{got}");
        assert!(e.expansion_factor(300.0).unwrap() > e.expansion_factor(249.0).unwrap());
        assert!(e.expansion_factor(500.0).is_err());
    }

    #[test]
    fn expansion_monotone_on_operating_range() {
        let e = ExpansionModel::default_ktp();
        let mut prev = e.expansion_factor(0.0).unwrap();
        for i in 1..=350 {
            let f = e.expansion_factor(f64::from(i)).unwrap();
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn normal_dispersion_and_birefringence() {
        for set in ["default", "kato2002", "fan1987"] {
            let d = CoefficientLibrary::bundled().dispersion_set(set).unwrap();
            for t in [0.0, 25.0, 50.0, 100.0] {
                let mut prev = (f64::INFINITY, f64::INFINITY);
                for i in 0..=100 {
                    let l = (700.0 + 10.0 * f64::from(i)) * NM;
                    let ny = d.y.refractive_index(l, t).unwrap();
                    let nz = d.z.refractive_index(l, t).unwrap();
                    assert!(ny < prev.0 && nz < prev.1, "{set}: not decreasing at {l}");
                    assert!(nz > ny, "{set}: n_Z <= n_Y at {l}");
                    assert!(ny > 1.0 && nz < 3.0);
                    prev = (ny, nz);
                }
            }
        }
    }

    // Regression bound frozen from the default set: max |dn/dλ| over
    // 700..1700 nm is 1.26e5 m⁻¹ (n_Z at 700 nm).
    #[test]
    fn index_continuity_bound() {
        let d = ktp();
        let delta = 0.1 * NM;
        for axis in [Axis::Y, Axis::Z] {
            for i in 0..1000 {
                let l = (700.0 + f64::from(i)) * NM;
                let a = d.index(axis, l, 25.0).unwrap();
                let b = d.index(axis, l + delta, 25.0).unwrap();
                assert!((a - b).abs() <= 1.3e5 * delta);
            }
        }
    }

    #[test]
    fn parse_rejects_bad_records() {
        let bad_form = r#"
            [[dispersion]]
            name = "x"
            axis = "Z"
            form = "laurent"
            coefficients = [1.0, 0.0]
            lambda_range_um = [0.4, 1.0]
        "#;
        assert!(matches!(
            CoefficientLibrary::parse(bad_form),
            Err(QpmError::Parse(_))
        ));

        let wrong_axis = r#"
            [[dispersion]]
            name = "x"
            axis = "Y"
            form = "sellmeier-multipole"
            coefficients = [2.0, 0.0, 1.0, 0.05]
            lambda_range_um = [0.4, 1.7]
            [[set]]
            name = "s"
            z = "x"
            y = "x"
        "#;
        assert!(matches!(
            CoefficientLibrary::parse(wrong_axis),
            Err(QpmError::Config(_))
        ));
        assert!(matches!(
            CoefficientLibrary::bundled().dispersion_set("nope"),
            Err(QpmError::UnknownSet(_))
        ));
    }
}
