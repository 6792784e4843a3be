//! Poled structures and the Fourier spectrum of their χ⁽²⁾ sign modulation.
//!
//! Every structure, periodic or not, is rendered to a [`DomainSequence`]:
//! an ordered list of signed domains starting at the input facet (z = 0).
//! Fourier coefficients are evaluated in closed form domain by domain, so
//! incommensurate tile lengths need no sampling grid.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::dualgrid::DualGridDesign;
use crate::error::{QpmError, Result};

/// Sign of the nonlinear susceptibility in one domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    pub fn from_i32(v: i32) -> Result<Sign> {
        match v {
            1 => Ok(Sign::Pos),
            -1 => Ok(Sign::Neg),
            other => Err(QpmError::Parse(format!(
                "domain sign must be +1 or -1, got {other}"
            ))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Pos => f.write_str("+1"),
            Sign::Neg => f.write_str("-1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    /// metres
    pub length: f64,
    pub sign: Sign,
}

/// Ordered list of signed domains.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DomainSequence {
    domains: Vec<Domain>,
    total_length: f64,
}

impl DomainSequence {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a sequence from raw domains; every length must be positive and
    /// finite. Adjacent domains are kept as given.
    pub fn new(domains: Vec<Domain>) -> Result<Self> {
        if let Some(bad) = domains
            .iter()
            .find(|d| !(d.length > 0.0 && d.length.is_finite()))
        {
            return Err(QpmError::Domain(format!(
                "domain length must be positive, got {}",
                bad.length
            )));
        }
        let total_length = domains.iter().map(|d| d.length).sum();
        Ok(Self {
            domains,
            total_length,
        })
    }

    pub fn uniform(length: f64, sign: Sign) -> Result<Self> {
        Self::new(vec![Domain { length, sign }])
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Appends `other` after the end of `self`.
    pub fn concat(&self, other: &DomainSequence) -> DomainSequence {
        let mut domains = self.domains.clone();
        domains.extend_from_slice(&other.domains);
        DomainSequence {
            domains,
            total_length: self.total_length + other.total_length,
        }
    }

    /// Every domain length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DomainSequence {
        let domains: Vec<Domain> = self
            .domains
            .iter()
            .map(|d| Domain {
                length: d.length * factor,
                sign: d.sign,
            })
            .collect();
        let total_length = domains.iter().map(|d| d.length).sum();
        DomainSequence {
            domains,
            total_length,
        }
    }

    pub fn sign_flipped(&self) -> DomainSequence {
        DomainSequence {
            domains: self
                .domains
                .iter()
                .map(|d| Domain {
                    length: d.length,
                    sign: d.sign.flipped(),
                })
                .collect(),
            total_length: self.total_length,
        }
    }

    /// Adjacent equal-sign domains fused.
    pub fn merged(&self) -> DomainSequence {
        let mut out: Vec<Domain> = Vec::with_capacity(self.domains.len());
        for d in &self.domains {
            match out.last_mut() {
                Some(last) if last.sign == d.sign => last.length += d.length,
                _ => out.push(*d),
            }
        }
        DomainSequence {
            domains: out,
            total_length: self.total_length,
        }
    }

    /// `∫ g(z) e^{−ikz} dz` over the whole sequence (unnormalized, metres).
    pub fn spectrum_integral(&self, k: f64) -> Complex64 {
        let mut z = 0.0;
        let mut acc = Complex64::new(0.0, 0.0);
        for d in &self.domains {
            // ∫_z^{z+l} e^{−ikz'} dz' = l·sinc(kl/2)·e^{−ik(z+l/2)}
            let half = 0.5 * k * d.length;
            let sinc = if half.abs() < 1e-8 {
                1.0 - half * half / 6.0
            } else {
                half.sin() / half
            };
            let (s, c) = (k * (z + 0.5 * d.length)).sin_cos();
            let w = d.sign.value() * d.length * sinc;
            acc += Complex64::new(w * c, -w * s);
            z += d.length;
        }
        acc
    }
}

/// Normalized Fourier coefficient `G(k) = (1/L)∫ g(z) e^{−ikz} dz`.
/// An empty sequence has no spectrum and yields 0.
pub fn fourier_coefficient(seq: &DomainSequence, k: f64) -> Complex64 {
    if seq.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    seq.spectrum_integral(k) / seq.total_length()
}

/// `(2/(πm))·|sin(πmD)|`, the m-th order coefficient of a duty-D square wave.
pub fn periodic_fourier_analytic(order: u32, duty: f64) -> Result<f64> {
    if order == 0 {
        return Err(QpmError::Domain("order must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&duty) {
        return Err(QpmError::Domain(format!(
            "duty must lie in [0, 1], got {duty}"
        )));
    }
    let m = f64::from(order);
    Ok(2.0 / (PI * m) * (PI * m * duty).sin().abs())
}

/// Accumulates domains up to a length limit, fusing equal signs and
/// truncating the last domain at the limit.
#[derive(Debug)]
pub(crate) struct DomainBuilder {
    domains: Vec<Domain>,
    z: f64,
    limit: f64,
    snap: f64,
}

impl DomainBuilder {
    pub(crate) fn new(limit: f64) -> Self {
        Self {
            domains: Vec::new(),
            z: 0.0,
            limit,
            snap: 1e-12 * limit,
        }
    }

    pub(crate) fn is_full(&self) -> bool {
        self.z >= self.limit
    }

    /// Returns false once the limit has been reached.
    pub(crate) fn push(&mut self, length: f64, sign: Sign) -> bool {
        if self.is_full() {
            return false;
        }
        if length <= 0.0 {
            return true;
        }
        let mut length = length;
        let end = self.z + length;
        if end >= self.limit - self.snap {
            length = self.limit - self.z;
        }
        match self.domains.last_mut() {
            Some(last) if last.sign == sign => last.length += length,
            _ => self.domains.push(Domain { length, sign }),
        }
        if end >= self.limit - self.snap {
            self.z = self.limit;
            false
        } else {
            self.z = end;
            true
        }
    }

    pub(crate) fn finish(self) -> DomainSequence {
        let total_length = self.domains.iter().map(|d| d.length).sum();
        DomainSequence {
            domains: self.domains,
            total_length,
        }
    }
}

/// Pushes one tile of length `length` whose first `duty` fraction is +χ⁽²⁾.
pub(crate) fn push_tile(b: &mut DomainBuilder, length: f64, duty: f64) -> bool {
    if duty >= 1.0 {
        b.push(length, Sign::Pos)
    } else if duty <= 0.0 {
        b.push(length, Sign::Neg)
    } else {
        b.push(duty * length, Sign::Pos) && b.push((1.0 - duty) * length, Sign::Neg)
    }
}

/// Square-wave grating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrating {
    /// Period Λ in metres.
    pub period: f64,
    /// Fraction of each period with sign +1.
    pub duty: f64,
    /// Grating length in metres.
    pub length: f64,
    /// Shift of the pattern as a fraction of a period, in [0, 1).
    pub phase_offset: f64,
}

impl PeriodicGrating {
    pub fn new(period: f64, duty: f64, length: f64) -> Result<Self> {
        let g = Self {
            period,
            duty,
            length,
            phase_offset: 0.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_offset(mut self, phase_offset: f64) -> Result<Self> {
        self.phase_offset = phase_offset;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(QpmError::Domain(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if !(0.0..=1.0).contains(&self.duty) {
            return Err(QpmError::Domain(format!(
                "duty must lie in [0, 1], got {}",
                self.duty
            )));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(QpmError::Domain(format!(
                "length must be positive, got {}",
                self.length
            )));
        }
        if !(0.0..1.0).contains(&self.phase_offset) {
            return Err(QpmError::Domain(format!(
                "phase offset must lie in [0, 1), got {}",
                self.phase_offset
            )));
        }
        Ok(())
    }

    /// Grating vector 2π/Λ.
    pub fn wavevector(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn render(&self) -> DomainSequence {
        let mut b = DomainBuilder::new(self.length);
        let lead = self.phase_offset;
        if lead > 0.0 {
            // Finish the partial cell the offset lands in.
            if lead < self.duty {
                let _ = b.push((self.duty - lead) * self.period, Sign::Pos)
                    && b.push((1.0 - self.duty) * self.period, Sign::Neg);
            } else {
                b.push((1.0 - lead) * self.period, Sign::Neg);
            }
        }
        while !b.is_full() {
            if !push_tile(&mut b, self.period, self.duty) {
                break;
            }
        }
        b.finish()
    }
}

/// Free-function form of [`PeriodicGrating::render`].
pub fn render(grating: &PeriodicGrating) -> DomainSequence {
    grating.render()
}

/// What fills one lengthwise section of a channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Periodic(PeriodicGrating),
    DualGrid(DualGridDesign),
    Uniform { length: f64, sign: Sign },
    Domains(DomainSequence),
}

impl Structure {
    pub fn length(&self) -> f64 {
        match self {
            Structure::Periodic(g) => g.length,
            Structure::DualGrid(d) => d.total_length,
            Structure::Uniform { length, .. } => *length,
            Structure::Domains(s) => s.total_length(),
        }
    }

    pub fn render(&self) -> Result<DomainSequence> {
        match self {
            Structure::Periodic(g) => {
                g.validate()?;
                Ok(g.render())
            }
            Structure::DualGrid(d) => crate::dualgrid::build_tiling(d),
            Structure::Uniform { length, sign } => DomainSequence::uniform(*length, *sign),
            Structure::Domains(s) => Ok(s.clone()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Structure::Periodic(_) => "periodic",
            Structure::DualGrid(_) => "dualgrid",
            Structure::Uniform { .. } => "uniform",
            Structure::Domains(_) => "domains",
        }
    }
}

/// A beam path through the crystal: the sections it crosses, input to output.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    /// metres
    pub width: f64,
    pub sections: Vec<Structure>,
}

impl Channel {
    pub fn render(&self) -> Result<DomainSequence> {
        let mut seq = DomainSequence::empty();
        for s in &self.sections {
            seq = seq.concat(&s.render()?);
        }
        Ok(seq)
    }
}

/// Crystal carrying parallel channels, each a stack of lengthwise sections.
/// Full-width sections appear in every channel's stack.
#[derive(Debug, Clone, PartialEq)]
pub struct MultigratingCrystal {
    /// (length, width, thickness) in metres.
    pub dimensions: (f64, f64, f64),
    pub channels: Vec<Channel>,
}

impl MultigratingCrystal {
    pub fn new(dimensions: (f64, f64, f64), channels: Vec<Channel>) -> Result<Self> {
        let c = Self {
            dimensions,
            channels,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let (length, width, thickness) = self.dimensions;
        if !(length > 0.0 && width > 0.0 && thickness > 0.0) {
            return Err(QpmError::Config(
                "crystal dimensions must be positive".into(),
            ));
        }
        if self.channels.is_empty() {
            return Err(QpmError::Config("crystal has no channels".into()));
        }
        let tol = 1e-9 * length;
        for ch in &self.channels {
            let sum: f64 = ch.sections.iter().map(Structure::length).sum();
            if (sum - length).abs() > tol {
                return Err(QpmError::Config(format!(
                    "channel `{}`: sections sum to {:.6} mm, crystal is {:.6} mm",
                    ch.name,
                    sum * 1e3,
                    length * 1e3
                )));
            }
            if !(ch.width > 0.0) {
                return Err(QpmError::Config(format!(
                    "channel `{}` has no width",
                    ch.name
                )));
            }
        }
        let widths: f64 = self.channels.iter().map(|c| c.width).sum();
        if widths > width * (1.0 + 1e-12) {
            return Err(QpmError::Config(format!(
                "channel widths sum to {:.4} mm, crystal is {:.4} mm wide",
                widths * 1e3,
                width * 1e3
            )));
        }
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }
}
