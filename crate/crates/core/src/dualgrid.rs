//! One-dimensional quasiperiodic poling by the generalized dual-grid method.
//!
//! A design picks D reciprocal basis vectors `k_j` such that every target
//! mismatch is an integer combination of them. Family j of grid points sits
//! at `(n + φ_j)·2π/k_j`; walking the merged, sorted point set and laying one
//! tile of length `a_j` per family-j point yields a structure whose spectrum
//! peaks at all integer combinations of the basis, provided the average
//! lattice condition `Σ a_j k_j = 2π` holds.

use std::f64::consts::PI;

use crate::error::{QpmError, Result};
use crate::grating::{fourier_coefficient, push_tile, DomainBuilder, DomainSequence};

/// Tolerance of the duality constraint `Σ a_j k_j / 2π = 1`.
pub const DUALITY_TOL: f64 = 1e-3;

/// Relative tolerance for reconstructing targets from the basis.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Largest integer coefficient tried when testing rational independence.
pub const INDEPENDENCE_MAX_COEFF: i32 = 20;
/// Relative tolerance of the rational independence test.
pub const INDEPENDENCE_TOL: f64 = 1e-6;

/// Design length used when scoring candidates, metres.
pub const DEFAULT_DESIGN_LENGTH: f64 = 5e-3;

/// Maximum number of targets handled.
pub const MAX_TARGETS: usize = 3;

const MAX_SEARCH_MATRICES: u64 = 50_000_000;

/// Reciprocal basis with the integer orders that reproduce each target.
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalBasis {
    /// Basis vectors k_j, m⁻¹.
    pub vectors: Vec<f64>,
    /// `orders[m][j]`: coefficient of `k_j` in target m.
    pub orders: Vec<Vec<i32>>,
    /// Targets Δk_m the basis was built for, m⁻¹.
    pub targets: Vec<f64>,
}

impl ReciprocalBasis {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }

    /// `orders · vectors`.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.orders
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.vectors)
                    .map(|(n, k)| f64::from(*n) * k)
                    .sum()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.vectors.len();
        if d == 0 || d > MAX_TARGETS {
            return Err(QpmError::Domain(format!(
                "basis dimension {d} not in 1..={MAX_TARGETS}"
            )));
        }
        if self.orders.len() != self.targets.len() || self.orders.iter().any(|r| r.len() != d) {
            return Err(QpmError::Domain(
                "order matrix shape does not match basis".into(),
            ));
        }
        if self.vectors.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(QpmError::Domain("basis vectors must be positive".into()));
        }
        for (got, want) in self.reconstruct().iter().zip(&self.targets) {
            if (got - want).abs() > RECONSTRUCTION_TOL * want.abs() {
                return Err(QpmError::Domain(format!(
                    "order matrix reconstructs {got:.6e}, target {want:.6e}"
                )));
            }
        }
        if let Some(rel) = integer_relation(&self.vectors) {
            return Err(QpmError::Domain(format!(
                "basis vectors are rationally dependent: {rel:?}"
            )));
        }
        Ok(())
    }
}

/// Finds a nonzero integer vector n with |n_j| ≤ 20 and
/// |Σ n_j k_j| ≤ 1e-6·max k, if any.
pub fn integer_relation(vectors: &[f64]) -> Option<Vec<i32>> {
    let scale = vectors.iter().fold(0.0_f64, |m, k| m.max(k.abs()));
    let tol = INDEPENDENCE_TOL * scale;
    let c = INDEPENDENCE_MAX_COEFF;
    let d = vectors.len();
    if d < 2 {
        return None;
    }
    let mut n = vec![-c; d];
    loop {
        // Only test vectors whose first nonzero entry is positive.
        let first = n.iter().find(|v| **v != 0).copied();
        if first.is_some_and(|f| f > 0) {
            let s: f64 = n.iter().zip(vectors).map(|(a, k)| f64::from(*a) * k).sum();
            if s.abs() <= tol {
                let g = n.iter().fold(0, |g, v| gcd(g, v.unsigned_abs()));
                return Some(n.iter().map(|v| v / g as i32).collect());
            }
        }
        let mut i = 0;
        loop {
            if i == d {
                return None;
            }
            if n[i] < c {
                n[i] += 1;
                break;
            }
            n[i] = -c;
            i += 1;
        }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// How [`solve_basis`] chooses the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisConvention {
    /// Two targets only: `k₁ = Δk₁ + Δk₂`, `k₂ = Δk₂` with orders
    /// (1, −1) and (0, 1).
    SumAndSecond,
    /// Integer search over order matrices with entries up to `max_order`.
    Search,
}

fn solve_linear(matrix: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = matrix
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                if f != 0.0 {
                    for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn det_int(m: &[Vec<i32>]) -> i64 {
    match m.len() {
        1 => i64::from(m[0][0]),
        2 => i64::from(m[0][0]) * i64::from(m[1][1]) - i64::from(m[0][1]) * i64::from(m[1][0]),
        3 => {
            let e = |i: usize, j: usize| i64::from(m[i][j]);
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        _ => 0,
    }
}

/// Chooses a reciprocal basis for the targets.
///
/// The search ranks order matrices by largest |order| (lower orders give
/// larger Fourier coefficients), then by the largest basis vector (tile
/// density), then by total order; remaining ties keep enumeration order.
pub fn solve_basis(
    targets: &[f64],
    max_order: u32,
    convention: BasisConvention,
) -> Result<ReciprocalBasis> {
    let d = targets.len();
    if d == 0 || d > MAX_TARGETS {
        return Err(QpmError::Domain(format!(
            "need 1..={MAX_TARGETS} targets, got {d}"
        )));
    }
    if targets.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(QpmError::Domain("targets must be positive".into()));
    }
    if max_order == 0 {
        return Err(QpmError::Domain("max order must be at least 1".into()));
    }
    if convention == BasisConvention::SumAndSecond {
        if d != 2 {
            return Err(QpmError::Domain(
                "the sum-and-second convention needs exactly two targets".into(),
            ));
        }
        let basis = ReciprocalBasis {
            vectors: vec![targets[0] + targets[1], targets[1]],
            orders: vec![vec![1, -1], vec![0, 1]],
            targets: targets.to_vec(),
        };
        basis.validate()?;
        return Ok(basis);
    }

    if let Some(rel) = integer_relation(targets) {
        return Err(QpmError::SearchFailure(format!(
            "targets satisfy the integer relation {rel:?}; no independent basis exists"
        )));
    }
    let m = i32::try_from(max_order).map_err(|_| QpmError::Domain("max order too large".into()))?;
    let side = u64::from(2 * max_order + 1);
    let cells = (d * d) as u32;
    if side
        .checked_pow(cells)
        .is_none_or(|n| n > MAX_SEARCH_MATRICES)
    {
        return Err(QpmError::Config(format!(
            "search space for {d} targets up to order {max_order} is too large"
        )));
    }

    let mut entries = vec![-m; d * d];
    // (max |order|, max k, Σ|order|)
    let mut best: Option<((i32, f64, i32), ReciprocalBasis)> = None;
    loop {
        let rows: Vec<Vec<i32>> = entries.chunks(d).map(<[i32]>::to_vec).collect();
        if det_int(&rows) != 0 {
            let fm: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().map(|v| f64::from(*v)).collect())
                .collect();
            if let Some(k) = solve_linear(&fm, targets) {
                let candidate = ReciprocalBasis {
                    vectors: k,
                    orders: rows.clone(),
                    targets: targets.to_vec(),
                };
                if candidate.vectors.iter().all(|v| *v > 0.0) {
                    let key = (
                        entries.iter().map(|v| v.abs()).max().unwrap_or(0),
                        candidate.vectors.iter().fold(0.0_f64, |a, b| a.max(*b)),
                        entries.iter().map(|v| v.abs()).sum(),
                    );
                    let better = match &best {
                        None => true,
                        Some((bk, _)) => {
                            key.0 < bk.0
                                || (key.0 == bk.0
                                    && (key.1 < bk.1 * (1.0 - 1e-12)
                                        || ((key.1 - bk.1).abs() <= 1e-12 * bk.1 && key.2 < bk.2)))
                        }
                    };
                    if better && candidate.validate().is_ok() {
                        best = Some((key, candidate));
                    }
                }
            }
        }
        let mut i = 0;
        loop {
            if i == entries.len() {
                return best.map(|(_, b)| b).ok_or_else(|| {
                    QpmError::SearchFailure(format!(
                        "no positive, rationally independent basis for {d} targets with orders up to {max_order}"
                    ))
                });
            }
            if entries[i] < m {
                entries[i] += 1;
                break;
            }
            entries[i] = -m;
            i += 1;
        }
    }
}

/// Tile lengths `a_j = t_j·2π/k_j`, which satisfy `Σ a_j k_j = 2π`.
/// A zero split yields a zero tile, which [`DualGridDesign::new`] rejects.
pub fn duality_tile_lengths(basis: &ReciprocalBasis, split: &[f64]) -> Result<Vec<f64>> {
    if split.len() != basis.dimension() {
        return Err(QpmError::Domain(format!(
            "split has {} entries, basis has {}",
            split.len(),
            basis.dimension()
        )));
    }
    if split.iter().any(|t| *t < 0.0 || !t.is_finite()) {
        return Err(QpmError::Domain(
            "split fractions must be nonnegative".into(),
        ));
    }
    let sum: f64 = split.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(QpmError::Domain(format!(
            "split fractions sum to {sum}, not 1"
        )));
    }
    Ok(split
        .iter()
        .zip(&basis.vectors)
        .map(|(t, k)| t * (2.0 * PI / k))
        .collect())
}

/// Complete quasiperiodic design.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGridDesign {
    pub basis: ReciprocalBasis,
    /// a_j, metres.
    pub tile_lengths: Vec<f64>,
    /// Fraction of each tile type that is +χ⁽²⁾ (0 → all −, 1 → all +).
    pub duties: Vec<f64>,
    /// Grid phase φ_j of each family, fraction in [0, 1).
    pub phases: Vec<f64>,
    /// metres
    pub total_length: f64,
}

impl DualGridDesign {
    pub fn new(
        basis: ReciprocalBasis,
        tile_lengths: Vec<f64>,
        duties: Vec<f64>,
        total_length: f64,
    ) -> Result<Self> {
        let phases = vec![0.0; basis.dimension()];
        let d = Self {
            basis,
            tile_lengths,
            duties,
            phases,
            total_length,
        };
        d.validate()?;
        Ok(d)
    }

    /// Basis, tiles from `split`, duties; zero grid phases.
    pub fn from_split(
        basis: ReciprocalBasis,
        split: &[f64],
        duties: Vec<f64>,
        total_length: f64,
    ) -> Result<Self> {
        let tiles = duality_tile_lengths(&basis, split)?;
        Self::new(basis, tiles, duties, total_length)
    }

    pub fn with_phases(mut self, phases: Vec<f64>) -> Result<Self> {
        self.phases = phases;
        self.validate()?;
        Ok(self)
    }

    /// `Σ a_j k_j / 2π`.
    pub fn duality_sum(&self) -> f64 {
        self.tile_lengths
            .iter()
            .zip(&self.basis.vectors)
            .map(|(a, k)| a * k)
            .sum::<f64>()
            / (2.0 * PI)
    }

    /// Relative density of family-j grid points, `ν_j / Σν`.
    pub fn family_fractions(&self) -> Vec<f64> {
        let total: f64 = self.basis.vectors.iter().sum();
        self.basis.vectors.iter().map(|k| k / total).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.basis.dimension();
        if self.tile_lengths.len() != d || self.duties.len() != d || self.phases.len() != d {
            return Err(QpmError::Domain(format!(
                "design needs {d} tile lengths, duties and phases"
            )));
        }
        if self
            .tile_lengths
            .iter()
            .any(|a| !(*a > 0.0 && a.is_finite()))
        {
            return Err(QpmError::Domain("tile lengths must be positive".into()));
        }
        if self.duties.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(QpmError::Domain("tile duties must lie in [0, 1]".into()));
        }
        if self.phases.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(QpmError::Domain("grid phases must lie in [0, 1)".into()));
        }
        if !(self.total_length > 0.0 && self.total_length.is_finite()) {
            return Err(QpmError::Domain("design length must be positive".into()));
        }
        let dual = self.duality_sum();
        if (dual - 1.0).abs() > DUALITY_TOL {
            return Err(QpmError::Domain(format!(
                "duality constraint violated: Σ a_j k_j / 2π = {dual:.6}"
            )));
        }
        Ok(())
    }
}

/// Family index of each tile, input facet first, up to the design length.
/// Coincident grid points are emitted lower family first.
pub fn build_tiles(design: &DualGridDesign) -> Result<Vec<usize>> {
    design.validate()?;
    let spacings: Vec<f64> = design.basis.vectors.iter().map(|k| 2.0 * PI / k).collect();
    let mut next = vec![0_u64; spacings.len()];
    let mut z = 0.0;
    let mut tiles = Vec::new();
    while z < design.total_length {
        let j = (0..spacings.len())
            .min_by(|&a, &b| {
                let xa = (next[a] as f64 + design.phases[a]) * spacings[a];
                let xb = (next[b] as f64 + design.phases[b]) * spacings[b];
                xa.total_cmp(&xb).then(a.cmp(&b))
            })
            .expect("basis is nonempty");
        next[j] += 1;
        tiles.push(j);
        z += design.tile_lengths[j];
    }
    Ok(tiles)
}

/// Renders the design to domains, truncated at its length, equal signs merged.
pub fn build_tiling(design: &DualGridDesign) -> Result<DomainSequence> {
    let tiles = build_tiles(design)?;
    let mut b = DomainBuilder::new(design.total_length);
    for j in tiles {
        if !push_tile(&mut b, design.tile_lengths[j], design.duties[j]) {
            break;
        }
    }
    Ok(b.finish())
}

/// Search settings for [`optimize_design`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub convention: BasisConvention,
    pub max_order: u32,
    /// Grid step of the split fractions.
    pub split_step: f64,
    /// Step of a final refinement pass around the best split, if any.
    pub refine_step: Option<f64>,
    /// Tile duties tried for each family when there are several families.
    pub duty_choices: Vec<f64>,
    /// Grid phases used for every candidate.
    pub phases: Option<Vec<f64>>,
}

impl OptimizeOptions {
    /// Defaults for the given number of targets: binary tiles, split step
    /// 1e-3 (1e-2 with a 1e-3 refinement for three targets).
    pub fn for_targets(n: usize) -> Self {
        let (split_step, refine_step) = if n >= 3 {
            (1e-2, Some(1e-3))
        } else {
            (1e-3, None)
        };
        Self {
            convention: if n == 2 {
                BasisConvention::SumAndSecond
            } else {
                BasisConvention::Search
            },
            max_order: 1,
            split_step,
            refine_step,
            duty_choices: vec![1.0, 0.0],
            phases: None,
        }
    }
}

/// One evaluated point of the design search.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub split: Vec<f64>,
    pub duties: Vec<f64>,
    /// |G(Δk_m)| for each target.
    pub coefficients: Vec<f64>,
    /// min_m |d_m·G(Δk_m)|
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizedDesign {
    pub design: DualGridDesign,
    pub best: Candidate,
    pub candidates: Vec<Candidate>,
}

fn simplex_grid(d: usize, step: f64, center: Option<(&[f64], f64)>) -> Vec<Vec<f64>> {
    let n = (1.0 / step).round() as i64;
    let in_window = |t: &[f64]| match center {
        None => true,
        Some((c, w)) => t.iter().zip(c).all(|(a, b)| (a - b).abs() <= w + 1e-12),
    };
    let mut out = Vec::new();
    match d {
        1 => out.push(vec![1.0]),
        2 => {
            for i in 1..n {
                let t1 = i as f64 / n as f64;
                let t = vec![t1, 1.0 - t1];
                if in_window(&t) {
                    out.push(t);
                }
            }
        }
        _ => {
            for i in 1..n {
                for j in 1..(n - i) {
                    let t1 = i as f64 / n as f64;
                    let t2 = j as f64 / n as f64;
                    let t = vec![t1, t2, 1.0 - t1 - t2];
                    if in_window(&t) {
                        out.push(t);
                    }
                }
            }
        }
    }
    out
}

fn duty_combinations(d: usize, choices: &[f64], step: f64) -> Vec<Vec<f64>> {
    if d == 1 {
        let n = (1.0 / step).round() as i64;
        return (1..n).map(|i| vec![i as f64 / n as f64]).collect();
    }
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut v = prefix.clone();
                    v.push(*c);
                    v
                })
            })
            .collect();
    }
    // Uniform structures carry no grating.
    out.retain(|v| !(v.iter().all(|x| *x >= 1.0) || v.iter().all(|x| *x <= 0.0)));
    out
}

/// Grid search over tile split (and tile duties) maximizing the weakest
/// effective coupling `min_m |d_m·G(Δk_m)|`.
///
/// Candidates are scored on a structure of `total_length`; the result is a
/// pure function of the search grid.
pub fn optimize_design(
    targets: &[f64],
    couplings: &[f64],
    total_length: f64,
    options: &OptimizeOptions,
) -> Result<OptimizedDesign> {
    if targets.len() != couplings.len() {
        return Err(QpmError::Domain(format!(
            "{} targets but {} couplings",
            targets.len(),
            couplings.len()
        )));
    }
    if !(options.split_step > 0.0 && options.split_step < 1.0) {
        return Err(QpmError::Config("split step must lie in (0, 1)".into()));
    }
    let basis = solve_basis(targets, options.max_order, options.convention)?;
    let d = basis.dimension();
    let duty_sets = duty_combinations(d, &options.duty_choices, options.split_step);

    let evaluate = |split: &[f64], duties: &[f64]| -> Option<Candidate> {
        let mut design =
            DualGridDesign::from_split(basis.clone(), split, duties.to_vec(), total_length).ok()?;
        if let Some(ph) = &options.phases {
            design = design.with_phases(ph.clone()).ok()?;
        }
        let seq = build_tiling(&design).ok()?;
        let coefficients: Vec<f64> = targets
            .iter()
            .map(|k| fourier_coefficient(&seq, *k).norm())
            .collect();
        let score = coefficients
            .iter()
            .zip(couplings)
            .map(|(g, c)| (g * c).abs())
            .fold(f64::INFINITY, f64::min);
        Some(Candidate {
            split: split.to_vec(),
            duties: duties.to_vec(),
            coefficients,
            score,
        })
    };

    let mut candidates = Vec::new();
    for duties in &duty_sets {
        for split in simplex_grid(d, options.split_step, None) {
            if let Some(c) = evaluate(&split, duties) {
                candidates.push(c);
            }
        }
    }
    let pick = |cands: &[Candidate]| -> Option<Candidate> {
        let mut best: Option<&Candidate> = None;
        for c in cands {
            if best.is_none_or(|b| c.score > b.score) {
                best = Some(c);
            }
        }
        best.cloned()
    };
    let mut best = pick(&candidates).ok_or_else(|| {
        QpmError::Infeasible("no candidate design satisfies the constraints".into())
    })?;

    if let Some(fine) = options.refine_step {
        if d > 1 {
            let mut refined = Vec::new();
            for split in simplex_grid(d, fine, Some((&best.split, options.split_step))) {
                if let Some(c) = evaluate(&split, &best.duties) {
                    refined.push(c);
                }
            }
            if let Some(r) = pick(&refined) {
                if r.score > best.score {
                    best = r;
                }
            }
            candidates.extend(refined);
        }
    }

    let mut design =
        DualGridDesign::from_split(basis, &best.split, best.duties.clone(), total_length)?;
    if let Some(ph) = &options.phases {
        design = design.with_phases(ph.clone())?;
    }
    Ok(OptimizedDesign {
        design,
        best,
        candidates,
    })
}
