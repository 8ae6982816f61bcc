//! Dense complex linear algebra over small tensor-product spaces.
//!
//! Kets are stored as flat row-major amplitude arrays indexed by the
//! multi-index `(i_1, ..., i_n)` over the factor dimensions of their
//! [`SpaceShape`]. Nothing here normalizes: vectors are ray
//! representatives and comparisons go through [`proportional`].

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ComplexScalar = Complex64;

/// Numerical tolerances shared by the engine and the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Zero-vector threshold, relative to the scale of the inputs.
    pub zero: f64,
    /// Maximum entry of `U†U - I` accepted for an operator.
    pub unitary: f64,
    /// Slack in the Cauchy-Schwarz collinearity test.
    pub proportional: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            zero: 1e-12,
            unitary: 1e-9,
            proportional: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(SpaceShape, SpaceShape),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("factor index {index} out of range for {factors} factors")]
    IndexOutOfRange { index: usize, factors: usize },
    #[error("duplicate factor index {0}")]
    DuplicateIndex(usize),
    #[error("partial application needs a nonempty strict subset of factors")]
    InvalidContraction,
    #[error("invalid space shape: {0}")]
    InvalidShape(String),
    #[error("amplitude array has length {found}, shape requires {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite amplitude")]
    NonFinite,
    #[error("zero vector")]
    ZeroVector,
    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

/// Factor dimensions of `H_1 ⊗ ... ⊗ H_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceShape {
    dims: Vec<usize>,
}

impl SpaceShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(AlgebraError::InvalidShape("no factors".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(AlgebraError::InvalidShape(format!("factor dimension {d} < 2")));
        }
        Ok(SpaceShape { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn qubits(n: usize) -> Self {
        SpaceShape { dims: vec![2; n.max(1)] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &SpaceShape) -> SpaceShape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SpaceShape { dims }
    }

    /// Row-major strides, last factor fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Sub-shape made of the factors at `positions`, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<SpaceShape> {
        let dims = positions
            .iter()
            .map(|&p| {
                self.dims.get(p).copied().ok_or(AlgebraError::IndexOutOfRange {
                    index: p,
                    factors: self.dims.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SpaceShape::new(dims)
    }
}

impl fmt::Display for SpaceShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

/// Decompose a flat row-major offset into a multi-index.
fn unravel(mut offset: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = offset % dims[k];
        offset /= dims[k];
    }
}

/// A complex amplitude vector over a tensor-product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ket {
    shape: SpaceShape,
    amps: Vec<ComplexScalar>,
}

impl Ket {
    pub fn new(shape: SpaceShape, amps: Vec<ComplexScalar>) -> Result<Self> {
        if amps.len() != shape.total() {
            return Err(AlgebraError::LengthMismatch {
                expected: shape.total(),
                found: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(AlgebraError::NonFinite);
        }
        Ok(Ket { shape, amps })
    }

    /// Single-factor ket from its amplitudes.
    pub fn from_amps(amps: Vec<ComplexScalar>) -> Result<Self> {
        let shape = SpaceShape::single(amps.len())?;
        Self::new(shape, amps)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amps(amps.iter().map(|&x| ComplexScalar::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|index>` of a `dim`-dimensional space.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(AlgebraError::IndexOutOfRange { index, factors: dim });
        }
        let mut amps = vec![ComplexScalar::new(0.0, 0.0); dim];
        amps[index] = ComplexScalar::new(1.0, 0.0);
        Self::from_amps(amps)
    }

    /// Product of qubit basis states, e.g. `&[0, 1]` for `|01>`.
    pub fn qubit_basis(bits: &[usize]) -> Result<Self> {
        let mut iter = bits.iter();
        let first = iter
            .next()
            .ok_or_else(|| AlgebraError::InvalidShape("no factors".into()))?;
        iter.try_fold(Ket::basis(2, *first)?, |acc, &b| Ok(tensor(&acc, &Ket::basis(2, b)?)))
    }

    pub fn plus() -> Self {
        Ket::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).expect("valid")
    }

    pub fn minus() -> Self {
        Ket::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]).expect("valid")
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn amps(&self) -> &[ComplexScalar] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<ComplexScalar> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// True when every amplitude is at most `tol` in magnitude.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    pub fn scale(&self, c: ComplexScalar) -> Ket {
        Ket {
            shape: self.shape.clone(),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    pub fn normalized(&self) -> Result<Ket> {
        let n = self.norm();
        if n == 0.0 {
            return Err(AlgebraError::ZeroVector);
        }
        Ok(self.scale(ComplexScalar::new(1.0 / n, 0.0)))
    }

    pub fn add(&self, other: &Ket) -> Result<Ket> {
        if self.shape != other.shape {
            return Err(AlgebraError::ShapeMismatch(self.shape.clone(), other.shape.clone()));
        }
        Ok(Ket {
            shape: self.shape.clone(),
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        })
    }

    /// Same amplitudes viewed under another shape of equal total dimension.
    pub fn reshape(&self, shape: SpaceShape) -> Result<Ket> {
        if shape.total() != self.dim() {
            return Err(AlgebraError::DimensionMismatch {
                expected: shape.total(),
                found: self.dim(),
            });
        }
        Ok(Ket {
            shape,
            amps: self.amps.clone(),
        })
    }

    /// Amplitude at a multi-index.
    pub fn at(&self, index: &[usize]) -> ComplexScalar {
        let offset = index
            .iter()
            .zip(self.shape.strides())
            .map(|(i, s)| i * s)
            .sum::<usize>();
        self.amps[offset]
    }

    /// Reorder the tensor factors: factor `k` of the result is factor
    /// `perm[k]` of `self`.
    pub fn permute_factors(&self, perm: &[usize]) -> Result<Ket> {
        let n = self.shape.factors();
        if perm.len() != n {
            return Err(AlgebraError::DimensionMismatch {
                expected: n,
                found: perm.len(),
            });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n {
                return Err(AlgebraError::IndexOutOfRange { index: p, factors: n });
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(AlgebraError::DuplicateIndex(p));
            }
        }
        let new_shape = self.shape.select(perm)?;
        let old_strides = self.shape.strides();
        let mut idx = vec![0; n];
        let amps = (0..self.dim())
            .map(|offset| {
                unravel(offset, new_shape.dims(), &mut idx);
                let src: usize = (0..n).map(|k| idx[k] * old_strides[perm[k]]).sum();
                self.amps[src]
            })
            .collect();
        Ok(Ket {
            shape: new_shape,
            amps,
        })
    }
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .amps
            .iter()
            .map(|a| format!("{}{:+}i", a.re, a.im))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// `⟨a|b⟩`, antilinear in `a`.
pub fn inner(a: &Ket, b: &Ket) -> Result<ComplexScalar> {
    if a.dim() != b.dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

pub fn tensor(a: &Ket, b: &Ket) -> Ket {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    Ket {
        shape: a.shape.concat(&b.shape),
        amps,
    }
}

/// Collinearity up to a complex factor: `|⟨a|b⟩| ≥ (1 - tol)‖a‖‖b‖`.
pub fn proportional(a: &Ket, b: &Ket, tol: f64) -> Result<bool> {
    proportional_with(a, b, tol, Tolerances::default().zero)
}

pub fn proportional_with(a: &Ket, b: &Ket, tol: f64, tol_zero: f64) -> Result<bool> {
    if a.is_negligible(tol_zero) || b.is_negligible(tol_zero) {
        return Err(AlgebraError::ZeroVector);
    }
    let overlap = inner(a, b)?.norm();
    Ok(overlap >= (1.0 - tol) * a.norm() * b.norm())
}

/// A square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    dim: usize,
    entries: Vec<ComplexScalar>,
}

impl Operator {
    /// Builds an operator checked for unitarity within `tol_unitary`.
    pub fn new(dim: usize, entries: Vec<ComplexScalar>, tol_unitary: f64) -> Result<Self> {
        let op = Self::unchecked(dim, entries)?;
        let dev = op.unitarity_deviation();
        if dev > tol_unitary {
            return Err(AlgebraError::NotUnitary(dev));
        }
        Ok(op)
    }

    /// Builds an operator without the unitarity check.
    pub fn unchecked(dim: usize, entries: Vec<ComplexScalar>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(AlgebraError::LengthMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(AlgebraError::NonFinite);
        }
        Ok(Operator { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<ComplexScalar>], tol_unitary: f64) -> Result<Self> {
        let dim = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(AlgebraError::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Self::new(dim, rows.concat(), tol_unitary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[ComplexScalar] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> ComplexScalar {
        self.entries[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Operator {
        let d = self.dim;
        let entries = (0..d * d)
            .map(|k| self.entries[(k % d) * d + k / d].conj())
            .collect();
        Operator { dim: d, entries }
    }

    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.dim != other.dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let d = self.dim;
        let entries = (0..d * d)
            .map(|k| {
                let (r, c) = (k / d, k % d);
                (0..d).map(|m| self.get(r, m) * other.get(m, c)).sum()
            })
            .collect();
        Ok(Operator { dim: d, entries })
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let s: ComplexScalar = (0..d).map(|m| self.get(m, r).conj() * self.get(m, c)).sum();
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((s.re - target).abs().max(s.im.abs()));
            }
        }
        worst
    }

    /// Matrix-vector product on a single flat vector.
    pub fn mul_vec(&self, v: &[ComplexScalar]) -> Vec<ComplexScalar> {
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }
}

/// The conventional named gates.
pub mod gates {
    use super::*;

    fn c(re: f64) -> ComplexScalar {
        ComplexScalar::new(re, 0.0)
    }

    fn build(dim: usize, real: &[f64]) -> Operator {
        Operator::unchecked(dim, real.iter().map(|&x| c(x)).collect()).expect("static gate")
    }

    pub fn hadamard() -> Operator {
        let h = FRAC_1_SQRT_2;
        build(2, &[h, h, h, -h])
    }

    /// Control on the first factor, target on the second.
    pub fn cnot() -> Operator {
        #[rustfmt::skip]
        let m = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        build(4, &m)
    }

    pub fn sigma_x() -> Operator {
        build(2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn sigma_z() -> Operator {
        build(2, &[1.0, 0.0, 0.0, -1.0])
    }

    pub fn identity(dim: usize) -> Operator {
        let entries = (0..dim * dim)
            .map(|k| if k / dim == k % dim { c(1.0) } else { c(0.0) })
            .collect();
        Operator::unchecked(dim, entries).expect("identity")
    }

    /// `(name, operator)` pairs for every builtin gate.
    pub fn standard_gates() -> Vec<(&'static str, Operator)> {
        vec![
            ("H", hadamard()),
            ("CNOT", cnot()),
            ("SX", sigma_x()),
            ("SZ", sigma_z()),
            ("ID2", identity(2)),
        ]
    }
}

/// `(I ⊗ ... ⊗ U ⊗ ... ⊗ I)|k⟩` with `U` on factor `at`.
pub fn apply_operator(u: &Operator, k: &Ket, at: usize) -> Result<Ket> {
    apply_operator_on(u, k, &[at])
}

/// Applies `u` jointly to the factors at `positions`, taken in the given
/// order (so the first listed factor is the most significant index of `u`).
pub fn apply_operator_on(u: &Operator, k: &Ket, positions: &[usize]) -> Result<Ket> {
    let dims = k.shape.dims();
    let n = dims.len();
    check_positions(positions, n)?;
    let sub = k.shape.select(positions)?;
    if sub.total() != u.dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: sub.total(),
            found: u.dim(),
        });
    }
    let strides = k.shape.strides();
    let sub_dims = sub.dims().to_vec();
    // Offsets of every acted multi-index relative to the base offset.
    let mut local = vec![0; positions.len()];
    let rel: Vec<usize> = (0..sub.total())
        .map(|s| {
            unravel(s, &sub_dims, &mut local);
            positions.iter().zip(&local).map(|(&p, &i)| i * strides[p]).sum()
        })
        .collect();
    let rest: Vec<usize> = (0..n).filter(|p| !positions.contains(p)).collect();
    let rest_dims: Vec<usize> = rest.iter().map(|&p| dims[p]).collect();
    let rest_total: usize = rest_dims.iter().product();
    let mut out = k.amps.clone();
    let mut ridx = vec![0; rest.len()];
    let mut gathered = vec![ComplexScalar::new(0.0, 0.0); rel.len()];
    for r in 0..rest_total {
        unravel(r, &rest_dims, &mut ridx);
        let base: usize = rest.iter().zip(&ridx).map(|(&p, &i)| i * strides[p]).sum();
        for (g, off) in gathered.iter_mut().zip(&rel) {
            *g = k.amps[base + off];
        }
        for (value, off) in u.mul_vec(&gathered).into_iter().zip(&rel) {
            out[base + off] = value;
        }
    }
    Ok(Ket {
        shape: k.shape.clone(),
        amps: out,
    })
}

fn check_positions(positions: &[usize], factors: usize) -> Result<()> {
    let mut seen = vec![false; factors];
    for &p in positions {
        if p >= factors {
            return Err(AlgebraError::IndexOutOfRange { index: p, factors });
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(AlgebraError::DuplicateIndex(p));
        }
    }
    Ok(())
}

/// Partial application of `psi` at the factors `fixed_at`.
///
/// Returns the ket on the remaining factors (in their original order)
/// whose amplitude at `J` is `Σ_I ψ_{I,J} · conj(fixed_I)`, where `I` runs
/// over the fixed factors in ascending position order. Antilinear in
/// `fixed`. Contracting every factor is [`inner`] and is rejected here.
pub fn partial_apply(fixed_at: &[usize], fixed: &Ket, psi: &Ket) -> Result<Ket> {
    let dims = psi.shape.dims();
    let n = dims.len();
    check_positions(fixed_at, n)?;
    if fixed_at.is_empty() || fixed_at.len() == n {
        return Err(AlgebraError::InvalidContraction);
    }
    let mut fixed_pos = fixed_at.to_vec();
    fixed_pos.sort_unstable();
    let fixed_shape = psi.shape.select(&fixed_pos)?;
    if fixed_shape.dims() != fixed.shape.dims() {
        // A flat fixed vector of the right total size is accepted as well.
        if fixed.shape.factors() != 1 || fixed.dim() != fixed_shape.total() {
            return Err(AlgebraError::ShapeMismatch(fixed_shape, fixed.shape.clone()));
        }
    }
    let rest: Vec<usize> = (0..n).filter(|p| !fixed_pos.contains(p)).collect();
    let rest_shape = psi.shape.select(&rest)?;
    let strides = psi.shape.strides();
    let fixed_dims = fixed_shape.dims().to_vec();
    let mut fidx = vec![0; fixed_pos.len()];
    let fixed_off: Vec<usize> = (0..fixed_shape.total())
        .map(|s| {
            unravel(s, &fixed_dims, &mut fidx);
            fixed_pos.iter().zip(&fidx).map(|(&p, &i)| i * strides[p]).sum()
        })
        .collect();
    let rest_dims = rest_shape.dims().to_vec();
    let mut ridx = vec![0; rest.len()];
    let amps = (0..rest_shape.total())
        .map(|r| {
            unravel(r, &rest_dims, &mut ridx);
            let base: usize = rest.iter().zip(&ridx).map(|(&p, &i)| i * strides[p]).sum();
            fixed_off
                .iter()
                .zip(&fixed.amps)
                .map(|(off, f)| psi.amps[base + off] * f.conj())
                .sum()
        })
        .collect();
    Ok(Ket {
        shape: rest_shape,
        amps,
    })
}

/// Splits `psi` as `a ⊗ b` across the factor partition (`left`, rest), if
/// it is a product within `tol` (proportionality slack). The factors are
/// returned in ascending position order within each side.
pub fn factorize(psi: &Ket, left: &[usize], tol: f64, tol_zero: f64) -> Result<Option<(Ket, Ket)>> {
    let n = psi.shape.factors();
    check_positions(left, n)?;
    if left.is_empty() || left.len() == n {
        return Err(AlgebraError::InvalidContraction);
    }
    if psi.is_negligible(tol_zero) {
        return Err(AlgebraError::ZeroVector);
    }
    let mut lpos = left.to_vec();
    lpos.sort_unstable();
    let rpos: Vec<usize> = (0..n).filter(|p| !lpos.contains(p)).collect();
    let perm: Vec<usize> = lpos.iter().chain(&rpos).copied().collect();
    let m = psi.permute_factors(&perm)?;
    let lshape = psi.shape.select(&lpos)?;
    let rshape = psi.shape.select(&rpos)?;
    let (rows, cols) = (lshape.total(), rshape.total());
    let (pivot, _) = m
        .amps
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, a)| if a.norm() > best.1 { (i, a.norm()) } else { best });
    let (r0, c0) = (pivot / cols, pivot % cols);
    let p = m.amps[pivot];
    let column: Vec<ComplexScalar> = (0..rows).map(|r| m.amps[r * cols + c0]).collect();
    let row: Vec<ComplexScalar> = (0..cols).map(|c| m.amps[r0 * cols + c] / p).collect();
    let a = Ket::new(lshape, column)?;
    let b = Ket::new(rshape, row)?;
    let rebuilt = tensor(&a, &b);
    if proportional_with(&rebuilt, &m, tol, tol_zero)? {
        Ok(Some((a, b)))
    } else {
        Ok(None)
    }
}
