//! Truncated bosonic Fock-space linear algebra.
//!
//! Every mode is truncated to the levels `|0⟩..|dim−1⟩`. Multi-mode bases use
//! Kronecker (row-major) order: mode 0 is the most significant digit, so the
//! basis index of `|n_0, n_1, …, n_{k−1}⟩` is `((n_0·dim + n_1)·dim + …)`.
//! Storage is dense throughout.

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::scalar::{c_re, Cplx, Real};

/// Largest basis size accepted for a space (guards `dim^n_modes` blowups).
pub const MAX_BASIS_SIZE: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FockError {
    #[error("Fock cutoff must be at least 2, got {0}")]
    DimTooSmall(usize),
    #[error("a space needs at least one mode")]
    NoModes,
    #[error("basis size {dim}^{n_modes} exceeds the supported maximum")]
    TooLarge { dim: usize, n_modes: usize },
    #[error("expected a single-mode space, got {0} modes")]
    NotSingleMode(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid mode permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("operator has non-finite entries")]
    NonFinite,
    #[error("singular matrix encountered while solving the Padé system")]
    Singular,
}

/// A product of `n_modes` bosonic modes, each truncated at `dim` levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncatedSpace {
    dim: usize,
    n_modes: usize,
}

impl TruncatedSpace {
    pub fn new(dim: usize, n_modes: usize) -> Result<Self, FockError> {
        if dim < 2 {
            return Err(FockError::DimTooSmall(dim));
        }
        if n_modes == 0 {
            return Err(FockError::NoModes);
        }
        match u32::try_from(n_modes).ok().and_then(|n| dim.checked_pow(n)) {
            Some(size) if size <= MAX_BASIS_SIZE => Ok(Self { dim, n_modes }),
            _ => Err(FockError::TooLarge { dim, n_modes }),
        }
    }

    pub fn single_mode(dim: usize) -> Result<Self, FockError> {
        Self::new(dim, 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Total basis size `dim^n_modes`.
    pub fn basis_size(&self) -> usize {
        self.dim.pow(self.n_modes as u32)
    }

    /// Same cutoff, different mode count.
    pub fn with_modes(&self, n_modes: usize) -> Result<Self, FockError> {
        Self::new(self.dim, n_modes)
    }

    /// Occupation numbers of basis index `index`.
    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes];
        for slot in occ.iter_mut().rev() {
            *slot = index % self.dim;
            index /= self.dim;
        }
        occ
    }

    /// Basis index of an occupation pattern; `None` if it leaves the truncation.
    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        if occupations.len() != self.n_modes {
            return None;
        }
        occupations.iter().try_fold(0usize, |acc, &n| {
            (n < self.dim).then_some(acc * self.dim + n)
        })
    }

    fn require_single_mode(&self) -> Result<(), FockError> {
        if self.n_modes == 1 {
            Ok(())
        } else {
            Err(FockError::NotSingleMode(self.n_modes))
        }
    }
}

/// Dense complex operator on a [`TruncatedSpace`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator<T: Real> {
    space: TruncatedSpace,
    data: Vec<Cplx<T>>,
}

impl<T: Real> Operator<T> {
    pub fn zeros(space: TruncatedSpace) -> Self {
        let n = space.basis_size();
        Self { space, data: vec![Complex::zero(); n * n] }
    }

    pub fn identity(space: TruncatedSpace) -> Self {
        let mut op = Self::zeros(space);
        let side = op.side();
        for i in 0..side {
            op.data[i * side + i] = Complex::one();
        }
        op
    }

    /// Builds an operator from row-major entries.
    pub fn from_entries(space: TruncatedSpace, data: Vec<Cplx<T>>) -> Result<Self, FockError> {
        let n = space.basis_size();
        if data.len() != n * n {
            return Err(FockError::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { space, data })
    }

    /// Real diagonal operator.
    pub fn from_diagonal(space: TruncatedSpace, diag: &[T]) -> Result<Self, FockError> {
        if diag.len() != space.basis_size() {
            return Err(FockError::DimensionMismatch(format!(
                "diagonal of length {} on basis of size {}",
                diag.len(),
                space.basis_size()
            )));
        }
        let mut op = Self::zeros(space);
        let n = op.side();
        for (i, &d) in diag.iter().enumerate() {
            op.data[i * n + i] = c_re(d);
        }
        Ok(op)
    }

    /// Number operator `a†a` on a single mode.
    pub fn number(space: TruncatedSpace) -> Result<Self, FockError> {
        space.require_single_mode()?;
        let diag: Vec<T> = (0..space.dim()).map(T::from_count).collect();
        Self::from_diagonal(space, &diag)
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    /// Side length `dim^n_modes`.
    pub fn side(&self) -> usize {
        self.space.basis_size()
    }

    pub fn get(&self, row: usize, col: usize) -> Cplx<T> {
        self.data[row * self.side() + col]
    }

    pub fn entries(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<Cplx<T>> {
        (0..self.side()).map(|i| self.get(i, i)).collect()
    }

    fn check_same_space(&self, other: &Self) -> Result<(), FockError> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(FockError::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.space, other.space
            )))
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, FockError> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space, data: mat_mul(self.side(), &self.data, &other.data) })
    }

    pub fn add(&self, other: &Self) -> Result<Self, FockError> {
        self.check_same_space(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { space: self.space, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FockError> {
        self.check_same_space(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { space: self.space, data })
    }

    pub fn scale(&self, factor: Cplx<T>) -> Self {
        Self { space: self.space, data: self.data.iter().map(|z| z * factor).collect() }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.side();
        let mut data = vec![Complex::zero(); n * n];
        for r in 0..n {
            for c in 0..n {
                data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        Self { space: self.space, data }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        let n = self.side();
        (0..n).all(|r| (r..n).all(|c| (self.get(r, c) - self.get(c, r).conj()).norm() <= tol))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn apply(&self, state: &StateVector<T>) -> Result<StateVector<T>, FockError> {
        if self.space != state.space {
            return Err(FockError::DimensionMismatch(format!(
                "operator on {:?}, state on {:?}",
                self.space, state.space
            )));
        }
        let n = self.side();
        let amps = (0..n)
            .map(|r| {
                self.data[r * n..(r + 1) * n]
                    .iter()
                    .zip(&state.amps)
                    .fold(Complex::zero(), |acc, (a, x)| acc + a * x)
            })
            .collect();
        Ok(StateVector { space: self.space, amps })
    }
}

/// Pure state on a [`TruncatedSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    space: TruncatedSpace,
    amps: Vec<Cplx<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn from_amplitudes(space: TruncatedSpace, amps: Vec<Cplx<T>>) -> Result<Self, FockError> {
        if amps.len() != space.basis_size() {
            return Err(FockError::DimensionMismatch(format!(
                "{} amplitudes on basis of size {}",
                amps.len(),
                space.basis_size()
            )));
        }
        Ok(Self { space, amps })
    }

    /// Fock basis state `|n_0, n_1, …⟩`.
    pub fn basis(space: TruncatedSpace, occupations: &[usize]) -> Result<Self, FockError> {
        let idx = space.index_of(occupations).ok_or_else(|| {
            FockError::DimensionMismatch(format!(
                "occupations {occupations:?} outside {space:?}"
            ))
        })?;
        let mut amps = vec![Complex::zero(); space.basis_size()];
        amps[idx] = Complex::one();
        Ok(Self { space, amps })
    }

    /// All modes in vacuum.
    pub fn vacuum(space: TruncatedSpace) -> Self {
        let mut amps = vec![Complex::zero(); space.basis_size()];
        amps[0] = Complex::one();
        Self { space, amps }
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &[Cplx<T>] {
        &self.amps
    }

    /// Amplitude of an occupation pattern (zero outside the truncation).
    pub fn amplitude(&self, occupations: &[usize]) -> Cplx<T> {
        self.space
            .index_of(occupations)
            .map_or(Complex::zero(), |i| self.amps[i])
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n.is_zero() {
            return self.clone();
        }
        Self { space: self.space, amps: self.amps.iter().map(|z| z / n).collect() }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Cplx<T>, FockError> {
        if self.space != other.space {
            return Err(FockError::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.space, other.space
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b))
    }
}

/// Single-mode annihilation operator `a`, entries `√n` at `(n−1, n)`.
pub fn annihilation<T: Real>(space: TruncatedSpace) -> Result<Operator<T>, FockError> {
    space.require_single_mode()?;
    let mut op = Operator::zeros(space);
    let d = space.dim();
    for n in 1..d {
        op.data[(n - 1) * d + n] = c_re(T::from_count(n).sqrt());
    }
    Ok(op)
}

/// Single-mode creation operator `a†`; the top level maps to zero.
pub fn creation<T: Real>(space: TruncatedSpace) -> Result<Operator<T>, FockError> {
    Ok(annihilation(space)?.adjoint())
}

fn product_space(spaces: impl Iterator<Item = TruncatedSpace>) -> Result<TruncatedSpace, FockError> {
    let mut dim = None;
    let mut modes = 0;
    for s in spaces {
        match dim {
            None => dim = Some(s.dim()),
            Some(d) if d != s.dim() => {
                return Err(FockError::DimensionMismatch(format!(
                    "cannot tensor cutoffs {d} and {}",
                    s.dim()
                )))
            }
            _ => {}
        }
        modes += s.n_modes();
    }
    let dim = dim.ok_or(FockError::NoModes)?;
    TruncatedSpace::new(dim, modes)
}

/// Kronecker product of operators in argument order.
pub fn tensor<T: Real>(ops: &[&Operator<T>]) -> Result<Operator<T>, FockError> {
    let space = product_space(ops.iter().map(|o| o.space))?;
    let mut side = 1usize;
    let mut data = vec![Complex::one()];
    for op in ops {
        let m = op.side();
        let new_side = side * m;
        let mut next = vec![Complex::zero(); new_side * new_side];
        for r1 in 0..side {
            for c1 in 0..side {
                let a = data[r1 * side + c1];
                if a.is_zero() {
                    continue;
                }
                for r2 in 0..m {
                    let row = (r1 * m + r2) * new_side + c1 * m;
                    for c2 in 0..m {
                        next[row + c2] = a * op.data[r2 * m + c2];
                    }
                }
            }
        }
        side = new_side;
        data = next;
    }
    Ok(Operator { space, data })
}

/// Kronecker product of states in argument order.
pub fn tensor_states<T: Real>(states: &[&StateVector<T>]) -> Result<StateVector<T>, FockError> {
    let space = product_space(states.iter().map(|s| s.space))?;
    let mut amps = vec![Complex::one()];
    for s in states {
        amps = amps
            .iter()
            .flat_map(|a| s.amps.iter().map(move |b| a * b))
            .collect();
    }
    Ok(StateVector { space, amps })
}

/// Reorders modes: mode `k` of the result is mode `perm[k]` of the input.
pub fn permute_modes<T: Real>(
    state: &StateVector<T>,
    perm: &[usize],
) -> Result<StateVector<T>, FockError> {
    let n = state.space.n_modes();
    let mut seen = vec![false; n];
    if perm.len() != n || !perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true)) {
        return Err(FockError::InvalidPermutation(perm.to_vec()));
    }
    let space = state.space;
    let mut amps = vec![Complex::zero(); space.basis_size()];
    let mut old = vec![0; n];
    for (new_idx, slot) in amps.iter_mut().enumerate() {
        let new_occ = space.occupations(new_idx);
        for (k, &p) in perm.iter().enumerate() {
            old[p] = new_occ[k];
        }
        let old_idx = old.iter().fold(0, |acc, &m| acc * space.dim() + m);
        *slot = state.amps[old_idx];
    }
    Ok(StateVector { space, amps })
}

/// `⟨ψ|O|ψ⟩`.
pub fn expectation<T: Real>(op: &Operator<T>, state: &StateVector<T>) -> Result<Cplx<T>, FockError> {
    let applied = op.apply(state)?;
    state.inner(&applied)
}

/// `⟨ψ|A_0 ⊗ A_1 ⊗ … |ψ⟩` for single-mode factors, without forming the product.
pub fn expectation_product<T: Real>(
    factors: &[&Operator<T>],
    state: &StateVector<T>,
) -> Result<Cplx<T>, FockError> {
    let space = state.space;
    if factors.len() != space.n_modes() {
        return Err(FockError::DimensionMismatch(format!(
            "{} factors for {} modes",
            factors.len(),
            space.n_modes()
        )));
    }
    let d = space.dim();
    let mut work = state.amps.clone();
    for (mode, op) in factors.iter().enumerate() {
        if op.space != TruncatedSpace::single_mode(d)? {
            return Err(FockError::DimensionMismatch(format!(
                "factor {mode} lives on {:?}, expected one mode of cutoff {d}",
                op.space
            )));
        }
        work = apply_on_mode(op, mode, space, &work);
    }
    let applied = StateVector { space, amps: work };
    state.inner(&applied)
}

fn apply_on_mode<T: Real>(
    op: &Operator<T>,
    mode: usize,
    space: TruncatedSpace,
    amps: &[Cplx<T>],
) -> Vec<Cplx<T>> {
    let d = space.dim();
    let right = d.pow((space.n_modes() - 1 - mode) as u32);
    let left = amps.len() / (d * right);
    let mut out = vec![Complex::zero(); amps.len()];
    for l in 0..left {
        let base = l * d * right;
        for i in 0..d {
            for j in 0..d {
                let a = op.data[i * d + j];
                if a.is_zero() {
                    continue;
                }
                let src = &amps[base + j * right..base + (j + 1) * right];
                let dst = &mut out[base + i * right..base + (i + 1) * right];
                for (o, x) in dst.iter_mut().zip(src) {
                    *o = *o + a * x;
                }
            }
        }
    }
    out
}

// Padé-13 coefficients and the corresponding 1-norm bound.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm<T: Real>(op: &Operator<T>) -> Result<Operator<T>, FockError> {
    if !op.is_finite() {
        return Err(FockError::NonFinite);
    }
    let n = op.side();
    let norm = norm_one(n, &op.data);
    let squarings = if norm.to_f64().unwrap_or(f64::INFINITY) > THETA13 {
        (norm.to_f64().unwrap() / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = T::lit(2f64.powi(-squarings));
    let a: Vec<Cplx<T>> = op.data.iter().map(|z| z * scale).collect();
    let b = |k: usize| c_re(T::lit(PADE13[k]));

    let a2 = mat_mul(n, &a, &a);
    let a4 = mat_mul(n, &a2, &a2);
    let a6 = mat_mul(n, &a4, &a2);
    let ident = Operator::<T>::identity(op.space).data;
    let lin = |terms: &[(&[Cplx<T>], Cplx<T>)]| -> Vec<Cplx<T>> {
        (0..n * n)
            .map(|i| terms.iter().fold(Complex::zero(), |acc, (m, c)| acc + m[i] * c))
            .collect()
    };

    let u_inner = mat_mul(n, &a6, &lin(&[(&a6, b(13)), (&a4, b(11)), (&a2, b(9))]));
    let u_sum: Vec<_> = u_inner
        .iter()
        .zip(lin(&[(&a6, b(7)), (&a4, b(5)), (&a2, b(3)), (&ident, b(1))]))
        .map(|(x, y)| x + y)
        .collect();
    let u = mat_mul(n, &a, &u_sum);
    let v_inner = mat_mul(n, &a6, &lin(&[(&a6, b(12)), (&a4, b(10)), (&a2, b(8))]));
    let v: Vec<_> = v_inner
        .iter()
        .zip(lin(&[(&a6, b(6)), (&a4, b(4)), (&a2, b(2)), (&ident, b(0))]))
        .map(|(x, y)| x + y)
        .collect();

    let p: Vec<_> = v.iter().zip(&u).map(|(x, y)| x + y).collect();
    let q: Vec<_> = v.iter().zip(&u).map(|(x, y)| x - y).collect();
    let mut r = solve(n, q, p)?;
    for _ in 0..squarings {
        r = mat_mul(n, &r, &r);
    }
    Ok(Operator { space: op.space, data: r })
}

fn norm_one<T: Real>(n: usize, a: &[Cplx<T>]) -> T {
    (0..n)
        .map(|c| (0..n).map(|r| a[r * n + c].norm()).sum::<T>())
        .fold(T::zero(), T::max)
}

fn mat_mul<T: Real>(n: usize, a: &[Cplx<T>], b: &[Cplx<T>]) -> Vec<Cplx<T>> {
    let mut out = vec![Complex::zero(); n * n];
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik.is_zero() {
                continue;
            }
            for (o, bkj) in row.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                *o = *o + aik * bkj;
            }
        }
    }
    out
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
fn solve<T: Real>(n: usize, mut a: Vec<Cplx<T>>, mut b: Vec<Cplx<T>>) -> Result<Vec<Cplx<T>>, FockError> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].norm().partial_cmp(&a[j * n + col].norm()).unwrap())
            .unwrap();
        if a[pivot * n + col].norm() <= T::min_positive_value() {
            return Err(FockError::Singular);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
                b.swap(col * n + k, pivot * n + k);
            }
        }
        let inv = a[col * n + col].inv();
        for row in col + 1..n {
            let factor = a[row * n + col] * inv;
            if factor.is_zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] = a[row * n + k] - factor * v;
            }
            for k in 0..n {
                let v = b[col * n + k];
                b[row * n + k] = b[row * n + k] - factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = a[col * n + col].inv();
        for k in 0..n {
            let mut acc = b[col * n + k];
            for j in col + 1..n {
                acc = acc - a[col * n + j] * b[j * n + k];
            }
            b[col * n + k] = acc * inv;
        }
    }
    Ok(b)
}
