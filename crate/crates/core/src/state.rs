//! Pure states, density matrices and their entropy services.
//!
//! Entropies are in nats. The convention `0·ln 0 = 0` applies, and
//! eigenvalues in `[−1e-9, 0)` are treated as round-off and clipped to zero.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix, ComplexVector, CompositeIndex, C64};

/// Norm below which a vector is rejected rather than normalized.
pub const MIN_NORM: f64 = 1e-6;
/// Eigenvalues at or above `-EIGEN_CLIP` are considered non-negative.
pub const EIGEN_CLIP: f64 = 1e-9;
pub const DENSITY_TOL: f64 = 1e-9;
pub const ENSEMBLE_TOL: f64 = 1e-12;
/// Schmidt coefficients below this are dropped from the decomposition.
pub const SCHMIDT_CUTOFF: f64 = 1e-10;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// A normalized state vector on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    vector: ComplexVector,
    space: CompositeIndex,
}

impl PureState {
    /// Normalizes `vector`; fails only when its norm is below [`MIN_NORM`].
    pub fn new(vector: ComplexVector, space: CompositeIndex) -> Result<Self> {
        if vector.dim() != space.total() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} on a space of dimension {}",
                vector.dim(),
                space.total()
            )));
        }
        let norm = vector.norm();
        if !(norm >= MIN_NORM) || !norm.is_finite() {
            return Err(Error::ZeroNorm { norm });
        }
        Ok(Self {
            vector: vector.scale(C64::new(1.0 / norm, 0.0)),
            space,
        })
    }

    pub fn single(vector: ComplexVector) -> Result<Self> {
        let space = CompositeIndex::new(vec![vector.dim()])?;
        Self::new(vector, space)
    }

    pub fn bipartite(vector: ComplexVector, left: usize, right: usize) -> Result<Self> {
        Self::new(vector, CompositeIndex::bipartite(left, right)?)
    }

    /// `Σ_ij m[i][j] |i⟩⊗|j⟩` from a left-dim × right-dim amplitude matrix.
    pub fn from_amplitude_matrix(m: &ComplexMatrix) -> Result<Self> {
        Self::bipartite(
            ComplexVector::new(m.as_slice().to_vec()),
            m.rows(),
            m.cols(),
        )
    }

    pub fn product(a: &PureState, b: &PureState) -> Result<Self> {
        let mut dims = a.space.dims().to_vec();
        dims.extend_from_slice(b.space.dims());
        Self::new(a.vector.kron(&b.vector), CompositeIndex::new(dims)?)
    }

    pub fn vector(&self) -> &ComplexVector {
        &self.vector
    }

    pub fn space(&self) -> &CompositeIndex {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.vector.dim()
    }

    /// Amplitudes as a left × right matrix under `split`.
    pub fn amplitude_matrix(&self, split: Bipartition) -> Result<ComplexMatrix> {
        let (l, r) = split.dims(&self.space)?;
        ComplexMatrix::from_row_major(l, r, self.vector.as_slice().to_vec())
    }

    pub fn with_space(self, space: CompositeIndex) -> Result<Self> {
        Self::new(self.vector, space)
    }
}

/// Split of a composite space into factors `[0, cut)` and `[cut, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bipartition {
    pub cut: usize,
}

impl Bipartition {
    pub const fn after(cut: usize) -> Self {
        Self { cut }
    }

    /// The usual system|environment split of a two-factor space.
    pub const FIRST: Bipartition = Bipartition { cut: 1 };

    pub fn dims(&self, space: &CompositeIndex) -> Result<(usize, usize)> {
        let m = space.factors();
        if m < 2 {
            return Err(Error::NotBipartite(format!(
                "space has {m} factor(s); at least two are required"
            )));
        }
        if self.cut == 0 || self.cut >= m {
            return Err(Error::NotBipartite(format!(
                "cut {} does not split {m} factors",
                self.cut
            )));
        }
        let left = space.dims()[..self.cut].iter().product();
        let right = space.dims()[self.cut..].iter().product();
        Ok((left, right))
    }
}

/// Trace-one, Hermitian, positive semi-definite matrix on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    space: CompositeIndex,
}

impl DensityMatrix {
    /// Validates all invariants, including positivity via an eigensolve.
    pub fn new(matrix: ComplexMatrix, space: CompositeIndex) -> Result<Self> {
        let rho = Self::checked_structure(matrix, space)?;
        let min = rho.min_eigenvalue()?;
        if min < -DENSITY_TOL {
            return Err(Error::NegativeEigenvalueBeyondTolerance { value: min });
        }
        Ok(rho)
    }

    /// Checks shape, Hermiticity and trace only; positivity must follow
    /// from the construction.
    pub(crate) fn checked_structure(matrix: ComplexMatrix, space: CompositeIndex) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NonSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        if matrix.rows() != space.total() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a space of dimension {}",
                matrix.rows(),
                matrix.cols(),
                space.total()
            )));
        }
        let dev = matrix.hermitian_deviation();
        if dev > DENSITY_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: DENSITY_TOL,
            });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
        }
        Ok(Self { matrix, space })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn space(&self) -> &CompositeIndex {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eig(&self.matrix)?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// `tr ρ²`
    pub fn purity(&self) -> f64 {
        // Hermitian, so tr ρ² = Σ |ρ_ij|²
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        let space = CompositeIndex::new(vec![dim])?;
        Self::checked_structure(
            ComplexMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
            space,
        )
    }

    /// `U ρ U†`
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        let m = u.matmul(&self.matrix).matmul(&u.adjoint());
        Self::checked_structure(m, self.space.clone())
    }

    pub fn kron(&self, other: &Self) -> Result<Self> {
        let mut dims = self.space.dims().to_vec();
        dims.extend_from_slice(other.space.dims());
        let m = crate::linalg::kron(&self.matrix, &other.matrix)?;
        Self::checked_structure(m, CompositeIndex::new(dims)?)
    }
}

/// Classical mixture of pure states.
#[derive(Debug, Clone)]
pub struct MixedEnsemble {
    probabilities: Vec<f64>,
    states: Vec<PureState>,
}

impl MixedEnsemble {
    pub fn new(probabilities: Vec<f64>, states: Vec<PureState>) -> Result<Self> {
        if probabilities.len() != states.len() || states.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {} states",
                probabilities.len(),
                states.len()
            )));
        }
        if let Some((index, &value)) = probabilities.iter().enumerate().find(|(_, &p)| p < 0.0) {
            return Err(Error::NegativeProbability { index, value });
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > ENSEMBLE_TOL {
            return Err(Error::ProbabilityNotNormalized { sum });
        }
        let space = states[0].space();
        if states.iter().any(|s| s.space() != space) {
            return Err(Error::DimensionMismatch(
                "ensemble states live on different spaces".into(),
            ));
        }
        Ok(Self {
            probabilities,
            states,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }
}

/// `|Ψ⟩⟨Ψ|`
pub fn density_from_pure(s: &PureState) -> DensityMatrix {
    let m = s.vector.outer(&s.vector);
    DensityMatrix::checked_structure(m, s.space.clone())
        .expect("outer product of a normalized vector is a density matrix")
}

/// `Σ_k p_k |Ψ_k⟩⟨Ψ_k|`
pub fn density_from_ensemble(e: &MixedEnsemble) -> Result<DensityMatrix> {
    let space = e.states[0].space.clone();
    let n = space.total();
    let mut m = ComplexMatrix::zeros(n, n);
    for (p, s) in e.probabilities.iter().zip(&e.states) {
        m = m.add(&s.vector.outer(&s.vector).scale(C64::new(*p, 0.0)));
    }
    DensityMatrix::checked_structure(m, space)
}

/// `−Σ λ ln λ` over a spectrum, with clipping of round-off negatives.
pub fn entropy_from_eigenvalues(values: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in values {
        if l < -EIGEN_CLIP {
            return Err(Error::NegativeEigenvalueBeyondTolerance { value: l });
        }
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s)
}

/// Von Neumann entropy `−tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_from_eigenvalues(&rho.eigenvalues()?)
}

/// Traces out every factor not listed in `keep`. Kept factors retain their
/// original relative order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let space = rho.space();
    let m = space.factors();
    if m < 2 {
        return Err(Error::BadSelector(
            "partial trace needs at least two factors".into(),
        ));
    }
    if keep.is_empty() {
        return Err(Error::BadSelector("no factors selected".into()));
    }
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    if kept.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::BadSelector(format!("duplicate factor in {keep:?}")));
    }
    if let Some(&bad) = kept.iter().find(|&&f| f >= m) {
        return Err(Error::BadSelector(format!(
            "factor {bad} out of range for {m} factors"
        )));
    }
    let traced: Vec<usize> = (0..m).filter(|f| !kept.contains(f)).collect();

    let dims = space.dims();
    let mut strides = vec![1usize; m];
    for f in (0..m - 1).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let offsets = |factors: &[usize]| -> Vec<usize> {
        let sub: Vec<usize> = factors.iter().map(|&f| dims[f]).collect();
        let count: usize = sub.iter().product();
        let sub_index = CompositeIndex::new(sub).expect("sub-space of a valid space");
        (0..count)
            .map(|k| {
                sub_index
                    .unflatten(k)
                    .iter()
                    .zip(factors)
                    .map(|(&i, &f)| i * strides[f])
                    .sum()
            })
            .collect()
    };
    let kept_off = offsets(&kept);
    let traced_off = if traced.is_empty() { vec![0] } else { offsets(&traced) };

    let n = kept_off.len();
    let full = rho.matrix();
    let mut out = ComplexMatrix::zeros(n, n);
    for (a, &ka) in kept_off.iter().enumerate() {
        for (b, &kb) in kept_off.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += full[(ka + t, kb + t)];
            }
            out[(a, b)] = acc;
        }
    }
    let kept_space = CompositeIndex::new(kept.iter().map(|&f| dims[f]).collect())?;
    DensityMatrix::checked_structure(out, kept_space)
}

/// Schmidt form `Σ_k c_k |u_k⟩⊗|v_k⟩` of a bipartite pure state.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Non-negative, descending.
    pub coefficients: Vec<f64>,
    pub left_vectors: Vec<ComplexVector>,
    pub right_vectors: Vec<ComplexVector>,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    pub fn reconstruct(&self) -> ComplexVector {
        let dim = self.left_vectors.first().map_or(0, |u| u.dim())
            * self.right_vectors.first().map_or(0, |v| v.dim());
        let mut out = ComplexVector::zeros(dim);
        for ((c, u), v) in self
            .coefficients
            .iter()
            .zip(&self.left_vectors)
            .zip(&self.right_vectors)
        {
            out = out.add(&u.kron(v).scale(C64::new(*c, 0.0)));
        }
        out
    }

    /// Entropy of entanglement `−Σ c² ln c²`.
    pub fn entropy(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c * c)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }
}

/// Schmidt decomposition via the eigenvectors of the left reduced density
/// matrix; right vectors are the normalized projections `⟨u_k|Ψ⟩`.
pub fn schmidt(s: &PureState, split: Bipartition) -> Result<SchmidtDecomposition> {
    let m = s.amplitude_matrix(split)?;
    let (l, r) = (m.rows(), m.cols());
    let rho_left = m.matmul(&m.adjoint());
    let eig = hermitian_eig(&rho_left)?;

    let mut terms: Vec<(f64, ComplexVector, ComplexVector)> = Vec::new();
    for k in (0..l).rev() {
        let u = eig.vectors.column(k);
        let w = ComplexVector::new(
            (0..r)
                .map(|j| (0..l).map(|i| u[i].conj() * m[(i, j)]).sum())
                .collect(),
        );
        let c = w.norm();
        if c > SCHMIDT_CUTOFF {
            terms.push((c, u, w.scale(C64::new(1.0 / c, 0.0))));
        }
    }
    terms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = SchmidtDecomposition {
        coefficients: Vec::with_capacity(terms.len()),
        left_vectors: Vec::with_capacity(terms.len()),
        right_vectors: Vec::with_capacity(terms.len()),
    };
    for (c, u, v) in terms {
        out.coefficients.push(c);
        out.left_vectors.push(u);
        out.right_vectors.push(v);
    }
    Ok(out)
}

/// `(S(ρ_left), S(ρ_right))`, each from an explicit partial trace of `|Ψ⟩⟨Ψ|`.
pub fn entanglement_entropy_pair(s: &PureState, split: Bipartition) -> Result<(f64, f64)> {
    split.dims(s.space())?;
    let m = s.space().factors();
    let rho = density_from_pure(s);
    let left: Vec<usize> = (0..split.cut).collect();
    let right: Vec<usize> = (split.cut..m).collect();
    let s_left = von_neumann_entropy(&partial_trace(&rho, &left)?)?;
    let s_right = von_neumann_entropy(&partial_trace(&rho, &right)?)?;
    Ok((s_left, s_right))
}
