//! Model-agnostic spectral machinery: eigendecompositions, energy shells,
//! binary classifiers, and the classifier ratio `f`.
//!
//! Every model system in this crate reduces to the same pipeline: diagonalize
//! an operator, select the eigenstates inside an energy shell, apply a
//! thresholded feature functional to each, and report the fraction of states
//! the classifier accepts. The pieces here are shared by all of them.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2, ShapeBuilder};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lapack;

/// Maximum relative asymmetry accepted by the Hermitian eigensolvers.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;
/// Maximum |U†U - I| entry accepted by the unitary eigensolver.
pub const UNITARY_TOL: f64 = 1e-8;
/// Orthonormality tolerance enforced on stored eigenvector columns.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Eigenvector storage; column `k` belongs to `energies[k]`.
#[derive(Debug, Clone)]
pub enum StateMatrix {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

impl StateMatrix {
    pub fn ncols(&self) -> usize {
        match self {
            StateMatrix::Real(m) => m.ncols(),
            StateMatrix::Complex(m) => m.ncols(),
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            StateMatrix::Real(m) => m.nrows(),
            StateMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn column(&self, k: usize) -> StateColumn<'_> {
        match self {
            StateMatrix::Real(m) => StateColumn::Real(m.column(k)),
            StateMatrix::Complex(m) => StateColumn::Complex(m.column(k)),
        }
    }
}

/// A borrowed eigenvector.
#[derive(Debug, Clone, Copy)]
pub enum StateColumn<'a> {
    Real(ArrayView1<'a, f64>),
    Complex(ArrayView1<'a, Complex64>),
}

impl<'a> StateColumn<'a> {
    pub fn len(&self) -> usize {
        match self {
            StateColumn::Real(v) => v.len(),
            StateColumn::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Squared modulus of component `i`.
    pub fn prob(&self, i: usize) -> f64 {
        match self {
            StateColumn::Real(v) => v[i] * v[i],
            StateColumn::Complex(v) => v[i].norm_sqr(),
        }
    }
}

/// Per-state quantum numbers carried alongside a spectrum (radial and
/// angular for billiard modes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLabel {
    pub n: i64,
    pub m: i64,
}

/// Ordered eigenvalues with optional eigenvectors and per-state labels.
#[derive(Debug, Clone)]
pub struct SpectrumRecord {
    energies: Vec<f64>,
    states: Option<StateMatrix>,
    labels: Option<Vec<StateLabel>>,
}

impl SpectrumRecord {
    /// Build a record, enforcing the invariants: energies ascending and
    /// finite; eigenvector columns (when present) orthonormal to 1e-8 and as
    /// numerous as the energies; labels (when present) aligned one-to-one.
    pub fn new(
        energies: Vec<f64>,
        states: Option<StateMatrix>,
        labels: Option<Vec<StateLabel>>,
    ) -> Result<Self> {
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("non-finite eigenvalue".into()));
        }
        if energies.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("energies not ascending".into()));
        }
        if let Some(s) = &states {
            if s.ncols() != energies.len() {
                return Err(Error::InvalidInput(format!(
                    "state count {} != energy count {}",
                    s.ncols(),
                    energies.len()
                )));
            }
            let worst = worst_orthonormality(s);
            if worst > ORTHONORMAL_TOL {
                return Err(Error::InvalidInput(format!(
                    "eigenvector columns not orthonormal: worst deviation {worst:.3e}"
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != energies.len() {
                return Err(Error::InvalidInput("label count mismatch".into()));
            }
        }
        Ok(Self {
            energies,
            states,
            labels,
        })
    }

    /// Construction without the O(n·m²) orthonormality sweep, for solver
    /// outputs and verified cache loads. Ordering is still enforced.
    pub(crate) fn new_unchecked(
        energies: Vec<f64>,
        states: Option<StateMatrix>,
        labels: Option<Vec<StateLabel>>,
    ) -> Self {
        debug_assert!(energies.windows(2).all(|w| w[0] <= w[1]));
        Self {
            energies,
            states,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn states(&self) -> Option<&StateMatrix> {
        self.states.as_ref()
    }

    pub fn labels(&self) -> Option<&[StateLabel]> {
        self.labels.as_deref()
    }

    pub fn state(&self, k: usize) -> Option<StateColumn<'_>> {
        self.states.as_ref().map(|s| s.column(k))
    }

    /// Borrow state `k` together with its energy and label.
    pub fn view(&self, k: usize) -> StateView<'_> {
        StateView {
            index: k,
            energy: self.energies[k],
            vector: self.state(k),
            label: self.labels.as_ref().map(|l| &l[k]),
        }
    }
}

/// One eigenstate as seen by a classifier feature.
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub index: usize,
    pub energy: f64,
    pub vector: Option<StateColumn<'a>>,
    pub label: Option<&'a StateLabel>,
}

fn worst_orthonormality(s: &StateMatrix) -> f64 {
    let m = s.ncols();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in i..m {
            let expect = if i == j { 1.0 } else { 0.0 };
            let dot = match s {
                StateMatrix::Real(v) => v.column(i).dot(&v.column(j)),
                StateMatrix::Complex(v) => {
                    let z: Complex64 = v
                        .column(i)
                        .iter()
                        .zip(v.column(j).iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    z.norm()
                }
            };
            worst = worst.max((dot - expect).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Eigendecompositions
// ---------------------------------------------------------------------------

fn check_square<T>(h: &ArrayView2<T>) -> Result<usize> {
    let (r, c) = h.dim();
    if r != c || r == 0 {
        return Err(Error::InvalidInput(format!(
            "matrix must be square and nonempty, got {r}x{c}"
        )));
    }
    Ok(r)
}

fn max_abs_real(h: &ArrayView2<f64>) -> f64 {
    h.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

fn symmetry_defect(h: &ArrayView2<f64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

fn hermiticity_defect(h: &ArrayView2<Complex64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

fn reject_non_self_adjoint(defect: f64, scale: f64) -> Result<()> {
    let tolerance = SELF_ADJOINT_TOL * scale.max(f64::MIN_POSITIVE);
    if defect > tolerance {
        return Err(Error::NotSelfAdjoint {
            max_asymmetry: defect,
            tolerance,
        });
    }
    Ok(())
}

/// Column-major copy of a real matrix (symmetrized to kill roundoff skew).
fn to_col_major_sym(h: &ArrayView2<f64>) -> Vec<f64> {
    let n = h.nrows();
    let mut buf = vec![0.0f64; n * n];
    for j in 0..n {
        for i in 0..n {
            buf[i + j * n] = 0.5 * (h[(i, j)] + h[(j, i)]);
        }
    }
    buf
}

fn to_col_major_complex(h: &ArrayView2<Complex64>) -> Vec<Complex64> {
    let n = h.nrows();
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            buf[i + j * n] = h[(i, j)];
        }
    }
    buf
}

fn col_major_to_array_real(buf: Vec<f64>, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_vec((n, m).f(), buf).expect("column-major shape")
}

fn col_major_to_array_complex(buf: Vec<Complex64>, n: usize, m: usize) -> Array2<Complex64> {
    Array2::from_shape_vec((n, m).f(), buf).expect("column-major shape")
}

/// Full eigendecomposition of a real symmetric matrix.
///
/// Rejects inputs whose asymmetry exceeds 1e-10 relative to the largest
/// entry, reporting the worst offender. Eigenvalues come back ascending with
/// orthonormal eigenvector columns.
pub fn eig_symmetric(h: ArrayView2<f64>) -> Result<SpectrumRecord> {
    let n = check_square(&h)?;
    reject_non_self_adjoint(symmetry_defect(&h), max_abs_real(&h))?;
    let (w, v) = lapack::sym_eig_full(to_col_major_sym(&h), n)?;
    Ok(SpectrumRecord::new_unchecked(
        w,
        Some(StateMatrix::Real(col_major_to_array_real(v, n, n))),
        None,
    ))
}

/// Eigenvalues only, for a real symmetric matrix.
pub fn eig_symmetric_values(h: ArrayView2<f64>) -> Result<Vec<f64>> {
    let n = check_square(&h)?;
    reject_non_self_adjoint(symmetry_defect(&h), max_abs_real(&h))?;
    lapack::sym_eig_values(to_col_major_sym(&h), n)
}

/// A full eigenvalue list plus eigenvectors restricted to an energy window.
///
/// Large shells only ever consume eigenvectors near the shell center, so this
/// avoids materializing the O(n²) eigenvector matrix of a full solve.
#[derive(Debug, Clone)]
pub struct WindowedSpectrum {
    /// States inside the window, with eigenvectors.
    pub record: SpectrumRecord,
    /// The complete ascending eigenvalue list.
    pub all_energies: Vec<f64>,
    /// Index of the first window state inside `all_energies`.
    pub first_index: usize,
    /// The window `[lo, hi]` the eigenvectors cover.
    pub window: (f64, f64),
}

/// Eigendecomposition of a real symmetric matrix with eigenvectors computed
/// only for eigenvalues in `[lo, hi]`; all eigenvalues are still reported.
pub fn eig_symmetric_window(h: ArrayView2<f64>, lo: f64, hi: f64) -> Result<WindowedSpectrum> {
    let n = check_square(&h)?;
    if !(lo <= hi) {
        return Err(Error::InvalidInput(format!("bad window [{lo}, {hi}]")));
    }
    reject_non_self_adjoint(symmetry_defect(&h), max_abs_real(&h))?;
    let out = lapack::sym_eig_window(to_col_major_sym(&h), n, lo, hi)?;
    let m = out.window_values.len();
    let record = SpectrumRecord::new_unchecked(
        out.window_values,
        Some(StateMatrix::Real(col_major_to_array_real(out.vectors, n, m))),
        None,
    );
    Ok(WindowedSpectrum {
        record,
        all_energies: out.all_values,
        first_index: out.first_index,
        window: (lo, hi),
    })
}

/// Full eigendecomposition of a complex Hermitian matrix.
pub fn eig_hermitian(h: ArrayView2<Complex64>) -> Result<SpectrumRecord> {
    let n = check_square(&h)?;
    let scale = h.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    reject_non_self_adjoint(hermiticity_defect(&h), scale)?;
    let (w, v) = lapack::herm_eig_full(to_col_major_complex(&h), n)?;
    Ok(SpectrumRecord::new_unchecked(
        w,
        Some(StateMatrix::Complex(col_major_to_array_complex(v, n, n))),
        None,
    ))
}

/// Pseudo-energy convention: `U|E⟩ = e^{-iE}|E⟩`, i.e. `E = -arg λ mod 2π`.
pub fn pseudo_energy(lambda: Complex64) -> f64 {
    let e = (-lambda.arg()).rem_euclid(TAU);
    if e >= TAU {
        0.0
    } else {
        e
    }
}

/// Eigendecomposition of a unitary matrix into Floquet states.
///
/// Pseudo-energies `E = -arg λ` are mapped into `[0, 2π)` and sorted
/// ascending. Rejects matrices with `|U†U - I|` entries above 1e-8. The
/// eigenbasis comes from a Schur decomposition, which for a normal matrix is
/// an orthonormal eigenbasis even across degeneracies.
pub fn eig_unitary(u: ArrayView2<Complex64>) -> Result<SpectrumRecord> {
    let n = check_square(&u)?;
    let residual = unitarity_defect(&u);
    if residual > UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let (w, vs) = lapack::schur(to_col_major_complex(&u), n)?;
    let phases: Vec<f64> = w.iter().map(|&z| pseudo_energy(z)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].partial_cmp(&phases[b]).unwrap());

    let mut energies = Vec::with_capacity(n);
    let mut cols = vec![Complex64::new(0.0, 0.0); n * n];
    for (dst, &src) in order.iter().enumerate() {
        energies.push(phases[src]);
        cols[dst * n..(dst + 1) * n].copy_from_slice(&vs[src * n..(src + 1) * n]);
    }
    Ok(SpectrumRecord::new_unchecked(
        energies,
        Some(StateMatrix::Complex(col_major_to_array_complex(cols, n, n))),
        None,
    ))
}

/// Max |U†U - I| entry, computed column-pair-wise.
pub fn unitarity_defect(u: &ArrayView2<Complex64>) -> f64 {
    let n = u.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let dot: Complex64 = u
                .column(i)
                .iter()
                .zip(u.column(j).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let expect = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((dot - expect).norm());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Energy shells
// ---------------------------------------------------------------------------

/// Shell topology: an interval on the real line, or an arc on the
/// pseudo-energy circle `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellTopology {
    Line,
    Circle,
}

/// The energy shell `[E_c - ΔE/2, E_c + ΔE/2]`, closed on both ends.
#[derive(Debug, Clone, Copy)]
pub struct EnergyShell {
    center: f64,
    width: f64,
    topology: ShellTopology,
}

impl EnergyShell {
    pub fn line(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "shell width must be positive, got {width}"
            )));
        }
        Ok(Self {
            center,
            width,
            topology: ShellTopology::Line,
        })
    }

    /// A shell on the pseudo-energy circle; membership wraps modulo 2π.
    pub fn circle(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "shell width must be positive, got {width}"
            )));
        }
        if width > TAU {
            return Err(Error::InvalidInput(format!(
                "circular shell width {width} exceeds 2π"
            )));
        }
        Ok(Self {
            center,
            width,
            topology: ShellTopology::Circle,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn topology(&self) -> ShellTopology {
        self.topology
    }

    pub fn bounds(&self) -> (f64, f64) {
        (
            self.center - 0.5 * self.width,
            self.center + 0.5 * self.width,
        )
    }

    pub fn contains(&self, e: f64) -> bool {
        match self.topology {
            ShellTopology::Line => {
                let (lo, hi) = self.bounds();
                lo <= e && e <= hi
            }
            ShellTopology::Circle => {
                // Signed circular distance to the center, in [-π, π).
                let mut d = (e - self.center).rem_euclid(TAU);
                if d >= std::f64::consts::PI {
                    d -= TAU;
                }
                d.abs() <= 0.5 * self.width
            }
        }
    }

    /// Indices of all energies inside the shell (wrap-around supported for
    /// circular shells). An empty selection is not an error here.
    pub fn select(&self, energies: &[f64]) -> Vec<usize> {
        energies
            .iter()
            .enumerate()
            .filter(|(_, &e)| self.contains(e))
            .map(|(i, _)| i)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Classifiers and the ratio f
// ---------------------------------------------------------------------------

/// How the feature value is compared against the threshold ξ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Class 1 iff feature ≥ ξ (the generic convention).
    AtLeast,
    /// Class 1 iff feature > ξ (the width classifier).
    Above,
    /// Class 1 iff feature < ξ (the blank-radius classifier).
    Below,
}

type Feature = Arc<dyn Fn(&StateView) -> f64 + Send + Sync>;

/// A named, thresholded feature functional mapping eigenstates to {0, 1}.
#[derive(Clone)]
pub struct Classifier {
    name: String,
    threshold: f64,
    decision: Decision,
    feature: Feature,
}

impl std::fmt::Debug for Classifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Classifier")
            .field("name", &self.name)
            .field("threshold", &self.threshold)
            .field("decision", &self.decision)
            .finish()
    }
}

impl Classifier {
    /// Classifier with the generic decision rule: 1 iff feature ≥ ξ.
    pub fn new<F>(name: impl Into<String>, threshold: f64, feature: F) -> Self
    where
        F: Fn(&StateView) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            threshold,
            decision: Decision::AtLeast,
            feature: Arc::new(feature),
        }
    }

    pub fn with_decision(mut self, decision: Decision) -> Self {
        self.decision = decision;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Same feature and decision rule, different threshold.
    pub fn at_threshold(&self, threshold: f64) -> Self {
        Self {
            name: self.name.clone(),
            threshold,
            decision: self.decision,
            feature: Arc::clone(&self.feature),
        }
    }

    pub fn feature_value(&self, state: &StateView) -> f64 {
        (self.feature)(state)
    }

    /// The binary class of a state: exactly 0 or 1.
    pub fn apply(&self, state: &StateView) -> u8 {
        let value = self.feature_value(state);
        let hit = match self.decision {
            Decision::AtLeast => value >= self.threshold,
            Decision::Above => value > self.threshold,
            Decision::Below => value < self.threshold,
        };
        u8::from(hit)
    }
}

/// One point of a ratio curve. `ratio = None` marks a shell that held no
/// states (used only where a caller asks for gap markers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSample {
    pub parameter: f64,
    pub ratio: Option<f64>,
    pub population: usize,
}

/// A sampled ratio function f(parameter) with its provenance.
#[derive(Debug, Clone)]
pub struct RatioCurve {
    pub parameter_name: String,
    pub classifier_name: String,
    pub samples: Vec<RatioSample>,
}

impl RatioCurve {
    /// Largest f minus smallest f over the sampled (non-gap) points.
    pub fn spread(&self) -> f64 {
        let vals: Vec<f64> = self.samples.iter().filter_map(|s| s.ratio).collect();
        if vals.is_empty() {
            return 0.0;
        }
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    /// Total variation Σ|f_{i+1} - f_i| over consecutive non-gap samples.
    pub fn total_variation(&self) -> f64 {
        let vals: Vec<f64> = self.samples.iter().filter_map(|s| s.ratio).collect();
        vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

/// The classifier ratio over one shell: `f = (Σ class) / population`.
///
/// An empty shell is an error, never 0/0.
pub fn ratio_f(
    spectrum: &SpectrumRecord,
    shell: &EnergyShell,
    classifier: &Classifier,
) -> Result<(f64, usize)> {
    let indices = shell.select(spectrum.energies());
    if indices.is_empty() {
        let (lo, hi) = shell.bounds();
        return Err(Error::EmptyShell { lo, hi });
    }
    let hits: u64 = indices
        .iter()
        .map(|&k| u64::from(classifier.apply(&spectrum.view(k))))
        .sum();
    Ok((hits as f64 / indices.len() as f64, indices.len()))
}

/// Sample `f` over a grid of shell widths at a fixed center (line topology).
///
/// Widths must be ascending and positive. An empty shell at any width is an
/// error; since shells at one center are nested, that can only happen for
/// the smallest widths.
pub fn ratio_curve(
    spectrum: &SpectrumRecord,
    classifier: &Classifier,
    center: f64,
    widths: &[f64],
) -> Result<RatioCurve> {
    if widths.is_empty() || widths.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidInput("width grid must be positive".into()));
    }
    if widths.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("width grid must be ascending".into()));
    }
    let mut samples = Vec::with_capacity(widths.len());
    for &w in widths {
        let shell = EnergyShell::line(center, w)?;
        let (f, population) = ratio_f(spectrum, &shell, classifier)?;
        samples.push(RatioSample {
            parameter: w,
            ratio: Some(f),
            population,
        });
    }
    Ok(RatioCurve {
        parameter_name: "delta_e".into(),
        classifier_name: classifier.name().to_string(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
        let mut h = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    #[test]
    fn identity_eigenvalues() {
        let h = Array2::<f64>::eye(2);
        let rec = eig_symmetric(h.view()).unwrap();
        assert_eq!(rec.energies(), &[1.0, 1.0]);
    }

    #[test]
    fn pauli_x_eigenpairs() {
        let h = array![[0.0, 1.0], [1.0, 0.0]];
        let rec = eig_symmetric(h.view()).unwrap();
        assert_abs_diff_eq!(rec.energies()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rec.energies()[1], 1.0, epsilon = 1e-14);
        // Components of both vectors have modulus 1/√2, with opposite
        // relative signs between the two eigenvectors.
        let s = rec.states().unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let (v0, v1) = match (s.column(0), s.column(1)) {
            (StateColumn::Real(a), StateColumn::Real(b)) => (a, b),
            _ => panic!("expected real states"),
        };
        for v in [&v0, &v1] {
            assert_abs_diff_eq!(v[0].abs(), inv_sqrt2, epsilon = 1e-12);
            assert_abs_diff_eq!(v[1].abs(), inv_sqrt2, epsilon = 1e-12);
        }
        assert!(v0[0] * v0[1] < 0.0);
        assert!(v1[0] * v1[1] > 0.0);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let h = array![[0.0, 1.0], [0.5, 0.0]];
        match eig_symmetric(h.view()) {
            Err(Error::NotSelfAdjoint { max_asymmetry, .. }) => {
                assert_abs_diff_eq!(max_asymmetry, 0.5, epsilon = 1e-15);
            }
            other => panic!("expected NotSelfAdjoint, got {other:?}"),
        }
    }

    /// Characteristic polynomial of a 4x4 matrix by Faddeev-LeVerrier,
    /// evaluated at x. Test-side oracle, independent of LAPACK.
    fn charpoly4(h: &Array2<f64>, x: f64) -> f64 {
        let n = 4;
        let mut coeffs = vec![1.0f64];
        let mut mk = Array2::<f64>::eye(n);
        for k in 1..=n {
            let am = h.dot(&mk);
            let tr: f64 = (0..n).map(|i| am[(i, i)]).sum();
            let c = -tr / k as f64;
            coeffs.push(c);
            mk = &am + &(Array2::<f64>::eye(n) * c);
        }
        coeffs.iter().fold(0.0, |acc, &co| acc * x + co)
    }

    #[test]
    fn random_4x4_matches_charpoly_roots() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let h = random_symmetric(4, &mut rng);
        let rec = eig_symmetric(h.view()).unwrap();
        let bound: f64 = 1.0 + h.iter().map(|v| v.abs()).fold(0.0, f64::max) * 4.0;
        let grid = 40_000;
        let mut roots = Vec::new();
        let mut prev_x = -bound;
        let mut prev_f = charpoly4(&h, prev_x);
        for g in 1..=grid {
            let x = -bound + 2.0 * bound * g as f64 / grid as f64;
            let f = charpoly4(&h, x);
            if prev_f * f < 0.0 {
                let (mut a, mut b) = (prev_x, x);
                let (mut fa, _) = (prev_f, f);
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    let fm = charpoly4(&h, mid);
                    if fa * fm <= 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev_x = x;
            prev_f = f;
        }
        assert_eq!(roots.len(), 4, "expected 4 simple real roots");
        for (e, r) in rec.energies().iter().zip(roots.iter()) {
            assert_abs_diff_eq!(e, r, epsilon = 1e-8);
        }
    }

    #[test]
    fn reconstruction_bound_random_sizes() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &n in &[2usize, 5, 16, 64, 128, 256] {
            let h = random_symmetric(n, &mut rng);
            let rec = eig_symmetric(h.view()).unwrap();
            let states = match rec.states().unwrap() {
                StateMatrix::Real(v) => v.clone(),
                _ => unreachable!(),
            };
            let lam = Array2::from_diag(&ndarray::Array1::from(rec.energies().to_vec()));
            let rebuilt = states.dot(&lam).dot(&states.t());
            let scale = h.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            let worst = (&rebuilt - &h).iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            assert!(
                worst <= 1e-7 * scale.max(1e-30),
                "n={n}: reconstruction defect {worst:.2e} vs scale {scale:.2e}"
            );
        }
    }

    #[test]
    fn residual_bound_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let n = 96;
        let h = random_symmetric(n, &mut rng);
        let rec = eig_symmetric(h.view()).unwrap();
        let states = match rec.states().unwrap() {
            StateMatrix::Real(v) => v.clone(),
            _ => unreachable!(),
        };
        let scale = h.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        for k in 0..n {
            let v = states.column(k);
            let hv = h.dot(&v);
            let resid: f64 = hv
                .iter()
                .zip(v.iter())
                .map(|(a, b)| (a - rec.energies()[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-8 * scale.max(1.0), "residual {resid:.2e}");
        }
    }

    #[test]
    fn unitary_identity_and_diag() {
        let u = Array2::<Complex64>::eye(3);
        let rec = eig_unitary(u.view()).unwrap();
        assert!(rec.energies().iter().all(|&e| e.abs() < 1e-14));

        let d = Array2::from_diag(&ndarray::Array1::from(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ]));
        let rec = eig_unitary(d.view()).unwrap();
        let pi = std::f64::consts::PI;
        let expect = [0.0, 0.5 * pi, pi, 1.5 * pi];
        for (e, x) in rec.energies().iter().zip(expect.iter()) {
            assert_abs_diff_eq!(e, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn unitary_rotation_eigenphases() {
        let th = 0.3f64;
        let u = array![
            [Complex64::new(th.cos(), 0.0), Complex64::new(-th.sin(), 0.0)],
            [Complex64::new(th.sin(), 0.0), Complex64::new(th.cos(), 0.0)]
        ];
        let rec = eig_unitary(u.view()).unwrap();
        assert_abs_diff_eq!(rec.energies()[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.energies()[1], TAU - 0.3, epsilon = 1e-12);
        let s = match rec.states().unwrap() {
            StateMatrix::Complex(v) => v.clone(),
            _ => unreachable!(),
        };
        for k in 0..2 {
            let v = s.column(k);
            let uv = u.dot(&v);
            let lam = Complex64::from_polar(1.0, -rec.energies()[k]);
            let resid: f64 = uv
                .iter()
                .zip(v.iter())
                .map(|(a, b)| (a - lam * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-12);
        }
    }

    #[test]
    fn rejects_non_unitary() {
        let u = array![
            [Complex64::new(1.0, 0.0), Complex64::new(0.4, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
        ];
        assert!(matches!(eig_unitary(u.view()), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn shell_select_line() {
        let energies = [0.0, 1.0, 2.0, 3.0];
        let shell = EnergyShell::line(1.5, 2.0).unwrap();
        assert_eq!(shell.select(&energies), vec![1, 2]);
    }

    #[test]
    fn shell_select_circle_wraps() {
        let energies = [0.1, 3.0, 6.2];
        let shell = EnergyShell::circle(0.0, 0.6).unwrap();
        assert_eq!(shell.select(&energies), vec![0, 2]);
    }

    #[test]
    fn shell_endpoints_closed() {
        let energies = [0.5, 2.5];
        let shell = EnergyShell::line(1.5, 2.0).unwrap();
        assert_eq!(shell.select(&energies), vec![0, 1]);
    }

    #[test]
    fn full_circle_shell_contains_everything() {
        let energies: Vec<f64> = (0..32).map(|k| k as f64 * TAU / 32.0).collect();
        let shell = EnergyShell::circle(1.234, TAU).unwrap();
        assert_eq!(shell.select(&energies).len(), energies.len());
    }

    #[test]
    fn shell_monotonicity_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..200 {
            let mut energies: Vec<f64> = (0..60).map(|_| rng.gen_range(-5.0..5.0)).collect();
            energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let center = rng.gen_range(-5.0..5.0);
            let w1 = rng.gen_range(0.01..3.0);
            let w2 = w1 + rng.gen_range(0.0..3.0);
            let s1 = EnergyShell::line(center, w1).unwrap().select(&energies);
            let s2 = EnergyShell::line(center, w2).unwrap().select(&energies);
            assert!(s1.iter().all(|i| s2.contains(i)), "nesting violated");
            assert!(s1.len() <= s2.len());
        }
    }

    fn labelled_spectrum(vals: &[(f64, i64)]) -> SpectrumRecord {
        let energies: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let labels: Vec<StateLabel> = vals.iter().map(|v| StateLabel { n: 0, m: v.1 }).collect();
        SpectrumRecord::new(energies, None, Some(labels)).unwrap()
    }

    #[test]
    fn ratio_f_counts_labels() {
        // 5-state shell with classes {1,0,1,1,0} -> f = 0.6.
        let spec = labelled_spectrum(&[(0.0, 1), (0.1, 0), (0.2, 1), (0.3, 1), (0.4, 0)]);
        let shell = EnergyShell::line(0.2, 1.0).unwrap();
        let cls = Classifier::new("label", 0.5, |s: &StateView| s.label.unwrap().m as f64);
        let (f, pop) = ratio_f(&spec, &shell, &cls).unwrap();
        assert_eq!(pop, 5);
        assert_abs_diff_eq!(f, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn ratio_f_extremes() {
        let spec = labelled_spectrum(&[(0.0, 1), (0.1, 1), (0.2, 1)]);
        let shell = EnergyShell::line(0.1, 1.0).unwrap();
        let ones = Classifier::new("one", 0.5, |s: &StateView| s.label.unwrap().m as f64);
        assert_eq!(ratio_f(&spec, &shell, &ones).unwrap().0, 1.0);
        let zeros = Classifier::new("zero", 0.5, |_: &StateView| 0.0);
        assert_eq!(ratio_f(&spec, &shell, &zeros).unwrap().0, 0.0);
    }

    #[test]
    fn empty_shell_is_an_error() {
        let spec = labelled_spectrum(&[(0.0, 1), (10.0, 0)]);
        let shell = EnergyShell::line(5.0, 0.1).unwrap();
        let cls = Classifier::new("any", 0.0, |_: &StateView| 1.0);
        assert!(matches!(
            ratio_f(&spec, &shell, &cls),
            Err(Error::EmptyShell { .. })
        ));
    }

    #[test]
    fn ratio_curve_single_width_reduces_to_ratio_f() {
        let spec = labelled_spectrum(&[(0.0, 1), (0.1, 0), (0.2, 1)]);
        let cls = Classifier::new("label", 0.5, |s: &StateView| s.label.unwrap().m as f64);
        let curve = ratio_curve(&spec, &cls, 0.1, &[1.0]).unwrap();
        let shell = EnergyShell::line(0.1, 1.0).unwrap();
        let (f, pop) = ratio_f(&spec, &shell, &cls).unwrap();
        assert_eq!(curve.samples.len(), 1);
        assert_eq!(curve.samples[0].ratio, Some(f));
        assert_eq!(curve.samples[0].population, pop);
    }

    #[test]
    fn ratio_curve_population_monotone() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let mut vals: Vec<(f64, i64)> = (0..200)
            .map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(0..2)))
            .collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let spec = labelled_spectrum(&vals);
        let cls = Classifier::new("label", 0.5, |s: &StateView| s.label.unwrap().m as f64);
        let widths: Vec<f64> = (1..40).map(|k| 0.1 * k as f64).collect();
        let curve = ratio_curve(&spec, &cls, 0.3, &widths).unwrap();
        for pair in curve.samples.windows(2) {
            assert!(pair[0].population <= pair[1].population);
        }
    }

    #[test]
    fn classifier_binary_on_random_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let cls = Classifier::new("noise", 0.37, move |s: &StateView| (s.energy * 37.0).sin());
        for k in 0..1000 {
            let view = StateView {
                index: k,
                energy: rng.gen_range(-50.0..50.0),
                vector: None,
                label: None,
            };
            let c = cls.apply(&view);
            assert!(c == 0 || c == 1);
        }
    }

    #[test]
    fn threshold_monotonicity() {
        // For fixed feature values, f(ξ) is nonincreasing in ξ.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut vals: Vec<(f64, i64)> = (0..100)
            .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0..100)))
            .collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let spec = labelled_spectrum(&vals);
        let shell = EnergyShell::line(0.5, 2.0).unwrap();
        let base = Classifier::new("label", 0.0, |s: &StateView| s.label.unwrap().m as f64);
        let mut prev = f64::INFINITY;
        for step in 0..=20 {
            let xi = step as f64 * 5.0;
            let (f, _) = ratio_f(&spec, &shell, &base.at_threshold(xi)).unwrap();
            assert!(f <= prev + 1e-15, "f(ξ) increased at ξ={xi}");
            prev = f;
        }
    }

    #[test]
    fn ratio_f_matches_brute_force() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..20 {
            let n = rng.gen_range(1..=64);
            let mut vals: Vec<(f64, i64)> = (0..n)
                .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(-30..30)))
                .collect();
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let spec = labelled_spectrum(&vals);
            let center = rng.gen_range(-2.0..2.0);
            let width = rng.gen_range(0.5..4.0);
            let xi = rng.gen_range(-20.0..20.0);
            let cls = Classifier::new("m", xi, |s: &StateView| s.label.unwrap().m as f64);
            let shell = EnergyShell::line(center, width).unwrap();

            let mut hits = 0usize;
            let mut pop = 0usize;
            for (e, m) in &vals {
                if (e - center).abs() <= width / 2.0 {
                    pop += 1;
                    if *m as f64 >= xi {
                        hits += 1;
                    }
                }
            }
            match ratio_f(&spec, &shell, &cls) {
                Ok((f, p)) => {
                    assert_eq!(p, pop);
                    assert_abs_diff_eq!(f, hits as f64 / pop as f64, epsilon = 1e-15);
                }
                Err(Error::EmptyShell { .. }) => assert_eq!(pop, 0),
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn orthonormality_enforced_on_new() {
        let energies = vec![0.0, 1.0];
        let bad = StateMatrix::Real(array![[1.0, 0.9], [0.0, 0.1]]);
        assert!(SpectrumRecord::new(energies, Some(bad), None).is_err());
    }
}
