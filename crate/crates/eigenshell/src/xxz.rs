//! Open-boundary XXZ chain: Hamiltonian, five eigenstate features, and
//! their classifier ratio curves.
//!
//! `H = Σ_{i=1}^{N-1} (σᵢˣσᵢ₊₁ˣ + σᵢʸσᵢ₊₁ʸ + ρ σᵢᶻσᵢ₊₁ᶻ)` on the 2^N product
//! basis. Site `i` (1-based) maps to bit `i-1`; bit 0 means spin up
//! (σᶻ = +1). Features: a single mid-chain spin, total magnetization, the
//! σ₃ˣσ₄ˣ correlation, the global-X product, and the second Rényi entropy
//! of the first spin.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{self, EnergyShell, RatioCurve, RatioSample, SpectrumRecord};

/// Chain parameters; boundary conditions are open.
#[derive(Debug, Clone, Copy)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub rho: f64,
}

impl ChainSpec {
    pub fn new(n_sites: usize, rho: f64) -> Result<Self> {
        if !(2..=14).contains(&n_sites) {
            return Err(Error::InvalidInput(format!(
                "chain length {n_sites} outside supported range [2, 14]"
            )));
        }
        Ok(Self { n_sites, rho })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// σᶻ eigenvalue of site `site` (1-based) in basis state `s`.
    fn z(&self, s: usize, site: usize) -> f64 {
        1.0 - 2.0 * ((s >> (site - 1)) & 1) as f64
    }
}

/// Dense Hamiltonian on the 2^N product basis.
pub fn build_xxz(spec: &ChainSpec) -> Array2<f64> {
    let n = spec.n_sites;
    let dim = spec.dim();
    let mut h = Array2::zeros((dim, dim));
    for s in 0..dim {
        let mut diag = 0.0;
        for i in 1..n {
            diag += spec.rho * spec.z(s, i) * spec.z(s, i + 1);
            // The XX+YY part hops anti-aligned bond pairs with amplitude 2.
            let bits = (1 << (i - 1)) | (1 << i);
            let anti = ((s >> (i - 1)) & 1) != ((s >> i) & 1);
            if anti {
                h[(s, s ^ bits)] += 2.0;
            }
        }
        h[(s, s)] = diag;
    }
    h
}

/// Full spectrum of the chain.
pub fn diagonalize(spec: &ChainSpec) -> Result<SpectrumRecord> {
    spectral::eig_symmetric(build_xxz(spec).view())
}

/// The five feature functionals evaluated on one eigenstate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureValues {
    /// ⟨σᶻ⟩ of the mid-chain site [N/2].
    pub single_z: f64,
    /// ⟨Σ σᶻᵢ⟩.
    pub total_mz: f64,
    /// ⟨σ₃ˣ σ₄ˣ⟩.
    pub pair_xx: f64,
    /// ⟨Π σᵢˣ⟩.
    pub global_x: f64,
    /// Second Rényi entropy of the first spin.
    pub renyi2: f64,
}

impl FeatureValues {
    pub fn get(&self, which: XxzFeature) -> f64 {
        match which {
            XxzFeature::SingleSpinZ => self.single_z,
            XxzFeature::TotalMz => self.total_mz,
            XxzFeature::PairXx => self.pair_xx,
            XxzFeature::GlobalX => self.global_x,
            XxzFeature::Renyi2 => self.renyi2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XxzFeature {
    SingleSpinZ,
    TotalMz,
    PairXx,
    GlobalX,
    Renyi2,
}

impl XxzFeature {
    pub const ALL: [XxzFeature; 5] = [
        XxzFeature::SingleSpinZ,
        XxzFeature::TotalMz,
        XxzFeature::PairXx,
        XxzFeature::GlobalX,
        XxzFeature::Renyi2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            XxzFeature::SingleSpinZ => "single_spin_z",
            XxzFeature::TotalMz => "total_mz",
            XxzFeature::PairXx => "pair_xx_34",
            XxzFeature::GlobalX => "global_x",
            XxzFeature::Renyi2 => "renyi2_first_spin",
        }
    }

    /// The global-X product is the one non-local feature of the set.
    pub fn is_local(&self) -> bool {
        !matches!(self, XxzFeature::GlobalX)
    }
}

/// Second Rényi entropy `-log Tr ρ₁²` of the first spin of a normalized
/// state on `n_sites` spins. Ranges over [0, log 2].
pub fn renyi2_first_spin(n_sites: usize, state: &ArrayView1<f64>) -> f64 {
    debug_assert_eq!(state.len(), 1 << n_sites);
    let rest = 1 << (n_sites - 1);
    let (mut r00, mut r01, mut r11) = (0.0f64, 0.0f64, 0.0f64);
    for r in 0..rest {
        let up = state[2 * r];
        let dn = state[2 * r + 1];
        r00 += up * up;
        r01 += up * dn;
        r11 += dn * dn;
    }
    let purity = r00 * r00 + 2.0 * r01 * r01 + r11 * r11;
    -purity.ln()
}

/// Evaluate all five features on one normalized eigenvector.
pub fn feature_values(spec: &ChainSpec, state: &ArrayView1<f64>) -> Result<FeatureValues> {
    let n = spec.n_sites;
    if n < 4 {
        return Err(Error::InvalidInput(
            "feature set needs at least 4 sites (σ₃ˣσ₄ˣ)".into(),
        ));
    }
    let dim = spec.dim();
    if state.len() != dim {
        return Err(Error::InvalidInput(format!(
            "state length {} != 2^{n}",
            state.len()
        )));
    }
    let norm: f64 = state.iter().map(|a| a * a).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "state norm deviates from 1 by {:.3e}",
            (norm - 1.0).abs()
        )));
    }

    let mid_site = n / 2;
    let pair_bits = (1usize << 2) | (1 << 3);
    let flip_all = dim - 1;

    let mut single_z = 0.0;
    let mut total_mz = 0.0;
    let mut pair_xx = 0.0;
    let mut global_x = 0.0;
    for s in 0..dim {
        let a = state[s];
        let p = a * a;
        single_z += p * spec.z(s, mid_site);
        total_mz += p * (n as f64 - 2.0 * (s.count_ones() as f64));
        pair_xx += a * state[s ^ pair_bits];
        global_x += a * state[s ^ flip_all];
    }

    Ok(FeatureValues {
        single_z,
        total_mz,
        pair_xx,
        global_x,
        renyi2: renyi2_first_spin(n, state),
    })
}

/// Features of every state in a spectrum, in eigenvalue order.
pub fn all_features(spec: &ChainSpec, spectrum: &SpectrumRecord) -> Result<Vec<FeatureValues>> {
    let states = spectrum
        .states()
        .ok_or_else(|| Error::InvalidInput("spectrum carries no eigenvectors".into()))?;
    let real = match states {
        spectral::StateMatrix::Real(v) => v,
        _ => return Err(Error::InvalidInput("chain states must be real".into())),
    };
    (0..spectrum.len())
        .into_par_iter()
        .map(|k| feature_values(spec, &real.column(k)))
        .collect()
}

/// Median of a value list; even counts take the midpoint of the two
/// central order statistics.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ratio curves for the whole feature set over shells `[E_c ± ΔE/2]`.
#[derive(Debug, Clone)]
pub struct XxzSuite {
    /// One curve per feature, in `XxzFeature::ALL` order. Classifier:
    /// class 1 iff F ≥ ξ. Shells that hold no states appear as gap markers.
    pub curves: Vec<RatioCurve>,
    /// Thresholds actually used, one per feature.
    pub thresholds: Vec<f64>,
    /// Shell population per width (the f-independent part of every curve).
    pub population: Vec<(f64, usize)>,
    /// Per-state features, eigenvalue-ordered (for CSV dumps).
    pub features: Vec<FeatureValues>,
    /// Eigenvalues, ascending.
    pub energies: Vec<f64>,
}

/// Diagonalize the chain and sample all five ratio curves at center `e_c`.
///
/// `thresholds`, when given, override the defaults (the median of each
/// feature over the full spectrum). Widths must be ascending and positive.
/// Empty shells at the smallest widths are tolerated and marked as gaps.
pub fn xxz_ratio_suite(
    spec: &ChainSpec,
    e_c: f64,
    widths: &[f64],
    thresholds: Option<[f64; 5]>,
) -> Result<XxzSuite> {
    if widths.is_empty() || widths.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidInput("width grid must be positive".into()));
    }
    if widths.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("width grid must be ascending".into()));
    }
    let spectrum = diagonalize(spec)?;
    let energies = spectrum.energies().to_vec();
    if e_c < energies[0] || e_c > energies[energies.len() - 1] {
        return Err(Error::InvalidInput(format!(
            "center {e_c} outside the spectrum range [{}, {}]",
            energies[0],
            energies[energies.len() - 1]
        )));
    }
    let features = all_features(spec, &spectrum)?;
    suite_from_features(energies, features, e_c, widths, thresholds)
}

/// The curve-sampling half of [`xxz_ratio_suite`], usable with cached
/// spectra and precomputed features.
pub fn suite_from_features(
    energies: Vec<f64>,
    features: Vec<FeatureValues>,
    e_c: f64,
    widths: &[f64],
    thresholds: Option<[f64; 5]>,
) -> Result<XxzSuite> {
    let thresholds: Vec<f64> = match thresholds {
        Some(t) => t.to_vec(),
        None => XxzFeature::ALL
            .iter()
            .map(|&which| median(&features.iter().map(|f| f.get(which)).collect::<Vec<_>>()))
            .collect(),
    };

    let mut population = Vec::with_capacity(widths.len());
    let mut per_feature: Vec<Vec<RatioSample>> = vec![Vec::new(); 5];
    for &w in widths {
        let shell = EnergyShell::line(e_c, w)?;
        let idx = shell.select(&energies);
        population.push((w, idx.len()));
        for (fi, &which) in XxzFeature::ALL.iter().enumerate() {
            let sample = if idx.is_empty() {
                RatioSample {
                    parameter: w,
                    ratio: None,
                    population: 0,
                }
            } else {
                let hits = idx
                    .iter()
                    .filter(|&&k| features[k].get(which) >= thresholds[fi])
                    .count();
                RatioSample {
                    parameter: w,
                    ratio: Some(hits as f64 / idx.len() as f64),
                    population: idx.len(),
                }
            };
            per_feature[fi].push(sample);
        }
    }

    let curves = XxzFeature::ALL
        .iter()
        .zip(per_feature)
        .map(|(which, samples)| RatioCurve {
            parameter_name: "delta_e".into(),
            classifier_name: which.name().into(),
            samples,
        })
        .collect();

    Ok(XxzSuite {
        curves,
        thresholds,
        population,
        features,
        energies,
    })
}
