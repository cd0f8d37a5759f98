//! Kicked rotor: the classical Chirikov map and its torus-quantized Floquet
//! operator, with the phase-space width classifier and shell entropy.
//!
//! The torus `[0, 2π)²` is quantized into an N = m² dimensional Hilbert
//! space with effective Planck constant `ħ_eff = 2π/N`. One kick period is
//! the unitary `U = exp(-i p̂²/2ħ) exp(-i K cos q̂ / ħ)`; its eigenstates
//! (Floquet states) carry pseudo-energies defined modulo 2π. Planck cells
//! tile the torus into an m×m grid, one momentum window of m levels per row
//! with a length-m Fourier phase across it.

use std::f64::consts::{PI, TAU};

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{
    self, Classifier, Decision, EnergyShell, RatioCurve, RatioSample, SpectrumRecord, StateColumn,
    StateView,
};

/// Classifier threshold on the phase-space width: class 1 iff W > 0.8π.
pub const WIDTH_THRESHOLD: f64 = 0.8 * PI;

/// One step of the Chirikov map: `p' = p + K sin q`, `q' = q + p'`,
/// both reduced into `[0, 2π)`. Exactly area-preserving (unit Jacobian).
pub fn chirikov_step(q: f64, p: f64, k: f64) -> (f64, f64) {
    let p_next = (p + k * q.sin()).rem_euclid(TAU);
    let q_next = (q + p_next).rem_euclid(TAU);
    (q_next, p_next)
}

/// Iterate the map, collecting the orbit (initial point included).
pub fn chirikov_orbit(q0: f64, p0: f64, k: f64, steps: usize) -> Vec<(f64, f64)> {
    let mut orbit = Vec::with_capacity(steps + 1);
    let (mut q, mut p) = (q0.rem_euclid(TAU), p0.rem_euclid(TAU));
    orbit.push((q, p));
    for _ in 0..steps {
        let next = chirikov_step(q, p, k);
        q = next.0;
        p = next.1;
        orbit.push((q, p));
    }
    orbit
}

/// The m×m Planck-cell grid on the quantized torus.
///
/// Cell (a, b) is a window of the m momentum levels `[bm, (b+1)m)` dressed
/// with a Fourier phase at `Q_a`; cell centers sit at
/// `Q, P ∈ {2πk/m + π/m}`. The m² cells are orthonormal and complete.
#[derive(Debug, Clone)]
pub struct TorusBasis {
    m: usize,
}

impl TorusBasis {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!(
                "cell count per axis {m} too small"
            )));
        }
        Ok(Self { m })
    }

    /// Cells per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Hilbert dimension N = m².
    pub fn dim(&self) -> usize {
        self.m * self.m
    }

    /// Effective Planck constant 2π/N.
    pub fn hbar_eff(&self) -> f64 {
        TAU / self.dim() as f64
    }

    /// Center coordinate of row/column `k`: `2πk/m + π/m`.
    pub fn center(&self, k: usize) -> f64 {
        TAU * k as f64 / self.m as f64 + PI / self.m as f64
    }

    /// Overlap `⟨Q_a, P_b | ψ⟩` for a state in the momentum basis.
    pub fn cell_overlap(&self, state: &ArrayView1<Complex64>, a: usize, b: usize) -> Complex64 {
        let m = self.m;
        debug_assert_eq!(state.len(), self.dim());
        let q_a = self.center(a);
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..m {
            let n = b * m + r;
            let phase = Complex64::from_polar(1.0, q_a * n as f64);
            acc += phase * state[n];
        }
        acc / (m as f64).sqrt()
    }

    /// The full |⟨Q, P|ψ⟩|² grid, indexed `[a, b]` = (Q row, P column).
    pub fn husimi_grid(&self, state: &ArrayView1<Complex64>) -> Array2<f64> {
        let m = self.m;
        let mut grid = Array2::zeros((m, m));
        for a in 0..m {
            for b in 0..m {
                grid[(a, b)] = self.cell_overlap(state, a, b).norm_sqr();
            }
        }
        grid
    }

    /// Max deviation of Σ|Q,P⟩⟨Q,P| from the identity.
    ///
    /// The sum is block-diagonal over momentum windows, so it suffices to
    /// check each m×m block.
    pub fn completeness_defect(&self) -> f64 {
        let m = self.m;
        let norm = 1.0 / m as f64;
        let mut worst = 0.0f64;
        for b in 0..m {
            for r in 0..m {
                for s in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..m {
                        let q_a = self.center(a);
                        let ket = Complex64::from_polar(norm, -q_a * (b * m + r) as f64);
                        let bra = Complex64::from_polar(1.0, q_a * (b * m + s) as f64);
                        acc += ket * bra;
                    }
                    let expect = if r == s { 1.0 } else { 0.0 };
                    worst = worst.max((acc - expect).norm());
                }
            }
        }
        worst
    }
}

/// Build the one-period Floquet operator on the quantized torus.
///
/// The kick phase is diagonal in position and enters through the discrete
/// Fourier transform (the kick factor is circulant in momentum); the kinetic
/// phase is diagonal in momentum with the level index read in the symmetric
/// window `n ∈ [-N/2, N/2)` to avoid spurious high-momentum phases.
pub fn build_floquet(m: usize, k: f64) -> Result<Array2<Complex64>> {
    if !(8..=128).contains(&m) {
        return Err(Error::InvalidInput(format!(
            "cells per axis m = {m} outside supported range [8, 128]"
        )));
    }
    let n = m * m;
    let nf = n as f64;
    let hbar = TAU / nf;

    // Circulant kick factor: c_d = (1/N) Σ_k e^{-iK cos(q_k)/ħ} e^{i 2π k d/N}.
    let kick: Vec<Complex64> = (0..n)
        .map(|kk| {
            let q = TAU * kk as f64 / nf;
            Complex64::from_polar(1.0, -k * q.cos() / hbar)
        })
        .collect();
    let mut circ = vec![Complex64::new(0.0, 0.0); n];
    circ.par_iter_mut().enumerate().for_each(|(d, out)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (kk, kv) in kick.iter().enumerate() {
            let ang = TAU * ((kk * d) % n) as f64 / nf;
            acc += kv * Complex64::from_polar(1.0, ang);
        }
        *out = acc / nf;
    });

    // Kinetic phases on the symmetric momentum window: p²/2ħ = π ñ²/N.
    let kinetic: Vec<Complex64> = (0..n)
        .map(|nn| {
            let tilde = if nn < n / 2 {
                nn as i64
            } else {
                nn as i64 - n as i64
            };
            Complex64::from_polar(1.0, -PI * (tilde * tilde) as f64 / nf)
        })
        .collect();

    let mut u = Array2::zeros((n, n));
    for row in 0..n {
        for col in 0..n {
            let d = (col + n - row) % n;
            u[(row, col)] = kinetic[row] * circ[d];
        }
    }
    Ok(u)
}

/// Floquet spectrum (pseudo-energies ascending in [0, 2π)) for a torus of
/// m×m cells at kick strength K.
pub fn floquet_spectrum(m: usize, k: f64) -> Result<SpectrumRecord> {
    let u = build_floquet(m, k)?;
    spectral::eig_unitary(u.view())
}

/// Phase-space width of a cell-probability grid around (π, π).
pub fn width_of_density(basis: &TorusBasis, density: &Array2<f64>) -> f64 {
    let m = basis.m();
    let mut w2 = 0.0;
    for a in 0..m {
        let dq = basis.center(a) - PI;
        for b in 0..m {
            let dp = basis.center(b) - PI;
            w2 += (dq * dq + dp * dp) * density[(a, b)];
        }
    }
    w2.sqrt()
}

/// Phase-space width `W` of a normalized state:
/// `W² = Σ_{Q,P} [(Q-π)² + (P-π)²] |⟨Q,P|ψ⟩|²`.
pub fn width_w(basis: &TorusBasis, state: &ArrayView1<Complex64>) -> f64 {
    width_of_density(basis, &basis.husimi_grid(state))
}

/// The width classifier: class 1 iff `W > 0.8π`.
pub fn width_classifier(m: usize) -> Result<Classifier> {
    let basis = TorusBasis::new(m)?;
    Ok(
        Classifier::new("width", WIDTH_THRESHOLD, move |s: &StateView| {
            match s.vector {
                Some(StateColumn::Complex(v)) => width_w(&basis, &v),
                _ => panic!("width classifier needs complex Floquet states"),
            }
        })
        .with_decision(Decision::Above),
    )
}

/// Renormalized cell distribution of the maximally mixed state in a
/// pseudo-energy shell: `p_{Q,P} = Σ_{E∈shell} |⟨Q,P|E⟩|² / |shell|`.
///
/// Sums to one over the full grid by completeness of the cell basis.
pub fn shell_distribution(
    spectrum: &SpectrumRecord,
    basis: &TorusBasis,
    shell: &EnergyShell,
) -> Result<Array2<f64>> {
    let indices = shell.select(spectrum.energies());
    if indices.is_empty() {
        let (lo, hi) = shell.bounds();
        return Err(Error::EmptyShell { lo, hi });
    }
    let m = basis.m();
    let grids: Vec<Array2<f64>> = indices
        .par_iter()
        .map(|&k| match spectrum.state(k) {
            Some(StateColumn::Complex(v)) => basis.husimi_grid(&v),
            _ => panic!("shell distribution needs complex Floquet states"),
        })
        .collect();
    let mut total = Array2::zeros((m, m));
    for g in grids {
        total += &g;
    }
    total /= indices.len() as f64;
    Ok(total)
}

/// Normalized Shannon entropy of a cell distribution:
/// `Γ = -(1/log m²) Σ p log p`, natural logarithm, `Γ ∈ [0, 1]`.
pub fn gwvne_entropy(p: &Array2<f64>) -> Result<f64> {
    let cells = p.len() as f64;
    if p.iter().any(|&x| x < -1e-12) {
        return Err(Error::InvalidInput("negative probability entry".into()));
    }
    let mut s = 0.0;
    for &x in p.iter() {
        if x > 0.0 {
            s -= x * x.ln();
        }
    }
    Ok(s / cells.ln())
}

/// Γ(E_c) sampled over shell centers at a fixed width (circular shells).
pub fn entropy_vs_center(
    spectrum: &SpectrumRecord,
    basis: &TorusBasis,
    delta_e: f64,
    centers: &[f64],
) -> Result<Vec<(f64, f64)>> {
    centers
        .iter()
        .map(|&ec| {
            let shell = EnergyShell::circle(ec, delta_e)?;
            let p = shell_distribution(spectrum, basis, &shell)?;
            Ok((ec, gwvne_entropy(&p)?))
        })
        .collect()
}

/// The width-classifier ratio over circular pseudo-energy shells of varying
/// width at a fixed center.
pub fn ratio_vs_width(
    spectrum: &SpectrumRecord,
    m: usize,
    center: f64,
    widths: &[f64],
) -> Result<RatioCurve> {
    let classifier = width_classifier(m)?;
    // Width features are shell-independent; classify every state once.
    let classes: Vec<u8> = (0..spectrum.len())
        .into_par_iter()
        .map(|k| classifier.apply(&spectrum.view(k)))
        .collect();
    let mut samples = Vec::with_capacity(widths.len());
    for &w in widths {
        let shell = EnergyShell::circle(center, w)?;
        let idx = shell.select(spectrum.energies());
        if idx.is_empty() {
            let (lo, hi) = shell.bounds();
            return Err(Error::EmptyShell { lo, hi });
        }
        let hits: usize = idx.iter().map(|&k| classes[k] as usize).sum();
        samples.push(RatioSample {
            parameter: w,
            ratio: Some(hits as f64 / idx.len() as f64),
            population: idx.len(),
        });
    }
    Ok(RatioCurve {
        parameter_name: "delta_e".into(),
        classifier_name: "width".into(),
        samples,
    })
}

/// Per-state width and class, for CSV dumps: (pseudo-energy, W, class).
pub fn state_widths(spectrum: &SpectrumRecord, m: usize) -> Result<Vec<(f64, f64, u8)>> {
    let basis = TorusBasis::new(m)?;
    Ok((0..spectrum.len())
        .into_par_iter()
        .map(|k| {
            let w = match spectrum.state(k) {
                Some(StateColumn::Complex(v)) => width_w(&basis, &v),
                _ => panic!("state widths need complex Floquet states"),
            };
            let class = u8::from(w > WIDTH_THRESHOLD);
            (spectrum.energies()[k], w, class)
        })
        .collect())
}
