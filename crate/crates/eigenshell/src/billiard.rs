//! Circular billiard: eigenmodes from Bessel-function zeros, the
//! blank-region classifier, and the analytic classical fraction.
//!
//! A Dirichlet mode of the disk is `J_m(k r) e^{imθ}` with `J_m(k R0) = 0`,
//! energy `E = ħ²k²/2` (unit mass). The normalized angular momentum
//! `ℜ = |m|/k` is the radius of the central region the mode avoids, and
//! classifying modes by `ℜ < R_b` reproduces, shell by shell, the classical
//! fraction of trajectories that enter the disk of radius `R_b`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{
    Classifier, Decision, RatioCurve, RatioSample, SpectrumRecord, StateLabel, StateView,
};

/// Largest Bessel order the evaluator accepts.
pub const MAX_ORDER: u32 = 2000;
/// Largest argument the evaluator accepts.
pub const MAX_ARGUMENT: f64 = 1.0e4;
/// Every reported zero satisfies |J_m(z)| below this.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-9;

/// Scan step for zero bracketing; consecutive zeros of J_m are separated by
/// more than 3.1, so a quarter-π step cannot hop over a sign change pair.
const SCAN_STEP: f64 = std::f64::consts::FRAC_PI_4;
const BISECT_TOL: f64 = 1e-12;

/// Bessel function of the first kind, integer order.
///
/// Ascending series where it is monotone-safe (x ≤ 2√(m+1)), otherwise
/// downward three-term recurrence normalized by `J_0 + 2ΣJ_{2k} = 1`,
/// with rescaling against overflow. Absolute error stays below 1e-10 on
/// the supported range (m ≤ 2000, x ≤ 1e4).
pub fn bessel_j(m: u32, x: f64) -> Result<f64> {
    if m > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "Bessel order {m} exceeds supported maximum {MAX_ORDER}"
        )));
    }
    if !(0.0..=MAX_ARGUMENT).contains(&x) {
        return Err(Error::InvalidInput(format!(
            "Bessel argument {x} outside [0, {MAX_ARGUMENT}]"
        )));
    }
    Ok(bessel_j_unchecked(m, x))
}

pub(crate) fn bessel_j_unchecked(m: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let mf = m as f64;
    if x <= 2.0 * (mf + 1.0).sqrt() {
        bessel_series(m, x)
    } else {
        bessel_miller(m, x)
    }
}

/// Ascending power series; used only where the first term dominates, so no
/// cancellation can grow past machine precision.
fn bessel_series(m: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // First term (x/2)^m / m! in log space to survive large m.
    let ln_t0 = m as f64 * half.ln() - ln_factorial(m);
    if ln_t0 < -745.0 {
        return 0.0;
    }
    let t0 = ln_t0.exp();
    let mut term = t0;
    let mut sum = t0;
    let q = half * half;
    for k in 1..400u32 {
        term *= -q / (k as f64 * (m as f64 + k as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn ln_factorial(m: u32) -> f64 {
    (2..=m as u64).map(|k| (k as f64).ln()).sum()
}

/// Downward recurrence with the even-order normalization sum.
fn bessel_miller(m: u32, x: f64) -> f64 {
    // The start order must sit deep in the decayed regime: the minimal
    // solution falls off like Ai(s) past the turning point, so ~10·x^(1/3)
    // extra orders buy the ~19 digits of headroom double precision needs.
    let nu = (m as f64).max(x);
    let pad = (10.0 * nu.cbrt()).ceil() as u32 + 40;
    let nstart = (x.ceil() as u32).max(m) + pad;

    let mut f_hi = 0.0f64; // f_{n+1}
    let mut f = 1e-250f64; // f_n
    let mut norm = 0.0f64;
    let mut f_m = if m == nstart { f } else { 0.0 };
    let mut captured = m == nstart;

    let mut n = nstart;
    while n > 0 {
        let f_lo = (2.0 * n as f64 / x) * f - f_hi;
        f_hi = f;
        f = f_lo;
        n -= 1;

        if n == m && !captured {
            f_m = f;
            captured = true;
        }
        if n % 2 == 0 {
            norm += if n == 0 { f } else { 2.0 * f };
        }
        if f.abs() > 1e250 {
            f *= 1e-250;
            f_hi *= 1e-250;
            norm *= 1e-250;
            f_m *= 1e-250;
        }
    }
    f_m / norm
}

/// Derivative J'_m via the recurrence J'_m = J_{m-1} - (m/x) J_m.
fn bessel_j_prime(m: u32, x: f64) -> f64 {
    if m == 0 {
        -bessel_j_unchecked(1, x)
    } else {
        bessel_j_unchecked(m - 1, x) - (m as f64 / x) * bessel_j_unchecked(m, x)
    }
}

/// A positive zero of J_m with its global radial index (1-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselZero {
    /// Radial index: this is the n-th positive zero of J_m.
    pub n: usize,
    pub k: f64,
}

/// All zeros of J_m inside `[k_lo, k_hi]`, ascending, with radial indices
/// assigned by counting every zero from the origin up.
///
/// The scan starts at the classical turning point x ≈ m (J_m has no zeros
/// below it), brackets sign changes with a fixed π/4 step, bisects to 1e-12
/// and applies one Newton polish. An empty list is not an error.
pub fn bessel_zeros_in(m: u32, k_lo: f64, k_hi: f64) -> Result<Vec<BesselZero>> {
    if !(0.0 <= k_lo && k_lo < k_hi) {
        return Err(Error::InvalidInput(format!(
            "zero search range [{k_lo}, {k_hi}] invalid"
        )));
    }
    if k_hi > MAX_ARGUMENT {
        return Err(Error::InvalidInput(format!(
            "zero search limit {k_hi} exceeds {MAX_ARGUMENT}"
        )));
    }
    if m > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "Bessel order {m} exceeds supported maximum {MAX_ORDER}"
        )));
    }

    let mut zeros = Vec::new();
    let start = if m == 0 { 0.0 } else { m as f64 };
    if start >= k_hi {
        return Ok(zeros);
    }

    let mut count_below = 0usize;
    let mut x_prev = start;
    let mut f_prev = if m == 0 { 1.0 } else { bessel_j_unchecked(m, start) };
    // J_m(m) can be extremely small but is positive; a zero value would only
    // break bracketing, not skip roots, since we step past it immediately.
    if f_prev == 0.0 {
        f_prev = 1.0;
    }
    loop {
        let x = (x_prev + SCAN_STEP).min(k_hi);
        let f = bessel_j_unchecked(m, x);
        if f_prev * f < 0.0 {
            // Brackets entirely below the window are only counted.
            if x < k_lo {
                count_below += 1;
            } else {
                let z = refine_zero(m, x_prev, x, f_prev, f);
                if z < k_lo {
                    count_below += 1;
                } else {
                    zeros.push(BesselZero {
                        n: count_below + zeros.len() + 1,
                        k: z,
                    });
                }
            }
        }
        if x >= k_hi {
            break;
        }
        x_prev = x;
        f_prev = f;
    }
    Ok(zeros)
}

fn refine_zero(m: u32, mut a: f64, mut b: f64, mut fa: f64, _fb: f64) -> f64 {
    while b - a > BISECT_TOL {
        let mid = 0.5 * (a + b);
        let fm = bessel_j_unchecked(m, mid);
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let mut z = 0.5 * (a + b);
    // One Newton polish, kept inside the bracket.
    let d = bessel_j_prime(m, z);
    if d != 0.0 {
        let step = bessel_j_unchecked(m, z) / d;
        let candidate = z - step;
        if candidate > a - BISECT_TOL && candidate < b + BISECT_TOL {
            z = candidate;
        }
    }
    z
}

/// One Dirichlet eigenmode of the disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilliardMode {
    /// Radial quantum number (1-based zero index).
    pub n: usize,
    /// Angular quantum number, either sign.
    pub m: i64,
    /// Wavenumber, in units of 1/length.
    pub k: f64,
    /// Billiard radius.
    pub r0: f64,
}

impl BilliardMode {
    /// Energy at ħ = M = 1.
    pub fn energy(&self) -> f64 {
        0.5 * self.k * self.k
    }

    /// Energy at an arbitrary ħ (still M = 1); the mode itself is
    /// ħ-independent.
    pub fn energy_at_hbar(&self, hbar: f64) -> f64 {
        0.5 * hbar * hbar * self.k * self.k
    }
}

/// Normalized angular momentum ℜ = |m|/k: the blank-region radius.
///
/// Uses |m| so both members of a degenerate ±m pair classify identically.
pub fn blank_radius(mode: &BilliardMode) -> f64 {
    mode.m.unsigned_abs() as f64 / mode.k
}

/// Enumerate every mode with wavenumber inside `[k_c - Δk/2, k_c + Δk/2]`.
///
/// Angular numbers come in both signs (m = 0 once, |m| > 0 twice, matching
/// the ±m degeneracy). Δk = 0 is allowed and returns an empty list unless a
/// zero lands exactly on k_c.
pub fn enumerate_shell(k_c: f64, delta_k: f64, r0: f64) -> Result<Vec<BilliardMode>> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidInput("billiard radius must be positive".into()));
    }
    if delta_k < 0.0 {
        return Err(Error::InvalidInput("shell width must be nonnegative".into()));
    }
    let k_lo = k_c - 0.5 * delta_k;
    let k_hi = k_c + 0.5 * delta_k;
    if k_lo <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "shell lower edge {k_lo} must be positive"
        )));
    }
    enumerate_k_window(k_lo, k_hi, r0)
}

/// Modes with k in the closed window `[k_lo, k_hi]` (wavenumber units 1/R0).
fn enumerate_k_window(k_lo: f64, k_hi: f64, r0: f64) -> Result<Vec<BilliardMode>> {
    // Zeros of J_m live above m; orders past the window upper edge are empty.
    let z_hi = k_hi * r0;
    let z_lo = k_lo * r0;
    let m_max = z_hi.ceil() as u32;
    if m_max > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "window upper edge needs Bessel order {m_max} > {MAX_ORDER}"
        )));
    }

    // Degenerate window: catch zeros exactly at the single point.
    let (scan_lo, scan_hi) = if z_lo == z_hi {
        (z_lo - 1e-9, z_hi + 1e-9)
    } else {
        (z_lo, z_hi)
    };

    let per_order: Vec<Vec<BilliardMode>> = (0..=m_max)
        .into_par_iter()
        .map(|m| {
            let zeros = bessel_zeros_in(m, scan_lo.max(0.0), scan_hi)?;
            let mut modes = Vec::with_capacity(zeros.len() * 2);
            for z in zeros {
                if z_lo == z_hi && (z.k - z_lo).abs() > 1e-9 {
                    continue;
                }
                let k = z.k / r0;
                modes.push(BilliardMode {
                    n: z.n,
                    m: m as i64,
                    k,
                    r0,
                });
                if m > 0 {
                    modes.push(BilliardMode {
                        n: z.n,
                        m: -(m as i64),
                        k,
                        r0,
                    });
                }
            }
            Ok(modes)
        })
        .collect::<Result<_>>()?;

    Ok(per_order.into_iter().flatten().collect())
}

/// Pack billiard modes into an energy-sorted spectrum record with
/// (n, m) labels, so the generic shell/ratio machinery applies.
pub fn to_spectrum(mut modes: Vec<BilliardMode>) -> SpectrumRecord {
    modes.sort_by(|a, b| {
        a.k.partial_cmp(&b.k)
            .unwrap()
            .then_with(|| a.m.cmp(&b.m))
    });
    let energies: Vec<f64> = modes.iter().map(|m| m.energy()).collect();
    let labels: Vec<StateLabel> = modes
        .iter()
        .map(|m| StateLabel {
            n: m.n as i64,
            m: m.m,
        })
        .collect();
    SpectrumRecord::new_unchecked(energies, None, Some(labels))
}

/// The blank-region classifier: class 1 iff ℜ < R_b.
///
/// ℜ is recovered from the record as |m|/√(2E), which reproduces |m|/k at
/// the ħ = 1 convention used by [`to_spectrum`].
pub fn blank_classifier(r_b: f64) -> Classifier {
    Classifier::new("blank_radius", r_b, |s: &StateView| {
        let label = s.label.expect("billiard spectrum carries (n, m) labels");
        label.m.unsigned_abs() as f64 / (2.0 * s.energy).sqrt()
    })
    .with_decision(Decision::Below)
}

/// The classical fraction of trajectories entering radius `R_b`:
/// `g = (2/π)(u√(1-u²) + asin u)` with `u = R_b/R0`.
pub fn g_classical(r_b: f64, r0: f64) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidInput("billiard radius must be positive".into()));
    }
    if !(0.0..=r0).contains(&r_b) {
        return Err(Error::InvalidInput(format!(
            "blank radius {r_b} outside [0, {r0}]"
        )));
    }
    let u = r_b / r0;
    Ok((2.0 / std::f64::consts::PI) * (u * (1.0 - u * u).sqrt() + u.asin()))
}

/// The ratio f(R_b) over a fixed mode shell, sampled on a grid of blank
/// radii. One classifier per grid point; the shell never changes.
pub fn f_curve_vs_rb(modes: &[BilliardMode], rb_grid: &[f64]) -> Result<RatioCurve> {
    if modes.is_empty() {
        return Err(Error::EmptyShell { lo: 0.0, hi: 0.0 });
    }
    let spectrum = to_spectrum(modes.to_vec());
    let total = spectrum.len();
    let mut samples = Vec::with_capacity(rb_grid.len());
    for &rb in rb_grid {
        let cls = blank_classifier(rb);
        let hits: usize = (0..total)
            .map(|k| cls.apply(&spectrum.view(k)) as usize)
            .sum();
        samples.push(RatioSample {
            parameter: rb,
            ratio: Some(hits as f64 / total as f64),
            population: total,
        });
    }
    Ok(RatioCurve {
        parameter_name: "r_b".into(),
        classifier_name: "blank_radius".into(),
        samples,
    })
}

/// Outcome of the ħ-scaling identity check.
#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub w: f64,
    /// Mode set at Planck constant ħ/w in the window of width ΔE.
    pub shrunk_hbar_count: usize,
    /// Mode set at ħ in the window scaled by w².
    pub widened_shell_count: usize,
    /// Exact equality of the two (n, m) mode sets.
    pub sets_equal: bool,
    /// Blank-radius ratio at R_b = R0/2 on each side.
    pub f_shrunk_hbar: f64,
    pub f_widened_shell: f64,
}

impl ScalingReport {
    pub fn holds(&self) -> bool {
        self.sets_equal
    }
}

/// Check the scaling identity for billiard shells: since `E = ħ²k²/2` and
/// the eigenmodes themselves are ħ-independent, shrinking ħ by `w` selects
/// exactly the modes of the window scaled by `w²` at the original ħ.
///
/// The window is the energy image of `[k_c - Δk/2, k_c + Δk/2]` at ħ = 1;
/// under the scaling both its edges (hence center and width) multiply by
/// `w²`. Both sides are enumerated independently.
pub fn hbar_scaling_check(k_c: f64, delta_k: f64, w: f64, r0: f64) -> Result<ScalingReport> {
    if !(w >= 1.0) {
        return Err(Error::InvalidInput(format!("scale factor w = {w} must be ≥ 1")));
    }
    let k_lo = k_c - 0.5 * delta_k;
    let k_hi = k_c + 0.5 * delta_k;
    if k_lo <= 0.0 {
        return Err(Error::InvalidInput("shell lower edge must be positive".into()));
    }
    // Energy window at ħ = 1.
    let e_lo = 0.5 * k_lo * k_lo;
    let e_hi = 0.5 * k_hi * k_hi;

    // Side one: Planck constant ħ = 1/w, same energy window.
    // E = k²/(2w²) ∈ [e_lo, e_hi]  ⇔  k ∈ [w√(2 e_lo), w√(2 e_hi)].
    let hbar = 1.0 / w;
    let left = enumerate_k_window((2.0 * e_lo).sqrt() / hbar, (2.0 * e_hi).sqrt() / hbar, r0)?;

    // Side two: ħ = 1, window scaled by w².
    let right = enumerate_k_window(
        (2.0 * w * w * e_lo).sqrt(),
        (2.0 * w * w * e_hi).sqrt(),
        r0,
    )?;

    let key = |m: &BilliardMode| (m.n, m.m);
    let mut left_keys: Vec<_> = left.iter().map(key).collect();
    let mut right_keys: Vec<_> = right.iter().map(key).collect();
    left_keys.sort_unstable();
    right_keys.sort_unstable();

    let f_of = |modes: &[BilliardMode]| -> f64 {
        if modes.is_empty() {
            return f64::NAN;
        }
        let hits = modes
            .iter()
            .filter(|m| blank_radius(m) < 0.5 * r0)
            .count();
        hits as f64 / modes.len() as f64
    };

    Ok(ScalingReport {
        w,
        shrunk_hbar_count: left.len(),
        widened_shell_count: right.len(),
        sets_equal: left_keys == right_keys,
        f_shrunk_hbar: f_of(&left),
        f_widened_shell: f_of(&right),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Test-side oracle: plain ascending series, independent of the main
    /// evaluator's Miller branch. Accurate for small arguments.
    fn series_oracle(m: u32, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut term = 1.0f64;
        for k in 1..=m {
            term *= half / k as f64;
        }
        let mut sum = term;
        let q = half * half;
        for k in 1..200u32 {
            term *= -q / (k as f64 * (m as f64 + k as f64));
            sum += term;
        }
        sum
    }

    fn oracle_bisect_zero(m: u32, mut a: f64, mut b: f64) -> f64 {
        let mut fa = series_oracle(m, a);
        assert!(fa * series_oracle(m, b) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = series_oracle(m, mid);
            if fa * fm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        0.5 * (a + b)
    }

    /// Second test-side oracle: Bessel's integral
    /// J_m(x) = (1/π) ∫₀^π cos(mθ - x sinθ) dθ.
    /// The integrand extends to an analytic 2π-periodic function, so the
    /// midpoint rule converges geometrically once the point count beats the
    /// bandwidth ~ m + x. Usable at arguments far past the series range.
    fn integral_oracle(m: u32, x: f64) -> f64 {
        let n = 4 * (x as usize + m as usize) + 2000;
        let mut acc = 0.0;
        for i in 0..n {
            let th = (i as f64 + 0.5) / n as f64 * std::f64::consts::PI;
            acc += (m as f64 * th - x * th.sin()).cos();
        }
        acc / n as f64
    }

    fn integral_bisect_zero(m: u32, mut a: f64, mut b: f64) -> f64 {
        let mut fa = integral_oracle(m, a);
        assert!(fa * integral_oracle(m, b) < 0.0);
        while b - a > 1e-13 {
            let mid = 0.5 * (a + b);
            let fm = integral_oracle(m, mid);
            if fa * fm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn bessel_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bessel_rejects_out_of_range() {
        assert!(bessel_j(2001, 1.0).is_err());
        assert!(bessel_j(0, -1.0).is_err());
        assert!(bessel_j(0, 1.0e5).is_err());
    }

    #[test]
    fn first_zero_of_j0_from_series_oracle() {
        let z = oracle_bisect_zero(0, 2.0, 3.0);
        assert_abs_diff_eq!(z, 2.4048255577, epsilon = 1e-9);
        assert!(bessel_j(0, z).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn evaluator_matches_series_oracle_small_x() {
        for m in [0u32, 1, 2, 5, 9] {
            for step in 1..=60 {
                let x = step as f64 * 0.2;
                let a = bessel_j(m, x).unwrap();
                let b = series_oracle(m, x);
                assert!(
                    (a - b).abs() < 1e-12,
                    "J_{m}({x}): {a} vs oracle {b}"
                );
            }
        }
    }

    #[test]
    fn squared_sum_identity_large_x() {
        // J_0² + 2 Σ_{m≥1} J_m² = 1 holds exactly; a strong absolute
        // accuracy check away from the series region.
        for &x in &[50.0f64, 515.0, 1850.0] {
            let mut s = bessel_j(0, x).unwrap().powi(2);
            let mut m = 1;
            loop {
                let v = bessel_j(m, x).unwrap();
                s += 2.0 * v * v;
                if m as f64 > x + 60.0 + 5.0 * x.cbrt() {
                    break;
                }
                m += 1;
            }
            assert!((s - 1.0).abs() < 1e-10, "x={x}: Σ = {s}");
        }
    }

    #[test]
    fn evaluator_matches_integral_oracle() {
        for &(m, x) in &[
            (0u32, 38.2f64),
            (12, 38.2),
            (0, 515.0),
            (40, 515.0),
            (515, 520.0),
            (0, 1.0e4),
            (1, 1.0e4),
            (5, 1.0e4),
        ] {
            let a = bessel_j(m, x).unwrap();
            let b = integral_oracle(m, x);
            assert!(
                (a - b).abs() < 1e-10,
                "J_{m}({x}): {a} vs integral oracle {b}"
            );
        }
    }

    #[test]
    fn zeros_m0_on_2_3() {
        let zeros = bessel_zeros_in(0, 2.0, 3.0).unwrap();
        assert_eq!(zeros.len(), 1);
        assert_eq!(zeros[0].n, 1);
        assert_abs_diff_eq!(zeros[0].k, 2.4048255577, epsilon = 1e-9);
    }

    #[test]
    fn zeros_high_order_below_turning_point() {
        let zeros = bessel_zeros_in(520, 0.0, 510.0).unwrap();
        assert!(zeros.is_empty());
    }

    #[test]
    fn zero_spacing_approaches_pi() {
        // First 20 zeros from the independent integral oracle.
        let mut oracle_zeros = Vec::new();
        let mut x = 0.5f64;
        let mut fx = integral_oracle(0, x);
        while oracle_zeros.len() < 20 {
            let y = x + 0.2;
            let fy = integral_oracle(0, y);
            if fx * fy < 0.0 {
                oracle_zeros.push(integral_bisect_zero(0, x, y));
            }
            x = y;
            fx = fy;
        }
        for w in oracle_zeros.windows(2).skip(4) {
            let gap = w[1] - w[0];
            assert!((3.0..=3.3).contains(&gap), "gap {gap}");
        }
        // Main finder agrees with the oracle.
        let found = bessel_zeros_in(0, 0.0, *oracle_zeros.last().unwrap() + 0.1).unwrap();
        assert_eq!(found.len(), 20);
        for (a, b) in found.iter().zip(oracle_zeros.iter()) {
            assert_abs_diff_eq!(a.k, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_indices_are_global() {
        // Zeros of J_0 in [20, 30] are the 7th..9th (j_{0,7} ≈ 21.2,
        // j_{0,8} ≈ 24.35, j_{0,9} ≈ 27.49).
        let zeros = bessel_zeros_in(0, 20.0, 30.0).unwrap();
        assert_eq!(zeros.len(), 3);
        assert_eq!(zeros[0].n, 7);
        assert_eq!(zeros[2].n, 9);
        // Consistency with a full scan from the origin.
        let all = bessel_zeros_in(0, 0.0, 30.0).unwrap();
        assert_eq!(all.len(), 9);
        assert_abs_diff_eq!(all[6].k, zeros[0].k, epsilon = 1e-12);
    }

    #[test]
    fn blank_radius_values() {
        let mode = BilliardMode {
            n: 1,
            m: 0,
            k: 7.7,
            r0: 1.0,
        };
        assert_eq!(blank_radius(&mode), 0.0);
        let mode = BilliardMode {
            n: 3,
            m: -12,
            k: 24.0,
            r0: 1.0,
        };
        assert_abs_diff_eq!(blank_radius(&mode), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fig1_mode_blank_radius() {
        // Mode (n = 7, m = 12): ℜ = 12/k with k the 7th zero of J_12.
        let zeros = bessel_zeros_in(12, 0.0, 50.0).unwrap();
        assert!(zeros.len() >= 7);
        let k = zeros[6].k;
        assert_eq!(zeros[6].n, 7);
        assert!(bessel_j(12, k).unwrap().abs() <= 1e-9);
        let r = 12.0 / k;
        assert!(r > 0.0 && r < 1.0);
        // Independent oracle for the same zero.
        let mut a = k - 0.3;
        let mut fa = integral_oracle(12, a);
        let mut found = None;
        while a < k + 0.3 {
            let b = a + 0.05;
            let fb = integral_oracle(12, b);
            if fa * fb < 0.0 {
                found = Some(integral_bisect_zero(12, a, b));
                break;
            }
            a = b;
            fa = fb;
        }
        assert_abs_diff_eq!(found.unwrap(), k, epsilon = 1e-9);
    }

    #[test]
    fn enumerate_small_window_modes_satisfy_boundary() {
        let modes = enumerate_shell(20.0, 4.0, 1.0).unwrap();
        assert!(!modes.is_empty());
        for m in &modes {
            let j = bessel_j(m.m.unsigned_abs() as u32, m.k * m.r0).unwrap();
            assert!(j.abs() <= ZERO_RESIDUAL_TOL, "J residual {j:.2e}");
        }
        // ±m pairing: every m > 0 mode has its mirror.
        for m in modes.iter().filter(|m| m.m > 0) {
            assert!(modes
                .iter()
                .any(|o| o.m == -m.m && o.n == m.n && o.k == m.k));
        }
    }

    #[test]
    fn enumerate_zero_width_usually_empty() {
        let modes = enumerate_shell(20.0, 0.0, 1.0).unwrap();
        assert!(modes.is_empty());
    }

    #[test]
    fn g_classical_endpoints_and_monotonicity() {
        assert_eq!(g_classical(0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(g_classical(1.0, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        let mut prev = 0.0;
        for step in 1..=40 {
            let u = step as f64 / 40.0;
            let g = g_classical(u, 1.0).unwrap();
            assert!(g > prev);
            assert!((0.0..=1.0 + 1e-12).contains(&g));
            prev = g;
        }
        assert!(g_classical(1.5, 1.0).is_err());
        assert!(g_classical(-0.1, 1.0).is_err());
    }

    /// 2-D quadrature oracle for g: integrate the entry-angle fraction
    /// α(r)/π over the disk. The radial integral over [R_b, R0] uses the
    /// substitution r = R_b sec θ, which removes the square-root kink at
    /// r = R_b; the polar angle integral is a trivial factor kept explicit.
    fn g_oracle(rb: f64, r0: f64) -> f64 {
        if rb == 0.0 {
            return 0.0;
        }
        let n_theta = 64usize;
        let mut acc_polar = 0.0;
        for it in 0..n_theta {
            let _phi = (it as f64 + 0.5) / n_theta as f64 * std::f64::consts::TAU;
            acc_polar += 1.0 / n_theta as f64; // α is independent of the polar angle
        }
        // Inside r < R_b every direction enters: α = π.
        let inner = std::f64::consts::PI * 0.5 * rb * rb;
        // Outside: α = 2 asin(R_b/r); substitute r = R_b sec θ.
        let theta_max = (rb / r0).acos();
        let n = 20_000usize;
        let mut outer = 0.0;
        for i in 0..n {
            let th = (i as f64 + 0.5) / n as f64 * theta_max;
            let sec = 1.0 / th.cos();
            let r = rb * sec;
            let alpha = 2.0 * (rb / r).asin();
            // r dr = R_b² sec²θ tanθ dθ
            outer += alpha * rb * rb * sec * sec * th.tan() * (theta_max / n as f64);
        }
        acc_polar * std::f64::consts::TAU * (inner + outer)
            / (std::f64::consts::PI * std::f64::consts::PI * r0 * r0)
    }

    #[test]
    fn g_matches_quadrature_oracle() {
        for step in 1..=20 {
            let u = step as f64 / 20.0 * 0.999;
            let g = g_classical(u, 1.0).unwrap();
            let o = g_oracle(u, 1.0);
            assert!(
                (g - o).abs() < 1e-6,
                "u={u}: closed form {g} vs quadrature {o}"
            );
        }
    }

    #[test]
    fn g_at_half_radius() {
        let g = g_classical(0.5, 1.0).unwrap();
        assert_abs_diff_eq!(g, 0.60900, epsilon = 1e-4);
        assert!((g - g_oracle(0.5, 1.0)).abs() < 1e-6);
    }

    #[test]
    fn f_curve_extremes_and_monotonicity() {
        let modes = enumerate_shell(30.0, 6.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let curve = f_curve_vs_rb(&modes, &grid).unwrap();
        let f_at = |rb: f64| -> f64 {
            curve
                .samples
                .iter()
                .find(|s| (s.parameter - rb).abs() < 1e-12)
                .unwrap()
                .ratio
                .unwrap()
        };
        // R_b = R0: every ℜ < R0.
        assert_eq!(f_at(1.0), 1.0);
        // R_b → 0+: only m = 0 modes (ℜ = 0) classify 1.
        let m0 = modes.iter().filter(|m| m.m == 0).count();
        assert_abs_diff_eq!(
            f_at(1.0 / 40.0) * modes.len() as f64,
            modes
                .iter()
                .filter(|m| blank_radius(m) < 1.0 / 40.0)
                .count() as f64,
            epsilon = 1e-9
        );
        assert!(m0 >= 1);
        // Nondecreasing step function.
        let mut prev = -1.0;
        for s in &curve.samples {
            let f = s.ratio.unwrap();
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn scaling_identity_small_window() {
        for &w in &[1.0f64, 1.5, 2.0, 3.0] {
            let rep = hbar_scaling_check(30.0, 2.0, w, 1.0).unwrap();
            assert!(rep.sets_equal, "w={w}: sets differ");
            assert_eq!(rep.shrunk_hbar_count, rep.widened_shell_count);
            if rep.shrunk_hbar_count > 0 {
                assert_eq!(rep.f_shrunk_hbar, rep.f_widened_shell);
            }
        }
    }
}
