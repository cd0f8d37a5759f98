//! Classical coupled top: canonical integration, Poincaré sections,
//! Lyapunov island/sea labelling, and isoenergetic hypersurface volumes.
//!
//! In the canonical chart `l_i = (√(1-P_i²)cos Q_i, √(1-P_i²)sin Q_i, P_i)`
//! the normalized Hamiltonian is
//! `H/J = √(1-P₁²)cos Q₁ + √(1-P₂²)cos Q₂ + μ P₁P₂` with equations of
//! motion `Ṗᵢ = -√(1-Pᵢ²) sin Qᵢ`, `Q̇ᵢ = Pᵢ cos Qᵢ/√(1-Pᵢ²) + μ Pⱼ`.
//! The chart is singular at |Pᵢ| = 1, and chaotic orbits on moderate-energy
//! surfaces pass near those poles routinely, so long trajectories are
//! integrated in the global spin representation `l̇ᵢ = lᵢ × ∂H/∂lᵢ`
//! (equivalent, smooth on the whole sphere) and only expressed in the chart
//! when sections are recorded. The chart-level single-step operation is
//! still provided and aborts when a momentum leaves (-1, 1).
//!
//! The 3-dimensional area of a region Ω of the energy surface is recovered
//! from its Poincaré sections: `V(Ω) = ∫ dQ₁ ∬_Ω dP₁dP₂ C₁C₂` with the two
//! projection factors `C₁ = √(1 + (∂Q₂/∂P₁)² + (∂Q₂/∂P₂)²)` and
//! `C₂ = (1 - (∂_{Q₁}H/|∇H|)²)^{-1/2}`, integrated by the trapezoid rule
//! over a Q₁ partition.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Fixed integration step (validated by the fourth-order drift checks).
pub const DEFAULT_STEP: f64 = 1e-3;
/// Default Lyapunov integration horizon.
pub const DEFAULT_LYAPUNOV_TIME: f64 = 1e4;
/// Island/sea threshold on the largest Lyapunov exponent, calibrated for
/// label stability under doubling of the horizon.
pub const DEFAULT_LAMBDA_STAR: f64 = 1e-2;
/// Canonical momenta are kept strictly inside (-1, 1) by this guard band.
pub const MOMENTUM_GUARD: f64 = 1e-9;
/// Finite-difference step for the surface partial derivatives.
pub const FD_STEP: f64 = 1e-5;

/// The Q₁ partition used for volume quadrature (18 sections).
pub const DEFAULT_Q1_PARTITION: [f64; 18] = [
    0.1, 0.7, 1.0, 1.3, 1.6, 1.9, 2.2, 2.5, 2.8, 3.1, 3.4, 3.7, 4.0, 4.3, 4.6, 4.9, 5.2, 5.8,
];

/// A point of the 4-dimensional phase space; angles stored mod 2π,
/// momenta strictly inside (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PhasePoint {
    pub fn new(q1: f64, q2: f64, p1: f64, p2: f64) -> Result<Self> {
        if !(p1.abs() < 1.0 - MOMENTUM_GUARD && p2.abs() < 1.0 - MOMENTUM_GUARD) {
            return Err(Error::InvalidInput(format!(
                "momenta ({p1}, {p2}) outside the open interval (-1, 1)"
            )));
        }
        Ok(Self {
            q1: q1.rem_euclid(TAU),
            q2: q2.rem_euclid(TAU),
            p1,
            p2,
        })
    }

    /// Normalized energy H/J.
    pub fn energy(&self, mu: f64) -> f64 {
        hamiltonian(self.q1, self.q2, self.p1, self.p2, mu)
    }

    fn to_state(self) -> [f64; 4] {
        [self.q1, self.q2, self.p1, self.p2]
    }

    fn from_state(x: [f64; 4]) -> Result<Self> {
        PhasePoint::new(x[0], x[1], x[2], x[3])
    }

    /// Both unit spin vectors of the global representation.
    pub fn to_spins(self) -> SpinState {
        let r1 = (1.0 - self.p1 * self.p1).sqrt();
        let r2 = (1.0 - self.p2 * self.p2).sqrt();
        [
            r1 * self.q1.cos(),
            r1 * self.q1.sin(),
            self.p1,
            r2 * self.q2.cos(),
            r2 * self.q2.sin(),
            self.p2,
        ]
    }
}

/// H/J as a function of the four independent chart coordinates.
pub fn hamiltonian(q1: f64, q2: f64, p1: f64, p2: f64, mu: f64) -> f64 {
    (1.0 - p1 * p1).sqrt() * q1.cos() + (1.0 - p2 * p2).sqrt() * q2.cos() + mu * p1 * p2
}

/// Time derivative of (Q₁, Q₂, P₁, P₂) in the canonical chart.
#[inline]
fn deriv(x: &[f64; 4], mu: f64) -> [f64; 4] {
    let (s1, c1) = x[0].sin_cos();
    let (s2, c2) = x[1].sin_cos();
    let r1 = (1.0 - x[2] * x[2]).sqrt();
    let r2 = (1.0 - x[3] * x[3]).sqrt();
    [
        x[2] * c1 / r1 + mu * x[3],
        x[3] * c2 / r2 + mu * x[2],
        -r1 * s1,
        -r2 * s2,
    ]
}

#[inline]
fn rk4<const N: usize>(x: &[f64; N], h: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let k1 = f(x);
    let mut tmp = [0.0; N];
    for i in 0..N {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    let k2 = f(&tmp);
    for i in 0..N {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = f(&tmp);
    for i in 0..N {
        tmp[i] = x[i] + h * k3[i];
    }
    let k4 = f(&tmp);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn momenta_ok(p1: f64, p2: f64) -> bool {
    p1.is_finite()
        && p2.is_finite()
        && p1.abs() < 1.0 - MOMENTUM_GUARD
        && p2.abs() < 1.0 - MOMENTUM_GUARD
}

/// One RK4 step of the canonical equations. Momenta leaving the open
/// interval (-1, 1) abort the trajectory with a diagnostic.
pub fn eom_step(x: &PhasePoint, mu: f64, h: f64) -> Result<PhasePoint> {
    let next = rk4(&x.to_state(), h, |s| deriv(s, mu));
    if !momenta_ok(next[2], next[3]) {
        return Err(Error::TrajectoryAborted { t: h });
    }
    PhasePoint::from_state(next)
}

/// Integrate in the canonical chart for a fixed time; returns the endpoint.
pub fn integrate(x0: &PhasePoint, mu: f64, t_max: f64, h: f64) -> Result<PhasePoint> {
    let steps = (t_max / h).round() as u64;
    let mut x = x0.to_state();
    for step in 0..steps {
        x = rk4(&x, h, |s| deriv(s, mu));
        if !momenta_ok(x[2], x[3]) {
            return Err(Error::TrajectoryAborted {
                t: (step + 1) as f64 * h,
            });
        }
    }
    PhasePoint::from_state(x)
}

// ---------------------------------------------------------------------------
// Global spin representation
// ---------------------------------------------------------------------------

/// `[l1x, l1y, l1z, l2x, l2y, l2z]`, both vectors on the unit sphere.
pub type SpinState = [f64; 6];

/// H/J in the spin representation: `l1x + l2x + μ l1z l2z`, identical to
/// the canonical value (`l_z` is the canonical momentum).
pub fn spin_energy(l: &SpinState, mu: f64) -> f64 {
    l[0] + l[3] + mu * l[2] * l[5]
}

/// Spin-precession form of the same flow: `l̇ᵢ = lᵢ × bᵢ` with effective
/// fields `b₁ = (1, 0, μ l2z)`, `b₂ = (1, 0, μ l1z)`. Smooth everywhere.
#[inline]
fn spin_deriv(l: &[f64; 6], mu: f64) -> [f64; 6] {
    let b1z = mu * l[5];
    let b2z = mu * l[2];
    [
        l[1] * b1z,
        l[2] * 1.0 - l[0] * b1z,
        -l[1] * 1.0,
        l[4] * b2z,
        l[5] * 1.0 - l[3] * b2z,
        -l[4] * 1.0,
    ]
}

/// Combined spin + tangent derivative; the tangent obeys
/// `δl̇ᵢ = δlᵢ × bᵢ + lᵢ × δbᵢ` with `δb₁ = (0, 0, μ δl2z)` etc.
#[inline]
fn spin_deriv_tangent(x: &[f64; 12], mu: f64) -> [f64; 12] {
    let l = [x[0], x[1], x[2], x[3], x[4], x[5]];
    let v = [x[6], x[7], x[8], x[9], x[10], x[11]];
    let d = spin_deriv(&l, mu);

    let b1z = mu * l[5];
    let b2z = mu * l[2];
    let db1z = mu * v[5];
    let db2z = mu * v[2];

    [
        d[0],
        d[1],
        d[2],
        d[3],
        d[4],
        d[5],
        v[1] * b1z + l[1] * db1z,
        v[2] - (v[0] * b1z + l[0] * db1z),
        -v[1],
        v[4] * b2z + l[4] * db2z,
        v[5] - (v[3] * b2z + l[3] * db2z),
        -v[4],
    ]
}

/// Solve the energy constraint for Q₂ given (Q₁, P₁, P₂):
/// `cos Q₂ = (E - μP₁P₂ - √(1-P₁²)cos Q₁)/√(1-P₂²)`, principal branch
/// (sin Q₂ ≥ 0). `None` when the point is off the energy surface.
pub fn solve_q2(e: f64, mu: f64, q1: f64, p1: f64, p2: f64) -> Option<f64> {
    let arg = cos_q2_arg(e, mu, q1, p1, p2);
    if arg.abs() <= 1.0 {
        Some(arg.acos())
    } else {
        None
    }
}

/// The arccos argument of the Q₂ constraint.
pub fn cos_q2_arg(e: f64, mu: f64, q1: f64, p1: f64, p2: f64) -> f64 {
    (e - mu * p1 * p2 - (1.0 - p1 * p1).sqrt() * q1.cos()) / (1.0 - p2 * p2).sqrt()
}

/// Uniform draw of an energy-surface point: (Q₁, P₁, P₂) uniform over
/// `[0,2π) × (-1,1)²`, Q₂ solved from the constraint; inadmissible draws
/// retried. Deterministic for a fixed generator state.
pub fn random_energy_seed(e: f64, mu: f64, rng: &mut ChaCha12Rng) -> Result<PhasePoint> {
    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let q1: f64 = rng.gen_range(0.0..TAU);
        let p1: f64 = rng.gen_range(-1.0 + MOMENTUM_GUARD..1.0 - MOMENTUM_GUARD);
        let p2: f64 = rng.gen_range(-1.0 + MOMENTUM_GUARD..1.0 - MOMENTUM_GUARD);
        if let Some(q2) = solve_q2(e, mu, q1, p1, p2) {
            return PhasePoint::new(q1, q2, p1, p2);
        }
    }
    Err(Error::SeedExhausted {
        attempts: MAX_ATTEMPTS,
    })
}

/// Fewer than this many kept crossings marks a section cloud as
/// low-statistics.
pub const LOW_STATISTICS_CROSSINGS: usize = 10;

/// Crossings of the Q₁ = π plane with sin Q₂ > 0.
#[derive(Debug, Clone)]
pub struct SectionCloud {
    /// (P₁, P₂) at each kept crossing.
    pub points: Vec<(f64, f64)>,
    /// Q̇₁ sign at each kept crossing (+1 / -1), aligned with `points`.
    pub directions: Vec<i8>,
    /// Energy H/J of the source trajectory.
    pub energy: f64,
    /// Total crossings of the plane (both sin Q₂ signs).
    pub crossings: usize,
    /// Worst |sin Q₁| left after refinement over the kept points.
    pub max_residual: f64,
    /// Set when the trajectory produced fewer than 10 kept crossings.
    pub low_statistics: bool,
}

/// Integrate from `x0` and collect the Poincaré section at Q₁ = π with
/// sin Q₂ > 0.
///
/// In spin variables the plane Q₁ = π is `l1y = 0, l1x < 0`; each
/// bracketing step is refined by a secant iteration on sin Q₁ = l1y/r₁
/// down to |Q₁ - π| ≤ 1e-9.
pub fn poincare_section(x0: &PhasePoint, mu: f64, t_max: f64, h: f64) -> Result<SectionCloud> {
    let energy = x0.energy(mu);
    let steps = (t_max / h).round() as u64;
    let mut l = x0.to_spins();
    let mut points = Vec::new();
    let mut directions = Vec::new();
    let mut crossings = 0usize;
    let mut max_residual = 0.0f64;

    for _step in 0..steps {
        let l_prev = l;
        l = rk4(&l, h, |s| spin_deriv(s, mu));
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrajectoryAborted {
                t: (_step + 1) as f64 * h,
            });
        }
        // Q₁ = π plane: l1y sign change on the l1x < 0 side.
        if l_prev[1] * l[1] < 0.0 && (l_prev[0] < 0.0 || l[0] < 0.0) {
            crossings += 1;
            if let Some((cross, residual)) = refine_plane_crossing(&l_prev, mu, h) {
                if cross[4] > 0.0 {
                    // sin Q₂ > 0
                    points.push((cross[2], cross[5]));
                    directions.push(if l[1] < l_prev[1] { 1 } else { -1 });
                    max_residual = max_residual.max(residual);
                }
            }
        }
    }

    let low_statistics = points.len() < LOW_STATISTICS_CROSSINGS;
    Ok(SectionCloud {
        points,
        directions,
        energy,
        crossings,
        max_residual,
        low_statistics,
    })
}

/// Secant refinement of a Q₁ = π crossing inside one step: find τ ∈ [0, h]
/// with sin Q₁(τ) = l1y/r₁ = 0, re-integrating the partial step from the
/// saved pre-crossing state. Returns the crossing state and |sin Q₁| left.
fn refine_plane_crossing(l_prev: &SpinState, mu: f64, h: f64) -> Option<(SpinState, f64)> {
    let eval = |tau: f64| -> (SpinState, f64) {
        let l = rk4(l_prev, tau, |s| spin_deriv(s, mu));
        let r1 = (l[0] * l[0] + l[1] * l[1]).sqrt();
        if r1 < 1e-6 {
            // Crossing hugging the chart pole: sin Q₁ ill-defined.
            return (l, f64::NAN);
        }
        (l, l[1] / r1)
    };
    let (_, g0) = eval(0.0);
    if !g0.is_finite() {
        return None;
    }
    let mut t0 = 0.0;
    let mut g_prev = g0;
    let mut t1 = h;
    let (mut x1, mut g1) = eval(h);
    for _ in 0..80 {
        if !g1.is_finite() {
            return None;
        }
        if g1.abs() <= 1e-9 {
            return Some((x1, g1.abs()));
        }
        let denom = g1 - g_prev;
        if denom == 0.0 {
            break;
        }
        let t2 = (t1 - g1 * (t1 - t0) / denom).clamp(0.0, h);
        t0 = t1;
        g_prev = g1;
        t1 = t2;
        let out = eval(t2);
        x1 = out.0;
        g1 = out.1;
    }
    if g1.is_finite() && g1.abs() <= 1e-9 {
        Some((x1, g1.abs()))
    } else {
        None
    }
}

/// Island (regular) or sea (chaotic) verdict for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitClass {
    Island,
    Sea,
}

/// Lyapunov outcome; `class` is `None` when the trajectory aborted.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovOutcome {
    pub lambda: f64,
    pub class: Option<OrbitClass>,
    pub elapsed: f64,
}

const RENORM_INTERVAL: u64 = 100;

/// Estimate the largest Lyapunov exponent by tangent-vector
/// renormalization over time `t_max`, and label the orbit island iff
/// λ < λ*. Runs in the global spin representation, so only numerical
/// breakdown (never the chart singularity) can abort it.
pub fn lyapunov_label(
    x0: &PhasePoint,
    mu: f64,
    t_max: f64,
    lambda_star: f64,
    h: f64,
) -> LyapunovOutcome {
    lyapunov_run(&x0.to_spins(), mu, t_max, lambda_star, h, None)
}

fn lyapunov_run(
    l0: &SpinState,
    mu: f64,
    t_max: f64,
    lambda_star: f64,
    h: f64,
    early_exit_factor: Option<f64>,
) -> LyapunovOutcome {
    let steps = (t_max / h).round() as u64;
    let mut x = [
        l0[0], l0[1], l0[2], l0[3], l0[4], l0[5], 1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ];
    let mut log_sum = 0.0f64;
    for step in 0..steps {
        x = rk4(&x, h, |s| spin_deriv_tangent(s, mu));
        if (step + 1) % RENORM_INTERVAL == 0 {
            if x[..6].iter().any(|v| !v.is_finite()) {
                return LyapunovOutcome {
                    lambda: f64::NAN,
                    class: None,
                    elapsed: (step + 1) as f64 * h,
                };
            }
            let norm = x[6..12].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                log_sum += norm.ln();
                for v in &mut x[6..12] {
                    *v /= norm;
                }
            }
            if let Some(factor) = early_exit_factor {
                let elapsed = (step + 1) as f64 * h;
                // The running exponent can decay at most like t/t_max, so a
                // wide margin at quarter time already fixes the verdict.
                if elapsed >= 0.25 * t_max {
                    let running = log_sum / elapsed;
                    if running >= factor * lambda_star {
                        return LyapunovOutcome {
                            lambda: running,
                            class: Some(OrbitClass::Sea),
                            elapsed,
                        };
                    }
                }
            }
        }
    }
    let norm = x[6..12].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        log_sum += norm.ln();
    }
    let lambda = log_sum / t_max;
    let class = if lambda < lambda_star {
        OrbitClass::Island
    } else {
        OrbitClass::Sea
    };
    LyapunovOutcome {
        lambda,
        class: Some(class),
        elapsed: t_max,
    }
}

// ---------------------------------------------------------------------------
// Hypersurface volume
// ---------------------------------------------------------------------------

/// Which region of the energy surface to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Total,
    Island,
}

/// Parameters of the volume quadrature and the labelling pipeline.
#[derive(Debug, Clone)]
pub struct VolumeParams {
    /// Q₁ partition for the trapezoid rule.
    pub q1_partition: Vec<f64>,
    /// P₁, P₂ grid spacing (≤ 0.02).
    pub grid_step: f64,
    /// Points with |cos Q₂ argument| above 1 - margin are treated as off
    /// the surface; applied identically to the grid and the Monte Carlo
    /// route so both estimate the same truncated measure.
    pub admissibility_margin: f64,
    /// Points with 1 - (∂_{Q₁}H/|∇H|)² below this are C₂-singular:
    /// excluded, with their capped measure reported.
    pub c2_cutoff: f64,
    pub integration_step: f64,
    pub lyapunov_time: f64,
    pub lambda_star: f64,
    /// Random energy-surface seeds painted before cell-by-cell labelling.
    pub initial_seeds: usize,
    /// Cap on trajectories seeded from still-unlabelled cells.
    pub max_cell_seeds: usize,
    pub rng_seed: u64,
}

impl Default for VolumeParams {
    fn default() -> Self {
        Self {
            q1_partition: DEFAULT_Q1_PARTITION.to_vec(),
            grid_step: 0.02,
            admissibility_margin: 5e-3,
            c2_cutoff: 1e-3,
            integration_step: DEFAULT_STEP,
            lyapunov_time: DEFAULT_LYAPUNOV_TIME,
            lambda_star: DEFAULT_LAMBDA_STAR,
            initial_seeds: 192,
            max_cell_seeds: 1200,
            rng_seed: 7,
        }
    }
}

/// Per-section areas entering the trapezoid sum.
#[derive(Debug, Clone)]
pub struct SectionArea {
    pub q1: f64,
    pub total: f64,
    pub island: f64,
    /// Capped measure of C₂-singular cells (excluded from `total`).
    pub excluded: f64,
    /// Measure of admissible cells whose label came from neighbor filling
    /// rather than a trajectory.
    pub unresolved: f64,
}

/// Hypersurface areas with the labelling bookkeeping.
#[derive(Debug, Clone)]
pub struct VolumeReport {
    pub energy: f64,
    pub mu: f64,
    pub v_total: f64,
    /// Present when the island region was requested.
    pub v_island: Option<f64>,
    /// V_island / V_total.
    pub ratio: Option<f64>,
    /// Capped measure of C₂-singular cells over the partition (should stay
    /// within 2% of V_total).
    pub excluded_measure: f64,
    /// Measure labelled by neighbor filling instead of trajectories.
    pub unresolved_measure: f64,
    pub sections: Vec<SectionArea>,
    pub grid_step: f64,
    pub q1_partition: Vec<f64>,
    /// Trajectories integrated during labelling.
    pub trajectories: usize,
}

enum CellWeight {
    Admissible(f64),
    OffSurface,
    C2Singular(f64),
}

fn cell_weight(e: f64, mu: f64, q1: f64, p1: f64, p2: f64, params: &VolumeParams) -> CellWeight {
    let margin = params.admissibility_margin;
    let arg = cos_q2_arg(e, mu, q1, p1, p2);
    if !arg.is_finite() || arg.abs() > 1.0 - margin {
        return CellWeight::OffSurface;
    }
    let d = FD_STEP;
    // ∂Q₂/∂P by central differences on the constraint solution.
    let stencil = [
        cos_q2_arg(e, mu, q1, p1 + d, p2),
        cos_q2_arg(e, mu, q1, p1 - d, p2),
        cos_q2_arg(e, mu, q1, p1, p2 + d),
        cos_q2_arg(e, mu, q1, p1, p2 - d),
    ];
    if stencil.iter().any(|a| a.abs() >= 1.0) {
        return CellWeight::OffSurface;
    }
    let dq2_dp1 = (stencil[0].acos() - stencil[1].acos()) / (2.0 * d);
    let dq2_dp2 = (stencil[2].acos() - stencil[3].acos()) / (2.0 * d);
    let c1 = (1.0 + dq2_dp1 * dq2_dp1 + dq2_dp2 * dq2_dp2).sqrt();

    // ∇H at the surface point, by central differences in the chart.
    let q2 = arg.acos();
    let dh = |f: &dyn Fn(f64) -> f64| (f(d) - f(-d)) / (2.0 * d);
    let h_q1 = dh(&|s| hamiltonian(q1 + s, q2, p1, p2, mu));
    let h_q2 = dh(&|s| hamiltonian(q1, q2 + s, p1, p2, mu));
    let h_p1 = dh(&|s| hamiltonian(q1, q2, p1 + s, p2, mu));
    let h_p2 = dh(&|s| hamiltonian(q1, q2, p1, p2 + s, mu));
    let grad_sq = h_q1 * h_q1 + h_q2 * h_q2 + h_p1 * h_p1 + h_p2 * h_p2;
    if grad_sq == 0.0 {
        return CellWeight::OffSurface;
    }
    let one_minus = 1.0 - h_q1 * h_q1 / grad_sq;
    if one_minus < params.c2_cutoff {
        return CellWeight::C2Singular(c1 / params.c2_cutoff.sqrt());
    }
    CellWeight::Admissible(c1 / one_minus.sqrt())
}

fn cell_count(params: &VolumeParams) -> usize {
    (2.0 / params.grid_step).round() as usize
}

fn cell_center(i: usize, params: &VolumeParams) -> f64 {
    -1.0 + (i as f64 + 0.5) * params.grid_step
}

fn cell_index(p: f64, params: &VolumeParams) -> Option<usize> {
    let n = cell_count(params);
    let idx = ((p + 1.0) / params.grid_step).floor();
    if idx >= 0.0 && (idx as usize) < n {
        Some(idx as usize)
    } else {
        None
    }
}

/// Majority-vote label storage per (section, cell, cell).
struct LabelGrids {
    island_votes: Vec<Vec<u32>>,
    sea_votes: Vec<Vec<u32>>,
    n: usize,
}

impl LabelGrids {
    fn new(sections: usize, n: usize) -> Self {
        Self {
            island_votes: vec![vec![0; n * n]; sections],
            sea_votes: vec![vec![0; n * n]; sections],
            n,
        }
    }

    fn vote(&mut self, sec: usize, i: usize, j: usize, class: OrbitClass) {
        match class {
            OrbitClass::Island => self.island_votes[sec][i * self.n + j] += 1,
            OrbitClass::Sea => self.sea_votes[sec][i * self.n + j] += 1,
        }
    }

    fn label(&self, sec: usize, i: usize, j: usize) -> Option<OrbitClass> {
        let isl = self.island_votes[sec][i * self.n + j];
        let sea = self.sea_votes[sec][i * self.n + j];
        if isl == 0 && sea == 0 {
            None
        } else if isl > sea {
            Some(OrbitClass::Island)
        } else {
            Some(OrbitClass::Sea)
        }
    }
}

/// One labelling run in spin variables: Lyapunov class plus the section
/// cells the crossings of every partition plane visited. Bulk labelling
/// exits early on unambiguous chaos (10× the threshold at ≥ quarter time).
fn label_run(
    l0: &SpinState,
    mu: f64,
    params: &VolumeParams,
) -> (Option<OrbitClass>, Vec<(u16, u16, u16)>) {
    let sections = &params.q1_partition;
    let trig: Vec<(f64, f64)> = sections.iter().map(|&q| q.sin_cos()).collect();
    let h = params.integration_step;
    let steps = (params.lyapunov_time / h).round() as u64;

    let mut x = [
        l0[0], l0[1], l0[2], l0[3], l0[4], l0[5], 1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ];
    let mut log_sum = 0.0f64;
    let mut visited: Vec<(u16, u16, u16)> = Vec::new();
    // Signed distance from each section plane: u_c = l1y cos c - l1x sin c,
    // which is r₁ sin(Q₁ - c); the crossing at Q₁ = c (not c + π) is the
    // sign flip on the cos(Q₁ - c) > 0 side.
    let mut u_prev: Vec<f64> = trig
        .iter()
        .map(|&(s, c)| x[1] * c - x[0] * s)
        .collect();

    let mut early: Option<LyapunovOutcome> = None;
    for step in 0..steps {
        let x_prev = x;
        x = rk4(&x, h, |s| spin_deriv_tangent(s, mu));
        for (sec, &(s_c, c_c)) in trig.iter().enumerate() {
            let u = x[1] * c_c - x[0] * s_c;
            let prev = u_prev[sec];
            if prev * u < 0.0 {
                let w_prev = x_prev[0] * c_c + x_prev[1] * s_c;
                let w = x[0] * c_c + x[1] * s_c;
                if w_prev > 0.0 || w > 0.0 {
                    // Linear interpolation is enough at cell resolution.
                    let frac = prev / (prev - u);
                    let l2y = x_prev[4] + frac * (x[4] - x_prev[4]);
                    if l2y > 0.0 {
                        let p1 = x_prev[2] + frac * (x[2] - x_prev[2]);
                        let p2 = x_prev[5] + frac * (x[5] - x_prev[5]);
                        if let (Some(i), Some(j)) =
                            (cell_index(p1, params), cell_index(p2, params))
                        {
                            visited.push((sec as u16, i as u16, j as u16));
                        }
                    }
                }
            }
            u_prev[sec] = u;
        }

        if (step + 1) % RENORM_INTERVAL == 0 {
            if x[..6].iter().any(|v| !v.is_finite()) {
                return (None, visited);
            }
            let norm = x[6..12].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                log_sum += norm.ln();
                for v in &mut x[6..12] {
                    *v /= norm;
                }
            }
            let elapsed = (step + 1) as f64 * h;
            if elapsed >= 0.25 * params.lyapunov_time {
                let running = log_sum / elapsed;
                if running >= 10.0 * params.lambda_star {
                    early = Some(LyapunovOutcome {
                        lambda: running,
                        class: Some(OrbitClass::Sea),
                        elapsed,
                    });
                    break;
                }
            }
        }
    }

    let class = match early {
        Some(out) => out.class,
        None => {
            let norm = x[6..12].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                log_sum += norm.ln();
            }
            let lambda = log_sum / params.lyapunov_time;
            Some(if lambda < params.lambda_star {
                OrbitClass::Island
            } else {
                OrbitClass::Sea
            })
        }
    };
    (class, visited)
}

fn admissible_cells(e: f64, mu: f64, q1: f64, params: &VolumeParams) -> Vec<(usize, usize)> {
    let n = cell_count(params);
    let mut cells = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let p1 = cell_center(i, params);
            let p2 = cell_center(j, params);
            if let CellWeight::Admissible(_) = cell_weight(e, mu, q1, p1, p2, params) {
                cells.push((i, j));
            }
        }
    }
    cells
}

fn build_labels(
    e: f64,
    mu: f64,
    params: &VolumeParams,
    admissible: &[Vec<(usize, usize)>],
) -> (LabelGrids, usize) {
    let n = cell_count(params);
    let n_sections = params.q1_partition.len();
    let mut grids = LabelGrids::new(n_sections, n);
    let mut trajectories = 0usize;

    // Phase 1: random surface seeds.
    let mut rng = ChaCha12Rng::seed_from_u64(params.rng_seed);
    let seeds: Vec<SpinState> = (0..params.initial_seeds)
        .filter_map(|_| random_energy_seed(e, mu, &mut rng).ok())
        .map(|x| x.to_spins())
        .collect();
    let outcomes: Vec<_> = seeds
        .par_iter()
        .map(|l0| label_run(l0, mu, params))
        .collect();
    for (class, visited) in outcomes {
        trajectories += 1;
        if let Some(class) = class {
            for (sec, i, j) in visited {
                grids.vote(sec as usize, i as usize, j as usize, class);
            }
        }
    }

    // Phase 2: seed from still-unlabelled admissible cells, in
    // deterministic section/cell order, until coverage or budget runs out.
    let mut budget = params.max_cell_seeds;
    let batch_size = (4 * rayon::current_num_threads()).max(8);
    while budget > 0 {
        let mut batch: Vec<(usize, usize, usize, SpinState)> = Vec::new();
        'collect: for (sec, cells) in admissible.iter().enumerate() {
            let q1 = params.q1_partition[sec];
            for &(i, j) in cells {
                if grids.label(sec, i, j).is_none() {
                    let p1 = cell_center(i, params);
                    let p2 = cell_center(j, params);
                    if let Some(q2) = solve_q2(e, mu, q1, p1, p2) {
                        if let Ok(x0) = PhasePoint::new(q1, q2, p1, p2) {
                            batch.push((sec, i, j, x0.to_spins()));
                            if batch.len() >= batch_size.min(budget) {
                                break 'collect;
                            }
                        }
                    }
                }
            }
        }
        if batch.is_empty() {
            break;
        }
        budget -= batch.len();
        let outcomes: Vec<_> = batch
            .par_iter()
            .map(|(_, _, _, l0)| label_run(l0, mu, params))
            .collect();
        for ((sec, i, j, _), (class, visited)) in batch.iter().zip(outcomes) {
            trajectories += 1;
            if let Some(class) = class {
                // The seed cell is labelled directly even when the orbit
                // never re-crosses it.
                grids.vote(*sec, *i, *j, class);
                for (s, a, b) in visited {
                    grids.vote(s as usize, a as usize, b as usize, class);
                }
            } else {
                grids.vote(*sec, *i, *j, OrbitClass::Sea);
            }
        }
    }

    (grids, trajectories)
}

/// Fill any admissible cell still unlabelled from its nearest labelled
/// neighbors (expanding Chebyshev rings); returns the filled cells.
fn fill_unlabelled(
    grids: &mut LabelGrids,
    admissible: &[Vec<(usize, usize)>],
) -> Vec<std::collections::HashSet<(usize, usize)>> {
    let n = grids.n;
    let mut filled: Vec<std::collections::HashSet<(usize, usize)>> =
        vec![std::collections::HashSet::new(); admissible.len()];
    for (sec, cells) in admissible.iter().enumerate() {
        let pending: Vec<(usize, usize)> = cells
            .iter()
            .copied()
            .filter(|&(i, j)| grids.label(sec, i, j).is_none())
            .collect();
        for &(i, j) in &pending {
            let mut vote_island = 0u32;
            let mut vote_sea = 0u32;
            for radius in 1..n {
                let i_lo = i.saturating_sub(radius);
                let i_hi = (i + radius).min(n - 1);
                let j_lo = j.saturating_sub(radius);
                let j_hi = (j + radius).min(n - 1);
                for a in i_lo..=i_hi {
                    for b in j_lo..=j_hi {
                        if a.abs_diff(i) != radius && b.abs_diff(j) != radius {
                            continue;
                        }
                        match grids.label(sec, a, b) {
                            Some(OrbitClass::Island) => vote_island += 1,
                            Some(OrbitClass::Sea) => vote_sea += 1,
                            None => {}
                        }
                    }
                }
                if vote_island + vote_sea > 0 {
                    break;
                }
            }
            let class = if vote_island > vote_sea {
                OrbitClass::Island
            } else {
                OrbitClass::Sea
            };
            grids.vote(sec, i, j, class);
            filled[sec].insert((i, j));
        }
    }
    filled
}

/// Hypersurface area of the requested region at energy `e` (H/J units).
///
/// The Q₁ integral runs over the given partition by the trapezoid rule;
/// each section integrates C₁C₂ over its admissible grid cells. For
/// `Region::Island` the cells are restricted to those whose Lyapunov label
/// is island; the total is reported alongside from the same sweep.
pub fn hyperarea(region: Region, e: f64, mu: f64, params: &VolumeParams) -> Result<VolumeReport> {
    if params.q1_partition.len() < 2 {
        return Err(Error::InvalidInput(
            "Q₁ partition needs at least 2 points".into(),
        ));
    }
    if params.q1_partition.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("Q₁ partition must be ascending".into()));
    }
    if params.q1_partition[0] < 0.0 || *params.q1_partition.last().unwrap() > TAU {
        return Err(Error::InvalidInput("Q₁ partition must lie in [0, 2π]".into()));
    }
    if !(params.grid_step > 0.0 && params.grid_step <= 0.02 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "grid step {} must be in (0, 0.02]",
            params.grid_step
        )));
    }

    let admissible: Vec<Vec<(usize, usize)>> = params
        .q1_partition
        .par_iter()
        .map(|&q1| admissible_cells(e, mu, q1, params))
        .collect();

    let (labels, trajectories, filled) = match region {
        Region::Island => {
            let (mut grids, trajectories) = build_labels(e, mu, params, &admissible);
            let filled = fill_unlabelled(&mut grids, &admissible);
            (Some(grids), trajectories, filled)
        }
        Region::Total => (None, 0, vec![std::collections::HashSet::new(); admissible.len()]),
    };

    let da = params.grid_step * params.grid_step;
    let n = cell_count(params);
    let sections: Vec<SectionArea> = params
        .q1_partition
        .par_iter()
        .enumerate()
        .map(|(sec, &q1)| {
            let mut total = 0.0;
            let mut island = 0.0;
            let mut excluded = 0.0;
            let mut unresolved = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let p1 = cell_center(i, params);
                    let p2 = cell_center(j, params);
                    match cell_weight(e, mu, q1, p1, p2, params) {
                        CellWeight::Admissible(w) => {
                            total += w * da;
                            if let Some(grids) = &labels {
                                if grids.label(sec, i, j) == Some(OrbitClass::Island) {
                                    island += w * da;
                                }
                                if filled[sec].contains(&(i, j)) {
                                    unresolved += w * da;
                                }
                            }
                        }
                        CellWeight::C2Singular(w_cap) => excluded += w_cap * da,
                        CellWeight::OffSurface => {}
                    }
                }
            }
            SectionArea {
                q1,
                total,
                island,
                excluded,
                unresolved,
            }
        })
        .collect();

    let trapezoid = |pick: &dyn Fn(&SectionArea) -> f64| -> f64 {
        sections
            .windows(2)
            .map(|w| 0.5 * (pick(&w[0]) + pick(&w[1])) * (w[1].q1 - w[0].q1))
            .sum()
    };
    let v_total = trapezoid(&|s| s.total);
    let excluded_measure = trapezoid(&|s| s.excluded);
    let unresolved_measure = trapezoid(&|s| s.unresolved);
    let (v_island, ratio) = match region {
        Region::Island => {
            let v = trapezoid(&|s| s.island);
            (Some(v), Some(v / v_total))
        }
        Region::Total => (None, None),
    };

    Ok(VolumeReport {
        energy: e,
        mu,
        v_total,
        v_island,
        ratio,
        excluded_measure,
        unresolved_measure,
        sections,
        grid_step: params.grid_step,
        q1_partition: params.q1_partition.clone(),
        trajectories,
    })
}

/// Monte Carlo estimate of the same truncated surface measure: uniform
/// samples of (Q₁, P₁, P₂) over `[q1_min, q1_max] × (-1,1)²` weighted by
/// C₁C₂ under identical admissibility and C₂ cutoffs.
///
/// Returns the estimate and its standard error.
pub fn mc_total_volume(
    e: f64,
    mu: f64,
    params: &VolumeParams,
    samples: usize,
    rng_seed: u64,
) -> (f64, f64) {
    let q1_min = params.q1_partition[0];
    let q1_max = *params.q1_partition.last().unwrap();
    let box_volume = (q1_max - q1_min) * 4.0;
    let chunk = 100_000usize.min(samples.max(1));
    let n_chunks = samples.div_ceil(chunk);
    let sums: Vec<(f64, f64, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha12Rng::seed_from_u64(rng_seed.wrapping_add(c as u64));
            let count = chunk.min(samples - c * chunk);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                let q1 = rng.gen_range(q1_min..q1_max);
                let p1 = rng.gen_range(-1.0..1.0);
                let p2 = rng.gen_range(-1.0..1.0);
                let w = match cell_weight(e, mu, q1, p1, p2, params) {
                    CellWeight::Admissible(w) => w,
                    _ => 0.0,
                };
                s += w;
                s2 += w * w;
            }
            (s, s2, count)
        })
        .collect();
    let (sum, sum_sq, total) = sums
        .into_iter()
        .fold((0.0, 0.0, 0usize), |acc, x| {
            (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2)
        });
    let nf = total as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0);
    (box_volume * mean, box_volume * (var / nf).sqrt())
}
