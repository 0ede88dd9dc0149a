//! Physical parameters and the bare functions of the chain: integral kernel,
//! bare energy, bare momentum and bare phase, as complex-analytic evaluators
//! with explicit pole and branch handling.
//!
//! All evaluators use product-free closed forms (`cosh 2λ` denominators), so
//! they stay accurate near the real axis and make the pole sets explicit:
//! the kernel has poles at `±iζ mod iπ`, bare energy and momentum at
//! `±iζ/2 mod iπ`.

use crate::{C64, Error, Result};
use std::f64::consts::PI;

/// Default guard radius around poles and branch-transition lines.
pub const DEFAULT_POLE_GUARD: f64 = 1e-8;

/// Physical couplings of the XXZ chain in the massless window `0 ≤ Δ < 1`,
/// `0 < h < 4J(1+Δ)`, together with the derived angle `ζ = arccos Δ`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ModelParams {
    /// Exchange coupling `J > 0`.
    pub j: f64,
    /// Anisotropy `Δ = cos ζ`.
    pub delta: f64,
    /// Magnetic field `h`.
    pub h: f64,
    /// Temperature `T > 0`. Time never appears in this struct; it enters the
    /// asymptotics only through the ratio `t/m`.
    pub t: f64,
    /// `ζ = arccos Δ ∈ (0, π/2]`.
    pub zeta: f64,
    /// Guard radius for pole/branch-line rejection.
    pub pole_guard: f64,
}

impl ModelParams {
    pub fn new(j: f64, delta: f64, h: f64, t: f64) -> Result<Self> {
        if !(j > 0.0) || !j.is_finite() {
            return Err(Error::OutOfRegime(format!("J must be positive, got {j}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::OutOfRegime(format!(
                "anisotropy must satisfy 0 <= delta < 1, got {delta}"
            )));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::OutOfRegime(format!("temperature must be positive, got {t}")));
        }
        let sat = 4.0 * j * (1.0 + delta);
        if !(h > 0.0 && h < sat) {
            return Err(Error::OutOfRegime(format!(
                "field must satisfy 0 < h < 4J(1+delta) = {sat}, got {h}"
            )));
        }
        Ok(Self {
            j,
            delta,
            h,
            t,
            zeta: delta.acos(),
            pole_guard: DEFAULT_POLE_GUARD,
        })
    }

    pub fn with_pole_guard(mut self, guard: f64) -> Self {
        self.pole_guard = guard;
        self
    }

    /// Field at which the Fermi zone closes.
    pub fn saturation_field(&self) -> f64 {
        4.0 * self.j * (1.0 + self.delta)
    }
}

/// Distance from `z` to the lattice `p + iπk`, `k ∈ ℤ`.
fn dist_mod_ipi(z: C64, p: C64) -> f64 {
    let w = z - p;
    let k = (w.im / PI).round();
    C64::new(w.re, w.im - k * PI).norm()
}

fn guard_poles(lam: C64, poles: &[C64], guard: f64, what: &str) -> Result<()> {
    for &p in poles {
        let d = dist_mod_ipi(lam, p);
        if d < guard {
            return Err(Error::Domain(format!(
                "{what}: λ = {lam} within {d:.2e} of pole {p} (mod iπ)"
            )));
        }
    }
    Ok(())
}

/// Integral kernel `K(ξ) = sin 2ζ / (2π sinh(ξ−iζ) sinh(ξ+iζ))`, iπ-periodic,
/// even, with poles at `±iζ mod iπ`. Vanishes identically at the free-fermion
/// point `ζ = π/2`.
pub fn kernel_k(lam: C64, params: &ModelParams) -> Result<C64> {
    if free_fermion_kernel(params) {
        return Ok(C64::new(0.0, 0.0));
    }
    let z = params.zeta;
    guard_poles(lam, &[C64::new(0.0, z), C64::new(0.0, -z)], params.pole_guard, "kernel_k")?;
    Ok(kernel_k_unchecked(lam, params))
}

/// At the free-fermion point `sin 2ζ` vanishes and the kernel is identically
/// zero; short-circuiting keeps `0/0` from the pole lattice (which collapses
/// onto `±iπ/2`) out of the evaluators.
#[inline]
fn free_fermion_kernel(params: &ModelParams) -> bool {
    (2.0 * params.zeta).sin().abs() < 1e-14
}

/// Kernel without the pole guard; the caller keeps clear of `±iζ mod iπ`.
pub fn kernel_k_unchecked(lam: C64, params: &ModelParams) -> C64 {
    if free_fermion_kernel(params) {
        return C64::new(0.0, 0.0);
    }
    let z2 = 2.0 * params.zeta;
    // sinh(ξ−iζ) sinh(ξ+iζ) = (cosh 2ξ − cos 2ζ)/2
    z2.sin() / (PI * ((2.0 * lam).cosh() - z2.cos()))
}

/// Derivative of the kernel.
pub fn kernel_k_deriv(lam: C64, params: &ModelParams) -> Result<C64> {
    if free_fermion_kernel(params) {
        return Ok(C64::new(0.0, 0.0));
    }
    let z = params.zeta;
    guard_poles(lam, &[C64::new(0.0, z), C64::new(0.0, -z)], params.pole_guard, "kernel_k_deriv")?;
    Ok(kernel_k_deriv_unchecked(lam, params))
}

/// Kernel derivative without the pole guard.
pub fn kernel_k_deriv_unchecked(lam: C64, params: &ModelParams) -> C64 {
    if free_fermion_kernel(params) {
        return C64::new(0.0, 0.0);
    }
    let z = params.zeta;
    let d = (2.0 * lam).cosh() - (2.0 * z).cos();
    -2.0 * (2.0 * z).sin() * (2.0 * lam).sinh() / (PI * d * d)
}

/// Bare energy `ε₀(λ) = h − 2J sin²ζ / (sinh(λ+iζ/2) sinh(λ−iζ/2))`;
/// even, iπ-periodic, poles at `±iζ/2 mod iπ`.
pub fn bare_energy(lam: C64, params: &ModelParams) -> Result<C64> {
    let hz = 0.5 * params.zeta;
    guard_poles(lam, &[C64::new(0.0, hz), C64::new(0.0, -hz)], params.pole_guard, "bare_energy")?;
    Ok(bare_energy_unchecked(lam, params))
}

/// Bare energy without the pole guard.
pub fn bare_energy_unchecked(lam: C64, params: &ModelParams) -> C64 {
    let s = params.zeta.sin();
    // sinh(λ+iζ/2) sinh(λ−iζ/2) = (cosh 2λ − cos ζ)/2
    params.h - 4.0 * params.j * s * s / ((2.0 * lam).cosh() - params.zeta.cos())
}

/// Derivative of the bare energy.
pub fn bare_energy_deriv(lam: C64, params: &ModelParams) -> Result<C64> {
    let hz = 0.5 * params.zeta;
    guard_poles(
        lam,
        &[C64::new(0.0, hz), C64::new(0.0, -hz)],
        params.pole_guard,
        "bare_energy_deriv",
    )?;
    Ok(bare_energy_deriv_unchecked(lam, params))
}

/// Bare energy derivative without the pole guard.
pub fn bare_energy_deriv_unchecked(lam: C64, params: &ModelParams) -> C64 {
    let s = params.zeta.sin();
    let d = (2.0 * lam).cosh() - params.zeta.cos();
    8.0 * params.j * s * s * (2.0 * lam).sinh() / (d * d)
}

/// Bare momentum `p₀(λ) = i ln( sinh(iζ/2+λ) / sinh(iζ/2−λ) )` with the
/// principal logarithm; odd, `p₀(0) = 0`.
pub fn bare_momentum(lam: C64, params: &ModelParams) -> Result<C64> {
    let hz = 0.5 * params.zeta;
    guard_poles(lam, &[C64::new(0.0, hz), C64::new(0.0, -hz)], params.pole_guard, "bare_momentum")?;
    let a = C64::new(0.0, hz);
    Ok(C64::i() * ((a + lam).sinh() / (a - lam).sinh()).ln())
}

/// Derivative of the bare momentum, `p₀′(λ) = sin ζ / (sin²(ζ/2) + sinh²λ)`.
pub fn bare_momentum_deriv(lam: C64, params: &ModelParams) -> Result<C64> {
    let hz = 0.5 * params.zeta;
    guard_poles(
        lam,
        &[C64::new(0.0, hz), C64::new(0.0, -hz)],
        params.pole_guard,
        "bare_momentum_deriv",
    )?;
    Ok(bare_momentum_deriv_unchecked(lam, params))
}

/// Bare momentum derivative without the pole guard.
pub fn bare_momentum_deriv_unchecked(lam: C64, params: &ModelParams) -> C64 {
    2.0 * params.zeta.sin() / ((2.0 * lam).cosh() - params.zeta.cos())
}

/// Bare phase with both branches:
///
/// * inner, `|Im λ| < min(ζ, π−ζ)`:  `θ = i ln( sinh(iζ+λ)/sinh(iζ−λ) )`,
/// * outer, `min(ζ, π−ζ) < |Im λ| < π/2`:
///   `θ = −π sgn(π−2ζ) + i ln( sinh(iζ+λ)/sinh(λ−iζ) )`.
///
/// Arguments are reduced mod iπ into `|Im λ| ≤ π/2` first (both branch
/// formulas are iπ-periodic). Evaluation on a branch-transition line or at a
/// pole of the logarithm argument is a domain error.
pub fn bare_phase(lam: C64, params: &ModelParams) -> Result<C64> {
    // ζ = π/2: the ratio sinh(iπ/2+λ)/sinh(iπ/2−λ) is identically one and
    // the outer region is empty; the phase vanishes everywhere
    if (params.zeta - PI / 2.0).abs() < 1e-14 {
        return Ok(C64::new(0.0, 0.0));
    }
    let z = params.zeta;
    let guard = params.pole_guard;
    let k = (lam.im / PI).round();
    let lr = C64::new(lam.re, lam.im - k * PI);
    let b = z.min(PI - z);
    guard_poles(lr, &[C64::new(0.0, z), C64::new(0.0, -z)], guard, "bare_phase")?;
    if (lr.im.abs() - b).abs() < guard {
        return Err(Error::Domain(format!(
            "bare_phase: λ = {lam} on branch-transition line |Im λ| = {b:.6}"
        )));
    }
    let a = C64::new(0.0, z);
    if lr.im.abs() < b {
        Ok(C64::i() * ((a + lr).sinh() / (a - lr).sinh()).ln())
    } else {
        let sign = if (PI - 2.0 * z).abs() < 1e-14 { 0.0 } else { (PI - 2.0 * z).signum() };
        Ok(-PI * sign + C64::i() * ((a + lr).sinh() / (lr - a).sinh()).ln())
    }
}

/// Derivative of the bare phase; equals `2π K` on both branches.
pub fn bare_phase_deriv(lam: C64, params: &ModelParams) -> Result<C64> {
    let z = params.zeta;
    guard_poles(lam, &[C64::new(0.0, z), C64::new(0.0, -z)], params.pole_guard, "bare_phase_deriv")?;
    Ok(2.0 * PI * kernel_k_unchecked(lam, params))
}
