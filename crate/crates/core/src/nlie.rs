//! Non-linear integral equations for the dominant and excited eigenvalues of
//! the quantum transfer matrix in the Trotter limit.
//!
//! The auxiliary function `u` solves
//!
//! ```text
//! u(ξ) = ε₀(ξ) − iπsT − iT Θ(ξ | x, y) − T ∮ K(ξ−μ) Ln[1+e^{−u/T}](μ) dμ
//! ```
//!
//! on its own contour, coupled to the quantization conditions
//! `u(x_a) = −σ 2πiT (h_a+½)` for holes near `σq` and
//! `u(y_a) = +σ 2πiT (p_a+½)` for particles. The solver runs a damped fixed
//! point on the contour nodes, re-solves the roots by damped Newton with
//! target continuation inside every sweep, and re-traces the contour through
//! the moving Fermi zeros every few sweeps.

use crate::contour::{
    self, Analytic, Contour, ContourOptions, check_monodromy, ln_one_plus_exp,
};
use crate::dressed::DressedData;
use crate::model::{self, ModelParams};
use crate::{C64, Error, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Particle and hole quantum numbers near the two Fermi points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExcitationConfig {
    pub p_plus: Vec<u32>,
    pub p_minus: Vec<u32>,
    pub h_plus: Vec<u32>,
    pub h_minus: Vec<u32>,
}

impl ExcitationConfig {
    /// The single-hole configuration driving the dominant correlation length.
    pub fn single_hole_plus() -> Self {
        Self { h_plus: vec![0], ..Default::default() }
    }

    /// Mirror of [`single_hole_plus`](Self::single_hole_plus): the hole sits
    /// on the `(−)` branch.
    pub fn single_hole_minus() -> Self {
        Self { h_minus: vec![0], ..Default::default() }
    }

    pub fn n_holes(&self) -> usize {
        self.h_plus.len() + self.h_minus.len()
    }

    pub fn n_particles(&self) -> usize {
        self.p_plus.len() + self.p_minus.len()
    }

    /// Pseudo-spin `s = n − m` (holes minus particles).
    pub fn pseudo_spin(&self) -> i32 {
        self.n_holes() as i32 - self.n_particles() as i32
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("p_plus", &self.p_plus),
            ("p_minus", &self.p_minus),
            ("h_plus", &self.h_plus),
            ("h_minus", &self.h_minus),
        ] {
            if !list.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly increasing, got {list:?}"
                )));
            }
        }
        if self.pseudo_spin().abs() > 2 {
            return Err(Error::InvalidConfig(format!(
                "pseudo-spin {} out of the supported window |s| ≤ 2",
                self.pseudo_spin()
            )));
        }
        Ok(())
    }
}

/// One quantization root: its branch, kind, quantum number, target value of
/// `u` and converged position.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub sigma: i8,
    pub hole: bool,
    pub k: u32,
    pub target: C64,
    pub position: C64,
}

/// Solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub damping: f64,
    pub retrace_every: usize,
    /// admissibility threshold on the monodromy of the returned solution
    pub monodromy_limit: f64,
    pub contour: ContourOptions,
}

impl SolverOptions {
    pub fn for_params(params: &ModelParams) -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 200,
            damping: 0.5,
            retrace_every: 10,
            monodromy_limit: 1e-8,
            contour: ContourOptions::for_params(params),
        }
    }
}

/// Converged solution of a non-linear integral equation.
#[derive(Debug, Clone)]
pub struct NlieSolution {
    pub params: ModelParams,
    /// pseudo-spin of the driving
    pub s: i32,
    pub contour: Contour,
    /// `u` at the contour nodes
    pub u: Vec<C64>,
    /// `u'` at the contour nodes (from the analytic representation)
    pub u_prime: Vec<C64>,
    /// contour logarithm `Ln[1+e^{−u/T}]` at the nodes
    pub ln: Vec<C64>,
    pub roots: Vec<Root>,
    /// sup-norm of the equation defect at the nodes
    pub residual: f64,
    /// defect re-checked on the half-offset (panel midpoint) grid
    pub residual_offgrid: f64,
    pub monodromy: C64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl NlieSolution {
    /// Evaluate `u` anywhere through the defining representation.
    pub fn u_at(&self, lam: C64) -> Result<C64> {
        let eval = IterateEval {
            params: &self.params,
            s: self.s,
            roots: &self.roots,
            contour: &self.contour,
            ln: &self.ln,
        };
        eval.eval(lam)
    }

    /// Evaluate `u'` anywhere through the representation.
    pub fn u_prime_at(&self, lam: C64) -> Result<C64> {
        let eval = IterateEval {
            params: &self.params,
            s: self.s,
            roots: &self.roots,
            contour: &self.contour,
            ln: &self.ln,
        };
        eval.deriv(lam)
    }

    /// Hole positions.
    pub fn holes(&self) -> Vec<C64> {
        self.roots.iter().filter(|r| r.hole).map(|r| r.position).collect()
    }

    /// Particle positions.
    pub fn particles(&self) -> Vec<C64> {
        self.roots.iter().filter(|r| !r.hole).map(|r| r.position).collect()
    }

    /// Contour logarithm at an arbitrary point of the contour, by panel
    /// interpolation of the accumulated values.
    pub fn eval_ln(&self, nu: C64) -> Result<C64> {
        let order = self.contour.path.order;
        let (mut best, mut dist) = (0usize, f64::INFINITY);
        for (j, &z) in self.contour.nodes().iter().enumerate() {
            let d = (z - nu).norm();
            if d < dist {
                dist = d;
                best = j;
            }
        }
        let panel = best / order;
        let seg = &self.contour.path.segs[panel];
        let mut s = 0.0;
        for _ in 0..80 {
            let (z, dz) = seg.at(s);
            let grad = ((z - nu) * dz.conj()).re;
            let hess = (dz * dz.conj()).re;
            let step = (grad / hess).clamp(-0.2, 0.2);
            s = (s - step).clamp(-1.0, 1.0);
            if step.abs() < 1e-14 {
                break;
            }
        }
        let (z, _) = seg.at(s);
        if (z - nu).norm() > 1e-6 * (1.0 + nu.norm()) {
            return Err(Error::Domain(format!("point {nu} is not on the contour")));
        }
        Ok(self.contour.path.interp_in_panel(&self.ln, panel, s))
    }

    /// JSON snapshot of the solution (contour nodes, `u`, roots, residuals).
    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<[f64; 2]> = self.contour.nodes().iter().map(|z| [z.re, z.im]).collect();
        let u: Vec<[f64; 2]> = self.u.iter().map(|z| [z.re, z.im]).collect();
        let roots: Vec<serde_json::Value> = self
            .roots
            .iter()
            .map(|r| {
                serde_json::json!({
                    "sigma": r.sigma,
                    "hole": r.hole,
                    "k": r.k,
                    "position": [r.position.re, r.position.im],
                    "target": [r.target.re, r.target.im],
                })
            })
            .collect();
        serde_json::json!({
            "pseudo_spin": self.s,
            "nodes": nodes,
            "u": u,
            "roots": roots,
            "residual": self.residual,
            "residual_offgrid": self.residual_offgrid,
            "monodromy": [self.monodromy.re, self.monodromy.im],
            "iterations": self.iterations,
            "warnings": self.warnings,
        })
    }
}

/// Damped Newton on `f(z) = target` with continuation: the target is walked
/// from `f(seed)` in image-space steps of at most `step_scale`.
pub fn newton_to_target(
    f: &dyn Analytic,
    seed: C64,
    target: C64,
    step_scale: f64,
    tol: f64,
) -> Result<C64> {
    let start = f.eval(seed)?;
    let dist = (target - start).norm();
    let nsteps = (dist / step_scale).ceil().max(1.0) as usize;
    let mut z = seed;
    for j in 1..=nsteps {
        let tj = start + (target - start) * (j as f64 / nsteps as f64);
        let mut converged = false;
        for _ in 0..60 {
            let fv = f.eval(z)? - tj;
            if fv.norm() < tol {
                converged = true;
                break;
            }
            let dv = f.deriv(z)?;
            if dv.norm() < 1e-14 {
                return Err(Error::RootSearch(format!("derivative vanished near {z}")));
            }
            let mut step = fv / dv;
            let f0 = fv.norm();
            let mut scale = 1.0;
            for _ in 0..10 {
                let cand = f.eval(z - scale * step)?;
                if (cand - tj).norm() < f0 {
                    break;
                }
                scale *= 0.5;
            }
            step *= scale;
            z -= step;
            if step.norm() < 1e-15 * (1.0 + z.norm()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::RootSearch(format!(
                "target continuation stalled at step {j}/{nsteps} near {z} (seed {seed}, target {target})"
            )));
        }
    }
    Ok(z)
}

/// Dominant-state equation: no driving roots, zero pseudo-spin.
pub fn solve_dominant(
    params: &ModelParams,
    dressed: &DressedData,
    opts: SolverOptions,
) -> Result<NlieSolution> {
    solve(params, dressed, &ExcitationConfig::default(), 0, opts)
}

/// Excited-state equation with hole/particle driving and quantization.
pub fn solve_excited(
    params: &ModelParams,
    dressed: &DressedData,
    config: &ExcitationConfig,
    opts: SolverOptions,
) -> Result<NlieSolution> {
    config.validate()?;
    solve(params, dressed, config, config.pseudo_spin(), opts)
}

/// Targets for all configured roots.
fn quantization_targets(config: &ExcitationConfig, t: f64) -> Vec<Root> {
    let mut roots = Vec::new();
    let two_pi_t = 2.0 * PI * t;
    for (sigma, list) in [(1i8, &config.h_plus), (-1i8, &config.h_minus)] {
        for &k in list.iter() {
            let target = -C64::i() * (sigma as f64) * two_pi_t * (k as f64 + 0.5);
            roots.push(Root { sigma, hole: true, k, target, position: C64::new(0.0, 0.0) });
        }
    }
    for (sigma, list) in [(1i8, &config.p_plus), (-1i8, &config.p_minus)] {
        for &k in list.iter() {
            let target = C64::i() * (sigma as f64) * two_pi_t * (k as f64 + 0.5);
            roots.push(Root { sigma, hole: false, k, target, position: C64::new(0.0, 0.0) });
        }
    }
    roots
}

/// Evaluator for the current iterate: `ε₀ − iπsT − iTΘ − T K∗Ln` with a
/// frozen `Ln` sample on a frozen contour.
struct IterateEval<'a> {
    params: &'a ModelParams,
    s: i32,
    roots: &'a [Root],
    contour: &'a Contour,
    ln: &'a [C64],
}

impl IterateEval<'_> {
    fn theta(&self, lam: C64, deriv: bool) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for r in self.roots {
            let th = if deriv {
                model::bare_phase_deriv(lam - r.position, self.params)?
            } else {
                model::bare_phase(lam - r.position, self.params)?
            };
            if r.hole {
                acc -= th;
            } else {
                acc += th;
            }
        }
        Ok(acc)
    }
}

/// Driving phase `Θ = Σ θ(ξ−y) − Σ θ(ξ−x)` at the contour nodes, with each
/// root's phase unwrapped continuously along the path (the principal branch
/// jumps by 2π where its cut crosses a horizontal run; the jump is invisible
/// in every exponential but must not enter the collocation values).
fn theta_nodes_unwrapped(
    params: &ModelParams,
    contour: &Contour,
    roots: &[Root],
) -> Result<Vec<C64>> {
    let n = contour.path.len();
    let mut total = vec![C64::new(0.0, 0.0); n];
    for r in roots {
        let sign = if r.hole { -1.0 } else { 1.0 };
        let mut prev: Option<C64> = None;
        for (j, &z) in contour.nodes().iter().enumerate() {
            let raw = model::bare_phase(z - r.position, params)?;
            let th = match prev {
                // log jumps shift θ by real multiples of 2π
                Some(p) => raw + 2.0 * PI * ((p.re - raw.re) / (2.0 * PI)).round(),
                None => raw,
            };
            prev = Some(th);
            total[j] += sign * th;
        }
    }
    Ok(total)
}

/// Kernel matrix `w_j K(ξ_i − λ_j)` on a fixed contour, built once per
/// contour and reused across sweeps.
struct KernelMatrix {
    n: usize,
    a: Vec<C64>,
}

impl KernelMatrix {
    fn build(params: &ModelParams, contour: &Contour) -> Self {
        let nodes = contour.nodes();
        let n = nodes.len();
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for (j, &mu) in nodes.iter().enumerate() {
            let w = contour.conv_dl[j];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for (i, &lam) in nodes.iter().enumerate() {
                a[i * n + j] = w * model::kernel_k_unchecked(lam - mu, params);
            }
        }
        Self { n, a }
    }

    /// Same layout for the differentiated kernel.
    fn build_deriv(params: &ModelParams, contour: &Contour) -> Self {
        let nodes = contour.nodes();
        let n = nodes.len();
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for (j, &mu) in nodes.iter().enumerate() {
            let w = contour.conv_dl[j];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for (i, &lam) in nodes.iter().enumerate() {
                a[i * n + j] = w * model::kernel_k_deriv_unchecked(lam - mu, params);
            }
        }
        Self { n, a }
    }

    fn apply(&self, ln: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            let mut acc = C64::new(0.0, 0.0);
            for (kij, l) in row.iter().zip(ln.iter()) {
                acc += kij * l;
            }
            out[i] = acc;
        }
        out
    }
}

impl IterateEval<'_> {
    /// Equation right-hand side at all contour nodes, using the unwrapped
    /// driving phase and the cached kernel matrix.
    fn rhs_at_nodes(&self, theta_nodes: &[C64], kern: &KernelMatrix) -> Result<Vec<C64>> {
        let t = self.params.t;
        let nodes = self.contour.nodes();
        let conv = kern.apply(self.ln);
        let mut out = Vec::with_capacity(nodes.len());
        for (i, &lam) in nodes.iter().enumerate() {
            out.push(
                model::bare_energy(lam, self.params)?
                    - C64::i() * PI * self.s as f64 * t
                    - C64::i() * t * theta_nodes[i]
                    - t * conv[i],
            );
        }
        Ok(out)
    }
}

impl Analytic for IterateEval<'_> {
    fn eval(&self, lam: C64) -> Result<C64> {
        let t = self.params.t;
        let mut acc = C64::new(0.0, 0.0);
        for (j, &mu) in self.contour.nodes().iter().enumerate() {
            let w = self.contour.conv_dl[j];
            if w != C64::new(0.0, 0.0) {
                acc += w * model::kernel_k_unchecked(lam - mu, self.params) * self.ln[j];
            }
        }
        Ok(model::bare_energy(lam, self.params)?
            - C64::i() * PI * self.s as f64 * t
            - C64::i() * t * self.theta(lam, false)?
            - t * acc)
    }

    fn deriv(&self, lam: C64) -> Result<C64> {
        let t = self.params.t;
        let mut acc = C64::new(0.0, 0.0);
        for (j, &mu) in self.contour.nodes().iter().enumerate() {
            let w = self.contour.conv_dl[j];
            if w != C64::new(0.0, 0.0) {
                acc += w * model::kernel_k_deriv(lam - mu, self.params)? * self.ln[j];
            }
        }
        Ok(model::bare_energy_deriv(lam, self.params)?
            - C64::i() * t * self.theta(lam, true)?
            - t * acc)
    }
}

/// Initial guess built from the dressed energy: `u⁰ = ε − iπsT − iTΘ`, with
/// `ε` continued off the axis inside the kernel strip and replaced by the
/// bare energy outside of it (the fixed point forgets the guess there).
struct InitialGuess<'a> {
    dressed: &'a DressedData,
    s: i32,
    roots: &'a [Root],
}

impl InitialGuess<'_> {
    fn theta(&self, lam: C64, deriv: bool) -> Result<C64> {
        let p = &self.dressed.params;
        let mut acc = C64::new(0.0, 0.0);
        for r in self.roots {
            let th = if deriv {
                model::bare_phase_deriv(lam - r.position, p)?
            } else {
                model::bare_phase(lam - r.position, p)?
            };
            if r.hole {
                acc -= th;
            } else {
                acc += th;
            }
        }
        Ok(acc)
    }
}

impl Analytic for InitialGuess<'_> {
    fn eval(&self, lam: C64) -> Result<C64> {
        let p = &self.dressed.params;
        let t = p.t;
        let base = if lam.im.abs() < 0.8 * p.zeta {
            self.dressed.eps_at(lam)?
        } else {
            model::bare_energy(lam, p)?
        };
        Ok(base - C64::i() * PI * self.s as f64 * t - C64::i() * t * self.theta(lam, false)?)
    }

    fn deriv(&self, lam: C64) -> Result<C64> {
        let p = &self.dressed.params;
        let t = p.t;
        let base = if lam.im.abs() < 0.8 * p.zeta {
            self.dressed.eps_deriv_at(lam)?
        } else {
            model::bare_energy_deriv(lam, p)?
        };
        Ok(base - C64::i() * t * self.theta(lam, true)?)
    }
}

struct DressedEval<'a> {
    dressed: &'a DressedData,
}

impl Analytic for DressedEval<'_> {
    fn eval(&self, z: C64) -> Result<C64> {
        self.dressed.eps_at(z)
    }

    fn deriv(&self, z: C64) -> Result<C64> {
        self.dressed.eps_deriv_at(z)
    }
}

fn find_zeros(f: &dyn Analytic, q: f64, step_scale: f64) -> Result<[C64; 2]> {
    let zm = newton_to_target(f, C64::new(-q, 0.0), C64::new(0.0, 0.0), step_scale, 1e-12)?;
    let zp = newton_to_target(f, C64::new(q, 0.0), C64::new(0.0, 0.0), step_scale, 1e-12)?;
    Ok([zm, zp])
}

fn build_contour(
    params: &ModelParams,
    f: &dyn Analytic,
    zeros: [C64; 2],
    opts: ContourOptions,
) -> Result<Contour> {
    Contour::build(params, f, zeros, opts)
}

/// `u'` at the nodes and the contour logarithm, computed self-consistently:
/// a spectral-derivative bootstrap pass, then the analytic representation
/// `u' = ε₀' − iTΘ' − T K'∗Ln` with the cached derivative kernel.
fn derivative_and_log(
    params: &ModelParams,
    cont: &Contour,
    kern_d: &KernelMatrix,
    roots: &[Root],
    u: &[C64],
) -> Result<(Vec<C64>, Vec<C64>, C64, C64)> {
    let t = params.t;
    let u_anchor = cont.path.interp_in_panel(u, 0, -1.0);
    let du_spec = cont.path.differentiate(u);
    let (ln_boot, _) = cont.ln_values(u, &du_spec, u_anchor);
    let mut base = Vec::with_capacity(u.len());
    for &z in cont.nodes() {
        let mut th = C64::new(0.0, 0.0);
        for r in roots {
            let v = model::bare_phase_deriv(z - r.position, params)?;
            if r.hole {
                th -= v;
            } else {
                th += v;
            }
        }
        base.push(model::bare_energy_deriv(z, params)? - C64::i() * t * th);
    }
    let conv = kern_d.apply(&ln_boot);
    let u_prime: Vec<C64> = base.iter().zip(conv.iter()).map(|(&b, &c)| b - t * c).collect();
    let (ln, monodromy) = cont.ln_values(u, &u_prime, u_anchor);
    Ok((u_prime, ln, monodromy, u_anchor))
}

fn solve(
    params: &ModelParams,
    dressed: &DressedData,
    config: &ExcitationConfig,
    s: i32,
    opts: SolverOptions,
) -> Result<NlieSolution> {
    if params.t > 5.0 * params.j {
        return Err(Error::OutOfRegime(format!(
            "temperature {} above the solver ceiling 5J",
            params.t
        )));
    }
    let t = params.t;
    let q = dressed.q;
    let step_scale = 0.5 * PI * t;
    let mut warnings = Vec::new();

    // initial roots: dressed-energy preimages of the quantization targets
    let mut roots = quantization_targets(config, t);
    {
        let eps = DressedEval { dressed };
        for r in &mut roots {
            let seed = C64::new(r.sigma as f64 * q, 0.0);
            r.position = newton_to_target(&eps, seed, r.target, step_scale, 1e-11)?;
        }
    }

    // initial contour through the zeros of the guess
    let guess = InitialGuess { dressed, s, roots: &roots };
    let mut zeros = find_zeros(&guess, q, step_scale)?;
    let mut cont = build_contour(params, &guess, zeros, opts.contour)?;
    let mut kern = KernelMatrix::build(params, &cont);
    let mut kern_d = KernelMatrix::build_deriv(params, &cont);
    let mut u: Vec<C64> = cont.nodes().iter().map(|&z| guess.eval(z)).collect::<Result<_>>()?;

    // damped fixed point with root re-solution and periodic re-tracing
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut ln = vec![C64::new(0.0, 0.0); u.len()];
    let mut since_retrace = 0usize;
    while iterations < opts.max_sweeps {
        iterations += 1;
        since_retrace += 1;
        let (_, ln_now, _, _) = derivative_and_log(params, &cont, &kern_d, &roots, &u)?;
        ln = ln_now;
        {
            let eval = IterateEval { params, s, roots: &roots, contour: &cont, ln: &ln };
            let moved: Vec<C64> = roots
                .iter()
                .map(|r| newton_to_target(&eval, r.position, r.target, step_scale, 1e-12))
                .collect::<Result<_>>()?;
            for (r, z) in roots.iter_mut().zip(moved) {
                r.position = z;
            }
        }
        let eval = IterateEval { params, s, roots: &roots, contour: &cont, ln: &ln };
        let theta_nodes = theta_nodes_unwrapped(params, &cont, &roots)?;
        let rhs: Vec<C64> = eval.rhs_at_nodes(&theta_nodes, &kern)?;
        let mut defect = 0.0f64;
        let mut defect_at = 0usize;
        for i in 0..u.len() {
            let d = (rhs[i] - u[i]).norm();
            if d > defect {
                defect = d;
                defect_at = i;
            }
        }
        if std::env::var("NLIE_TRACE").is_ok() {
            eprintln!(
                "sweep {iterations}: defect {defect:.3e} at node {defect_at} z = {:.4}",
                cont.nodes()[defect_at]
            );
        }
        for i in 0..u.len() {
            u[i] = u[i] + opts.damping * (rhs[i] - u[i]);
        }
        residual = defect;
        let converged = defect < opts.tol;
        if converged || since_retrace >= opts.retrace_every {
            // re-locate the Fermi zeros against the current iterate
            let eval = IterateEval { params, s, roots: &roots, contour: &cont, ln: &ln };
            let new_zeros = [
                newton_to_target(&eval, zeros[0], C64::new(0.0, 0.0), step_scale, 1e-12)?,
                newton_to_target(&eval, zeros[1], C64::new(0.0, 0.0), step_scale, 1e-12)?,
            ];
            let shift = (new_zeros[0] - zeros[0]).norm().max((new_zeros[1] - zeros[1]).norm());
            if converged && shift < 1e-9 {
                // converged on a contour consistent with its own zeros: done,
                // without a trailing rebuild that would reset the collocation
                break;
            }
            zeros = new_zeros;
            let new_cont = build_contour(params, &eval, zeros, opts.contour)?;
            let new_u: Vec<C64> = {
                let proj = IterateEval { params, s, roots: &roots, contour: &cont, ln: &ln };
                let theta_new = theta_nodes_unwrapped(params, &new_cont, &roots)?;
                new_cont
                    .nodes()
                    .iter()
                    .enumerate()
                    .map(|(i, &z)| {
                        let base = proj.eval(z)?;
                        // swap the principal phase for the unwrapped one
                        let raw = proj.theta(z, false)?;
                        Ok(base + C64::i() * t * (raw - theta_new[i]))
                    })
                    .collect::<Result<_>>()?
            };
            cont = new_cont;
            kern = KernelMatrix::build(params, &cont);
            kern_d = KernelMatrix::build_deriv(params, &cont);
            u = new_u;
            since_retrace = 0;
        }
    }
    if residual >= opts.tol {
        return Err(Error::NonConvergence { iterations, residual });
    }

    // final self-consistent derivative and logarithm on the final contour
    let (u_prime, ln_final, monodromy, _) =
        derivative_and_log(params, &cont, &kern_d, &roots, &u)?;
    ln = ln_final;
    let eval = IterateEval { params, s, roots: &roots, contour: &cont, ln: &ln };
    let theta_nodes = theta_nodes_unwrapped(params, &cont, &roots)?;
    let rhs_final = eval.rhs_at_nodes(&theta_nodes, &kern)?;
    let mut defect = 0.0f64;
    for i in 0..u.len() {
        defect = defect.max((rhs_final[i] - u[i]).norm());
    }
    let mut defect_mid = 0.0f64;
    let two_pi_t = 2.0 * PI * t;
    for (pidx, mid) in cont.path.panel_midpoints() {
        if cont.on_closure(pidx * cont.path.order) {
            continue;
        }
        let interp = cont.path.interp_in_panel(&u, pidx, 0.0);
        // the pointwise principal phase may sit on another 2π sheet than the
        // unwrapped node values; compare modulo that shift
        let raw = eval.eval(mid)?;
        let mut best = f64::INFINITY;
        for k in [-1.0, 0.0, 1.0] {
            best = best.min((raw - C64::i() * two_pi_t * k - interp).norm());
        }
        defect_mid = defect_mid.max(best);
    }
    for (i, r) in roots.iter().enumerate() {
        for other in roots.iter().skip(i + 1) {
            if (r.position - other.position).norm() < 1e-6 {
                return Err(Error::RootCollision(format!(
                    "roots at {} and {} closer than 1e-6",
                    r.position, other.position
                )));
            }
        }
        let got = eval.eval(r.position)?;
        if (got - r.target).norm() > 1e-9 {
            return Err(Error::NonConvergence {
                iterations,
                residual: (got - r.target).norm(),
            });
        }
        let slope = eval.deriv(r.position)?;
        if slope.norm() < 1e-8 {
            return Err(Error::RootSearch(format!(
                "u' vanishes at root {} (simple-root requirement)",
                r.position
            )));
        }
        let min_dist = cont
            .nodes()
            .iter()
            .map(|&z| (z - r.position).norm())
            .fold(f64::INFINITY, f64::min);
        if min_dist < 1e-3 {
            warnings.push(format!("root {} within {min_dist:.2e} of the contour", r.position));
        }
    }
    // sign condition ± Re u'(q_u^±) > 0 at the Fermi zeros
    let d_m = eval.deriv(zeros[0])?;
    let d_p = eval.deriv(zeros[1])?;
    if d_m.re >= 0.0 || d_p.re <= 0.0 {
        warnings.push(format!("fermi-zero slope signs unexpected: u'(q-) = {d_m}, u'(q+) = {d_p}"));
    }
    if monodromy.norm() > opts.monodromy_limit {
        return Err(Error::Tracing(format!(
            "monodromy {monodromy} above the admissibility threshold {:.1e}",
            opts.monodromy_limit
        )));
    }
    if defect >= opts.tol {
        return Err(Error::NonConvergence { iterations, residual: defect });
    }

    Ok(NlieSolution {
        params: *params,
        s,
        contour: cont,
        u,
        u_prime,
        ln,
        roots,
        residual: defect,
        residual_offgrid: defect_mid,
        monodromy,
        iterations,
        warnings,
    })
}

/// Contour logarithm of a converged solution at a point of its contour.
pub fn eval_ln(sol: &NlieSolution, nu: C64) -> Result<C64> {
    sol.eval_ln(nu)
}

/// Monodromy diagnostic of a converged solution (recomputed).
pub fn solution_monodromy(sol: &NlieSolution) -> C64 {
    check_monodromy(&sol.contour, &sol.u, &sol.u_prime)
}

/// Principal anchor constant of the contour logarithm.
pub fn anchor_log(sol: &NlieSolution) -> C64 {
    let u_anchor = sol.contour.path.interp_in_panel(&sol.u, 0, -1.0);
    ln_one_plus_exp(-u_anchor / sol.params.t)
}

/// Level-set spine of a converged solution (diagnostic / CSV export aid).
pub fn solution_level_set(
    sol: &NlieSolution,
    opts: contour::TraceOptions,
) -> Result<contour::LevelSet> {
    struct SolEval<'a>(&'a NlieSolution);
    impl Analytic for SolEval<'_> {
        fn eval(&self, z: C64) -> Result<C64> {
            self.0.u_at(z)
        }
        fn deriv(&self, z: C64) -> Result<C64> {
            self.0.u_prime_at(z)
        }
    }
    contour::trace_level_set(
        &SolEval(sol),
        [sol.contour.zeros[0], sol.contour.zeros[1]],
        &sol.params,
        opts,
    )
}
