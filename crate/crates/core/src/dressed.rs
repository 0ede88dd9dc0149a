//! Linear Fredholm equations `(id + K)f = g` on the Fermi interval `[-q, q]`
//! by Gauss–Legendre Nyström discretization, the Fermi boundary itself, and
//! the dressed energy / charge / momentum with their complex continuations.

use crate::linalg::{Lu, Matrix};
use crate::model::{self, ModelParams};
use crate::quad::{self, QuadratureRule};
use crate::{C64, Error, Result};

/// Condition-estimate threshold above which a Nyström solve is rejected.
const COND_LIMIT: f64 = 1e12;

/// Nyström solution of `(id + K)f = g` on `[-Q, Q]`.
#[derive(Debug, Clone)]
pub struct FredholmSolution {
    pub rule: QuadratureRule,
    pub values: Vec<f64>,
    /// sup-norm of `(id+K)f − g` recomputed at the nodes
    pub residual: f64,
    /// one-norm condition estimate of the discretized operator
    pub cond: f64,
}

impl FredholmSolution {
    /// Natural continuation `f(λ) = g(λ) − ∫ K(λ−μ) f(μ) dμ`, valid for
    /// `|Im λ| < ζ` (the kernel pole strip).
    pub fn eval(&self, lam: C64, g_lam: C64, params: &ModelParams) -> Result<C64> {
        check_strip(lam, params)?;
        let mut acc = C64::new(0.0, 0.0);
        for (j, &x) in self.rule.nodes.iter().enumerate() {
            acc += self.rule.weights[j]
                * model::kernel_k_unchecked(lam - x, params)
                * self.values[j];
        }
        Ok(g_lam - acc)
    }
}

fn check_strip(lam: C64, params: &ModelParams) -> Result<()> {
    if lam.im.abs() >= params.zeta - params.pole_guard {
        return Err(Error::Domain(format!(
            "continuation at λ = {lam} outside the kernel strip |Im λ| < ζ = {:.6}",
            params.zeta
        )));
    }
    Ok(())
}

/// Solve `(id+K)f = g` at Gauss–Legendre nodes on `[-q, q]`.
pub fn solve_fredholm(
    g: &dyn Fn(f64) -> f64,
    q: f64,
    params: &ModelParams,
    n: usize,
) -> Result<FredholmSolution> {
    assert!(n >= 8, "Nyström order must be at least 8");
    assert!(q > 0.0);
    let rule = QuadratureRule::gauss_legendre(n, q);
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let k = model::kernel_k_unchecked(C64::new(rule.nodes[i] - rule.nodes[j], 0.0), params);
            let v = rule.weights[j] * k.re + if i == j { 1.0 } else { 0.0 };
            a.set(i, j, v);
        }
    }
    let lu = Lu::factor(&a)?;
    let cond = lu.cond_estimate();
    if cond > COND_LIMIT {
        return Err(Error::LinearSolve { reason: "near-singular Nyström system".into(), cond });
    }
    let rhs: Vec<f64> = rule.nodes.iter().map(|&x| g(x)).collect();
    let values = lu.solve(&rhs);
    let mut residual = 0.0f64;
    for i in 0..n {
        let mut s = values[i];
        for j in 0..n {
            let k = model::kernel_k_unchecked(C64::new(rule.nodes[i] - rule.nodes[j], 0.0), params);
            s += rule.weights[j] * k.re * values[j];
        }
        residual = residual.max((s - rhs[i]).abs());
    }
    Ok(FredholmSolution { rule, values, residual, cond })
}

/// Dressed energy at the endpoint, `ε(Q|Q)`, as a function of the trial
/// boundary `Q`; the Fermi boundary is its unique positive zero.
fn eps_endpoint(q: f64, params: &ModelParams, n: usize) -> Result<f64> {
    let sol = solve_fredholm(&|x| model::bare_energy_unchecked(C64::new(x, 0.0), params).re, q, params, n)?;
    let g_q = model::bare_energy_unchecked(C64::new(q, 0.0), params);
    Ok(sol.eval(C64::new(q, 0.0), g_q, params)?.re)
}

/// Fermi boundary `q`: the unique positive solution of `ε(Q|Q) = 0` for
/// `0 < h < 4J(1+Δ)`.
pub fn find_fermi_boundary(params: &ModelParams, tol: f64) -> Result<f64> {
    let n = 48;
    let mut f = |q: f64| eps_endpoint(q, params, n);
    let q = quad::bracket_root(&mut f, 1e-6, 10.0, 1e-13, "fermi boundary")?;
    let check = eps_endpoint(q, params, 64)?;
    if check.abs() > tol {
        return Err(Error::RootSearch(format!(
            "fermi boundary residual {check:.3e} exceeds tol {tol:.1e}"
        )));
    }
    Ok(q)
}

/// Dressed data: Fermi boundary, dressed energy/charge/momentum with
/// derivatives at the Nyström nodes, Fermi velocity, and continuation
/// evaluators for complex arguments inside the kernel strip.
#[derive(Debug, Clone)]
pub struct DressedData {
    pub params: ModelParams,
    pub q: f64,
    pub rule: QuadratureRule,
    pub eps: FredholmSolution,
    pub eps_deriv: FredholmSolution,
    pub z: FredholmSolution,
    pub p_deriv: FredholmSolution,
    /// Fermi velocity `v_F = ε'(q)/p'(q)`.
    pub v_f: f64,
    /// Dressed charge at the Fermi boundary.
    pub z_q: f64,
}

impl DressedData {
    pub fn eps_at(&self, lam: C64) -> Result<C64> {
        self.eps.eval(lam, model::bare_energy(lam, &self.params)?, &self.params)
    }

    pub fn eps_deriv_at(&self, lam: C64) -> Result<C64> {
        self.eps_deriv.eval(lam, model::bare_energy_deriv(lam, &self.params)?, &self.params)
    }

    pub fn z_at(&self, lam: C64) -> Result<C64> {
        self.z.eval(lam, C64::new(1.0, 0.0), &self.params)
    }

    pub fn p_deriv_at(&self, lam: C64) -> Result<C64> {
        self.p_deriv.eval(lam, model::bare_momentum_deriv(lam, &self.params)?, &self.params)
    }

    /// Dressed momentum by odd integration of `p'` from the origin.
    pub fn p_at(&self, lam: C64) -> Result<C64> {
        let r = lam.norm();
        if r == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let panels = (r / 0.4).ceil().max(1.0) as usize;
        let gl = quad::GaussLegendre::new(16);
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..panels {
            let z0 = lam * (p as f64 / panels as f64);
            let z1 = lam * ((p + 1) as f64 / panels as f64);
            let mid = 0.5 * (z0 + z1);
            let half = 0.5 * (z1 - z0);
            for (i, &s) in gl.nodes.iter().enumerate() {
                acc += gl.weights[i] * half * self.p_deriv_at(mid + half * s)?;
            }
        }
        Ok(acc)
    }
}

/// Build all dressed quantities at Nyström order `n`.
///
/// `ε'` is solved from its own Fredholm equation with driving `ε₀'` (valid
/// because `ε(±q) = 0` kills the boundary terms), and `p` is recovered from
/// `p' + K p' = p₀'` followed by odd integration anchored at `p(0) = 0`.
pub fn dressed_quantities(params: &ModelParams, n: usize) -> Result<DressedData> {
    let q = find_fermi_boundary(params, 1e-8)?;
    let eps = solve_fredholm(&|x| model::bare_energy_unchecked(C64::new(x, 0.0), params).re, q, params, n)?;
    let eps_deriv =
        solve_fredholm(&|x| model::bare_energy_deriv_unchecked(C64::new(x, 0.0), params).re, q, params, n)?;
    let z = solve_fredholm(&|_| 1.0, q, params, n)?;
    let p_deriv =
        solve_fredholm(&|x| model::bare_momentum_deriv_unchecked(C64::new(x, 0.0), params).re, q, params, n)?;
    let rule = eps.rule.clone();
    let data = DressedData {
        params: *params,
        q,
        rule,
        eps,
        eps_deriv,
        z,
        p_deriv,
        v_f: 0.0,
        z_q: 0.0,
    };
    let qc = C64::new(q, 0.0);
    let ed = data.eps_deriv_at(qc)?.re;
    let pd = data.p_deriv_at(qc)?.re;
    if pd == 0.0 {
        return Err(Error::RootSearch("p'(q) vanished".into()));
    }
    let v_f = ed / pd;
    if v_f <= 0.0 {
        return Err(Error::OutOfRegime(format!("non-positive Fermi velocity {v_f}")));
    }
    let z_q = data.z_at(qc)?.re;
    Ok(DressedData { v_f, z_q, ..data })
}
