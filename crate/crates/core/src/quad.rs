//! Gauss–Legendre quadrature, panelized rules along complex paths, and
//! per-panel spectral operations (cumulative integrals, interpolation,
//! differentiation) used by the contour solvers.

use crate::{C64, Error, Result};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_pair(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_pair(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x.abs();
            nodes[n - 1 - i] = x.abs();
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
            let (_, dp) = legendre_pair(n, 0.0);
            weights[n / 2] = 2.0 / (dp * dp);
        }
        Self { nodes, weights }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Values `P_j(x)` for `j = 0..=jmax`.
fn legendre_all(jmax: usize, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(jmax + 1);
    v.push(1.0);
    if jmax == 0 {
        return v;
    }
    v.push(x);
    for k in 2..=jmax {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * v[k - 1] - (kf - 1.0) * v[k - 2]) / kf;
        v.push(next);
    }
    v
}

/// Quadrature rule on the symmetric interval `[-q, q]` (Nyström grid).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize, q: f64) -> Self {
        let gl = GaussLegendre::new(order);
        let nodes = gl.nodes.iter().map(|&x| q * x).collect();
        let weights = gl.weights.iter().map(|&w| q * w).collect();
        Self { nodes, weights, order }
    }
}

/// One smooth piece of a complex path, parametrized by `s ∈ [-1, 1]`.
#[derive(Debug, Clone)]
pub enum PathSeg {
    /// Straight segment from `z0` to `z1`.
    Line { z0: C64, z1: C64 },
    /// Circular arc `center + r e^{iφ}`, `φ` from `phi0` to `phi1`.
    Arc { center: C64, r: f64, phi0: f64, phi1: f64 },
    /// Graph piece `λ(a) = a + i g(a)` with `g` the cubic Hermite interpolant
    /// of `(g0, d0)` at `a0` and `(g1, d1)` at `a1`.
    Hermite { a0: f64, a1: f64, g0: f64, g1: f64, d0: f64, d1: f64 },
}

impl PathSeg {
    /// Point and velocity `dλ/ds` at parameter `s`.
    pub fn at(&self, s: f64) -> (C64, C64) {
        match *self {
            PathSeg::Line { z0, z1 } => {
                let mid = 0.5 * (z0 + z1);
                let half = 0.5 * (z1 - z0);
                (mid + half * s, half)
            }
            PathSeg::Arc { center, r, phi0, phi1 } => {
                let mid = 0.5 * (phi0 + phi1);
                let half = 0.5 * (phi1 - phi0);
                let phi = mid + half * s;
                let e = C64::new(0.0, phi).exp();
                (center + r * e, C64::i() * r * e * half)
            }
            PathSeg::Hermite { a0, a1, g0, g1, d0, d1 } => {
                let dl = a1 - a0;
                let a = 0.5 * (a0 + a1) + 0.5 * dl * s;
                let u = (a - a0) / dl;
                let (u2, u3) = (u * u, u * u * u);
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                let g = g0 * h00 + d0 * dl * h10 + g1 * h01 + d1 * dl * h11;
                let dh00 = 6.0 * u2 - 6.0 * u;
                let dh10 = 3.0 * u2 - 4.0 * u + 1.0;
                let dh01 = -6.0 * u2 + 6.0 * u;
                let dh11 = 3.0 * u2 - 2.0 * u;
                let dg = (g0 * dh00 + d0 * dl * dh10 + g1 * dh01 + d1 * dl * dh11) / dl;
                (C64::new(a, g), C64::new(1.0, dg) * (0.5 * dl))
            }
        }
    }

    /// Endpoint at `s = 1`.
    pub fn end(&self) -> C64 {
        self.at(1.0).0
    }
}

/// Per-order spectral matrices on the Gauss–Legendre nodes: cumulative
/// integration from `s = -1`, differentiation, and barycentric weights.
#[derive(Debug, Clone)]
struct SpectralOps {
    /// cumulative integration matrix: values at nodes → antiderivative at nodes
    cum: Vec<f64>,
    /// differentiation matrix w.r.t. s
    diff: Vec<f64>,
    /// barycentric interpolation weights
    bary: Vec<f64>,
    nodes: Vec<f64>,
}

impl SpectralOps {
    fn new(order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let k = order;
        // coefficient transform C: c_j = (2j+1)/2 Σ_i w_i P_j(x_i) f_i
        let mut coef = vec![0.0; k * k];
        let mut pj = vec![0.0; (k + 1) * k]; // P_j(x_i), j = 0..=k
        for (i, &x) in gl.nodes.iter().enumerate() {
            for (j, v) in legendre_all(k, x).into_iter().enumerate() {
                pj[j * k + i] = v;
            }
        }
        for j in 0..k {
            for i in 0..k {
                coef[j * k + i] = (2.0 * j as f64 + 1.0) / 2.0 * gl.weights[i] * pj[j * k + i];
            }
        }
        // antiderivative evaluation B: ∫_{-1}^{x_i} P_j
        // j = 0: x + 1; j ≥ 1: (P_{j+1}(x) − P_{j−1}(x))/(2j+1)
        let mut anti = vec![0.0; k * k];
        for i in 0..k {
            let x = gl.nodes[i];
            anti[i * k] = x + 1.0;
            for j in 1..k {
                anti[i * k + j] = (pj[(j + 1) * k + i] - pj[(j - 1) * k + i]) / (2.0 * j as f64 + 1.0);
            }
        }
        let mut cum = vec![0.0; k * k];
        for i in 0..k {
            for l in 0..k {
                let mut s = 0.0;
                for j in 0..k {
                    s += anti[i * k + j] * coef[j * k + l];
                }
                cum[i * k + l] = s;
            }
        }
        // derivative evaluation: P_j'(x) = j (x P_j − P_{j−1})/(x²−1)
        let mut dmat = vec![0.0; k * k];
        for i in 0..k {
            let x = gl.nodes[i];
            for j in 1..k {
                let dp = j as f64 * (x * pj[j * k + i] - pj[(j - 1) * k + i]) / (x * x - 1.0);
                dmat[i * k + j] = dp;
            }
        }
        let mut diff = vec![0.0; k * k];
        for i in 0..k {
            for l in 0..k {
                let mut s = 0.0;
                for j in 0..k {
                    s += dmat[i * k + j] * coef[j * k + l];
                }
                diff[i * k + l] = s;
            }
        }
        // barycentric weights
        let mut bary = vec![0.0; k];
        for i in 0..k {
            let mut w = 1.0;
            for m in 0..k {
                if m != i {
                    w /= gl.nodes[i] - gl.nodes[m];
                }
            }
            bary[i] = w;
        }
        Self { cum, diff, bary, nodes: gl.nodes }
    }
}

/// A panelized complex path: per-panel Gauss–Legendre nodes with velocities,
/// supporting path integrals, cumulative integrals from the path start,
/// spectral differentiation along the path, and interpolation.
#[derive(Debug, Clone)]
pub struct Path {
    pub segs: Vec<PathSeg>,
    pub order: usize,
    /// all nodes, panel-major
    pub nodes: Vec<C64>,
    /// velocity dλ/ds at each node
    pub dpath: Vec<C64>,
    /// Gauss weights per node (s-space)
    pub weights: Vec<f64>,
    ops: SpectralOps,
}

impl Path {
    pub fn new(segs: Vec<PathSeg>, order: usize) -> Self {
        let ops = SpectralOps::new(order);
        let mut nodes = Vec::with_capacity(segs.len() * order);
        let mut dpath = Vec::with_capacity(segs.len() * order);
        let mut weights = Vec::with_capacity(segs.len() * order);
        let gl = GaussLegendre::new(order);
        for seg in &segs {
            for (i, &s) in gl.nodes.iter().enumerate() {
                let (z, dz) = seg.at(s);
                nodes.push(z);
                dpath.push(dz);
                weights.push(gl.weights[i]);
            }
        }
        Self { segs, order, nodes, dpath, weights, ops }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_panels(&self) -> usize {
        self.segs.len()
    }

    /// `∫ f dλ` over the whole path from sampled values.
    pub fn integrate(&self, f: &[C64]) -> C64 {
        assert_eq!(f.len(), self.nodes.len());
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..f.len() {
            acc += self.weights[i] * f[i] * self.dpath[i];
        }
        acc
    }

    /// Cumulative `∫ f dλ` from the path start; returns values at all nodes
    /// and the total over the path.
    pub fn cumulative(&self, f: &[C64]) -> (Vec<C64>, C64) {
        assert_eq!(f.len(), self.nodes.len());
        let k = self.order;
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        let mut offset = C64::new(0.0, 0.0);
        for p in 0..self.n_panels() {
            let base = p * k;
            let mut total = C64::new(0.0, 0.0);
            for i in 0..k {
                let fi = f[base + i] * self.dpath[base + i];
                total += self.weights[base + i] * fi;
            }
            for i in 0..k {
                let mut s = C64::new(0.0, 0.0);
                for l in 0..k {
                    s += self.ops.cum[i * k + l] * (f[base + l] * self.dpath[base + l]);
                }
                out[base + i] = offset + s;
            }
            offset += total;
        }
        (out, offset)
    }

    /// Spectral derivative `df/dλ` along the path.
    pub fn differentiate(&self, f: &[C64]) -> Vec<C64> {
        assert_eq!(f.len(), self.nodes.len());
        let k = self.order;
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        for p in 0..self.n_panels() {
            let base = p * k;
            for i in 0..k {
                let mut s = C64::new(0.0, 0.0);
                for l in 0..k {
                    s += self.ops.diff[i * k + l] * f[base + l];
                }
                out[base + i] = s / self.dpath[base + i];
            }
        }
        out
    }

    /// Barycentric interpolation of sampled values at parameter `s` of panel `p`.
    pub fn interp_in_panel(&self, f: &[C64], panel: usize, s: f64) -> C64 {
        let k = self.order;
        let base = panel * k;
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for i in 0..k {
            let d = s - self.ops.nodes[i];
            if d.abs() < 1e-14 {
                return f[base + i];
            }
            let w = self.ops.bary[i] / d;
            num += w * f[base + i];
            den += w;
        }
        num / den
    }

    /// Panel midpoints (parameter `s = 0`) with their points.
    pub fn panel_midpoints(&self) -> Vec<(usize, C64)> {
        self.segs.iter().enumerate().map(|(p, seg)| (p, seg.at(0.0).0)).collect()
    }
}

/// Geometrically refined panel edges on `[lo, hi]` clustering toward both
/// given centers with minimal width `wmin`, plus a uniform background of
/// width at most `wmax`. Returns strictly increasing edges including both ends.
pub fn refined_edges(lo: f64, hi: f64, centers: &[f64], wmin: f64, wmax: f64) -> Vec<f64> {
    assert!(hi > lo);
    let mut edges = vec![lo, hi];
    let mut t = lo;
    while t + wmax < hi {
        t += wmax;
        edges.push(t);
    }
    for &c in centers {
        if c <= lo || c >= hi {
            continue;
        }
        edges.push(c);
        let mut w = wmin;
        while w < 2.0 * wmax {
            if c - w > lo {
                edges.push(c - w);
            }
            if c + w < hi {
                edges.push(c + w);
            }
            w *= 2.0;
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // drop near-duplicates and edges crowding the refinement centers
    let mut out: Vec<f64> = Vec::with_capacity(edges.len());
    for e in edges {
        if out.is_empty() || e - out[out.len() - 1] > 0.25 * wmin {
            out.push(e);
        }
    }
    let n = out.len();
    if (out[n - 1] - hi).abs() > 1e-12 {
        out[n - 1] = hi;
    }
    out[0] = lo;
    out
}

/// Bracketed root of a scalar function: bisection refined by secant steps.
pub fn bracket_root(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    what: &str,
) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::RootSearch(format!(
            "{what}: no sign change on [{a}, {b}] (f = {fa:.3e}, {fb:.3e})"
        )));
    }
    for _ in 0..200 {
        // secant candidate, fall back to midpoint when outside or stagnant
        let mut x = b - fb * (b - a) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx == 0.0 || (b - a) < tol {
            return Ok(x);
        }
        if fa * fx < 0.0 {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
        if (b - a) < tol {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::RootSearch(format!("{what}: bisection did not converge")))
}
