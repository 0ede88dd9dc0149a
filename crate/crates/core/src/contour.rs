//! Integration contours for the quantum transfer matrix equations.
//!
//! Two geometric objects live here:
//!
//! * [`LevelSet`]: the two branches of `{Re f = 0}` through the Fermi zeros,
//!   traced by a predictor-corrector walker. This is the spine along which
//!   `Im f` runs monotonically; it is used to refine zeros, as a diagnostic,
//!   and for CSV export.
//! * [`Contour`]: the closed quadrature loop on the iπ-cylinder actually used
//!   by the non-linear solver and the spectral integrals. It consists of a
//!   deformed pass near the real axis traversed right-to-left (threading the
//!   two Fermi zeros, so that the admissible hole roots fall inside and their
//!   mirror partners outside), the return line `Im λ = −π/2` traversed
//!   left-to-right, and two short vertical closures at `Re λ = ±L` where all
//!   integrands are below machine precision. On this loop `1 + e^{−u/T}` has
//!   zero winding, which [`check_monodromy`] certifies.

use crate::model::ModelParams;
use crate::quad::{Path, PathSeg};
use crate::{C64, Error, Result};
use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;

/// Complex-analytic evaluator with an optional analytic derivative.
pub trait Analytic {
    fn eval(&self, z: C64) -> Result<C64>;

    fn deriv(&self, z: C64) -> Result<C64> {
        let h = 1e-6;
        Ok((self.eval(z + h)? - self.eval(z - h)?) / (2.0 * h))
    }
}

/// Wrap a closure (and optionally its derivative) as [`Analytic`].
pub struct FnAnalytic<F, G = fn(C64) -> Result<C64>> {
    pub f: F,
    pub df: Option<G>,
}

impl<F: Fn(C64) -> Result<C64>> FnAnalytic<F> {
    pub fn new(f: F) -> Self {
        Self { f, df: None }
    }
}

impl<F, G> Analytic for FnAnalytic<F, G>
where
    F: Fn(C64) -> Result<C64>,
    G: Fn(C64) -> Result<C64>,
{
    fn eval(&self, z: C64) -> Result<C64> {
        (self.f)(z)
    }

    fn deriv(&self, z: C64) -> Result<C64> {
        match &self.df {
            Some(g) => g(z),
            None => {
                let h = 1e-6;
                Ok((self.eval(z + h)? - self.eval(z - h)?) / (2.0 * h))
            }
        }
    }
}

/// Complex Newton iteration `z ← z − f/f'` for a simple zero.
pub fn newton_zero(f: &dyn Analytic, seed: C64, tol: f64, max_iter: usize) -> Result<C64> {
    let mut z = seed;
    for _ in 0..max_iter {
        let fv = f.eval(z)?;
        let dv = f.deriv(z)?;
        if dv.norm() < 1e-14 {
            return Err(Error::Tracing(format!("degenerate zero near {z}: f' ≈ 0")));
        }
        let step = fv / dv;
        z -= step;
        if step.norm() < tol {
            return Ok(z);
        }
    }
    Err(Error::RootSearch(format!("newton did not converge from seed {seed}")))
}

/// Traced level set `{Re f = 0}`: one branch per seed, nodes ordered so that
/// `Im f` increases, reparametrized to a fixed node count by arclength.
#[derive(Debug, Clone)]
pub struct LevelSet {
    /// branch through the first seed (near `−q`), then through the second
    pub branches: [Vec<C64>; 2],
    /// refined zeros of `f`
    pub zeros: [C64; 2],
    pub cutoff: f64,
}

/// Options for the predictor-corrector tracer.
#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// tangent predictor step in rapidity units
    pub step: f64,
    /// corrector tolerance on `Re f`
    pub tol: f64,
    /// stop when `|Im f| / T` exceeds this
    pub cutoff: f64,
    /// nodes per branch after reparametrization
    pub nodes_per_branch: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { step: 0.01, tol: 1e-12, cutoff: 40.0, nodes_per_branch: 256 }
    }
}

/// Trace the two branches of `{Re f = 0}` through the refined zeros of `f`.
///
/// Each branch is walked in both directions from its zero with a tangent
/// predictor and a Newton corrector transverse to the tangent, until
/// `|Im f|/T` exceeds the truncation cutoff (the branches head into the
/// kernel poles where `|f|` blows up). Leaving the inner-branch strip or a
/// stalled corrector is an error.
pub fn trace_level_set(
    f: &dyn Analytic,
    seeds: [C64; 2],
    params: &ModelParams,
    opts: TraceOptions,
) -> Result<LevelSet> {
    let strip = params.zeta.min(PI - params.zeta) - 1e-3;
    let mut zeros = [C64::new(0.0, 0.0); 2];
    let mut branches: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
    for (b, &seed) in seeds.iter().enumerate() {
        let z0 = newton_zero(f, seed, 1e-13, 60)?;
        zeros[b] = z0;
        let mut fwd = walk(f, z0, 1.0, params.t, strip, opts)?;
        let bwd = walk(f, z0, -1.0, params.t, strip, opts)?;
        // assemble ordered: reversed backward, zero, forward
        let mut pts: Vec<C64> = bwd.into_iter().rev().collect();
        pts.push(z0);
        pts.append(&mut fwd);
        // orient so Im f increases
        let im_first = f.eval(pts[0])?.im;
        let im_last = f.eval(*pts.last().unwrap())?.im;
        if im_first > im_last {
            pts.reverse();
        }
        branches[b] = reparametrize(f, &pts, opts.nodes_per_branch, opts.tol)?;
    }
    Ok(LevelSet { branches, zeros, cutoff: opts.cutoff })
}

/// Walk along `{Re f = 0}` from `z0` in the tangent direction `dir·τ`.
fn walk(
    f: &dyn Analytic,
    z0: C64,
    dir: f64,
    t: f64,
    strip: f64,
    opts: TraceOptions,
) -> Result<Vec<C64>> {
    let mut pts = Vec::new();
    let mut z = z0;
    let mut prev_tau = None::<C64>;
    for _ in 0..200_000 {
        let df = f.deriv(z)?;
        if df.norm() < 1e-12 {
            return Err(Error::Tracing(format!("stalled at critical point near {z}")));
        }
        // gradient of Re f is conj(f'), tangent is i·conj(f')
        let mut tau = C64::i() * df.conj() / df.norm();
        if let Some(p) = prev_tau {
            if (tau * p.conj()).re < 0.0 {
                tau = -tau;
            }
        } else {
            tau *= dir;
        }
        prev_tau = Some(tau);
        let mut zn = z + opts.step * tau;
        // Newton corrector transverse to the tangent
        let mut ok = false;
        for _ in 0..12 {
            let fv = f.eval(zn)?;
            if fv.re.abs() < opts.tol {
                ok = true;
                break;
            }
            let dv = f.deriv(zn)?;
            let n = dv.conj() / dv.norm();
            let slope = (dv * n).re;
            if slope.abs() < 1e-14 {
                break;
            }
            zn -= fv.re / slope * n;
        }
        if !ok {
            let fv = f.eval(zn)?;
            if fv.re.abs() > 1e3 * opts.tol {
                return Err(Error::Tracing(format!("corrector stalled near {zn}")));
            }
        }
        if zn.im.abs() >= strip {
            return Err(Error::Tracing(format!(
                "level set exited the admissible strip at {zn}"
            )));
        }
        let fv = f.eval(zn)?;
        pts.push(zn);
        z = zn;
        if fv.im.abs() / t > opts.cutoff {
            return Ok(pts);
        }
    }
    Err(Error::Tracing("tracer exceeded the step budget".into()))
}

/// Resample a traced polyline to `n` nodes at equal arclength, then project
/// the samples back onto the level set.
fn reparametrize(f: &dyn Analytic, pts: &[C64], n: usize, tol: f64) -> Result<Vec<C64>> {
    let mut s = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
    }
    let total = s[pts.len() - 1];
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let target = total * i as f64 / (n - 1) as f64;
        while k + 1 < pts.len() - 1 && s[k + 1] < target {
            k += 1;
        }
        let w = if s[k + 1] > s[k] { (target - s[k]) / (s[k + 1] - s[k]) } else { 0.0 };
        let mut z = pts[k] * (1.0 - w) + pts[k + 1] * w;
        for _ in 0..8 {
            let fv = f.eval(z)?;
            if fv.re.abs() < tol {
                break;
            }
            let dv = f.deriv(z)?;
            let nrm = dv.conj() / dv.norm();
            let slope = (dv * nrm).re;
            if slope.abs() < 1e-14 {
                break;
            }
            z -= fv.re / slope * nrm;
        }
        out.push(z);
    }
    Ok(out)
}

/// Closed integration loop with quadrature, anchor and Fermi zeros.
#[derive(Debug, Clone)]
pub struct Contour {
    pub path: Path,
    /// Fermi zeros `q_u^(−)`, `q_u^(+)` of the function the loop was built for.
    pub zeros: [C64; 2],
    /// loop start (anchor κ of the contour logarithm)
    pub anchor: C64,
    /// half-width `L` of the loop
    pub half_width: f64,
    /// temperature used for logarithm/monodromy scaling
    pub t: f64,
    /// node index ranges of the two horizontal parts
    pub upper: Range<usize>,
    pub lower: Range<usize>,
    /// panel indices of the two vertical closures
    pub left_vertical: usize,
    pub right_vertical: usize,
    /// quadrature measure `w_j dλ_j` for kernel convolutions: zero on the
    /// vertical closures, whose true kernel contribution is `O(e^{−2L})` but
    /// whose naive self-interaction would put kernel poles between nodes
    pub conv_dl: Vec<C64>,
}

/// Shape options for [`Contour::build`].
#[derive(Debug, Clone, Copy)]
pub struct ContourOptions {
    /// Gauss–Legendre order per panel
    pub order: usize,
    /// extra half-width beyond the outermost zero
    pub margin: f64,
    /// minimal panel width at the Fermi windows
    pub wmin: f64,
    /// maximal panel width in the tails
    pub wmax: f64,
}

impl ContourOptions {
    pub fn for_params(params: &ModelParams) -> Self {
        let tj = params.t / params.j;
        let order = if tj > 0.7 {
            32
        } else if tj > 0.3 {
            24
        } else {
            16
        };
        Self {
            order,
            margin: 12.0,
            wmin: (params.t / 4.0).clamp(5e-3, 0.1),
            wmax: 2.0,
        }
    }
}

/// Smooth localized bump `sech(x)` and odd companion `x·sech(x)` used to
/// shape the upper pass through the Fermi zeros.
fn bump(x: f64) -> f64 {
    1.0 / x.cosh()
}

fn bump_d(x: f64) -> f64 {
    // d/dx sech = −sech·tanh
    -x.tanh() / x.cosh()
}

fn obump(x: f64) -> f64 {
    x / x.cosh()
}

fn obump_d(x: f64) -> f64 {
    (1.0 - x * x.tanh()) / x.cosh()
}

/// Panel edges for the return line `Im λ = −π/2`. Where `e^{−u/T}` is
/// non-negligible its oscillation scale along the line is `T/|ε₀'|`, so the
/// step adapts to the local derivative of the bare energy on the line.
fn lower_line_edges(params: &ModelParams, shapes: &[BumpShape], l: f64) -> Vec<f64> {
    let t = params.t;
    let s2 = params.zeta.sin().powi(2);
    let cz = params.zeta.cos();
    let mut edges = vec![-l];
    let mut a = -l;
    while a < l {
        // |ε₀'| on the line: 8 J sin²ζ |sinh 2a| / (cosh 2a + cos ζ)²
        let d = (2.0 * a).cosh() + cz;
        let slope = 8.0 * params.j * s2 * (2.0 * a).sinh().abs() / (d * d);
        let mut w = (2.5 * t / (slope + 0.25)).clamp(0.05, 1.0);
        // resolve the cross-line kernel spike: the pole band Im = ζ sits at
        // distance |g(a) + π/2 − ζ| from the pairs straight above
        let (g, _) = upper_g(shapes, a);
        let band = ((g + PI / 2.0) - params.zeta).abs();
        if band < 0.2 {
            w = w.min(0.6 * band.max(0.01));
        }
        a += w;
        edges.push(a.min(l));
    }
    if edges[edges.len() - 1] < l - 1e-9 {
        edges.push(l);
    }
    edges
}

/// Panel edges for the deformed upper pass: march with steps bounded by the
/// local wavelength `T/|u'|` along the curve and by the distance to the
/// nearest quantization point `u = iπT(2k+1)` (the poles of the Fermi
/// factor), forcing knots at the two zero abscissae so that the pass threads
/// them exactly.
fn upper_edges(
    params: &ModelParams,
    f: Option<&dyn Analytic>,
    shapes: &[BumpShape],
    l: f64,
    wmin: f64,
    wmax: f64,
) -> Vec<f64> {
    let t = params.t;
    let step_at = |a: f64| -> f64 {
        let (g, dg) = upper_g(shapes, a);
        let lam = C64::new(a, g);
        let arc = (1.0 + dg * dg).sqrt();
        let slope = match f.and_then(|f| f.deriv(lam).ok()) {
            Some(d) => d.norm() * arc,
            None => crate::model::bare_energy_deriv_unchecked(lam, params).norm() * arc,
        };
        let mut w = 2.5 * t / (slope + 0.25);
        // resolve the cross-line kernel spike against the return line
        let band = ((g + PI / 2.0) - params.zeta).abs();
        if band < 0.2 {
            w = w.min(0.6 * band.max(0.01));
        }
        if let Some(u) = f.and_then(|f| f.eval(lam).ok()) {
            // distance to the nearest pole u = iπT(2k+1) of 1/(1+e^{u/T})
            let ratio = u.im / (PI * t);
            let n_near = 2.0 * ((ratio - 1.0) / 2.0).round() + 1.0;
            let mut du = f64::INFINITY;
            for n in [n_near - 2.0, n_near, n_near + 2.0, 1.0, -1.0] {
                du = du.min((u - C64::new(0.0, n * PI * t)).norm());
            }
            if slope > 0.0 {
                // keep the panel a fraction of the pole distance along the arc
                w = w.min(0.35 * du * arc / slope);
            }
        }
        w.clamp(wmin, wmax)
    };
    let mut centers: Vec<f64> = shapes.iter().map(|s| s.x0).collect();
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges = vec![-l];
    let mut a = -l;
    while a < l - 1e-9 {
        let mut w = step_at(a);
        w = w.min(step_at(a + 0.5 * w)).min(step_at(a + w));
        let mut next = (a + w).min(l);
        for &c in &centers {
            if a < c - 1e-12 && next > c - 1e-12 {
                next = c;
                break;
            }
        }
        a = next;
        edges.push(a);
    }
    edges
}

#[derive(Debug, Clone, Copy)]
struct BumpShape {
    x0: f64,
    y0: f64,
    slope: f64,
    w: f64,
}

fn upper_g(shapes: &[BumpShape], a: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    for s in shapes {
        let u = (a - s.x0) / s.w;
        g += s.y0 * bump(u) + s.slope * s.w * obump(u);
        dg += s.y0 * bump_d(u) / s.w + s.slope * obump_d(u);
    }
    (g, dg)
}

impl Contour {
    /// Build the closed loop for the function `f` through its Fermi zeros.
    ///
    /// The pass follows the direction in which `u` stays real at each zero,
    /// so the quadrature threads exactly between the quantization points
    /// `±iπT` on either side, and the panel marching keeps clear of the
    /// higher poles of the Fermi factor along the way.
    pub fn build(
        params: &ModelParams,
        f: &dyn Analytic,
        zeros: [C64; 2],
        opts: ContourOptions,
    ) -> Result<Self> {
        let tangents = [f.deriv(zeros[0])?, f.deriv(zeros[1])?];
        Self::assemble(params, Some(f), zeros, tangents, opts)
    }

    /// Build from explicit tangents without a function (wavelength marching
    /// only; used when no evaluator is available).
    pub fn build_with_tangents(
        params: &ModelParams,
        zeros: [C64; 2],
        tangents: [C64; 2],
        opts: ContourOptions,
    ) -> Result<Self> {
        Self::assemble(params, None, zeros, tangents, opts)
    }

    fn assemble(
        params: &ModelParams,
        f: Option<&dyn Analytic>,
        zeros: [C64; 2],
        tangents: [C64; 2],
        opts: ContourOptions,
    ) -> Result<Self> {
        let strip = params.zeta.min(PI - params.zeta);
        for (b, z) in zeros.iter().enumerate() {
            let cap = 0.85 * 0.5 * params.zeta;
            if z.im.abs() > cap {
                return Err(Error::Tracing(format!(
                    "fermi zero {} at {z} too close to the kernel pole band (|Im| > {cap:.3})",
                    if b == 0 { "q_u^(-)" } else { "q_u^(+)" }
                )));
            }
        }
        let l = zeros[0].re.abs().max(zeros[1].re.abs()).max(1.0) + opts.margin;
        let shapes: Vec<BumpShape> = zeros
            .iter()
            .zip(tangents.iter())
            .map(|(&z, &du)| {
                let slope = if du.norm() > 0.0 { -du.im / du.re } else { 0.0 };
                BumpShape {
                    x0: z.re,
                    y0: z.im,
                    slope: slope.clamp(-1.5, 1.5),
                    w: (1.5 * z.im.abs() + 0.1).clamp(0.15, 0.7),
                }
            })
            .collect();
        // panel edges along the upper pass, right to left
        let mut edges = upper_edges(params, f, &shapes, l, opts.wmin, opts.wmax);
        edges.reverse();
        let mut segs: Vec<PathSeg> = Vec::new();
        let mut upper_panels = 0;
        for w in edges.windows(2) {
            let (a0, a1) = (w[0], w[1]);
            let (g0, d0) = upper_g(&shapes, a0);
            let (g1, d1) = upper_g(&shapes, a1);
            if g0.abs() >= strip - 1e-3 || g1.abs() >= strip - 1e-3 {
                return Err(Error::Tracing(
                    "upper pass left the inner-branch strip".into(),
                ));
            }
            segs.push(PathSeg::Hermite { a0, a1, g0, g1, d0, d1 });
            upper_panels += 1;
        }
        let (g_l, _) = upper_g(&shapes, -l);
        let (g_r, _) = upper_g(&shapes, l);
        let y_low = -PI / 2.0;
        // left vertical, downward
        segs.push(PathSeg::Line { z0: C64::new(-l, g_l), z1: C64::new(-l, y_low) });
        // lower line, left to right; panel widths track the local wavelength
        // T/|ε₀'| of the Fermi factor e^{−u/T}
        let lower_edges = lower_line_edges(params, &shapes, l);
        let mut lower_panels = 0;
        for w in lower_edges.windows(2) {
            segs.push(PathSeg::Line {
                z0: C64::new(w[0], y_low),
                z1: C64::new(w[1], y_low),
            });
            lower_panels += 1;
        }
        // right vertical, upward, closing the loop
        segs.push(PathSeg::Line { z0: C64::new(l, y_low), z1: C64::new(l, g_r) });
        let path = Path::new(segs, opts.order);
        let k = opts.order;
        let upper = 0..upper_panels * k;
        let lower_start = (upper_panels + 1) * k;
        let lower = lower_start..lower_start + lower_panels * k;
        let mut conv_dl: Vec<C64> = (0..path.len())
            .map(|j| path.weights[j] * path.dpath[j])
            .collect();
        for (j, w) in conv_dl.iter_mut().enumerate() {
            if !(upper.contains(&j) || lower.contains(&j)) {
                *w = C64::new(0.0, 0.0);
            }
        }
        Ok(Self {
            path,
            zeros,
            anchor: C64::new(l, g_r),
            half_width: l,
            t: params.t,
            upper,
            lower,
            left_vertical: upper_panels,
            right_vertical: upper_panels + 1 + lower_panels,
            conv_dl,
        })
    }

    pub fn nodes(&self) -> &[C64] {
        &self.path.nodes
    }

    /// `∮ f dλ` over the closed loop.
    pub fn integrate(&self, f: &[C64]) -> C64 {
        self.path.integrate(f)
    }

    /// Contour logarithm `Ln[1 + e^{−u/T}]` at every node, accumulated along
    /// the loop from the anchor, together with the monodromy (the total of
    /// the same integrand around the loop, which certifies admissibility).
    ///
    /// The horizontal runs are integrated by quadrature. Along the vertical
    /// closures `Re u > 0` holds, so `1 + e^{−u/T}` stays inside the unit
    /// disc around one and cannot wind; their increment is therefore the
    /// exact principal-log difference of the endpoint values, sparing the
    /// quadrature from the kernel-pole pinch at the truncated line ends.
    pub fn ln_values(&self, u: &[C64], u_prime: &[C64], u_anchor: C64) -> (Vec<C64>, C64) {
        let t = self.t;
        let f: Vec<C64> = u
            .iter()
            .zip(u_prime.iter())
            .enumerate()
            .map(|(j, (&uv, &dv))| {
                if self.on_closure(j) {
                    C64::new(0.0, 0.0)
                } else {
                    -dv / t * fermi_factor(uv / t)
                }
            })
            .collect();
        let (cum, total) = self.path.cumulative(&f);
        let (inc_left, inc_right) = self.vertical_increments(u);
        let ln0 = ln_one_plus_exp(-u_anchor / t);
        let lower_start = self.lower.start;
        let ln: Vec<C64> = cum
            .iter()
            .enumerate()
            .map(|(j, &c)| if j >= lower_start { ln0 + c + inc_left } else { ln0 + c })
            .collect();
        (ln, total + inc_left + inc_right)
    }

    /// Exact contour-log increments across the two vertical closures, from
    /// principal logs of `u` extrapolated to the junction points.
    fn vertical_increments(&self, u: &[C64]) -> (C64, C64) {
        let t = self.t;
        let k = self.path.order;
        let up_last = self.left_vertical - 1;
        let lo_first = self.left_vertical + 1;
        let lo_last = self.right_vertical - 1;
        let a = self.path.interp_in_panel(u, up_last, 1.0);
        let b = self.path.interp_in_panel(u, lo_first, -1.0);
        let c = self.path.interp_in_panel(u, lo_last, 1.0);
        let d = self.path.interp_in_panel(u, 0, -1.0);
        let _ = k;
        let inc_left = ln_one_plus_exp(-b / t) - ln_one_plus_exp(-a / t);
        let inc_right = ln_one_plus_exp(-d / t) - ln_one_plus_exp(-c / t);
        (inc_left, inc_right)
    }

    /// Whether node `j` lies on one of the vertical closures.
    pub fn on_closure(&self, j: usize) -> bool {
        !(self.upper.contains(&j) || self.lower.contains(&j))
    }
}

/// Stable `1/(1 + e^z)`.
pub fn fermi_factor(z: C64) -> C64 {
    if z.re > 40.0 {
        (-z).exp()
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Stable `ln(1 + e^z)` with the principal branch near the anchor.
pub fn ln_one_plus_exp(z: C64) -> C64 {
    if z.re < -40.0 {
        z.exp()
    } else if z.re > 40.0 {
        z + (-z).exp()
    } else {
        (1.0 + z.exp()).ln()
    }
}

/// Zero-monodromy diagnostic `∮ (−u'/T)/(1 + e^{u/T}) dμ` over the loop.
///
/// A magnitude below `1e−8` certifies that `1 + e^{−u/T}` has zero winding
/// with respect to the contour, i.e. the contour logarithm is single-valued.
pub fn check_monodromy(contour: &Contour, u: &[C64], u_prime: &[C64]) -> C64 {
    let t = contour.t;
    let f: Vec<C64> = u
        .iter()
        .zip(u_prime.iter())
        .enumerate()
        .map(|(j, (&uv, &dv))| {
            if contour.on_closure(j) {
                C64::new(0.0, 0.0)
            } else {
                -dv / t * fermi_factor(uv / t)
            }
        })
        .collect();
    let (inc_left, inc_right) = contour.vertical_increments(u);
    contour.integrate(&f) + inc_left + inc_right
}

/// CSV export of a contour with sampled `u` values: columns
/// `branch,s,re_lambda,im_lambda,re_u,im_u`, with branch `-`/`+` for nodes
/// nearer `∓q` and `s` the arclength from the loop start.
pub fn write_contour_csv<W: Write>(
    out: &mut W,
    contour: &Contour,
    u: &[C64],
) -> std::io::Result<()> {
    writeln!(out, "# contour-csv v1")?;
    writeln!(out, "branch,s,re_lambda,im_lambda,re_u,im_u")?;
    let mut s = 0.0;
    let mut prev: Option<C64> = None;
    for (i, &z) in contour.nodes().iter().enumerate() {
        if let Some(p) = prev {
            s += (z - p).norm();
        }
        prev = Some(z);
        let branch = if z.re < 0.0 { "-" } else { "+" };
        writeln!(
            out,
            "{branch},{s:.9},{:.12e},{:.12e},{:.12e},{:.12e}",
            z.re, z.im, u[i].re, u[i].im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;

    fn params(delta: f64, t: f64) -> ModelParams {
        ModelParams::new(1.0, delta, 1.0, t).unwrap()
    }

    struct BareEnergyShift {
        p: ModelParams,
        shift: C64,
    }

    impl Analytic for BareEnergyShift {
        fn eval(&self, z: C64) -> Result<C64> {
            Ok(model::bare_energy(z, &self.p)? - self.shift)
        }

        fn deriv(&self, z: C64) -> Result<C64> {
            model::bare_energy_deriv(z, &self.p)
        }
    }

    #[test]
    fn level_set_free_fermion_zeros_and_membership() {
        let p = params(0.0, 0.1);
        let f = BareEnergyShift { p, shift: C64::new(0.0, PI * p.t) };
        let q = 0.5 * (4.0f64).acosh();
        let ls = trace_level_set(
            &f,
            [C64::new(-q, -0.05), C64::new(q, 0.05)],
            &p,
            TraceOptions::default(),
        )
        .unwrap();
        // zeros solve ε₀ = iπT and sit within O(T) of ±q
        for (b, sign) in [(0usize, -1.0), (1usize, 1.0)] {
            assert!((ls.zeros[b] - C64::new(sign * q, 0.0)).norm() < 5.0 * p.t);
            assert!(f.eval(ls.zeros[b]).unwrap().norm() < 1e-10);
        }
        // Re f = 0 on every node, Im f monotone
        for branch in &ls.branches {
            let mut prev = f64::NEG_INFINITY;
            for &z in branch {
                let fv = f.eval(z).unwrap();
                assert!(fv.re.abs() < 1e-8, "Re f = {:e}", fv.re);
                assert!(fv.im >= prev - 1e-9);
                prev = fv.im;
            }
        }
        // the level set of Re ε₀ through ±q: compare against the closed form
        // cosh 2a cos 2b... spot-check just that branches end near ±iζ/2
        let last = *ls.branches[1].last().unwrap();
        assert!(last.im.abs() > 0.25, "branch should head toward the pole, got {last}");
    }

    #[test]
    fn level_set_degenerate_seed_fails() {
        let p = params(0.5, 0.1);
        // ε₀' vanishes at the origin: degenerate
        let f = BareEnergyShift { p, shift: model::bare_energy(C64::new(0.0, 0.0), &p).unwrap() };
        let r = trace_level_set(
            &f,
            [C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            &p,
            TraceOptions::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn contour_encloses_strip_and_quadrature_is_exact() {
        let p = params(0.5, 0.1);
        let zeros = [C64::new(-1.0, -0.04), C64::new(1.0, 0.04)];
        let tangents = [C64::new(-2.0, 0.1), C64::new(2.0, 0.1)];
        let c = Contour::build_with_tangents(&p, zeros, tangents, ContourOptions::for_params(&p)).unwrap();
        // winding of 1/(z − w) for w inside the strip loop
        for w in [C64::new(-1.0, -0.3), C64::new(0.5, -1.2), C64::new(1.0, -0.02)] {
            let f: Vec<C64> = c.nodes().iter().map(|&z| 1.0 / (z - w)).collect();
            let v = c.integrate(&f) / (2.0 * PI * C64::i());
            assert!((v - 1.0).norm() < 1e-9, "w={w}: winding {v}");
        }
        for w in [C64::new(-1.0, 0.3), C64::new(0.2, 0.4), C64::new(0.5, -1.8)] {
            let f: Vec<C64> = c.nodes().iter().map(|&z| 1.0 / (z - w)).collect();
            let v = c.integrate(&f) / (2.0 * PI * C64::i());
            assert!(v.norm() < 1e-9, "w={w}: winding {v}");
        }
    }

    #[test]
    fn hole_roots_inside_mirror_points_outside() {
        // geometric encoding of the quantization side rules at Δ=0:
        // the pass dips below the axis at −q and rises above it at +q,
        // so +q (the chosen hole) is inside and −q (its mirror) is outside.
        let p = params(0.0, 0.2);
        let q = 0.5 * (4.0f64).acosh();
        let dq = PI * p.t / model::bare_energy_deriv(C64::new(q, 0.0), &p).unwrap().re;
        let zeros = [C64::new(-q, -dq), C64::new(q, dq)];
        let du_m = model::bare_energy_deriv(zeros[0], &p).unwrap();
        let du_p = model::bare_energy_deriv(zeros[1], &p).unwrap();
        let c = Contour::build_with_tangents(&p, zeros, [du_m, du_p], ContourOptions::for_params(&p)).unwrap();
        let winding = |w: C64| {
            let f: Vec<C64> = c.nodes().iter().map(|&z| 1.0 / (z - w)).collect();
            (c.integrate(&f) / (2.0 * PI * C64::i())).re
        };
        assert!((winding(C64::new(q, 0.0)) - 1.0).abs() < 1e-6);
        assert!(winding(C64::new(-q, 0.0)).abs() < 1e-6);
    }

    #[test]
    fn monodromy_vanishes_for_free_fermion_excited_function() {
        // u = ε₀ − iπT on the loop built through its zeros
        let p = params(0.0, 0.5);
        let shift = C64::new(0.0, PI * p.t);
        let f = BareEnergyShift { p, shift };
        let q = 0.5 * (4.0f64).acosh();
        let z_m = newton_zero(&f, C64::new(-q, -0.1), 1e-13, 50).unwrap();
        let z_p = newton_zero(&f, C64::new(q, 0.1), 1e-13, 50).unwrap();
        let c = Contour::build(&p, &f, [z_m, z_p], ContourOptions::for_params(&p)).unwrap();
        let u: Vec<C64> = c.nodes().iter().map(|&z| f.eval(z).unwrap()).collect();
        let du: Vec<C64> = c.nodes().iter().map(|&z| f.deriv(z).unwrap()).collect();
        let m = check_monodromy(&c, &u, &du);
        assert!(m.norm() < 1e-8, "monodromy {m}");
        // anchor independence of the contour logarithm: re-anchoring at any
        // node changes values by less than 1e−8
        let (ln1, _) = c.ln_values(&u, &du, f.eval(c.anchor).unwrap());
        let j = c.path.len() / 3;
        let re_anchored: Vec<C64> = {
            let base = ln1[j] - ln_one_plus_exp(-u[j] / p.t);
            ln1.iter().map(|&v| v - base).collect()
        };
        let k = 4 * c.path.len() / 5;
        assert!((re_anchored[k] - ln1[k] + (ln1[j] - ln_one_plus_exp(-u[j] / p.t))).norm() < 1e-12);
    }

    #[test]
    fn ln_small_argument_expansion() {
        // constant u = c ≫ T on a tiny synthetic loop: Ln ≈ e^{−c/T}
        let p = params(0.5, 0.1);
        let zeros = [C64::new(-1.0, -0.02), C64::new(1.0, 0.02)];
        let tangents = [C64::new(-2.0, 0.0), C64::new(2.0, 0.0)];
        let c = Contour::build_with_tangents(&p, zeros, tangents, ContourOptions::for_params(&p)).unwrap();
        let cval = C64::new(0.8, 0.0);
        let u = vec![cval; c.path.len()];
        let du = vec![C64::new(0.0, 0.0); c.path.len()];
        let (ln, _) = c.ln_values(&u, &du, cval);
        let exact = (1.0 + (-cval / p.t).exp()).ln();
        let leading = (-cval / p.t).exp();
        for v in &ln {
            assert!((v - exact).norm() < 1e-15);
            // small-argument expansion Ln ≈ e^{−c/T}
            assert!((v - leading).norm() < leading.norm() * leading.norm());
        }
    }

    #[test]
    fn wrongly_threaded_contour_breaks_monodromy() {
        // a pass threading the wrong side of the hole point (here: windows
        // displaced so the +q window runs below the u = −iπT point) changes
        // the winding of 1+e^{−u/T}: the diagnostic must blow up
        let p = params(0.0, 0.5);
        let shift = C64::new(0.0, PI * p.t);
        let f = BareEnergyShift { p, shift };
        let q = 0.5 * (4.0f64).acosh();
        let z_m = newton_zero(&f, C64::new(-q, -0.1), 1e-13, 50).unwrap();
        let z_p = newton_zero(&f, C64::new(q, 0.1), 1e-13, 50).unwrap();
        let bad = [z_m, z_p - C64::new(0.0, 2.0 * z_p.im)];
        let c = Contour::build_with_tangents(
            &p,
            bad,
            [f.deriv(z_m).unwrap(), f.deriv(z_p).unwrap()],
            ContourOptions::for_params(&p),
        )
        .unwrap();
        let u: Vec<C64> = c.nodes().iter().map(|&z| f.eval(z).unwrap()).collect();
        let du: Vec<C64> = c.nodes().iter().map(|&z| f.deriv(z).unwrap()).collect();
        let m = check_monodromy(&c, &u, &du);
        assert!(m.norm() > 1e-8, "expected visible monodromy defect, got {m}");
    }

    #[test]
    fn csv_export_shape() {
        let p = params(0.5, 0.1);
        let zeros = [C64::new(-1.0, -0.02), C64::new(1.0, 0.02)];
        let tangents = [C64::new(-2.0, 0.0), C64::new(2.0, 0.0)];
        let c = Contour::build_with_tangents(&p, zeros, tangents, ContourOptions::for_params(&p)).unwrap();
        let u = vec![C64::new(1.0, 0.0); c.path.len()];
        let mut buf = Vec::new();
        write_contour_csv(&mut buf, &c, &u).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert_eq!(lines.next().unwrap(), "branch,s,re_lambda,im_lambda,re_u,im_u");
        assert_eq!(text.lines().count(), c.path.len() + 2);
    }
}
