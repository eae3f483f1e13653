//! The level-curve construction behind the nonlinear Beltrami equation
//! h_wbar = B(w, h_w), its ellipticity bounds, and the quasiregularity
//! diagnostic for differences of solutions.
//!
//! For power profiles the level function is
//! (x, y) -> ((x^2+y^2)/(x^2-y^2))^{p-1} x y on 0 < y < x, strictly increasing
//! in y, so y = A_k(x) is well defined for every k > 0. Bisection (not Newton)
//! does the inversion: monotonicity makes it unconditionally convergent and
//! the derivative blows up as y -> x. A short safeguarded Newton polish runs
//! afterward inside the bracket.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hopf::HopfField;
use crate::mesh::{wirtinger, DiscreteMap, DiskMesh};
use crate::seeding::substream;

/// How |Phi| maps to the level parameter k.
///
/// `Scaled` (k = |Phi|/p) makes eval_B exactly invert the Hopf identity
/// A'(K) h_w conj(h_wbar) = Phi for A(t) = t^p, since |Phi| = p K^{p-1} x y
/// while the level relation reads K^{p-1} x y = k. `Raw` (k = |Phi|) keeps the
/// level relation verbatim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KConvention {
    Scaled,
    Raw,
}

impl KConvention {
    pub fn k_of(&self, phi_mag: f64, p: f64) -> f64 {
        match self {
            KConvention::Scaled => phi_mag / p,
            KConvention::Raw => phi_mag,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(KConvention::Scaled),
            "raw" => Ok(KConvention::Raw),
            other => Err(Error::Parse(format!("unknown k-convention {other:?} (raw|scaled)"))),
        }
    }
}

fn check_level_inputs(p: f64, k: f64, x: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("level curve requires p >= 1, got {p}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("level curve requires k > 0, got {k}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("level curve requires x > 0, got {x}")));
    }
    Ok(())
}

/// Log form of the level relation at y = x s:
/// g(s) = (p-1) log((1+s^2)/(1-s^2)) + log s + 2 log x - log k.
#[inline]
fn level_log(p: f64, k: f64, x: f64, s: f64) -> f64 {
    (p - 1.0) * ((1.0 + s * s) / (1.0 - s * s)).ln() + s.ln() + 2.0 * x.ln() - k.ln()
}

#[inline]
fn level_log_deriv(p: f64, s: f64) -> f64 {
    (p - 1.0) * 4.0 * s / (1.0 - s.powi(4)) + 1.0 / s
}

/// Solves ((x^2+y^2)/(x^2-y^2))^{p-1} x y = k for y in (0, x).
///
/// For p > 1 a solution exists for every x > 0 (the level function ranges over
/// all of (0, inf)); for p = 1 the relation degenerates to x y = k, so the
/// solution y = k/x exists in (0, x) only when x > sqrt(k) and `None` is
/// returned otherwise. Nonpositive inputs are domain errors.
pub fn level_solve(p: f64, k: f64, x: f64) -> Result<Option<f64>> {
    check_level_inputs(p, k, x)?;
    if p == 1.0 {
        let y = k / x;
        return Ok(if y < x { Some(y) } else { None });
    }
    // Bisection on s = y/x in (0, 1), then a safeguarded Newton polish.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut s = 0.5;
    for _ in 0..200 {
        s = 0.5 * (lo + hi);
        if s <= lo || s >= hi {
            break;
        }
        if level_log(p, k, x, s) < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
    }
    for _ in 0..3 {
        let g = level_log(p, k, x, s);
        let step = g / level_log_deriv(p, s);
        let s_new = s - step;
        if s_new > lo && s_new < hi {
            s = s_new;
        }
    }
    Ok(Some(s * x))
}

/// Residual of the defining relation in log form; <= 1e-12 at solved points.
pub fn level_relation_residual(p: f64, k: f64, x: f64, y: f64) -> f64 {
    ((p - 1.0) * ((x * x + y * y) / (x * x - y * y)).ln() + x.ln() + y.ln() - k.ln()).abs()
}

/// The x giving the solution fraction s = y/x; useful for building grids that
/// stay away from the degenerate ends of the curve.
pub fn level_x_for_fraction(p: f64, k: f64, s: f64) -> f64 {
    (k / (((1.0 + s * s) / (1.0 - s * s)).powf(p - 1.0) * s)).sqrt()
}

/// The implicit level curve y = A_k(x) for one (p, k).
#[derive(Clone, Copy, Debug)]
pub struct LevelCurve {
    pub p: f64,
    pub k: f64,
}

impl LevelCurve {
    pub fn new(p: f64, k: f64) -> Result<Self> {
        check_level_inputs(p, k, 1.0)?;
        Ok(LevelCurve { p, k })
    }

    pub fn solve(&self, x: f64) -> Result<Option<f64>> {
        level_solve(self.p, self.k, x)
    }

    /// Samples (x, A_k(x)) over [x_min, x_max] with n points.
    pub fn sample(&self, x_min: f64, x_max: f64, n: usize) -> Result<Vec<(f64, f64)>> {
        if !(x_min > 0.0 && x_max > x_min) {
            return Err(Error::Domain("level curve sampling requires 0 < x_min < x_max".into()));
        }
        if n < 2 {
            return Err(Error::Domain("level curve sampling requires n >= 2".into()));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let x = x_min + (x_max - x_min) * i as f64 / (n - 1) as f64;
            if let Some(y) = self.solve(x)? {
                out.push((x, y));
            }
        }
        Ok(out)
    }
}

/// V(x) = A_k(x)/x in (0,1) and W(x) = x A_k(x) > 0.
pub fn v_and_w(p: f64, k: f64, x: f64) -> Result<(f64, f64)> {
    let y = level_solve(p, k, x)?.ok_or_else(|| {
        Error::Domain(format!("no level-curve point at p={p}, k={k}, x={x} (need x > sqrt(k))"))
    })?;
    Ok((y / x, x * y))
}

/// One row of the monotonicity report.
#[derive(Clone, Debug, Serialize)]
pub struct MonoRow {
    pub x: f64,
    pub v: f64,
    pub w: f64,
    pub v_prime_fd: f64,
    pub w_prime_fd: f64,
    pub v_identity_rel_err: f64,
    pub w_identity_rel_err: f64,
    pub pass: bool,
}

/// Report of [`monotonicity_check`].
#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub p: f64,
    pub k: f64,
    pub rows: Vec<MonoRow>,
    pub all_pass: bool,
}

/// Verifies that V is decreasing, W is increasing (constant at p = 1), and
/// that finite differences of both satisfy the derivative identities
///   V'(x) [4(p-1)V/(1-V^4) + 1/V] = -2/x,
///   W'(x) [4(p-1)x^4 W/(x^8-W^4) + 1/W] = 8(p-1)x^3 W^2/(x^8-W^4),
/// within relative 1e-6.
pub fn monotonicity_check(p: f64, k: f64, x_grid: &[f64]) -> Result<MonotonicityReport> {
    let mut rows = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let (v, w) = v_and_w(p, k, x)?;
        let h = x * 1e-5;
        let (vp, wp) = v_and_w(p, k, x + h)?;
        let (vm, wm) = v_and_w(p, k, x - h)?;
        let v_fd = (vp - vm) / (2.0 * h);
        let w_fd = (wp - wm) / (2.0 * h);
        // Predicted derivatives from the identities (solved form).
        let v_pred = (-2.0 / x) / (4.0 * (p - 1.0) * v / (1.0 - v.powi(4)) + 1.0 / v);
        let w_den = 4.0 * (p - 1.0) * x.powi(4) * w / (x.powi(8) - w.powi(4)) + 1.0 / w;
        let w_pred = (8.0 * (p - 1.0) * x.powi(3) * w * w / (x.powi(8) - w.powi(4))) / w_den;
        let v_err = (v_fd - v_pred).abs() / v_pred.abs();
        // W' vanishes at p = 1; measure against the derivative scale |V'| then.
        let w_err = (w_fd - w_pred).abs() / w_pred.abs().max(v_pred.abs());
        let monotone = v_fd < 0.0 && if p > 1.0 { w_fd > 0.0 } else { w_fd.abs() <= 1e-6 * v_fd.abs() };
        let pass = monotone && v_err <= 1e-6 && w_err <= 1e-6;
        rows.push(MonoRow {
            x,
            v,
            w,
            v_prime_fd: v_fd,
            w_prime_fd: w_fd,
            v_identity_rel_err: v_err,
            w_identity_rel_err: w_err,
            pass,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(MonotonicityReport { p, k, rows, all_pass })
}

/// Evaluates |B| at level k for argument magnitude x (the scalar core of
/// eval_B). For p = 1 the closed form y = k/x applies without the y < x
/// restriction, matching the algebraic cancellation in the Hopf round trip.
fn level_y_for_b(p: f64, k: f64, x: f64) -> Result<f64> {
    if p == 1.0 {
        check_level_inputs(p, k, x)?;
        return Ok(k / x);
    }
    Ok(level_solve(p, k, x)?.expect("p > 1 level solve always has a solution"))
}

/// Phi samplers the Beltrami operator can wrap.
#[derive(Clone, Debug)]
pub enum PhiSampler {
    Constant(Complex64),
    /// Holomorphic polynomial sum c_j w^j.
    Polynomial(Vec<Complex64>),
    /// Piecewise-constant per triangle of a mesh (barycenter samples).
    TriangleField { mesh: DiskMesh, values: Vec<Complex64> },
}

impl PhiSampler {
    pub fn eval(&self, w: Complex64) -> Complex64 {
        match self {
            PhiSampler::Constant(c) => *c,
            PhiSampler::Polynomial(coeffs) => {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut pw = Complex64::new(1.0, 0.0);
                for &c in coeffs {
                    acc += c * pw;
                    pw *= w;
                }
                acc
            }
            PhiSampler::TriangleField { mesh, values } => {
                let tris = mesh.triangles();
                let mut loc = crate::mesh::PointLocator::new(mesh, mesh.vertices(), tris);
                match loc.locate(w) {
                    Some((t, _)) => values[t],
                    None => Complex64::new(0.0, 0.0),
                }
            }
        }
    }
}

/// The measurable field B(w, xi) of the nonlinear Beltrami equation.
#[derive(Clone, Debug)]
pub struct BeltramiOp {
    pub p: f64,
    pub convention: KConvention,
    pub phi: PhiSampler,
}

impl BeltramiOp {
    pub fn new(p: f64, convention: KConvention, phi: PhiSampler) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("Beltrami operator requires p >= 1, got {p}")));
        }
        Ok(BeltramiOp { p, convention, phi })
    }
}

/// B(w, xi) = conj(Phi)/|Phi| A_k(|xi|) xi/|xi| with k from the convention.
///
/// Conformal points (Phi = 0) give 0 for every xi; xi = 0 with Phi != 0 is a
/// singular argument (A_k has no limit inside 0 < y < x as x -> 0).
pub fn eval_b(op: &BeltramiOp, w: Complex64, xi: Complex64) -> Result<Complex64> {
    let phi = op.phi.eval(w);
    eval_b_with_phi(op.p, op.convention, phi, xi)
}

/// Core of [`eval_b`] with Phi supplied directly.
pub fn eval_b_with_phi(
    p: f64,
    convention: KConvention,
    phi: Complex64,
    xi: Complex64,
) -> Result<Complex64> {
    let phi_mag = phi.norm();
    if phi_mag == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let xi_mag = xi.norm();
    if xi_mag == 0.0 {
        return Err(Error::SingularArgument(
            "B(w, 0) is undefined where Phi(w) != 0".into(),
        ));
    }
    let k = convention.k_of(phi_mag, p);
    let y = level_y_for_b(p, k, xi_mag)?;
    Ok(phi.conj() / phi_mag * y * xi / xi_mag)
}

/// Report of the seeded ellipticity sweep.
#[derive(Clone, Debug, Serialize)]
pub struct EllipticityReport {
    pub p: f64,
    pub seed: u64,
    pub n_samples: usize,
    /// Violations of the Lipschitz bound beyond 1e-10.
    pub violations_lipschitz: usize,
    /// Violations of the sign claim (a-b)(s^2 b - t^2 a) >= 0 beyond 1e-10.
    pub violations_sign: usize,
    /// Smallest observed margin max{V} - quotient (approaches 0 in the
    /// degenerate-elliptic regime; that is structure, not failure).
    pub worst_lipschitz_margin: f64,
    /// Smallest normalized sign product.
    pub worst_sign_margin: f64,
    pub theta_checks: usize,
    /// Tuples whose theta-grid maximizer sits farther than one cell from pi.
    pub theta_failures: usize,
    /// Largest |theta_max - pi| observed over the scans.
    pub worst_theta_offset: f64,
}

const THETA_GRID: usize = 720;

struct SampleStats {
    lip_margin: f64,
    sign_margin: f64,
    lip_violation: bool,
    sign_violation: bool,
    theta: Option<(bool, f64)>,
}

fn ellipticity_one_sample(p: f64, seed: u64, index: u64, do_theta: bool) -> SampleStats {
    let mut rng = substream(seed, "ellipticity", index);
    let k = 10f64.powf(rng.gen_range(-1.0f64..2.0));
    let s1: f64 = rng.gen_range(0.01..0.99);
    let mut s2: f64 = rng.gen_range(0.01..0.99);
    // Coincident pairs are excluded from the quotient (0/0); nudge apart.
    if (s1 - s2).abs() < 1e-9 {
        s2 = (s2 + 0.1) % 0.98 + 0.01;
    }
    let t = level_x_for_fraction(p, k, s1);
    let s = level_x_for_fraction(p, k, s2);
    let arg_z = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let arg_x = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let phi_phase = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    let phi = Complex64::from_polar(p * k, phi_phase);

    let zeta = Complex64::from_polar(t, arg_z);
    let xi = Complex64::from_polar(s, arg_x);
    let bz = eval_b_with_phi(p, KConvention::Scaled, phi, zeta).unwrap();
    let bx = eval_b_with_phi(p, KConvention::Scaled, phi, xi).unwrap();
    // a = V(t) = |B(zeta)|/t, b = V(s) = |B(xi)|/s by construction.
    let a = bz.norm() / t;
    let b = bx.norm() / s;

    let diff = (zeta - xi).norm();
    let (lip_margin, lip_violation) = if diff > 1e-12 * (t + s) {
        let quotient = (bz - bx).norm() / diff;
        let bound = a.max(b);
        let margin = bound - quotient;
        (margin, margin < -1e-10)
    } else {
        (f64::INFINITY, false)
    };

    let sign_raw = (a - b) * (s * s * b - t * t * a);
    let sign_scale = (a + b) * (s * s * b + t * t * a);
    let sign_margin = if sign_scale > 0.0 { sign_raw / sign_scale } else { 0.0 };
    let sign_violation = sign_margin < -1e-10;

    let theta = if do_theta {
        let mut best_i = 0usize;
        let mut best = f64::NEG_INFINITY;
        let mut worst = f64::INFINITY;
        for i in 0..=THETA_GRID {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / THETA_GRID as f64;
            let denom = t * t + s * s - 2.0 * s * t * theta.cos();
            if denom < 1e-300 {
                continue;
            }
            let num = a * a * t * t + b * b * s * s - 2.0 * a * b * s * t * theta.cos();
            let f = num / denom;
            if f > best {
                best = f;
                best_i = i;
            }
            worst = worst.min(f);
        }
        let flat = best - worst <= 1e-12 * best.abs().max(1e-300);
        let theta_max = 2.0 * std::f64::consts::PI * best_i as f64 / THETA_GRID as f64;
        let offset = (theta_max - std::f64::consts::PI).abs();
        let cell = 2.0 * std::f64::consts::PI / THETA_GRID as f64;
        Some((flat || offset <= cell + 1e-12, if flat { 0.0 } else { offset }))
    } else {
        None
    };

    SampleStats { lip_margin, sign_margin, lip_violation, sign_violation, theta }
}

/// Seeded random sweep of the ellipticity bounds: the Lipschitz quotient of
/// eval_B against max{V(|zeta|), V(|xi|)}, the sign claim behind it, and the
/// location of the maximum of F(theta) at theta = pi (on a 720-cell grid,
/// scanned for the first 10^4 samples).
pub fn ellipticity_sample(p: f64, n_samples: usize, seed: u64) -> Result<EllipticityReport> {
    if n_samples < 1 {
        return Err(Error::Domain("ellipticity sweep requires n_samples >= 1".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("ellipticity sweep requires p >= 1, got {p}")));
    }
    let n_theta = n_samples.min(10_000);
    // min/max/counts are order-independent, so the parallel reduction is
    // bit-identical for any schedule.
    let (v39, v37, wl, ws, tc, tf, wt) = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let st = ellipticity_one_sample(p, seed, i, (i as usize) < n_theta);
            let (tc, tf, wt) = match st.theta {
                Some((ok, off)) => (1usize, usize::from(!ok), off),
                None => (0, 0, 0.0),
            };
            (
                usize::from(st.lip_violation),
                usize::from(st.sign_violation),
                st.lip_margin,
                st.sign_margin,
                tc,
                tf,
                wt,
            )
        })
        .reduce(
            || (0, 0, f64::INFINITY, f64::INFINITY, 0, 0, 0.0),
            |a, b| {
                (
                    a.0 + b.0,
                    a.1 + b.1,
                    a.2.min(b.2),
                    a.3.min(b.3),
                    a.4 + b.4,
                    a.5 + b.5,
                    a.6.max(b.6),
                )
            },
        );
    Ok(EllipticityReport {
        p,
        seed,
        n_samples,
        violations_lipschitz: v39,
        violations_sign: v37,
        worst_lipschitz_margin: wl,
        worst_sign_margin: ws,
        theta_checks: tc,
        theta_failures: tf,
        worst_theta_offset: wt,
    })
}

/// Per-triangle residual of h_wbar = B(w, h_w) and its summary.
#[derive(Clone, Debug, Serialize)]
pub struct BeltramiResidualReport {
    pub per_triangle_max: f64,
    pub l2: f64,
    /// Triangles where h_w = 0 with Phi != 0 (singular arguments), counted
    /// rather than thrown.
    pub singular_count: usize,
    pub n_triangles: usize,
}

/// Measures |h_wbar - B(w_bary, h_w)| / |h_w| per triangle with Phi supplied
/// per triangle. Pass the map's own Hopf samples for the self-consistency
/// round trip, or an analytic/fitted field for cross mode.
pub fn beltrami_residual(
    mesh: &DiskMesh,
    map: &DiscreteMap,
    phi_per_triangle: &[Complex64],
    p: f64,
    convention: KConvention,
) -> Result<BeltramiResidualReport> {
    map.assert_on(mesh)?;
    if phi_per_triangle.len() != mesh.n_triangles() {
        return Err(Error::MeshMismatch);
    }
    let derivs = wirtinger(mesh, map)?;
    let mut singular = 0usize;
    let mut max_r = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut counted = 0usize;
    for t in 0..mesh.n_triangles() {
        let hw = derivs.h_w[t];
        let hwb = derivs.h_wbar[t];
        match eval_b_with_phi(p, convention, phi_per_triangle[t], hw) {
            Ok(b) => {
                let r = (hwb - b).norm() / hw.norm().max(1e-300);
                max_r = max_r.max(r);
                sum_sq += r * r;
                counted += 1;
            }
            Err(Error::SingularArgument(_)) => singular += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(BeltramiResidualReport {
        per_triangle_max: max_r,
        l2: (sum_sq / counted.max(1) as f64).sqrt(),
        singular_count: singular,
        n_triangles: mesh.n_triangles(),
    })
}

/// Least-squares holomorphic polynomial fit (degree `degree`) to the Hopf
/// samples, weighted by triangle area; returns the coefficients.
pub fn fit_polynomial_phi(mesh: &DiskMesh, hopf: &HopfField, degree: usize) -> Result<Vec<Complex64>> {
    let n = degree + 1;
    let nt = mesh.n_triangles();
    if nt < n {
        return Err(Error::Domain("not enough triangles for the polynomial fit".into()));
    }
    // Normal equations G c = r with G_ij = sum w conj(b^i) b^j.
    let mut g = vec![Complex64::new(0.0, 0.0); n * n];
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..nt {
        let wgt = mesh.triangle_area(t);
        let b = hopf.barycenters[t];
        let mut powers = Vec::with_capacity(n);
        let mut pw = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            powers.push(pw);
            pw *= b;
        }
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] += wgt * powers[i].conj() * powers[j];
            }
            r[i] += wgt * powers[i].conj() * hopf.phi[t];
        }
    }
    solve_dense_complex(&mut g, &mut r, n)?;
    Ok(r)
}

/// Gaussian elimination with partial pivoting for small complex systems.
fn solve_dense_complex(a: &mut [Complex64], b: &mut [Complex64], n: usize) -> Result<()> {
    for col in 0..n {
        let (pivot, mag) = (col..n)
            .map(|r| (r, a[r * n + col].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if mag <= 1e-300 {
            return Err(Error::Solver("singular normal equations in polynomial fit".into()));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
            }
            b.swap(pivot, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            for j in col..n {
                let v = a[col * n + j];
                a[r * n + j] -= f * v;
            }
            let bc = b[col];
            b[r] -= f * bc;
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col * n + j] * b[j];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}

/// Sup of |mu_eta| over triangles with barycenter in |w| <= 1 - delta.
#[derive(Clone, Debug, Serialize)]
pub struct AnnulusSup {
    pub delta: f64,
    pub sup_mu_eta: f64,
    pub n_triangles: usize,
}

/// Report of [`quasiregularity_of_difference`].
#[derive(Clone, Debug, Serialize)]
pub struct QuasiregularityReport {
    pub status: String,
    pub annulus: Vec<AnnulusSup>,
    /// Triangles where both maps carry the same Hopf sample (relative 1e-6)
    /// and eta_w != 0, on which |mu_eta| <= max{|mu_g|, |mu_h|} was asserted.
    pub inequality_checked: usize,
    pub inequality_violations: usize,
    /// Triangles where the two maps do not satisfy the same discrete Beltrami
    /// relation within tolerance; the inequality is not asserted there.
    pub flagged_different_phi: usize,
    pub sup_mu_g: f64,
    pub sup_mu_h: f64,
}

/// Examines eta = g - h for local quasiregularity at mesh scale.
pub fn quasiregularity_of_difference(
    mesh: &DiskMesh,
    map_g: &DiscreteMap,
    map_h: &DiscreteMap,
    p: f64,
) -> Result<QuasiregularityReport> {
    map_g.assert_on(mesh)?;
    map_h.assert_on(mesh)?;
    let dg = wirtinger(mesh, map_g)?;
    let dh = wirtinger(mesh, map_h)?;
    let nt = mesh.n_triangles();

    let eta_scale = map_g
        .values()
        .iter()
        .zip(map_h.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let map_scale = map_g
        .values()
        .iter()
        .chain(map_h.values())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    // A difference at float-resolution scale has no meaningful Beltrami
    // coefficient; the coincidence itself is the report.
    if eta_scale <= 1e-9 * map_scale {
        return Ok(QuasiregularityReport {
            status: "degenerate: zero difference".into(),
            annulus: vec![],
            inequality_checked: 0,
            inequality_violations: 0,
            flagged_different_phi: 0,
            sup_mu_g: 0.0,
            sup_mu_h: 0.0,
        });
    }

    let deriv_scale = (0..nt)
        .map(|t| (dg.h_w[t] - dh.h_w[t]).norm() + (dg.h_wbar[t] - dh.h_wbar[t]).norm())
        .fold(0.0f64, f64::max);
    if deriv_scale <= 1e-14 * eta_scale.max(1.0) {
        return Ok(QuasiregularityReport {
            status: "derivative-degenerate".into(),
            annulus: vec![],
            inequality_checked: 0,
            inequality_violations: 0,
            flagged_different_phi: 0,
            sup_mu_g: 0.0,
            sup_mu_h: 0.0,
        });
    }

    let bary: Vec<Complex64> = (0..nt)
        .map(|t| {
            let [i, j, k] = mesh.triangles()[t];
            (mesh.vertices()[i as usize] + mesh.vertices()[j as usize] + mesh.vertices()[k as usize])
                / 3.0
        })
        .collect();

    let mut annulus = Vec::new();
    for delta in [0.1, 0.2, 0.4] {
        let mut sup = 0.0f64;
        let mut count = 0usize;
        for t in 0..nt {
            if bary[t].norm() <= 1.0 - delta {
                count += 1;
                let ew = dg.h_w[t] - dh.h_w[t];
                let ewb = dg.h_wbar[t] - dh.h_wbar[t];
                if ew.norm() > 1e-14 * deriv_scale {
                    sup = sup.max(ewb.norm() / ew.norm());
                }
            }
        }
        annulus.push(AnnulusSup { delta, sup_mu_eta: sup, n_triangles: count });
    }

    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut flagged = 0usize;
    let mut sup_g = 0.0f64;
    let mut sup_h = 0.0f64;
    for t in 0..nt {
        let (gw, gwb) = (dg.h_w[t], dg.h_wbar[t]);
        let (hw, hwb) = (dh.h_w[t], dh.h_wbar[t]);
        let jac_g = gw.norm_sqr() - gwb.norm_sqr();
        let jac_h = hw.norm_sqr() - hwb.norm_sqr();
        if jac_g <= 0.0 {
            return Err(Error::InadmissibleMap { index: t, jac: jac_g });
        }
        if jac_h <= 0.0 {
            return Err(Error::InadmissibleMap { index: t, jac: jac_h });
        }
        let mu_g = (gwb / gw).norm();
        let mu_h = (hwb / hw).norm();
        sup_g = sup_g.max(mu_g);
        sup_h = sup_h.max(mu_h);
        let k_g = (gw.norm_sqr() + gwb.norm_sqr()) / jac_g;
        let k_h = (hw.norm_sqr() + hwb.norm_sqr()) / jac_h;
        let phi_g = p * k_g.powf(p - 1.0) * gw * gwb.conj();
        let phi_h = p * k_h.powf(p - 1.0) * hw * hwb.conj();
        let phi_scale = phi_g.norm().max(phi_h.norm());
        let same_relation = (phi_g - phi_h).norm() <= 1e-6 * phi_scale.max(1e-30);
        let ew = gw - hw;
        if ew.norm() <= 1e-14 * deriv_scale {
            continue;
        }
        if same_relation {
            checked += 1;
            let mu_eta = ((gwb - hwb) / ew).norm();
            if mu_eta > mu_g.max(mu_h) + 1e-10 {
                violations += 1;
            }
        } else {
            flagged += 1;
        }
    }

    Ok(QuasiregularityReport {
        status: "ok".into(),
        annulus,
        inequality_checked: checked,
        inequality_violations: violations,
        flagged_different_phi: flagged,
        sup_mu_g: sup_g,
        sup_mu_h: sup_h,
    })
}
