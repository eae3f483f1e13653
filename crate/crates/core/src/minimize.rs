//! Feasible interior-point descent for the conformal energy over interior
//! vertex positions with a fixed boundary trace.
//!
//! The descent direction is the area-preconditioned negative gradient; step
//! lengths start from a safeguarded Barzilai-Borwein value and backtrack under
//! an Armijo test. Steps that would drop any triangle Jacobian below
//! `jac_floor` times the initial minimum are rejected, so every accepted
//! iterate stays orientation-preserving and the J = 0 convention in the
//! distortion never activates along the path.
//!
//! Stopping band: an accepted step may not carry the gradient norm from above
//! `grad_tol` to below `grad_tol / 4` in one jump (such steps are shrunk), so
//! runs finish with `final_grad_norm` in (grad_tol/4, grad_tol]. Refinement
//! studies that tighten the tolerance per level therefore see monotone
//! optimizer residuals instead of stopping wobble.

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::{trace_on_mesh, CircleHomeo};
use crate::error::{Error, Result};
use crate::mesh::{tri_geoms, DiscreteMap, DiskMesh};
use crate::oracle::harmonic_extension_fem;
use crate::profile::EnergyProfile;
use crate::seeding::substream;

use rand::Rng;

/// Configuration for [`minimize`].
#[derive(Clone, Debug)]
pub struct MinimizeConfig {
    pub profile: EnergyProfile,
    /// Convergence threshold on max_i |g_i| / area_i (sup-norm per unit area).
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    /// Step rejected if any triangle J < jac_floor * (initial min J).
    pub jac_floor: f64,
    /// Seed for the perturbed initialization mode.
    pub seed: u64,
}

impl MinimizeConfig {
    pub fn new(profile: EnergyProfile) -> Self {
        MinimizeConfig {
            profile,
            grad_tol: 1e-8,
            max_iters: 20_000,
            armijo_c: 1e-4,
            shrink: 0.5,
            jac_floor: 1e-3,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::Domain("grad_tol must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::Domain("armijo_c must lie in (0,1)".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Domain("shrink must lie in (0,1)".into()));
        }
        if !(self.jac_floor > 0.0) {
            return Err(Error::Domain("jac_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Initialization mode for [`minimize`].
#[derive(Clone, Debug)]
pub enum Init {
    /// Discrete harmonic extension of the trace.
    Harmonic,
    /// Harmonic extension plus seeded interior noise of amplitude
    /// 0.05 * mesh size, backtracked toward the harmonic start until feasible.
    Perturbed(u64),
    /// Resume from an existing map on the same mesh (its boundary entries are
    /// re-pinned to the trace of h0).
    FromMap(DiscreteMap),
}

/// One recorded accepted iterate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub min_j: f64,
}

/// Outcome of a minimization run.
#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub map: DiscreteMap,
    pub energy: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub min_j: f64,
    pub converged: bool,
    pub history: Vec<HistoryRow>,
}

/// Per-triangle energy density and its derivative coefficients.
///
/// With x = h_w, y = h_wbar, N = |x|^2 + |y|^2, J = |x|^2 - |y|^2, K = N/J:
/// d(A(K) J) = cx * 2 Re(conj(x) dx) + cy * 2 Re(conj(y) dy), where
/// cx = A(K) + (1 - K) A'(K) and cy = (1 + K) A'(K) - A(K).
#[inline]
fn density_and_coeffs(profile: &EnergyProfile, x: Complex64, y: Complex64) -> (f64, f64, f64) {
    let a2 = x.norm_sqr();
    let b2 = y.norm_sqr();
    let jac = a2 - b2;
    let k = (a2 + b2) / jac;
    let ak = profile.eval(k);
    let dak = profile.deriv(k);
    (ak * jac, ak + (1.0 - k) * dak, (1.0 + k) * dak - ak)
}

pub(crate) struct EnergyWorkspace {
    pub geoms: Vec<crate::mesh::TriGeom>,
    pub lumped: Vec<f64>,
}

impl EnergyWorkspace {
    pub fn new(mesh: &DiskMesh) -> Result<Self> {
        Ok(EnergyWorkspace { geoms: tri_geoms(mesh)?, lumped: mesh.lumped_vertex_areas() })
    }

    /// Energy and min J; `None` energy terms are never produced because the
    /// caller guards feasibility first.
    pub fn energy_min_j(&self, profile: &EnergyProfile, vals: &[Complex64]) -> (f64, f64) {
        let mut terms = Vec::with_capacity(self.geoms.len());
        let mut min_j = f64::INFINITY;
        for g in &self.geoms {
            let (x, y) = derivs_at(g, vals);
            let jac = x.norm_sqr() - y.norm_sqr();
            min_j = min_j.min(jac);
            if jac > 0.0 {
                let k = (x.norm_sqr() + y.norm_sqr()) / jac;
                terms.push(g.area * profile.eval(k) * jac);
            } else {
                terms.push(0.0);
            }
        }
        (crate::distortion::pairwise_sum(&terms), min_j)
    }

    pub fn min_j(&self, vals: &[Complex64]) -> f64 {
        self.geoms
            .iter()
            .map(|g| {
                let (x, y) = derivs_at(g, vals);
                x.norm_sqr() - y.norm_sqr()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Full-length gradient (zeros at boundary vertices). Requires min J > 0.
    pub fn gradient(
        &self,
        profile: &EnergyProfile,
        vals: &[Complex64],
        is_boundary: impl Fn(usize) -> bool,
    ) -> Result<Vec<Complex64>> {
        let mut g = vec![Complex64::new(0.0, 0.0); vals.len()];
        for (t, geom) in self.geoms.iter().enumerate() {
            let (x, y) = derivs_at(geom, vals);
            let jac = x.norm_sqr() - y.norm_sqr();
            if jac <= 0.0 {
                return Err(Error::InadmissibleMap { index: t, jac });
            }
            let (_, cx, cy) = density_and_coeffs(profile, x, y);
            let fx = 2.0 * geom.area * cx * x;
            let fy = 2.0 * geom.area * cy * y;
            for c in 0..3 {
                let v = geom.idx[c];
                if !is_boundary(v) {
                    g[v] += fx * geom.ca[c].conj() + fy * geom.cb[c].conj();
                }
            }
        }
        Ok(g)
    }
}

#[inline]
fn derivs_at(g: &crate::mesh::TriGeom, vals: &[Complex64]) -> (Complex64, Complex64) {
    let (h0, h1, h2) = (vals[g.idx[0]], vals[g.idx[1]], vals[g.idx[2]]);
    (
        g.ca[0] * h0 + g.ca[1] * h1 + g.ca[2] * h2,
        g.cb[0] * h0 + g.cb[1] * h1 + g.cb[2] * h2,
    )
}

/// Exact gradient of the discrete energy with respect to interior vertex
/// positions, packaged as complex numbers (dE/dRe + i dE/dIm); boundary
/// entries are zero.
pub fn energy_gradient(
    mesh: &DiskMesh,
    map: &DiscreteMap,
    profile: &EnergyProfile,
) -> Result<Vec<Complex64>> {
    map.assert_on(mesh)?;
    let ws = EnergyWorkspace::new(mesh)?;
    ws.gradient(profile, map.values(), |v| mesh.is_boundary(v))
}

fn sup_norm_per_area(g: &[Complex64], lumped: &[f64], interior: &[u32]) -> f64 {
    interior
        .iter()
        .map(|&v| g[v as usize].norm() / lumped[v as usize])
        .fold(0.0, f64::max)
}

fn precond_norm_sq(g: &[Complex64], lumped: &[f64], interior: &[u32]) -> f64 {
    interior.iter().map(|&v| g[v as usize].norm_sqr() / lumped[v as usize]).sum()
}

/// Minimizes E*_A over interior vertices with the boundary fixed to the trace
/// of `h0`. See the module docs for the scheme.
pub fn minimize(
    mesh: &DiskMesh,
    h0: &CircleHomeo,
    cfg: &MinimizeConfig,
    init: Init,
) -> Result<MinimizeResult> {
    cfg.validate()?;
    let ws = EnergyWorkspace::new(mesh)?;
    let interior: Vec<u32> = mesh.interior_ids().to_vec();

    // Initial iterate.
    let mut vals = match &init {
        Init::FromMap(map) => {
            map.assert_on(mesh)?;
            map.values().to_vec()
        }
        _ => harmonic_extension_fem(mesh, h0)?.values().to_vec(),
    };
    // Pin boundary entries exactly to the trace.
    let trace = trace_on_mesh(h0, mesh);
    for (j, &b) in mesh.boundary_ids().iter().enumerate() {
        vals[b as usize] = trace[j];
    }
    if let Init::Perturbed(seed) = init {
        let harmonic = vals.clone();
        let mut rng = substream(seed, "perturbed-init", 0);
        let amp = 0.05 * mesh.max_edge_len();
        let noise: Vec<Complex64> = interior
            .iter()
            .map(|_| {
                let r = amp * rng.gen_range(0.0f64..1.0).sqrt();
                let th = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                Complex64::from_polar(r, th)
            })
            .collect();
        // Backtrack toward the harmonic start until feasible.
        let mut scale = 1.0;
        loop {
            for (p, &v) in interior.iter().enumerate() {
                vals[v as usize] = harmonic[v as usize] + scale * noise[p];
            }
            if ws.min_j(&vals) > 0.0 {
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                for &v in &interior {
                    vals[v as usize] = harmonic[v as usize];
                }
                break;
            }
        }
    }

    let init_min_j = ws.min_j(&vals);
    if init_min_j <= 0.0 {
        return Err(Error::InitInfeasible(format!(
            "harmonic start has min J = {init_min_j:e}; refine the mesh"
        )));
    }
    let j_floor = cfg.jac_floor * init_min_j;

    let (mut energy, mut min_j) = ws.energy_min_j(&cfg.profile, &vals);
    let mut grad = ws.gradient(&cfg.profile, &vals, |v| mesh.is_boundary(v))?;
    let mut gnorm = sup_norm_per_area(&grad, &ws.lumped, &interior);

    let mut history = vec![HistoryRow { iter: 0, energy, grad_norm: gnorm, min_j }];
    let mut iterations = 0usize;
    let mut converged = gnorm <= cfg.grad_tol;

    // Step-length state.
    let mut t_prev: Option<f64> = None;
    let mut prev_step: Option<(Vec<Complex64>, Vec<Complex64>)> = None; // (s, y)

    const MAX_BACKTRACKS: usize = 40;

    while !converged && iterations < cfg.max_iters {
        // Direction: area-preconditioned negative gradient.
        let dir: Vec<Complex64> = interior
            .iter()
            .map(|&v| -grad[v as usize] / ws.lumped[v as usize])
            .collect();
        let gd: f64 = interior
            .iter()
            .zip(&dir)
            .map(|(&v, d)| (grad[v as usize].conj() * d).re)
            .sum();
        if !(gd < 0.0) {
            // Gradient numerically zero; nothing left to do.
            break;
        }

        // Barzilai-Borwein step from the last accepted (s, y) pair, in the
        // preconditioner metric; fall back to a mesh-scaled first step.
        let mut t = match &prev_step {
            Some((s, y)) => {
                let sy: f64 = s.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum();
                let yy: f64 = interior
                    .iter()
                    .zip(y)
                    .map(|(&v, b)| b.norm_sqr() / ws.lumped[v as usize])
                    .sum();
                if sy > 0.0 && yy > 0.0 {
                    (sy / yy).clamp(1e-12, 1e10)
                } else {
                    t_prev.unwrap_or(1.0) * 2.0
                }
            }
            None => {
                let dmax = dir.iter().map(|d| d.norm()).fold(0.0, f64::max);
                if dmax > 0.0 {
                    0.1 * mesh.max_edge_len() / dmax
                } else {
                    1.0
                }
            }
        };

        let mut accepted = false;
        let mut trial = vals.clone();
        for _bt in 0..MAX_BACKTRACKS {
            for (p, &v) in interior.iter().enumerate() {
                trial[v as usize] = vals[v as usize] + t * dir[p];
            }
            let trial_min_j = ws.min_j(&trial);
            if trial_min_j >= j_floor && trial_min_j.is_finite() {
                let (e_t, _) = ws.energy_min_j(&cfg.profile, &trial);
                let armijo = e_t <= energy + cfg.armijo_c * t * gd;
                let float_floor = (cfg.armijo_c * t * gd).abs() <= 8.0 * f64::EPSILON * energy.abs();
                // When energy differences drop below float resolution, accept
                // on gradient decrease instead so the iterate keeps polishing.
                let floor_mode = !armijo && float_floor && e_t <= energy * (1.0 + 8.0 * f64::EPSILON);
                if armijo || floor_mode {
                    let g_t = ws.gradient(&cfg.profile, &trial, |v| mesh.is_boundary(v))?;
                    let gnorm_t = sup_norm_per_area(&g_t, &ws.lumped, &interior);
                    let undershoot = gnorm > cfg.grad_tol && gnorm_t < 0.25 * cfg.grad_tol;
                    let floor_progress = !floor_mode
                        || precond_norm_sq(&g_t, &ws.lumped, &interior)
                            < precond_norm_sq(&grad, &ws.lumped, &interior);
                    if !undershoot && floor_progress {
                        let e_rec = if floor_mode { e_t.min(energy) } else { e_t };
                        accept_step(
                            &mut vals, &trial, &mut grad, g_t, &mut energy, e_rec, &mut min_j,
                            trial_min_j, &mut prev_step, &interior, t,
                        );
                        t_prev = Some(t);
                        accepted = true;
                        break;
                    }
                }
            }
            t *= cfg.shrink;
        }
        if !accepted {
            return Err(Error::Stall(format!(
                "no acceptable step after {MAX_BACKTRACKS} reductions at iteration {iterations} \
                 (energy {energy:.6e}, grad_norm {gnorm:.3e}, min_J {min_j:.3e})"
            )));
        }

        iterations += 1;
        gnorm = sup_norm_per_area(&grad, &ws.lumped, &interior);
        history.push(HistoryRow { iter: iterations, energy, grad_norm: gnorm, min_j });
        converged = gnorm <= cfg.grad_tol;
    }

    let map = DiscreteMap::new(mesh, vals)?;
    Ok(MinimizeResult {
        map,
        energy,
        iterations,
        final_grad_norm: gnorm,
        min_j,
        converged,
        history,
    })
}

#[allow(clippy::too_many_arguments)]
fn accept_step(
    vals: &mut Vec<Complex64>,
    trial: &[Complex64],
    grad: &mut Vec<Complex64>,
    g_new: Vec<Complex64>,
    energy: &mut f64,
    e_new: f64,
    min_j: &mut f64,
    new_min_j: f64,
    prev_step: &mut Option<(Vec<Complex64>, Vec<Complex64>)>,
    interior: &[u32],
    _t: f64,
) {
    let s: Vec<Complex64> =
        interior.iter().map(|&v| trial[v as usize] - vals[v as usize]).collect();
    let y: Vec<Complex64> =
        interior.iter().map(|&v| g_new[v as usize] - grad[v as usize]).collect();
    *prev_step = Some((s, y));
    vals.copy_from_slice(trial);
    *grad = g_new;
    *energy = e_new;
    *min_j = new_min_j;
}

/// Report from [`uniqueness_probe`].
#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub runs: Vec<RunSummary>,
    /// Upper-triangle pairwise max vertex distances, indexed (i, j).
    pub pairwise_linf: Vec<PairwiseEntry>,
    pub max_pairwise_linf: f64,
    pub energy_spread: f64,
    pub all_converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub init: String,
    pub energy: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub min_j: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairwiseEntry {
    pub i: usize,
    pub j: usize,
    pub linf: f64,
}

/// Runs `minimize` from the harmonic start plus `n_restarts - 1` perturbed
/// starts and reports pairwise distances of the converged maps.
///
/// A restart that fails to converge flags the report rather than erroring.
pub fn uniqueness_probe(
    mesh: &DiskMesh,
    h0: &CircleHomeo,
    cfg: &MinimizeConfig,
    n_restarts: usize,
    seed: u64,
) -> Result<(UniquenessReport, Vec<MinimizeResult>)> {
    if n_restarts < 2 {
        return Err(Error::Domain("uniqueness probe requires n_restarts >= 2".into()));
    }
    let mut results = Vec::with_capacity(n_restarts);
    let mut runs = Vec::with_capacity(n_restarts);
    for r in 0..n_restarts {
        let (init, init_name) = if r == 0 {
            (Init::Harmonic, "harmonic".to_string())
        } else {
            let s = crate::seeding::substream_u64(seed, "restart", r as u64);
            (Init::Perturbed(s), format!("perturbed({s})"))
        };
        let res = minimize(mesh, h0, cfg, init)?;
        runs.push(RunSummary {
            init: init_name,
            energy: res.energy,
            iterations: res.iterations,
            final_grad_norm: res.final_grad_norm,
            min_j: res.min_j,
            converged: res.converged,
        });
        results.push(res);
    }
    let mut pairwise = Vec::new();
    let mut max_linf = 0.0f64;
    for i in 0..n_restarts {
        for j in i + 1..n_restarts {
            let d = results[i].map.linf_distance(&results[j].map)?;
            max_linf = max_linf.max(d);
            pairwise.push(PairwiseEntry { i, j, linf: d });
        }
    }
    let energies: Vec<f64> = results.iter().map(|r| r.energy).collect();
    let spread = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let all_converged = results.iter().all(|r| r.converged);
    Ok((
        UniquenessReport {
            runs,
            pairwise_linf: pairwise,
            max_pairwise_linf: max_linf,
            energy_spread: spread,
            all_converged,
        },
        results,
    ))
}
