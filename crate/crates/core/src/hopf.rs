//! The Ahlfors-Hopf differential Phi = A'(K) h_w conj(h_wbar) and a discrete
//! measure of how close it is to holomorphic.
//!
//! Holomorphicity is probed per interior vertex by a weighted least-squares
//! fit of a complex-linear function a + b w to the barycenter samples of Phi
//! over the vertex's triangle star; the normalized RMS misfit is the
//! Cauchy-Riemann residual. Local fits are robust on unstructured stars and
//! match the order of accuracy of the PL fields.

use num_complex::Complex64;
use serde::Serialize;

use crate::distortion::distortion;
use crate::error::{Error, Result};
use crate::mesh::{wirtinger, DiscreteMap, DiskMesh};
use crate::profile::EnergyProfile;

/// Summary statistics of the Cauchy-Riemann residuals.
#[derive(Clone, Debug, Serialize)]
pub struct HopfSummary {
    pub l1_residual: f64,
    pub l2_residual: f64,
    pub max_residual: f64,
    pub refinement_level: u32,
    /// sup over fully interior triangles of |h_w| + |h_wbar| (local Lipschitz
    /// witness, informational).
    pub lipschitz_witness: f64,
}

/// Per-triangle Hopf differential samples with per-interior-vertex residuals.
#[derive(Clone, Debug)]
pub struct HopfField {
    /// Phi on each triangle (barycenter sample of the PL field).
    pub phi: Vec<Complex64>,
    /// Triangle barycenters, aligned with `phi`.
    pub barycenters: Vec<Complex64>,
    /// Cauchy-Riemann residual per interior vertex, aligned with
    /// `mesh.interior_ids()`.
    pub cr_residual: Vec<f64>,
    pub summary: HopfSummary,
}

/// Residual normalization floor: regions with Phi near zero (conformal spots)
/// must not blow up relative residuals.
const PHI_SCALE_FLOOR: f64 = 1e-14;

/// Computes the Hopf field and its discrete holomorphicity residuals.
pub fn hopf_field(mesh: &DiskMesh, map: &DiscreteMap, profile: &EnergyProfile) -> Result<HopfField> {
    map.assert_on(mesh)?;
    let derivs = wirtinger(mesh, map)?;
    let field = distortion(&derivs);
    if !field.admissible() {
        let (index, jac) = field.worst_triangle();
        return Err(Error::InadmissibleMap { index, jac });
    }
    let nt = mesh.n_triangles();
    let mut phi = Vec::with_capacity(nt);
    let mut barycenters = Vec::with_capacity(nt);
    let mut lipschitz = 0.0f64;
    for t in 0..nt {
        let d = &field.tris[t];
        phi.push(profile.deriv(d.k) * d.h_w * d.h_wbar.conj());
        let [i, j, k] = mesh.triangles()[t];
        barycenters.push(
            (mesh.vertices()[i as usize] + mesh.vertices()[j as usize] + mesh.vertices()[k as usize])
                / 3.0,
        );
        let fully_interior = mesh.triangles()[t]
            .iter()
            .all(|&v| !mesh.is_boundary(v as usize));
        if fully_interior {
            lipschitz = lipschitz.max(d.h_w.norm() + d.h_wbar.norm());
        }
    }

    let star = mesh.vertex_to_triangles();
    let mut cr_residual = Vec::with_capacity(mesh.interior_ids().len());
    for &vi in mesh.interior_ids() {
        let tris = &star[vi as usize];
        cr_residual.push(star_fit_residual(mesh, &phi, &barycenters, tris));
    }

    let n = cr_residual.len().max(1) as f64;
    let l1 = cr_residual.iter().sum::<f64>() / n;
    let l2 = (cr_residual.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let max = cr_residual.iter().cloned().fold(0.0, f64::max);
    Ok(HopfField {
        phi,
        barycenters,
        cr_residual,
        summary: HopfSummary {
            l1_residual: l1,
            l2_residual: l2,
            max_residual: max,
            refinement_level: mesh.refinement_level(),
            lipschitz_witness: lipschitz,
        },
    })
}

/// Weighted LS fit of a + b w over the star; returns RMS misfit / local scale.
fn star_fit_residual(
    mesh: &DiskMesh,
    phi: &[Complex64],
    barycenters: &[Complex64],
    tris: &[u32],
) -> f64 {
    let mut s_w = 0.0f64;
    let mut s_c = Complex64::new(0.0, 0.0);
    let mut s_cc = 0.0f64;
    let mut s_p = Complex64::new(0.0, 0.0);
    let mut s_cp = Complex64::new(0.0, 0.0);
    let mut s_pp = 0.0f64;
    for &t in tris {
        let w = mesh.triangle_area(t as usize);
        let c = barycenters[t as usize];
        let p = phi[t as usize];
        s_w += w;
        s_c += w * c;
        s_cc += w * c.norm_sqr();
        s_p += w * p;
        s_cp += w * c.conj() * p;
        s_pp += w * p.norm_sqr();
    }
    // Normal equations for min sum w |p - (a + b c)|^2:
    //   [s_w      s_c   ] [a]   [s_p ]
    //   [conj(s_c) s_cc ] [b] = [s_cp]
    let det = s_w * s_cc - s_c.norm_sqr();
    if det <= 0.0 {
        return 0.0;
    }
    let a = (s_cc * s_p - s_c * s_cp) / det;
    let b = (s_w * s_cp - s_c.conj() * s_p) / det;
    // Misfit accumulated directly; the quadratic-form shortcut would square
    // the cancellation for near-exact fits.
    let mut ss = 0.0f64;
    for &t in tris {
        let w = mesh.triangle_area(t as usize);
        let r = phi[t as usize] - (a + b * barycenters[t as usize]);
        ss += w * r.norm_sqr();
    }
    let rms = (ss / s_w).sqrt();
    let scale = (s_pp / s_w).sqrt();
    rms / (scale + PHI_SCALE_FLOOR)
}

/// Verifies, triangle by triangle, the algebraic identity
/// A'(K) h_w conj(h_wbar) = K A'(K) J conj(mu) / (1 + |mu|^2)
/// and returns the maximum relative discrepancy. Triangles with J = 0 are
/// skipped (the convention K = 1 breaks the right-hand side there).
pub fn identity_check_26(mesh: &DiskMesh, map: &DiscreteMap, profile: &EnergyProfile) -> Result<f64> {
    map.assert_on(mesh)?;
    let derivs = wirtinger(mesh, map)?;
    let field = distortion(&derivs);
    if !field.admissible() {
        let (index, jac) = field.worst_triangle();
        return Err(Error::InadmissibleMap { index, jac });
    }
    let mut worst = 0.0f64;
    for d in &field.tris {
        if d.jac == 0.0 {
            continue;
        }
        let lhs = profile.deriv(d.k) * d.h_w * d.h_wbar.conj();
        let mu = d.mu.expect("J > 0 implies h_w != 0");
        let rhs = d.k * profile.deriv(d.k) * d.jac * mu.conj() / (1.0 + mu.norm_sqr());
        let denom = lhs.norm().max(rhs.norm());
        if denom > 0.0 {
            worst = worst.max((lhs - rhs).norm() / denom);
        }
    }
    Ok(worst)
}

/// Checks the chained lower-bound inequalities behind |Phi| >= c K^p J on
/// |mu| >= 1/2:   |Phi| = K A'(K) J |mu|/(1+|mu|^2)   (identity),
///                K A'(K) >= p A(K)                    (profile condition),
///                A(K) >= K                            (growth floor).
/// Returns the worst relative slack of each step (negative = violated).
pub fn lower_bound_margins(
    mesh: &DiskMesh,
    map: &DiscreteMap,
    profile: &EnergyProfile,
) -> Result<(f64, f64, f64)> {
    map.assert_on(mesh)?;
    let derivs = wirtinger(mesh, map)?;
    let field = distortion(&derivs);
    let mut id_worst = f64::INFINITY;
    let mut acond_worst = f64::INFINITY;
    let mut floor_worst = f64::INFINITY;
    for d in &field.tris {
        if d.jac <= 0.0 {
            continue;
        }
        let mu = d.mu.expect("J > 0 implies h_w != 0");
        let phi_mag = (profile.deriv(d.k) * d.h_w * d.h_wbar.conj()).norm();
        let identity_rhs = d.k * profile.deriv(d.k) * d.jac * mu.norm() / (1.0 + mu.norm_sqr());
        let scale = phi_mag.max(identity_rhs).max(1e-300);
        id_worst = id_worst.min(1.0 - (phi_mag - identity_rhs).abs() / scale);
        let ka = d.k * profile.deriv(d.k);
        let pa = profile.p() * profile.eval(d.k);
        acond_worst = acond_worst.min((ka - pa) / pa + 1e-12);
        floor_worst = floor_worst.min((profile.eval(d.k) - d.k) / d.k + 1e-12);
    }
    Ok((id_worst, acond_worst, floor_worst))
}
