//! Pointwise distortion quantities, the two conformal energies, and the
//! duality check E*_A(h) = E_A(h^{-1}).
//!
//! All integrands are triangle-wise constant for piecewise-linear maps, so the
//! energy sums are exact one-point quadratures; the only approximation in the
//! duality gap is the resampling of the inverse onto the canonical mesh.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{wirtinger, DiscreteMap, DiskMesh, PointLocator, WirtingerDerivs};
use crate::profile::EnergyProfile;

/// Distortion data of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct TriDistortion {
    pub h_w: Complex64,
    pub h_wbar: Complex64,
    /// J = |h_w|^2 - |h_wbar|^2.
    pub jac: f64,
    /// |h_w|^2 + |h_wbar|^2.
    pub normsq: f64,
    /// Distortion; 1 where J = 0 by convention, +inf sentinel where J < 0.
    pub k: f64,
    /// Beltrami coefficient h_wbar / h_w, when h_w != 0.
    pub mu: Option<Complex64>,
    pub orientation_reversing: bool,
}

/// Per-triangle distortion record for a whole map.
#[derive(Clone, Debug)]
pub struct DistortionField {
    pub tris: Vec<TriDistortion>,
}

impl DistortionField {
    pub fn min_jac(&self) -> f64 {
        self.tris.iter().map(|t| t.jac).fold(f64::INFINITY, f64::min)
    }

    pub fn max_k(&self) -> f64 {
        self.tris.iter().map(|t| t.k).fold(1.0, f64::max)
    }

    /// Index and Jacobian of the worst (most negative J) triangle.
    pub fn worst_triangle(&self) -> (usize, f64) {
        self.tris
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.jac.partial_cmp(&b.1.jac).unwrap())
            .map(|(i, t)| (i, t.jac))
            .unwrap_or((0, f64::INFINITY))
    }

    /// Admissible: no orientation-reversing triangle (J >= 0 everywhere).
    pub fn admissible(&self) -> bool {
        !self.tris.iter().any(|t| t.orientation_reversing)
    }
}

/// Computes per-triangle distortion from Wirtinger derivatives.
///
/// Inadmissibility (J < 0) is data, not an error: such triangles are flagged
/// and carry K = +inf.
pub fn distortion(derivs: &WirtingerDerivs) -> DistortionField {
    let tris = derivs
        .h_w
        .iter()
        .zip(&derivs.h_wbar)
        .map(|(&hw, &hwb)| {
            let a2 = hw.norm_sqr();
            let b2 = hwb.norm_sqr();
            let jac = a2 - b2;
            let normsq = a2 + b2;
            let (k, orientation_reversing) = if jac > 0.0 {
                (normsq / jac, false)
            } else if jac == 0.0 {
                (1.0, false)
            } else {
                (f64::INFINITY, true)
            };
            let mu = if a2 > 0.0 { Some(hwb / hw) } else { None };
            TriDistortion { h_w: hw, h_wbar: hwb, jac, normsq, k, mu, orientation_reversing }
        })
        .collect();
    DistortionField { tris }
}

/// Deterministic pairwise-tree summation; independent of any parallel schedule
/// that produced the slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn admissible_distortion(mesh: &DiskMesh, map: &DiscreteMap) -> Result<DistortionField> {
    let derivs = wirtinger(mesh, map)?;
    let field = distortion(&derivs);
    if !field.admissible() {
        let (index, jac) = field.worst_triangle();
        return Err(Error::InadmissibleMap { index, jac });
    }
    Ok(field)
}

/// E*_A(h) = sum over triangles of area * A(K) * J. Exact for PL maps.
pub fn energy_star(mesh: &DiskMesh, map: &DiscreteMap, profile: &EnergyProfile) -> Result<f64> {
    let field = admissible_distortion(mesh, map)?;
    let terms: Vec<f64> = field
        .tris
        .iter()
        .enumerate()
        .map(|(t, d)| {
            if d.jac == 0.0 {
                0.0
            } else {
                mesh.triangle_area(t) * profile.eval(d.k) * d.jac
            }
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// E_A(f) = sum over triangles of area * A(K); no Jacobian weight.
pub fn energy_plain(mesh: &DiskMesh, map: &DiscreteMap, profile: &EnergyProfile) -> Result<f64> {
    let field = admissible_distortion(mesh, map)?;
    let terms: Vec<f64> = field
        .tris
        .iter()
        .enumerate()
        .map(|(t, d)| mesh.triangle_area(t) * profile.eval(d.k))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Dirichlet energy sum over triangles of area * (|h_w|^2 + |h_wbar|^2);
/// equals E*_A for A(t) = t on admissible maps.
pub fn dirichlet_energy(mesh: &DiskMesh, map: &DiscreteMap) -> Result<f64> {
    let derivs = wirtinger(mesh, map)?;
    let terms: Vec<f64> = derivs
        .h_w
        .iter()
        .zip(&derivs.h_wbar)
        .enumerate()
        .map(|(t, (hw, hwb))| mesh.triangle_area(t) * (hw.norm_sqr() + hwb.norm_sqr()))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Samples the inverse of an admissible bijection back onto the same mesh.
///
/// Interior vertices are located in the image triangulation and inverted
/// through the containing triangle's affine map. When the boundary trace lies
/// on the unit circle, boundary vertices invert the discrete boundary circle
/// homeomorphism (piecewise linear in angle); otherwise they extrapolate from
/// the least-violating image triangle. An interior vertex not covered by the
/// image yields [`Error::Coverage`], which signals that the forward map is not
/// surjective at mesh resolution.
pub fn resample_inverse(mesh: &DiskMesh, map: &DiscreteMap) -> Result<DiscreteMap> {
    map.assert_on(mesh)?;
    let field = {
        let derivs = wirtinger(mesh, map)?;
        distortion(&derivs)
    };
    let bad = field.tris.iter().enumerate().find(|(_, d)| d.jac <= 0.0);
    if let Some((index, d)) = bad {
        return Err(Error::InadmissibleMap { index, jac: d.jac });
    }

    let image = map.values();
    let triangles = mesh.triangles();
    let mut locator = PointLocator::new(mesh, image, triangles);
    let mut out = vec![Complex64::new(0.0, 0.0); mesh.n_vertices()];

    // Boundary: invert the discrete circle homeomorphism when the trace is on
    // the circle.
    let bids = mesh.boundary_ids();
    let nb = bids.len();
    let on_circle = bids
        .iter()
        .all(|&b| (image[b as usize].norm() - 1.0).abs() <= 1e-9);
    if on_circle && nb > 0 {
        // Unwrap image angles to an increasing lift psi_0 <= ... <= psi_{nb}.
        let mut psi = Vec::with_capacity(nb + 1);
        let mut prev = image[bids[0] as usize].arg();
        psi.push(prev);
        for j in 1..nb {
            let mut a = image[bids[j] as usize].arg();
            while a <= prev {
                a += 2.0 * std::f64::consts::PI;
            }
            if a - prev >= 2.0 * std::f64::consts::PI {
                return Err(Error::Domain(
                    "boundary trace of the map is not monotone on the circle".into(),
                ));
            }
            psi.push(a);
            prev = a;
        }
        psi.push(psi[0] + 2.0 * std::f64::consts::PI);
        let theta = mesh.boundary_angles();
        // Lifted domain angles (same winding as psi).
        let mut theta_lift = Vec::with_capacity(nb + 1);
        let mut prev = theta[0];
        theta_lift.push(prev);
        for &t in theta.iter().skip(1) {
            let mut a = t;
            while a <= prev {
                a += 2.0 * std::f64::consts::PI;
            }
            theta_lift.push(a);
            prev = a;
        }
        theta_lift.push(theta_lift[0] + 2.0 * std::f64::consts::PI);

        for (j, &b) in bids.iter().enumerate() {
            // Bring theta_j into [psi_0, psi_0 + 2 pi).
            let mut target = theta[j];
            while target < psi[0] {
                target += 2.0 * std::f64::consts::PI;
            }
            while target >= psi[0] + 2.0 * std::f64::consts::PI {
                target -= 2.0 * std::f64::consts::PI;
            }
            let seg = match psi.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
                Ok(s) => s.min(nb - 1),
                Err(s) => s.saturating_sub(1).min(nb - 1),
            };
            let s = (target - psi[seg]) / (psi[seg + 1] - psi[seg]);
            let tau = theta_lift[seg] + s * (theta_lift[seg + 1] - theta_lift[seg]);
            out[b as usize] = Complex64::from_polar(1.0, tau);
        }
    } else {
        for &b in bids {
            let q = mesh.vertices()[b as usize];
            let (t, l) = locator.locate_or_nearest(q);
            let [i, j, k] = triangles[t];
            out[b as usize] = l[0] * mesh.vertices()[i as usize]
                + l[1] * mesh.vertices()[j as usize]
                + l[2] * mesh.vertices()[k as usize];
        }
    }

    for &vi in mesh.interior_ids() {
        let q = mesh.vertices()[vi as usize];
        let (t, l) = locator.locate(q).ok_or(Error::Coverage { vertex: vi as usize })?;
        let [i, j, k] = triangles[t];
        out[vi as usize] = l[0] * mesh.vertices()[i as usize]
            + l[1] * mesh.vertices()[j as usize]
            + l[2] * mesh.vertices()[k as usize];
    }

    DiscreteMap::new(mesh, out)
}

/// |E*_A(h) - E_A(resample_inverse(h))| / E*_A(h).
pub fn duality_gap(mesh: &DiskMesh, map: &DiscreteMap, profile: &EnergyProfile) -> Result<f64> {
    let e_star = energy_star(mesh, map, profile)?;
    let inv = resample_inverse(mesh, map)?;
    let e_plain = energy_plain(mesh, &inv, profile)?;
    Ok((e_star - e_plain).abs() / e_star)
}

/// Quantiles of the per-triangle distortion K.
#[derive(Clone, Debug, Serialize)]
pub struct KQuantiles {
    pub q00: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
    pub q99: f64,
    pub q100: f64,
}

/// Flat diagnostics document for the duality check.
#[derive(Clone, Debug, Serialize)]
pub struct DualityDiagnostics {
    pub energy_star: f64,
    pub energy_plain_of_inverse: f64,
    pub duality_gap: f64,
    pub min_j: f64,
    pub max_k: f64,
    pub k_quantiles: KQuantiles,
}

/// Runs the full duality diagnostic on an admissible bijection.
pub fn duality_diagnostics(
    mesh: &DiskMesh,
    map: &DiscreteMap,
    profile: &EnergyProfile,
) -> Result<DualityDiagnostics> {
    let field = admissible_distortion(mesh, map)?;
    let e_star = energy_star(mesh, map, profile)?;
    let inv = resample_inverse(mesh, map)?;
    let e_plain = energy_plain(mesh, &inv, profile)?;
    let mut ks: Vec<f64> = field.tris.iter().map(|t| t.k).collect();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |frac: f64| ks[((ks.len() - 1) as f64 * frac).round() as usize];
    Ok(DualityDiagnostics {
        energy_star: e_star,
        energy_plain_of_inverse: e_plain,
        duality_gap: (e_star - e_plain).abs() / e_star,
        min_j: field.min_jac(),
        max_k: field.max_k(),
        k_quantiles: KQuantiles {
            q00: q(0.0),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q90: q(0.9),
            q99: q(0.99),
            q100: q(1.0),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use crate::profile::power_profile;

    fn derivs_of(pairs: &[(Complex64, Complex64)]) -> WirtingerDerivs {
        WirtingerDerivs {
            h_w: pairs.iter().map(|p| p.0).collect(),
            h_wbar: pairs.iter().map(|p| p.1).collect(),
        }
    }

    #[test]
    fn distortion_examples() {
        let c = Complex64::new;
        let f = distortion(&derivs_of(&[(c(1.0, 0.0), c(0.0, 0.0))]));
        assert_eq!(f.tris[0].jac, 1.0);
        assert_eq!(f.tris[0].k, 1.0);
        assert_eq!(f.tris[0].mu.unwrap(), c(0.0, 0.0));

        // Direct arithmetic on (1, 0.5): J = 0.75, normsq = 1.25, K = 5/3.
        let f = distortion(&derivs_of(&[(c(1.0, 0.0), c(0.5, 0.0))]));
        assert!((f.tris[0].jac - 0.75).abs() < 1e-15);
        assert!((f.tris[0].normsq - 1.25).abs() < 1e-15);
        assert!((f.tris[0].k - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.tris[0].mu.unwrap(), c(0.5, 0.0));

        // J = 0 convention: K = 1.
        let f = distortion(&derivs_of(&[(c(1.0, 0.0), c(1.0, 0.0))]));
        assert_eq!(f.tris[0].jac, 0.0);
        assert_eq!(f.tris[0].k, 1.0);
        assert!(!f.tris[0].orientation_reversing);

        // J < 0: flagged, K = +inf.
        let f = distortion(&derivs_of(&[(c(0.0, 0.0), c(1.0, 0.0))]));
        assert!(f.tris[0].orientation_reversing);
        assert!(f.tris[0].k.is_infinite());
        assert!(f.tris[0].mu.is_none());
    }

    #[test]
    fn k_identities_where_positive() {
        // Where J > 0: K J = normsq and K = (1 + |mu|^2)/(1 - |mu|^2).
        let c = Complex64::new;
        let f = distortion(&derivs_of(&[
            (c(1.2, -0.3), c(0.4, 0.5)),
            (c(2.0, 1.0), c(0.0, 0.0)),
        ]));
        for t in &f.tris {
            assert!(t.jac > 0.0);
            assert!((t.k * t.jac - t.normsq).abs() <= 1e-12 * t.normsq);
            let mu = t.mu.unwrap().norm_sqr();
            assert!((t.k - (1.0 + mu) / (1.0 - mu)).abs() <= 1e-12 * t.k);
        }
    }

    #[test]
    fn operator_norm_reconciliation() {
        // (|h_w| + |h_wbar|)^2 <= K_op J with K_op = (1+|mu|)/(1-|mu|), and
        // K = (K_op + 1/K_op)/2.
        let c = Complex64::new;
        let f = distortion(&derivs_of(&[(c(1.0, 0.5), c(-0.2, 0.6))]));
        let t = &f.tris[0];
        let mu = t.mu.unwrap().norm();
        let k_op = (1.0 + mu) / (1.0 - mu);
        let lhs = (t.h_w.norm() + t.h_wbar.norm()).powi(2);
        assert!(lhs <= k_op * t.jac * (1.0 + 1e-12));
        assert!((t.k - 0.5 * (k_op + 1.0 / k_op)).abs() <= 1e-12 * t.k);
    }

    #[test]
    fn k_rotation_invariance() {
        let c = Complex64::new;
        let base = (c(1.1, 0.2), c(0.3, -0.4));
        let k0 = distortion(&derivs_of(&[base])).tris[0].k;
        for alpha in [0.3, 1.2, -2.5] {
            let r = Complex64::from_polar(1.0, alpha);
            // Post-rotation multiplies both derivatives by the phase.
            let k1 = distortion(&derivs_of(&[(base.0 * r, base.1 * r)])).tris[0].k;
            // Pre-rotation by alpha sends (h_w, h_wbar) to (h_w r, h_wbar conj(r)).
            let k2 = distortion(&derivs_of(&[(base.0 * r, base.1 * r.conj())])).tris[0].k;
            assert!((k1 - k0).abs() <= 1e-14 * k0);
            assert!((k2 - k0).abs() <= 1e-14 * k0);
        }
    }

    #[test]
    fn energy_star_identity() {
        let mesh = build_disk_mesh(4).unwrap();
        let id = DiscreteMap::identity_on(&mesh);
        for p in [1.0, 2.0, 3.0] {
            let prof = power_profile(p).unwrap();
            let e = energy_star(&mesh, &id, &prof).unwrap();
            assert!((e - mesh.total_area()).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_constant_field_closed_form() {
        // h(z) = z + 0.5 conj(z): K = 5/3, J = 3/4 on every triangle, so for
        // p = 2 the energy is (5/3)^2 (3/4) * mesh area, i.e. 25 pi / 12 in the
        // refinement limit (6.5450 to four decimals).
        let mesh = build_disk_mesh(4).unwrap();
        let map = DiscreteMap::from_fn(&mesh, |z| z + 0.5 * z.conj());
        let prof = power_profile(2.0).unwrap();
        let e = energy_star(&mesh, &map, &prof).unwrap();
        let expect = (5.0f64 / 3.0).powi(2) * 0.75 * mesh.total_area();
        assert!((e - expect).abs() < 1e-12 * expect);
        let cont = 25.0 * std::f64::consts::PI / 12.0;
        assert!((e - cont).abs() < 1e-2, "e = {e}, continuum = {cont}");
        assert!((cont - 6.5450).abs() < 1e-4);

        let e_plain = energy_plain(&mesh, &map, &prof).unwrap();
        let expect_plain = (5.0f64 / 3.0).powi(2) * mesh.total_area();
        assert!((e_plain - expect_plain).abs() < 1e-12 * expect_plain);
    }

    #[test]
    fn energy_rotation_invariance() {
        let mesh = build_disk_mesh(3).unwrap();
        let prof = power_profile(2.0).unwrap();
        let id = DiscreteMap::identity_on(&mesh);
        let e0 = energy_star(&mesh, &id, &prof).unwrap();
        for alpha in [0.5, 1.7] {
            let rot = Complex64::from_polar(1.0, alpha);
            let map = DiscreteMap::from_fn(&mesh, |z| rot * z);
            let e = energy_star(&mesh, &map, &prof).unwrap();
            assert!((e - e0).abs() < 1e-12 * e0);
        }
    }

    #[test]
    fn energy_rejects_orientation_reversal() {
        let mesh = build_disk_mesh(3).unwrap();
        let conj = DiscreteMap::from_fn(&mesh, |z| z.conj());
        let prof = power_profile(2.0).unwrap();
        match energy_plain(&mesh, &conj, &prof) {
            Err(Error::InadmissibleMap { jac, .. }) => assert!(jac < 0.0),
            other => panic!("expected inadmissible map, got {other:?}"),
        }
    }

    #[test]
    fn energy_star_dominates_dirichlet() {
        let mesh = build_disk_mesh(3).unwrap();
        let map = DiscreteMap::from_fn(&mesh, |z| z + 0.3 * z.conj() * z.norm_sqr());
        for p in [1.0, 1.5, 2.0] {
            let prof = power_profile(p).unwrap();
            let e = energy_star(&mesh, &map, &prof).unwrap();
            let d = dirichlet_energy(&mesh, &map).unwrap();
            assert!(e >= d - 1e-12 * d, "p={p}: {e} < {d}");
        }
    }

    #[test]
    fn resample_identity_and_rotation() {
        let mesh = build_disk_mesh(3).unwrap();
        let id = DiscreteMap::identity_on(&mesh);
        let inv = resample_inverse(&mesh, &id).unwrap();
        assert!(inv.linf_distance(&id).unwrap() < 1e-12);

        let alpha = 0.8;
        let rot = DiscreteMap::from_fn(&mesh, |z| z * Complex64::from_polar(1.0, alpha));
        let inv = resample_inverse(&mesh, &rot).unwrap();
        let expect = DiscreteMap::from_fn(&mesh, |z| z * Complex64::from_polar(1.0, -alpha));
        assert!(inv.linf_distance(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn resample_linear_map_closed_form() {
        // h(z) = z + 0.25 conj(z) maps the disk onto an ellipse; on the part of
        // the disk the image covers, the PL inverse reproduces the closed-form
        // inverse z -> (z - 0.25 conj(z))/(1 - 0.0625) exactly, because every
        // image triangle carries the same affine map.
        for level in [1, 2] {
            let mesh = build_disk_mesh(level).unwrap();
            let map = DiscreteMap::from_fn(&mesh, |z| z + 0.25 * z.conj());
            let inv = resample_inverse(&mesh, &map).unwrap();
            let expect = DiscreteMap::from_fn(&mesh, |z| (z - 0.25 * z.conj()) / (1.0 - 0.0625));
            assert!(
                inv.linf_distance(&expect).unwrap() < 1e-12,
                "level {level}: {:e}",
                inv.linf_distance(&expect).unwrap()
            );
        }
    }

    #[test]
    fn resample_coverage_error() {
        // A contraction misses interior vertices near the rim.
        let mesh = build_disk_mesh(3).unwrap();
        let map = DiscreteMap::from_fn(&mesh, |z| 0.5 * z);
        match resample_inverse(&mesh, &map) {
            Err(Error::Coverage { .. }) => {}
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn duality_identity_and_rotation_exact() {
        let mesh = build_disk_mesh(4).unwrap();
        let prof = power_profile(2.0).unwrap();
        let id = DiscreteMap::identity_on(&mesh);
        assert!(duality_gap(&mesh, &id, &prof).unwrap() <= 1e-12);
        let rot = DiscreteMap::from_fn(&mesh, |z| z * Complex64::from_polar(1.0, 0.9));
        assert!(duality_gap(&mesh, &rot, &prof).unwrap() <= 1e-12);
    }

    #[test]
    fn duality_radial_stretch() {
        // h(z) = z |z|^{1/2} is a self-homeomorphism of the disk with constant
        // continuum distortion K = 13/12 (singular values (3/2) r^{1/2} and
        // r^{1/2}), so E*_p(h) = E_p(h^{-1}) = (13/12)^p pi exactly. The
        // discrete gap is pure resampling error and shrinks under refinement.
        let prof = power_profile(2.0).unwrap();
        let gap5 = {
            let mesh = build_disk_mesh(5).unwrap();
            let map = DiscreteMap::from_fn(&mesh, |z| z * z.norm().sqrt());
            duality_gap(&mesh, &map, &prof).unwrap()
        };
        assert!(gap5 <= 5e-2, "gap at level 5 = {gap5}");
        let gap4 = {
            let mesh = build_disk_mesh(4).unwrap();
            let map = DiscreteMap::from_fn(&mesh, |z| z * z.norm().sqrt());
            duality_gap(&mesh, &map, &prof).unwrap()
        };
        assert!(gap5 < gap4, "gap should decrease under refinement: {gap4} -> {gap5}");

        // Cross-check both discrete energies against the closed form.
        let mesh = build_disk_mesh(5).unwrap();
        let map = DiscreteMap::from_fn(&mesh, |z| z * z.norm().sqrt());
        let cont = (13.0f64 / 12.0).powi(2) * std::f64::consts::PI;
        let e = energy_star(&mesh, &map, &prof).unwrap();
        assert!((e - cont).abs() / cont < 5e-2, "E* = {e} vs {cont}");
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-10);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
    }
}
