//! Parametric circle homeomorphisms and their traces on mesh boundaries.
//!
//! Only families with closed-form monotonicity certificates are admitted: the
//! sine family, rotations, Moebius boundary traces, and compositions thereof.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::DiskMesh;

/// A degree-1 orientation-preserving homeomorphism of the circle, represented
/// by its lift phi with phi(theta + 2 pi) = phi(theta) + 2 pi.
#[derive(Clone, Debug, PartialEq)]
pub enum CircleHomeo {
    /// phi(theta) = theta + eps sin(m theta); requires |eps| m < 1.
    Sine { eps: f64, m: u32 },
    /// phi(theta) = theta + alpha.
    Rotation { alpha: f64 },
    /// Boundary values of z -> e^{i alpha}(z - a)/(1 - conj(a) z), |a| < 1.
    Mobius { a: Complex64, alpha: f64 },
    /// outer after inner: phi = outer.phi o inner.phi.
    Compose(Box<CircleHomeo>, Box<CircleHomeo>),
}

impl CircleHomeo {
    pub fn identity() -> Self {
        CircleHomeo::Rotation { alpha: 0.0 }
    }

    /// The lifted map.
    pub fn phi(&self, theta: f64) -> f64 {
        match self {
            CircleHomeo::Sine { eps, m } => theta + eps * (*m as f64 * theta).sin(),
            CircleHomeo::Rotation { alpha } => theta + alpha,
            CircleHomeo::Mobius { a, alpha } => {
                // arg of e^{i alpha} e^{i theta} conj(s)/s with s = 1 - conj(a) e^{i theta};
                // Re(s) > 0 so the principal argument is smooth in theta.
                let s = Complex64::new(1.0, 0.0) - a.conj() * Complex64::from_polar(1.0, theta);
                alpha + theta - 2.0 * s.arg()
            }
            CircleHomeo::Compose(outer, inner) => outer.phi(inner.phi(theta)),
        }
    }

    /// Closed-form derivative of the lift; positive for valid parameters.
    pub fn dphi(&self, theta: f64) -> f64 {
        match self {
            CircleHomeo::Sine { eps, m } => 1.0 + eps * *m as f64 * (*m as f64 * theta).cos(),
            CircleHomeo::Rotation { .. } => 1.0,
            CircleHomeo::Mobius { a, .. } => {
                let s = Complex64::new(1.0, 0.0) - a.conj() * Complex64::from_polar(1.0, theta);
                (1.0 - a.norm_sqr()) / s.norm_sqr()
            }
            CircleHomeo::Compose(outer, inner) => outer.dphi(inner.phi(theta)) * inner.dphi(theta),
        }
    }

    /// Boundary value on the circle at angle theta.
    pub fn value(&self, theta: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.phi(theta))
    }

    /// Minimum of phi' over an n-point grid (closed form per family).
    pub fn monotone_margin(&self, n: usize) -> f64 {
        (0..n)
            .map(|i| self.dphi(2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Quasisymmetry estimate: sup over a grid of
    /// |phi(theta+t) - phi(theta)| / |phi(theta) - phi(theta-t)|.
    pub fn modulus_estimate(&self, n_grid: usize) -> f64 {
        let mut worst = 1.0f64;
        let steps: Vec<f64> = (0..12)
            .map(|j| std::f64::consts::PI / (1 << j) as f64)
            .collect();
        for i in 0..n_grid {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n_grid as f64;
            let phi0 = self.phi(theta);
            for &t in &steps {
                let fwd = self.phi(theta + t) - phi0;
                let bwd = phi0 - self.phi(theta - t);
                if bwd > 0.0 {
                    worst = worst.max(fwd / bwd).max(bwd / fwd);
                }
            }
        }
        worst
    }

    /// Parses `"sine:eps=0.3,m=1"`, `"rot:alpha=0.7"`, `"mobius:a=0.3+0.1i"`
    /// (optionally with `,alpha=...`) or `"id"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "id" || spec == "identity" {
            return Ok(CircleHomeo::identity());
        }
        let (family, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("bad boundary spec {spec:?}")))?;
        let mut kv = std::collections::BTreeMap::new();
        for item in rest.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad boundary parameter {item:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get_f64 = |kv: &std::collections::BTreeMap<String, String>, key: &str| -> Result<f64> {
            kv.get(key)
                .ok_or_else(|| Error::Parse(format!("boundary spec missing {key:?}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad value for {key:?}")))
        };
        match family {
            "sine" => {
                let eps = get_f64(&kv, "eps")?;
                let m = kv
                    .get("m")
                    .ok_or_else(|| Error::Parse("boundary spec missing \"m\"".into()))?
                    .parse()
                    .map_err(|_| Error::Parse("bad value for \"m\"".into()))?;
                sine_family(eps, m)
            }
            "rot" => Ok(CircleHomeo::Rotation { alpha: get_f64(&kv, "alpha")? }),
            "mobius" => {
                let a = parse_complex(
                    kv.get("a")
                        .ok_or_else(|| Error::Parse("boundary spec missing \"a\"".into()))?,
                )?;
                let alpha = if kv.contains_key("alpha") { get_f64(&kv, "alpha")? } else { 0.0 };
                mobius_boundary(a, alpha)
            }
            other => Err(Error::Parse(format!("unknown boundary family {other:?}"))),
        }
    }

    /// Canonical spec string (inverse of `parse` for the base families).
    pub fn spec_string(&self) -> String {
        match self {
            CircleHomeo::Sine { eps, m } => format!("sine:eps={eps},m={m}"),
            CircleHomeo::Rotation { alpha } => format!("rot:alpha={alpha}"),
            CircleHomeo::Mobius { a, alpha } => {
                format!("mobius:a={}{}{}i,alpha={alpha}", a.re, if a.im < 0.0 { "" } else { "+" }, a.im)
            }
            CircleHomeo::Compose(o, i) => format!("compose({},{})", o.spec_string(), i.spec_string()),
        }
    }
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let s = s.trim();
    let body = s.strip_suffix('i').unwrap_or(s);
    let has_i = s.ends_with('i');
    if !has_i {
        let re: f64 = s.parse().map_err(|_| Error::Parse(format!("bad complex {s:?}")))?;
        return Ok(Complex64::new(re, 0.0));
    }
    // Split "a+bi"/"a-bi" at the sign of the imaginary part (skipping a leading sign).
    for (pos, ch) in body.char_indices().skip(1) {
        if (ch == '+' || ch == '-') && !matches!(&body[pos - 1..pos], "e" | "E") {
            let re: f64 =
                body[..pos].parse().map_err(|_| Error::Parse(format!("bad complex {s:?}")))?;
            let im_str = &body[pos..];
            let im: f64 = if im_str == "+" || im_str == "-" {
                format!("{im_str}1").parse().unwrap()
            } else {
                im_str.parse().map_err(|_| Error::Parse(format!("bad complex {s:?}")))?
            };
            return Ok(Complex64::new(re, im));
        }
    }
    // Pure imaginary.
    let im: f64 = body.parse().map_err(|_| Error::Parse(format!("bad complex {s:?}")))?;
    Ok(Complex64::new(0.0, im))
}

/// phi(theta) = theta + eps sin(m theta). Rejects |eps| m >= 1, which would
/// break phi' > 0.
pub fn sine_family(eps: f64, m: u32) -> Result<CircleHomeo> {
    if m == 0 {
        return Err(Error::Domain("sine family requires m >= 1".into()));
    }
    if !(eps.abs() * m as f64) .is_finite() || eps.abs() * m as f64 >= 1.0 {
        return Err(Error::NotAHomeomorphism(format!(
            "sine family needs |eps| m < 1, got eps={eps}, m={m}"
        )));
    }
    Ok(CircleHomeo::Sine { eps, m })
}

/// Boundary trace of the Moebius disk automorphism with parameters (a, alpha).
pub fn mobius_boundary(a: Complex64, alpha: f64) -> Result<CircleHomeo> {
    if a.norm() >= 1.0 {
        return Err(Error::Domain(format!("mobius boundary requires |a| < 1, got |a|={}", a.norm())));
    }
    Ok(CircleHomeo::Mobius { a, alpha })
}

/// Samples h0 at the mesh boundary angles: vertex at angle theta_j receives
/// exp(i phi(theta_j)). Returned in `boundary_ids` order.
pub fn trace_on_mesh(h0: &CircleHomeo, mesh: &DiskMesh) -> Vec<Complex64> {
    mesh.boundary_angles().iter().map(|&th| h0.value(th)).collect()
}

/// Summary of a boundary homeomorphism for run manifests.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryInfo {
    pub spec: String,
    pub monotone_margin: f64,
    pub modulus_estimate: f64,
}

impl BoundaryInfo {
    pub fn of(h0: &CircleHomeo) -> Self {
        BoundaryInfo {
            spec: h0.spec_string(),
            monotone_margin: h0.monotone_margin(4096),
            modulus_estimate: h0.modulus_estimate(512),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn identity_trace_maps_boundary_to_itself() {
        let mesh = build_disk_mesh(3).unwrap();
        let h0 = CircleHomeo::identity();
        let trace = trace_on_mesh(&h0, &mesh);
        for (j, &b) in mesh.boundary_ids().iter().enumerate() {
            let v = mesh.vertices()[b as usize];
            assert!((trace[j] - v).norm() < 1e-13);
        }
    }

    #[test]
    fn sine_validity_boundary() {
        assert!(sine_family(0.0, 1).is_ok());
        assert!(sine_family(0.3, 1).is_ok());
        // eps * m = 1 sits exactly on the boundary of validity.
        assert!(matches!(sine_family(0.5, 2), Err(Error::NotAHomeomorphism(_))));
    }

    #[test]
    fn sine_modulus() {
        let id = sine_family(0.0, 3).unwrap();
        assert!((id.modulus_estimate(512) - 1.0).abs() < 1e-12);
        let h = sine_family(0.3, 1).unwrap();
        let rho = h.modulus_estimate(512);
        assert!(rho.is_finite() && rho > 1.0);
        assert!(h.monotone_margin(4096) > 0.0);
    }

    #[test]
    fn rotation_trace() {
        let mesh = build_disk_mesh(2).unwrap();
        let alpha = 0.7;
        let trace = trace_on_mesh(&CircleHomeo::Rotation { alpha }, &mesh);
        let rot = Complex64::from_polar(1.0, alpha);
        for (j, &b) in mesh.boundary_ids().iter().enumerate() {
            let v = mesh.vertices()[b as usize];
            assert!((trace[j] - v * rot).norm() < 1e-13);
        }
    }

    #[test]
    fn traced_values_on_circle_and_ordered() {
        let mesh = build_disk_mesh(3).unwrap();
        let h0 = sine_family(0.3, 1).unwrap();
        let trace = trace_on_mesh(&h0, &mesh);
        assert_eq!(trace.len(), 48);
        for v in &trace {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
        // Degree-1 monotone: the image angles wind exactly once.
        let mut wraps = 0;
        for j in 0..trace.len() {
            let a = trace[j].arg();
            let b = trace[(j + 1) % trace.len()].arg();
            if b - a <= 0.0 {
                wraps += 1;
            }
        }
        assert_eq!(wraps, 1);
    }

    #[test]
    fn mobius_degree_one() {
        let h = mobius_boundary(Complex64::new(0.3, 0.1), 0.4).unwrap();
        let d = h.phi(2.0 * std::f64::consts::PI) - h.phi(0.0);
        assert!((d - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(h.monotone_margin(4096) > 0.0);
        assert!(mobius_boundary(Complex64::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn compose_lift() {
        let f = sine_family(0.2, 2).unwrap();
        let g = CircleHomeo::Rotation { alpha: 1.0 };
        let c = CircleHomeo::Compose(Box::new(g.clone()), Box::new(f.clone()));
        for i in 0..10 {
            let th = 0.63 * i as f64;
            assert!((c.phi(th) - g.phi(f.phi(th))).abs() < 1e-15);
        }
        let d = c.phi(2.0 * std::f64::consts::PI) - c.phi(0.0);
        assert!((d - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn parse_specs() {
        assert_eq!(
            CircleHomeo::parse("sine:eps=0.3,m=1").unwrap(),
            CircleHomeo::Sine { eps: 0.3, m: 1 }
        );
        assert_eq!(
            CircleHomeo::parse("rot:alpha=0.7").unwrap(),
            CircleHomeo::Rotation { alpha: 0.7 }
        );
        match CircleHomeo::parse("mobius:a=0.3+0.1i").unwrap() {
            CircleHomeo::Mobius { a, alpha } => {
                assert_eq!(a, Complex64::new(0.3, 0.1));
                assert_eq!(alpha, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(CircleHomeo::parse("sine:eps=2.0,m=1").is_err());
        assert!(CircleHomeo::parse("nope:x=1").is_err());
    }
}
