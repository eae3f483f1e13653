//! Triangulations of the closed unit disk and piecewise-linear maps on them.
//!
//! The base mesh is a hexagonal fan (7 vertices, 6 triangles). Each refinement
//! splits every triangle 1-to-4 through edge midpoints; midpoints of boundary
//! edges are reprojected onto the unit circle, so boundary vertices stay at
//! equally spaced angles. Maps are one complex value per vertex, interpolated
//! linearly per triangle, which makes the Wirtinger derivatives h_w and h_wbar
//! triangle-wise constants.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum refinement level accepted by [`build_disk_mesh`] (memory guard).
pub const MAX_LEVEL: u32 = 10;

/// Boundary vertices must satisfy | |v| - 1 | <= this.
pub const BOUNDARY_RADIUS_TOL: f64 = 1e-12;

/// Identity of a mesh, used to tie a [`DiscreteMap`] to the mesh it lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeshId {
    pub refinement_level: u32,
    pub n_vertices: u32,
    pub n_triangles: u32,
}

/// A triangulated unit disk with a counterclockwise boundary cycle.
#[derive(Clone, Debug)]
pub struct DiskMesh {
    vertices: Vec<Complex64>,
    triangles: Vec<[u32; 3]>,
    boundary_ids: Vec<u32>,
    refinement_level: u32,
    is_boundary: Vec<bool>,
    interior_ids: Vec<u32>,
}

impl DiskMesh {
    /// Assembles a mesh from raw parts and validates every structural invariant.
    pub fn from_parts(
        vertices: Vec<Complex64>,
        triangles: Vec<[u32; 3]>,
        boundary_ids: Vec<u32>,
        refinement_level: u32,
    ) -> Result<Self> {
        let n = vertices.len();
        let mut is_boundary = vec![false; n];
        for &b in &boundary_ids {
            if b as usize >= n {
                return Err(Error::Invariant(format!("boundary id {b} out of range")));
            }
            is_boundary[b as usize] = true;
        }
        let interior_ids = (0..n as u32).filter(|&i| !is_boundary[i as usize]).collect();
        let mesh = DiskMesh {
            vertices,
            triangles,
            boundary_ids,
            refinement_level,
            is_boundary,
            interior_ids,
        };
        mesh.check_invariants()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Boundary vertex indices in counterclockwise order around the circle.
    pub fn boundary_ids(&self) -> &[u32] {
        &self.boundary_ids
    }

    pub fn interior_ids(&self) -> &[u32] {
        &self.interior_ids
    }

    pub fn refinement_level(&self) -> u32 {
        self.refinement_level
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn id(&self) -> MeshId {
        MeshId {
            refinement_level: self.refinement_level,
            n_vertices: self.vertices.len() as u32,
            n_triangles: self.triangles.len() as u32,
        }
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        signed_area(
            self.vertices[i as usize],
            self.vertices[j as usize],
            self.vertices[k as usize],
        )
    }

    pub fn areas(&self) -> Vec<f64> {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).collect()
    }

    pub fn total_area(&self) -> f64 {
        crate::distortion::pairwise_sum(&self.areas())
    }

    /// One third of the area of the incident triangles, per vertex.
    pub fn lumped_vertex_areas(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_vertices()];
        for t in 0..self.n_triangles() {
            let a = self.triangle_area(t) / 3.0;
            for &v in &self.triangles[t] {
                m[v as usize] += a;
            }
        }
        m
    }

    pub fn max_edge_len(&self) -> f64 {
        let mut m = 0.0f64;
        for tri in &self.triangles {
            for e in 0..3 {
                let a = self.vertices[tri[e] as usize];
                let b = self.vertices[tri[(e + 1) % 3] as usize];
                m = m.max((a - b).norm());
            }
        }
        m
    }

    /// Angles of the boundary vertices, in `boundary_ids` order.
    pub fn boundary_angles(&self) -> Vec<f64> {
        self.boundary_ids
            .iter()
            .map(|&b| {
                let v = self.vertices[b as usize];
                v.im.atan2(v.re)
            })
            .collect()
    }

    /// Triangles incident to each vertex, in ascending triangle order.
    pub fn vertex_to_triangles(&self) -> Vec<Vec<u32>> {
        let mut star = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                star[v as usize].push(t as u32);
            }
        }
        star
    }

    /// For each triangle, the neighbor across the edge opposite each corner.
    pub fn triangle_adjacency(&self) -> Vec<[Option<u32>; 3]> {
        let mut edge_map: HashMap<(u32, u32), (u32, u8)> = HashMap::new();
        let mut adj = vec![[None; 3]; self.n_triangles()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3u8 {
                // Edge opposite corner e connects the other two corners.
                let a = tri[(e as usize + 1) % 3];
                let b = tri[(e as usize + 2) % 3];
                let key = (a.min(b), a.max(b));
                if let Some((t2, e2)) = edge_map.remove(&key) {
                    adj[t][e as usize] = Some(t2);
                    adj[t2 as usize][e2 as usize] = Some(t as u32);
                } else {
                    edge_map.insert(key, (t as u32, e));
                }
            }
        }
        adj
    }

    /// Validates the full invariant battery: vertex radii, triangle orientation,
    /// edge-manifoldness and the boundary cycle.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_vertices();
        for (i, v) in self.vertices.iter().enumerate() {
            let r = v.norm();
            if self.is_boundary[i] {
                if (r - 1.0).abs() > BOUNDARY_RADIUS_TOL {
                    return Err(Error::Invariant(format!(
                        "boundary vertex {i} has radius {r} (|r-1| > {BOUNDARY_RADIUS_TOL:e})"
                    )));
                }
            } else if r >= 1.0 {
                return Err(Error::Invariant(format!(
                    "interior vertex {i} has radius {r} >= 1"
                )));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v as usize >= n {
                    return Err(Error::Invariant(format!("triangle {t} references vertex {v}")));
                }
            }
            let a = self.triangle_area(t);
            if a <= 0.0 {
                return Err(Error::Invariant(format!(
                    "triangle {t} has non-positive signed area {a:e}"
                )));
            }
        }
        // Edge-manifold: every edge in 1 or 2 triangles; count-1 edges form the
        // boundary cycle.
        let mut edge_count: HashMap<(u32, u32), u32> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut n_boundary_edges = 0usize;
        for (&(a, b), &c) in &edge_count {
            match c {
                1 => {
                    n_boundary_edges += 1;
                    if !self.is_boundary[a as usize] || !self.is_boundary[b as usize] {
                        return Err(Error::Invariant(format!(
                            "boundary edge ({a},{b}) has an interior endpoint"
                        )));
                    }
                }
                2 => {}
                _ => {
                    return Err(Error::Invariant(format!(
                        "edge ({a},{b}) is shared by {c} triangles"
                    )));
                }
            }
        }
        if n_boundary_edges != self.boundary_ids.len() {
            return Err(Error::Invariant(format!(
                "{} boundary edges but {} boundary vertices",
                n_boundary_edges,
                self.boundary_ids.len()
            )));
        }
        // Boundary angles strictly increasing counterclockwise (up to one wrap).
        let angles = self.boundary_angles();
        let nb = angles.len();
        let mut wraps = 0;
        for j in 0..nb {
            let d = angles[(j + 1) % nb] - angles[j];
            if d <= 0.0 {
                wraps += 1;
            }
        }
        if nb > 1 && wraps != 1 {
            return Err(Error::Invariant(format!(
                "boundary cycle is not monotone counterclockwise ({wraps} angle wraps)"
            )));
        }
        Ok(())
    }

    /// Writes the text format understood by [`read_mesh`].
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(
            out,
            "diskmesh v1 {} {} {}",
            self.n_vertices(),
            self.n_triangles(),
            self.boundary_ids.len()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(out, "{} {}", v.re, v.im).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        for b in &self.boundary_ids {
            writeln!(out, "{b}").unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn signed_area(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let u = b - a;
    let v = c - a;
    0.5 * (u.re * v.im - u.im * v.re)
}

/// Builds the level-`refinement_level` triangulation of the unit disk.
///
/// Level 0 is a hexagonal fan; each level splits every triangle in four and
/// reprojects boundary midpoints onto the circle. Counts follow V' = V + E,
/// T' = 4T, so level L has 6*4^L triangles and 6*2^L boundary vertices.
pub fn build_disk_mesh(refinement_level: u32) -> Result<DiskMesh> {
    if refinement_level > MAX_LEVEL {
        return Err(Error::LevelOutOfRange(refinement_level, MAX_LEVEL));
    }
    let mut vertices = vec![Complex64::new(0.0, 0.0)];
    for k in 0..6 {
        let th = 2.0 * std::f64::consts::PI * (k as f64) / 6.0;
        vertices.push(Complex64::from_polar(1.0, th));
    }
    let mut triangles: Vec<[u32; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
    let mut boundary_ids: Vec<u32> = (1..=6).collect();

    for _ in 0..refinement_level {
        let boundary_edge: std::collections::HashSet<(u32, u32)> = boundary_ids
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let b2 = boundary_ids[(j + 1) % boundary_ids.len()];
                (b.min(b2), b.max(b2))
            })
            .collect();
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut new_tris: Vec<[u32; 3]> = Vec::with_capacity(triangles.len() * 4);
        let mut mid_of = |a: u32, b: u32, vertices: &mut Vec<Complex64>| -> u32 {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = midpoint.get(&key) {
                return m;
            }
            let mut p = (vertices[a as usize] + vertices[b as usize]) * 0.5;
            if boundary_edge.contains(&key) {
                p /= p.norm();
            }
            let m = vertices.len() as u32;
            vertices.push(p);
            midpoint.insert(key, m);
            m
        };
        for &[i, j, k] in &triangles {
            let mij = mid_of(i, j, &mut vertices);
            let mjk = mid_of(j, k, &mut vertices);
            let mki = mid_of(k, i, &mut vertices);
            new_tris.push([i, mij, mki]);
            new_tris.push([mij, j, mjk]);
            new_tris.push([mki, mjk, k]);
            new_tris.push([mij, mjk, mki]);
        }
        let mut new_boundary = Vec::with_capacity(boundary_ids.len() * 2);
        for (j, &b) in boundary_ids.iter().enumerate() {
            let b2 = boundary_ids[(j + 1) % boundary_ids.len()];
            new_boundary.push(b);
            new_boundary.push(midpoint[&(b.min(b2), b.max(b2))]);
        }
        triangles = new_tris;
        boundary_ids = new_boundary;
    }

    DiskMesh::from_parts(vertices, triangles, boundary_ids, refinement_level)
}

/// Reads the `diskmesh v1` text format.
pub fn read_mesh(path: &Path) -> Result<DiskMesh> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "diskmesh" || parts[1] != "v1" {
        return Err(Error::Parse(format!("bad mesh header: {header:?}")));
    }
    let nv: usize = parts[2].parse().map_err(|_| Error::Parse("bad vertex count".into()))?;
    let nt: usize = parts[3].parse().map_err(|_| Error::Parse("bad triangle count".into()))?;
    let nb: usize = parts[4].parse().map_err(|_| Error::Parse("bad boundary count".into()))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated vertex list".into()))?;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad vertex line: {line:?}")))?;
        let y: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad vertex line: {line:?}")))?;
        vertices.push(Complex64::new(x, y));
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated triangle list".into()))?;
        let ids: Vec<u32> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad triangle line: {line:?}"))))
            .collect::<Result<_>>()?;
        if ids.len() != 3 {
            return Err(Error::Parse(format!("bad triangle line: {line:?}")));
        }
        triangles.push([ids[0], ids[1], ids[2]]);
    }
    let mut boundary_ids = Vec::with_capacity(nb);
    for _ in 0..nb {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated boundary list".into()))?;
        boundary_ids.push(
            line.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad boundary line: {line:?}")))?,
        );
    }
    // The file does not carry the level; recover it from the boundary count.
    let level = (nb as f64 / 6.0).log2().round().max(0.0) as u32;
    DiskMesh::from_parts(vertices, triangles, boundary_ids, level)
}

/// One complex value per mesh vertex; piecewise-linear map on the mesh.
#[derive(Clone, Debug)]
pub struct DiscreteMap {
    values: Vec<Complex64>,
    mesh_id: MeshId,
}

impl DiscreteMap {
    pub fn new(mesh: &DiskMesh, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::MeshMismatch);
        }
        Ok(DiscreteMap { values, mesh_id: mesh.id() })
    }

    pub fn from_fn(mesh: &DiskMesh, f: impl Fn(Complex64) -> Complex64) -> Self {
        DiscreteMap {
            values: mesh.vertices().iter().map(|&v| f(v)).collect(),
            mesh_id: mesh.id(),
        }
    }

    pub fn identity_on(mesh: &DiskMesh) -> Self {
        DiscreteMap { values: mesh.vertices().to_vec(), mesh_id: mesh.id() }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn assert_on(&self, mesh: &DiskMesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    /// Max vertex-wise distance to another map on the same mesh.
    pub fn linf_distance(&self, other: &DiscreteMap) -> Result<f64> {
        if self.mesh_id != other.mesh_id {
            return Err(Error::MeshMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Writes the `diskmap v1` text format.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "diskmap v1 {}", self.values.len()).unwrap();
        for v in &self.values {
            writeln!(out, "{} {}", v.re, v.im).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Reads the `diskmap v1` text format and binds it to `mesh`.
pub fn read_map(path: &Path, mesh: &DiskMesh) -> Result<DiscreteMap> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty map file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "diskmap" || parts[1] != "v1" {
        return Err(Error::Parse(format!("bad map header: {header:?}")));
    }
    let nv: usize = parts[2].parse().map_err(|_| Error::Parse("bad value count".into()))?;
    if nv != mesh.n_vertices() {
        return Err(Error::MeshMismatch);
    }
    let mut values = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated map file".into()))?;
        let mut it = line.split_whitespace();
        let re: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad map line: {line:?}")))?;
        let im: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad map line: {line:?}")))?;
        values.push(Complex64::new(re, im));
    }
    DiscreteMap::new(mesh, values)
}

/// Per-triangle constants of the affine interpolant: h(w) = c + h_w w + h_wbar conj(w).
#[derive(Clone, Debug)]
pub struct WirtingerDerivs {
    pub h_w: Vec<Complex64>,
    pub h_wbar: Vec<Complex64>,
}

/// Per-triangle interpolation geometry: the derivative of (h_w, h_wbar) with
/// respect to each corner value. `h_w = sum ca[i] * h_i`, `h_wbar = sum cb[i] * h_i`.
#[derive(Clone, Debug)]
pub(crate) struct TriGeom {
    pub idx: [usize; 3],
    pub area: f64,
    pub ca: [Complex64; 3],
    pub cb: [Complex64; 3],
}

pub(crate) fn tri_geoms(mesh: &DiskMesh) -> Result<Vec<TriGeom>> {
    let vs = mesh.vertices();
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, &[i, j, k])| {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            let u = vs[j] - vs[i];
            let v = vs[k] - vs[i];
            let area = 0.5 * (u.re * v.im - u.im * v.re);
            if area <= 0.0 {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
            let d = u * v.conj() - u.conj() * v; // = -4i * area
            let ca = [(u - v).conj() / d, v.conj() / d, -u.conj() / d];
            let cb = [(v - u) / d, -v / d, u / d];
            Ok(TriGeom { idx: [i, j, k], area, ca, cb })
        })
        .collect()
}

/// Computes the per-triangle Wirtinger derivatives of `map`.
///
/// Exact for affine maps: h(z) = a + b z + c conj(z) yields (b, c) on every
/// triangle; the identity map yields exactly (1, 0).
pub fn wirtinger(mesh: &DiskMesh, map: &DiscreteMap) -> Result<WirtingerDerivs> {
    map.assert_on(mesh)?;
    let vals = map.values();
    let vs = mesh.vertices();
    let n = mesh.n_triangles();
    let mut h_w = Vec::with_capacity(n);
    let mut h_wbar = Vec::with_capacity(n);
    for (t, &[i, j, k]) in mesh.triangles().iter().enumerate() {
        let (i, j, k) = (i as usize, j as usize, k as usize);
        let u = vs[j] - vs[i];
        let v = vs[k] - vs[i];
        let area = 0.5 * (u.re * v.im - u.im * v.re);
        if area <= 0.0 {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
        let p = vals[j] - vals[i];
        let q = vals[k] - vals[i];
        let d = u * v.conj() - u.conj() * v;
        h_w.push((p * v.conj() - q * u.conj()) / d);
        h_wbar.push((q * u - p * v) / d);
    }
    Ok(WirtingerDerivs { h_w, h_wbar })
}

/// Walking point locator over an arbitrary vertex embedding of a mesh topology.
///
/// Walks from the last hit toward the query via barycentric sign tests, with a
/// brute-force scan as fallback.
pub struct PointLocator<'a> {
    positions: &'a [Complex64],
    triangles: &'a [[u32; 3]],
    adjacency: Vec<[Option<u32>; 3]>,
    last: usize,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &DiskMesh, positions: &'a [Complex64], triangles: &'a [[u32; 3]]) -> Self {
        PointLocator {
            positions,
            triangles,
            adjacency: mesh.triangle_adjacency(),
            last: 0,
        }
    }

    pub fn set_hint(&mut self, t: usize) {
        if t < self.triangles.len() {
            self.last = t;
        }
    }

    fn barycentric(&self, t: usize, q: Complex64) -> [f64; 3] {
        let [i, j, k] = self.triangles[t];
        let a = self.positions[i as usize];
        let b = self.positions[j as usize];
        let c = self.positions[k as usize];
        let total = signed_area(a, b, c);
        [
            signed_area(q, b, c) / total,
            signed_area(a, q, c) / total,
            signed_area(a, b, q) / total,
        ]
    }

    /// Finds a triangle containing `q` (all barycentric coords >= -tol) and
    /// returns it with the coordinates. `None` when no triangle contains `q`.
    pub fn locate(&mut self, q: Complex64) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        let nt = self.triangles.len();
        let mut t = self.last;
        for _ in 0..2 * nt {
            let l = self.barycentric(t, q);
            let (worst, &lmin) =
                l.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
            if lmin >= -TOL {
                self.last = t;
                return Some((t, l));
            }
            match self.adjacency[t][worst] {
                Some(next) => t = next as usize,
                None => break,
            }
        }
        // Brute force: best containing triangle by least barycentric violation.
        let (best, lbest, viol) = (0..nt)
            .map(|t| {
                let l = self.barycentric(t, q);
                let v = l.iter().cloned().fold(f64::INFINITY, f64::min);
                (t, l, v)
            })
            .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())?;
        if viol >= -TOL {
            self.last = best;
            Some((best, lbest))
        } else {
            None
        }
    }

    /// Best-effort location that extrapolates from the least-violating triangle.
    pub fn locate_or_nearest(&mut self, q: Complex64) -> (usize, [f64; 3]) {
        if let Some(hit) = self.locate(q) {
            return hit;
        }
        let nt = self.triangles.len();
        (0..nt)
            .map(|t| {
                let l = self.barycentric(t, q);
                let v = l.iter().cloned().fold(f64::INFINITY, f64::min);
                (t, l, v)
            })
            .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
            .map(|(t, l, _)| (t, l))
            .expect("mesh has no triangles")
    }
}
