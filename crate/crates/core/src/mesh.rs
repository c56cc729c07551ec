//! Structured P1 meshes of an interval and an axis-aligned rectangle.
//!
//! Boundary vertices are eliminated: only interior vertices carry degrees of
//! freedom, numbered contiguously in natural (1D) or row-major (2D) order.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::CsrPattern;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval1D { x_lo: f64, x_hi: f64 },
    Rect2D { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },
}

impl Domain {
    pub fn interval(x_lo: f64, x_hi: f64) -> Result<Self> {
        let d = Domain::Interval1D { x_lo, x_hi };
        d.validate()?;
        Ok(d)
    }

    pub fn rect(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let d = Domain::Rect2D {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval1D { x_lo, x_hi } => x_lo < x_hi,
            Domain::Rect2D {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => x_lo < x_hi && y_lo < y_hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMesh(format!("empty domain {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval1D { .. } => 1,
            Domain::Rect2D { .. } => 2,
        }
    }

    /// Length or area.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval1D { x_lo, x_hi } => x_hi - x_lo,
            Domain::Rect2D {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => (x_hi - x_lo) * (y_hi - y_lo),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Domain,
    vertices: Vec<[f64; 2]>,
    /// Flat connectivity, `nodes_per_element` entries per element.
    connectivity: Vec<usize>,
    nodes_per_element: usize,
    is_boundary: Vec<bool>,
    interior_dof: Vec<Option<usize>>,
    dof_vertex: Vec<usize>,
    h: f64,
    cell_size: f64,
    p_per_dir: usize,
    pattern: Arc<CsrPattern>,
    /// Per element, row-major local (a, b) pairs mapped to CSR slots.
    element_slots: Vec<usize>,
}

/// Marks a local pair touching a boundary vertex.
pub(crate) const NO_SLOT: usize = usize::MAX;

/// Uniform partition of an interval into `n_cells` segments.
pub fn build_mesh_1d(domain: Domain, n_cells: usize) -> Result<Mesh> {
    let Domain::Interval1D { x_lo, x_hi } = domain else {
        return Err(Error::InvalidMesh("1D mesh requires an interval".into()));
    };
    domain.validate()?;
    if n_cells < 2 {
        return Err(Error::InvalidMesh(format!(
            "need at least 2 cells, got {n_cells}"
        )));
    }
    let len = x_hi - x_lo;
    let vertices = (0..=n_cells)
        .map(|i| {
            let x = if i == n_cells {
                x_hi
            } else {
                x_lo + len * i as f64 / n_cells as f64
            };
            [x, 0.0]
        })
        .collect::<Vec<_>>();
    let connectivity = (0..n_cells).flat_map(|k| [k, k + 1]).collect();
    let is_boundary = (0..=n_cells).map(|i| i == 0 || i == n_cells).collect();
    Mesh::finish(
        domain,
        vertices,
        connectivity,
        2,
        is_boundary,
        len / n_cells as f64,
        n_cells + 1,
    )
}

/// Uniform `n × n` grid of rectangles, each split along its lower-left to
/// upper-right diagonal into two triangles.
pub fn build_mesh_2d(domain: Domain, n_cells_per_dir: usize) -> Result<Mesh> {
    let Domain::Rect2D {
        x_lo,
        x_hi,
        y_lo,
        y_hi,
    } = domain
    else {
        return Err(Error::InvalidMesh("2D mesh requires a rectangle".into()));
    };
    domain.validate()?;
    let n = n_cells_per_dir;
    if n < 2 {
        return Err(Error::InvalidMesh(format!(
            "need at least 2 cells per direction, got {n}"
        )));
    }
    let coord = |lo: f64, hi: f64, i: usize| {
        if i == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / n as f64
        }
    };
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    let mut is_boundary = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([coord(x_lo, x_hi, i), coord(y_lo, y_hi, j)]);
            is_boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let vid = |i: usize, j: usize| j * np + i;
    let mut connectivity = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            connectivity.extend_from_slice(&[a, b, c]);
            connectivity.extend_from_slice(&[a, c, d]);
        }
    }
    let hx = (x_hi - x_lo) / n as f64;
    let hy = (y_hi - y_lo) / n as f64;
    Mesh::finish(
        domain,
        vertices,
        connectivity,
        3,
        is_boundary,
        hx.max(hy),
        np,
    )
}

impl Mesh {
    fn finish(
        domain: Domain,
        vertices: Vec<[f64; 2]>,
        connectivity: Vec<usize>,
        nodes_per_element: usize,
        is_boundary: Vec<bool>,
        cell_size: f64,
        p_per_dir: usize,
    ) -> Result<Mesh> {
        let mut interior_dof = vec![None; vertices.len()];
        let mut dof_vertex = Vec::new();
        for (v, &b) in is_boundary.iter().enumerate() {
            if !b {
                interior_dof[v] = Some(dof_vertex.len());
                dof_vertex.push(v);
            }
        }
        let mut mesh = Mesh {
            domain,
            vertices,
            connectivity,
            nodes_per_element,
            is_boundary,
            interior_dof,
            dof_vertex,
            h: 0.0,
            cell_size,
            p_per_dir,
            pattern: Arc::new(CsrPattern::from_rows(Vec::new())),
            element_slots: Vec::new(),
        };
        mesh.h = (0..mesh.n_elements())
            .map(|k| mesh.element_diameter(k))
            .fold(0.0, f64::max);
        if let Some(k) = (0..mesh.n_elements()).find(|&k| mesh.element_measure(k) <= 0.0) {
            return Err(Error::InvalidMesh(format!(
                "element {k} has non-positive measure"
            )));
        }
        mesh.build_pattern();
        Ok(mesh)
    }

    fn build_pattern(&mut self) {
        let npe = self.nodes_per_element;
        let mut rows = vec![Vec::new(); self.n_dofs()];
        for k in 0..self.n_elements() {
            for &a in self.element(k) {
                if let Some(i) = self.interior_dof[a] {
                    rows[i].extend(self.element(k).iter().filter_map(|&b| self.interior_dof[b]));
                }
            }
        }
        let pattern = CsrPattern::from_rows(rows);
        let mut slots = Vec::with_capacity(self.n_elements() * npe * npe);
        for k in 0..self.n_elements() {
            for &a in self.element(k) {
                for &b in self.element(k) {
                    let s = match (self.interior_dof[a], self.interior_dof[b]) {
                        (Some(i), Some(j)) => pattern.slot(i, j).expect("pattern covers element"),
                        _ => NO_SLOT,
                    };
                    slots.push(s);
                }
            }
        }
        self.pattern = Arc::new(pattern);
        self.element_slots = slots;
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn n_elements(&self) -> usize {
        self.connectivity.len() / self.nodes_per_element
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    pub fn element(&self, k: usize) -> &[usize] {
        let n = self.nodes_per_element;
        &self.connectivity[k * n..(k + 1) * n]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn interior_dof(&self, v: usize) -> Option<usize> {
        self.interior_dof[v]
    }

    /// Vertex carrying interior DOF `i`.
    pub fn dof_vertex(&self, i: usize) -> usize {
        self.dof_vertex[i]
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Grid spacing of the generator (segment length, or square cell side).
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn p_per_dir(&self) -> usize {
        self.p_per_dir
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub(crate) fn element_slots(&self, k: usize) -> &[usize] {
        let n = self.nodes_per_element * self.nodes_per_element;
        &self.element_slots[k * n..(k + 1) * n]
    }

    /// Length of a segment or (positively oriented) signed area of a triangle.
    pub fn element_measure(&self, k: usize) -> f64 {
        let e = self.element(k);
        let p = |i: usize| self.vertices[e[i]];
        match self.nodes_per_element {
            2 => p(1)[0] - p(0)[0],
            _ => {
                let (a, b, c) = (p(0), p(1), p(2));
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    pub fn element_diameter(&self, k: usize) -> f64 {
        let e = self.element(k);
        let mut d: f64 = 0.0;
        for (ia, &a) in e.iter().enumerate() {
            for &b in &e[ia + 1..] {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                d = d.max((pa[0] - pb[0]).hypot(pa[1] - pb[1]));
            }
        }
        d
    }

    /// Constant gradients of the element's local hat functions.
    pub fn element_gradients(&self, k: usize) -> [[f64; 2]; 3] {
        let e = self.element(k);
        match self.nodes_per_element {
            2 => {
                let len = self.vertices[e[1]][0] - self.vertices[e[0]][0];
                [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]]
            }
            _ => {
                let (a, b, c) = (self.vertices[e[0]], self.vertices[e[1]], self.vertices[e[2]]);
                let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                [
                    [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
                    [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
                    [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
                ]
            }
        }
    }

    /// Maps reference coordinates to physical space: `t ∈ [0, 1]` on a segment,
    /// barycentric `(λ1, λ2)` (with `λ0 = 1 − λ1 − λ2`) on a triangle.
    pub fn map_point(&self, k: usize, r: [f64; 2]) -> [f64; 2] {
        let e = self.element(k);
        match self.nodes_per_element {
            2 => {
                let (a, b) = (self.vertices[e[0]][0], self.vertices[e[1]][0]);
                [a + (b - a) * r[0], 0.0]
            }
            _ => {
                let (a, b, c) = (self.vertices[e[0]], self.vertices[e[1]], self.vertices[e[2]]);
                let l0 = 1.0 - r[0] - r[1];
                [
                    l0 * a[0] + r[0] * b[0] + r[1] * c[0],
                    l0 * a[1] + r[0] * b[1] + r[1] * c[1],
                ]
            }
        }
    }

    /// Local shape function values at reference coordinates.
    pub fn shape_values(&self, r: [f64; 2]) -> [f64; 3] {
        match self.nodes_per_element {
            2 => [1.0 - r[0], r[0], 0.0],
            _ => [1.0 - r[0] - r[1], r[0], r[1]],
        }
    }

    /// Coordinates of the vertex carrying each interior DOF.
    pub fn dof_coordinates(&self) -> Vec<[f64; 2]> {
        self.dof_vertex.iter().map(|&v| self.vertices[v]).collect()
    }

    /// Nodal interpolant restricted to interior DOFs.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.dof_vertex.iter().map(|&v| f(self.vertices[v])).collect()
    }

    /// Values of an interior-DOF vector on an element's vertices (zero on the boundary).
    pub(crate) fn gather(&self, k: usize, v: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, &a) in out.iter_mut().zip(self.element(k)) {
            if let Some(i) = self.interior_dof[a] {
                *o = v[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval() -> Domain {
        Domain::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn mesh_1d_counts() {
        let m = build_mesh_1d(unit_interval(), 100).unwrap();
        assert!((m.h() - 0.01).abs() < 1e-14);
        assert_eq!(m.n_dofs(), 99);

        let m = build_mesh_1d(unit_interval(), 2).unwrap();
        let xs: Vec<f64> = m.vertices().iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(m.n_dofs(), 1);

        let m = build_mesh_1d(Domain::interval(0.0, 2.0).unwrap(), 4).unwrap();
        assert_eq!(m.h(), 0.5);
        assert_eq!(m.n_dofs(), 3);
        assert!(m.is_boundary(0) && m.is_boundary(4));
    }

    #[test]
    fn mesh_2d_counts() {
        let d = Domain::rect(0.0, 2.0, 0.0, 2.0).unwrap();
        let m = build_mesh_2d(d, 10).unwrap();
        assert_eq!(m.n_elements(), 200);
        assert_eq!(m.n_dofs(), 81);
        assert!((m.h() - 0.2 * 2f64.sqrt()).abs() < 1e-12);

        let m = build_mesh_2d(d, 40).unwrap();
        assert!((m.cell_size() - 0.05).abs() < 1e-15);
        assert_eq!(m.n_dofs(), 1521);

        let m = build_mesh_2d(Domain::rect(0.0, 1.0, 0.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.n_dofs(), 1);
    }

    #[test]
    fn too_few_cells_rejected() {
        assert!(matches!(
            build_mesh_1d(unit_interval(), 1),
            Err(Error::InvalidMesh(_))
        ));
        let d = Domain::rect(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(build_mesh_2d(d, 1), Err(Error::InvalidMesh(_))));
        assert!(build_mesh_2d(unit_interval(), 4).is_err());
        assert!(Domain::interval(1.0, 1.0).is_err());
    }

    #[test]
    fn interior_vertices_have_six_triangles() {
        let m = build_mesh_2d(Domain::rect(0.0, 2.0, 0.0, 1.0).unwrap(), 7).unwrap();
        let mut count = vec![0; m.vertices().len()];
        for k in 0..m.n_elements() {
            for &v in m.element(k) {
                count[v] += 1;
            }
        }
        for v in 0..m.vertices().len() {
            if !m.is_boundary(v) {
                assert_eq!(count[v], 6, "vertex {v}");
            }
        }
    }

    #[test]
    fn measures_diameters_and_orientation() {
        let d = Domain::rect(-1.0, 3.0, 0.5, 2.0).unwrap();
        let m = build_mesh_2d(d, 9).unwrap();
        let total: f64 = (0..m.n_elements()).map(|k| m.element_measure(k)).sum();
        assert!((total - d.measure()).abs() <= 1e-12 * d.measure());
        assert!((0..m.n_elements()).all(|k| m.element_measure(k) > 0.0));
        let hmax = (0..m.n_elements())
            .map(|k| m.element_diameter(k))
            .fold(0.0, f64::max);
        let hmin = (0..m.n_elements())
            .map(|k| m.element_diameter(k))
            .fold(f64::INFINITY, f64::min);
        assert!((m.h() - hmax).abs() <= 1e-12 * hmax);
        assert!(hmin >= 0.4 * m.h());

        let m1 = build_mesh_1d(Domain::interval(0.0, 3.0).unwrap(), 7).unwrap();
        let total: f64 = (0..m1.n_elements()).map(|k| m1.element_measure(k)).sum();
        assert!((total - 3.0).abs() <= 1e-12 * 3.0);
    }

    #[test]
    fn affine_gradient_reproduced() {
        let m = build_mesh_2d(Domain::rect(0.0, 2.0, 0.0, 2.0).unwrap(), 6).unwrap();
        let f = |p: [f64; 2]| 0.3 - 1.7 * p[0] + 2.5 * p[1];
        for k in 0..m.n_elements() {
            let g = m.element_gradients(k);
            let mut grad = [0.0; 2];
            for (a, &v) in m.element(k).iter().enumerate() {
                let val = f(m.vertices()[v]);
                grad[0] += val * g[a][0];
                grad[1] += val * g[a][1];
            }
            assert!((grad[0] + 1.7).abs() < 1e-12);
            assert!((grad[1] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn dof_numbering_is_bijective() {
        let m = build_mesh_2d(Domain::rect(0.0, 1.0, 0.0, 1.0).unwrap(), 5).unwrap();
        let mut seen = vec![false; m.n_dofs()];
        for v in 0..m.vertices().len() {
            match m.interior_dof(v) {
                Some(i) => {
                    assert!(!m.is_boundary(v));
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(m.dof_vertex(i), v);
                }
                None => assert!(m.is_boundary(v)),
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }
}
