//! P1 assembly of stiffness, perturbation and load terms over interior DOFs.
//!
//! P1 gradients are elementwise constant, so every matrix entry reduces to
//! `(∇φ_a · ∇φ_b) ∫_K c`. Coefficients are sampled pointwise at the quadrature
//! nodes of each element.

use crate::error::{Error, Result};
use crate::field::{FieldVector, ScalarField};
use crate::mesh::{Mesh, NO_SLOT};
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

fn check_rule(mesh: &Mesh, quad: &QuadratureRule) -> Result<()> {
    if quad.dim != mesh.dim() || quad.is_empty() {
        return Err(Error::InvalidData(format!(
            "{}-dimensional quadrature rule on a {}-dimensional mesh",
            quad.dim,
            mesh.dim()
        )));
    }
    Ok(())
}

/// `∫_K c` by quadrature, with optional positivity check at every node.
fn element_integral<F: ScalarField + ?Sized>(
    mesh: &Mesh,
    k: usize,
    coeff: &F,
    quad: &QuadratureRule,
    require_positive: bool,
) -> Result<f64> {
    let jac = mesh.element_measure(k) / quad.reference_measure();
    let mut acc = 0.0;
    for (r, w) in quad.points.iter().zip(&quad.weights) {
        let x = mesh.map_point(k, *r);
        let c = coeff.value(x);
        if !c.is_finite() {
            return Err(Error::FieldEvaluation {
                element: k,
                x: x[0],
                y: x[1],
            });
        }
        if require_positive && c <= 0.0 {
            return Err(Error::CoercivityViolation {
                element: k,
                x: x[0],
                y: x[1],
                value: c,
            });
        }
        acc += w * c;
    }
    Ok(acc * jac)
}

fn assemble_gradient_form<F: ScalarField + ?Sized>(
    mesh: &Mesh,
    coeff: &F,
    quad: &QuadratureRule,
    require_positive: bool,
) -> Result<CsrMatrix> {
    check_rule(mesh, quad)?;
    let mut mat = CsrMatrix::zeros(mesh.pattern().clone());
    let npe = mesh.nodes_per_element();
    let values = mat.values_mut();
    for k in 0..mesh.n_elements() {
        let integral = element_integral(mesh, k, coeff, quad, require_positive)?;
        let g = mesh.element_gradients(k);
        let slots = mesh.element_slots(k);
        for a in 0..npe {
            for b in 0..npe {
                let s = slots[a * npe + b];
                if s != NO_SLOT {
                    let dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                    values[s] += integral * dot;
                }
            }
        }
    }
    Ok(mat)
}

/// Matrix of `(c ∇u, ∇v)` for a strictly positive coefficient.
pub fn assemble_stiffness<F: ScalarField + ?Sized>(
    mesh: &Mesh,
    coeff: &F,
    quad: &QuadratureRule,
) -> Result<CsrMatrix> {
    assemble_gradient_form(mesh, coeff, quad, true)
}

/// Matrix of `(η ∇u, ∇v)`; `η` may change sign, so the result is symmetric
/// but not necessarily definite.
pub fn assemble_perturbation_matrix<F: ScalarField + ?Sized>(
    mesh: &Mesh,
    eta: &F,
    quad: &QuadratureRule,
) -> Result<CsrMatrix> {
    assemble_gradient_form(mesh, eta, quad, false)
}

/// Load vector `⟨f, φ_i⟩`.
pub fn assemble_load<F: ScalarField + ?Sized>(
    mesh: &Mesh,
    f: &F,
    quad: &QuadratureRule,
) -> Result<FieldVector> {
    check_rule(mesh, quad)?;
    let mut load = vec![0.0; mesh.n_dofs()];
    let shapes: Vec<[f64; 3]> = quad.points.iter().map(|&r| mesh.shape_values(r)).collect();
    for k in 0..mesh.n_elements() {
        let jac = mesh.element_measure(k) / quad.reference_measure();
        let mut local = [0.0; 3];
        for ((r, w), phi) in quad.points.iter().zip(&quad.weights).zip(&shapes) {
            let x = mesh.map_point(k, *r);
            let v = f.value(x);
            if !v.is_finite() {
                return Err(Error::FieldEvaluation {
                    element: k,
                    x: x[0],
                    y: x[1],
                });
            }
            for (l, p) in local.iter_mut().zip(phi) {
                *l += w * v * p;
            }
        }
        for (a, &vtx) in mesh.element(k).iter().enumerate() {
            if let Some(i) = mesh.interior_dof(vtx) {
                load[i] += local[a] * jac;
            }
        }
    }
    Ok(FieldVector(load))
}

/// Exact P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let mut mat = CsrMatrix::zeros(mesh.pattern().clone());
    let npe = mesh.nodes_per_element();
    // Local mass is |K|/(d+1)/(d+2) * (1 + δ_ab).
    let denom = ((npe) * (npe + 1)) as f64;
    let values = mat.values_mut();
    for k in 0..mesh.n_elements() {
        let m = mesh.element_measure(k) / denom;
        let slots = mesh.element_slots(k);
        for a in 0..npe {
            for b in 0..npe {
                let s = slots[a * npe + b];
                if s != NO_SLOT {
                    values[s] += if a == b { 2.0 * m } else { m };
                }
            }
        }
    }
    mat
}

/// Right-hand side of a mode equation: `−K_η · u_{n−1}`.
pub fn mode_rhs(k_eta: &CsrMatrix, prev_mode: &[f64]) -> Result<FieldVector> {
    let mut out = k_eta.matvec(prev_mode)?;
    out.iter_mut().for_each(|v| *v = -*v);
    Ok(FieldVector(out))
}

/// In-place variant of [`mode_rhs`] reusing `out`.
pub fn mode_rhs_into(k_eta: &CsrMatrix, prev_mode: &[f64], out: &mut [f64]) -> Result<()> {
    k_eta.matvec_into(prev_mode, out)?;
    out.iter_mut().for_each(|v| *v = -*v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constant;
    use crate::mesh::{build_mesh_1d, build_mesh_2d, Domain};
    use crate::quadrature::gauss_legendre;

    fn mesh1(n: usize) -> Mesh {
        build_mesh_1d(Domain::interval(0.0, 1.0).unwrap(), n).unwrap()
    }

    fn gl1() -> QuadratureRule {
        QuadratureRule::assembly_default(1)
    }

    #[test]
    fn stiffness_small_cases() {
        let k = assemble_stiffness(&mesh1(2), &Constant(1.0), &gl1()).unwrap();
        assert!((k.get(0, 0) - 4.0).abs() < 1e-14);

        let k = assemble_stiffness(&mesh1(4), &Constant(1.0), &gl1()).unwrap();
        let d = k.to_dense();
        for i in 0..3 {
            assert!((d[i][i] - 8.0).abs() < 1e-12);
            if i + 1 < 3 {
                assert!((d[i][i + 1] + 4.0).abs() < 1e-12);
                assert!((d[i + 1][i] + 4.0).abs() < 1e-12);
            }
        }
        assert!((d[1].iter().sum::<f64>()).abs() < 1e-12);
        assert!((d[0].iter().sum::<f64>() - 4.0).abs() < 1e-12);

        let m = build_mesh_2d(Domain::rect(0.0, 1.0, 0.0, 1.0).unwrap(), 2).unwrap();
        let k = assemble_stiffness(&m, &Constant(1.0), &QuadratureRule::triangle_degree4()).unwrap();
        assert_eq!(k.dim(), 1);
        assert!((k.get(0, 0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_rejects_nonpositive_coefficient() {
        let m = mesh1(4);
        let err = assemble_stiffness(&m, &|x: [f64; 2]| x[0] - 0.5, &gl1()).unwrap_err();
        assert!(matches!(err, Error::CoercivityViolation { .. }));
        let err = assemble_stiffness(&m, &|_x: [f64; 2]| f64::NAN, &gl1()).unwrap_err();
        assert!(matches!(err, Error::FieldEvaluation { .. }));
        assert!(assemble_perturbation_matrix(&m, &|x: [f64; 2]| x[0] - 0.5, &gl1()).is_ok());
    }

    #[test]
    fn rule_dimension_checked() {
        let m = mesh1(4);
        let r = QuadratureRule::triangle_degree4();
        assert!(assemble_stiffness(&m, &Constant(1.0), &r).is_err());
    }

    #[test]
    fn load_vectors() {
        let m = mesh1(4);
        let z = assemble_load(&m, &Constant(0.0), &gl1()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let one = assemble_load(&m, &Constant(1.0), &gl1()).unwrap();
        for v in one.iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!(assemble_load(&m, &|_x: [f64; 2]| f64::INFINITY, &gl1()).is_err());
    }

    /// Tensor Gauss–Legendre on the square collapsed onto the triangle.
    fn duffy_triangle_integral(
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
        g: impl Fn([f64; 2], [f64; 3]) -> f64,
        n: usize,
    ) -> f64 {
        let (x, w) = gauss_legendre(n);
        let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        let mut acc = 0.0;
        for (u, wu) in x.iter().zip(&w) {
            for (v, wv) in x.iter().zip(&w) {
                let s = 0.5 * (u + 1.0);
                let t = 0.5 * (v + 1.0);
                let l1 = s * (1.0 - t);
                let l2 = s * t;
                let l0 = 1.0 - l1 - l2;
                let p = [
                    l0 * a[0] + l1 * b[0] + l2 * c[0],
                    l0 * a[1] + l1 * b[1] + l2 * c[1],
                ];
                acc += 0.25 * wu * wv * s * g(p, [l0, l1, l2]);
            }
        }
        acc * area2
    }

    #[test]
    fn load_2d_matches_dense_oracle() {
        let m = build_mesh_2d(Domain::rect(0.0, 2.0, 0.0, 2.0).unwrap(), 10).unwrap();
        let f = |x: [f64; 2]| x[0] * x[0] + x[1] * x[1];
        let load = assemble_load(&m, &f, &QuadratureRule::triangle_degree4()).unwrap();
        let mut oracle = vec![0.0; m.n_dofs()];
        for k in 0..m.n_elements() {
            let e = m.element(k);
            let p = |i: usize| m.vertices()[e[i]];
            for (a, &vtx) in e.iter().enumerate() {
                if let Some(i) = m.interior_dof(vtx) {
                    oracle[i] += duffy_triangle_integral(p(0), p(1), p(2), |x, l| f(x) * l[a], 10);
                }
            }
        }
        for (l, o) in load.iter().zip(&oracle) {
            assert!((l - o).abs() < 1e-12, "{l} vs {o}");
        }
    }

    #[test]
    fn perturbation_matrix_cases() {
        let m = mesh1(4);
        let z = assemble_perturbation_matrix(&m, &Constant(0.0), &gl1()).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));

        let m2 = build_mesh_2d(Domain::rect(0.0, 2.0, 0.0, 2.0).unwrap(), 6).unwrap();
        let q = QuadratureRule::triangle_degree4();
        let a = assemble_perturbation_matrix(&m2, &Constant(1.0), &q).unwrap();
        let b = assemble_stiffness(&m2, &Constant(1.0), &q).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-14);
        }

        // η(x) = x: ∫_K x φ'_a φ'_b = ±(midpoint of K) / len.
        let k = assemble_perturbation_matrix(&m, &|x: [f64; 2]| x[0], &gl1()).unwrap();
        let len = 0.25;
        let mid = |e: usize| (e as f64 + 0.5) * len;
        for i in 0..3 {
            let node = i + 1;
            let diag = (mid(node - 1) + mid(node)) / len;
            assert!((k.get(i, i) - diag).abs() < 1e-14);
            if i + 1 < 3 {
                assert!((k.get(i, i + 1) + mid(node) / len).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mode_rhs_cases() {
        let m = mesh1(8);
        let k1 = assemble_stiffness(&m, &Constant(1.0), &gl1()).unwrap();
        let zero = mode_rhs(&k1, &vec![0.0; m.n_dofs()]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(matches!(mode_rhs(&k1, &[1.0]), Err(Error::Shape { .. })));

        // Direct elementwise integration of −(∇ I_h w, ∇φ_i).
        let w = |x: [f64; 2]| x[0] - x[0] * x[0];
        let prev = m.interpolate(w);
        let rhs = mode_rhs(&k1, &prev).unwrap();
        let mut oracle = vec![0.0; m.n_dofs()];
        for e in 0..m.n_elements() {
            let vs = m.element(e);
            let (xa, xb) = (m.vertices()[vs[0]][0], m.vertices()[vs[1]][0]);
            let len = xb - xa;
            let slope = (w([xb, 0.0]) - w([xa, 0.0])) / len;
            for (a, &v) in vs.iter().enumerate() {
                if let Some(i) = m.interior_dof(v) {
                    let dphi = if a == 0 { -1.0 / len } else { 1.0 / len };
                    oracle[i] -= slope * dphi * len;
                }
            }
        }
        for (r, o) in rhs.iter().zip(&oracle) {
            assert!((r - o).abs() < 1e-13);
        }

        let c = -0.7;
        let kc = assemble_perturbation_matrix(&m, &Constant(c), &gl1()).unwrap();
        let lhs = mode_rhs(&kc, &prev).unwrap();
        let base = k1.matvec(&prev).unwrap();
        for (l, b) in lhs.iter().zip(&base) {
            assert!((l + c * b).abs() < 1e-13);
        }
    }

    #[test]
    fn mass_matrix_integrates_constants() {
        let m = build_mesh_2d(Domain::rect(0.0, 1.0, 0.0, 1.0).unwrap(), 5).unwrap();
        let mass = assemble_mass(&m);
        let one = assemble_load(&m, &Constant(1.0), &QuadratureRule::triangle_degree4()).unwrap();
        // Row sums of the full mass matrix restricted to interior rows and
        // interior-interior coupling differ from the load near the boundary,
        // so only check interior-only rows.
        for i in 0..m.n_dofs() {
            let v = m.dof_vertex(i);
            let near_boundary = (0..m.n_elements())
                .filter(|&k| m.element(k).contains(&v))
                .any(|k| m.element(k).iter().any(|&w| m.is_boundary(w)));
            if !near_boundary {
                let row: f64 = m.pattern().row_range(i).map(|s| mass.values()[s]).sum();
                assert!((row - one[i]).abs() < 1e-14);
            }
        }
    }
}
