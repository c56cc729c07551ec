//! Envelope (profile) Cholesky factorization with reusable triangular solves.
//!
//! The structured meshes number interior DOFs in natural or row-major grid
//! order, which already yields a narrow profile, so no reordering is applied.
//! The factor is immutable once built; any number of right-hand sides can be
//! solved against it concurrently.

use std::ops::AddAssign;

use crate::error::{Error, Result};
use crate::field::FieldVector;
use crate::sparse::CsrMatrix;

/// Operation counts for one run, merged across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub factorizations: u64,
    /// One forward plus one backward substitution.
    pub triangular_solve_pairs: u64,
    pub matvecs: u64,
    pub assemblies: u64,
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.factorizations += rhs.factorizations;
        self.triangular_solve_pairs += rhs.triangular_solve_pairs;
        self.matvecs += rhs.matvecs;
        self.assemblies += rhs.assemblies;
    }
}

/// `A = L Lᵀ` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct Factorization {
    dim: usize,
    /// Symmetric permutation applied before factoring (identity for the
    /// structured orderings used here).
    ordering: Vec<usize>,
    /// First stored column of each row of `L`.
    first_col: Vec<usize>,
    /// Start of each row in `values`; row `i` holds columns `first_col[i]..=i`.
    row_start: Vec<usize>,
    values: Vec<f64>,
}

impl Factorization {
    /// Factors a symmetric positive-definite matrix.
    pub fn new(k: &CsrMatrix, counters: &mut OpCounters) -> Result<Self> {
        let n = k.dim();
        let pattern = k.pattern();
        let first_col: Vec<usize> = (0..n).map(|i| pattern.first_col(i)).collect();
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        for i in 0..n {
            row_start.push(row_start[i] + (i - first_col[i] + 1));
        }
        let mut values = vec![0.0; row_start[n]];
        for i in 0..n {
            for s in pattern.row_range(i) {
                let j = pattern.row(i)[s - pattern.row_range(i).start];
                if j <= i {
                    values[row_start[i] + j - first_col[i]] = k.values()[s];
                }
            }
        }

        for i in 0..n {
            let fi = first_col[i];
            let ri = row_start[i];
            for j in fi..i {
                let fj = first_col[j];
                let rj = row_start[j];
                let start = fi.max(fj);
                let mut acc = values[ri + j - fi];
                for c in start..j {
                    acc -= values[ri + c - fi] * values[rj + c - fj];
                }
                values[ri + j - fi] = acc / values[rj + j - fj];
            }
            let mut d = values[ri + i - fi];
            for c in fi..i {
                let l = values[ri + c - fi];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d });
            }
            values[ri + i - fi] = d.sqrt();
        }
        counters.factorizations += 1;
        Ok(Self {
            dim: n,
            ordering: (0..n).collect(),
            first_col,
            row_start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// Stored entries of `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    /// Solves `A x = rhs` by one forward and one backward substitution.
    pub fn solve(&self, rhs: &[f64], counters: &mut OpCounters) -> Result<FieldVector> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x, counters)?;
        Ok(FieldVector(x))
    }

    pub fn solve_in_place(&self, x: &mut [f64], counters: &mut OpCounters) -> Result<()> {
        let n = self.dim;
        if x.len() != n {
            return Err(Error::Shape {
                expected: n,
                found: x.len(),
            });
        }
        // L y = b
        for i in 0..n {
            let fi = self.first_col[i];
            let row = &self.values[self.row_start[i]..self.row_start[i + 1]];
            let mut acc = x[i];
            for (l, xc) in row[..i - fi].iter().zip(&x[fi..i]) {
                acc -= l * xc;
            }
            x[i] = acc / row[i - fi];
        }
        // Lᵀ x = y, column-oriented sweep over the rows of L.
        for i in (0..n).rev() {
            let fi = self.first_col[i];
            let row = &self.values[self.row_start[i]..self.row_start[i + 1]];
            let xi = x[i] / row[i - fi];
            x[i] = xi;
            for (l, xc) in row[..i - fi].iter().zip(&mut x[fi..i]) {
                *xc -= l * xi;
            }
        }
        counters.triangular_solve_pairs += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_load, assemble_stiffness};
    use crate::field::Constant;
    use crate::mesh::{build_mesh_1d, Domain};
    use crate::quadrature::QuadratureRule;

    #[test]
    fn one_by_one() {
        let k = CsrMatrix::from_dense(&[vec![4.0]]);
        let mut c = OpCounters::default();
        let f = Factorization::new(&k, &mut c).unwrap();
        assert_eq!(f.values, vec![2.0]);
        assert_eq!(f.solve(&[1.0], &mut c).unwrap().0, vec![0.25]);
        assert_eq!(c.factorizations, 1);
        assert_eq!(c.triangular_solve_pairs, 1);
    }

    #[test]
    fn laplacian_nodal_solution() {
        let m = build_mesh_1d(Domain::interval(0.0, 1.0).unwrap(), 4).unwrap();
        let q = QuadratureRule::assembly_default(1);
        let k = assemble_stiffness(&m, &Constant(1.0), &q).unwrap();
        let b = assemble_load(&m, &Constant(1.0), &q).unwrap();
        let mut c = OpCounters::default();
        let x = Factorization::new(&k, &mut c).unwrap().solve(&b, &mut c).unwrap();
        for (xi, e) in x.iter().zip([0.09375, 0.125, 0.09375]) {
            assert!((xi - e).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let k = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let err = Factorization::new(&k, &mut OpCounters::default()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { row: 1, .. }));
    }

    #[test]
    fn solve_contracts() {
        let m = build_mesh_1d(Domain::interval(0.0, 1.0).unwrap(), 9).unwrap();
        let q = QuadratureRule::assembly_default(1);
        let k = assemble_stiffness(&m, &|x: [f64; 2]| 1.0 + x[0], &q).unwrap();
        let mut c = OpCounters::default();
        let f = Factorization::new(&k, &mut c).unwrap();
        assert!(f.factor_nnz() * 2 >= k.nnz());
        let zero = f.solve(&vec![0.0; 8], &mut c).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let mut e3 = vec![0.0; 8];
        e3[3] = 1.0;
        let x = f.solve(&k.matvec(&e3).unwrap(), &mut c).unwrap();
        for (a, b) in x.iter().zip(&e3) {
            assert!((a - b).abs() < 1e-10);
        }
        let b = vec![0.3; 8];
        let x1 = f.solve(&b, &mut c).unwrap();
        let x2 = f.solve(&b, &mut c).unwrap();
        assert_eq!(
            x1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            x2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(matches!(
            f.solve(&[1.0], &mut c),
            Err(Error::Shape { expected: 8, found: 1 })
        ));
        assert_eq!(c.triangular_solve_pairs, 4);
    }
}
