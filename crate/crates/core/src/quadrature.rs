//! Quadrature rules on the reference segment `[0, 1]` and the reference
//! triangle `{(s, t): s, t ≥ 0, s + t ≤ 1}`.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Reference coordinates; the second component is unused on segments.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub degree: usize,
    /// 1 for segments, 2 for triangles.
    pub dim: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Measure of the reference element, equal to the weight sum.
    pub fn reference_measure(&self) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            0.5
        }
    }

    /// `n`-point Gauss–Legendre rule mapped to `[0, 1]`.
    pub fn gauss_legendre(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self {
            points: x.iter().map(|&t| [0.5 * (t + 1.0), 0.0]).collect(),
            weights: w.iter().map(|&w| 0.5 * w).collect(),
            degree: 2 * n - 1,
            dim: 1,
        }
    }

    /// Six-point rule exact for degree 4 polynomials.
    pub fn triangle_degree4() -> Self {
        let groups: [(f64, f64, f64); 2] = [
            (0.223_381_589_678_011, 0.108_103_018_168_070, 0.445_948_490_915_965),
            (0.109_951_743_655_322, 0.816_847_572_980_459, 0.091_576_213_509_771),
        ];
        let mut rule = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 4,
            dim: 2,
        };
        for (w, a, b) in groups {
            rule.push_orbit3(w, a, b);
        }
        rule
    }

    /// Twelve-point rule exact for degree 6 polynomials.
    pub fn triangle_degree6() -> Self {
        let mut rule = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 6,
            dim: 2,
        };
        rule.push_orbit3(0.116_786_275_726_379, 0.501_426_509_658_179, 0.249_286_745_170_910);
        rule.push_orbit3(0.050_844_906_370_207, 0.873_821_971_016_996, 0.063_089_014_491_502);
        let (w, a, b, c) = (
            0.082_851_075_618_374,
            0.053_145_049_844_817,
            0.310_352_451_033_784,
            0.636_502_499_121_399,
        );
        for (l1, l2) in [(a, b), (b, a), (b, c), (c, b), (a, c), (c, a)] {
            rule.points.push([l1, l2]);
            rule.weights.push(0.5 * w);
        }
        rule
    }

    /// Barycentric orbit `(a, b, b)` and its rotations; `w` normalized to unit area.
    fn push_orbit3(&mut self, w: f64, a: f64, b: f64) {
        for p in [[b, b], [a, b], [b, a]] {
            self.points.push(p);
            self.weights.push(0.5 * w);
        }
    }

    /// Default rule for assembling variable-coefficient matrices and loads.
    pub fn assembly_default(dim: usize) -> Self {
        if dim == 1 {
            Self::gauss_legendre(3)
        } else {
            Self::triangle_degree4()
        }
    }

    /// Higher-order rule for measuring errors against closed-form fields.
    pub fn error_default(dim: usize) -> Self {
        if dim == 1 {
            Self::gauss_legendre(5)
        } else {
            Self::triangle_degree6()
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    fn triangle_monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1, 2, 3, 5, 64, 400] {
            let r = QuadratureRule::gauss_legendre(n);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13, "n={n}");
            assert!(r.weights.iter().all(|&w| w > 0.0));
            let deg = (2 * n - 1).min(40) as i32;
            for p in 0..=deg {
                let q: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x[0].powi(p))
                    .sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn gauss_legendre_known_nodes() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        let (x, _) = gauss_legendre(4);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn triangle_rules_exact_to_degree() {
        for rule in [
            QuadratureRule::triangle_degree4(),
            QuadratureRule::triangle_degree6(),
        ] {
            assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for a in 0..=rule.degree as u32 {
                for b in 0..=(rule.degree as u32 - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = triangle_monomial(a, b);
                    assert!(
                        (q - exact).abs() < 1e-13,
                        "degree {} a={a} b={b}: {q} vs {exact}",
                        rule.degree
                    );
                }
            }
        }
    }
}
