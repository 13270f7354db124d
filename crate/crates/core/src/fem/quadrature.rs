//! Symmetric quadrature rules on triangles in barycentric coordinates.

/// Points are barycentric triples; weights sum to the reference area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn orbit3(a: f64, w: f64, points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        points.push(p);
        weights.push(w);
    }
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            degree: 1,
        }
    }

    /// Six-point rule exact for degree 4.
    pub fn six_point() -> Self {
        let (mut points, mut weights) = (Vec::new(), Vec::new());
        orbit3(0.445_948_490_915_965, 0.5 * 0.223_381_589_678_011_5, &mut points, &mut weights);
        orbit3(0.091_576_213_509_770_74, 0.5 * 0.109_951_743_655_321_87, &mut points, &mut weights);
        Self { points, weights, degree: 4 }
    }

    /// Seven-point rule exact for degree 5.
    pub fn seven_point() -> Self {
        let s15 = 15f64.sqrt();
        let (mut points, mut weights) = (vec![[1.0 / 3.0; 3]], vec![0.5 * 9.0 / 40.0]);
        orbit3((6.0 - s15) / 21.0, 0.5 * (155.0 - s15) / 1200.0, &mut points, &mut weights);
        orbit3((6.0 + s15) / 21.0, 0.5 * (155.0 + s15) / 1200.0, &mut points, &mut weights);
        Self { points, weights, degree: 5 }
    }

    /// Collapsed (Duffy) tensor Gauss-Legendre rule with `n` points per
    /// direction, exact for degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (si, wi) in x.iter().zip(&w) {
            let s = 0.5 * (si + 1.0);
            for (ti, wj) in x.iter().zip(&w) {
                let t = 0.5 * (ti + 1.0);
                let (xi, eta) = (s, (1.0 - s) * t);
                points.push([1.0 - xi - eta, xi, eta]);
                weights.push(0.25 * wi * wj * (1.0 - s));
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫_T x^a y^b over the reference triangle is a! b! / (a + b + 2)!.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn check(rule: &QuadratureRule) {
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 0.5).abs() < 1e-14, "weights sum to {total}");
        for a in 0..=rule.degree as u32 {
            for b in 0..=(rule.degree as u32 - a) {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                let exact = monomial_exact(a, b);
                assert!(
                    (q - exact).abs() < 1e-14 * exact.max(1e-3),
                    "degree ({a},{b}): {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn rules_integrate_monomials_exactly() {
        check(&QuadratureRule::centroid());
        check(&QuadratureRule::six_point());
        check(&QuadratureRule::seven_point());
        check(&QuadratureRule::collapsed_gauss(6));
    }

    #[test]
    fn seven_point_is_not_degree_six() {
        let rule = QuadratureRule::seven_point();
        let q: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[1].powi(6))
            .sum();
        assert!((q - monomial_exact(6, 0)).abs() > 1e-8);
    }

    #[test]
    fn gauss_legendre_small() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(5);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        let x8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((x8 - 2.0 / 9.0).abs() < 1e-14);
    }
}
