//! Exact-integration rules on triangles and edges.

/// Symmetric 6-point rule, exact for polynomials of degree 4.
/// Points are barycentric; weights sum to one and are scaled by the area.
pub const TRIANGLE_DEG4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_886;
    const B1: f64 = 0.108_103_018_168_070_227;
    const W1: f64 = 0.223_381_589_678_011_466;
    const A2: f64 = 0.091_576_213_509_770_743;
    const B2: f64 = 0.816_847_572_980_458_514;
    const W2: f64 = 0.109_951_743_655_321_868;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// Three-point Gauss-Legendre rule on `[0, 1]` (exact to degree 5).
pub const EDGE_GAUSS3: [(f64, f64); 3] = {
    // 0.5 * sqrt(3/5)
    const D: f64 = 0.387_298_334_620_741_7;
    [(0.5 - D, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + D, 5.0 / 18.0)]
};

#[inline]
pub fn bary_to_point(x: &[[f64; 2]; 3], b: [f64; 3]) -> [f64; 2] {
    [
        b[0] * x[0][0] + b[1] * x[1][0] + b[2] * x[2][0],
        b[0] * x[0][1] + b[1] * x[1][1] + b[2] * x[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral(p: u32, q: u32) -> f64 {
        // over the reference triangle (0,0),(1,0),(0,1): p! q! / (p+q+2)!
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        f(p) * f(q) / f(p + q + 2)
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        let x = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for p in 0..=4 {
            for q in 0..=(4 - p) {
                let approx: f64 = TRIANGLE_DEG4
                    .iter()
                    .map(|(b, w)| {
                        let pt = bary_to_point(&x, *b);
                        0.5 * w * pt[0].powi(p as i32) * pt[1].powi(q as i32)
                    })
                    .sum();
                let exact = monomial_integral(p, q);
                assert!((approx - exact).abs() < 1e-15, "x^{p} y^{q}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn edge_rule_exact_to_degree_five() {
        for k in 0..=5 {
            let approx: f64 = EDGE_GAUSS3.iter().map(|(t, w)| w * t.powi(k)).sum();
            assert!((approx - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
