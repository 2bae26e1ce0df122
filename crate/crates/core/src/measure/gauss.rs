//! Gauss–Jacobi rules via the Golub–Welsch eigenvalue method.

use nalgebra::DMatrix;

/// `n`-point rule on `[0, 1]` for the normalized weight `∝ (1 - u)^a`,
/// exact for polynomials of degree `≤ 2n - 1`. Returns `(nodes, weights)` with
/// weights summing to 1.
pub fn jacobi_unit_interval(n: usize, a: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let alpha = a as f64;
    let beta = 0.0;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let s = 2.0 * k + alpha + beta;
        jac[(i, i)] = if i == 0 {
            (beta - alpha) / (alpha + beta + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        if i + 1 < n {
            let m = k + 1.0;
            let s = 2.0 * m + alpha + beta;
            let num = 4.0 * m * (m + alpha) * (m + beta) * (m + alpha + beta);
            let den = s * s * (s + 1.0) * (s - 1.0);
            let off = (num / den).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = eig.eigenvectors[(0, i)].powi(2);
            ((1.0 + x) / 2.0, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫_0^1 u^p (1-u)^a du / ∫_0^1 (1-u)^a du = p! (a+1)! / (p+a+1)!
    fn beta_moment(p: usize, a: usize) -> f64 {
        let mut num = 1.0;
        for i in 1..=p {
            num *= i as f64;
        }
        let mut den = 1.0;
        for i in (a + 2)..=(p + a + 1) {
            den *= i as f64;
        }
        num / den
    }

    #[test]
    fn exact_up_to_degree() {
        for a in 0..4 {
            for n in 1..12 {
                let (x, w) = jacobi_unit_interval(n, a);
                for p in 0..(2 * n) {
                    let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                    let exact = beta_moment(p, a);
                    assert!((q - exact).abs() < 1e-13, "a={a} n={n} p={p}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn nodes_inside_and_weights_positive() {
        let (x, w) = jacobi_unit_interval(20, 2);
        assert!(x.iter().all(|&u| u > 0.0 && u < 1.0));
        assert!(w.iter().all(|&v| v > 0.0));
    }
}
