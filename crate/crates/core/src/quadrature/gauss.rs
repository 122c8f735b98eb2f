//! Gauss–Legendre nodes and weights on [0, 1].

use std::f64::consts::PI;

/// Nodes (ascending, strictly inside (0, 1)) and weights of the `q`-point
/// Gauss–Legendre rule on [0, 1]. Exact for polynomials of degree `2q - 1`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        // Newton on P_q starting from the Tricomi-style guess
        let mut z = (PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(q, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        // one polishing step once converged
        let (p, d) = legendre(q, z);
        z -= p / d;
        let (_, dp) = legendre(q, z);
        let w = 1.0 / ((1.0 - z * z) * dp * dp);
        // z is the i-th largest root on [-1, 1]; map symmetrically onto [0, 1]
        nodes[i] = 0.5 * (1.0 - z);
        nodes[q - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.5;
    }
    (nodes, weights)
}

/// `(P_q(z), P_q'(z))` by the three-term recurrence.
fn legendre(q: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=q {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if q == 0 {
        return (1.0, 0.0);
    }
    let qf = q as f64;
    (p1, qf * (z * p1 - p0) / (z * z - 1.0))
}
