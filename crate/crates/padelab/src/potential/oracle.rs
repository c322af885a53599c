//! Direct energy-minimization cross-check for the equilibrium solver.
//!
//! Minimizes the discrete logarithmic energy `w^T K w` over the probability
//! simplex on a fixed arcsine-spaced grid covering S, by projected gradient
//! descent. The diagonal of K uses the local grid spacing as an effective
//! atom radius, `K_ii = -log(delta_i * e^{-3/2})`; without that self-energy
//! term the discrete minimizer collapses toward single atoms and the energy
//! is biased well outside any useful tolerance.

use super::{DiscreteMeasure, EquilibriumData, IntervalSystem, PotentialError};
use crate::bigseries::BigComplex;

#[derive(Clone, Debug)]
pub struct OracleResult {
    /// Estimate of the Robin constant (minimal energy).
    pub gamma_hat: f64,
    /// Estimate of the capacity, `exp(-gamma_hat)`.
    pub capacity_hat: f64,
    /// Minimizing weights as a discrete measure on the grid.
    pub measure: DiscreteMeasure,
    /// Mass carried by each interval of the system.
    pub interval_mass: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Euclidean projection onto the probability simplex (sort-based).
fn project_simplex(w: &mut [f64]) {
    let n = w.len();
    let mut u = w.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
            rho = i + 1;
        }
    }
    debug_assert!(rho > 0, "projection found no support");
    for wi in w.iter_mut().take(n) {
        *wi = (*wi - theta).max(0.0);
    }
}

/// Grid, kernel and minimization; `m` is the total number of grid points.
pub fn energy_oracle(
    system: &IntervalSystem,
    m: usize,
) -> Result<OracleResult, PotentialError> {
    if m < 100 {
        return Err(PotentialError::TooFewGridPoints(m));
    }
    let p = system.num_intervals();
    let total_len: f64 = system.intervals().map(|(a, b)| b - a).sum();

    // Arcsine-distributed grid, counts proportional to interval length.
    let mut xs: Vec<f64> = Vec::with_capacity(m);
    let mut owner: Vec<usize> = Vec::with_capacity(m);
    for (j, (a, b)) in system.intervals().enumerate() {
        let nj = if j + 1 == p {
            m - xs.len()
        } else {
            ((m as f64) * (b - a) / total_len).round().max(2.0) as usize
        };
        let (mid, r) = ((a + b) / 2.0, (b - a) / 2.0);
        for i in (0..nj).rev() {
            let th = (i as f64 + 0.5) * std::f64::consts::PI / nj as f64;
            xs.push(mid + r * th.cos());
            owner.push(j);
        }
    }
    let n = xs.len();

    // Local half-spacing as effective atom radius (single-sided at edges).
    let mut delta = vec![0.0; n];
    for i in 0..n {
        let left = if i > 0 && owner[i - 1] == owner[i] {
            xs[i] - xs[i - 1]
        } else {
            f64::INFINITY
        };
        let right = if i + 1 < n && owner[i + 1] == owner[i] {
            xs[i + 1] - xs[i]
        } else {
            f64::INFINITY
        };
        delta[i] = match (left.is_finite(), right.is_finite()) {
            (true, true) => 0.5 * (left + right),
            (true, false) => left,
            (false, true) => right,
            (false, false) => total_len / n as f64,
        };
    }

    // Kernel matrix.
    let mut k = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = -(xs[i] - xs[j]).abs().ln();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] = -(delta[i] * (-1.5f64).exp()).ln();
    }

    let matvec = |w: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let row = &k[i * n..(i + 1) * n];
            out[i] = row.iter().zip(w).map(|(a, b)| a * b).sum();
        }
    };

    // Lipschitz constant of the gradient via power iteration on K.
    let mut v = vec![1.0 / n as f64; n];
    let mut kv = vec![0.0; n];
    let mut lam = 1.0;
    for _ in 0..60 {
        matvec(&v, &mut kv);
        lam = kv.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..n {
            v[i] = kv[i] / lam;
        }
    }
    let eta = 1.0 / (2.0 * lam);

    // Projected gradient descent from the uniform measure.
    let mut w = vec![1.0 / n as f64; n];
    let mut grad = vec![0.0; n];
    let mut energy = f64::INFINITY;
    let mut converged = false;
    let max_iters = 6000usize;
    let mut iterations = max_iters;
    let mut stable = 0;
    for it in 0..max_iters {
        matvec(&w, &mut grad);
        let e: f64 = grad.iter().zip(&w).map(|(a, b)| a * b).sum();
        if (energy - e).abs() < 1e-13 * (1.0 + e.abs()) {
            stable += 1;
            if stable >= 10 {
                converged = true;
                iterations = it + 1;
                break;
            }
        } else {
            stable = 0;
        }
        energy = e;
        for i in 0..n {
            w[i] -= eta * 2.0 * grad[i];
        }
        project_simplex(&mut w);
    }
    matvec(&w, &mut grad);
    let gamma_hat: f64 = grad.iter().zip(&w).map(|(a, b)| a * b).sum();

    let mut interval_mass = vec![0.0; p];
    for i in 0..n {
        interval_mass[owner[i]] += w[i];
    }
    let atoms = xs
        .iter()
        .zip(&w)
        .map(|(x, wi)| (BigComplex::from_f64(128, *x), *wi))
        .collect();
    let total: f64 = w.iter().sum();
    let measure = DiscreteMeasure::new(atoms, total)?;

    Ok(OracleResult {
        gamma_hat,
        capacity_hat: (-gamma_hat).exp(),
        measure,
        interval_mass,
        converged,
        iterations,
    })
}

/// Compare oracle output against a solved equilibrium problem; returns
/// (gamma error, max interval-mass error).
pub fn oracle_deviation(oracle: &OracleResult, eq: &EquilibriumData) -> (f64, f64) {
    let de = (oracle.gamma_hat - eq.gamma()).abs();
    let dm = oracle
        .interval_mass
        .iter()
        .zip(eq.interval_mass())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (de, dm)
}

#[cfg(test)]
mod tests {
    use super::super::{solve_equilibrium, IntervalSystem};
    use super::*;

    #[test]
    fn simplex_projection_basics() {
        let mut w = vec![0.5, 0.5];
        project_simplex(&mut w);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);

        let mut w = vec![10.0, 0.0, 0.0];
        project_simplex(&mut w);
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert_eq!(w[1], 0.0);

        let mut w = vec![0.2, -0.1, 0.4];
        project_simplex(&mut w);
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn oracle_single_interval() {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let r = energy_oracle(&s, 400).unwrap();
        assert!(r.converged);
        assert!(
            (r.gamma_hat - 2f64.ln()).abs() < 2e-3,
            "gamma_hat = {} vs ln 2 = {}",
            r.gamma_hat,
            2f64.ln()
        );
    }

    #[test]
    fn oracle_two_intervals_matches_solver() {
        let s = IntervalSystem::from_intervals(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let eq = solve_equilibrium(&s, 64).unwrap();
        let r = energy_oracle(&s, 500).unwrap();
        let (de, dm) = oracle_deviation(&r, &eq);
        assert!(de < 2e-3, "gamma error {de}");
        assert!(dm < 1e-3, "mass error {dm}");
    }

    #[test]
    fn oracle_rejects_tiny_grid() {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        assert!(energy_oracle(&s, 10).is_err());
    }
}
