//! Logarithmic potential theory on finite unions of real intervals:
//! equilibrium measure, Robin constant, capacity, Green function, level
//! curves, and a brute-force energy-minimization cross-check.
//!
//! The equilibrium density on `S = U_j [a_{2j-1}, a_{2j}]` is
//! `|h(x)| / (pi sqrt(|prod_i (x - a_i)|))` with `h` a real polynomial of
//! degree `p - 1` fixed by the gap conditions and unit total mass. All
//! integrals use the cosine substitution per interval, which removes the
//! endpoint singularities and makes midpoint quadrature spectrally accurate.

mod level;
mod oracle;

pub use level::{level_curve, LevelLoop};
pub use oracle::{energy_oracle, oracle_deviation, OracleResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigseries::BigComplex;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("interval endpoints must be strictly increasing and finite")]
    BadEndpoints,
    #[error("odd number of endpoints")]
    OddEndpoints,
    #[error("nodes per interval must be at least 32, got {0}")]
    TooFewNodes(usize),
    #[error("singular linear system for the density polynomial")]
    SingularSystem,
    #[error("quadrature did not stabilize after refinement")]
    QuadratureNonConvergence,
    #[error("computed density is negative on S (degenerate geometry)")]
    NegativeDensity,
    #[error("evaluation point coincides with an atom of the measure")]
    AtomCollision,
    #[error("level parameter rho must exceed 1, got {0}")]
    BadLevel(f64),
    #[error("oracle grid must have at least 100 points, got {0}")]
    TooFewGridPoints(usize),
    #[error("measure weights are invalid (negative or mass mismatch)")]
    BadMeasure,
}

/// A finite union of disjoint closed real intervals, kept as the sorted
/// list of endpoints `a_1 < a_2 < ... < a_{2p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSystem {
    endpoints: Vec<f64>,
}

impl IntervalSystem {
    pub fn new(endpoints: Vec<f64>) -> Result<Self, PotentialError> {
        if endpoints.len() < 2 || endpoints.len() % 2 != 0 {
            return Err(PotentialError::OddEndpoints);
        }
        if endpoints.iter().any(|e| !e.is_finite())
            || endpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(PotentialError::BadEndpoints);
        }
        Ok(Self { endpoints })
    }

    pub fn from_intervals(iv: &[(f64, f64)]) -> Result<Self, PotentialError> {
        let mut iv = iv.to_vec();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let endpoints = iv.iter().flat_map(|&(a, b)| [a, b]).collect();
        Self::new(endpoints)
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    /// Number of intervals `p`.
    pub fn num_intervals(&self) -> usize {
        self.endpoints.len() / 2
    }

    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.endpoints[2 * j], self.endpoints[2 * j + 1])
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.num_intervals()).map(|j| self.interval(j))
    }

    pub fn diameter(&self) -> f64 {
        self.endpoints[self.endpoints.len() - 1] - self.endpoints[0]
    }

    /// Distance from a complex point to S.
    pub fn distance(&self, re: f64, im: f64) -> f64 {
        let mut d = f64::INFINITY;
        for (a, b) in self.intervals() {
            let dx = if re < a {
                a - re
            } else if re > b {
                re - b
            } else {
                0.0
            };
            d = d.min(dx.hypot(im));
        }
        d
    }

    pub fn contains(&self, re: f64, im: f64, tol: f64) -> bool {
        self.distance(re, im) <= tol
    }
}

/// Atoms with nonnegative weights; houses zero-counting measures and the
/// oracle's discretized equilibrium.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    atoms: Vec<(BigComplex, f64)>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(BigComplex, f64)>, total_mass: f64) -> Result<Self, PotentialError> {
        let sum: f64 = atoms.iter().map(|(_, w)| *w).sum();
        if atoms.iter().any(|(_, w)| *w < 0.0) || (sum - total_mass).abs() > 1e-12 {
            return Err(PotentialError::BadMeasure);
        }
        Ok(Self { atoms, total_mass })
    }

    pub fn atoms(&self) -> &[(BigComplex, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

/// `sum_i w_i log(1/|z - x_i|)`; errors if `z` is (numerically) an atom.
pub fn potential_of_measure(mu: &DiscreteMeasure, z: &BigComplex) -> Result<f64, PotentialError> {
    let prec = z.prec();
    let mut acc = 0.0f64;
    for (x, w) in mu.atoms() {
        let d = (z - x).abs();
        let tiny = rug::Float::with_val(prec, 1) >> (prec / 2);
        if d < tiny {
            return Err(PotentialError::AtomCollision);
        }
        acc -= w * d.ln().to_f64();
    }
    Ok(acc)
}

/// Solved equilibrium problem for an interval system.
#[derive(Clone, Debug)]
pub struct EquilibriumData {
    system: IntervalSystem,
    /// Coefficients (ascending) of the degree p-1 density polynomial.
    h_coeffs: Vec<f64>,
    gamma: f64,
    capacity: f64,
    /// Quadrature nodes over all intervals, ascending within each interval.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per-interval node count.
    nodes_per_interval: usize,
    interval_mass: Vec<f64>,
    /// Cosine coefficients of the smooth angular density per interval,
    /// used for the singularity-free self-potential on S.
    cos_coeffs: Vec<Vec<f64>>,
    frostman_dev: f64,
}

fn midpoint_angles(k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |i| (i as f64 + 0.5) * std::f64::consts::PI / k as f64)
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Product over all endpoints except the two bounding the given range.
fn rest_abs(endpoints: &[f64], skip: (usize, usize), t: f64) -> f64 {
    let mut p = 1.0;
    for (i, &e) in endpoints.iter().enumerate() {
        if i != skip.0 && i != skip.1 {
            p *= (t - e).abs();
        }
    }
    p
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, PotentialError> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(PotentialError::SingularSystem);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in (row + 1)..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Smooth angular integrand moments with refinement until stable.
fn stable_moment<F: Fn(f64) -> f64>(f: F) -> Result<f64, PotentialError> {
    let mut k = 128usize;
    let mut prev = f64::NAN;
    for _ in 0..5 {
        let h = std::f64::consts::PI / k as f64;
        let val: f64 = midpoint_angles(k).map(&f).sum::<f64>() * h;
        if (val - prev).abs() <= 1e-13 * (1.0 + val.abs()) {
            return Ok(val);
        }
        prev = val;
        k *= 2;
    }
    Err(PotentialError::QuadratureNonConvergence)
}

/// Solve the equilibrium problem with `k` quadrature nodes per interval.
pub fn solve_equilibrium(system: &IntervalSystem, k: usize) -> Result<EquilibriumData, PotentialError> {
    if k < 32 {
        return Err(PotentialError::TooFewNodes(k));
    }
    let p = system.num_intervals();
    let endpoints = system.endpoints();

    // Density polynomial: p = 1 has the arcsine closed form; otherwise solve
    // the (p-1) gap conditions plus unit mass for the p coefficients.
    let h_coeffs: Vec<f64> = if p == 1 {
        vec![1.0]
    } else {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p);
        let mut rhs = vec![0.0; p];
        for g in 0..p - 1 {
            let (ga, gb) = (endpoints[2 * g + 1], endpoints[2 * g + 2]);
            let (m, r) = ((ga + gb) / 2.0, (gb - ga) / 2.0);
            let skip = (2 * g + 1, 2 * g + 2);
            let mut row = Vec::with_capacity(p);
            for kk in 0..p {
                row.push(stable_moment(|th| {
                    let t = m + r * th.cos();
                    t.powi(kk as i32) / rest_abs(endpoints, skip, t).sqrt()
                })?);
            }
            rows.push(row);
        }
        // Mass row with the sign pattern of h on each interval: one root per
        // gap and positive sign on the rightmost interval.
        let mut mass_row = vec![0.0; p];
        for j in 0..p {
            let sign = if (p - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
            let (a, b) = system.interval(j);
            let (m, r) = ((a + b) / 2.0, (b - a) / 2.0);
            let skip = (2 * j, 2 * j + 1);
            for kk in 0..p {
                mass_row[kk] += sign
                    * stable_moment(|th| {
                        let t = m + r * th.cos();
                        t.powi(kk as i32)
                            / (std::f64::consts::PI * rest_abs(endpoints, skip, t).sqrt())
                    })?;
            }
        }
        rows.push(mass_row);
        rhs[p - 1] = 1.0;
        solve_dense(rows, rhs)?
    };

    // Quadrature nodes and weights; angular density s_j(theta) is smooth.
    let mut nodes = Vec::with_capacity(p * k);
    let mut weights = Vec::with_capacity(p * k);
    let mut interval_mass = Vec::with_capacity(p);
    let mut cos_coeffs = Vec::with_capacity(p);
    let h_step = std::f64::consts::PI / k as f64;
    for j in 0..p {
        let (a, b) = system.interval(j);
        let (m, r) = ((a + b) / 2.0, (b - a) / 2.0);
        let skip = (2 * j, 2 * j + 1);
        let s_vals: Vec<f64> = midpoint_angles(k)
            .map(|th| {
                let t = m + r * th.cos();
                poly_eval(&h_coeffs, t).abs()
                    / (std::f64::consts::PI * rest_abs(endpoints, skip, t).sqrt())
            })
            .collect();
        let mut mass = 0.0;
        for (i, th) in midpoint_angles(k).enumerate() {
            let t = m + r * th.cos();
            let w = s_vals[i] * h_step;
            nodes.push(t);
            weights.push(w);
            mass += w;
        }
        interval_mass.push(mass);
        // Cosine coefficients of s_j for the spectral self-potential.
        let mut b_coeffs = vec![0.0; k];
        for kk in 0..k {
            let mut acc = 0.0;
            for (i, th) in midpoint_angles(k).enumerate() {
                acc += s_vals[i] * (kk as f64 * th).cos();
            }
            b_coeffs[kk] = acc * if kk == 0 { 1.0 } else { 2.0 } / k as f64;
        }
        cos_coeffs.push(b_coeffs);
    }

    let total_mass: f64 = interval_mass.iter().sum();
    if (total_mass - 1.0).abs() > 1e-10 {
        return Err(PotentialError::NegativeDensity);
    }

    let mut eq = EquilibriumData {
        system: system.clone(),
        h_coeffs,
        gamma: 0.0,
        capacity: 0.0,
        nodes,
        weights,
        nodes_per_interval: k,
        interval_mass,
        cos_coeffs,
        frostman_dev: 0.0,
    };

    // Robin constant as the Frostman average of the potential over S; the
    // spread doubles as the constancy check.
    let mut gamma = 0.0;
    let mut vals = Vec::with_capacity(p * k);
    for j in 0..p {
        let (a, b) = system.interval(j);
        let (m, r) = ((a + b) / 2.0, (b - a) / 2.0);
        for (i, th) in midpoint_angles(k).enumerate() {
            let x = m + r * th.cos();
            let v = eq.potential_on_s(j, th, x);
            vals.push(v);
            gamma += eq.weights[j * k + i] * v;
        }
    }
    eq.gamma = gamma;
    eq.capacity = (-gamma).exp();
    eq.frostman_dev = vals
        .iter()
        .map(|v| (v - gamma).abs())
        .fold(0.0, f64::max);
    Ok(eq)
}

impl EquilibriumData {
    pub fn system(&self) -> &IntervalSystem {
        &self.system
    }

    pub fn h_coeffs(&self) -> &[f64] {
        &self.h_coeffs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval_mass(&self) -> &[f64] {
        &self.interval_mass
    }

    /// Max deviation of the equilibrium potential from gamma over S.
    pub fn frostman_deviation(&self) -> f64 {
        self.frostman_dev
    }

    /// Equilibrium potential at a point `x` of interval `j` at angle `theta`.
    ///
    /// The own-interval part uses the cosine-series identity
    /// `log|cos a - cos b| = -log 2 - sum 2 cos(ka)cos(kb)/k`, so the log
    /// singularity never appears; other intervals use plain quadrature.
    fn potential_on_s(&self, j: usize, theta: f64, x: f64) -> f64 {
        let k = self.nodes_per_interval;
        let (a, b) = self.system.interval(j);
        let r = (b - a) / 2.0;
        let bc = &self.cos_coeffs[j];
        let mut own = -std::f64::consts::PI * bc[0] * (r / 2.0).ln();
        for kk in 1..k {
            own += std::f64::consts::PI * bc[kk] / kk as f64 * (kk as f64 * theta).cos();
        }
        let mut other = 0.0;
        for jj in 0..self.system.num_intervals() {
            if jj == j {
                continue;
            }
            for i in 0..k {
                let idx = jj * k + i;
                other -= self.weights[idx] * (x - self.nodes[idx]).abs().ln();
            }
        }
        own + other
    }

    /// Equilibrium potential at a point off S via quadrature.
    pub fn potential_off_s(&self, re: f64, im: f64) -> f64 {
        let mut acc = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            let d = (re - t).hypot(im);
            acc -= w * d.ln();
        }
        acc
    }

    /// Green function `g_S(z, infinity) = gamma - V(z)`, clamped at zero.
    ///
    /// Single intervals use the closed Zhukovskii form; accuracy of the
    /// quadrature route degrades smoothly as z approaches S.
    pub fn green(&self, z: &BigComplex) -> f64 {
        self.green_f64(z.re_f64(), z.im_f64())
    }

    pub fn green_f64(&self, re: f64, im: f64) -> f64 {
        if self.system.contains(re, im, 1e-14) {
            return 0.0;
        }
        if self.system.num_intervals() == 1 {
            let (a, b) = self.system.interval(0);
            let psi = num_complex::Complex64::new((2.0 * re - (a + b)) / (b - a), 2.0 * im / (b - a));
            let s = (psi - 1.0).sqrt() * (psi + 1.0).sqrt();
            let phi = psi + s;
            return phi.norm().ln().max(0.0);
        }
        (self.gamma - self.potential_off_s(re, im)).max(0.0)
    }

    /// CDF of the equilibrium measure at `x` (step function over nodes).
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            if *t <= x {
                acc += w;
            }
        }
        acc
    }

    /// Discretization of the equilibrium measure as a discrete measure.
    pub fn to_measure(&self, prec: u32) -> DiscreteMeasure {
        let atoms = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| (BigComplex::from_f64(prec, *t), *w))
            .collect();
        let total: f64 = self.weights.iter().sum();
        DiscreteMeasure::new(atoms, total).expect("equilibrium weights are nonnegative")
    }

    /// JSON export with decimal-string numeric fields.
    pub fn to_json(&self) -> String {
        let s = |v: f64| serde_json::Value::String(format!("{v:?}"));
        let arr = |v: &[f64]| {
            serde_json::Value::Array(v.iter().map(|x| s(*x)).collect())
        };
        serde_json::to_string_pretty(&serde_json::json!({
            "endpoints": arr(self.system.endpoints()),
            "h_coeffs": arr(&self.h_coeffs),
            "gamma": s(self.gamma),
            "capacity": s(self.capacity),
            "nodes": arr(&self.nodes),
            "weights": arr(&self.weights),
        }))
        .expect("static schema")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_interval_closed_forms() {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let eq = solve_equilibrium(&s, 64).unwrap();
        assert!((eq.capacity() - 0.5).abs() < 1e-12);
        assert!((eq.gamma() - 2.0f64.ln()).abs() < 1e-12);
        // density at x = 0 is 1/pi
        let density_mid = poly_eval(eq.h_coeffs(), 0.0).abs() / std::f64::consts::PI;
        assert!((density_mid - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!(eq.frostman_deviation() < 1e-10);
    }

    #[test]
    fn two_interval_symmetric() {
        let s = IntervalSystem::from_intervals(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let eq = solve_equilibrium(&s, 64).unwrap();
        // cap(S)^2 = cap([1,4]) = 3/4 under the squaring map.
        assert!(
            (eq.capacity() - 3f64.sqrt() / 2.0).abs() < 1e-8,
            "cap = {}",
            eq.capacity()
        );
        // h(x) = c x: odd by symmetry.
        assert!(eq.h_coeffs()[0].abs() < 1e-10 * eq.h_coeffs()[1].abs());
        assert!((eq.interval_mass()[0] - 0.5).abs() < 1e-10);
        assert!(eq.frostman_deviation() < 1e-8);
    }

    #[test]
    fn quadrature_stability() {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let a = solve_equilibrium(&s, 64).unwrap();
        let b = solve_equilibrium(&s, 128).unwrap();
        assert!((a.capacity() - b.capacity()).abs() < 1e-12);
    }

    #[test]
    fn green_closed_form() {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let eq = solve_equilibrium(&s, 64).unwrap();
        let g2 = eq.green_f64(2.0, 0.0);
        assert!((g2 - (2.0 + 3f64.sqrt()).ln()).abs() < 1e-12);
        assert_eq!(eq.green_f64(0.3, 0.0), 0.0);
        // asymptotic normalization
        let z = 1e6;
        assert!((eq.green_f64(z, 0.0) - z.ln() - eq.gamma()).abs() < 1e-5);
    }

    #[test]
    fn green_multi_interval_matches_potential() {
        let s = IntervalSystem::from_intervals(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let eq = solve_equilibrium(&s, 256).unwrap();
        // boundary value and asymptotics
        assert_eq!(eq.green_f64(1.5, 0.0), 0.0);
        let z = 1e6;
        assert!((eq.green_f64(z, 0.0) - z.ln() - eq.gamma()).abs() < 1e-5);
        // harmonic mean-value property away from S
        let (cx, cy) = (0.0, 1.5);
        let g0 = eq.green_f64(cx, cy);
        let rr = 1e-3;
        let m: f64 = (0..64)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
                eq.green_f64(cx + rr * a.cos(), cy + rr * a.sin())
            })
            .sum::<f64>()
            / 64.0;
        assert!((m - g0).abs() < 1e-6);
    }

    #[test]
    fn capacity_monotone_and_affine() {
        for t in [0.5, 1.0, 3.0] {
            let s = IntervalSystem::from_intervals(&[(-t, t)]).unwrap();
            let eq = solve_equilibrium(&s, 64).unwrap();
            assert!((eq.capacity() - t / 2.0).abs() < 1e-10);
        }
        let small = IntervalSystem::from_intervals(&[(-1.0, -0.5), (0.5, 1.0)]).unwrap();
        let big = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let cs = solve_equilibrium(&small, 64).unwrap().capacity();
        let cb = solve_equilibrium(&big, 64).unwrap().capacity();
        assert!(cs <= cb);
    }

    #[test]
    fn potential_of_measure_cases() {
        let prec = 128;
        let at = |re: f64, im: f64| BigComplex::new(prec, re, im);
        let one_atom = DiscreteMeasure::new(vec![(at(0.0, 0.0), 1.0)], 1.0).unwrap();
        let v = potential_of_measure(&one_atom, &at(2.0, 0.0)).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-14);

        let two = DiscreteMeasure::new(vec![(at(1.0, 0.0), 0.5), (at(-1.0, 0.0), 0.5)], 1.0).unwrap();
        let v = potential_of_measure(&two, &at(0.0, 1.0)).unwrap();
        assert!((v - (-0.5 * 2f64.ln())).abs() < 1e-14);

        assert!(matches!(
            potential_of_measure(&one_atom, &at(0.0, 0.0)),
            Err(PotentialError::AtomCollision)
        ));
    }

    #[test]
    fn equilibrium_discretization_self_potential() {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let eq = solve_equilibrium(&s, 128).unwrap();
        let mu = eq.to_measure(128);
        let z = BigComplex::new(128, 2.0, 0.0);
        let u = potential_of_measure(&mu, &z).unwrap();
        let expect = 2f64.ln() - (2.0 + 3f64.sqrt()).ln();
        assert!((u - expect).abs() < 1e-8, "got {u}, want {expect}");
    }
}
