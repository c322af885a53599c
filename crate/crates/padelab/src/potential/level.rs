//! Level curves of the Green function: `Gamma_rho = { z : g(z) = log rho }`.
//!
//! Components are found by checking, gap by gap, whether the saddle value of
//! g on the gap lies below log rho (then the loops around the neighboring
//! intervals have merged). Each loop is traced by radial bisection from the
//! component center, then resampled to (approximately) uniform arclength
//! with every output point re-projected onto the curve.

use super::{EquilibriumData, PotentialError};

/// One closed component of a level curve, as (re, im) points in positive
/// (counterclockwise) orientation.
#[derive(Clone, Debug)]
pub struct LevelLoop {
    pub rho: f64,
    pub points: Vec<(f64, f64)>,
}

fn saddle_value(eq: &EquilibriumData, a: f64, b: f64) -> f64 {
    // g restricted to a gap rises from 0 at both ends to one interior max;
    // dense sampling plus local refinement is plenty at f64 accuracy.
    let mut best = f64::NEG_INFINITY;
    let mut best_t = (a + b) / 2.0;
    for i in 1..512 {
        let t = a + (b - a) * i as f64 / 512.0;
        let g = eq.green_f64(t, 0.0);
        if g > best {
            best = g;
            best_t = t;
        }
    }
    let mut lo = (best_t - (b - a) / 512.0).max(a);
    let mut hi = (best_t + (b - a) / 512.0).min(b);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if eq.green_f64(m1, 0.0) < eq.green_f64(m2, 0.0) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    eq.green_f64((lo + hi) / 2.0, 0.0).max(best)
}

/// Radius along direction `theta` from `(cx, 0)` where g first equals
/// `log rho`, by doubling then bisection.
fn ray_radius(eq: &EquilibriumData, cx: f64, theta: f64, target: f64, scale: f64) -> f64 {
    let (dx, dy) = (theta.cos(), theta.sin());
    let mut hi = scale;
    while eq.green_f64(cx + hi * dx, hi * dy) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0f64;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eq.green_f64(cx + mid * dx, mid * dy) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Trace `Gamma_rho` with `points_per_loop` points on each component.
pub fn level_curve(
    eq: &EquilibriumData,
    rho: f64,
    points_per_loop: usize,
) -> Result<Vec<LevelLoop>, PotentialError> {
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(PotentialError::BadLevel(rho));
    }
    let target = rho.ln();
    let sys = eq.system();
    let p = sys.num_intervals();

    // Group consecutive intervals whose separating saddle is below target.
    let mut components: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for j in 0..p - 1 {
        let (_, b) = sys.interval(j);
        let (a_next, _) = sys.interval(j + 1);
        if saddle_value(eq, b, a_next) >= target {
            components.push((start, j));
            start = j + 1;
        }
    }
    components.push((start, p - 1));

    let mut loops = Vec::with_capacity(components.len());
    for &(j0, j1) in &components {
        let left = sys.interval(j0).0;
        let right = sys.interval(j1).1;
        let cx = 0.5 * (left + right);
        let scale = 0.25 * (right - left).max(sys.diameter() * 1e-3);

        // Dense polar trace for arclength estimation.
        let dense = points_per_loop.max(64) * 4;
        let mut thetas = Vec::with_capacity(dense + 1);
        let mut pts = Vec::with_capacity(dense + 1);
        for i in 0..=dense {
            let th = 2.0 * std::f64::consts::PI * i as f64 / dense as f64;
            let r = ray_radius(eq, cx, th, target, scale);
            thetas.push(th);
            pts.push((cx + r * th.cos(), r * th.sin()));
        }
        let mut cum = vec![0.0; dense + 1];
        for i in 1..=dense {
            let (x0, y0) = pts[i - 1];
            let (x1, y1) = pts[i];
            cum[i] = cum[i - 1] + (x1 - x0).hypot(y1 - y0);
        }
        let total = cum[dense];

        // Uniform-arclength parameters, re-projected radially.
        let mut out = Vec::with_capacity(points_per_loop);
        let mut seg = 1usize;
        for k in 0..points_per_loop {
            let s = total * k as f64 / points_per_loop as f64;
            while cum[seg] < s && seg < dense {
                seg += 1;
            }
            let f = if cum[seg] > cum[seg - 1] {
                (s - cum[seg - 1]) / (cum[seg] - cum[seg - 1])
            } else {
                0.0
            };
            let th = thetas[seg - 1] + f * (thetas[seg] - thetas[seg - 1]);
            let r = ray_radius(eq, cx, th, target, scale);
            out.push((cx + r * th.cos(), r * th.sin()));
        }
        loops.push(LevelLoop {
            rho,
            points: out,
        });
    }
    Ok(loops)
}

#[cfg(test)]
mod tests {
    use super::super::{solve_equilibrium, IntervalSystem};
    use super::*;

    #[test]
    fn bernstein_ellipse() {
        // For [-1,1] the level curve Gamma_rho is the ellipse with semi-axes
        // (rho + 1/rho)/2 and (rho - 1/rho)/2.
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let eq = solve_equilibrium(&s, 64).unwrap();
        let loops = level_curve(&eq, 2.0, 200).unwrap();
        assert_eq!(loops.len(), 1);
        let (sa, sb) = (1.25, 0.75);
        for &(x, y) in &loops[0].points {
            let e = (x / sa).powi(2) + (y / sb).powi(2);
            assert!((e - 1.0).abs() < 1e-8, "off ellipse: ({x},{y}) -> {e}");
        }
        // uniform arclength: adjacent spacing within a few percent of mean
        let pts = &loops[0].points;
        let n = pts.len();
        let mut lens = Vec::with_capacity(n);
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            lens.push((x1 - x0).hypot(y1 - y0));
        }
        let mean = lens.iter().sum::<f64>() / n as f64;
        for l in lens {
            assert!((l / mean - 1.0).abs() < 0.05, "spacing {l} vs mean {mean}");
        }
    }

    #[test]
    fn component_merging() {
        let s = IntervalSystem::from_intervals(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let eq = solve_equilibrium(&s, 128).unwrap();
        let saddle = eq.green_f64(0.0, 0.0);
        let small = (saddle * 0.5).exp();
        let big = (saddle * 2.0).exp();
        assert_eq!(level_curve(&eq, small, 64).unwrap().len(), 2);
        assert_eq!(level_curve(&eq, big, 64).unwrap().len(), 1);
        // all traced points satisfy g = log rho
        for lp in level_curve(&eq, big, 64).unwrap() {
            for (x, y) in lp.points {
                assert!((eq.green_f64(x, y) - big.ln()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_rho() {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let eq = solve_equilibrium(&s, 64).unwrap();
        assert!(level_curve(&eq, 1.0, 64).is_err());
        assert!(level_curve(&eq, 0.5, 64).is_err());
    }
}
