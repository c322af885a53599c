//! Diagonal Pade approximants `[n/n]` built from a germ at infinity.
//!
//! With `f = sum c_k z^{-k}`, the denominator `Q(z) = sum_{j<=n} q_j z^j`
//! solves the Hankel system: the coefficients of `z^{-1}..z^{-n}` in
//! `Q f - P` vanish, i.e. `sum_j q_j c_{t+j} = 0` for `t = 1..n`. The
//! numerator is the polynomial part, `p_t = sum_{j>=t} q_j c_{j-t}`. The
//! system has n equations in n+1 unknowns; the canonical representative is
//! the minimal-degree monic solution, which is unique even when the
//! nullspace is larger (degenerate, e.g. rational f).

mod roots;

pub use roots::{roots, Root};

use thiserror::Error;

use crate::bigseries::{BigComplex, GermAtInfinity, SeriesError};
use crate::testfn::{Sheet, TestFnError, TestFunctionSpec};

#[derive(Debug, Error)]
pub enum PadeError {
    #[error("germ order {got} too small for [{n}/{n}]: need {need}")]
    GermTooShort { n: usize, need: usize, got: usize },
    #[error("Hankel system has no nonzero solution within tolerance")]
    NoSolution,
    #[error("zero polynomial has no roots")]
    ZeroPolynomial,
    #[error("root iteration did not converge")]
    RootsDiverged,
    #[error("rank remained ambiguous after {0} precision doublings")]
    EscalationExhausted(u32),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    TestFn(#[from] TestFnError),
}

/// First uncancelled term of `f - P/Q` relative to the germ.
#[derive(Clone, Debug, PartialEq)]
pub enum ResidualOrder {
    /// All residual coefficients up to the germ order are negligible.
    Exact,
    /// First non-negligible coefficient: power of `1/z` and its modulus.
    Finite { order: usize, magnitude: f64 },
}

#[derive(Clone, Debug)]
pub struct PadePair {
    /// Numerator coefficients, ascending in `z`.
    pub p: Vec<BigComplex>,
    /// Denominator coefficients, ascending in `z`, monic.
    pub q: Vec<BigComplex>,
    /// Requested diagonal order.
    pub n: usize,
    /// True when the Hankel nullspace was one-dimensional.
    pub unique: bool,
    /// log2 of (smallest used pivot) / (largest discarded pivot); large
    /// values mean the numerical rank decision was clear-cut.
    pub rank_margin: f64,
    prec: u32,
}

fn poly_eval(coeffs: &[BigComplex], z: &BigComplex) -> BigComplex {
    let prec = z.prec();
    let mut acc = BigComplex::zero(prec);
    for c in coeffs.iter().rev() {
        acc = &(&acc * z) + c;
    }
    acc
}

/// Denominator degree: index of the last coefficient above the relative
/// noise floor.
fn effective_degree(coeffs: &[BigComplex], prec: u32) -> usize {
    let mx = coeffs
        .iter()
        .map(|c| c.abs_f64())
        .fold(0.0f64, f64::max);
    let tol = mx * 2f64.powi(-((prec / 2) as i32));
    coeffs
        .iter()
        .rposition(|c| c.abs_f64() > tol)
        .unwrap_or(0)
}

/// Build the `[n/n]` Pade pair from a germ of order at least `2n`.
pub fn pade_pair(germ: &GermAtInfinity, n: usize) -> Result<PadePair, PadeError> {
    if germ.order() < 2 * n {
        return Err(PadeError::GermTooShort {
            n,
            need: 2 * n,
            got: germ.order(),
        });
    }
    let prec = germ.prec();
    if n == 0 {
        return Ok(PadePair {
            p: vec![germ.coeff(0).clone()],
            q: vec![BigComplex::one(prec)],
            n: 0,
            unique: true,
            rank_margin: f64::INFINITY,
            prec,
        });
    }

    // Hankel matrix rows t = 1..n, columns j = 0..n, entry c_{t+j}.
    let cols = n + 1;
    let mut a: Vec<Vec<BigComplex>> = (1..=n)
        .map(|t| (0..cols).map(|j| germ.coeff(t + j).clone()).collect())
        .collect();
    let scale = germ.max_coeff_abs().to_f64().max(f64::MIN_POSITIVE);
    let tol = scale * 2f64.powi(-((prec / 2) as i32));

    // Gaussian elimination with full pivoting; track column permutation.
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0usize;
    let mut min_pivot = f64::INFINITY;
    let mut max_discard = 0.0f64;
    for step in 0..n.min(cols) {
        let mut best = (step, step, 0.0f64);
        for r in step..n {
            for c in step..cols {
                let v = a[r][c].abs_f64();
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        if best.2 <= tol {
            max_discard = best.2;
            break;
        }
        min_pivot = min_pivot.min(best.2);
        a.swap(step, best.0);
        for row in a.iter_mut() {
            row.swap(step, best.1);
        }
        col_perm.swap(step, best.1);
        let piv = a[step][step].clone();
        for r in (step + 1)..n {
            let f = &a[r][step] / &piv;
            for c in step..cols {
                a[r][c] = &a[r][c] - &(&f * &a[step][c]);
            }
        }
        rank += 1;
    }
    let rank_margin = if max_discard > 0.0 {
        (min_pivot / max_discard).log2()
    } else {
        f64::INFINITY
    };
    let unique = rank == n;

    // Nullspace basis: one vector per free column (in permuted order the
    // free columns are rank..cols). Back-substitute each.
    let mut basis: Vec<Vec<BigComplex>> = Vec::with_capacity(cols - rank);
    for free in rank..cols {
        let mut x = vec![BigComplex::zero(prec); cols];
        x[free] = BigComplex::one(prec);
        for r in (0..rank).rev() {
            let mut s = a[r][free].clone();
            for c in (r + 1)..rank {
                s = &s + &(&a[r][c] * &x[c]);
            }
            x[r] = -&(&s / &a[r][r]);
        }
        // undo column permutation
        let mut q = vec![BigComplex::zero(prec); cols];
        for (pos, &orig) in col_perm.iter().enumerate() {
            q[orig] = x[pos].clone();
        }
        basis.push(q);
    }
    if basis.is_empty() {
        return Err(PadeError::NoSolution);
    }

    // Minimal-degree representative: eliminate top coefficients across the
    // basis until no further reduction is possible.
    let deg_of = |v: &Vec<BigComplex>| effective_degree(v, prec);
    // Reduce until all effective degrees are distinct; each elimination
    // strictly lowers one degree, so this terminates.
    loop {
        let degs: Vec<usize> = basis.iter().map(deg_of).collect();
        let mut reduced = false;
        'scan: for i in 0..basis.len() {
            for j in 0..basis.len() {
                if i != j && degs[i] == degs[j] && degs[i] > 0 {
                    let f = &basis[i][degs[i]] / &basis[j][degs[j]];
                    let bj = basis[j].clone();
                    for (t, b) in basis[i].iter_mut().zip(bj.iter()) {
                        *t = &*t - &(&f * b);
                    }
                    reduced = true;
                    break 'scan;
                }
            }
        }
        if !reduced {
            break;
        }
    }
    let q_raw = basis
        .iter()
        .min_by_key(|v| deg_of(v))
        .expect("nonempty basis")
        .clone();
    let dq = deg_of(&q_raw);
    let lead = q_raw[dq].clone();
    if lead.is_zero() {
        return Err(PadeError::NoSolution);
    }
    let q: Vec<BigComplex> = q_raw[..=dq].iter().map(|c| c / &lead).collect();

    // Numerator: polynomial part of Q f.
    let mut p = Vec::with_capacity(dq + 1);
    for t in 0..=dq {
        let mut s = BigComplex::zero(prec);
        for (j, qj) in q.iter().enumerate().skip(t) {
            s = &s + &(qj * germ.coeff(j - t));
        }
        p.push(s);
    }

    Ok(PadePair {
        p,
        q,
        n,
        unique,
        rank_margin,
        prec,
    })
}

impl PadePair {
    /// Reassemble a pair from stored coefficients (cache reload, synthetic
    /// test fixtures). No Hankel consistency is re-checked here.
    pub fn from_parts(
        p: Vec<BigComplex>,
        q: Vec<BigComplex>,
        n: usize,
        unique: bool,
        rank_margin: f64,
        prec: u32,
    ) -> Self {
        Self {
            p,
            q,
            n,
            unique,
            rank_margin,
            prec,
        }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn denominator_degree(&self) -> usize {
        self.q.len() - 1
    }

    pub fn eval(&self, z: &BigComplex) -> BigComplex {
        &poly_eval(&self.p, z) / &poly_eval(&self.q, z)
    }

    pub fn eval_q(&self, z: &BigComplex) -> BigComplex {
        poly_eval(&self.q, z)
    }

    pub fn eval_p(&self, z: &BigComplex) -> BigComplex {
        poly_eval(&self.p, z)
    }

    /// Error function `R_n(z) = Q_n(z) f(z) - P_n(z)` for a given branch
    /// value `f(z)`.
    pub fn error_function(&self, z: &BigComplex, f_value: &BigComplex) -> BigComplex {
        &(&self.eval_q(z) * f_value) - &self.eval_p(z)
    }

    /// Scan `Q f - P` for the first non-negligible coefficient of `z^{-t}`,
    /// `t > deg Q`, relative to `max|c_k| * max|q_j|`.
    pub fn residual_order(&self, germ: &GermAtInfinity) -> ResidualOrder {
        let scale = germ.max_coeff_abs().to_f64()
            * self.q.iter().map(|c| c.abs_f64()).fold(0.0, f64::max);
        let tol = scale * 2f64.powi(-((self.prec / 2) as i32));
        let dq = self.denominator_degree();
        for t in (dq + 1)..=germ.order().saturating_sub(dq) {
            // e_t = sum_j q_j c_{t+j}
            let mut s = BigComplex::zero(self.prec);
            for (j, qj) in self.q.iter().enumerate() {
                s = &s + &(qj * germ.coeff(t + j));
            }
            let m = s.abs_f64();
            if m > tol {
                return ResidualOrder::Finite {
                    order: t,
                    magnitude: m,
                };
            }
        }
        ResidualOrder::Exact
    }

    /// `f^{(0)}(z) - P(z)/Q(z)` at `z`'s precision.
    pub fn error_at(&self, f: &TestFunctionSpec, z: &BigComplex) -> Result<BigComplex, PadeError> {
        let fv = f.eval_branch(z, Sheet::Zero)?;
        Ok(&fv - &self.eval(z))
    }

    /// Roots of the denominator (the approximant's poles).
    pub fn poles(&self) -> Result<Vec<Root>, PadeError> {
        roots(&self.q, self.prec)
    }

    /// Roots of the numerator.
    pub fn zeros(&self) -> Result<Vec<Root>, PadeError> {
        roots(&self.p, self.prec)
    }
}

/// Rebuild the pair at doubled precision until the Hankel rank decision is
/// clear (margin of at least `prec/8` bits), at most four doublings.
/// `germ_of` must produce the same germ at the requested precision.
pub fn pade_pair_robust<F>(
    n: usize,
    base_prec: u32,
    mut germ_of: F,
) -> Result<(PadePair, u32), PadeError>
where
    F: FnMut(u32) -> Result<GermAtInfinity, PadeError>,
{
    let mut prec = base_prec;
    for _ in 0..=4 {
        let germ = germ_of(prec)?;
        let pair = pade_pair(&germ, n)?;
        if pair.rank_margin >= (prec / 8) as f64 {
            return Ok((pair, prec));
        }
        prec *= 2;
    }
    Err(PadeError::EscalationExhausted(4))
}
