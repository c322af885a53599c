//! Truncated expansions at infinity: `sum_{k=0..N} c_k z^{-k}`.
//!
//! These are the function elements fed to the Pade constructor. All
//! operations truncate to the shorter operand and require matching working
//! precision; results are plain convolution/recurrence arithmetic with no
//! certified error bounds.

use rug::Float;
use thiserror::Error;

use super::complex::BigComplex;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("precision mismatch: {0} vs {1} bits")]
    PrecisionMismatch(u32, u32),
    #[error("empty germ")]
    EmptyGerm,
    #[error("leading coefficient vanishes")]
    ZeroLeadingCoefficient,
    #[error("branch value does not square to the leading coefficient")]
    BranchMismatch,
    #[error("evaluation point z = 0")]
    EvalAtZero,
    #[error("germ order {0} too small, need at least {1}")]
    OrderTooSmall(usize, usize),
    #[error("cannot shift down: coefficient {0} is not negligible")]
    NonzeroLowCoefficient(usize),
}

/// A truncated germ at infinity with coefficients `c_0..c_N` of `z^{-k}`.
#[derive(Clone, Debug)]
pub struct GermAtInfinity {
    coeffs: Vec<BigComplex>,
    prec: u32,
}

impl GermAtInfinity {
    /// Build from coefficients; all are re-rounded to `prec`.
    pub fn new(prec: u32, coeffs: Vec<BigComplex>) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::EmptyGerm);
        }
        let coeffs = coeffs.iter().map(|c| c.with_prec(prec)).collect();
        Ok(Self { coeffs, prec })
    }

    pub fn from_f64(prec: u32, coeffs: &[f64]) -> Result<Self, SeriesError> {
        Self::new(
            prec,
            coeffs.iter().map(|&c| BigComplex::from_f64(prec, c)).collect(),
        )
    }

    /// The constant germ `c_0` truncated at order `order`.
    pub fn constant(c0: BigComplex, order: usize) -> Self {
        let prec = c0.prec();
        let mut coeffs = vec![BigComplex::zero(prec); order + 1];
        coeffs[0] = c0;
        Self { coeffs, prec }
    }

    pub fn one(prec: u32, order: usize) -> Self {
        Self::constant(BigComplex::one(prec), order)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Truncation order N (highest retained power of 1/z).
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &BigComplex {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[BigComplex] {
        &self.coeffs
    }

    pub fn max_coeff_abs(&self) -> Float {
        let mut m = Float::with_val(self.prec, 0);
        for c in &self.coeffs {
            let a = c.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn is_negligible(&self, tol: &Float) -> bool {
        self.coeffs.iter().all(|c| c.abs() <= *tol)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order());
        Self {
            coeffs: self.coeffs[..=n].to_vec(),
            prec: self.prec,
        }
    }

    fn check_compat(&self, other: &Self) -> Result<(), SeriesError> {
        if self.prec != other.prec {
            return Err(SeriesError::PrecisionMismatch(self.prec, other.prec));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compat(other)?;
        let n = self.order().min(other.order());
        let coeffs = (0..=n).map(|k| &self.coeffs[k] + &other.coeffs[k]).collect();
        Ok(Self { coeffs, prec: self.prec })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compat(other)?;
        let n = self.order().min(other.order());
        let coeffs = (0..=n).map(|k| &self.coeffs[k] - &other.coeffs[k]).collect();
        Ok(Self { coeffs, prec: self.prec })
    }

    pub fn scale(&self, s: &BigComplex) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            prec: self.prec.min(s.prec()),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            prec: self.prec,
        }
    }

    /// Cauchy product truncated at `min(N_a, N_b)`.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compat(other)?;
        let n = self.order().min(other.order());
        let mut coeffs = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut acc = BigComplex::zero(self.prec);
            for i in 0..=k {
                acc = acc + &self.coeffs[i] * &other.coeffs[k - i];
            }
            coeffs.push(acc);
        }
        Ok(Self { coeffs, prec: self.prec })
    }

    /// Multiplicative inverse; requires `c_0 != 0`.
    pub fn inv(&self) -> Result<Self, SeriesError> {
        let a0 = &self.coeffs[0];
        if a0.is_zero() {
            return Err(SeriesError::ZeroLeadingCoefficient);
        }
        let n = self.order();
        let ia0 = a0.recip();
        let mut out = Vec::with_capacity(n + 1);
        out.push(ia0.clone());
        for k in 1..=n {
            let mut acc = BigComplex::zero(self.prec);
            for j in 1..=k {
                acc = acc + &self.coeffs[j] * &out[k - j];
            }
            out.push(-(&ia0 * &acc));
        }
        Ok(Self { coeffs: out, prec: self.prec })
    }

    /// `branch * exp(alpha * log(self / c_0))`.
    ///
    /// `branch` must be a chosen value of `c_0^alpha`; the tail
    /// `u = self/c_0 - 1` has zero constant term, so log and exp reduce to
    /// coefficient recurrences.
    pub fn cpow(&self, alpha: &BigComplex, branch: &BigComplex) -> Result<Self, SeriesError> {
        let a0 = &self.coeffs[0];
        if a0.is_zero() {
            return Err(SeriesError::ZeroLeadingCoefficient);
        }
        let n = self.order();
        let prec = self.prec;
        let ia0 = a0.recip();
        // u_k = a_k / a_0 for k >= 1
        let u: Vec<BigComplex> = (1..=n).map(|k| &self.coeffs[k] * &ia0).collect();
        // L = log(1 + u): k L_k = k u_k - sum_{j=1}^{k-1} j L_j u_{k-j}
        let mut log = vec![BigComplex::zero(prec); n + 1];
        for k in 1..=n {
            let mut acc = u[k - 1].scale_float(&Float::with_val(prec, k));
            for j in 1..k {
                let t = log[j].scale_float(&Float::with_val(prec, j));
                acc = acc - &t * &u[k - j - 1];
            }
            log[k] = acc.scale_float(&Float::with_val(prec, k).recip());
        }
        // v = alpha * L, E = exp(v): k E_k = sum_{j=1}^{k} j v_j E_{k-j}
        let v: Vec<BigComplex> = log.iter().map(|l| l * alpha).collect();
        let mut e = vec![BigComplex::zero(prec); n + 1];
        e[0] = BigComplex::one(prec);
        for k in 1..=n {
            let mut acc = BigComplex::zero(prec);
            for j in 1..=k {
                let t = v[j].scale_float(&Float::with_val(prec, j));
                acc = acc + &t * &e[k - j];
            }
            e[k] = acc.scale_float(&Float::with_val(prec, k).recip());
        }
        let coeffs = e.iter().map(|c| c * branch).collect();
        Ok(Self { coeffs, prec })
    }

    /// Square root with an explicitly chosen branch of `sqrt(c_0)`.
    ///
    /// Rejects `branch` unless `branch^2` matches `c_0` to relative
    /// tolerance `2^{-P/2}`.
    pub fn sqrt(&self, branch: &BigComplex) -> Result<Self, SeriesError> {
        let a0 = &self.coeffs[0];
        if a0.is_zero() {
            return Err(SeriesError::ZeroLeadingCoefficient);
        }
        let prec = self.prec;
        let diff = (&(branch * branch) - a0).abs();
        let tol = a0.abs() >> (prec / 2);
        if diff > tol {
            return Err(SeriesError::BranchMismatch);
        }
        let half = BigComplex::from_ratio(prec, 1, 2);
        self.cpow(&half, branch)
    }

    /// Horner evaluation in `1/z` plus a heuristic geometric tail gauge.
    pub fn eval(&self, z: &BigComplex) -> Result<(BigComplex, f64), SeriesError> {
        if z.is_zero() {
            return Err(SeriesError::EvalAtZero);
        }
        let w = z.recip();
        let mut acc = self.coeffs[self.order()].clone();
        for k in (0..self.order()).rev() {
            acc = &self.coeffs[k] + &(&acc * &w);
        }
        let az = z.abs_f64();
        let tail = if self.order() == 0 {
            // A bare constant has no tail.
            0.0
        } else if az > 1.0 {
            let n = self.order() as f64;
            let cn = self.coeffs[self.order()].abs_f64();
            cn * az.powf(-n) / (1.0 - 1.0 / az)
        } else {
            f64::INFINITY
        };
        Ok((acc, tail))
    }

    /// Multiply by `z^{-m}`: prepend `m` zero coefficients, same order.
    pub fn shift_up(&self, m: usize) -> Self {
        let n = self.order();
        let mut coeffs = vec![BigComplex::zero(self.prec); m.min(n + 1)];
        coeffs.extend_from_slice(&self.coeffs[..n + 1 - coeffs.len()]);
        Self { coeffs, prec: self.prec }
    }

    /// Divide by `z^{-m}`: drop the first `m` coefficients, which must be
    /// negligible (below `2^{-P/2}` of the largest coefficient).
    pub fn shift_down(&self, m: usize) -> Result<Self, SeriesError> {
        if m > self.order() {
            return Err(SeriesError::OrderTooSmall(self.order(), m + 1));
        }
        let tol = self.max_coeff_abs() >> (self.prec / 2);
        for (k, c) in self.coeffs[..m].iter().enumerate() {
            if c.abs() > tol {
                return Err(SeriesError::NonzeroLowCoefficient(k));
            }
        }
        Ok(Self {
            coeffs: self.coeffs[m..].to_vec(),
            prec: self.prec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn germ(prec: u32, c: &[f64]) -> GermAtInfinity {
        GermAtInfinity::from_f64(prec, c).unwrap()
    }

    fn assert_coeff_close(g: &GermAtInfinity, k: usize, re: f64, tol: f64) {
        let c = g.coeff(k);
        assert!(
            (c.re_f64() - re).abs() < tol && c.im_f64().abs() < tol,
            "coeff {k}: got {c:?}, want {re}"
        );
    }

    #[test]
    fn mul_difference_of_squares() {
        let a = germ(128, &[1.0, 1.0, 0.0]);
        let b = germ(128, &[1.0, -1.0, 0.0]);
        let p = a.mul(&b).unwrap();
        assert_coeff_close(&p, 0, 1.0, 1e-30);
        assert_coeff_close(&p, 1, 0.0, 1e-30);
        assert_coeff_close(&p, 2, -1.0, 1e-30);
    }

    #[test]
    fn mul_identity() {
        let one = GermAtInfinity::one(128, 5);
        let g = germ(128, &[3.0, 1.0, 4.0, 1.0, 5.0, 9.0]);
        let p = one.mul(&g).unwrap();
        for k in 0..=5 {
            assert!((p.coeff(k) - g.coeff(k)).abs_f64() < 1e-30);
        }
    }

    #[test]
    fn geometric_series_telescopes() {
        // (sum z^{-k}) * (1 - z^{-1}) = 1, checked by direct convolution.
        let n = 12;
        let geo = germ(128, &vec![1.0; n + 1]);
        let mut lin = vec![0.0; n + 1];
        lin[0] = 1.0;
        lin[1] = -1.0;
        let p = geo.mul(&germ(128, &lin)).unwrap();
        assert_coeff_close(&p, 0, 1.0, 1e-30);
        for k in 1..=n {
            assert_coeff_close(&p, k, 0.0, 1e-30);
        }
    }

    #[test]
    fn precision_mismatch_rejected() {
        let a = germ(128, &[1.0]);
        let b = germ(256, &[1.0]);
        assert!(matches!(a.mul(&b), Err(SeriesError::PrecisionMismatch(_, _))));
    }

    #[test]
    fn cpow_geometric_inverse() {
        // (1 - z^{-1})^{-1} = sum z^{-k}; oracle is long division (all ones).
        let mut c = vec![0.0; 11];
        c[0] = 1.0;
        c[1] = -1.0;
        let a = germ(256, &c);
        let minus_one = BigComplex::from_f64(256, -1.0);
        let one = BigComplex::one(256);
        let g = a.cpow(&minus_one, &one).unwrap();
        for k in 0..=10 {
            assert_coeff_close(&g, k, 1.0, 1e-70);
        }
    }

    #[test]
    fn cpow_identity_exponent() {
        let a = germ(128, &[2.0, 0.5, -0.25, 0.125]);
        let one = BigComplex::one(128);
        let g = a.cpow(&one, a.coeff(0)).unwrap();
        for k in 0..=3 {
            assert!((g.coeff(k) - a.coeff(k)).abs_f64() < 1e-30);
        }
    }

    #[test]
    fn cpow_binomial_half() {
        // (1 - z^{-2})^{1/2}; oracle: binomial expansion coefficients.
        let mut c = vec![0.0; 9];
        c[0] = 1.0;
        c[2] = -1.0;
        let a = germ(256, &c);
        let half = BigComplex::from_ratio(256, 1, 2);
        let one = BigComplex::one(256);
        let g = a.cpow(&half, &one).unwrap();
        let expect = [1.0, 0.0, -0.5, 0.0, -0.125, 0.0, -1.0 / 16.0, 0.0, -5.0 / 128.0];
        for (k, &e) in expect.iter().enumerate() {
            assert_coeff_close(&g, k, e, 1e-70);
        }
    }

    #[test]
    fn sqrt_constant_branch_selection() {
        let a = GermAtInfinity::constant(BigComplex::from_f64(128, 4.0), 4);
        let minus_two = BigComplex::from_f64(128, -2.0);
        let g = a.sqrt(&minus_two).unwrap();
        assert_coeff_close(&g, 0, -2.0, 1e-30);
        for k in 1..=4 {
            assert_coeff_close(&g, k, 0.0, 1e-30);
        }
    }

    #[test]
    fn sqrt_matches_cpow() {
        let mut c = vec![0.0; 7];
        c[0] = 1.0;
        c[2] = -1.0;
        let a = germ(256, &c);
        let one = BigComplex::one(256);
        let half = BigComplex::from_ratio(256, 1, 2);
        let s = a.sqrt(&one).unwrap();
        let p = a.cpow(&half, &one).unwrap();
        for k in 0..=6 {
            assert!((s.coeff(k) - p.coeff(k)).abs_f64() < 1e-70);
        }
    }

    #[test]
    fn sqrt_rejects_bad_branch() {
        let a = GermAtInfinity::constant(BigComplex::from_f64(128, 4.0), 2);
        let bad = BigComplex::from_f64(128, 3.0);
        assert!(matches!(a.sqrt(&bad), Err(SeriesError::BranchMismatch)));
    }

    #[test]
    fn eval_constant_and_linear() {
        let c = GermAtInfinity::constant(BigComplex::from_f64(128, 7.0), 0);
        let z = BigComplex::from_f64(128, 3.0);
        let (v, tail) = c.eval(&z).unwrap();
        assert!((v.re_f64() - 7.0).abs() < 1e-30);
        assert!(tail < 1e-15);

        let lin = germ(128, &[1.0, -1.0]);
        let two = BigComplex::from_f64(128, 2.0);
        let (v, _) = lin.eval(&two).unwrap();
        assert!((v.re_f64() - 0.5).abs() < 1e-30);
    }

    #[test]
    fn eval_rejects_zero() {
        let g = germ(128, &[1.0, 1.0]);
        assert!(matches!(g.eval(&BigComplex::zero(128)), Err(SeriesError::EvalAtZero)));
    }
}
