//! Algebraic test functions: products of factors `(C - 1/phi_D(z))^e` over
//! disjoint real segments `D`, optionally times a rational function.
//!
//! `phi_D` is the conformal map of the segment exterior onto the exterior of
//! the unit disk (affine change of variables composed with the inverse
//! Zhukovskii map), so `1/phi_D` is the branch that vanishes at infinity.
//! Each factor is analytic at infinity; the interesting branch points sit at
//! the segment endpoints and at the preimages of the constants.

mod continuation;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bigseries::{BigComplex, GermAtInfinity, SeriesError};
use crate::potential::{IntervalSystem, PotentialError};

#[derive(Debug, Error)]
pub enum TestFnError {
    #[error("segment must have finite alpha < beta")]
    BadSegment,
    #[error("segments must be pairwise disjoint")]
    OverlappingSegments,
    #[error("spec needs at least one factor or a rational part")]
    EmptySpec,
    #[error("factor needs at least one constant")]
    EmptyFactor,
    #[error("evaluation point lies on a branch cut")]
    OnCut,
    #[error("constant has modulus <= 1; its branch point would touch the cut")]
    ConstantOnUnitDisk,
    #[error("bad parameter string: {0}")]
    InvalidParam(String),
    #[error("rational part needs deg(num) <= deg(den) and a nonzero leading denominator coefficient")]
    InvalidRational,
    #[error("denominator vanishes on a segment")]
    DenominatorOnS,
    #[error("denominator vanishes at the evaluation point")]
    DenominatorAtPoint,
    #[error("no branch cut: pure rational spec has no Stahl compact")]
    NoBranchCut,
    #[error("analytic continuation step size underflow")]
    StepUnderflow,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Closed real segment `[alpha, beta]` carrying a branch cut.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub alpha: f64,
    pub beta: f64,
}

impl Segment {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, TestFnError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
            return Err(TestFnError::BadSegment);
        }
        Ok(Self { alpha, beta })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.alpha + self.beta)
    }

    pub fn half_length(&self) -> f64 {
        0.5 * (self.beta - self.alpha)
    }

    pub fn distance(&self, re: f64, im: f64) -> f64 {
        let dx = if re < self.alpha {
            self.alpha - re
        } else if re > self.beta {
            re - self.beta
        } else {
            0.0
        };
        dx.hypot(im)
    }
}

/// A complex parameter kept as exact decimal or `p/q` rational strings so it
/// can be lifted to any working precision without rounding drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub re: String,
    pub im: String,
}

impl ParamValue {
    pub fn real(re: &str) -> Self {
        Self {
            re: re.trim().to_string(),
            im: "0".to_string(),
        }
    }

    pub fn complex(re: &str, im: &str) -> Self {
        Self {
            re: re.trim().to_string(),
            im: im.trim().to_string(),
        }
    }

    pub fn lift(&self, prec: u32) -> Result<BigComplex, TestFnError> {
        BigComplex::from_decimal_parts(prec, &self.re, &self.im).map_err(TestFnError::InvalidParam)
    }
}

/// One `(C - 1/phi)^e` term of a factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorConstant {
    pub c: ParamValue,
    pub exponent: ParamValue,
}

/// All terms sharing one branch cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub segment: Segment,
    pub constants: Vec<FactorConstant>,
}

/// Rational multiplier `num(z)/den(z)`, coefficients ascending in `z`.
/// Requires `deg(num) <= deg(den)` so the product stays bounded at infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalMultiplier {
    pub num: Vec<ParamValue>,
    pub den: Vec<ParamValue>,
}

/// Which branch of the function (or of `phi`) to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sheet {
    Zero,
    One,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    factors: Vec<FactorSpec>,
    rational: Option<RationalMultiplier>,
}

/// Classification of a spec against the supported function classes.
#[derive(Clone, Debug)]
pub struct ClassReport {
    /// All exponents are +-1/2 with real constants: the square-root class.
    pub in_class_f: bool,
    /// All exponents non-integer, per-factor sums integer, real constants.
    pub in_extended_class: bool,
    pub notes: Vec<String>,
}

impl ClassReport {
    pub fn supported(&self) -> bool {
        self.in_class_f || self.in_extended_class
    }
}

pub(crate) struct LiftedConstant {
    pub c: BigComplex,
    pub e: BigComplex,
}

pub(crate) struct LiftedFactor {
    pub segment: Segment,
    pub constants: Vec<LiftedConstant>,
}

pub(crate) struct LiftedSpec {
    pub factors: Vec<LiftedFactor>,
    pub rational: Option<(Vec<BigComplex>, Vec<BigComplex>)>,
}

fn horner(coeffs: &[BigComplex], z: &BigComplex) -> BigComplex {
    let prec = z.prec();
    let mut acc = BigComplex::zero(prec);
    for c in coeffs.iter().rev() {
        acc = &(&acc * z) + c;
    }
    acc
}

/// `phi = psi + sqrt(psi - 1) sqrt(psi + 1)` with `psi` the affine map of
/// the segment onto `[-1, 1]`. The two principal square roots pick the root
/// with `|phi| >= 1` and the cut exactly on the segment. Sheet one is
/// `1/phi`, the root vanishing at infinity.
pub fn inverse_zhukovskii(
    z: &BigComplex,
    segment: &Segment,
    sheet: Sheet,
) -> Result<BigComplex, TestFnError> {
    let prec = z.prec();
    if z.im().is_zero() {
        let x = z.re_f64();
        if x > segment.alpha && x < segment.beta {
            return Err(TestFnError::OnCut);
        }
    }
    let m = BigComplex::from_f64(prec, segment.midpoint());
    let r = BigComplex::from_f64(prec, segment.half_length());
    let psi = &(z - &m) / &r;
    let one = BigComplex::one(prec);
    let s = (&psi - &one).sqrt() * (&psi + &one).sqrt();
    let phi = &psi + &s;
    Ok(match sheet {
        Sheet::Zero => phi,
        Sheet::One => phi.recip(),
    })
}

/// Germ of `1/phi_segment` at infinity in powers of `1/z`, to order `n`.
///
/// With `v = 1/psi` expanded at infinity, `1/phi = (1 - sqrt(1 - v^2))/v`,
/// computed as `v * (1 - sqrt(1 - v^2))/v^2` so every division is by a
/// series with nonzero constant term.
pub(crate) fn inv_phi_germ(
    segment: &Segment,
    n: usize,
    prec: u32,
) -> Result<GermAtInfinity, TestFnError> {
    let work = n + 2;
    let sigma = segment.alpha + segment.beta;
    let delta = segment.beta - segment.alpha;
    // 1/psi = delta * x / (2 - sigma x), x = 1/z
    let lin = GermAtInfinity::new(
        prec,
        {
            let mut c = vec![BigComplex::zero(prec); work + 1];
            c[0] = BigComplex::from_f64(prec, 2.0);
            c[1] = BigComplex::from_f64(prec, -sigma);
            c
        },
    )?;
    let v = lin
        .inv()?
        .shift_up(1)
        .scale(&BigComplex::from_f64(prec, delta));
    let v2 = v.mul(&v)?;
    let one = GermAtInfinity::one(prec, work);
    let root = one.sub(&v2)?.sqrt(&BigComplex::one(prec))?;
    let d = one.sub(&root)?.shift_down(2)?;
    let m = v2.shift_down(2)?;
    let y = v.mul(&d.mul(&m.inv()?)?)?;
    Ok(y.truncate(n))
}

impl TestFunctionSpec {
    pub fn new(
        factors: Vec<FactorSpec>,
        rational: Option<RationalMultiplier>,
    ) -> Result<Self, TestFnError> {
        if factors.is_empty() && rational.is_none() {
            return Err(TestFnError::EmptySpec);
        }
        let mut segs: Vec<Segment> = Vec::new();
        for f in &factors {
            Segment::new(f.segment.alpha, f.segment.beta)?;
            if f.constants.is_empty() {
                return Err(TestFnError::EmptyFactor);
            }
            segs.push(f.segment);
        }
        segs.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        if segs.windows(2).any(|w| w[1].alpha <= w[0].beta) {
            return Err(TestFnError::OverlappingSegments);
        }
        // Parameters must parse, and constants must lie outside the closed
        // unit disk so branch points stay off the cuts.
        for f in &factors {
            for k in &f.constants {
                let c = k.c.lift(128)?;
                k.exponent.lift(128)?;
                if c.abs_f64() <= 1.0 {
                    return Err(TestFnError::ConstantOnUnitDisk);
                }
            }
        }
        if let Some(r) = &rational {
            if r.den.is_empty() || r.num.len() > r.den.len() {
                return Err(TestFnError::InvalidRational);
            }
            let num: Vec<BigComplex> = r
                .num
                .iter()
                .map(|p| p.lift(128))
                .collect::<Result<_, _>>()?;
            let den: Vec<BigComplex> = r
                .den
                .iter()
                .map(|p| p.lift(128))
                .collect::<Result<_, _>>()?;
            if den.last().map(|c| c.is_zero()).unwrap_or(true) || num.is_empty() {
                return Err(TestFnError::InvalidRational);
            }
            let scale = den.iter().map(|c| c.abs_f64()).fold(0.0, f64::max);
            for seg in &segs {
                for i in 0..=512 {
                    let t = seg.alpha + (seg.beta - seg.alpha) * i as f64 / 512.0;
                    let z = BigComplex::from_f64(128, t);
                    if horner(&den, &z).abs_f64() <= 1e-9 * scale {
                        return Err(TestFnError::DenominatorOnS);
                    }
                }
            }
        }
        Ok(Self { factors, rational })
    }

    /// The square-root pair `((a - 1/phi)(b - 1/phi))^{1/2}` on one segment.
    pub fn sqrt_pair(segment: Segment, a: &str, b: &str) -> Result<Self, TestFnError> {
        let half = ParamValue::real("1/2");
        Self::new(
            vec![FactorSpec {
                segment,
                constants: vec![
                    FactorConstant {
                        c: ParamValue::real(a),
                        exponent: half.clone(),
                    },
                    FactorConstant {
                        c: ParamValue::real(b),
                        exponent: half,
                    },
                ],
            }],
            None,
        )
    }

    /// A pure rational function (no branch cuts).
    pub fn rational_only(num: Vec<ParamValue>, den: Vec<ParamValue>) -> Result<Self, TestFnError> {
        Self::new(vec![], Some(RationalMultiplier { num, den }))
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn rational(&self) -> Option<&RationalMultiplier> {
        self.rational.as_ref()
    }

    pub(crate) fn lift(&self, prec: u32) -> Result<LiftedSpec, TestFnError> {
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let constants = f
                .constants
                .iter()
                .map(|k| {
                    Ok(LiftedConstant {
                        c: k.c.lift(prec)?,
                        e: k.exponent.lift(prec)?,
                    })
                })
                .collect::<Result<_, TestFnError>>()?;
            factors.push(LiftedFactor {
                segment: f.segment,
                constants,
            });
        }
        let rational = match &self.rational {
            None => None,
            Some(r) => Some((
                r.num
                    .iter()
                    .map(|p| p.lift(prec))
                    .collect::<Result<_, _>>()?,
                r.den
                    .iter()
                    .map(|p| p.lift(prec))
                    .collect::<Result<_, _>>()?,
            )),
        };
        Ok(LiftedSpec { factors, rational })
    }

    pub(crate) fn eval_rational(
        lifted: &LiftedSpec,
        z: &BigComplex,
    ) -> Result<BigComplex, TestFnError> {
        match &lifted.rational {
            None => Ok(BigComplex::one(z.prec())),
            Some((num, den)) => {
                let d = horner(den, z);
                if d.is_zero() {
                    return Err(TestFnError::DenominatorAtPoint);
                }
                Ok(&horner(num, z) / &d)
            }
        }
    }

    /// Evaluate the chosen branch at `z` (off all cuts), at `z`'s precision.
    ///
    /// Sheet zero uses principal powers of `C - 1/phi` directly; sheet one is
    /// the analytic continuation of sheet zero along a straight path through
    /// the interior of the nearest cut.
    pub fn eval_branch(&self, z: &BigComplex, sheet: Sheet) -> Result<BigComplex, TestFnError> {
        let prec = z.prec();
        let lifted = self.lift(prec)?;
        match sheet {
            Sheet::Zero => {
                let mut acc = Self::eval_rational(&lifted, z)?;
                for f in &lifted.factors {
                    let w = inverse_zhukovskii(z, &f.segment, Sheet::One)?;
                    for k in &f.constants {
                        let base = &k.c - &w;
                        acc = &acc * &base.pow(&k.e);
                    }
                }
                Ok(acc)
            }
            Sheet::One => continuation::eval_sheet_one(&lifted, z),
        }
    }

    /// Germ of the spec at infinity to order `n` at precision `prec`.
    pub fn germ_at_infinity(&self, n: usize, prec: u32) -> Result<GermAtInfinity, TestFnError> {
        let lifted = self.lift(prec)?;
        let mut acc = GermAtInfinity::one(prec, n);
        for f in &lifted.factors {
            let y = inv_phi_germ(&f.segment, n, prec)?;
            for k in &f.constants {
                let base = GermAtInfinity::constant(k.c.clone(), n).sub(&y)?;
                let branch = k.c.pow(&k.e);
                acc = acc.mul(&base.cpow(&k.e, &branch)?)?;
            }
        }
        if let Some((num, den)) = &lifted.rational {
            // num/den = x^{dd-dn} * rev(num)(x) / rev(den)(x), x = 1/z.
            let shift = den.len() - num.len();
            let pad = |v: &[BigComplex]| {
                let mut c: Vec<BigComplex> = v.iter().rev().cloned().collect();
                c.resize(n + 1, BigComplex::zero(prec));
                GermAtInfinity::new(prec, c)
            };
            let g = pad(num)?.mul(&pad(den)?.inv()?)?.shift_up(shift);
            acc = acc.mul(&g)?;
        }
        Ok(acc)
    }

    /// All branch points: segment endpoints plus `m + r (C + 1/C)/2` for
    /// each constant.
    pub fn branch_points(&self, prec: u32) -> Result<Vec<BigComplex>, TestFnError> {
        let lifted = self.lift(prec)?;
        let mut pts = Vec::new();
        let half = BigComplex::from_ratio(prec, 1, 2);
        for f in &lifted.factors {
            pts.push(BigComplex::from_f64(prec, f.segment.alpha));
            pts.push(BigComplex::from_f64(prec, f.segment.beta));
            let m = BigComplex::from_f64(prec, f.segment.midpoint());
            let r = BigComplex::from_f64(prec, f.segment.half_length());
            for k in &f.constants {
                let zh = &(&k.c + &k.c.recip()) * &half;
                pts.push(&m + &(&r * &zh));
            }
        }
        Ok(pts)
    }

    /// The union of cuts as an interval system (the set S of minimal
    /// capacity for this class).
    pub fn stahl_compact(&self) -> Result<IntervalSystem, TestFnError> {
        if self.factors.is_empty() {
            return Err(TestFnError::NoBranchCut);
        }
        let iv: Vec<(f64, f64)> = self
            .factors
            .iter()
            .map(|f| (f.segment.alpha, f.segment.beta))
            .collect();
        Ok(IntervalSystem::from_intervals(&iv)?)
    }

    pub fn validate_class(&self) -> ClassReport {
        let mut notes = Vec::new();
        let prec = 192u32;
        let tol = 1e-40;
        let mut real_ok = true;
        let mut sums_ok = true;
        let mut half_ok = true;
        let mut nonint_ok = true;
        for (fi, f) in self.factors.iter().enumerate() {
            let mut sum_re = 0.0f64;
            let mut sum_im = 0.0f64;
            for k in &f.constants {
                let c = k.c.lift(prec).expect("validated in constructor");
                let e = k.exponent.lift(prec).expect("validated in constructor");
                if c.im_f64().abs() > tol {
                    real_ok = false;
                    notes.push(format!("factor {fi}: constant {c:?} is not real"));
                }
                let (er, ei) = (e.re_f64(), e.im_f64());
                sum_re += er;
                sum_im += ei;
                if ei.abs() > tol || (er.abs() - 0.5).abs() > tol {
                    half_ok = false;
                }
                if ei.abs() <= tol && (er - er.round()).abs() <= tol {
                    nonint_ok = false;
                    notes.push(format!("factor {fi}: integer exponent {er}"));
                }
            }
            if sum_im.abs() > tol || (sum_re - sum_re.round()).abs() > tol {
                sums_ok = false;
                notes.push(format!(
                    "factor {fi}: exponent sum {sum_re}+{sum_im}i is not an integer"
                ));
            }
        }
        // Branch points must be pairwise distinct.
        let mut distinct = true;
        if let Ok(pts) = self.branch_points(prec) {
            for i in 0..pts.len() {
                for j in 0..i {
                    if (&pts[i] - &pts[j]).abs_f64() < 1e-10 {
                        distinct = false;
                    }
                }
            }
        }
        if !distinct {
            notes.push("branch points are not pairwise distinct".to_string());
        }
        let has_cut = !self.factors.is_empty();
        let base = real_ok && sums_ok && distinct && has_cut;
        if !has_cut {
            notes.push("pure rational spec: no branch cut".to_string());
        }
        if base && !half_ok && !nonint_ok {
            notes.push("exponents are neither +-1/2 nor all non-integer".to_string());
        }
        ClassReport {
            in_class_f: base && half_ok,
            in_extended_class: base && nonint_ok,
            notes,
        }
    }

    /// Canonical TOML serialization (field order fixed by the type).
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self, TestFnError> {
        let raw: TestFunctionSpec =
            toml::from_str(s).map_err(|e| TestFnError::InvalidParam(e.to_string()))?;
        Self::new(raw.factors, raw.rational)
    }

    /// SHA-256 of the canonical serialization; used as a cache key.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_canonical_toml().as_bytes());
        let d = h.finalize();
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}
