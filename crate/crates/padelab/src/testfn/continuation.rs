//! Second-sheet values by analytic continuation.
//!
//! The sheet-one value at `z` is defined as the continuation of the
//! sheet-zero branch along a straight path that crosses the interior of the
//! nearest cut at its midpoint `c`: from `c - i s d` through the cut to
//! `c + i s d` (with `s` the sign of `Im z`, `d` the cut's half length),
//! then straight to `z`. Crossing the cut swaps `1/phi -> phi` for the
//! crossed factor only; the second leg stays inside one closed half plane,
//! so no further cut is met.
//!
//! Each `(C - .)^e` term is tracked separately as a principal value times
//! `exp(2 pi i k e)` with an integer winding offset `k`; after each step the
//! offset is re-fit by proximity to the previous value, and the step is
//! halved whenever the best fit still jumps by more than half the running
//! modulus.

use rug::float::Constant;
use rug::Float;

use super::{inverse_zhukovskii, LiftedSpec, Segment, Sheet, TestFnError, TestFunctionSpec};
use crate::bigseries::BigComplex;

struct Term {
    factor: usize,
    c: BigComplex,
    e: BigComplex,
    /// `exp(2 pi i e)`: one full loop of the base around the origin.
    twist: BigComplex,
    k: i64,
    val: BigComplex,
    /// Largest `|val|` accepted so far; floors the jump criterion so a term
    /// vanishing at the end of the path (a mapped branch point on a level
    /// curve) cannot starve the step control.
    mag: f64,
}

impl Term {
    fn twisted(&self, pv: &BigComplex, k: i64) -> BigComplex {
        let mut v = pv.clone();
        if k >= 0 {
            for _ in 0..k {
                v = &v * &self.twist;
            }
        } else {
            let inv = self.twist.recip();
            for _ in 0..(-k) {
                v = &v * &inv;
            }
        }
        v
    }
}

fn principal_term(
    term: &Term,
    segs: &[Segment],
    cross: usize,
    crossed: bool,
    p: &BigComplex,
) -> Result<BigComplex, TestFnError> {
    let sheet = if term.factor == cross && crossed {
        Sheet::Zero // continued branch: 1/phi has become phi
    } else {
        Sheet::One
    };
    let w = inverse_zhukovskii(p, &segs[term.factor], sheet)?;
    let base = &term.c - &w;
    Ok(base.pow(&term.e))
}

/// One step of the walk: refit winding offsets at `p`; `Ok(false)` means the
/// step jumped too far and must be retried shorter.
fn advance(
    terms: &mut [Term],
    segs: &[Segment],
    cross: usize,
    crossed: bool,
    p: &BigComplex,
) -> Result<bool, TestFnError> {
    let mut staged: Vec<(i64, BigComplex)> = Vec::with_capacity(terms.len());
    for t in terms.iter() {
        let pv = principal_term(t, segs, cross, crossed, p)?;
        let mut best: Option<(i64, BigComplex, Float)> = None;
        for dk in -2..=2i64 {
            let cand = t.twisted(&pv, t.k + dk);
            let dist = (&cand - &t.val).abs();
            if best.as_ref().map(|(_, _, d)| dist < *d).unwrap_or(true) {
                best = Some((t.k + dk, cand, dist));
            }
        }
        let (k, cand, dist) = best.expect("nonempty candidate set");
        let scale = t.val.abs_f64().max(t.mag * 1e-4);
        if dist.to_f64() > 0.5 * scale {
            return Ok(false);
        }
        staged.push((k, cand));
    }
    for (t, (k, v)) in terms.iter_mut().zip(staged) {
        t.k = k;
        t.val = v;
        t.mag = t.mag.max(t.val.abs_f64());
    }
    Ok(true)
}

/// Walk one straight leg `p(t), t: 0 -> 1` with adaptive steps.
fn march<P, C>(
    terms: &mut [Term],
    segs: &[Segment],
    cross: usize,
    point_at: P,
    crossed_at: C,
) -> Result<(), TestFnError>
where
    P: Fn(f64) -> BigComplex,
    C: Fn(f64) -> bool,
{
    let mut t = 0.0f64;
    let mut h = 1.0 / 64.0;
    while t < 1.0 {
        let mut tn = (t + h).min(1.0);
        // never evaluate exactly on the real axis mid-crossing
        if (tn - 0.5).abs() < 1e-9 {
            tn += 1e-6;
        }
        let p = point_at(tn);
        if advance(terms, segs, cross, crossed_at(tn), &p)? {
            t = tn;
            h = (h * 1.5).min(1.0 / 16.0);
        } else {
            h *= 0.5;
            if h < 1e-12 {
                return Err(TestFnError::StepUnderflow);
            }
        }
    }
    Ok(())
}

pub(super) fn eval_sheet_one(
    lifted: &LiftedSpec,
    z: &BigComplex,
) -> Result<BigComplex, TestFnError> {
    let prec = z.prec();
    if lifted.factors.is_empty() {
        // No cuts: the function is single valued.
        return TestFunctionSpec::eval_rational(lifted, z);
    }
    let segs: Vec<Segment> = lifted.factors.iter().map(|f| f.segment).collect();
    let (zr, zi) = (z.re_f64(), z.im_f64());
    let cross = (0..segs.len())
        .min_by(|&i, &j| segs[i].distance(zr, zi).total_cmp(&segs[j].distance(zr, zi)))
        .expect("at least one factor");

    let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
    let i2pi = BigComplex::from_parts(Float::with_val(prec, 0), two_pi);
    let mut terms: Vec<Term> = Vec::new();
    for (fi, f) in lifted.factors.iter().enumerate() {
        for k in &f.constants {
            terms.push(Term {
                factor: fi,
                c: k.c.clone(),
                e: k.e.clone(),
                twist: (&i2pi * &k.e).exp(),
                k: 0,
                val: BigComplex::zero(prec),
                mag: 0.0,
            });
        }
    }

    let c = segs[cross].midpoint();
    let d = segs[cross].half_length();
    let s = if zi < 0.0 { -1.0 } else { 1.0 };
    let a0 = BigComplex::new(prec, c, -s * d);
    let b0 = BigComplex::new(prec, c, s * d);

    // Start on sheet zero at a0.
    for t in terms.iter_mut() {
        t.val = principal_term(t, &segs, cross, false, &a0)?;
        t.mag = t.val.abs_f64();
    }

    // Leg one: vertical crossing a0 -> b0, switching formulas at the axis.
    let leg1 = |t: f64| &a0 + &(&b0 - &a0).scale_float(&Float::with_val(prec, t));
    march(&mut terms, &segs, cross, leg1, |t| t > 0.5)?;

    // Leg two: b0 -> z inside the closed half plane of z.
    let leg2 = |t: f64| &b0 + &(z - &b0).scale_float(&Float::with_val(prec, t));
    march(&mut terms, &segs, cross, leg2, |_| true)?;

    let mut acc = TestFunctionSpec::eval_rational(lifted, z)?;
    for t in &terms {
        acc = &acc * &t.val;
    }
    Ok(acc)
}
