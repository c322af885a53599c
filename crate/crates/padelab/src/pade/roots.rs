//! Polynomial roots at working precision via Aberth-Ehrlich iteration,
//! with a residual certificate and cluster-based multiplicity estimates.

use crate::bigseries::BigComplex;

use super::PadeError;

#[derive(Clone, Debug)]
pub struct Root {
    pub value: BigComplex,
    /// Size of the cluster this root was merged from.
    pub multiplicity: usize,
    /// `|p(root)| <= 2^{-prec/4} * max|coeff| * max(1, |root|)^deg`.
    pub certified: bool,
}

fn eval_with_derivative(coeffs: &[BigComplex], z: &BigComplex) -> (BigComplex, BigComplex) {
    let prec = z.prec();
    let mut p = BigComplex::zero(prec);
    let mut dp = BigComplex::zero(prec);
    for c in coeffs.iter().rev() {
        dp = &(&dp * z) + &p;
        p = &(&p * z) + c;
    }
    (p, dp)
}

/// All roots of `sum_k coeffs[k] z^k` (ascending coefficients).
///
/// Leading coefficients below the relative noise floor are stripped, so the
/// degree matches the numerically meaningful polynomial. Exact roots at the
/// origin (trailing zero coefficients) are split off directly.
pub fn roots(coeffs: &[BigComplex], prec: u32) -> Result<Vec<Root>, PadeError> {
    let mx = coeffs.iter().map(|c| c.abs_f64()).fold(0.0f64, f64::max);
    if mx == 0.0 {
        return Err(PadeError::ZeroPolynomial);
    }
    let tol_lead = mx * 2f64.powi(-((prec / 2) as i32));
    let deg = coeffs
        .iter()
        .rposition(|c| c.abs_f64() > tol_lead)
        .ok_or(PadeError::ZeroPolynomial)?;
    let mut out: Vec<Root> = Vec::new();

    // z = 0 roots: exactly zero low coefficients only.
    let zeros_at_origin = coeffs.iter().take(deg).take_while(|c| c.is_zero()).count();
    if zeros_at_origin > 0 {
        out.push(Root {
            value: BigComplex::zero(prec),
            multiplicity: zeros_at_origin,
            certified: true,
        });
    }
    let work: Vec<BigComplex> = coeffs[zeros_at_origin..=deg]
        .iter()
        .map(|c| c.with_prec(prec))
        .collect();
    let d = work.len() - 1;
    if d == 0 {
        return if out.is_empty() {
            Err(PadeError::ZeroPolynomial)
        } else {
            Ok(out)
        };
    }

    // Cauchy bound for the initial circle, slightly asymmetric angles.
    let lead = work[d].abs_f64();
    let bound = 1.0
        + work[..d]
            .iter()
            .map(|c| c.abs_f64() / lead)
            .fold(0.0, f64::max);
    let r0 = 0.7 * bound;
    let mut z: Vec<BigComplex> = (0..d)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.35) / d as f64 + 0.17;
            BigComplex::new(prec, r0 * a.cos(), r0 * a.sin())
        })
        .collect();

    let conv_tol = 2f64.powi(-(prec as i32) + 8);
    let mut converged = false;
    for _ in 0..400 {
        let mut max_step = 0.0f64;
        for k in 0..d {
            let (p, dp) = eval_with_derivative(&work, &z[k]);
            if p.is_zero() {
                continue;
            }
            let w = if dp.is_zero() {
                // nudge off a critical point
                BigComplex::new(prec, conv_tol.max(1e-20), 0.0)
            } else {
                &p / &dp
            };
            let mut s = BigComplex::zero(prec);
            for j in 0..d {
                if j != k {
                    let diff = &z[k] - &z[j];
                    if !diff.is_zero() {
                        s = &s + &diff.recip();
                    }
                }
            }
            let denom = &BigComplex::one(prec) - &(&w * &s);
            let corr = if denom.is_zero() { w } else { &w / &denom };
            let rel = corr.abs_f64() / (1.0 + z[k].abs_f64());
            max_step = max_step.max(rel);
            z[k] = &z[k] - &corr;
        }
        if max_step < conv_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        // Aberth stalls only in pathological ties; the certificate below
        // still reports per-root quality, so keep going unless wildly off.
        let worst = z
            .iter()
            .map(|zk| eval_with_derivative(&work, zk).0.abs_f64())
            .fold(0.0, f64::max);
        let cert_scale = mx * 2f64.powi(-((prec / 4) as i32));
        if worst > cert_scale * bound.powi(d as i32) * 1e20 {
            return Err(PadeError::RootsDiverged);
        }
    }

    // Cluster roots within 2^{-prec/8} absolute-relative distance.
    let cluster_tol = 2f64.powi(-((prec / 8) as i32));
    let mut used = vec![false; d];
    let cert_floor = 2f64.powi(-((prec / 4) as i32));
    for k in 0..d {
        if used[k] {
            continue;
        }
        let mut members = vec![k];
        for j in (k + 1)..d {
            if !used[j]
                && (&z[k] - &z[j]).abs_f64() <= cluster_tol * (1.0 + z[k].abs_f64())
            {
                members.push(j);
                used[j] = true;
            }
        }
        used[k] = true;
        // centroid of the cluster
        let mut c = BigComplex::zero(prec);
        for &m in &members {
            c = &c + &z[m];
        }
        let c = &c / &BigComplex::from_f64(prec, members.len() as f64);
        let (pv, _) = eval_with_derivative(&work, &c);
        let certified =
            pv.abs_f64() <= cert_floor * mx * (1.0 + c.abs_f64()).powi(deg as i32);
        out.push(Root {
            value: c,
            multiplicity: members.len(),
            certified,
        });
    }
    Ok(out)
}
