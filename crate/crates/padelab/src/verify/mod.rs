//! Empirical verification of the limit laws for diagonal Pade approximants
//! of algebraic functions: zero distribution, n-th root error rates on and
//! off the cut set, degree saturation, and the exact two-sheet identity
//! relating the error function across the cut.
//!
//! The report stores raw per-n diagnostics; n-th root quantities oscillate,
//! so trailing window medians (window 5) are emitted alongside and used by
//! threshold checks.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bigseries::BigComplex;
use crate::pade::{roots, PadeError, PadePair, Root};
use crate::potential::{
    level_curve, potential_of_measure, DiscreteMeasure, EquilibriumData, PotentialError,
};
use crate::testfn::{Sheet, TestFnError, TestFunctionSpec};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("probe {0} is closer than 0.1 diam(S) to S")]
    ProbeTooClose(String),
    #[error("probe {0} sits at a pole of the rational multiplier")]
    ProbeAtPole(String),
    #[error("probe set is empty")]
    EmptyProbes,
    #[error("denominator is constant: no zero counting measure")]
    NoZeros,
    #[error("at n = {n}: {source}")]
    AtN {
        n: usize,
        #[source]
        source: Box<VerifyError>,
    },
    #[error(transparent)]
    Pade(#[from] PadeError),
    #[error(transparent)]
    TestFn(#[from] TestFnError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Labeled sample points for the "inside D" statements; all at least
/// `0.1 diam(S)` away from S and off the poles of the rational multiplier.
#[derive(Clone, Debug)]
pub struct ProbeSet {
    points: Vec<(String, BigComplex)>,
}

impl ProbeSet {
    pub fn new(
        points: Vec<(String, BigComplex)>,
        spec: &TestFunctionSpec,
        eq: &EquilibriumData,
    ) -> Result<Self, VerifyError> {
        if points.is_empty() {
            return Err(VerifyError::EmptyProbes);
        }
        let min_dist = 0.1 * eq.system().diameter();
        for (label, z) in &points {
            if eq.system().distance(z.re_f64(), z.im_f64()) < min_dist {
                return Err(VerifyError::ProbeTooClose(label.clone()));
            }
            if let Some(r) = spec.rational() {
                let den: Vec<BigComplex> = r
                    .den
                    .iter()
                    .map(|p| p.lift(z.prec()))
                    .collect::<Result<_, _>>()
                    .map_err(VerifyError::TestFn)?;
                let mut acc = BigComplex::zero(z.prec());
                for c in den.iter().rev() {
                    acc = &(&acc * z) + c;
                }
                if acc.abs_f64() < 1e-9 {
                    return Err(VerifyError::ProbeAtPole(label.clone()));
                }
            }
        }
        Ok(Self { points })
    }

    /// Default probes `{2, -3, 1+i, 0.2+0.9i}` affinely scaled to the
    /// geometry of S (identity on `[-1, 1]`); probes violating the distance
    /// invariant are dropped.
    pub fn default_for(
        spec: &TestFunctionSpec,
        eq: &EquilibriumData,
        prec: u32,
    ) -> Result<Self, VerifyError> {
        let e = eq.system().endpoints();
        let c = 0.5 * (e[0] + e[e.len() - 1]);
        let h = 0.5 * (e[e.len() - 1] - e[0]);
        let raw = [("z2", 2.0, 0.0), ("zm3", -3.0, 0.0), ("z1p1i", 1.0, 1.0), ("zint", 0.2, 0.9)];
        let min_dist = 0.1 * eq.system().diameter();
        let mut pts = Vec::new();
        for (label, re, im) in raw {
            let z = BigComplex::new(prec, c + h * re, h * im);
            if eq.system().distance(z.re_f64(), z.im_f64()) >= min_dist {
                pts.push((label.to_string(), z));
            }
        }
        Self::new(pts, spec, eq)
    }

    pub fn points(&self) -> &[(String, BigComplex)] {
        &self.points
    }

    pub fn labels(&self) -> Vec<String> {
        self.points.iter().map(|(l, _)| l.clone()).collect()
    }
}

fn measure_from_poles(poles: &[Root], k: usize) -> Result<DiscreteMeasure, VerifyError> {
    if k == 0 {
        return Err(VerifyError::NoZeros);
    }
    let atoms = poles
        .iter()
        .map(|r| (r.value.clone(), r.multiplicity as f64 / k as f64))
        .collect();
    Ok(DiscreteMeasure::new(atoms, 1.0)?)
}

/// Normalized zero counting measure `chi(Q_n)/k_n`.
pub fn zero_measure(pair: &PadePair) -> Result<DiscreteMeasure, VerifyError> {
    measure_from_poles(&pair.poles()?, pair.denominator_degree())
}

/// Weak-* surrogates: max potential gap over the probes, and Kolmogorov
/// distance between real-projected CDFs. Atoms farther than 0.1 from S are
/// discarded from the projection and their mass added to `cdf_gap`.
pub fn weak_star_discrepancy(
    mu: &DiscreteMeasure,
    eq: &EquilibriumData,
    probes: &ProbeSet,
) -> Result<(f64, f64), VerifyError> {
    let mut pot_gap = 0.0f64;
    for (_, z) in probes.points() {
        let u = potential_of_measure(mu, z)?;
        let v = eq.potential_off_s(z.re_f64(), z.im_f64());
        pot_gap = pot_gap.max((u - v).abs());
    }

    let mut penalty = 0.0;
    let mut events: Vec<(f64, f64, f64)> = Vec::new(); // (x, d_mu, d_lambda)
    for (z, w) in mu.atoms() {
        let (re, im) = (z.re_f64(), z.im_f64());
        if eq.system().distance(re, im) > 0.1 {
            penalty += w;
        } else {
            events.push((re, *w, 0.0));
        }
    }
    for (t, w) in eq.nodes().iter().zip(eq.weights()) {
        events.push((*t, 0.0, *w));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    // coincident jump points act simultaneously, so apply every increment
    // at a given x before measuring the gap
    let (mut cm, mut cl, mut ks) = (0.0f64, 0.0f64, 0.0f64);
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        while i < events.len() && events[i].0 == x {
            cm += events[i].1;
            cl += events[i].2;
            i += 1;
        }
        ks = ks.max((cm - cl).abs());
    }
    Ok((pot_gap, ks + penalty))
}

/// Trailing-window median (window `w`); entry i is the median of the last
/// `min(i+1, w)` values.
pub fn window_median(values: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let lo = (i + 1).saturating_sub(w);
        let mut win: Vec<f64> = values[lo..=i].to_vec();
        win.sort_by(f64::total_cmp);
        let m = win.len();
        let med = if m % 2 == 1 {
            win[m / 2]
        } else {
            0.5 * (win[m / 2 - 1] + win[m / 2])
        };
        out.push(med);
    }
    out
}

/// Zero-pole doublets: a numerator root within `tol` of a denominator root,
/// both farther than `tol` from S.
pub fn froissart_scan(
    pair: &PadePair,
    s: &crate::potential::IntervalSystem,
    tol: f64,
) -> Result<Vec<(BigComplex, BigComplex)>, VerifyError> {
    // A zero or constant numerator has no zeros, hence no doublets.
    let p_mx = pair.p.iter().map(|c| c.abs_f64()).fold(0.0f64, f64::max);
    let p_deg = pair
        .p
        .iter()
        .rposition(|c| c.abs_f64() > p_mx * 2f64.powi(-((pair.prec() / 2) as i32)));
    if p_mx == 0.0 || p_deg == Some(0) || pair.denominator_degree() == 0 {
        return Ok(Vec::new());
    }
    Ok(doublets_from_roots(
        &pair.zeros()?,
        &pair.poles()?,
        s,
        tol,
    ))
}

fn doublets_from_roots(
    zeros: &[Root],
    poles: &[Root],
    s: &crate::potential::IntervalSystem,
    tol: f64,
) -> Vec<(BigComplex, BigComplex)> {
    let mut out = Vec::new();
    for z in zeros {
        if s.distance(z.value.re_f64(), z.value.im_f64()) <= tol {
            continue;
        }
        for p in poles {
            if s.distance(p.value.re_f64(), p.value.im_f64()) <= tol {
                continue;
            }
            if (&z.value - &p.value).abs_f64() <= tol {
                out.push((z.value.clone(), p.value.clone()));
                break;
            }
        }
    }
    out
}

/// Eq.-12-style residual from precomputed branch values: max over points of
/// `|R(z0) - R(z1) - Q (f0 - f1)| / max(|R(z0)|, |Q| |f0 - f1|)`.
pub fn identity_residual_from_values(
    pair: &PadePair,
    values: &[(BigComplex, BigComplex, BigComplex)],
) -> f64 {
    let mut worst = 0.0f64;
    for (z, f0, f1) in values {
        let q = pair.eval_q(z);
        let r0 = pair.error_function(z, f0);
        let r1 = pair.error_function(z, f1);
        let jump = f0 - f1;
        let lhs = &(&r0 - &r1) - &(&q * &jump);
        let scale = r0.abs_f64().max(q.abs_f64() * jump.abs_f64());
        if scale > 0.0 {
            worst = worst.max(lhs.abs_f64() / scale);
        }
    }
    worst
}

/// The exact two-sheet identity: both sheets are evaluated at each point and
/// the relative residual must sit at rounding level (`<= 2^{-P/2+16}`).
/// Points where the continuation fails are skipped; the skip count is
/// returned alongside.
pub fn identity_check(
    spec: &TestFunctionSpec,
    pair: &PadePair,
    points: &[BigComplex],
) -> Result<(f64, usize), VerifyError> {
    let mut values = Vec::with_capacity(points.len());
    let mut skipped = 0usize;
    for z in points {
        let f0 = spec.eval_branch(z, Sheet::Zero)?;
        match spec.eval_branch(z, Sheet::One) {
            Ok(f1) => values.push((z.clone(), f0, f1)),
            Err(TestFnError::StepUnderflow) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok((identity_residual_from_values(pair, &values), skipped))
}

#[derive(Clone, Debug, Serialize)]
pub struct RhoStats {
    pub rho: f64,
    /// Raw `m_n(rho) = max over Gamma_rho samples of |Q_n|`.
    pub m: f64,
    /// `m_n(rho)^{1/n}`.
    pub m_root: f64,
    /// `m_n(rho)^{1/k_n}` (the Eq.-23 side).
    pub eq23_root: f64,
    /// `M_{n,1}(rho)^{1/n} = (max |R_n(z^{(1)}) q_m(z)|)^{1/n}`.
    pub m1_root: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeStats {
    pub label: String,
    /// `|(1/n) log|R_n(z)| - (log cap - g(z))|`.
    pub gap6: Option<f64>,
    /// `|(1/n) log|f(z) - [n/n](z)| + 2 g(z)|`.
    pub gap7: Option<f64>,
    /// `|(1/n)(log|f - [n/n]| - log|R_n| + log|Q_n|)|`: zero up to rounding.
    pub consistency: Option<f64>,
    /// True when the probe hit a (spurious) pole and the gaps were skipped.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub k_n: usize,
    pub unique: bool,
    /// `(max over S nodes of |Q_n|)^{1/n}`.
    pub sup_s_q: f64,
    pub rhos: Vec<RhoStats>,
    pub probes: Vec<ProbeStats>,
    pub pot_gap: f64,
    pub cdf_gap: f64,
    /// Fraction of zero-measure mass within distance 0.05 of S.
    pub mass_near_s: f64,
    pub froissart: usize,
    pub identity_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RhoDiagnostics {
    pub rho: f64,
    /// `min over Gamma_rho of |q_m (f^{(0)} - f^{(1)})|`; the theory needs
    /// this bounded away from zero, so small values are flagged.
    pub min_qm_jump: f64,
    pub warn_small_jump: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub spec_hash: String,
    pub precision: u32,
    pub eq_hash: String,
    pub probe_labels: Vec<String>,
    pub rho_values: Vec<f64>,
    pub rho_diagnostics: Vec<RhoDiagnostics>,
    pub rows: Vec<ReportRow>,
}

fn sha_hex(data: &str) -> String {
    let mut h = Sha256::new();
    h.update(data.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

struct CachedCurve {
    rho: f64,
    /// Per point: (z, f0, f1, |q_m(z)|).
    values: Vec<(BigComplex, BigComplex, BigComplex, f64)>,
    min_qm_jump: f64,
}

/// Points per level-curve loop cached for the sup norms.
const CURVE_SAMPLES: usize = 64;
/// Tolerance for the froissart doublet scan inside the sweep.
const FROISSART_TOL: f64 = 1e-6;

/// Full per-n diagnostic sweep. `pairs` must be built from the spec's germ
/// and `eq` from its Stahl compact.
pub fn rate_report(
    spec: &TestFunctionSpec,
    eq: &EquilibriumData,
    pairs: &[PadePair],
    probes: &ProbeSet,
    rhos: &[f64],
) -> Result<ConvergenceReport, VerifyError> {
    let prec = pairs.iter().map(|p| p.prec()).min().unwrap_or(128);
    let cap = eq.capacity();
    let has_cut = !spec.factors().is_empty();

    // Rational-multiplier denominator q_m (identically 1 when absent).
    let qm_coeffs: Option<Vec<BigComplex>> = match spec.rational() {
        Some(r) => Some(
            r.den
                .iter()
                .map(|p| p.lift(prec))
                .collect::<Result<_, _>>()
                .map_err(VerifyError::TestFn)?,
        ),
        None => None,
    };
    let qm_at = |z: &BigComplex| -> f64 {
        match &qm_coeffs {
            None => 1.0,
            Some(den) => {
                let mut acc = BigComplex::zero(z.prec());
                for c in den.iter().rev() {
                    acc = &(&acc * z) + c;
                }
                acc.abs_f64()
            }
        }
    };

    // Level-curve samples with cached branch values (n-independent).
    let mut curves = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let loops = level_curve(eq, rho, CURVE_SAMPLES)?;
        let mut values = Vec::new();
        let mut min_jump = f64::INFINITY;
        for lp in &loops {
            for &(x, y) in &lp.points {
                let z = BigComplex::new(prec, x, y);
                let f0 = spec.eval_branch(&z, Sheet::Zero)?;
                let f1 = if has_cut {
                    spec.eval_branch(&z, Sheet::One)?
                } else {
                    f0.clone()
                };
                let qm = qm_at(&z);
                min_jump = min_jump.min(qm * (&f0 - &f1).abs_f64());
                values.push((z, f0, f1, qm));
            }
        }
        curves.push(CachedCurve {
            rho,
            values,
            min_qm_jump: min_jump,
        });
    }

    // Probe branch values (n-independent).
    let probe_f0: Vec<BigComplex> = probes
        .points()
        .iter()
        .map(|(_, z)| spec.eval_branch(z, Sheet::Zero))
        .collect::<Result<_, _>>()
        .map_err(VerifyError::TestFn)?;
    let s_nodes: Vec<BigComplex> = eq
        .nodes()
        .iter()
        .map(|t| BigComplex::from_f64(prec, *t))
        .collect();
    let system = eq.system().clone();

    let rows: Vec<Result<ReportRow, VerifyError>> = pairs
        .par_iter()
        .map(|pair| {
            let n = pair.n;
            let nf = n as f64;
            let k_n = pair.denominator_degree();

            let sup_q_raw = s_nodes
                .iter()
                .map(|z| pair.eval_q(z).abs_f64())
                .fold(0.0f64, f64::max);
            let sup_s_q = sup_q_raw.powf(1.0 / nf);

            let mut rho_stats = Vec::with_capacity(curves.len());
            for c in &curves {
                let mut m = 0.0f64;
                let mut m1 = 0.0f64;
                for (z, _f0, f1, qm) in &c.values {
                    m = m.max(pair.eval_q(z).abs_f64());
                    m1 = m1.max(pair.error_function(z, f1).abs_f64() * qm);
                }
                rho_stats.push(RhoStats {
                    rho: c.rho,
                    m,
                    m_root: m.powf(1.0 / nf),
                    eq23_root: m.powf(1.0 / k_n.max(1) as f64),
                    m1_root: m1.powf(1.0 / nf),
                });
            }

            let mut probe_stats = Vec::with_capacity(probes.points().len());
            for ((label, z), f0) in probes.points().iter().zip(&probe_f0) {
                let g = eq.green(z);
                let q_abs = pair.eval_q(z).abs_f64();
                // a probe sitting on a spurious pole makes 1/Q blow up;
                // flag and skip rather than reporting garbage
                let q_scale = pair
                    .q
                    .iter()
                    .map(|c| c.abs_f64())
                    .fold(0.0, f64::max)
                    * (1.0 + z.abs_f64()).powi(k_n as i32);
                // threshold at the Horner rounding floor: genuine values sit
                // far above it, a probe on a spurious pole lands below
                if q_abs < q_scale * 2f64.powi(-((prec / 2) as i32)) {
                    probe_stats.push(ProbeStats {
                        label: label.clone(),
                        gap6: None,
                        gap7: None,
                        consistency: None,
                        flagged: true,
                    });
                    continue;
                }
                let r_abs = pair.error_function(z, f0).abs_f64();
                let approx_err = (f0 - &pair.eval(z)).abs_f64();
                let gap6 = ((r_abs.ln()) / nf - (cap.ln() - g)).abs();
                let gap7 = ((approx_err.ln()) / nf + 2.0 * g).abs();
                let consistency =
                    ((approx_err.ln() - r_abs.ln() + q_abs.ln()) / nf).abs();
                probe_stats.push(ProbeStats {
                    label: label.clone(),
                    gap6: Some(gap6),
                    gap7: Some(gap7),
                    consistency: Some(consistency),
                    flagged: false,
                });
            }

            // Root-based diagnostics only feed f64-level statistics, so a
            // reduced working precision keeps the Aberth solves cheap.
            let wrap = |e: VerifyError| VerifyError::AtN {
                n,
                source: Box::new(e),
            };
            let rprec = prec.min(192);
            let q_red: Vec<BigComplex> = pair.q.iter().map(|c| c.with_prec(rprec)).collect();
            let poles = roots(&q_red, rprec)
                .map_err(VerifyError::Pade)
                .map_err(wrap)?;
            let mu = measure_from_poles(&poles, k_n).map_err(wrap)?;
            let (pot_gap, cdf_gap) = weak_star_discrepancy(&mu, eq, probes).map_err(wrap)?;
            let mass_near_s: f64 = mu
                .atoms()
                .iter()
                .filter(|(z, _)| system.distance(z.re_f64(), z.im_f64()) <= 0.05)
                .map(|(_, w)| *w)
                .sum();

            let p_mx = pair.p.iter().map(|c| c.abs_f64()).fold(0.0f64, f64::max);
            let p_deg = pair
                .p
                .iter()
                .rposition(|c| c.abs_f64() > p_mx * 2f64.powi(-((prec / 2) as i32)));
            let froissart = if p_mx == 0.0 || p_deg == Some(0) || k_n == 0 {
                0
            } else {
                let p_red: Vec<BigComplex> =
                    pair.p.iter().map(|c| c.with_prec(rprec)).collect();
                let zeros = roots(&p_red, rprec)
                    .map_err(VerifyError::Pade)
                    .map_err(wrap)?;
                doublets_from_roots(&zeros, &poles, &system, FROISSART_TOL).len()
            };

            // Identity residual over the first cached curve (8 points are
            // plenty: the identity is exact, only rounding shows up).
            let identity_residual = curves
                .first()
                .map(|c| {
                    let vals: Vec<(BigComplex, BigComplex, BigComplex)> = c
                        .values
                        .iter()
                        .step_by((c.values.len() / 8).max(1))
                        .map(|(z, f0, f1, _)| (z.clone(), f0.clone(), f1.clone()))
                        .collect();
                    identity_residual_from_values(pair, &vals)
                })
                .unwrap_or(0.0);

            Ok(ReportRow {
                n,
                k_n,
                unique: pair.unique,
                sup_s_q,
                rhos: rho_stats,
                probes: probe_stats,
                pot_gap,
                cdf_gap,
                mass_near_s,
                froissart,
                identity_residual,
            })
        })
        .collect();
    let mut rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|r| r.n);

    Ok(ConvergenceReport {
        spec_hash: spec.hash(),
        precision: prec,
        eq_hash: sha_hex(&eq.to_json()),
        probe_labels: probes.labels(),
        rho_values: rhos.to_vec(),
        rho_diagnostics: curves
            .iter()
            .map(|c| RhoDiagnostics {
                rho: c.rho,
                min_qm_jump: c.min_qm_jump,
                warn_small_jump: c.min_qm_jump < 1e-6,
            })
            .collect(),
        rows,
    })
}

impl ConvergenceReport {
    /// Named per-n series for plotting and smoothing; `None` marks a
    /// flagged/absent value.
    pub fn series(&self) -> Vec<(String, Vec<Option<f64>>)> {
        let mut out: Vec<(String, Vec<Option<f64>>)> = Vec::new();
        let col = |f: &dyn Fn(&ReportRow) -> Option<f64>| -> Vec<Option<f64>> {
            self.rows.iter().map(f).collect()
        };
        out.push(("sup_s_q".into(), col(&|r| Some(r.sup_s_q))));
        out.push(("k_ratio".into(), col(&|r| Some(r.k_n as f64 / r.n as f64))));
        for (i, rho) in self.rho_values.iter().enumerate() {
            out.push((format!("m_rho{rho}"), col(&|r| Some(r.rhos[i].m))));
            out.push((format!("mroot_rho{rho}"), col(&|r| Some(r.rhos[i].m_root))));
            out.push((format!("eq23_rho{rho}"), col(&|r| Some(r.rhos[i].eq23_root))));
            out.push((format!("m1root_rho{rho}"), col(&|r| Some(r.rhos[i].m1_root))));
        }
        for (i, label) in self.probe_labels.iter().enumerate() {
            out.push((format!("gap6_{label}"), col(&|r| r.probes[i].gap6)));
            out.push((format!("gap7_{label}"), col(&|r| r.probes[i].gap7)));
            out.push((format!("cons_{label}"), col(&|r| r.probes[i].consistency)));
        }
        out.push(("pot_gap".into(), col(&|r| Some(r.pot_gap))));
        out.push(("cdf_gap".into(), col(&|r| Some(r.cdf_gap))));
        out.push(("mass_near_s".into(), col(&|r| Some(r.mass_near_s))));
        out.push(("froissart".into(), col(&|r| Some(r.froissart as f64))));
        out.push((
            "identity_residual".into(),
            col(&|r| Some(r.identity_residual)),
        ));
        out
    }

    /// Window-median (window 5) of a named series, skipping missing values.
    pub fn smoothed(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let series = self.series();
        let (_, vals) = series.iter().find(|(s, _)| s == name)?;
        let present: Vec<f64> = vals.iter().filter_map(|v| *v).collect();
        let med = window_median(&present, 5);
        let mut it = med.into_iter();
        Some(
            vals.iter()
                .map(|v| v.map(|_| it.next().expect("one median per value")))
                .collect(),
        )
    }

    /// CSV with a fixed, documented column order: n, k_n, unique, then every
    /// series, then the window-median of each rate series (`*_med`).
    pub fn to_csv(&self) -> String {
        let series = self.series();
        let med_names: Vec<String> = series
            .iter()
            .map(|(name, _)| name.clone())
            .filter(|n| {
                n.starts_with("sup_s_q")
                    || n.starts_with("mroot_")
                    || n.starts_with("m1root_")
                    || n.starts_with("gap6_")
                    || n.starts_with("gap7_")
            })
            .collect();
        let mut header = vec!["n".to_string(), "k_n".to_string(), "unique".to_string()];
        header.extend(series.iter().map(|(n, _)| n.clone()));
        header.extend(med_names.iter().map(|n| format!("{n}_med")));
        let mut out = header.join(",");
        out.push('\n');
        let meds: Vec<Vec<Option<f64>>> = med_names
            .iter()
            .map(|n| self.smoothed(n).expect("known series"))
            .collect();
        for (i, row) in self.rows.iter().enumerate() {
            let mut fields = vec![
                row.n.to_string(),
                row.k_n.to_string(),
                row.unique.to_string(),
            ];
            for (_, vals) in &series {
                fields.push(vals[i].map(fmt).unwrap_or_default());
            }
            for m in &meds {
                fields.push(m[i].map(fmt).unwrap_or_default());
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two-column (n, value) series per diagnostic for plotting.
    pub fn plot_data(&self) -> Vec<(String, String)> {
        let ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        self.series()
            .into_iter()
            .map(|(name, vals)| {
                let mut body = String::new();
                for (n, v) in ns.iter().zip(&vals) {
                    if let Some(v) = v {
                        body.push_str(&format!("{n} {}\n", fmt(*v)));
                    }
                }
                (name, body)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigseries::GermAtInfinity;
    use crate::pade::pade_pair;
    use crate::potential::{solve_equilibrium, IntervalSystem};
    use crate::testfn::{ParamValue, Segment};

    fn eq11() -> EquilibriumData {
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        solve_equilibrium(&s, 64).unwrap()
    }

    fn pair_from_q(prec: u32, p: &[f64], q: &[f64], n: usize) -> PadePair {
        PadePair::from_parts(
            p.iter().map(|&c| BigComplex::from_f64(prec, c)).collect(),
            q.iter().map(|&c| BigComplex::from_f64(prec, c)).collect(),
            n,
            true,
            f64::INFINITY,
            prec,
        )
    }

    #[test]
    fn zero_measure_symmetric_pair() {
        // Q = z^2 - 1 -> atoms at +-1 with mass 1/2
        let pair = pair_from_q(256, &[1.0], &[-1.0, 0.0, 1.0], 2);
        let mu = zero_measure(&pair).unwrap();
        assert_eq!(mu.atoms().len(), 2);
        for (z, w) in mu.atoms() {
            assert!((w - 0.5).abs() < 1e-12);
            assert!((z.abs_f64() - 1.0).abs() < 1e-40);
        }
        // Q = z - 3 -> single atom, mass 1
        let pair = pair_from_q(256, &[1.0], &[-3.0, 1.0], 1);
        let mu = zero_measure(&pair).unwrap();
        assert_eq!(mu.atoms().len(), 1);
        assert!((mu.atoms()[0].0.re_f64() - 3.0).abs() < 1e-40);
        assert!((mu.atoms()[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weak_star_self_comparison() {
        let spec = TestFunctionSpec::sqrt_pair(Segment::new(-1.0, 1.0).unwrap(), "2", "3").unwrap();
        let eq = eq11();
        let probes = ProbeSet::default_for(&spec, &eq, 256).unwrap();
        let mu = eq.to_measure(256);
        let (pot, cdf) = weak_star_discrepancy(&mu, &eq, &probes).unwrap();
        assert!(pot <= 1e-8, "pot_gap {pot}");
        assert!(cdf <= 1e-3, "cdf_gap {cdf}");
    }

    #[test]
    fn weak_star_point_mass_oracle() {
        // mu = delta_10, S = [-1,1], probe at 2:
        // |U(2) - V(2)| = |-log 8 - (log 2 - log(2+sqrt3))| = 1.4556...
        let spec = TestFunctionSpec::sqrt_pair(Segment::new(-1.0, 1.0).unwrap(), "2", "3").unwrap();
        let eq = eq11();
        let probes = ProbeSet::new(
            vec![("z2".into(), BigComplex::from_f64(256, 2.0))],
            &spec,
            &eq,
        )
        .unwrap();
        let mu = DiscreteMeasure::new(vec![(BigComplex::from_f64(256, 10.0), 1.0)], 1.0).unwrap();
        let (pot, cdf) = weak_star_discrepancy(&mu, &eq, &probes).unwrap();
        let want = (-(8f64.ln())) - (2f64.ln() - (2.0 + 3f64.sqrt()).ln());
        assert!((pot - want.abs()).abs() < 1e-6, "pot {pot} want {}", want.abs());
        // atom at 10 is discarded: full mass becomes penalty + lambda CDF
        assert!(cdf > 1.0 - 1e-9);
    }

    #[test]
    fn window_median_basics() {
        assert_eq!(window_median(&[1.0], 5), vec![1.0]);
        let v = window_median(&[1.0, 100.0, 2.0, 3.0, 2.5], 3);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 50.5);
        assert_eq!(v[2], 2.0);
        assert_eq!(v[3], 3.0);
        assert_eq!(v[4], 2.5);
    }

    #[test]
    fn froissart_synthetic_doublet() {
        // P has a root at 5+5i, Q at 5+5i+1e-13: one doublet at tol 1e-10.
        let prec = 512;
        let mk = |r_re: f64, r_im: f64, other: f64| {
            // (z - r)(z - other), ascending
            vec![
                BigComplex::new(prec, r_re * other, r_im * other),
                BigComplex::new(prec, -r_re - other, -r_im),
                BigComplex::one(prec),
            ]
        };
        let p = mk(5.0, 5.0, 1.0);
        let q = mk(5.0 + 1e-13, 5.0, 2.0);
        let pair = PadePair::from_parts(p, q, 2, true, f64::INFINITY, prec);
        let s = IntervalSystem::from_intervals(&[(-1.0, 1.0)]).unwrap();
        let found = froissart_scan(&pair, &s, 1e-10).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        assert!((found[0].0.re_f64() - 5.0).abs() < 1e-9);
        // the isolated roots at 1 and 2 pair with nothing
        let none = froissart_scan(&pair, &s, 1e-16).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn identity_residual_and_negative_control() {
        let spec = TestFunctionSpec::sqrt_pair(Segment::new(-1.0, 1.0).unwrap(), "2", "3").unwrap();
        let prec = 512;
        let germ = spec.germ_at_infinity(30, prec).unwrap();
        let pair = pade_pair(&germ, 10).unwrap();
        let pts: Vec<BigComplex> = (0..6)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 6.0;
                BigComplex::new(prec, 1.3 * a.cos(), 0.8 * a.sin())
            })
            .collect();
        let (res, skipped) = identity_check(&spec, &pair, &pts).unwrap();
        assert_eq!(skipped, 0);
        let bound = 2f64.powi(-(prec as i32) / 2 + 16);
        assert!(res <= bound, "residual {res} > bound {bound}");

        // Negative control: the identity is algebraic in whatever value is
        // substituted for the second sheet, so corrupt the continued error
        // function term itself. Expected residual: 2|R(z1)|/scale.
        let z = &pts[0];
        let f0 = spec.eval_branch(z, Sheet::Zero).unwrap();
        let f1 = spec.eval_branch(z, Sheet::One).unwrap();
        let q = pair.eval_q(z);
        let r0 = pair.error_function(z, &f0);
        let r1 = pair.error_function(z, &f1);
        let jump = &f0 - &f1;
        let corrupted = &(&r0 - &(-&r1)) - &(&q * &jump);
        let scale = r0.abs_f64().max(q.abs_f64() * jump.abs_f64());
        let bad = corrupted.abs_f64() / scale;
        let want = 2.0 * r1.abs_f64() / scale;
        assert!(bad > bound * 1e6, "negative control too small: {bad}");
        assert!((bad - want).abs() < 1e-6 * want.max(1.0));
    }

    #[test]
    fn probe_set_invariants() {
        let spec = TestFunctionSpec::sqrt_pair(Segment::new(-1.0, 1.0).unwrap(), "2", "3").unwrap();
        let eq = eq11();
        assert!(matches!(
            ProbeSet::new(
                vec![("close".into(), BigComplex::new(128, 1.05, 0.0))],
                &spec,
                &eq
            ),
            Err(VerifyError::ProbeTooClose(_))
        ));
        let with_pole = TestFunctionSpec::new(
            spec.factors().to_vec(),
            Some(crate::testfn::RationalMultiplier {
                num: vec![ParamValue::real("1")],
                den: vec![ParamValue::real("-3"), ParamValue::real("1")],
            }),
        )
        .unwrap();
        assert!(matches!(
            ProbeSet::new(
                vec![("pole".into(), BigComplex::from_f64(128, 3.0))],
                &with_pole,
                &eq
            ),
            Err(VerifyError::ProbeAtPole(_))
        ));
    }

    #[test]
    fn small_sweep_report_is_deterministic_and_sane() {
        let spec = TestFunctionSpec::sqrt_pair(Segment::new(-1.0, 1.0).unwrap(), "2", "3").unwrap();
        let eq = eq11();
        let prec = 256;
        let germ = spec.germ_at_infinity(26, prec).unwrap();
        let pairs: Vec<PadePair> = (4..=12)
            .map(|n| pade_pair(&germ, n).unwrap())
            .collect();
        let probes = ProbeSet::default_for(&spec, &eq, prec).unwrap();
        let report = rate_report(&spec, &eq, &pairs, &probes, &[1.5]).unwrap();
        assert_eq!(report.rows.len(), 9);
        for (i, row) in report.rows.iter().enumerate() {
            assert_eq!(row.n, 4 + i, "rows sorted by n");
            assert!(row.sup_s_q.is_finite() && row.sup_s_q > 0.0);
            assert!(row.k_n >= row.n - 1, "degree saturation");
            // Eq. 23 lower bound with the spec's 2% slack
            assert!(
                row.rhos[0].eq23_root >= 1.5 * 0.5 * 0.98,
                "n = {}: eq23 {}",
                row.n,
                row.rhos[0].eq23_root
            );
            for p in &row.probes {
                assert!(!p.flagged);
                assert!(p.consistency.unwrap() < 0.05, "rate consistency");
            }
            let bound = 2f64.powi(-(prec as i32) / 2 + 16);
            assert!(row.identity_residual <= bound);
        }
        // already visibly converging at n = 12
        let last = report.rows.last().unwrap();
        assert!((last.sup_s_q - 0.5).abs() < 0.25);
        assert!((last.rhos[0].m_root - 0.75).abs() < 0.25);

        let second = rate_report(&spec, &eq, &pairs, &probes, &[1.5]).unwrap();
        assert_eq!(report.to_csv(), second.to_csv(), "byte-identical reruns");
        assert_eq!(report.to_json(), second.to_json());
        // plot data exists for every series
        assert!(report.plot_data().iter().any(|(n, _)| n == "sup_s_q"));
    }
}
