//! Radial field profiles (A, V, B), hypothesis probes, Agmon weights,
//! turning radii and the smooth cutoffs built on them.
//!
//! The magnetic field enters only through the rotational-gauge vector
//! potential `A(r) = (1/r) ∫_0^r B(s) s ds`; every profile exposes `A`, its
//! derivative `A'`, the electric potential `V` and, when known, `B`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quadrature;

/// Relative tolerance used for all radial quadratures in this module.
pub const QUAD_TOL: f64 = 1e-10;

/// Default turning-radius parameter δ₀.
pub const DEFAULT_DELTA0: f64 = 0.1;

/// Margin used when classifying the asymptotic regime.
pub const REGIME_MARGIN: f64 = 0.05;

/// A profile counts as satisfying the `A'/A² → 0` condition on the probed
/// tail when the tail supremum is below this value.
pub const CON2_THRESHOLD: f64 = 0.1;

/// Upper end of the turning-radius bracket scan.
pub const R_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Power,
    Linear,
    ConstantB,
    Tabulated,
    Composite,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Power => "power",
            Family::Linear => "linear",
            Family::ConstantB => "constant_b",
            Family::Tabulated => "tabulated",
            Family::Composite => "composite",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "power" => Ok(Family::Power),
            "linear" => Ok(Family::Linear),
            "constant_b" | "constant-b" | "landau" => Ok(Family::ConstantB),
            "tabulated" => Ok(Family::Tabulated),
            "composite" => Ok(Family::Composite),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// Sampled field data for the tabulated family. Exactly one of `a` or `b`
/// must be given; `v` defaults to zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSamples {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<(f64, f64)>>,
}

fn table(samples: &[(f64, f64)]) -> Result<Pchip> {
    let (x, y) = samples.iter().copied().unzip();
    Pchip::new(x, y)
}

#[derive(Debug, Clone, PartialEq)]
enum Magnetic {
    Potential(Pchip),
    Field(Pchip),
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Power {
        a: f64,
        p: f64,
        lambda: f64,
    },
    Linear {
        a: f64,
        lambda: f64,
    },
    ConstantB {
        b: f64,
        lambda: f64,
    },
    Tabulated {
        magnetic: Magnetic,
        v: Option<Pchip>,
    },
    Composite {
        magnetic: Box<FieldProfile>,
        electric: Box<FieldProfile>,
    },
}

/// Radial field pair (A, V) with optional generating B.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    kind: Kind,
    params: Vec<f64>,
}

/// Builds a closed-form profile.
///
/// * `linear`: `[a, λ]`, A = a·r, V = λ·r.
/// * `power`: `[a, p]` or `[a, p, λ]`, A = a·r^p, V = λ·r^p, p > 0.
/// * `constant_b`: `[B]` or `[B, λ]`, A = B·r/2, V = λ·r.
pub fn make_profile(family: Family, params: &[f64]) -> Result<FieldProfile> {
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter("parameters must be finite".into()));
    }
    let kind = match family {
        Family::Linear => match *params {
            [a, lambda] => Kind::Linear { a, lambda },
            _ => {
                return Err(Error::ParamCount {
                    family: "linear",
                    expected: "2",
                    got: params.len(),
                })
            }
        },
        Family::Power => {
            let (a, p, lambda) = match *params {
                [a, p] => (a, p, 0.0),
                [a, p, l] => (a, p, l),
                _ => {
                    return Err(Error::ParamCount {
                        family: "power",
                        expected: "2 or 3",
                        got: params.len(),
                    })
                }
            };
            if p <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "power exponent must be positive, got {p}"
                )));
            }
            Kind::Power { a, p, lambda }
        }
        Family::ConstantB => match *params {
            [b] => Kind::ConstantB { b, lambda: 0.0 },
            [b, lambda] => Kind::ConstantB { b, lambda },
            _ => {
                return Err(Error::ParamCount {
                    family: "constant_b",
                    expected: "1 or 2",
                    got: params.len(),
                })
            }
        },
        Family::Tabulated | Family::Composite => {
            return Err(Error::InvalidParameter(format!(
                "family `{family}` is built from samples or sub-profiles, not a parameter list"
            )))
        }
    };
    Ok(FieldProfile {
        kind,
        params: params.to_vec(),
    })
}

impl FieldProfile {
    pub fn tabulated(samples: &TabulatedSamples) -> Result<Self> {
        let magnetic = match (&samples.a, &samples.b) {
            (Some(a), None) => Magnetic::Potential(table(a)?),
            (None, Some(b)) => Magnetic::Field(table(b)?),
            _ => {
                return Err(Error::InvalidParameter(
                    "tabulated profile needs exactly one of the A or B tables".into(),
                ))
            }
        };
        let v = samples.v.as_deref().map(table).transpose()?;
        Ok(FieldProfile {
            kind: Kind::Tabulated { magnetic, v },
            params: Vec::new(),
        })
    }

    /// Takes A, A' and B from `magnetic` and V from `electric`.
    pub fn composite(magnetic: FieldProfile, electric: FieldProfile) -> Self {
        FieldProfile {
            kind: Kind::Composite {
                magnetic: Box::new(magnetic),
                electric: Box::new(electric),
            },
            params: Vec::new(),
        }
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Power { .. } => Family::Power,
            Kind::Linear { .. } => Family::Linear,
            Kind::ConstantB { .. } => Family::ConstantB,
            Kind::Tabulated { .. } => Family::Tabulated,
            Kind::Composite { .. } => Family::Composite,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Vector potential A(r).
    pub fn a(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Power { a, p, .. } => a * r.powf(*p),
            Kind::Linear { a, .. } => a * r,
            Kind::ConstantB { b, .. } => 0.5 * b * r,
            Kind::Tabulated { magnetic, .. } => match magnetic {
                Magnetic::Potential(t) => t.eval(r),
                Magnetic::Field(t) => {
                    if r == 0.0 {
                        0.0
                    } else {
                        t.first_moment(r) / r
                    }
                }
            },
            Kind::Composite { magnetic, .. } => magnetic.a(r),
        }
    }

    /// Electric potential V(r).
    pub fn v(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Power { p, lambda, .. } => lambda * r.powf(*p),
            Kind::Linear { lambda, .. } | Kind::ConstantB { lambda, .. } => lambda * r,
            Kind::Tabulated { v, .. } => v.as_ref().map_or(0.0, |t| t.eval(r)),
            Kind::Composite { electric, .. } => electric.v(r),
        }
    }

    /// Magnetic field B(r), when the profile determines it.
    pub fn b(&self, r: f64) -> Option<f64> {
        match &self.kind {
            Kind::Power { a, p, .. } => Some(a * (p + 1.0) * r.powf(p - 1.0)),
            Kind::Linear { a, .. } => Some(2.0 * a),
            Kind::ConstantB { b, .. } => Some(*b),
            Kind::Tabulated { magnetic, .. } => match magnetic {
                Magnetic::Field(t) => Some(t.eval(r)),
                Magnetic::Potential(t) => Some(t.eval(r) / r + t.derivative(r)),
            },
            Kind::Composite { magnetic, .. } => magnetic.b(r),
        }
    }

    /// Derivative A'(r); analytic for every family.
    pub fn da(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Power { a, p, .. } => a * p * r.powf(p - 1.0),
            Kind::Linear { a, .. } => *a,
            Kind::ConstantB { b, .. } => 0.5 * b,
            Kind::Tabulated { magnetic, .. } => match magnetic {
                Magnetic::Potential(t) => t.derivative(r),
                // (rA)' = rB
                Magnetic::Field(t) => t.eval(r) - self.a(r) / r,
            },
            Kind::Composite { magnetic, .. } => magnetic.da(r),
        }
    }

    /// `∫_a^b A(s) ds` with a closed form where one exists.
    pub fn a_integral(&self, lo: f64, hi: f64) -> f64 {
        match &self.kind {
            Kind::Power { a, p, .. } => a * (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / (p + 1.0),
            Kind::Linear { a, .. } => 0.5 * a * (hi * hi - lo * lo),
            Kind::ConstantB { b, .. } => 0.25 * b * (hi * hi - lo * lo),
            Kind::Composite { magnetic, .. } => magnetic.a_integral(lo, hi),
            Kind::Tabulated { .. } => {
                // Five-point Gauss on sub-cells of width ≤ 0.05 keeps this
                // well below the discretization error of any grid using it.
                let cells = (((hi - lo).abs() / 0.05).ceil() as usize).max(1);
                let w = (hi - lo) / cells as f64;
                (0..cells)
                    .map(|k| {
                        let a = lo + k as f64 * w;
                        quadrature::gauss_legendre5(|s| self.a(s), a, a + w)
                    })
                    .sum()
            }
        }
    }

    /// Closed-form B-to-A map where available, quadrature otherwise.
    pub fn vector_potential_from_b(&self, r: f64) -> Result<f64> {
        match &self.kind {
            Kind::Power { .. } | Kind::Linear { .. } | Kind::ConstantB { .. } => Ok(self.a(r)),
            Kind::Composite { magnetic, .. } => magnetic.vector_potential_from_b(r),
            Kind::Tabulated { .. } => vector_potential_from_b(|s| self.b(s).unwrap_or(0.0), r),
        }
    }

    pub(crate) fn check_finite(&self, r: f64) -> Result<()> {
        if !self.a(r).is_finite() {
            return Err(Error::NonFinite { what: "A", r });
        }
        if !self.v(r).is_finite() {
            return Err(Error::NonFinite { what: "V", r });
        }
        Ok(())
    }
}

/// `A(r) = (1/r) ∫_0^r B(s) s ds` by adaptive quadrature.
pub fn vector_potential_from_b<F: Fn(f64) -> f64>(b: F, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!(
            "radius must be positive, got {r}"
        )));
    }
    let bad = std::cell::Cell::new(None);
    let integrand = |s: f64| {
        let v = b(s);
        if !v.is_finite() && bad.get().is_none() {
            bad.set(Some(s));
        }
        v * s
    };
    let res = quadrature::integrate(integrand, 0.0, r, QUAD_TOL);
    if let Some(s) = bad.get() {
        return Err(Error::NonFinite { what: "B", r: s });
    }
    Ok(res? / r)
}

/// Asymptotic regime suggested by the probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// |A| → ∞ and limsup |V/A| < 1.
    Localized,
    /// V → ∞ and limsup |A/V| < 1.
    Delocalized,
    Indeterminate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Localized => "localized",
            Regime::Delocalized => "delocalized",
            Regime::Indeterminate => "indeterminate",
        })
    }
}

/// Finite-probe witnesses for the asymptotic field conditions. These are
/// evidence, not proofs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub probe_radii: Vec<f64>,
    /// |A(r_k)| at every probe.
    pub a_witness: Vec<f64>,
    pub con0_pass: bool,
    /// max |V/A| over the last half of the probes.
    pub con1_limsup: f64,
    /// max |A'/A²| over the last half of the probes.
    pub con2_sup_tail: f64,
    /// max |A/V| over the last half of the probes.
    pub reciprocal_limsup: f64,
    pub v_unbounded: bool,
    pub regime: Regime,
    pub margin: f64,
    /// Probes where A vanished; ratios involving 1/A were not evaluated there.
    pub skipped: Vec<f64>,
}

/// Growth witness: the tail half of the sequence never decreases and the
/// final value is at least four times the first and exceeds one.
fn grows(w: &[f64]) -> bool {
    if w.len() < 2 {
        return false;
    }
    let tail = &w[w.len() / 2..];
    let monotone = tail.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-12));
    let last = *w.last().unwrap();
    monotone && last > 1.0 && last >= 4.0 * w[0]
}

fn tail_max(values: &[Option<f64>]) -> f64 {
    let tail = &values[values.len() / 2..];
    let finite: Vec<f64> = tail.iter().flatten().copied().collect();
    if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.into_iter().fold(0.0, f64::max)
    }
}

pub fn verify_hypothesis(
    profile: &FieldProfile,
    r_start: f64,
    r_end: f64,
    n_probes: usize,
) -> Result<HypothesisReport> {
    if !(r_start > 0.0 && r_end > r_start) {
        return Err(Error::Precondition(format!(
            "probe range needs 0 < R_start < R_end, got [{r_start}, {r_end}]"
        )));
    }
    if n_probes < 8 {
        return Err(Error::Precondition(format!(
            "need at least 8 probes, got {n_probes}"
        )));
    }
    let ratio = (r_end / r_start).powf(1.0 / (n_probes - 1) as f64);
    let probe_radii: Vec<f64> = (0..n_probes)
        .map(|k| {
            if k == n_probes - 1 {
                r_end
            } else {
                r_start * ratio.powi(k as i32)
            }
        })
        .collect();
    for &r in &probe_radii {
        profile.check_finite(r)?;
    }
    let a_vals: Vec<f64> = probe_radii.iter().map(|&r| profile.a(r)).collect();
    let v_vals: Vec<f64> = probe_radii.iter().map(|&r| profile.v(r)).collect();
    let a_witness: Vec<f64> = a_vals.iter().map(|a| a.abs()).collect();
    let v_witness: Vec<f64> = v_vals.iter().map(|v| v.abs()).collect();

    let mut skipped = Vec::new();
    let mut v_over_a = Vec::with_capacity(n_probes);
    let mut con2 = Vec::with_capacity(n_probes);
    let mut a_over_v = Vec::with_capacity(n_probes);
    for (k, &r) in probe_radii.iter().enumerate() {
        let (a, v) = (a_vals[k], v_vals[k]);
        if a == 0.0 {
            skipped.push(r);
            v_over_a.push(None);
            con2.push(None);
        } else {
            v_over_a.push(Some((v / a).abs()));
            con2.push(Some((profile.da(r) / (a * a)).abs()));
        }
        a_over_v.push(if v == 0.0 { None } else { Some((a / v).abs()) });
    }

    let con0_pass = grows(&a_witness);
    let con1_limsup = tail_max(&v_over_a);
    let con2_sup_tail = tail_max(&con2);
    let reciprocal_limsup = tail_max(&a_over_v);
    let v_unbounded = grows(&v_witness);

    let margin = REGIME_MARGIN;
    let regime = if con0_pass && con1_limsup < 1.0 - margin && con2_sup_tail < CON2_THRESHOLD {
        Regime::Localized
    } else if v_unbounded && reciprocal_limsup < 1.0 - margin {
        Regime::Delocalized
    } else {
        Regime::Indeterminate
    };

    Ok(HypothesisReport {
        probe_radii,
        a_witness,
        con0_pass,
        con1_limsup,
        con2_sup_tail,
        reciprocal_limsup,
        v_unbounded,
        regime,
        margin,
        skipped,
    })
}

/// Agmon weight ϱ(r) = ∫_0^r |A(s)| ds.
pub fn agmon_weight(profile: &FieldProfile, r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::Precondition(format!(
            "radius must be nonnegative, got {r}"
        )));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    abs_a_integral(profile, 0.0, r)
}

fn abs_a_integral(profile: &FieldProfile, lo: f64, hi: f64) -> Result<f64> {
    let v = quadrature::integrate(|s| profile.a(s).abs(), lo, hi, QUAD_TOL)?;
    if !v.is_finite() {
        return Err(Error::NonFinite { what: "A", r: hi });
    }
    Ok(v)
}

/// ϱ at each of the ascending radii, accumulated segment by segment.
pub fn agmon_weights_at(profile: &FieldProfile, radii: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &r in radii {
        if r < prev {
            return Err(Error::Precondition("radii must be ascending".into()));
        }
        acc += abs_a_integral(profile, prev, r)?;
        out.push(acc);
        prev = r;
    }
    Ok(out)
}

/// Largest r with `|m| ≥ δ₀ r |A(r)|`.
///
/// The bracket is found on a geometric scan of (1e-9, R_CEILING], then
/// bisected until the interval stops shrinking.
pub fn turning_radius(profile: &FieldProfile, m: f64, delta0: f64) -> Result<f64> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(Error::Precondition(format!(
            "delta0 must lie in (0,1), got {delta0}"
        )));
    }
    let target = m.abs();
    let g = |r: f64| delta0 * r * profile.a(r).abs() - target;
    if !(g(R_CEILING) > 0.0) {
        return Err(Error::NoTurningRadius {
            m: target,
            ceiling: R_CEILING,
        });
    }
    const SCAN: usize = 4000;
    let r_lo: f64 = 1e-9;
    let step = (R_CEILING / r_lo).ln() / SCAN as f64;
    let node = |k: usize| {
        if k == SCAN {
            R_CEILING
        } else {
            r_lo * (step * k as f64).exp()
        }
    };
    let mut bracket = None;
    for k in (0..SCAN).rev() {
        let r = node(k);
        let gr = g(r);
        if !gr.is_finite() {
            return Err(Error::NonFinite { what: "A", r });
        }
        if gr <= 0.0 {
            bracket = Some((r, node(k + 1)));
            break;
        }
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::NoTurningRadius {
        m: target,
        ceiling: R_CEILING,
    })?;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smooth step: 0 below 1, 1 above 2, C² quintic in between.
pub fn theta(x: f64) -> f64 {
    let t = (x - 1.0).clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (6.0 * t - 15.0))
}

/// Cutoffs `f_j(r) = θ(r/3r_j)`, `f_j^c = 1 − f_j` and `f̃_j(r) = θ(r/r_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSet {
    pub delta0: f64,
    pub m: f64,
    pub r_j: f64,
}

impl CutoffSet {
    pub fn f(&self, r: f64) -> f64 {
        theta(r / (3.0 * self.r_j))
    }

    pub fn f_c(&self, r: f64) -> f64 {
        1.0 - self.f(r)
    }

    pub fn f_tilde(&self, r: f64) -> f64 {
        theta(r / self.r_j)
    }
}

pub fn make_cutoffs(profile: &FieldProfile, m: f64, delta0: f64) -> Result<CutoffSet> {
    Ok(CutoffSet {
        delta0,
        m,
        r_j: turning_radius(profile, m, delta0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: f64, l: f64) -> FieldProfile {
        make_profile(Family::Linear, &[a, l]).unwrap()
    }

    #[test]
    fn family_examples() {
        let p = linear(1.0, 0.5);
        assert_eq!(p.a(2.0), 2.0);
        assert_eq!(p.v(2.0), 1.0);
        let c = make_profile(Family::ConstantB, &[2.0]).unwrap();
        assert_eq!(c.a(3.0), 3.0);
        assert_eq!(c.v(3.0), 0.0);
        let s = make_profile(Family::Power, &[1.0, 0.5]).unwrap();
        let r = 4.0;
        assert!((s.da(r) / s.a(r).powi(2) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn family_errors() {
        assert!(matches!(
            "helical".parse::<Family>(),
            Err(Error::UnknownFamily(_))
        ));
        assert!(matches!(
            make_profile(Family::Linear, &[1.0]),
            Err(Error::ParamCount { .. })
        ));
        assert!(make_profile(Family::Power, &[1.0, -0.5]).is_err());
        assert!(make_profile(Family::Tabulated, &[]).is_err());
    }

    #[test]
    fn derivative_matches_centered_difference() {
        let tab = FieldProfile::tabulated(&TabulatedSamples {
            b: Some(
                (0..=40)
                    .map(|k| (k as f64 * 0.25, 1.0 + 0.1 * k as f64))
                    .collect(),
            ),
            ..Default::default()
        })
        .unwrap();
        let profiles = [
            linear(1.3, 0.2),
            make_profile(Family::Power, &[0.7, 1.5, 0.1]).unwrap(),
            make_profile(Family::ConstantB, &[2.0, 0.3]).unwrap(),
            tab,
        ];
        for p in &profiles {
            for r in [0.7, 1.9, 3.3, 6.1] {
                let h = 1e-4;
                let fd = (p.a(r + h) - p.a(r - h)) / (2.0 * h);
                assert!((fd - p.da(r)).abs() < 1e-6, "{:?} at {r}", p.family());
            }
        }
    }

    #[test]
    fn vector_potential_examples() {
        assert!((vector_potential_from_b(|_| 2.0, 5.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((vector_potential_from_b(|s| 2.0 * s, 3.0).unwrap() - 6.0).abs() < 1e-12);
        let v = vector_potential_from_b(|s| 1.0 / (1.0 + s), 1.0).unwrap();
        // 1 − ln 2, frozen from an independent high-precision quadrature.
        assert!((v - 0.306_852_819_440_054_7).abs() < 1e-10);
        assert!(matches!(
            vector_potential_from_b(|_| f64::NAN, 1.0),
            Err(Error::NonFinite { what: "B", .. })
        ));
    }

    #[test]
    fn gauge_consistency_tabulated_field() {
        // B(s) = 2 tabulated densely; A must come out as r.
        let tab = FieldProfile::tabulated(&TabulatedSamples {
            b: Some((0..=20).map(|k| (k as f64, 2.0)).collect()),
            ..Default::default()
        })
        .unwrap();
        for r in [0.3, 1.0, 7.5, 19.0, 30.0] {
            assert!((tab.a(r) - r).abs() < 1e-12 * r.max(1.0));
            assert!((tab.vector_potential_from_b(r).unwrap() - r).abs() < 1e-9 * r);
        }
    }

    #[test]
    fn hypothesis_examples() {
        let rep = verify_hypothesis(&linear(1.0, 0.5), 1.0, 1e3, 32).unwrap();
        assert_eq!(rep.regime, Regime::Localized);
        assert!((rep.con1_limsup - 0.5).abs() < 1e-14);

        let rep = verify_hypothesis(&linear(0.5, 1.0), 1.0, 1e3, 32).unwrap();
        assert_eq!(rep.regime, Regime::Delocalized);

        let sqrt = make_profile(Family::Power, &[1.0, 0.5]).unwrap();
        let short = verify_hypothesis(&sqrt, 1.0, 1e2, 32).unwrap();
        let long = verify_hypothesis(&sqrt, 1.0, 1e4, 32).unwrap();
        assert!(long.con2_sup_tail < short.con2_sup_tail);
        assert_eq!(long.regime, Regime::Localized);

        let zero = linear(0.0, 0.0);
        let rep = verify_hypothesis(&zero, 1.0, 1e3, 16).unwrap();
        assert!(!rep.con0_pass);
        assert_eq!(rep.regime, Regime::Indeterminate);
        assert_eq!(rep.skipped.len(), 16);

        assert!(verify_hypothesis(&zero, 1.0, 1e3, 4).is_err());
        assert!(verify_hypothesis(&zero, 2.0, 1.0, 16).is_err());
    }

    #[test]
    fn agmon_weight_examples() {
        let p = linear(1.0, 0.0);
        assert!((agmon_weight(&p, 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((agmon_weight(&p, 3.0).unwrap() - 4.5).abs() < 1e-12);
        let log = FieldProfile::tabulated(&TabulatedSamples {
            a: Some(
                (0..=400)
                    .map(|k| {
                        let r = k as f64 * 0.0025;
                        (r, (1.0 + r).ln())
                    })
                    .collect(),
            ),
            ..Default::default()
        })
        .unwrap();
        // 2 ln 2 − 1, interpolated table so a looser tolerance.
        assert!((agmon_weight(&log, 1.0).unwrap() - 0.386_294_361_119_890_6).abs() < 1e-8);
        let w = agmon_weights_at(&p, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!(w.windows(2).all(|x| x[1] >= x[0]));
        assert!((w[3] - 8.0).abs() < 1e-11);
    }

    #[test]
    fn turning_radius_examples() {
        let p = linear(1.0, 0.0);
        assert!((turning_radius(&p, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((turning_radius(&p, 7.5, 0.5).unwrap() - 15f64.sqrt()).abs() < 1e-12);
        // A = ln(1+r): root of r ln(1+r) = 1, frozen from an independent root solve.
        let log = FieldProfile::tabulated(&TabulatedSamples {
            a: Some(
                (0..=2000)
                    .map(|k| {
                        let r = k as f64 * 0.005;
                        (r, (1.0 + r).ln())
                    })
                    .collect(),
            ),
            ..Default::default()
        })
        .unwrap();
        let r = turning_radius(&log, 0.5, 0.5).unwrap();
        assert!((r - 1.239_977_887_656_55).abs() < 1e-6, "{r}");
        assert!(matches!(
            turning_radius(&linear(0.0, 1.0), 0.5, 0.1),
            Err(Error::NoTurningRadius { .. })
        ));
        assert!(turning_radius(&p, 0.5, 1.5).is_err());
    }

    #[test]
    fn turning_radius_is_largest_root() {
        // r|A| = r·|r − 1|·... dips back below |m| after a first crossing.
        let tab = FieldProfile::tabulated(&TabulatedSamples {
            a: Some(vec![
                (0.0, 0.0),
                (1.0, 2.0),
                (2.0, 0.05),
                (3.0, 3.0),
                (6.0, 6.0),
            ]),
            ..Default::default()
        })
        .unwrap();
        let r = turning_radius(&tab, 0.5, 0.5).unwrap();
        assert!(r > 2.0, "{r}");
        assert!((0.5 * r * tab.a(r).abs() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn cutoff_examples() {
        let c = make_cutoffs(&linear(1.0, 0.0), 0.5, 0.5).unwrap();
        assert!((c.r_j - 1.0).abs() < 1e-12);
        assert_eq!(c.f(2.9), 0.0);
        assert_eq!(c.f(6.1), 1.0);
        assert_eq!(c.f_tilde(0.9), 0.0);
        assert_eq!(c.f_tilde(2.1), 1.0);
        let v = c.f(4.5);
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(c.f(4.5) + c.f_c(4.5), 1.0);
    }

    #[test]
    fn theta_is_smooth_step() {
        assert_eq!(theta(0.5), 0.0);
        assert_eq!(theta(2.5), 1.0);
        assert!((theta(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = theta(1.0 + k as f64 * 0.01);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }
}
