//! Windowed spectra of channel operators, the eigenvalue count bound and
//! the weighted exponential decay check.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{
    agmon_weight, agmon_weights_at, turning_radius, verify_hypothesis, FieldProfile,
};
use crate::operators::{assemble_channel_matrix, Channel, ChannelOperator, RadialGrid};
use crate::quadrature;
use crate::stats;
use crate::tridiag::log_sum_exp;

/// Default relative residual tolerance for eigenpairs.
pub const EIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub energy: f64,
    /// Euclidean unit vector in the interleaved node ordering.
    pub vector: Vec<f64>,
    /// `ln |vector[k]|`, accurate far below the floating-point range.
    pub log_abs: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSet {
    pub channel: Channel,
    pub grid: RadialGrid,
    pub window: (f64, f64),
    pub pairs: Vec<EigenPair>,
}

impl EigenSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.energy).collect()
    }

    /// `max |⟨ψ_a, ψ_b⟩ − δ_ab|`.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, pa) in self.pairs.iter().enumerate() {
            for (b, pb) in self.pairs.iter().enumerate().skip(a) {
                let dot: f64 = pa.vector.iter().zip(&pb.vector).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// All eigenpairs of `op` with energy in `[lo, hi]`. Each residual must be
/// at most `tol·‖M‖_max·dim`.
pub fn eigs_in_window(op: &ChannelOperator, lo: f64, hi: f64, tol: f64) -> Result<EigenSet> {
    let j = op.channel.j;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Precondition(
            "spectral window must be bounded".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let m = &op.matrix;
    let limit = tol * m.max_abs() * m.len() as f64;
    let raw = m.eigenpairs_in(lo, hi).map_err(|e| match e {
        Error::Eigen { msg, .. } => Error::Eigen { j, msg },
        other => other,
    })?;
    let mut pairs = Vec::with_capacity(raw.len());
    for (energy, v) in raw {
        let mv = m.matvec(&v.values);
        let residual = mv
            .iter()
            .zip(&v.values)
            .map(|(a, b)| (a - energy * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if !(residual <= limit) {
            return Err(Error::Eigen {
                j,
                msg: format!("residual {residual:e} at E = {energy} exceeds {limit:e}"),
            });
        }
        pairs.push(EigenPair {
            energy,
            vector: v.values,
            log_abs: v.log_abs,
            residual,
        });
    }
    Ok(EigenSet {
        channel: op.channel,
        grid: op.grid,
        window: (lo, hi),
        pairs,
    })
}

/// `N_{[−E, E]}` by inertia counting.
pub fn count_in_window(op: &ChannelOperator, energy: f64) -> Result<usize> {
    if !(energy > 0.0) {
        return Err(Error::Precondition(format!(
            "energy must be positive, got {energy}"
        )));
    }
    Ok(op.matrix.count_in(-energy, energy))
}

/// Assembles and solves every channel in parallel on a channel-adapted grid
/// with spacing `h` and `n` nodes per component. Results are in the order of
/// `channels`.
pub fn solve_channels(
    profile: &FieldProfile,
    channels: &[Channel],
    h: f64,
    n: usize,
    window: (f64, f64),
) -> Result<Vec<(ChannelOperator, EigenSet)>> {
    channels
        .par_iter()
        .map(|&ch| {
            let grid = RadialGrid::adapted(h, n, profile, ch)?;
            let op = assemble_channel_matrix(profile, ch, grid)?;
            let set = eigs_in_window(&op, window.0, window.1, EIG_TOL)?;
            Ok((op, set))
        })
        .collect()
}

/// Field-dependent constants shared by all channels of the count bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BargmannParams {
    pub eps: f64,
    pub delta: f64,
    /// Radius of the ball outside which `δA² ≥ |A′|` and `εA² ≥ V²/ε`.
    pub ball_radius: f64,
    /// `max |V²/ε ± A′|` over the ball.
    pub c_local: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BargmannEntry {
    pub j: i64,
    pub m: f64,
    pub energy: f64,
    pub n_numeric: usize,
    pub r_j: f64,
    pub d_measure: f64,
    pub integral: f64,
    /// `∫ r|W^<| dr / (|m| − 1/2)`.
    pub bound: f64,
    /// Closed-form majorant of `bound`.
    pub majorant: f64,
    /// `N / (|m| ln|m|)`.
    pub ratio: f64,
}

/// `ε = max(0.9, (1 + q²)/2)` with `q` the probed limsup of `|V/A|`.
pub fn default_eps(profile: &FieldProfile) -> Result<f64> {
    let rep = verify_hypothesis(profile, 1.0, 1e3, 64)?;
    Ok((0.5 * (1.0 + rep.con1_limsup.powi(2))).max(0.9))
}

const BALL_SCAN: usize = 20_000;
const BALL_SCAN_LO: f64 = 1e-6;
const BALL_SCAN_HI: f64 = 1e6;

pub fn bargmann_params(profile: &FieldProfile, eps: f64) -> Result<BargmannParams> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!(
            "eps must lie in (0,1), got {eps}"
        )));
    }
    let delta = 0.5 * (1.0 - eps);
    let fails = |r: f64| {
        let (a, v, da) = (profile.a(r), profile.v(r), profile.da(r));
        delta * a * a - da.abs() <= 0.0 || eps * a * a - v * v / eps <= 0.0
    };
    let step = (BALL_SCAN_HI / BALL_SCAN_LO).ln() / BALL_SCAN as f64;
    let node = |k: usize| BALL_SCAN_LO * (step * k as f64).exp();
    if fails(BALL_SCAN_HI) {
        return Err(Error::Precondition(format!(
            "positivity of the squared operator is not reached below r = {BALL_SCAN_HI:e}"
        )));
    }
    let last_fail = (0..BALL_SCAN).rev().find(|&k| fails(node(k)));
    let ball_radius = match last_fail {
        None => BALL_SCAN_LO,
        Some(k) => {
            let (mut lo, mut hi) = (node(k), node(k + 1));
            while hi - lo > 1e-12 * hi {
                let mid = 0.5 * (lo + hi);
                if fails(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    const SAMPLES: usize = 4000;
    let mut c_local: f64 = 0.0;
    for k in 1..=SAMPLES {
        let r = ball_radius * k as f64 / SAMPLES as f64;
        let (v, da) = (profile.v(r), profile.da(r));
        let base = v * v / eps;
        c_local = c_local.max((base + da).abs()).max((base - da).abs());
    }
    if !c_local.is_finite() {
        return Err(Error::NonFinite {
            what: "V²/ε ± A'",
            r: ball_radius,
        });
    }
    Ok(BargmannParams {
        eps,
        delta,
        ball_radius,
        c_local,
    })
}

/// Count bound for one channel against the numerical count of `op`.
pub fn bargmann_bound(
    profile: &FieldProfile,
    op: &ChannelOperator,
    energy: f64,
    params: &BargmannParams,
) -> Result<BargmannEntry> {
    let m = op.channel.m();
    let am = m.abs();
    if am <= 1.0 {
        return Err(Error::Precondition(format!(
            "count bound needs |m| > 1, got {m}"
        )));
    }
    let n_numeric = count_in_window(op, energy)?;
    let delta = params.delta;
    let r_j = turning_radius(profile, m, delta / 4.0)?;
    let shift = params.c_local + energy * energy / (1.0 - params.eps);
    let in_d = |r: f64| r < r_j && am >= 0.25 * delta * r * profile.a(r).abs();
    let w_lt = |r: f64| {
        let a = profile.a(r).abs();
        let d_part = if in_d(r) {
            delta * a * a - 2.0 * am * a / r
        } else {
            0.0
        };
        d_part - shift
    };
    let integral = quadrature::integrate(|r| r * w_lt(r).abs(), 0.0, r_j, 1e-9)?;
    let d_measure = quadrature::integrate(|r| if in_d(r) { 1.0 } else { 0.0 }, 0.0, r_j, 1e-9)?;
    let sup_a_unit = (1..=1000)
        .map(|k| profile.a(k as f64 / 1000.0).abs())
        .fold(0.0, f64::max);
    let denom = am - 0.5;
    let majorant =
        (shift * r_j * r_j / 2.0 + 2.0 * am * sup_a_unit + 8.0 * m * m / delta * r_j.ln().max(0.0))
            / denom;
    Ok(BargmannEntry {
        j: op.channel.j,
        m,
        energy,
        n_numeric,
        r_j,
        d_measure,
        integral,
        bound: integral / denom,
        majorant,
        ratio: n_numeric as f64 / (am * am.ln()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgmonRow {
    pub j: i64,
    pub k: usize,
    pub energy: f64,
    pub gamma: f64,
    pub lhs: f64,
    pub rhs_scale: f64,
    pub ratio: f64,
    /// `ln ratio`, finite even when `lhs` underflows.
    pub log_ratio: f64,
    /// Slope of `ln|ψ|` against ϱ on `[2r_j, 4r_j]`, when the box reaches `4r_j`.
    pub decay_slope: Option<f64>,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgmonReport {
    pub j: i64,
    pub r_j: f64,
    pub r_max: f64,
    /// `R_max ≥ 6 r_j`.
    pub reliable: bool,
    pub rows: Vec<AgmonRow>,
}

impl AgmonReport {
    /// Largest ratio over the channel's eigenpairs, if any.
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.ratio).reduce(f64::max)
    }

    pub fn max_log_ratio(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.log_ratio).reduce(f64::max)
    }
}

/// Weighted decay check `‖A e^{γϱ} f̃_j ψ‖ · r_j · e^{−γϱ(2r_j)}` for every
/// eigenpair of `set`.
pub fn agmon_check(
    profile: &FieldProfile,
    set: &EigenSet,
    gamma: f64,
    delta0: f64,
) -> Result<AgmonReport> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Precondition(format!(
            "gamma must lie in [0,1), got {gamma}"
        )));
    }
    let m = set.channel.m();
    let r_j = turning_radius(profile, m, delta0)?;
    let grid = set.grid;
    let r_max = grid.r_max();
    if r_max < r_j {
        return Err(Error::GridTooSmall(format!(
            "channel {}: R_max = {r_max} is below the turning radius {r_j}",
            set.channel.j
        )));
    }
    let reliable = r_max >= 6.0 * r_j;
    let radii = grid.radii();
    let rho = agmon_weights_at(profile, &radii)?;
    let rho_2 = agmon_weight(profile, 2.0 * r_j)?;
    // ln(|A| f̃ e^{γϱ}) per node; −∞ where the weight vanishes.
    let log_w: Vec<f64> = radii
        .iter()
        .zip(&rho)
        .map(|(&r, &p)| {
            let w = profile.a(r).abs() * crate::fields::theta(r / r_j);
            if w > 0.0 {
                w.ln() + gamma * p
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let fit_idx: Vec<usize> = (0..radii.len())
        .filter(|&k| radii[k] >= 2.0 * r_j && radii[k] <= 4.0 * r_j)
        .collect();
    let can_fit = 4.0 * r_j <= r_max && fit_idx.len() >= 4;

    let rows = set
        .pairs
        .iter()
        .enumerate()
        .map(|(k, pair)| {
            // The Euclidean vector equals √h times the grid function, so
            // the discrete weighted norm needs no extra factor.
            let log_lhs =
                0.5 * log_sum_exp(log_w.iter().zip(&pair.log_abs).map(|(w, l)| 2.0 * (w + l)));
            let log_ratio = log_lhs + r_j.ln() - gamma * rho_2;
            let decay_slope = if can_fit {
                let x: Vec<f64> = fit_idx.iter().map(|&i| rho[i]).collect();
                let y: Vec<f64> = fit_idx.iter().map(|&i| pair.log_abs[i]).collect();
                stats::linear_fit(&x, &y).map(|(s, _)| s)
            } else {
                None
            };
            AgmonRow {
                j: set.channel.j,
                k,
                energy: pair.energy,
                gamma,
                lhs: log_lhs.exp(),
                rhs_scale: (gamma * rho_2).exp() / r_j,
                ratio: log_ratio.exp(),
                log_ratio,
                decay_slope,
                reliable,
            }
        })
        .collect();
    Ok(AgmonReport {
        j: set.channel.j,
        r_j,
        r_max,
        reliable,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxScalingRow {
    pub r_max: f64,
    pub count: usize,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxScaling {
    pub rows: Vec<BoxScalingRow>,
    /// Max distance from each eigenvalue at one box size to the nearest
    /// eigenvalue at the next.
    pub drifts: Vec<f64>,
    /// `count(R_{i+1}) / count(R_i)`.
    pub count_ratios: Vec<f64>,
}

impl BoxScaling {
    /// Drifts never increase, up to an absolute `floor` for rounding.
    pub fn drift_decreasing(&self, floor: f64) -> bool {
        self.drifts.windows(2).all(|w| w[1] <= w[0] + floor)
    }
}

/// Spectrum in `[lo, hi]` at each box size with fixed spacing `h`.
pub fn box_scaling_diagnostic(
    profile: &FieldProfile,
    ch: Channel,
    window: (f64, f64),
    h: f64,
    r_list: &[f64],
) -> Result<BoxScaling> {
    if r_list.len() < 2 {
        return Err(Error::Precondition(format!(
            "box scaling needs at least two radii, got {}",
            r_list.len()
        )));
    }
    if r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("box radii must increase".into()));
    }
    let rows: Vec<BoxScalingRow> = r_list
        .par_iter()
        .map(|&r| {
            let n = (r / h).round() as usize;
            let grid = RadialGrid::adapted(h, n, profile, ch)?;
            let op = assemble_channel_matrix(profile, ch, grid)?;
            let energies = op.matrix.eigenvalues_in(window.0, window.1);
            Ok(BoxScalingRow {
                r_max: grid.r_max(),
                count: energies.len(),
                energies,
            })
        })
        .collect::<Result<_>>()?;
    let drifts = rows
        .windows(2)
        .map(|w| {
            w[0].energies
                .iter()
                .map(|e| {
                    w[1].energies
                        .iter()
                        .map(|f| (e - f).abs())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let count_ratios = rows
        .windows(2)
        .map(|w| w[1].count as f64 / w[0].count as f64)
        .collect();
    Ok(BoxScaling {
        rows,
        drifts,
        count_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_profile, Family};

    fn lin(a: f64, l: f64) -> FieldProfile {
        make_profile(Family::Linear, &[a, l]).unwrap()
    }

    fn op(p: &FieldProfile, j: i64, h: f64, n: usize) -> ChannelOperator {
        let ch = Channel::new(j);
        assemble_channel_matrix(p, ch, RadialGrid::adapted(h, n, p, ch).unwrap()).unwrap()
    }

    #[test]
    fn landau_window_and_count() {
        let p = make_profile(Family::ConstantB, &[1.0]).unwrap();
        let o = op(&p, 0, 0.01, 3000);
        let set = eigs_in_window(&o, -0.1, 2.5, EIG_TOL).unwrap();
        let e = set.energies();
        for (a, b) in e.iter().zip([0.0, 2f64.sqrt(), 2.0, 6f64.sqrt()]) {
            assert!((a - b).abs() < 1e-2);
        }
        assert!(set.gram_deviation() < 1e-9);
        assert_eq!(count_in_window(&o, 1.2).unwrap(), 1);
        assert_eq!(
            count_in_window(&o, 1.2).unwrap(),
            eigs_in_window(&o, -1.2, 1.2, EIG_TOL).unwrap().len()
        );
        assert!(count_in_window(&o, 0.0).is_err());
    }

    #[test]
    fn empty_window_and_shift() {
        let p = lin(1.0, 0.3);
        let o = op(&p, 2, 0.02, 1000);
        let (lo, _) = o.matrix.gershgorin();
        assert!(eigs_in_window(&o, lo - 10.0, lo - 5.0, EIG_TOL)
            .unwrap()
            .is_empty());
        let mut shifted = o.clone();
        for d in shifted.matrix.diag.iter_mut() {
            *d += 5.0;
        }
        let a = eigs_in_window(&o, -2.0, 2.0, EIG_TOL).unwrap().energies();
        let b = eigs_in_window(&shifted, 3.0, 7.0, EIG_TOL)
            .unwrap()
            .energies();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bargmann_example_channel() {
        let p = lin(1.0, 0.3);
        let params = bargmann_params(&p, 0.9).unwrap();
        assert!((params.delta - 0.05).abs() < 1e-15);
        assert!((params.ball_radius - 20f64.sqrt()).abs() < 1e-6);
        assert!((params.c_local - 3.0).abs() < 1e-6);
        let o = op(&p, 10, 0.02, 2500);
        let e = bargmann_bound(&p, &o, 2.0, &params).unwrap();
        assert!(e.integral >= 0.0 && e.bound >= e.n_numeric as f64);
        assert!(e.majorant >= e.bound);
        assert!(e.ratio.is_finite());
        assert!(bargmann_bound(&p, &op(&p, 0, 0.02, 500), 2.0, &params).is_err());
    }

    #[test]
    fn default_eps_for_linear() {
        assert_eq!(default_eps(&lin(1.0, 0.3)).unwrap(), 0.9);
        assert!((default_eps(&lin(1.0, 0.9)).unwrap() - 0.905).abs() < 1e-12);
    }

    #[test]
    fn agmon_gamma_monotone_and_zero() {
        let p = lin(1.0, 0.3);
        let o = op(&p, 4, 0.02, 2000);
        let set = eigs_in_window(&o, -2.0, 2.0, EIG_TOL).unwrap();
        assert!(!set.is_empty());
        let r0 = agmon_check(&p, &set, 0.0, 0.1).unwrap();
        let r1 = agmon_check(&p, &set, 0.1, 0.1).unwrap();
        let r2 = agmon_check(&p, &set, 0.3, 0.1).unwrap();
        for k in 0..set.len() {
            assert!(r0.rows[k].lhs <= r1.rows[k].lhs && r1.rows[k].lhs <= r2.rows[k].lhs);
            assert!((r0.rows[k].rhs_scale - 1.0 / r0.r_j).abs() < 1e-12);
            let s = r1.rows[k].decay_slope.unwrap();
            assert!(s <= -0.1, "slope {s}");
        }
        // Unweighted cross-check: ‖A f̃ ψ‖ by direct summation.
        let pair = &set.pairs[0];
        let direct: f64 = o
            .grid
            .radii()
            .iter()
            .zip(&pair.vector)
            .map(|(&r, x)| (p.a(r) * crate::fields::theta(r / r0.r_j) * x).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((r0.rows[0].lhs - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn agmon_disjoint_support_is_zero() {
        let p = lin(1.0, 0.3);
        let o = op(&p, 4, 0.02, 2000);
        let mut set = eigs_in_window(&o, -2.0, 2.0, EIG_TOL).unwrap();
        set.pairs.truncate(1);
        // A vector living only at r < r_j, where f̃ vanishes.
        let n = o.grid.len();
        let mut v = vec![0.0; n];
        v[10] = 1.0;
        set.pairs[0].log_abs = v.iter().map(|x: &f64| x.abs().ln()).collect();
        set.pairs[0].vector = v;
        let rep = agmon_check(&p, &set, 0.1, 0.1).unwrap();
        assert_eq!(rep.rows[0].lhs, 0.0);
    }

    #[test]
    fn agmon_small_box() {
        let p = lin(1.0, 0.3);
        // r_j = √(40.5/0.1) ≈ 20: a box of 30 is flagged, a box of 10 is an error.
        let o = op(&p, 40, 0.05, 600);
        let set = eigs_in_window(&o, -2.0, 2.0, EIG_TOL).unwrap();
        assert!(!agmon_check(&p, &set, 0.1, 0.1).unwrap().reliable);
        let o = op(&p, 40, 0.05, 200);
        let set = eigs_in_window(&o, -2.0, 2.0, EIG_TOL).unwrap();
        assert!(agmon_check(&p, &set, 0.1, 0.1).is_err());
    }

    #[test]
    fn box_scaling_examples() {
        let loc = lin(1.0, 0.3);
        let b = box_scaling_diagnostic(
            &loc,
            Channel::new(0),
            (-2.0, 2.0),
            0.02,
            &[20.0, 30.0, 40.0],
        )
        .unwrap();
        assert!(b.drift_decreasing(1e-12), "{:?}", b.drifts);
        let deloc = FieldProfile::composite(lin(0.3, 0.0), lin(0.0, 1.0));
        let b = box_scaling_diagnostic(&deloc, Channel::new(0), (-2.0, 2.0), 0.01, &[20.0, 40.0])
            .unwrap();
        assert!(
            (1.6..=2.4).contains(&b.count_ratios[0]),
            "{:?}",
            b.count_ratios
        );
        assert!(box_scaling_diagnostic(&loc, Channel::new(0), (-2.0, 2.0), 0.02, &[20.0]).is_err());
    }
}
