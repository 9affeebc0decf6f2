//! Wave packets in the channel representation, windowed propagation and
//! transport moments.
//!
//! Channel functions are grid functions normalized by `h·Σ_k |φ_k|² = 1`
//! over all nodes of the staggered grid, which is the discrete `L²` norm of
//! the two-component radial function.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{m_of, Channel, Component, RadialGrid};
use crate::spectral::EigenSet;
use crate::stats;

/// Radial profile shared by every channel of a packet. Both spinor
/// components receive the same shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialShape {
    Gaussian {
        center: f64,
        width: f64,
    },
    /// Smooth bump supported on `r < r0`.
    Compact {
        r0: f64,
    },
}

impl RadialShape {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialShape::Gaussian { center, width } => {
                let z = (r - center) / width;
                (-0.5 * z * z).exp()
            }
            RadialShape::Compact { r0 } => {
                let s = r / r0;
                if s < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialShape::Gaussian { center, width } => center.is_finite() && width > 0.0,
            RadialShape::Compact { r0 } => r0 > 0.0 && r0.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid radial shape {self:?}"
            )))
        }
    }
}

/// Channel weights `w_j = |c_j|²` before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayModel {
    /// `c_j ∝ q^{|j|}`, `0 < q < 1`.
    Geometric { q: f64 },
    /// `|c_j|² ∝ (1 + |j|)^{−s}`.
    Power { s: f64 },
    /// Equal weights up to the truncation and nothing beyond it.
    Compact,
}

impl DecayModel {
    /// Unnormalized `|c_j|²`.
    pub fn weight(&self, j: i64) -> f64 {
        let a = j.unsigned_abs() as f64;
        match *self {
            DecayModel::Geometric { q } => q.powf(2.0 * a),
            DecayModel::Power { s } => (1.0 + a).powf(-s),
            DecayModel::Compact => 1.0,
        }
    }

    fn validate(&self, kappa: f64) -> Result<()> {
        match *self {
            DecayModel::Geometric { q } if !(q > 0.0 && q < 1.0) => Err(Error::NonNormalizable(
                format!("geometric ratio must lie in (0,1), got {q}"),
            )),
            DecayModel::Power { s } if !(s > kappa + 1.0) => Err(Error::NonNormalizable(format!(
                "power decay exponent {s} must exceed kappa + 1 = {}",
                kappa + 1.0
            ))),
            _ => Ok(()),
        }
    }
}

/// One stored channel of a packet.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub channel: Channel,
    pub grid: RadialGrid,
    pub phi: Vec<Complex64>,
}

impl ChannelState {
    pub fn norm_sq(&self) -> f64 {
        self.grid.h() * self.phi.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `h·Σ r^κ |φ|²`.
    pub fn moment(&self, kappa: f64) -> f64 {
        let h = self.grid.h();
        self.phi
            .iter()
            .enumerate()
            .map(|(k, z)| self.grid.radius(k).powf(kappa) * z.norm_sqr())
            .sum::<f64>()
            * h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub kappa: f64,
    pub j_max: u32,
    pub model: DecayModel,
    /// Stored channels in ascending `j`.
    pub channels: Vec<ChannelState>,
    /// `Σ_{|j| ≤ J_max} w_j`, the normalization of the stored weights.
    pub weight_sum: f64,
    /// `Σ |j|^κ ‖φ_j‖²`.
    pub kappa_moment: f64,
}

impl WavePacket {
    pub fn norm_sq(&self) -> f64 {
        self.channels.iter().map(|c| c.norm_sq()).sum()
    }

    pub fn channel(&self, j: i64) -> Option<&ChannelState> {
        self.channels.iter().find(|c| c.channel.j == j)
    }

    fn with_channels(&self, channels: Vec<ChannelState>) -> WavePacket {
        WavePacket {
            channels,
            ..self.clone()
        }
    }
}

/// `φ_j = c_j·shape` on every channel `|j| ≤ J_max`, normalized to unit
/// total norm. `grid_for` supplies each channel's grid.
pub fn build_wavepacket<G>(
    shape: RadialShape,
    model: DecayModel,
    kappa: f64,
    j_max: u32,
    grid_for: G,
) -> Result<WavePacket>
where
    G: Fn(Channel) -> Result<RadialGrid>,
{
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be nonnegative, got {kappa}"
        )));
    }
    shape.validate()?;
    model.validate(kappa)?;
    let jm = j_max as i64;
    let weight_sum: f64 = (-jm..=jm).map(|j| model.weight(j)).sum();
    let mut channels = Vec::with_capacity(2 * j_max as usize + 1);
    let mut kappa_moment = 0.0;
    for j in -jm..=jm {
        let ch = Channel::new(j);
        let grid = grid_for(ch)?;
        let raw: Vec<f64> = (0..grid.len())
            .map(|k| shape.eval(grid.radius(k)))
            .collect();
        let norm = (grid.h() * raw.iter().map(|v| v * v).sum::<f64>()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NonNormalizable(format!(
                "radial shape vanishes on the grid of channel {j}"
            )));
        }
        let w = model.weight(j) / weight_sum;
        let c = w.sqrt() / norm;
        kappa_moment += (j.unsigned_abs() as f64).powf(kappa) * w;
        channels.push(ChannelState {
            channel: ch,
            grid,
            phi: raw
                .into_iter()
                .map(|v| Complex64::new(c * v, 0.0))
                .collect(),
        });
    }
    Ok(WavePacket {
        kappa,
        j_max,
        model,
        channels,
        weight_sum,
        kappa_moment,
    })
}

fn sets_by_channel(sets: &[EigenSet]) -> HashMap<i64, &EigenSet> {
    sets.iter().map(|s| (s.channel.j, s)).collect()
}

fn matching_set<'a>(
    map: &HashMap<i64, &'a EigenSet>,
    state: &ChannelState,
) -> Result<&'a EigenSet> {
    let j = state.channel.j;
    let set = map.get(&j).copied().ok_or(Error::MissingChannel { j })?;
    if set.grid != state.grid || state.phi.len() != set.grid.len() {
        return Err(Error::GridMismatch { j });
    }
    Ok(set)
}

/// `⟨x_k, φ⟩` for every eigenvector of the set.
fn coefficients(set: &EigenSet, phi: &[Complex64]) -> Vec<Complex64> {
    set.pairs
        .iter()
        .map(|p| p.vector.iter().zip(phi).map(|(x, z)| z * x).sum())
        .collect()
}

fn synthesize(set: &EigenSet, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); set.grid.len()];
    for (p, c) in set.pairs.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(&p.vector) {
            *o += c * x;
        }
    }
    out
}

/// Channelwise spectral projection onto the window of `sets`.
pub fn project_window(wp: &WavePacket, sets: &[EigenSet]) -> Result<WavePacket> {
    propagate(wp, sets, 0.0)
}

/// `Σ_k e^{−iE_k t}⟨ψ_k, φ_j⟩ψ_k` in every channel: the exact propagator on
/// the windowed span for a packet already projected onto it. At `t = 0`
/// the packet is returned unchanged.
pub fn evolve(wp: &WavePacket, sets: &[EigenSet], t: f64) -> Result<WavePacket> {
    if t == 0.0 {
        let map = sets_by_channel(sets);
        for state in &wp.channels {
            matching_set(&map, state)?;
        }
        return Ok(wp.clone());
    }
    propagate(wp, sets, t)
}

fn propagate(wp: &WavePacket, sets: &[EigenSet], t: f64) -> Result<WavePacket> {
    let map = sets_by_channel(sets);
    let channels = wp
        .channels
        .par_iter()
        .map(|state| {
            let set = matching_set(&map, state)?;
            let coeffs: Vec<Complex64> = coefficients(set, &state.phi)
                .into_iter()
                .zip(&set.pairs)
                .map(|(c, p)| c * Complex64::from_polar(1.0, -p.energy * t))
                .collect();
            Ok(ChannelState {
                phi: synthesize(set, &coeffs),
                ..state.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(wp.with_channels(channels))
}

/// Total and per-channel (ascending `j`) moments `h·Σ r^κ |φ_j|²`.
pub fn moment(wp: &WavePacket, kappa: f64) -> (f64, Vec<(i64, f64)>) {
    let per: Vec<(i64, f64)> = wp
        .channels
        .iter()
        .map(|c| (c.channel.j, c.moment(kappa)))
        .collect();
    (per.iter().map(|(_, m)| m).sum(), per)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_{i≥0} i^q x^i` for `q = 0..=p`, via Eulerian numbers.
fn polylog_neg(p: u32, x: f64) -> Vec<f64> {
    let mut out = vec![1.0 / (1.0 - x)];
    let mut euler = vec![1.0f64];
    for q in 1..=p {
        let mut next = vec![0.0; q as usize];
        for k in 0..q as usize {
            let keep = if k < euler.len() {
                (k + 1) as f64 * euler[k]
            } else {
                0.0
            };
            let carry = if k >= 1 && k - 1 < euler.len() {
                (q as usize - k) as f64 * euler[k - 1]
            } else {
                0.0
            };
            next[k] = keep + carry;
        }
        euler = next;
        let poly: f64 = euler.iter().rev().fold(0.0, |acc, a| acc * x + a);
        out.push(x * poly / (1.0 - x).powi(q as i32 + 1));
    }
    out
}

/// Bound on the moment carried by the discarded channels `|j| > J_max`,
/// `Σ (6|m_j|/δ₀)^κ |c_j|²`, in the normalization of the stored channels.
/// Uniform in time.
pub fn tail_bound(wp: &WavePacket, delta0: f64) -> Result<f64> {
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(Error::Precondition(format!(
            "delta0 must lie in (0,1), got {delta0}"
        )));
    }
    let kappa = wp.kappa;
    let jp1 = wp.j_max as f64 + 1.0;
    let scale = (6.0 / delta0).powf(kappa);
    let raw = match wp.model {
        DecayModel::Compact => 0.0,
        DecayModel::Geometric { q } => {
            // (6|m|/δ₀)^κ ≤ (6|m|/δ₀)^⌈κ⌉ because 6|m|/δ₀ > 1.
            let p = kappa.ceil() as u32;
            let scale = (6.0 / delta0).powi(p as i32);
            let x = q * q;
            // Channels j = J+1+i (|m| = J+3/2+i) and j = −(J+1+i) (|m| = J+1/2+i).
            let li = polylog_neg(p, x);
            let sum: f64 = (0..=p)
                .map(|s| {
                    binomial(p, s)
                        * ((jp1 + 0.5).powi((p - s) as i32) + (jp1 - 0.5).powi((p - s) as i32))
                        * li[s as usize]
                })
                .sum();
            scale * x.powf(jp1) * sum
        }
        DecayModel::Power { s } => {
            // |m| ≤ 1 + |j| and the summand decreases, so the sum over
            // k > J on each side is below ∫_J^∞ (1 + k)^{κ−s} dk.
            2.0 * scale * jp1.powf(kappa - s + 1.0) / (s - kappa - 1.0)
        }
    };
    Ok(raw / wp.weight_sum)
}

/// Log-spaced times from `t0` to `t1` with `per_decade` points per decade,
/// both ends included.
pub fn log_times(t0: f64, t1: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t1 / t0).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|k| {
            if k == n {
                t1
            } else {
                t0 * 10f64.powf(decades * k as f64 / n as f64)
            }
        })
        .collect()
}

/// Minimum number of time samples for an exponent fit.
pub const MIN_TIMES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub kappa: f64,
    pub window: (f64, f64),
    pub times: Vec<f64>,
    /// `(j, M_j(t))` in ascending `j`.
    pub per_channel: Vec<(i64, Vec<f64>)>,
    pub total: Vec<f64>,
    /// `(1/T)∫_0^T M dt`, with `M` held at its first sample before `t_0`.
    pub time_average: Vec<f64>,
    pub tail_bound: f64,
    /// Log-log slope of the time average over the last decade.
    pub fitted_exponent: f64,
    /// `max_t M(t)` over the whole horizon.
    pub sup_all: f64,
    /// `max M(t)` over `t ≤ T_end/10`.
    pub sup_early: f64,
    /// `max M(t)` over `t ≥ T_end/10`.
    pub sup_last_decade: f64,
}

impl MomentSeries {
    /// Boundedness proxy: the overall max is within `factor` of the max
    /// reached by `T_end/10`.
    pub fn stabilized(&self, factor: f64) -> bool {
        self.sup_all <= factor * self.sup_early
    }
}

/// Moments of the windowed evolution at each time. Each channel's moment is
/// the quadratic form `h·b(t)†R b(t)` with `b_k = e^{−iE_k t}⟨ψ_k, φ⟩` and
/// `R_kl = Σ_nodes r^κ ψ_k ψ_l`.
pub fn moment_series(
    wp: &WavePacket,
    sets: &[EigenSet],
    times: &[f64],
    kappa: f64,
    delta0: f64,
) -> Result<MomentSeries> {
    if times.len() < MIN_TIMES {
        return Err(Error::TooFewTimes {
            got: times.len(),
            need: MIN_TIMES,
        });
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "times must be nonnegative and strictly increasing".into(),
        ));
    }
    let map = sets_by_channel(sets);
    let window = sets.first().map_or((0.0, 0.0), |s| s.window);
    let per_channel: Vec<(i64, Vec<f64>)> = wp
        .channels
        .par_iter()
        .map(|state| {
            let set = matching_set(&map, state)?;
            let a = coefficients(set, &state.phi);
            let kk = a.len();
            let w: Vec<f64> = (0..set.grid.len())
                .map(|i| set.grid.h() * set.grid.radius(i).powf(kappa))
                .collect();
            let mut r = vec![0.0; kk * kk];
            for p in 0..kk {
                let xp = &set.pairs[p].vector;
                for q in p..kk {
                    let xq = &set.pairs[q].vector;
                    let v: f64 = xp.iter().zip(xq).zip(&w).map(|((a, b), c)| a * b * c).sum();
                    r[p * kk + q] = v;
                    r[q * kk + p] = v;
                }
            }
            let series = times
                .iter()
                .map(|&t| {
                    let b: Vec<Complex64> = a
                        .iter()
                        .zip(&set.pairs)
                        .map(|(c, p)| c * Complex64::from_polar(1.0, -p.energy * t))
                        .collect();
                    let mut acc = 0.0;
                    for p in 0..kk {
                        let mut row = Complex64::new(0.0, 0.0);
                        for q in 0..kk {
                            row += b[q] * r[p * kk + q];
                        }
                        acc += (b[p].conj() * row).re;
                    }
                    acc.max(0.0)
                })
                .collect();
            Ok((state.channel.j, series))
        })
        .collect::<Result<_>>()?;

    let total: Vec<f64> = (0..times.len())
        .map(|i| per_channel.iter().map(|(_, s)| s[i]).sum())
        .collect();
    let mut time_average = Vec::with_capacity(times.len());
    let mut integral = total[0] * times[0];
    for i in 0..times.len() {
        if i > 0 {
            integral += 0.5 * (total[i] + total[i - 1]) * (times[i] - times[i - 1]);
        }
        time_average.push(if times[i] > 0.0 {
            integral / times[i]
        } else {
            total[0]
        });
    }
    let t_end = *times.last().unwrap();
    let last: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= t_end / 10.0)
        .collect();
    if last.len() < 2 {
        return Err(Error::TooFewTimes {
            got: last.len(),
            need: 2,
        });
    }
    let x: Vec<f64> = last.iter().map(|&i| times[i]).collect();
    let y: Vec<f64> = last.iter().map(|&i| time_average[i]).collect();
    let fitted_exponent = stats::log_log_slope(&x, &y).unwrap_or(0.0);
    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let sup_all = fold_max(&mut total.iter().copied());
    let sup_early = fold_max(
        &mut (0..times.len())
            .filter(|&i| times[i] <= t_end / 10.0)
            .map(|i| total[i]),
    );
    let sup_last_decade = fold_max(&mut last.iter().map(|&i| total[i]));
    Ok(MomentSeries {
        kappa,
        window,
        times: times.to_vec(),
        per_channel,
        total,
        time_average,
        tail_bound: tail_bound(wp, delta0)?,
        fitted_exponent,
        sup_all,
        sup_early,
        sup_last_decade,
    })
}

/// Samples of the two-dimensional spinor on the polar grid of the stored
/// half-step radii and equally spaced angles.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub radii: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Radial spacing of each component, the quadrature weight of a node.
    pub h: f64,
    /// `ψ₁` and `ψ₂` at `(radii[i], thetas[l])`, row-major in `i`.
    pub psi1: Vec<Complex64>,
    pub psi2: Vec<Complex64>,
}

impl DensityField {
    pub fn density(&self, i: usize, l: usize) -> f64 {
        let k = i * self.thetas.len() + l;
        self.psi1[k].norm_sqr() + self.psi2[k].norm_sqr()
    }

    /// `∫∫ r^κ |ψ|² r dr dθ` by node-weighted quadrature.
    pub fn moment(&self, kappa: f64) -> f64 {
        let dtheta = 2.0 * PI / self.thetas.len() as f64;
        let mut acc = 0.0;
        for (i, &r) in self.radii.iter().enumerate() {
            let ring: f64 = (0..self.thetas.len()).map(|l| self.density(i, l)).sum();
            acc += r.powf(kappa) * ring * r;
        }
        acc * self.h * dtheta
    }

    pub fn norm_sq(&self) -> f64 {
        self.moment(0.0)
    }

    /// Largest spread `max_θ |ψ|² − min_θ |ψ|²` over the radii.
    pub fn angular_variation(&self) -> f64 {
        (0..self.radii.len())
            .map(|i| {
                let vals = (0..self.thetas.len()).map(|l| self.density(i, l));
                let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(v), b.max(v))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Inverts the partial-wave decomposition:
/// `ψ₁ = (2πr)^{−1/2} Σ e^{ijθ}φ_{j,1}` and
/// `ψ₂ = (2πr)^{−1/2} Σ e^{i(j+1)θ}(−i)φ_{j,2}`.
/// Each channel contributes at a node only through the component it stores
/// there. All channels must share the spacing `h`.
pub fn synthesize_density(wp: &WavePacket, theta_points: usize) -> Result<DensityField> {
    let need = 4 * (wp.j_max as usize + 1);
    if theta_points < need {
        return Err(Error::Precondition(format!(
            "theta grid undersampled: {theta_points} points, need at least {need}"
        )));
    }
    let first = wp
        .channels
        .first()
        .ok_or_else(|| Error::Precondition("packet has no channels".into()))?;
    let h = first.grid.h();
    if let Some(bad) = wp.channels.iter().find(|c| c.grid.h() != h) {
        return Err(Error::GridMismatch { j: bad.channel.j });
    }
    let nodes = wp.channels.iter().map(|c| c.grid.len()).max().unwrap_or(0);
    let radii: Vec<f64> = (0..nodes).map(|k| first.grid.radius(k)).collect();
    let thetas: Vec<f64> = (0..theta_points)
        .map(|l| 2.0 * PI * l as f64 / theta_points as f64)
        .collect();
    let minus_i = Complex64::new(0.0, -1.0);
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = radii
        .par_iter()
        .enumerate()
        .map(|(k, &r)| {
            let pre = 1.0 / (2.0 * PI * r).sqrt();
            let mut p1 = vec![Complex64::new(0.0, 0.0); theta_points];
            let mut p2 = vec![Complex64::new(0.0, 0.0); theta_points];
            for c in &wp.channels {
                let Some(&z) = c.phi.get(k) else { continue };
                if z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let (target, freq, coeff) = match c.grid.component(k) {
                    Component::Upper => (&mut p1, c.channel.j, z),
                    Component::Lower => (&mut p2, c.channel.j + 1, minus_i * z),
                };
                for (l, &th) in thetas.iter().enumerate() {
                    target[l] += coeff * Complex64::from_polar(pre, freq as f64 * th);
                }
            }
            (p1, p2)
        })
        .collect();
    let mut psi1 = Vec::with_capacity(nodes * theta_points);
    let mut psi2 = Vec::with_capacity(nodes * theta_points);
    for (a, b) in rows {
        psi1.extend(a);
        psi2.extend(b);
    }
    Ok(DensityField {
        radii,
        thetas,
        h,
        psi1,
        psi2,
    })
}

/// `(6|m_j|/δ₀)^κ`, the per-channel moment bound used by [`tail_bound`].
pub fn channel_moment_scale(j: i64, kappa: f64, delta0: f64) -> f64 {
    (6.0 * m_of(j).abs() / delta0).powf(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_profile, Family, FieldProfile};
    use crate::operators::assemble_channel_matrix;
    use crate::spectral::{eigs_in_window, EIG_TOL};

    fn lin(a: f64, l: f64) -> FieldProfile {
        make_profile(Family::Linear, &[a, l]).unwrap()
    }

    fn grids(p: &FieldProfile, h: f64, n: usize) -> impl Fn(Channel) -> Result<RadialGrid> + '_ {
        move |ch| RadialGrid::adapted(h, n, p, ch)
    }

    fn gauss() -> RadialShape {
        RadialShape::Gaussian {
            center: 2.0,
            width: 0.8,
        }
    }

    fn sets_for(p: &FieldProfile, wp: &WavePacket, lo: f64, hi: f64) -> Vec<EigenSet> {
        wp.channels
            .iter()
            .map(|c| {
                let op = assemble_channel_matrix(p, c.channel, c.grid).unwrap();
                eigs_in_window(&op, lo, hi, EIG_TOL).unwrap()
            })
            .collect()
    }

    fn max_diff(a: &WavePacket, b: &WavePacket) -> f64 {
        a.channels
            .iter()
            .zip(&b.channels)
            .flat_map(|(x, y)| x.phi.iter().zip(&y.phi).map(|(u, v)| (u - v).norm()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn build_examples() {
        let p = lin(1.0, 0.3);
        let single =
            build_wavepacket(gauss(), DecayModel::Compact, 2.0, 0, grids(&p, 0.02, 500)).unwrap();
        assert_eq!(single.kappa_moment, 0.0);
        assert!((single.norm_sq() - 1.0).abs() < 1e-14);
        let geo = build_wavepacket(
            gauss(),
            DecayModel::Geometric { q: 0.5 },
            2.0,
            20,
            grids(&p, 0.02, 500),
        )
        .unwrap();
        assert!((geo.norm_sq() - 1.0).abs() < 1e-14);
        let num: f64 = (-20i64..=20)
            .map(|j| (j * j) as f64 * 0.25f64.powi(j.abs() as i32))
            .sum();
        let den: f64 = (-20i64..=20).map(|j| 0.25f64.powi(j.abs() as i32)).sum();
        assert!((geo.kappa_moment - num / den).abs() < 1e-14);
        assert!((geo.kappa_moment - 8.0 / 9.0).abs() < 1e-9);
        assert!(matches!(
            build_wavepacket(
                gauss(),
                DecayModel::Power { s: 2.5 },
                2.0,
                5,
                grids(&p, 0.02, 500)
            ),
            Err(Error::NonNormalizable(_))
        ));
    }

    #[test]
    fn projection_and_evolution() {
        let p = lin(1.0, 0.3);
        let wp = build_wavepacket(
            gauss(),
            DecayModel::Geometric { q: 0.5 },
            2.0,
            2,
            grids(&p, 0.02, 1000),
        )
        .unwrap();
        let sets = sets_for(&p, &wp, -2.0, 2.0);
        let p1 = project_window(&wp, &sets).unwrap();
        let p2 = project_window(&p1, &sets).unwrap();
        assert!(max_diff(&p1, &p2) <= 1e-12);
        assert!(p1.norm_sq() <= wp.norm_sq() + 1e-14);
        let n0 = p1.norm_sq();
        assert_eq!(max_diff(&evolve(&p1, &sets, 0.0).unwrap(), &p1), 0.0);
        for t in [1.0, 10.0, 100.0, 200.0] {
            assert!((evolve(&p1, &sets, t).unwrap().norm_sq() - n0).abs() < 1e-12);
        }
        let times = log_times(0.5, 50.0, 4);
        let series = moment_series(&p1, &sets, &times, 2.0, 0.1).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let (direct, per) = moment(&evolve(&p1, &sets, t).unwrap(), 2.0);
            assert!((series.total[i] - direct).abs() < 1e-10 * direct);
            for ((_, s), (_, d)) in series.per_channel.iter().zip(&per) {
                assert!((s[i] - d).abs() < 1e-10 * direct);
            }
        }
        // Empty window gives the zero packet.
        let mut empty = sets.clone();
        for s in empty.iter_mut() {
            s.pairs.clear();
        }
        assert_eq!(project_window(&wp, &empty).unwrap().norm_sq(), 0.0);
        // Missing channel.
        assert!(matches!(
            project_window(&wp, &sets[1..]),
            Err(Error::MissingChannel { j: -2 })
        ));
    }

    #[test]
    fn full_window_is_identity() {
        let p = lin(1.0, 0.3);
        let wp =
            build_wavepacket(gauss(), DecayModel::Compact, 2.0, 0, grids(&p, 0.1, 60)).unwrap();
        let sets = sets_for(&p, &wp, -1e4, 1e4);
        assert!(max_diff(&project_window(&wp, &sets).unwrap(), &wp) < 1e-10);
    }

    #[test]
    fn eigenstate_is_stationary() {
        let p = lin(1.0, 0.3);
        let base =
            build_wavepacket(gauss(), DecayModel::Compact, 2.0, 0, grids(&p, 0.02, 1000)).unwrap();
        let sets = sets_for(&p, &base, -2.0, 2.0);
        let h = base.channels[0].grid.h();
        let mut wp = base.clone();
        wp.channels[0].phi = sets[0].pairs[0]
            .vector
            .iter()
            .map(|x| Complex64::new(x / h.sqrt(), 0.0))
            .collect();
        let e = sets[0].pairs[0].energy;
        let t = 3.7;
        let out = evolve(&wp, &sets, t).unwrap();
        for (a, b) in out.channels[0].phi.iter().zip(&wp.channels[0].phi) {
            assert!((a - b * Complex64::from_polar(1.0, -e * t)).norm() < 1e-10);
        }
        let times = log_times(0.1, 100.0, 8);
        let s = moment_series(&wp, &sets, &times, 2.0, 0.1).unwrap();
        let m0 = s.total[0];
        let (direct, _) = moment(&evolve(&wp, &sets, times[3]).unwrap(), 2.0);
        assert!((s.total[3] - direct).abs() < 1e-10 * direct);
        assert!(s.total.iter().all(|m| (m - m0).abs() < 1e-10 * m0));
        assert!(s.fitted_exponent.abs() < 0.05);
        assert!(matches!(
            moment_series(&wp, &sets, &times[..5], 2.0, 0.1),
            Err(Error::TooFewTimes { .. })
        ));
    }

    #[test]
    fn moment_examples() {
        let p = lin(1.0, 0.3);
        let wp = build_wavepacket(
            RadialShape::Compact { r0: 1.0 },
            DecayModel::Geometric { q: 0.5 },
            2.0,
            1,
            grids(&p, 0.01, 300),
        )
        .unwrap();
        let (total, per) = moment(&wp, 1.5);
        assert!(total <= wp.norm_sq());
        assert!((total - per.iter().map(|(_, m)| m).sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn geometric_tail_matches_direct_sum() {
        let p = lin(1.0, 0.3);
        let wp = build_wavepacket(
            gauss(),
            DecayModel::Geometric { q: 0.5 },
            2.0,
            20,
            grids(&p, 0.05, 200),
        )
        .unwrap();
        let got = tail_bound(&wp, 0.5).unwrap();
        let direct: f64 = (21i64..221)
            .flat_map(|k| [k, -k])
            .map(|j| channel_moment_scale(j, 2.0, 0.5) * 0.25f64.powi(j.abs() as i32))
            .sum::<f64>()
            / wp.weight_sum;
        assert!(((got - direct) / direct).abs() < 1e-10, "{got} vs {direct}");
    }

    #[test]
    fn tail_bounds_decrease_in_truncation() {
        let p = lin(1.0, 0.3);
        for model in [
            DecayModel::Geometric { q: 0.6 },
            DecayModel::Power { s: 5.0 },
            DecayModel::Compact,
        ] {
            let mut prev = f64::INFINITY;
            for j_max in [2, 4, 8, 16] {
                let wp =
                    build_wavepacket(gauss(), model, 2.5, j_max, grids(&p, 0.05, 100)).unwrap();
                let t = tail_bound(&wp, 0.1).unwrap();
                assert!(t <= prev);
                prev = t;
            }
        }
    }

    #[test]
    fn power_tail_bounds_direct_sum() {
        let p = lin(1.0, 0.3);
        let wp = build_wavepacket(
            gauss(),
            DecayModel::Power { s: 6.0 },
            2.0,
            10,
            grids(&p, 0.05, 100),
        )
        .unwrap();
        let direct: f64 = (11i64..100_000)
            .flat_map(|k| [k, -k])
            .map(|j| channel_moment_scale(j, 2.0, 0.1) * (1.0 + j.abs() as f64).powf(-6.0))
            .sum::<f64>()
            / wp.weight_sum;
        assert!(tail_bound(&wp, 0.1).unwrap() >= direct);
    }

    #[test]
    fn density_parseval_and_single_channel() {
        let p = lin(1.0, 0.3);
        let one =
            build_wavepacket(gauss(), DecayModel::Compact, 2.0, 0, grids(&p, 0.02, 400)).unwrap();
        let d = synthesize_density(&one, 8).unwrap();
        assert!(d.angular_variation() <= 1e-10);
        assert!((d.norm_sq() - 1.0).abs() < 1e-12);
        let many = build_wavepacket(
            gauss(),
            DecayModel::Geometric { q: 0.7 },
            2.0,
            8,
            grids(&p, 0.02, 400),
        )
        .unwrap();
        let d = synthesize_density(&many, 36).unwrap();
        assert!((d.norm_sq() - 1.0).abs() < 1e-12);
        let (m, _) = moment(&many, 2.0);
        assert!(((d.moment(2.0) - m) / m).abs() < 1e-10);
        assert!(synthesize_density(&many, 35).is_err());
    }

    #[test]
    fn two_channel_angular_modulation() {
        let p = lin(1.0, 0.3);
        let mut wp =
            build_wavepacket(gauss(), DecayModel::Compact, 2.0, 1, grids(&p, 0.02, 400)).unwrap();
        wp.channels.remove(0);
        for c in wp.channels.iter_mut() {
            for z in c.phi.iter_mut() {
                *z *= 1.5f64.sqrt();
            }
        }
        let d = synthesize_density(&wp, 16).unwrap();
        assert!(d.angular_variation() > 1e-3);
        for i in (0..d.radii.len()).step_by(37) {
            let mean: f64 =
                (0..16).map(|l| d.density(i, l)).sum::<f64>() / 16.0 * 2.0 * PI * d.radii[i];
            let direct: f64 = wp
                .channels
                .iter()
                .map(|c| c.phi.get(i).map_or(0.0, |z| z.norm_sqr()))
                .sum();
            assert!((mean - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }
}
