//! Real symmetric tridiagonal eigenproblems.
//!
//! Eigenvalues come from Sturm-sequence bisection, which only touches the
//! matrix through O(n) inertia counts. Eigenvectors come from a twisted
//! factorization at the converged eigenvalue: ratios of consecutive
//! components are accumulated from both ends and joined at the index where
//! the resolvent diagonal peaks. Each ratio recurrence runs in its stable
//! direction, so exponentially small tails keep their relative accuracy, and
//! the magnitudes are also kept as logarithms so tails far below the
//! floating-point range can still be measured.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag[k]` on the diagonal and `off[k]`
/// coupling rows `k` and `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// A unit eigenvector together with `ln |x_k|` for every component.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigvec {
    pub values: Vec<f64>,
    pub log_abs: Vec<f64>,
}

const EPS: f64 = f64::EPSILON;

/// Absolute floor on bisection interval width.
pub const BISECT_ABS_TOL: f64 = 1e-14;

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            off.len() + 1 == diag.len() || (diag.is_empty() && off.is_empty()),
            "off-diagonal must be one shorter than the diagonal"
        );
        SymTridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Largest entry in absolute value.
    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            let mut rad = 0.0;
            if k > 0 {
                rad += self.off[k - 1].abs();
            }
            if k + 1 < n {
                rad += self.off[k].abs();
            }
            lo = lo.min(self.diag[k] - rad);
            hi = hi.max(self.diag[k] + rad);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let e2 = self.off.iter().fold(1.0f64, |m, v| m.max(v * v));
        f64::MIN_POSITIVE * e2
    }

    /// Number of eigenvalues strictly below `x` (LDLᵀ inertia).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = 1.0;
        for k in 0..self.len() {
            q = if k == 0 {
                self.diag[0] - x
            } else {
                let e = self.off[k - 1];
                (self.diag[k] - x) - e * e / q
            };
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Number of eigenvalues in the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        if hi < lo {
            return 0;
        }
        self.count_below(hi.next_up())
            .saturating_sub(self.count_below(lo))
    }

    /// All eigenvalues in `[lo, hi]`, ascending, bisected until the bracket
    /// reaches a few ulps or [`BISECT_ABS_TOL`].
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.is_empty() || hi < lo {
            return out;
        }
        let (glo, ghi) = self.gershgorin();
        let a0 = lo.max(glo - 1.0);
        let b0 = hi.next_up().min(ghi + 1.0);
        if b0 <= a0 {
            return out;
        }
        let (na, nb) = (self.count_below(a0), self.count_below(b0));
        let mut stack = vec![(a0, b0, na, nb)];
        while let Some((a, b, na, nb)) = stack.pop() {
            if nb <= na {
                continue;
            }
            let mid = 0.5 * (a + b);
            let width_ok = b - a <= 2.0 * EPS * (a.abs().max(b.abs())) + BISECT_ABS_TOL;
            if width_ok || mid <= a || mid >= b {
                for _ in na..nb {
                    out.push(mid.clamp(lo, hi));
                }
                continue;
            }
            let nm = self.count_below(mid).clamp(na, nb);
            // Upper half first so the lower half is popped (and emitted) first.
            stack.push((mid, b, nm, nb));
            stack.push((a, mid, na, nm));
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|k| {
                let mut s = self.diag[k] * x[k];
                if k > 0 {
                    s += self.off[k - 1] * x[k - 1];
                }
                if k + 1 < n {
                    s += self.off[k] * x[k + 1];
                }
                s
            })
            .collect()
    }

    /// Unit eigenvector for an (accurately converged) eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: f64) -> Eigvec {
        let n = self.len();
        if n == 1 {
            return Eigvec {
                values: vec![1.0],
                log_abs: vec![0.0],
            };
        }
        let tiny = self
            .pivmin()
            .max(EPS * EPS * self.max_abs().max(f64::MIN_POSITIVE));
        let guard = |v: f64| {
            if v.abs() < tiny {
                tiny.copysign(v + 0.0)
            } else {
                v
            }
        };
        let d = &self.diag;
        let e = &self.off;

        // Forward: sigma[k] = x_k / x_{k+1}, stable where |x| grows with k.
        let mut fwd_den = vec![0.0; n];
        let mut sigma = vec![0.0; n - 1];
        for k in 0..n {
            let mut den = d[k] - lambda;
            if k > 0 {
                den += e[k - 1] * sigma[k - 1];
            }
            fwd_den[k] = den;
            if k + 1 < n {
                sigma[k] = -e[k] / guard(den);
            }
        }
        // Backward: rho[k] = x_k / x_{k-1}, stable where |x| decays with k.
        let mut bwd_den = vec![0.0; n];
        let mut rho = vec![0.0; n];
        for k in (0..n).rev() {
            let mut den = d[k] - lambda;
            if k + 1 < n {
                den += e[k] * rho[k + 1];
            }
            bwd_den[k] = den;
            if k > 0 {
                rho[k] = -e[k - 1] / guard(den);
            }
        }
        let mut twist = 0;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let mut g = fwd_den[t];
            if t + 1 < n {
                g += e[t] * rho[t + 1];
            }
            if g.abs() < best {
                best = g.abs();
                twist = t;
            }
        }

        let mut log_abs = vec![0.0; n];
        let mut sign = vec![1.0; n];
        for k in (0..twist).rev() {
            log_abs[k] = log_abs[k + 1] + sigma[k].abs().ln();
            sign[k] = sign[k + 1] * sigma[k].signum();
        }
        for k in twist + 1..n {
            log_abs[k] = log_abs[k - 1] + rho[k].abs().ln();
            sign[k] = sign[k - 1] * rho[k].signum();
        }
        let log_norm = 0.5 * log_sum_exp(log_abs.iter().map(|l| 2.0 * l));
        for l in log_abs.iter_mut() {
            *l -= log_norm;
        }
        let values = log_abs
            .iter()
            .zip(sign.iter())
            .map(|(l, s)| s * l.exp())
            .collect();
        Eigvec { values, log_abs }
    }

    /// Eigenpairs with eigenvalues in `[lo, hi]`, ascending.
    ///
    /// Exactly decoupled blocks (zero off-diagonals) are solved separately.
    /// Vectors whose eigenvalues are closer than `1e-8·max(1,|λ|)` are
    /// re-orthogonalized by modified Gram–Schmidt.
    pub fn eigenpairs_in(&self, lo: f64, hi: f64) -> Result<Vec<(f64, Eigvec)>> {
        let n = self.len();
        let mut pairs: Vec<(f64, Eigvec)> = Vec::new();
        let mut start = 0;
        for end in 0..n {
            let split = end + 1 == n || self.off[end] == 0.0;
            if !split {
                continue;
            }
            let block = SymTridiagonal::new(
                self.diag[start..=end].to_vec(),
                self.off[start..end].to_vec(),
            );
            for lambda in block.eigenvalues_in(lo, hi) {
                let v = block.eigenvector(lambda);
                let mut values = vec![0.0; n];
                let mut log_abs = vec![f64::NEG_INFINITY; n];
                values[start..=end].copy_from_slice(&v.values);
                log_abs[start..=end].copy_from_slice(&v.log_abs);
                pairs.push((lambda, Eigvec { values, log_abs }));
            }
            start = end + 1;
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        for i in 1..pairs.len() {
            let (head, tail) = pairs.split_at_mut(i);
            let (li, vi) = (&tail[0].0, &mut tail[0].1);
            let mut touched = false;
            for (lk, vk) in head.iter().rev() {
                if (li - lk).abs() > 1e-8 * li.abs().max(1.0) {
                    break;
                }
                let dot: f64 = vi.values.iter().zip(&vk.values).map(|(a, b)| a * b).sum();
                for (a, b) in vi.values.iter_mut().zip(&vk.values) {
                    *a -= dot * b;
                }
                touched = true;
            }
            if touched {
                let norm = vi.values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 1e-8) {
                    return Err(Error::Eigen {
                        j: 0,
                        msg: format!("lost orthogonality in cluster near {li}"),
                    });
                }
                for v in vi.values.iter_mut() {
                    *v /= norm;
                }
                vi.log_abs = vi.values.iter().map(|v| v.abs().ln()).collect();
            }
        }
        Ok(pairs)
    }
}

/// `ln Σ exp(x_k)`, robust to −∞ entries and large magnitudes.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
