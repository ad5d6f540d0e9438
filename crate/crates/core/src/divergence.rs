//! f-divergence derivatives and Bregman training objectives.
//!
//! The particle flow needs only the first derivative `f'` of the chosen
//! f-divergence, evaluated at the estimated ratio:
//!
//! | divergence   | f(r)                          | f'(r)              |
//! |--------------|-------------------------------|--------------------|
//! | Pearson chi2 | (r-1)^2                       | 2(r-1)             |
//! | KL           | r log r                       | log r + 1          |
//! | JS           | r log r - (r+1) log((r+1)/2)  | log(2r/(r+1))      |
//! | logD         | (r+1) log(r+1) - 2 log 2      | log(r+1) + 1       |
//!
//! For models whose raw output is `s = log r`, the logarithmic derivatives
//! have stable forms built on the log-sigmoid `LS(x) = log(1/(1+exp(-x)))`:
//! `f'_KL = s + 1`, `f'_JS = log 2 + LS(s)`, `f'_logD = -LS(-s) + 1`.
//!
//! Two Bregman objectives are supported, each tied to an output head:
//! LSIF (direct-ratio head, paired with Pearson chi2) minimizes
//! `0.5 E_p[r^2] - E_q[r]`, and LR (log-ratio head, paired with KL, JS or
//! logD) minimizes `-E_p[LS(-s)] - E_q[LS(s)]`. Model-independent constants
//! are dropped from both.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The f-divergences whose gradient flows are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FDivergence {
    PearsonChi2,
    Kl,
    Js,
    #[serde(rename = "logd")]
    LogD,
}

impl FDivergence {
    pub const ALL: [FDivergence; 4] = [
        FDivergence::PearsonChi2,
        FDivergence::Kl,
        FDivergence::Js,
        FDivergence::LogD,
    ];

    /// Config / checkpoint tag.
    pub fn tag(self) -> &'static str {
        match self {
            FDivergence::PearsonChi2 => "pearson_chi2",
            FDivergence::Kl => "kl",
            FDivergence::Js => "js",
            FDivergence::LogD => "logd",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "pearson_chi2" => Ok(FDivergence::PearsonChi2),
            "kl" => Ok(FDivergence::Kl),
            "js" => Ok(FDivergence::Js),
            "logd" => Ok(FDivergence::LogD),
            other => Err(Error::InvalidParameter {
                what: format!("unknown divergence tag {other:?}"),
            }),
        }
    }
}

/// Bregman objective; decides the model's output-head semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BregmanObjective {
    Lsif,
    Lr,
}

impl BregmanObjective {
    pub fn tag(self) -> &'static str {
        match self {
            BregmanObjective::Lsif => "lsif",
            BregmanObjective::Lr => "lr",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "lsif" => Ok(BregmanObjective::Lsif),
            "lr" => Ok(BregmanObjective::Lr),
            other => Err(Error::InvalidParameter {
                what: format!("unknown objective tag {other:?}"),
            }),
        }
    }
}

/// Numerically stable log-sigmoid: `-log1p(exp(-x))` for `x >= 0`,
/// `x - log1p(exp(x))` otherwise.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Logistic sigmoid, evaluated without overflow on either tail.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// First derivative `f'(r)` of the divergence at a ratio `r > 0`.
pub fn f_prime(div: FDivergence, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::RatioDomain { r });
    }
    Ok(match div {
        FDivergence::PearsonChi2 => 2.0 * (r - 1.0),
        FDivergence::Kl => r.ln() + 1.0,
        FDivergence::Js => (2.0 * r / (r + 1.0)).ln(),
        FDivergence::LogD => (r + 1.0).ln() + 1.0,
    })
}

/// `f'` evaluated from the log-ratio `s = log r`, in the stable form.
///
/// Pearson chi2 has no log form and is rejected.
pub fn f_prime_from_logr(div: FDivergence, s: f64) -> Result<f64> {
    match div {
        FDivergence::PearsonChi2 => Err(Error::NoLogRatioForm { divergence: div }),
        FDivergence::Kl => Ok(s + 1.0),
        FDivergence::Js => Ok(std::f64::consts::LN_2 + log_sigmoid(s)),
        FDivergence::LogD => Ok(-log_sigmoid(-s) + 1.0),
    }
}

/// Chain-rule factor `d f'(exp(s)) / ds`, used to turn input gradients of a
/// log-ratio network into the flow drift.
pub fn f_prime_dlogr(div: FDivergence, s: f64) -> Result<f64> {
    match div {
        FDivergence::PearsonChi2 => Err(Error::NoLogRatioForm { divergence: div }),
        FDivergence::Kl => Ok(1.0),
        FDivergence::Js => Ok(sigmoid(-s)),
        FDivergence::LogD => Ok(sigmoid(s)),
    }
}

/// Checks the objective / divergence pairing.
///
/// LSIF trains a direct-ratio head and flows Pearson chi2; LR trains a
/// log-ratio head and flows KL, JS, or logD.
pub fn pairing_check(obj: BregmanObjective, div: FDivergence) -> Result<()> {
    let ok = match obj {
        BregmanObjective::Lsif => div == FDivergence::PearsonChi2,
        BregmanObjective::Lr => div != FDivergence::PearsonChi2,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidPairing {
            objective: obj,
            divergence: div,
        })
    }
}

/// Loss value and exact per-output cotangents of a Bregman objective.
#[derive(Debug, Clone)]
pub struct BregmanLoss {
    pub loss: f64,
    /// d loss / d out_p[i]
    pub d_out_p: Vec<f64>,
    /// d loss / d out_q[i]
    pub d_out_q: Vec<f64>,
}

/// Evaluates the Bregman objective on raw model outputs.
///
/// `out_p` are outputs on data samples (`x ~ p`), `out_q` on flowed samples.
/// For LSIF the outputs are the ratio itself; for LR they are the log-ratio.
pub fn bregman_loss(obj: BregmanObjective, out_p: &[f64], out_q: &[f64]) -> Result<BregmanLoss> {
    if out_p.is_empty() {
        return Err(Error::EmptyBatch { which: "data" });
    }
    if out_q.is_empty() {
        return Err(Error::EmptyBatch { which: "flowed" });
    }
    for (which, outs) in [("data", out_p), ("flowed", out_q)] {
        if let Some(index) = outs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput { which, index });
        }
    }

    let n_p = out_p.len() as f64;
    let n_q = out_q.len() as f64;
    match obj {
        BregmanObjective::Lsif => {
            // 0.5 * mean(r_p^2) - mean(r_q)
            let loss = 0.5 * out_p.iter().map(|r| r * r).sum::<f64>() / n_p
                - out_q.iter().sum::<f64>() / n_q;
            let d_out_p = out_p.iter().map(|r| r / n_p).collect();
            let d_out_q = out_q.iter().map(|_| -1.0 / n_q).collect();
            Ok(BregmanLoss {
                loss,
                d_out_p,
                d_out_q,
            })
        }
        BregmanObjective::Lr => {
            // -mean(LS(-s_p)) - mean(LS(s_q))
            let loss = -out_p.iter().map(|&s| log_sigmoid(-s)).sum::<f64>() / n_p
                - out_q.iter().map(|&s| log_sigmoid(s)).sum::<f64>() / n_q;
            let d_out_p = out_p.iter().map(|&s| sigmoid(s) / n_p).collect();
            let d_out_q = out_q.iter().map(|&s| -sigmoid(-s) / n_q).collect();
            Ok(BregmanLoss {
                loss,
                d_out_p,
                d_out_q,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn f_prime_matches_table() {
        assert_eq!(f_prime(FDivergence::PearsonChi2, 1.0).unwrap(), 0.0);
        assert_eq!(f_prime(FDivergence::PearsonChi2, 2.0).unwrap(), 2.0);
        let e = std::f64::consts::E;
        assert!((f_prime(FDivergence::Kl, e).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn f_prime_rejects_nonpositive_ratio() {
        assert!(f_prime(FDivergence::Kl, 0.0).is_err());
        assert!(f_prime(FDivergence::Js, -1.0).is_err());
        assert!(f_prime(FDivergence::LogD, f64::NAN).is_err());
    }

    #[test]
    fn f_prime_from_logr_at_zero() {
        assert_eq!(f_prime_from_logr(FDivergence::Kl, 0.0).unwrap(), 1.0);
        assert!(f_prime_from_logr(FDivergence::Js, 0.0).unwrap().abs() < 1e-15);
        let logd = f_prime_from_logr(FDivergence::LogD, 0.0).unwrap();
        assert!((logd - (1.0 + LN_2)).abs() < 1e-12);
    }

    #[test]
    fn chi2_has_no_log_form() {
        assert!(matches!(
            f_prime_from_logr(FDivergence::PearsonChi2, 0.0),
            Err(Error::NoLogRatioForm { .. })
        ));
        assert!(f_prime_dlogr(FDivergence::PearsonChi2, 0.0).is_err());
    }

    #[test]
    fn f_prime_dlogr_values() {
        assert_eq!(f_prime_dlogr(FDivergence::Kl, -5.0).unwrap(), 1.0);
        assert_eq!(f_prime_dlogr(FDivergence::Kl, 17.0).unwrap(), 1.0);
        assert!((f_prime_dlogr(FDivergence::Js, 0.0).unwrap() - 0.5).abs() < 1e-15);
        // logD chain factor tends to 1 for large s.
        assert!((f_prime_dlogr(FDivergence::LogD, 30.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_forms_agree_with_direct_forms() {
        // f_prime_from_logr(div, s) == f_prime(div, exp(s)) over s in [-30, 30].
        for div in [FDivergence::Kl, FDivergence::Js, FDivergence::LogD] {
            let mut s = -30.0f64;
            while s <= 30.0 {
                let direct = f_prime(div, s.exp()).unwrap();
                let stable = f_prime_from_logr(div, s).unwrap();
                assert!(
                    (direct - stable).abs() < 1e-9,
                    "{div:?} s={s}: direct={direct} stable={stable}"
                );
                s += 0.25;
            }
        }
    }

    #[test]
    fn f_prime_is_nondecreasing() {
        // f convex implies f' nondecreasing; check on a log-spaced grid.
        for div in FDivergence::ALL {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=120 {
                let r = 10f64.powf(-6.0 + 0.1 * k as f64);
                let v = f_prime(div, r).unwrap();
                assert!(v >= prev, "{div:?} decreased at r={r}");
                prev = v;
            }
        }
    }

    #[test]
    fn lsif_loss_hand_values() {
        let l = bregman_loss(BregmanObjective::Lsif, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((l.loss - (-0.5)).abs() < 1e-15);

        let l = bregman_loss(BregmanObjective::Lsif, &[2.0], &[1.0]).unwrap();
        assert!((l.loss - 1.0).abs() < 1e-15);
        assert_eq!(l.d_out_p, vec![2.0]);
        assert_eq!(l.d_out_q, vec![-1.0]);
    }

    #[test]
    fn lr_loss_hand_values() {
        let l = bregman_loss(BregmanObjective::Lr, &[0.0], &[0.0]).unwrap();
        assert!((l.loss - 2.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn bregman_loss_rejects_bad_batches() {
        assert!(matches!(
            bregman_loss(BregmanObjective::Lsif, &[], &[1.0]),
            Err(Error::EmptyBatch { which: "data" })
        ));
        assert!(matches!(
            bregman_loss(BregmanObjective::Lr, &[0.0], &[f64::INFINITY]),
            Err(Error::NonFiniteOutput {
                which: "flowed",
                index: 0
            })
        ));
    }

    #[test]
    fn loss_cotangents_match_finite_differences() {
        let out_p = [0.8, 1.7, 0.2, -0.4];
        let out_q = [1.1, 0.4, -0.9];
        let h = 1e-6;
        for obj in [BregmanObjective::Lsif, BregmanObjective::Lr] {
            // LSIF is defined on raw outputs too (the head keeps them
            // unconstrained), so negative entries are legal inputs here.
            let base = bregman_loss(obj, &out_p, &out_q).unwrap();
            for i in 0..out_p.len() {
                let mut plus = out_p.to_vec();
                let mut minus = out_p.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let lp = bregman_loss(obj, &plus, &out_q).unwrap().loss;
                let lm = bregman_loss(obj, &minus, &out_q).unwrap().loss;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - base.d_out_p[i]).abs() / fd.abs().max(1e-12);
                assert!(rel < 1e-6, "{obj:?} d_out_p[{i}]: fd={fd} got={}", base.d_out_p[i]);
            }
            for i in 0..out_q.len() {
                let mut plus = out_q.to_vec();
                let mut minus = out_q.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let lp = bregman_loss(obj, &out_p, &plus).unwrap().loss;
                let lm = bregman_loss(obj, &out_p, &minus).unwrap().loss;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - base.d_out_q[i]).abs() / fd.abs().max(1e-12);
                assert!(rel < 1e-6, "{obj:?} d_out_q[{i}]: fd={fd} got={}", base.d_out_q[i]);
            }
        }
    }

    #[test]
    fn pairing_table() {
        use BregmanObjective::*;
        use FDivergence::*;
        assert!(pairing_check(Lsif, PearsonChi2).is_ok());
        assert!(pairing_check(Lr, Kl).is_ok());
        assert!(pairing_check(Lr, Js).is_ok());
        assert!(pairing_check(Lr, LogD).is_ok());
        assert!(pairing_check(Lsif, Kl).is_err());
        assert!(pairing_check(Lsif, Js).is_err());
        assert!(pairing_check(Lsif, LogD).is_err());
        assert!(pairing_check(Lr, PearsonChi2).is_err());
    }

    /// Minimizing the Bregman loss over a tabular ratio on a 5-state space
    /// must recover r_i = q_i / p_i (the divergence's unique minimizer).
    ///
    /// Densities are multiples of 1/100, so finite batches that repeat each
    /// state proportionally evaluate the population loss exactly.
    #[test]
    fn tabular_minimizer_recovery() {
        let p = [0.10f64, 0.20, 0.40, 0.20, 0.10];
        let q = [0.30f64, 0.10, 0.20, 0.10, 0.30];
        let counts_p: Vec<usize> = p.iter().map(|v| (v * 100.0).round() as usize).collect();
        let counts_q: Vec<usize> = q.iter().map(|v| (v * 100.0).round() as usize).collect();

        for obj in [BregmanObjective::Lsif, BregmanObjective::Lr] {
            // Tabular "model": one output value per state.
            let mut table = [0.5f64; 5];
            if obj == BregmanObjective::Lsif {
                table = [1.0; 5];
            }
            let lr = 0.5;
            for _ in 0..20_000 {
                let out_p: Vec<f64> = counts_p
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &c)| std::iter::repeat_n(table[i], c))
                    .collect();
                let out_q: Vec<f64> = counts_q
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &c)| std::iter::repeat_n(table[i], c))
                    .collect();
                let l = bregman_loss(obj, &out_p, &out_q).unwrap();
                // Accumulate cotangents back onto the table entries.
                let mut grad = [0.0f64; 5];
                let mut k = 0;
                for (i, &c) in counts_p.iter().enumerate() {
                    for _ in 0..c {
                        grad[i] += l.d_out_p[k];
                        k += 1;
                    }
                }
                let mut k = 0;
                for (i, &c) in counts_q.iter().enumerate() {
                    for _ in 0..c {
                        grad[i] += l.d_out_q[k];
                        k += 1;
                    }
                }
                for (t, g) in table.iter_mut().zip(grad) {
                    *t -= lr * g;
                }
            }
            for i in 0..5 {
                let want = q[i] / p[i];
                let got = match obj {
                    BregmanObjective::Lsif => table[i],
                    BregmanObjective::Lr => table[i].exp(),
                };
                assert!(
                    (got - want).abs() < 1e-3,
                    "{obj:?} state {i}: got {got}, want {want}"
                );
            }
        }
    }
}
