//! Decoding delay and completion metrics, analytic lower bounds, Monte Carlo
//! estimation and approximation-ratio reports.
//!
//! Per-session delays are exact rationals. Monte Carlo means stay exact as
//! well (they are sums of rationals with a fixed denominator); only standard
//! errors and ratios to erasure-dependent bounds are floating point.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::gf::Field;
use crate::schemes::SchemeSpec;
use crate::session::{derive_seed, MemoryMode, Session, SessionError, SessionResult};
use crate::sfm::{ChannelSpec, Sfm};

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("receiver {0} has not completed; its delay is undefined")]
    Incomplete(usize),
    #[error("receiver {0} wants no packets and is excluded from metrics")]
    Excluded(usize),
    #[error("session truncated before every receiver completed")]
    Truncated,
    #[error("no trial completed")]
    NoCompletedTrials,
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Mean decode slot of receiver `n` over its wanted packets.
pub fn apdd_receiver(result: &SessionResult, sfm: &Sfm, n: usize) -> Result<Rational, MetricError> {
    let w = sfm.weight(n);
    if w == 0 {
        return Err(MetricError::Excluded(n));
    }
    let mut sum = 0i64;
    for k in sfm.want_set(n) {
        sum += result.decode_slot[n][k].ok_or(MetricError::Incomplete(n))? as i64;
    }
    Ok(Rational::new(sum, w as i64))
}

/// Mean decode slot over every wanted `(receiver, packet)` pair.
pub fn apdd_overall(result: &SessionResult, sfm: &Sfm) -> Result<Rational, MetricError> {
    let mut sum = 0i64;
    for n in 0..sfm.n_receivers() {
        for k in sfm.want_set(n) {
            sum += result.decode_slot[n][k].ok_or(MetricError::Incomplete(n))? as i64;
        }
    }
    let total = sfm.total_wants();
    if total == 0 {
        return Ok(Rational::zero());
    }
    Ok(Rational::new(sum, total as i64))
}

/// Per-receiver completion slots and the overall completion slot.
pub fn completion_stats(result: &SessionResult) -> Result<(Vec<usize>, usize), MetricError> {
    if !result.completed {
        return Err(MetricError::Truncated);
    }
    let per: Vec<usize> = result
        .completion
        .iter()
        .map(|c| c.expect("completed session"))
        .collect();
    let overall = per.iter().copied().max().unwrap_or(0);
    Ok((per, overall))
}

/// Analytic lower bounds. Per-receiver entries are `None` for receivers that
/// want nothing.
///
/// The aggregate delay bound substitutes the per-receiver `(w+1)/2` bound into
/// the weighted mean, so it is a lower bound on the optimum, not the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub u_lower: Vec<Option<f64>>,
    pub d_lower: Vec<Option<f64>>,
    pub u_lower_all: f64,
    pub d_lower_all: f64,
    pub with_erasures: bool,
}

/// Erasure-free bounds `w` and `(w+1)/2`, or with a channel `w/(1-p)` and
/// `(w+1)/(2(1-p))`.
pub fn bounds(sfm: &Sfm, channel: Option<&ChannelSpec>) -> Bounds {
    let n = sfm.n_receivers();
    let mut u_lower = Vec::with_capacity(n);
    let mut d_lower = Vec::with_capacity(n);
    let (mut weighted, mut total) = (0.0, 0.0);
    for r in 0..n {
        let w = sfm.weight(r) as f64;
        if w == 0.0 {
            u_lower.push(None);
            d_lower.push(None);
            continue;
        }
        let success = channel.map_or(1.0, |c| 1.0 - c.erasure_prob(r));
        let u = w / success;
        let d = (w + 1.0) / (2.0 * success);
        u_lower.push(Some(u));
        d_lower.push(Some(d));
        weighted += w * d;
        total += w;
    }
    Bounds {
        u_lower_all: u_lower.iter().flatten().copied().fold(0.0, f64::max),
        d_lower_all: if total > 0.0 { weighted / total } else { 0.0 },
        u_lower,
        d_lower,
        with_erasures: channel.is_some_and(|c| !c.is_erasure_free()),
    }
}

/// Summary of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub completed: bool,
    /// Completion slot per receiver (0 for receivers wanting nothing).
    pub u_n: Vec<usize>,
    /// Delay per receiver, `None` for receivers wanting nothing.
    pub d_n: Vec<Option<Rational>>,
    pub u: usize,
    pub d: Rational,
}

impl TrialOutcome {
    pub fn from_result(result: &SessionResult, sfm: &Sfm) -> Result<Self, MetricError> {
        if !result.completed {
            return Ok(Self {
                completed: false,
                u_n: Vec::new(),
                d_n: Vec::new(),
                u: result.slots_used,
                d: Rational::zero(),
            });
        }
        let (u_n, u) = completion_stats(result)?;
        let d_n = (0..sfm.n_receivers())
            .map(|n| match apdd_receiver(result, sfm, n) {
                Ok(d) => Ok(Some(d)),
                Err(MetricError::Excluded(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            completed: true,
            u_n,
            d_n,
            u,
            d: apdd_overall(result, sfm)?,
        })
    }
}

/// Exact sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: Rational,
    pub se: f64,
}

impl Estimate {
    fn from_samples(samples: &[Rational]) -> Self {
        let n = samples.len() as i64;
        let sum = samples.iter().fold(Rational::zero(), |acc, &x| acc + x);
        let mean = sum / n;
        let se = if n < 2 {
            0.0
        } else {
            let m = mean.to_f64().unwrap_or(f64::NAN);
            let ss: f64 = samples
                .iter()
                .map(|x| (x.to_f64().unwrap_or(f64::NAN) - m).powi(2))
                .sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Self { mean, se }
    }

    pub fn value(&self) -> f64 {
        self.mean.to_f64().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverEstimate {
    pub receiver: usize,
    pub w: usize,
    pub u: Estimate,
    pub d: Estimate,
}

/// Sample means over completed trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    /// Receivers that want at least one packet.
    pub receivers: Vec<ReceiverEstimate>,
    pub u: Estimate,
    pub d: Estimate,
    pub trials: usize,
    pub completed: usize,
    pub truncated: usize,
}

impl Estimates {
    /// More than 1% of trials hit the slot cap.
    pub fn truncation_warning(&self) -> bool {
        self.truncated * 100 > self.trials
    }

    pub fn receiver(&self, n: usize) -> Option<&ReceiverEstimate> {
        self.receivers.iter().find(|r| r.receiver == n)
    }

    pub fn from_outcomes(sfm: &Sfm, outcomes: &[TrialOutcome]) -> Result<Self, MetricError> {
        if outcomes.is_empty() {
            return Err(MetricError::NoTrials);
        }
        let done: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.completed).collect();
        if done.is_empty() {
            return Err(MetricError::NoCompletedTrials);
        }
        let receivers = (0..sfm.n_receivers())
            .filter(|&n| sfm.weight(n) > 0)
            .map(|n| {
                let u: Vec<Rational> = done.iter().map(|o| Rational::from(o.u_n[n] as i64)).collect();
                let d: Vec<Rational> = done.iter().map(|o| o.d_n[n].expect("wanted")).collect();
                ReceiverEstimate {
                    receiver: n,
                    w: sfm.weight(n),
                    u: Estimate::from_samples(&u),
                    d: Estimate::from_samples(&d),
                }
            })
            .collect();
        let u: Vec<Rational> = done.iter().map(|o| Rational::from(o.u as i64)).collect();
        let d: Vec<Rational> = done.iter().map(|o| o.d).collect();
        Ok(Self {
            receivers,
            u: Estimate::from_samples(&u),
            d: Estimate::from_samples(&d),
            trials: outcomes.len(),
            completed: done.len(),
            truncated: outcomes.len() - done.len(),
        })
    }
}

/// Independent repetitions of one session configuration.
///
/// Trial `t` runs with seed `derive_seed(master_seed, t)`. Trials run in
/// parallel; outcomes are collected in trial order, so the estimates do not
/// depend on scheduling.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub sfm: Sfm,
    pub channel: ChannelSpec,
    pub field: Field,
    pub scheme: SchemeSpec,
    pub memory: MemoryMode,
    pub trials: usize,
    pub master_seed: u64,
    pub max_slots: usize,
}

impl MonteCarlo {
    pub fn session(&self, trial: usize) -> Result<Session, SessionError> {
        Session::new(
            self.sfm.clone(),
            self.channel.clone(),
            self.field.clone(),
            &self.scheme,
            self.memory,
            derive_seed(self.master_seed, trial as u64),
        )
    }

    pub fn run_trial(&self, trial: usize) -> Result<SessionResult, SessionError> {
        self.session(trial)?.run(self.max_slots)
    }

    pub fn outcomes(&self) -> Result<Vec<TrialOutcome>, MetricError> {
        if self.trials == 0 {
            return Err(MetricError::NoTrials);
        }
        (0..self.trials)
            .into_par_iter()
            .map(|t| TrialOutcome::from_result(&self.run_trial(t)?, &self.sfm))
            .collect()
    }

    pub fn run(&self) -> Result<Estimates, MetricError> {
        Estimates::from_outcomes(&self.sfm, &self.outcomes()?)
    }
}

/// A measured quantity against its lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEntry {
    /// `None` for aggregate rows.
    pub receiver: Option<usize>,
    pub measured: f64,
    pub se: f64,
    pub bound: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

impl RatioEntry {
    fn new(receiver: Option<usize>, estimate: &Estimate, bound: f64) -> Self {
        let measured = estimate.value();
        Self {
            receiver,
            measured,
            se: estimate.se,
            bound,
            ratio: measured / bound,
            ratio_se: estimate.se / bound,
        }
    }
}

/// Ratios of measured throughput and delay to their lower bounds.
///
/// Strong ratios are the worst receiver's ratio; weak ratios compare the
/// aggregate quantities. These certify the tested instance only.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    pub throughput: Vec<RatioEntry>,
    pub apdd: Vec<RatioEntry>,
    pub strong_throughput: RatioEntry,
    pub strong_apdd: RatioEntry,
    pub weak_throughput: RatioEntry,
    pub weak_apdd: RatioEntry,
    pub trials: usize,
}

/// Printed with every ratio report. The approximation guarantees quantify
/// over all SFMs and all erasure probabilities; a simulator only samples
/// that space.
pub const RATIO_CAVEAT: &str = "These ratios certify the tested instances only. \
Approximation guarantees quantify over every SFM and every set of erasure probabilities, \
which no finite simulation can cover; a ratio within its bound here is evidence, not proof.";

pub fn approximation_report(estimates: &Estimates, bounds: &Bounds) -> ApproxReport {
    let mut throughput = Vec::new();
    let mut apdd = Vec::new();
    for r in &estimates.receivers {
        let (Some(ub), Some(db)) = (bounds.u_lower[r.receiver], bounds.d_lower[r.receiver]) else {
            continue;
        };
        throughput.push(RatioEntry::new(Some(r.receiver), &r.u, ub));
        apdd.push(RatioEntry::new(Some(r.receiver), &r.d, db));
    }
    let worst = |entries: &[RatioEntry]| {
        entries
            .iter()
            .copied()
            .fold(None::<RatioEntry>, |best, e| match best {
                Some(b) if b.ratio >= e.ratio => Some(b),
                _ => Some(e),
            })
            .expect("at least one receiver wants something")
    };
    ApproxReport {
        strong_throughput: worst(&throughput),
        strong_apdd: worst(&apdd),
        weak_throughput: RatioEntry::new(None, &estimates.u, bounds.u_lower_all),
        weak_apdd: RatioEntry::new(None, &estimates.d, bounds.d_lower_all),
        throughput,
        apdd,
        trials: estimates.trials,
    }
}
