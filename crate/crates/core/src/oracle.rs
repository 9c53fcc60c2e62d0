//! Exhaustive erasure-free optima for small instances.
//!
//! The search state is every receiver's knowledge subspace (side information
//! plus received vectors), held as full-memory [`EliminationState`]s. A state
//! is memoized by the sorted multiset of receiver signatures, which merges
//! branches that differ only by a permutation of identical receivers.
//! Candidate vectors are projective representatives (leading coefficient 1):
//! scaling a vector never changes what it lets a receiver decode.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::gf::{CodingVector, Elem, EliminationState, Field, FieldSpec};
use crate::metrics::Rational;
use crate::sfm::Sfm;

/// Largest instances the oracle accepts.
pub const MAX_PACKETS: usize = 6;
pub const MAX_RECEIVERS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance with K={k}, N={n} exceeds the oracle envelope (K <= {MAX_PACKETS}, N <= {MAX_RECEIVERS})")]
    Envelope { k: usize, n: usize },
    #[error("horizon {horizon} is below the largest want set {max_w}")]
    HorizonTooShort { horizon: usize, max_w: usize },
    #[error("no schedule completes within {0} slots")]
    Infeasible(usize),
    #[error("receiver {0} wants no packets")]
    Excluded(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult<T> {
    pub optimum: T,
    /// One optimal schedule.
    pub witness: Vec<CodingVector>,
    pub nodes: u64,
    pub field: FieldSpec,
}

/// `K + 2`.
pub fn default_horizon(sfm: &Sfm) -> usize {
    sfm.k_packets() + 2
}

fn check_envelope(sfm: &Sfm, horizon: usize) -> Result<(), OracleError> {
    let (k, n) = (sfm.k_packets(), sfm.n_receivers());
    if k > MAX_PACKETS || n > MAX_RECEIVERS {
        return Err(OracleError::Envelope { k, n });
    }
    let max_w = sfm.max_weight();
    if horizon < max_w {
        return Err(OracleError::HorizonTooShort { horizon, max_w });
    }
    Ok(())
}

/// Every nonzero vector of `GF(q)^k` whose first nonzero coefficient is 1.
fn projective_points(field: &Field, k: usize) -> Vec<CodingVector> {
    let q = field.order() as usize;
    let total = q.pow(k as u32);
    let mut out = Vec::new();
    for code in 1..total {
        let mut c = code;
        let mut coeffs = vec![0 as Elem; k];
        for slot in coeffs.iter_mut().rev() {
            *slot = (c % q) as Elem;
            c /= q;
        }
        if coeffs.iter().find(|&&x| x != 0) == Some(&1) {
            out.push(CodingVector::new(coeffs));
        }
    }
    out
}

struct Search {
    candidates: Vec<CodingVector>,
    nodes: u64,
}

type State = Vec<EliminationState>;

/// (state key, slots left) -> best (cost, candidate index).
type ApddMemo = HashMap<(Vec<Vec<Elem>>, usize), Option<(usize, usize)>>;

impl Search {
    fn new(sfm: &Sfm, field: &Field) -> (Self, State) {
        let start = (0..sfm.n_receivers())
            .map(|n| EliminationState::with_side_info(field.clone(), sfm.side_info(n)))
            .collect();
        let search = Self {
            candidates: projective_points(field, sfm.k_packets()),
            nodes: 0,
        };
        (search, start)
    }

    fn key(state: &State) -> Vec<Vec<Elem>> {
        let mut sig: Vec<Vec<Elem>> = state.iter().map(EliminationState::signature).collect();
        sig.sort_unstable();
        sig
    }

    /// Dimensions still missing per receiver.
    fn deficit(state: &State) -> usize {
        state
            .iter()
            .map(|s| s.k() - s.side_info().iter().filter(|&&b| b).count() - s.rank())
            .max()
            .unwrap_or(0)
    }

    fn pending(state: &State) -> usize {
        state
            .iter()
            .map(|s| s.decoded().iter().filter(|&&d| !d).count())
            .sum()
    }

    /// Lower bound on the future delay cost: the i-th remaining decode of a
    /// receiver that has decoded `dec` wanted packets with `rank` dimensions
    /// needs at least `max(1, dec + i - rank)` more slots.
    fn delay_lower_bound(state: &State) -> usize {
        state
            .iter()
            .map(|s| {
                let side = s.side_info().iter().filter(|&&b| b).count();
                let dec = s.decoded().iter().filter(|&&d| d).count() - side;
                let remaining = s.k() - side - dec;
                (1..=remaining)
                    .map(|i| (dec + i).saturating_sub(s.rank()).max(1))
                    .sum::<usize>()
            })
            .sum()
    }

    fn apply(state: &State, v: &CodingVector) -> Option<State> {
        let innovative = state
            .iter()
            .any(|s| !s.is_full() && s.is_innovative(v).expect("matching length"));
        if !innovative {
            return None;
        }
        let mut next = state.clone();
        for s in next.iter_mut().filter(|s| !s.is_full()) {
            s.absorb(v).expect("matching length");
        }
        Some(next)
    }

    /// Depth-limited search for a completing schedule of exactly `depth`
    /// more slots (or fewer).
    fn complete_within(
        &mut self,
        state: &State,
        depth: usize,
        failed: &mut HashSet<(Vec<Vec<Elem>>, usize)>,
        path: &mut Vec<CodingVector>,
    ) -> bool {
        self.nodes += 1;
        let deficit = Self::deficit(state);
        if deficit == 0 {
            return true;
        }
        if deficit > depth {
            return false;
        }
        let key = (Self::key(state), depth);
        if failed.contains(&key) {
            return false;
        }
        for i in 0..self.candidates.len() {
            let v = self.candidates[i].clone();
            let Some(next) = Self::apply(state, &v) else {
                continue;
            };
            if Self::deficit(&next) >= depth {
                continue;
            }
            path.push(v);
            if self.complete_within(&next, depth - 1, failed, path) {
                return true;
            }
            path.pop();
        }
        failed.insert(key);
        false
    }

    /// Exact minimum of the summed future delay from `state` with `rem` slots
    /// left; `None` if completion is impossible.
    fn min_delay(&mut self, state: &State, rem: usize, memo: &mut ApddMemo) -> Option<usize> {
        self.nodes += 1;
        let pending = Self::pending(state);
        if pending == 0 {
            return Some(0);
        }
        if Self::deficit(state) > rem {
            return None;
        }
        let key = (Self::key(state), rem);
        if let Some(hit) = memo.get(&key) {
            return hit.map(|(cost, _)| cost);
        }
        let mut children: Vec<(usize, usize, State)> = (0..self.candidates.len())
            .filter_map(|i| {
                let next = Self::apply(state, &self.candidates[i])?;
                (Self::deficit(&next) < rem).then(|| (Self::delay_lower_bound(&next), i, next))
            })
            .collect();
        children.sort_by_key(|(lb, i, _)| (*lb, *i));
        let mut best: Option<(usize, usize)> = None;
        for (lb, i, next) in children {
            if best.is_some_and(|(b, _)| pending + lb >= b) {
                continue;
            }
            if let Some(cost) = self.min_delay(&next, rem - 1, memo) {
                let total = pending + cost;
                if best.is_none_or(|(b, _)| total < b) {
                    best = Some((total, i));
                }
            }
        }
        memo.insert(key, best);
        best.map(|(cost, _)| cost)
    }
}

/// Fewest erasure-free slots after which every receiver has all its wanted
/// packets, over vectors from `field`.
pub fn min_completion(
    sfm: &Sfm,
    field: &Field,
    horizon: usize,
) -> Result<OracleResult<usize>, OracleError> {
    check_envelope(sfm, horizon)?;
    let (mut search, start) = Search::new(sfm, field);
    let mut failed = HashSet::new();
    for depth in sfm.max_weight()..=horizon {
        let mut path = Vec::new();
        if search.complete_within(&start, depth, &mut failed, &mut path) {
            return Ok(OracleResult {
                optimum: path.len(),
                witness: path,
                nodes: search.nodes,
                field: field.spec(),
            });
        }
    }
    Err(OracleError::Infeasible(horizon))
}

/// Minimum erasure-free overall delay (mean decode slot over all wanted
/// pairs) for full-memory receivers, over schedules of at most `horizon` slots.
pub fn min_apdd(
    sfm: &Sfm,
    field: &Field,
    horizon: usize,
) -> Result<OracleResult<Rational>, OracleError> {
    check_envelope(sfm, horizon)?;
    let total = sfm.total_wants();
    let (mut search, start) = Search::new(sfm, field);
    if total == 0 {
        return Ok(OracleResult {
            optimum: Rational::from(0),
            witness: Vec::new(),
            nodes: 0,
            field: field.spec(),
        });
    }
    let mut memo = HashMap::new();
    let cost = search
        .min_delay(&start, horizon, &mut memo)
        .ok_or(OracleError::Infeasible(horizon))?;

    let mut witness = Vec::new();
    let mut state = start;
    let mut rem = horizon;
    while Search::pending(&state) > 0 {
        let (_, i) = memo[&(Search::key(&state), rem)].expect("optimal path is feasible");
        let v = search.candidates[i].clone();
        state = Search::apply(&state, &v).expect("stored move is innovative");
        witness.push(v);
        rem -= 1;
    }
    Ok(OracleResult {
        optimum: Rational::new(cost as i64, total as i64),
        witness,
        nodes: search.nodes,
        field: field.spec(),
    })
}

/// Minimum erasure-free delay of one receiver: `(w + 1) / 2`, attained by
/// sending its wanted packets one at a time.
pub fn min_apdd_receiver(sfm: &Sfm, n: usize) -> Result<Rational, OracleError> {
    let w = sfm.weight(n);
    if w == 0 {
        return Err(OracleError::Excluded(n));
    }
    Ok(Rational::new(w as i64 + 1, 2))
}
