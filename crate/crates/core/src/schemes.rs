//! Coded packet generators.
//!
//! A [`Scheme`] sees a [`FeedbackView`] of every receiver's residual wants and
//! known packets before each slot and returns the coding vector to broadcast.
//! [`SchemeSpec`] is the declarative, parseable description used by the CLI
//! and the Monte Carlo driver; it is instantiated once per session.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::gf::{CodingVector, Elem, Field};
use crate::session::{FeedbackView, SimRng};
use crate::sfm::Sfm;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("{scheme} requires GF(2), got GF({q})")]
    FieldIncompatible { scheme: String, q: u32 },
    #[error("field GF({q}) too small for slot {slot} with {k} packets (need q > K + slot)")]
    Capacity { q: u32, k: usize, slot: usize },
    #[error("invalid partition plan: {0}")]
    BadPlan(String),
    #[error("cannot parse scheme {0:?}")]
    Parse(String),
    #[error("scripted schedule exhausted after {0} vectors")]
    ScriptExhausted(usize),
    #[error("no receiver wants anything")]
    NothingWanted,
}

/// Per-session coded packet generator.
pub trait Scheme: Send {
    fn next_vector(
        &mut self,
        view: &FeedbackView,
        rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError>;
}

/// Ordered disjoint packet blocks served one after another.
pub type Plan = Vec<Vec<usize>>;

/// How a partition plan is chosen for a given matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanSpec {
    /// Largest want set first (lowest receiver index on ties), then the rest.
    DominantReceiver,
    /// Wanted packets split into this many contiguous, near-equal blocks.
    Equal(usize),
    /// Explicit 0-based blocks.
    Explicit(Plan),
}

impl PlanSpec {
    pub fn resolve(&self, sfm: &Sfm) -> Result<Plan, SchemeError> {
        let plan = match self {
            PlanSpec::DominantReceiver => dominant_receiver_plan(sfm)?,
            PlanSpec::Equal(m) => equal_blocks_plan(sfm, *m)?,
            PlanSpec::Explicit(plan) => plan.clone(),
        };
        validate_plan(sfm, &plan)?;
        Ok(plan)
    }
}

impl fmt::Display for PlanSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanSpec::DominantReceiver => f.write_str("theorem5"),
            PlanSpec::Equal(m) => write!(f, "equal={m}"),
            PlanSpec::Explicit(plan) => {
                let blocks: Vec<String> = plan
                    .iter()
                    .map(|b| {
                        b.iter()
                            .map(|i| (i + 1).to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    })
                    .collect();
                f.write_str(&blocks.join("/"))
            }
        }
    }
}

impl FromStr for PlanSpec {
    type Err = SchemeError;

    /// `theorem5` (alias `dominant`), `equal=M`, or explicit 1-based blocks
    /// separated by `/`, each a comma list of indices or `a-b` ranges.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SchemeError::Parse(format!("plan {s}"));
        match s {
            "theorem5" | "dominant" => return Ok(PlanSpec::DominantReceiver),
            _ => {}
        }
        if let Some(m) = s.strip_prefix("equal=") {
            return m.parse().map(PlanSpec::Equal).map_err(|_| bad());
        }
        let mut plan = Vec::new();
        for block in s.split('/') {
            let mut out = Vec::new();
            for item in block.split(',') {
                let item = item.trim();
                let (lo, hi) = match item.split_once('-') {
                    Some((a, b)) => (a.parse::<usize>(), b.parse::<usize>()),
                    None => (item.parse(), item.parse()),
                };
                let (lo, hi) = (lo.map_err(|_| bad())?, hi.map_err(|_| bad())?);
                if lo == 0 || hi < lo {
                    return Err(bad());
                }
                out.extend(lo - 1..hi);
            }
            plan.push(out);
        }
        Ok(PlanSpec::Explicit(plan))
    }
}

/// Two blocks: the largest want set, then every other wanted packet.
/// The second block is dropped when empty.
pub fn dominant_receiver_plan(sfm: &Sfm) -> Result<Plan, SchemeError> {
    let weights = sfm.weights();
    let max = weights.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(SchemeError::NothingWanted);
    }
    let leader = weights.iter().position(|&w| w == max).expect("max exists");
    let first = sfm.want_set(leader);
    let rest: Vec<usize> = sfm
        .wanted_packets()
        .into_iter()
        .filter(|k| !sfm.wants(leader, *k))
        .collect();
    let mut plan = vec![first];
    if !rest.is_empty() {
        plan.push(rest);
    }
    Ok(plan)
}

/// Wanted packets in index order, cut into `m` contiguous blocks whose sizes
/// differ by at most one.
pub fn equal_blocks_plan(sfm: &Sfm, m: usize) -> Result<Plan, SchemeError> {
    let wanted = sfm.wanted_packets();
    if m == 0 || m > wanted.len() {
        return Err(SchemeError::BadPlan(format!(
            "cannot cut {} wanted packets into {m} blocks",
            wanted.len()
        )));
    }
    let (base, extra) = (wanted.len() / m, wanted.len() % m);
    let mut plan = Vec::with_capacity(m);
    let mut start = 0;
    for b in 0..m {
        let len = base + usize::from(b < extra);
        plan.push(wanted[start..start + len].to_vec());
        start += len;
    }
    Ok(plan)
}

/// Blocks must be nonempty, disjoint, and together cover exactly the packets
/// some receiver wants.
pub fn validate_plan(sfm: &Sfm, plan: &Plan) -> Result<(), SchemeError> {
    let k = sfm.k_packets();
    let mut seen = vec![false; k];
    for (b, block) in plan.iter().enumerate() {
        if block.is_empty() {
            return Err(SchemeError::BadPlan(format!("block {} is empty", b + 1)));
        }
        for &p in block {
            if p >= k {
                return Err(SchemeError::BadPlan(format!("packet {} out of range", p + 1)));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(SchemeError::BadPlan(format!("packet {} appears twice", p + 1)));
            }
        }
    }
    for (p, &covered) in seen.iter().enumerate() {
        if covered != sfm.is_wanted(p) {
            return Err(SchemeError::BadPlan(format!(
                "packet {} {} but {} wanted",
                p + 1,
                if covered { "is planned" } else { "is not planned" },
                if sfm.is_wanted(p) { "is" } else { "is not" }
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeSpec {
    /// Uniform i.i.d. coefficients.
    Rlnc,
    /// Deterministic rows every square subset of which is invertible.
    Mds,
    /// One packet per slot for the receiver with the most residual wants.
    UncodedRoundRobin,
    Partitioned {
        plan: PlanSpec,
        inner: Box<SchemeSpec>,
    },
    /// Binary halving schedule for memoryless receivers.
    MemorylessHalving,
    /// Greedy instantly decodable XOR (a heuristic, not an optimal selection).
    IdncGreedy,
    /// Fixed sequence of vectors; fails once exhausted.
    Scripted(Vec<CodingVector>),
}

impl SchemeSpec {
    pub fn is_xor_only(&self) -> bool {
        match self {
            SchemeSpec::MemorylessHalving | SchemeSpec::IdncGreedy => true,
            SchemeSpec::Partitioned { inner, .. } => inner.is_xor_only(),
            _ => false,
        }
    }

    /// Field order used when none is given: binary for XOR schemes, 256 otherwise.
    pub fn default_field_order(&self) -> u32 {
        if self.is_xor_only() {
            2
        } else {
            256
        }
    }

    fn name(&self) -> String {
        self.to_string()
    }

    fn check_block(&self, field: &Field, k: usize) -> Result<(), SchemeError> {
        match self {
            SchemeSpec::MemorylessHalving | SchemeSpec::IdncGreedy if !field.is_binary() => {
                Err(SchemeError::FieldIncompatible {
                    scheme: self.name(),
                    q: field.order(),
                })
            }
            SchemeSpec::Mds if field.order() as usize <= k => Err(SchemeError::Capacity {
                q: field.order(),
                k,
                slot: 0,
            }),
            SchemeSpec::Partitioned { .. } => Err(SchemeError::BadPlan(
                "nested partitioning is not supported".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Instantiate for a block of `k` packets without partition logic.
    fn instantiate(&self, field: &Field, k: usize) -> Result<Box<dyn Scheme>, SchemeError> {
        self.check_block(field, k)?;
        Ok(match self {
            SchemeSpec::Rlnc => Box::new(Rlnc::new(field.clone())),
            SchemeSpec::Mds => Box::new(Mds::new(field.clone())),
            SchemeSpec::UncodedRoundRobin => Box::new(Uncoded),
            SchemeSpec::MemorylessHalving => Box::new(Halving::default()),
            SchemeSpec::IdncGreedy => Box::new(IdncGreedy),
            SchemeSpec::Scripted(vectors) => Box::new(Scripted::new(vectors.clone())),
            SchemeSpec::Partitioned { .. } => unreachable!("rejected by check_block"),
        })
    }

    /// Check field compatibility and build a fresh instance for one session.
    pub fn build(&self, sfm: &Sfm, field: &Field) -> Result<Box<dyn Scheme>, SchemeError> {
        match self {
            SchemeSpec::Partitioned { plan, inner } => {
                let plan = plan.resolve(sfm)?;
                for block in &plan {
                    inner.check_block(field, block.len())?;
                }
                Ok(Box::new(Partitioned::new(plan, (**inner).clone(), field.clone())))
            }
            _ => self.instantiate(field, sfm.k_packets()),
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::Rlnc => f.write_str("rlnc"),
            SchemeSpec::Mds => f.write_str("mds"),
            SchemeSpec::UncodedRoundRobin => f.write_str("uncoded"),
            SchemeSpec::Partitioned { plan, inner } => write!(f, "partitioned:{plan}:{inner}"),
            SchemeSpec::MemorylessHalving => f.write_str("halving"),
            SchemeSpec::IdncGreedy => f.write_str("idnc-greedy"),
            SchemeSpec::Scripted(v) => write!(f, "scripted({} vectors)", v.len()),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rlnc" => Ok(SchemeSpec::Rlnc),
            "mds" => Ok(SchemeSpec::Mds),
            "uncoded" => Ok(SchemeSpec::UncodedRoundRobin),
            "halving" => Ok(SchemeSpec::MemorylessHalving),
            "idnc-greedy" => Ok(SchemeSpec::IdncGreedy),
            other => {
                let rest = other
                    .strip_prefix("partitioned:")
                    .ok_or_else(|| SchemeError::Parse(other.into()))?;
                let (plan, inner) = rest
                    .split_once(':')
                    .ok_or_else(|| SchemeError::Parse(other.into()))?;
                let inner: SchemeSpec = inner.parse()?;
                if matches!(inner, SchemeSpec::Partitioned { .. }) {
                    return Err(SchemeError::Parse(other.into()));
                }
                Ok(SchemeSpec::Partitioned {
                    plan: plan.parse()?,
                    inner: Box::new(inner),
                })
            }
        }
    }
}

/// Uniformly random coefficients, redrawn if all zero.
pub struct Rlnc {
    field: Field,
}

impl Rlnc {
    pub fn new(field: Field) -> Self {
        Self { field }
    }
}

impl Scheme for Rlnc {
    fn next_vector(
        &mut self,
        view: &FeedbackView,
        rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError> {
        let q = self.field.order();
        loop {
            let v: Vec<Elem> = (0..view.k).map(|_| rng.gen_range(0..q) as Elem).collect();
            let v = CodingVector::new(v);
            if !v.is_zero() {
                return Ok(v);
            }
        }
    }
}

/// Row `t` (1-based) of a Cauchy matrix over `field` with `k` columns:
/// entry `j` is `1 / (x_t + y_j)` with `y_j = j` and `x_t = k + t - 1`.
///
/// Every square submatrix of a Cauchy matrix is nonsingular, so any `w`
/// received rows restricted to any `w` unknown columns are invertible, and no
/// fewer rows can isolate a single unknown.
pub fn cauchy_row(field: &Field, k: usize, t: usize) -> Result<CodingVector, SchemeError> {
    let x = k + t - 1;
    let q = field.order() as usize;
    if t == 0 || x >= q {
        return Err(SchemeError::Capacity {
            q: field.order(),
            k,
            slot: t.saturating_sub(1),
        });
    }
    let x = x as Elem;
    Ok(CodingVector::new(
        (0..k).map(|j| field.inv(x ^ j as Elem)).collect(),
    ))
}

/// Deterministic throughput-optimal schedule: the `t`-th call emits Cauchy row `t`.
pub struct Mds {
    field: Field,
    emitted: usize,
}

impl Mds {
    pub fn new(field: Field) -> Self {
        Self { field, emitted: 0 }
    }
}

impl Scheme for Mds {
    fn next_vector(
        &mut self,
        view: &FeedbackView,
        _rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError> {
        let row = cauchy_row(&self.field, view.k, self.emitted + 1)?;
        self.emitted += 1;
        Ok(row)
    }
}

/// Sends the lowest-indexed residual packet of the receiver with the largest
/// residual want set; among equally large sets, the smallest such packet wins.
pub struct Uncoded;

impl Scheme for Uncoded {
    fn next_vector(
        &mut self,
        view: &FeedbackView,
        _rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError> {
        let packet = view
            .receivers
            .iter()
            .filter(|r| !r.residual.is_empty())
            .map(|r| (std::cmp::Reverse(r.residual.len()), r.residual[0]))
            .min()
            .map(|(_, p)| p)
            .ok_or(SchemeError::NothingWanted)?;
        Ok(CodingVector::unit(view.k, packet))
    }
}

/// Runs a fresh inner scheme on each block in turn. The inner scheme sees the
/// view restricted to the block; coefficients outside it are zero.
pub struct Partitioned {
    plan: Plan,
    inner_spec: SchemeSpec,
    field: Field,
    active: usize,
    inner: Option<Box<dyn Scheme>>,
}

impl Partitioned {
    pub fn new(plan: Plan, inner_spec: SchemeSpec, field: Field) -> Self {
        Self {
            plan,
            inner_spec,
            field,
            active: 0,
            inner: None,
        }
    }

    pub fn active_block(&self) -> usize {
        self.active
    }
}

impl Scheme for Partitioned {
    fn next_vector(
        &mut self,
        view: &FeedbackView,
        rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError> {
        let pending = |block: &[usize]| {
            view.receivers
                .iter()
                .any(|r| r.residual.iter().any(|p| block.contains(p)))
        };
        let next = (self.active..self.plan.len())
            .find(|&b| pending(&self.plan[b]))
            .ok_or(SchemeError::NothingWanted)?;
        if next != self.active || self.inner.is_none() {
            self.active = next;
            self.inner = Some(
                self.inner_spec
                    .instantiate(&self.field, self.plan[next].len())?,
            );
        }
        let block = &self.plan[self.active];
        let local = view.restrict(block);
        let inner = self.inner.as_mut().expect("instantiated above");
        let v = inner.next_vector(&local, rng)?;
        let mut out = CodingVector::zeros(view.k);
        for (&p, &c) in block.iter().zip(v.coeffs()) {
            out.coeffs_mut()[p] = c;
        }
        Ok(out)
    }
}

/// Memoryless halving schedule over GF(2).
///
/// Groups start as one group of all packets. While some group has two or more
/// packets, each slot XORs the lower `ceil(len/2)` packets of every such group
/// and then splits those groups in two. Once all groups are singletons the
/// XOR of every still-wanted packet is sent. If that XOR is undecodable for
/// every incomplete receiver (only possible after erasures), halving restarts
/// on the still-wanted packets.
#[derive(Default)]
pub struct Halving {
    groups: Option<Vec<Vec<usize>>>,
}

impl Halving {
    fn split_step(groups: &mut Vec<Vec<usize>>, k: usize) -> CodingVector {
        let mut support = Vec::new();
        let mut next = Vec::with_capacity(groups.len() * 2);
        for g in groups.drain(..) {
            if g.len() >= 2 {
                let half = g.len().div_ceil(2);
                support.extend_from_slice(&g[..half]);
                next.push(g[..half].to_vec());
                next.push(g[half..].to_vec());
            } else {
                next.push(g);
            }
        }
        *groups = next;
        CodingVector::xor_of(k, support)
    }
}

impl Scheme for Halving {
    fn next_vector(
        &mut self,
        view: &FeedbackView,
        _rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError> {
        let k = view.k;
        let groups = self.groups.get_or_insert_with(|| vec![(0..k).collect()]);
        if groups.iter().any(|g| g.len() >= 2) {
            return Ok(Self::split_step(groups, k));
        }
        let mut wanted = vec![false; k];
        for r in &view.receivers {
            for &p in &r.residual {
                wanted[p] = true;
            }
        }
        let wanted: Vec<usize> = (0..k).filter(|&p| wanted[p]).collect();
        if wanted.is_empty() {
            return Err(SchemeError::NothingWanted);
        }
        let v = CodingVector::xor_of(k, wanted.iter().copied());
        let someone_decodes = view
            .receivers
            .iter()
            .filter(|r| !r.residual.is_empty())
            .any(|r| r.unknowns_in(&v) == 1);
        if someone_decodes {
            return Ok(v);
        }
        *groups = vec![wanted];
        Ok(Self::split_step(groups, k))
    }
}

/// Greedy instantly decodable XOR.
///
/// Receivers are visited by descending residual size. A receiver already left
/// with exactly one unknown is counted as served; one with no unknown in the
/// combination gets its lowest residual packet added if every served receiver
/// still has exactly one unknown afterwards.
pub struct IdncGreedy;

impl Scheme for IdncGreedy {
    fn next_vector(
        &mut self,
        view: &FeedbackView,
        _rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError> {
        let k = view.k;
        let mut order: Vec<usize> = (0..view.receivers.len())
            .filter(|&n| !view.receivers[n].residual.is_empty())
            .collect();
        if order.is_empty() {
            return Err(SchemeError::NothingWanted);
        }
        order.sort_by_key(|&n| std::cmp::Reverse(view.receivers[n].residual.len()));

        let mut target = vec![false; k];
        let mut served: Vec<usize> = Vec::new();
        let unknowns = |n: usize, target: &[bool]| {
            let known = &view.receivers[n].known;
            (0..k).filter(|&p| target[p] && !known[p]).count()
        };
        for &n in &order {
            match unknowns(n, &target) {
                1 => served.push(n),
                0 => {
                    for &p in &view.receivers[n].residual {
                        target[p] = true;
                        if served.iter().all(|&s| unknowns(s, &target) == 1) {
                            served.push(n);
                            break;
                        }
                        target[p] = false;
                    }
                }
                _ => {}
            }
        }
        Ok(CodingVector::xor_of(k, (0..k).filter(|&p| target[p])))
    }
}

/// Replays a fixed schedule.
pub struct Scripted {
    vectors: Vec<CodingVector>,
    pos: usize,
}

impl Scripted {
    pub fn new(vectors: Vec<CodingVector>) -> Self {
        Self { vectors, pos: 0 }
    }
}

impl Scheme for Scripted {
    fn next_vector(
        &mut self,
        _view: &FeedbackView,
        _rng: &mut SimRng,
    ) -> Result<CodingVector, SchemeError> {
        let v = self
            .vectors
            .get(self.pos)
            .cloned()
            .ok_or(SchemeError::ScriptExhausted(self.vectors.len()))?;
        self.pos += 1;
        Ok(v)
    }
}
