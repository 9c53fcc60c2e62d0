//! One broadcast session: scheme, erasure channel and per-receiver decoders.
//!
//! Each [`Session::step`] asks the scheme for a vector given a feedback
//! snapshot, samples one erasure per receiver, feeds the vector to every
//! receiver that got it and stamps newly decoded packets with the slot index.
//! Slot indices are 1-based and count every transmission, erased or not.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gf::{CodingVector, EliminationState, Field, GfError};
use crate::schemes::{Scheme, SchemeError, SchemeSpec};
use crate::sfm::{ChannelSpec, Sfm};

/// Generator used for erasures and randomized schemes.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("scheme contract violated at slot {slot}: {reason}")]
    Contract { slot: usize, reason: String },
    #[error(transparent)]
    Field(#[from] GfError),
    #[error("every receiver has already completed")]
    AlreadyComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MemoryMode {
    /// Undecodable coded packets are kept for later elimination.
    #[default]
    FullMemory,
    /// Undecodable coded packets are dropped on arrival.
    Memoryless,
}

impl fmt::Display for MemoryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MemoryMode::FullMemory => "full",
            MemoryMode::Memoryless => "memoryless",
        })
    }
}

impl FromStr for MemoryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(MemoryMode::FullMemory),
            "memoryless" => Ok(MemoryMode::Memoryless),
            other => Err(format!("unknown memory mode {other:?} (expected full|memoryless)")),
        }
    }
}

/// What the sender knows about one receiver before a slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceiverView {
    /// Wanted packets not yet decoded, ascending.
    pub residual: Vec<usize>,
    /// Side information plus decoded packets.
    pub known: Vec<bool>,
}

impl ReceiverView {
    /// Number of packets in the support of `v` this receiver does not know.
    pub fn unknowns_in(&self, v: &CodingVector) -> usize {
        v.support().filter(|&p| !self.known[p]).count()
    }

    pub fn is_complete(&self) -> bool {
        self.residual.is_empty()
    }
}

/// Read-only snapshot handed to schemes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackView {
    pub k: usize,
    /// Slots already transmitted.
    pub slot: usize,
    pub receivers: Vec<ReceiverView>,
}

impl FeedbackView {
    /// The same view restricted to `block`, reindexed `0..block.len()`.
    pub fn restrict(&self, block: &[usize]) -> FeedbackView {
        let receivers = self
            .receivers
            .iter()
            .map(|r| ReceiverView {
                residual: block
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| r.residual.contains(p))
                    .map(|(i, _)| i)
                    .collect(),
                known: block.iter().map(|&p| r.known[p]).collect(),
            })
            .collect();
        FeedbackView {
            k: block.len(),
            slot: self.slot,
            receivers,
        }
    }
}

/// Per-receiver decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecoderState {
    Full(EliminationState),
    /// Knowledge is exactly side information plus instantly decoded packets.
    Memoryless { known: Vec<bool> },
}

impl DecoderState {
    pub fn new(mode: MemoryMode, field: &Field, side_info: Vec<bool>) -> Self {
        match mode {
            MemoryMode::FullMemory => {
                DecoderState::Full(EliminationState::with_side_info(field.clone(), side_info))
            }
            MemoryMode::Memoryless => DecoderState::Memoryless { known: side_info },
        }
    }

    pub fn known(&self) -> &[bool] {
        match self {
            DecoderState::Full(s) => s.decoded(),
            DecoderState::Memoryless { known } => known,
        }
    }

    /// Whether receiving `v` would change this decoder.
    pub fn is_innovative(&self, v: &CodingVector) -> Result<bool, GfError> {
        match self {
            DecoderState::Full(s) => s.is_innovative(v),
            DecoderState::Memoryless { known } => {
                Ok(v.support().filter(|&p| !known[p]).count() == 1)
            }
        }
    }

    /// Process a delivered vector; returns newly decoded packets, ascending.
    pub fn receive(&mut self, v: &CodingVector) -> Result<Vec<usize>, GfError> {
        match self {
            DecoderState::Full(s) => s.absorb(v),
            DecoderState::Memoryless { known } => {
                if v.len() != known.len() {
                    return Err(GfError::LengthMismatch {
                        expected: known.len(),
                        got: v.len(),
                    });
                }
                let mut unknown = v.support().filter(|&p| !known[p]);
                match (unknown.next(), unknown.next()) {
                    (Some(p), None) => {
                        known[p] = true;
                        Ok(vec![p])
                    }
                    _ => Ok(Vec::new()),
                }
            }
        }
    }
}

/// One slot of the event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionRecord {
    pub slot: usize,
    pub vector: CodingVector,
    pub erased: Vec<bool>,
    /// `(receiver, packet)` pairs decoded in this slot.
    pub decoded_events: Vec<(usize, usize)>,
}

/// Decode times of a finished (or truncated) session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionResult {
    /// `decode_slot[n][k]`: slot after which receiver `n` decoded wanted packet `k`.
    pub decode_slot: Vec<Vec<Option<usize>>>,
    /// Completion slot per receiver; `Some(0)` for receivers wanting nothing.
    pub completion: Vec<Option<usize>>,
    /// Largest completion slot over completed receivers.
    pub overall: usize,
    pub completed: bool,
    pub slots_used: usize,
}

/// `ceil(50 K / (1 - max erasure probability))`.
pub fn default_max_slots(k: usize, channel: &ChannelSpec) -> usize {
    (50.0 * k as f64 / (1.0 - channel.max_prob())).ceil() as usize
}

/// Seed for trial `trial` of an experiment seeded with `master`.
pub fn derive_seed(master: u64, trial: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(trial))
}

pub struct Session {
    sfm: Sfm,
    channel: ChannelSpec,
    field: Field,
    scheme: Box<dyn Scheme>,
    memory: MemoryMode,
    rng: SimRng,
    decoders: Vec<DecoderState>,
    decode_slot: Vec<Vec<Option<usize>>>,
    completion: Vec<Option<usize>>,
    log: Vec<TransmissionRecord>,
}

impl Session {
    pub fn new(
        sfm: Sfm,
        channel: ChannelSpec,
        field: Field,
        scheme: &SchemeSpec,
        memory: MemoryMode,
        seed: u64,
    ) -> Result<Self, SessionError> {
        let built = scheme.build(&sfm, &field)?;
        Self::with_scheme(sfm, channel, field, built, memory, seed)
    }

    /// Like [`Session::new`] with an already constructed scheme.
    pub fn with_scheme(
        sfm: Sfm,
        channel: ChannelSpec,
        field: Field,
        scheme: Box<dyn Scheme>,
        memory: MemoryMode,
        seed: u64,
    ) -> Result<Self, SessionError> {
        if channel.len() != sfm.n_receivers() {
            return Err(SessionError::Dimension(format!(
                "channel has {} receivers, matrix has {}",
                channel.len(),
                sfm.n_receivers()
            )));
        }
        let decoders = (0..sfm.n_receivers())
            .map(|n| DecoderState::new(memory, &field, sfm.side_info(n)))
            .collect();
        let completion = (0..sfm.n_receivers())
            .map(|n| (sfm.weight(n) == 0).then_some(0))
            .collect();
        Ok(Self {
            decode_slot: vec![vec![None; sfm.k_packets()]; sfm.n_receivers()],
            completion,
            decoders,
            sfm,
            channel,
            field,
            scheme,
            memory,
            rng: SimRng::seed_from_u64(seed),
            log: Vec::new(),
        })
    }

    pub fn sfm(&self) -> &Sfm {
        &self.sfm
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn memory_mode(&self) -> MemoryMode {
        self.memory
    }

    pub fn slot(&self) -> usize {
        self.log.len()
    }

    pub fn log(&self) -> &[TransmissionRecord] {
        &self.log
    }

    pub fn decoder(&self, n: usize) -> &DecoderState {
        &self.decoders[n]
    }

    pub fn is_complete(&self) -> bool {
        self.completion.iter().all(Option::is_some)
    }

    pub fn receiver_complete(&self, n: usize) -> bool {
        self.completion[n].is_some()
    }

    fn residual(&self, n: usize) -> Vec<usize> {
        (0..self.sfm.k_packets())
            .filter(|&k| self.sfm.wants(n, k) && self.decode_slot[n][k].is_none())
            .collect()
    }

    pub fn feedback_view(&self) -> FeedbackView {
        FeedbackView {
            k: self.sfm.k_packets(),
            slot: self.slot(),
            receivers: (0..self.sfm.n_receivers())
                .map(|n| ReceiverView {
                    residual: self.residual(n),
                    known: self.decoders[n].known().to_vec(),
                })
                .collect(),
        }
    }

    pub fn step(&mut self) -> Result<&TransmissionRecord, SessionError> {
        if self.is_complete() {
            return Err(SessionError::AlreadyComplete);
        }
        let slot = self.slot() + 1;
        let view = self.feedback_view();
        let vector = self.scheme.next_vector(&view, &mut self.rng)?;
        let contract = |reason: String| SessionError::Contract { slot, reason };
        if vector.len() != self.sfm.k_packets() {
            return Err(contract(format!(
                "vector length {} != {}",
                vector.len(),
                self.sfm.k_packets()
            )));
        }
        if vector.is_zero() {
            return Err(contract("all-zero vector".into()));
        }
        if let Some(&c) = vector.coeffs().iter().find(|&&c| !self.field.contains(c.into())) {
            return Err(contract(format!("coefficient {c} outside {}", self.field.spec())));
        }

        let n_receivers = self.sfm.n_receivers();
        let mut erased = Vec::with_capacity(n_receivers);
        let mut decoded_events = Vec::new();
        for n in 0..n_receivers {
            let lost = self.rng.gen_bool(self.channel.erasure_prob(n));
            erased.push(lost);
            if lost || self.completion[n].is_some() {
                continue;
            }
            for k in self.decoders[n].receive(&vector)? {
                debug_assert!(self.sfm.wants(n, k));
                self.decode_slot[n][k] = Some(slot);
                decoded_events.push((n, k));
            }
            if self.residual(n).is_empty() {
                self.completion[n] = Some(slot);
            }
        }
        self.log.push(TransmissionRecord {
            slot,
            vector,
            erased,
            decoded_events,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    /// Step until every receiver completes or `max_slots` slots have been sent.
    /// A scheme that runs out of field capacity ends the session early; the
    /// result is then truncated like one that hit `max_slots`.
    pub fn run(&mut self, max_slots: usize) -> Result<SessionResult, SessionError> {
        while !self.is_complete() && self.slot() < max_slots {
            match self.step() {
                Ok(_) => {}
                Err(SessionError::Scheme(SchemeError::Capacity { .. })) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(self.result())
    }

    pub fn result(&self) -> SessionResult {
        SessionResult {
            decode_slot: self.decode_slot.clone(),
            completion: self.completion.clone(),
            overall: self.completion.iter().flatten().copied().max().unwrap_or(0),
            completed: self.is_complete(),
            slots_used: self.slot(),
        }
    }
}
