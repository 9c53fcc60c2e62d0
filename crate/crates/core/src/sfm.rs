//! State feedback matrices, erasure channels and the instance generators.
//!
//! An [`Sfm`] row per receiver, a column per data packet; a set entry means the
//! receiver is missing that packet and wants it. Everything else is side
//! information.
//!
//! Text format: one receiver per line, `0`/`1` characters, all lines the same
//! length, `#` lines are comments.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SfmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid generator parameters: {0}")]
    BadParams(String),
    #[error("matrix must have at least one receiver and one packet")]
    Empty,
    #[error("ragged matrix: row {row} has {got} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sfm {
    k: usize,
    wants: Vec<Vec<bool>>,
}

impl Sfm {
    pub fn new(wants: Vec<Vec<bool>>) -> Result<Self, SfmError> {
        let k = wants.first().map(Vec::len).unwrap_or(0);
        if wants.is_empty() || k == 0 {
            return Err(SfmError::Empty);
        }
        if let Some((row, r)) = wants.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(SfmError::Ragged {
                row,
                expected: k,
                got: r.len(),
            });
        }
        Ok(Self { k, wants })
    }

    /// Build from `0`/`1` row strings. Panics on malformed input; meant for
    /// literals in tests and examples.
    pub fn from_rows(rows: &[&str]) -> Self {
        rows.join("\n").parse().expect("valid matrix literal")
    }

    pub fn n_receivers(&self) -> usize {
        self.wants.len()
    }

    pub fn k_packets(&self) -> usize {
        self.k
    }

    pub fn wants(&self, n: usize, k: usize) -> bool {
        self.wants[n][k]
    }

    pub fn row(&self, n: usize) -> &[bool] {
        &self.wants[n]
    }

    /// Indices of the packets receiver `n` wants, ascending.
    pub fn want_set(&self, n: usize) -> Vec<usize> {
        (0..self.k).filter(|&k| self.wants[n][k]).collect()
    }

    /// Everything receiver `n` already holds.
    pub fn side_info(&self, n: usize) -> Vec<bool> {
        self.wants[n].iter().map(|&w| !w).collect()
    }

    pub fn weight(&self, n: usize) -> usize {
        self.wants[n].iter().filter(|&&w| w).count()
    }

    pub fn weights(&self) -> Vec<usize> {
        (0..self.n_receivers()).map(|n| self.weight(n)).collect()
    }

    /// Number of ones in the matrix.
    pub fn total_wants(&self) -> usize {
        self.weights().iter().sum()
    }

    pub fn max_weight(&self) -> usize {
        self.weights().into_iter().max().unwrap_or(0)
    }

    pub fn is_wanted(&self, k: usize) -> bool {
        self.wants.iter().any(|r| r[k])
    }

    /// Packets wanted by at least one receiver, ascending.
    pub fn wanted_packets(&self) -> Vec<usize> {
        (0..self.k).filter(|&k| self.is_wanted(k)).collect()
    }

    pub fn column_sum(&self, k: usize) -> usize {
        self.wants.iter().filter(|r| r[k]).count()
    }
}

impl fmt::Display for Sfm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.wants {
            for &w in row {
                f.write_str(if w { "1" } else { "0" })?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

impl FromStr for Sfm {
    type Err = SfmError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut wants: Vec<Vec<bool>> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim_end_matches('\r').trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let row = trimmed
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(SfmError::Parse {
                        line,
                        message: format!("unexpected character {other:?}"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = wants.first() {
                if first.len() != row.len() {
                    return Err(SfmError::Parse {
                        line,
                        message: format!("row has {} entries, expected {}", row.len(), first.len()),
                    });
                }
            }
            wants.push(row);
        }
        Sfm::new(wants)
    }
}

/// Serialize with an optional comment header (each header line gets a `# ` prefix).
pub fn serialize_sfm(sfm: &Sfm, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    out.push_str(&sfm.to_string());
    out
}

pub fn parse_sfm(text: &str) -> Result<Sfm, SfmError> {
    text.parse()
}

fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

/// Every pair of packets wanted by its own receiver: `K(K-1)/2` rows in
/// lexicographic pair order.
pub fn pair_wants(k: usize) -> Result<Sfm, SfmError> {
    if k < 2 {
        return Err(SfmError::BadParams(format!("need K >= 2, got {k}")));
    }
    let rows = pairs(k)
        .map(|(i, j)| {
            let mut r = vec![false; k];
            r[i] = true;
            r[j] = true;
            r
        })
        .collect();
    Sfm::new(rows)
}

/// `m` single-packet receivers per packet (packet-major), followed by the
/// rows of [`pair_wants`]. `mK + K(K-1)/2` receivers in total.
pub fn pair_and_singleton_wants(k: usize, m: usize) -> Result<Sfm, SfmError> {
    if k < 2 || m < 1 {
        return Err(SfmError::BadParams(format!("need K >= 2 and m >= 1, got K={k}, m={m}")));
    }
    let mut rows = Vec::with_capacity(m * k + k * (k - 1) / 2);
    for p in 0..k {
        for _ in 0..m {
            let mut r = vec![false; k];
            r[p] = true;
            rows.push(r);
        }
    }
    rows.extend(pair_wants(k)?.wants);
    Sfm::new(rows)
}

/// Two packets, three receivers: `10`, `01`, `11`.
pub fn two_packet_triangle() -> Sfm {
    Sfm::new(vec![vec![true, false], vec![false, true], vec![true, true]])
        .expect("static instance")
}

/// Receiver 1 wants packets `1..=w1`; each of the other `n - 1` receivers wants
/// one distinct packet outside that block. `K = w1 + n - 1`.
pub fn dominant_block(w1: usize, n: usize) -> Result<Sfm, SfmError> {
    if w1 < 1 || n < 2 {
        return Err(SfmError::BadParams(format!("need w1 >= 1 and N >= 2, got w1={w1}, N={n}")));
    }
    let k = w1 + n - 1;
    let mut rows = Vec::with_capacity(n);
    let mut first = vec![false; k];
    first[..w1].fill(true);
    rows.push(first);
    for j in 1..n {
        let mut r = vec![false; k];
        r[w1 + j - 1] = true;
        rows.push(r);
    }
    Sfm::new(rows)
}

/// Independent Bernoulli(`p_want`) entries from a seeded generator.
pub fn random_sfm(n: usize, k: usize, p_want: f64, seed: u64) -> Result<Sfm, SfmError> {
    if !(p_want > 0.0 && p_want <= 1.0) {
        return Err(SfmError::BadParams(format!("p_want must be in (0, 1], got {p_want}")));
    }
    if n == 0 || k == 0 {
        return Err(SfmError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_bool(p_want)).collect())
        .collect();
    Sfm::new(rows)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("receiver {receiver}: erasure probability {p} outside [0, 1)")]
    BadProbability { receiver: usize, p: f64 },
}

/// Independent per-receiver Bernoulli erasure probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    erasure_probs: Vec<f64>,
}

impl ChannelSpec {
    pub fn new(erasure_probs: Vec<f64>) -> Result<Self, ChannelError> {
        for (receiver, &p) in erasure_probs.iter().enumerate() {
            if !(0.0..1.0).contains(&p) {
                return Err(ChannelError::BadProbability { receiver, p });
            }
        }
        Ok(Self { erasure_probs })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self, ChannelError> {
        Self::new(vec![p; n])
    }

    pub fn erasure_free(n: usize) -> Self {
        Self {
            erasure_probs: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.erasure_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.erasure_probs.is_empty()
    }

    pub fn erasure_prob(&self, n: usize) -> f64 {
        self.erasure_probs[n]
    }

    pub fn probs(&self) -> &[f64] {
        &self.erasure_probs
    }

    pub fn max_prob(&self) -> f64 {
        self.erasure_probs.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_erasure_free(&self) -> bool {
        self.erasure_probs.iter().all(|&p| p == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_wants_small() {
        assert_eq!(pair_wants(2).unwrap(), Sfm::from_rows(&["11"]));
        assert_eq!(pair_wants(3).unwrap(), Sfm::from_rows(&["110", "101", "011"]));
        let a = pair_wants(4).unwrap();
        assert_eq!(a.n_receivers(), 6);
        assert!(a.weights().iter().all(|&w| w == 2));
        assert!(pair_wants(1).is_err());
    }

    #[test]
    fn pair_wants_covers_each_pair_once() {
        for k in 2..=9 {
            let a = pair_wants(k).unwrap();
            assert_eq!(a.n_receivers(), k * (k - 1) / 2);
            for (i, j) in pairs(k) {
                let shared = (0..a.n_receivers())
                    .filter(|&n| a.wants(n, i) && a.wants(n, j))
                    .count();
                assert_eq!(shared, 1);
            }
        }
    }

    #[test]
    fn pair_and_singleton_shapes() {
        assert_eq!(
            pair_and_singleton_wants(2, 1).unwrap(),
            Sfm::from_rows(&["10", "01", "11"])
        );
        assert_eq!(pair_and_singleton_wants(3, 2).unwrap().n_receivers(), 9);
        assert!(pair_and_singleton_wants(2, 0).is_err());
        for (k, m) in [(3, 1), (4, 2), (6, 3)] {
            let a = pair_and_singleton_wants(k, m).unwrap();
            for p in 0..k {
                assert_eq!(a.column_sum(p), m + k - 1);
            }
        }
    }

    #[test]
    fn triangle_instance() {
        let t = two_packet_triangle();
        assert_eq!(t, Sfm::from_rows(&["10", "01", "11"]));
        assert_eq!(t.weights(), vec![1, 1, 2]);
        assert_eq!(t.max_weight(), 2);
    }

    #[test]
    fn dominant_block_shapes() {
        let s = dominant_block(2, 3).unwrap();
        assert_eq!(s, Sfm::from_rows(&["1100", "0010", "0001"]));
        let s = dominant_block(5, 50).unwrap();
        assert_eq!(s.k_packets(), 54);
        assert_eq!(s.weights().iter().filter(|&&w| w == 1).count(), 49);
        assert_eq!(s.max_weight(), s.weight(0));
        assert!(dominant_block(0, 3).is_err());
        assert!(dominant_block(2, 1).is_err());
    }

    #[test]
    fn random_generator() {
        let full = random_sfm(4, 5, 1.0, 3).unwrap();
        assert_eq!(full.total_wants(), 20);
        assert_eq!(random_sfm(20, 10, 0.5, 7).unwrap(), random_sfm(20, 10, 0.5, 7).unwrap());
        assert!(random_sfm(2, 2, 0.0, 1).is_err());

        let seeds = 400;
        let mean: f64 = (0..seeds)
            .map(|s| random_sfm(20, 10, 0.5, s).unwrap().total_wants() as f64 / 20.0)
            .sum::<f64>()
            / seeds as f64;
        // row weight is Binomial(10, 0.5): sd of the grand mean is sqrt(2.5/8000)
        assert!((mean - 5.0).abs() < 0.06, "mean row weight {mean}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!("10\n01\n11".parse::<Sfm>().unwrap(), two_packet_triangle());
        match "10\n011".parse::<Sfm>() {
            Err(SfmError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match "# header\n10\n1x".parse::<Sfm>() {
            Err(SfmError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!("# only a comment\n".parse::<Sfm>(), Err(SfmError::Empty));
    }

    #[test]
    fn serialize_with_header_round_trips() {
        let a = pair_wants(4).unwrap();
        let text = serialize_sfm(&a, &["generator a1 k=4".into()]);
        assert!(text.starts_with("# generator"));
        assert_eq!(parse_sfm(&text).unwrap(), a);
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelSpec::new(vec![0.0, 0.99]).is_ok());
        assert!(ChannelSpec::new(vec![1.0]).is_err());
        assert!(ChannelSpec::new(vec![-0.1]).is_err());
        assert_eq!(ChannelSpec::uniform(3, 0.25).unwrap().max_prob(), 0.25);
    }
}
