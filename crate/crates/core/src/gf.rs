//! Arithmetic over GF(2^m) and incremental Gaussian elimination.
//!
//! Field elements are `u16` values below `2^m`. Addition is XOR; multiplication
//! goes through log/exp tables built once per [`Field`] from a primitive element
//! found by brute force, so any irreducible reduction polynomial works (it need
//! not be primitive, e.g. the AES polynomial `0x11B`).
//!
//! [`EliminationState`] is the per-receiver decoder: it keeps the received
//! coding vectors, reduced by the receiver's side information, as a basis in
//! reduced row echelon form. Packet `k` is decodable exactly when the unit row
//! `e_k` is one of the basis rows.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A field element. Only the low `m` bits are meaningful.
pub type Elem = u16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("field degree {0} outside 1..=16")]
    BadDegree(u8),
    #[error("polynomial {poly:#x} is not an irreducible polynomial of degree {m}")]
    Reducible { m: u8, poly: u32 },
    #[error("element {value:#x} is outside GF(2^{m})")]
    OutOfRange { value: u32, m: u8 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("vector length {got} does not match block size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Degree and reduction polynomial of a binary extension field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    m: u8,
    poly: u32,
}

impl FieldSpec {
    /// GF(2) with reduction polynomial `x + 1`.
    pub const GF2: FieldSpec = FieldSpec { m: 1, poly: 0x3 };
    /// GF(4) with `x^2 + x + 1`.
    pub const GF4: FieldSpec = FieldSpec { m: 2, poly: 0x7 };
    /// GF(256) with the AES polynomial `x^8 + x^4 + x^3 + x + 1`.
    pub const GF256: FieldSpec = FieldSpec { m: 8, poly: 0x11B };

    pub fn new(m: u8, poly: u32) -> Result<Self, GfError> {
        if !(1..=16).contains(&m) {
            return Err(GfError::BadDegree(m));
        }
        if degree(poly) != Some(u32::from(m)) || !is_irreducible(poly) {
            return Err(GfError::Reducible { m, poly });
        }
        Ok(Self { m, poly })
    }

    /// The default field for a given order: 2, 4, 16, 256 or 65536.
    pub fn for_order(q: u32) -> Result<Self, GfError> {
        match q {
            2 => Ok(Self::GF2),
            4 => Ok(Self::GF4),
            16 => Self::new(4, 0x13),
            256 => Ok(Self::GF256),
            65536 => Self::new(16, 0x1100B),
            _ => Err(GfError::OutOfRange { value: q, m: 0 }),
        }
    }

    pub fn degree(&self) -> u8 {
        self.m
    }

    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    /// Number of field elements, `2^m`.
    pub fn order(&self) -> u32 {
        1u32 << self.m
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.order())
    }
}

fn degree(poly: u32) -> Option<u32> {
    (poly != 0).then(|| 31 - poly.leading_zeros())
}

fn poly_mod(mut a: u32, b: u32) -> u32 {
    let db = degree(b).expect("nonzero divisor");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Trial division by every polynomial of degree `1..=deg/2`.
pub fn is_irreducible(poly: u32) -> bool {
    let Some(d) = degree(poly) else {
        return false;
    };
    if d == 0 {
        return false;
    }
    for divisor in 2u32..(1u32 << (d / 2 + 1)) {
        if poly_mod(poly, divisor) == 0 {
            return false;
        }
    }
    true
}

/// Shift-and-add multiplication modulo `poly`. Used to build the tables.
fn peasant_mul(mut a: u32, mut b: u32, m: u8, poly: u32) -> u32 {
    let top = 1u32 << m;
    let mut acc = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= poly;
        }
    }
    acc
}

/// A field with precomputed log/exp tables. Cloning is cheap.
#[derive(Clone)]
pub struct Field {
    spec: FieldSpec,
    exp: Arc<[Elem]>,
    log: Arc<[u32]>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({}, poly={:#x})", self.spec, self.spec.poly)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Eq for Field {}

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        let q = spec.order();
        let n = q - 1;
        let generator = (1..q)
            .find(|&g| {
                if n == 1 {
                    return true;
                }
                let mut x = g;
                for i in 1..n {
                    if x == 1 {
                        return i == n;
                    }
                    x = peasant_mul(x, g, spec.m, spec.poly);
                }
                x == 1
            })
            .expect("every finite field has a primitive element");
        let mut exp = vec![0 as Elem; 2 * n as usize];
        let mut log = vec![0u32; q as usize];
        let mut x = 1u32;
        for i in 0..n {
            exp[i as usize] = x as Elem;
            exp[(i + n) as usize] = x as Elem;
            log[x as usize] = i;
            x = peasant_mul(x, generator, spec.m, spec.poly);
        }
        Self {
            spec,
            exp: exp.into(),
            log: log.into(),
        }
    }

    pub fn gf2() -> Self {
        Self::new(FieldSpec::GF2)
    }

    pub fn gf256() -> Self {
        Self::new(FieldSpec::GF256)
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn order(&self) -> u32 {
        self.spec.order()
    }

    pub fn is_binary(&self) -> bool {
        self.spec.m == 1
    }

    pub fn contains(&self, a: u32) -> bool {
        a < self.order()
    }

    fn check(&self, a: u32) -> Result<Elem, GfError> {
        if self.contains(a) {
            Ok(a as Elem)
        } else {
            Err(GfError::OutOfRange {
                value: a,
                m: self.spec.m,
            })
        }
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    /// Multiplicative inverse. Panics on zero; see [`Field::try_inv`].
    #[inline]
    pub fn inv(&self, a: Elem) -> Elem {
        assert!(a != 0, "inverse of zero");
        let n = self.order() - 1;
        self.exp[((n - self.log[a as usize]) % n) as usize]
    }

    pub fn try_add(&self, a: u32, b: u32) -> Result<Elem, GfError> {
        Ok(self.add(self.check(a)?, self.check(b)?))
    }

    pub fn try_mul(&self, a: u32, b: u32) -> Result<Elem, GfError> {
        Ok(self.mul(self.check(a)?, self.check(b)?))
    }

    pub fn try_inv(&self, a: u32) -> Result<Elem, GfError> {
        match self.check(a)? {
            0 => Err(GfError::DivisionByZero),
            a => Ok(self.inv(a)),
        }
    }

    /// The `i`-th element in the natural enumeration `0, 1, ..., q-1`.
    pub fn element(&self, i: u32) -> Option<Elem> {
        self.contains(i).then_some(i as Elem)
    }
}

/// A length-K vector of coding coefficients, one per data packet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodingVector(Vec<Elem>);

impl CodingVector {
    pub fn new(coeffs: Vec<Elem>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0; k])
    }

    /// The unit vector selecting packet `index` alone.
    pub fn unit(k: usize, index: usize) -> Self {
        let mut v = Self::zeros(k);
        v.0[index] = 1;
        v
    }

    /// Coefficient 1 on every packet in `support` (an XOR combination).
    pub fn xor_of(k: usize, support: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(k);
        for i in support {
            v.0[i] = 1;
        }
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn coeffs(&self) -> &[Elem] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [Elem] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Elem> {
        self.0
    }

    /// Packet indices with a nonzero coefficient.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, _)| i)
    }
}

impl From<Vec<Elem>> for CodingVector {
    fn from(v: Vec<Elem>) -> Self {
        Self(v)
    }
}

impl fmt::Display for CodingVector {
    /// Bitstring for binary vectors, otherwise a parenthesized tuple.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&c| c <= 1) {
            for &c in &self.0 {
                write!(f, "{c}")?;
            }
            Ok(())
        } else {
            write!(f, "(")?;
            for (i, c) in self.0.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        }
    }
}

/// Zero every coordinate the receiver already holds.
pub fn reduce_by_side_info(v: &CodingVector, side_info: &[bool]) -> CodingVector {
    let mut out = v.clone();
    for (c, &known) in out.0.iter_mut().zip(side_info) {
        if known {
            *c = 0;
        }
    }
    out
}

/// Full-memory decoder for one receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationState {
    field: Field,
    k: usize,
    /// RREF basis, sorted by pivot column.
    rows: Vec<Vec<Elem>>,
    pivots: Vec<usize>,
    decoded: Vec<bool>,
    side_info: Vec<bool>,
}

impl EliminationState {
    pub fn new(field: Field, k: usize) -> Self {
        Self::with_side_info(field, vec![false; k])
    }

    pub fn with_side_info(field: Field, side_info: Vec<bool>) -> Self {
        Self {
            field,
            k: side_info.len(),
            rows: Vec::new(),
            pivots: Vec::new(),
            decoded: side_info.clone(),
            side_info,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Elem>] {
        &self.rows
    }

    pub fn side_info(&self) -> &[bool] {
        &self.side_info
    }

    /// Side information plus every packet whose unit row is in the basis.
    pub fn decoded(&self) -> &[bool] {
        &self.decoded
    }

    pub fn is_decoded(&self, k: usize) -> bool {
        self.decoded[k]
    }

    /// True once every packet is known.
    pub fn is_full(&self) -> bool {
        self.decoded.iter().all(|&d| d)
    }

    /// Reduce `v` by side information and the current basis.
    fn residual(&self, v: &CodingVector) -> Result<Vec<Elem>, GfError> {
        if v.len() != self.k {
            return Err(GfError::LengthMismatch {
                expected: self.k,
                got: v.len(),
            });
        }
        let mut w = reduce_by_side_info(v, &self.side_info).into_inner();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let factor = w[p];
            if factor != 0 {
                for (x, &r) in w.iter_mut().zip(row) {
                    *x ^= self.field.mul(factor, r);
                }
            }
        }
        Ok(w)
    }

    pub fn is_innovative(&self, v: &CodingVector) -> Result<bool, GfError> {
        Ok(self.residual(v)?.iter().any(|&c| c != 0))
    }

    /// Insert `v` into the basis and return the packets that became decodable,
    /// in increasing order. Dependent vectors are dropped.
    pub fn absorb(&mut self, v: &CodingVector) -> Result<Vec<usize>, GfError> {
        let mut w = self.residual(v)?;
        let Some(lead) = w.iter().position(|&c| c != 0) else {
            return Ok(Vec::new());
        };
        let scale = self.field.inv(w[lead]);
        for x in w.iter_mut() {
            *x = self.field.mul(*x, scale);
        }
        for row in self.rows.iter_mut() {
            let factor = row[lead];
            if factor != 0 {
                for (r, &x) in row.iter_mut().zip(&w) {
                    *r ^= self.field.mul(factor, x);
                }
            }
        }
        let at = self.pivots.partition_point(|&p| p < lead);
        self.pivots.insert(at, lead);
        self.rows.insert(at, w);

        let mut newly = Vec::new();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if !self.decoded[p] && row.iter().enumerate().all(|(i, &c)| i == p || c == 0) {
                self.decoded[p] = true;
                newly.push(p);
            }
        }
        newly.sort_unstable();
        Ok(newly)
    }

    /// Canonical encoding of the knowledge subspace (side info + basis).
    /// Two states with equal signatures decode identically from here on.
    pub fn signature(&self) -> Vec<Elem> {
        let mut sig = Vec::with_capacity(self.k * (self.rows.len() + 1));
        sig.extend(self.side_info.iter().map(|&b| b as Elem));
        for row in &self.rows {
            sig.extend_from_slice(row);
        }
        sig
    }
}
