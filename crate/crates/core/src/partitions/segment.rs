use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Exact, PartitionError};

/// Segment `[m, M]` with `0 <= m < M`.
///
/// `m = 0` is admitted so that partitions of `[0, 1]` can be written down; the ratio
/// `ϱ = M/m` is then undefined.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Segment<Q: Exact> {
    m: Q,
    big_m: Q,
}

impl<Q: Exact> Segment<Q> {
    pub fn new(m: Q, big_m: Q) -> Result<Self, PartitionError> {
        if m.is_negative() || m >= big_m {
            return Err(PartitionError::InvalidSegment { m: m.to_string(), big_m: big_m.to_string() });
        }
        Ok(Segment { m, big_m })
    }

    /// `[p1/q1, p2/q2]` from integer pairs.
    pub fn of(lower: (i64, i64), upper: (i64, i64)) -> Result<Self, PartitionError> {
        Self::new(Q::ratio(lower.0, lower.1), Q::ratio(upper.0, upper.1))
    }

    pub fn min(&self) -> &Q {
        &self.m
    }

    pub fn max(&self) -> &Q {
        &self.big_m
    }

    pub fn length(&self) -> Q {
        self.big_m.clone() - self.m.clone()
    }

    /// `ϱ(Δ) = M/m`, `None` when `m = 0`.
    pub fn ratio(&self) -> Option<Q> {
        (!self.m.is_zero()).then(|| self.big_m.clone() / self.m.clone())
    }

    pub fn contains(&self, other: &Segment<Q>) -> bool {
        self.m <= other.m && other.big_m <= self.big_m
    }

    /// Endpoints as floats.
    pub fn to_f64(&self) -> (f64, f64) {
        (self.m.to_f64(), self.big_m.to_f64())
    }
}

impl<Q: Exact> Serialize for Segment<Q> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.m.to_string(), self.big_m.to_string()].serialize(s)
    }
}

impl<'de, Q: Exact> Deserialize<'de> for Segment<Q> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [a, b] = <[String; 2]>::deserialize(d)?;
        let parse = |t: &str| Q::parse(t).ok_or_else(|| D::Error::custom(PartitionError::Parse(t.to_string())));
        Segment::new(parse(&a)?, parse(&b)?).map_err(D::Error::custom)
    }
}

/// Total length of a family of non-overlapping segments, `|𝒰(ν)|`.
pub fn union_length<Q: Exact>(pieces: &[Segment<Q>]) -> Q {
    pieces.iter().fold(Q::zero(), |acc, j| acc + j.length())
}

fn longest<Q: Exact>(pieces: &[Segment<Q>]) -> Q {
    pieces.iter().map(Segment::length).max().unwrap_or_else(Q::zero)
}

fn shortest<Q: Exact>(pieces: &[Segment<Q>]) -> Q {
    pieces.iter().map(Segment::length).min().unwrap_or_else(Q::zero)
}

/// Ordered contiguous pieces `j_1, …, j_K` with `M(j_k) = m(j_{k+1})`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition<Q: Exact> {
    pieces: Vec<Segment<Q>>,
}

impl<Q: Exact> Partition<Q> {
    pub fn new(pieces: Vec<Segment<Q>>) -> Result<Self, PartitionError> {
        if pieces.is_empty() || pieces.windows(2).any(|w| w[0].big_m != w[1].m) {
            return Err(PartitionError::NotContiguous);
        }
        Ok(Partition { pieces })
    }

    /// Partition of `[b_0, b_K]` at the given increasing breakpoints.
    pub fn from_breakpoints(points: &[Q]) -> Result<Self, PartitionError> {
        let pieces =
            points.windows(2).map(|w| Segment::new(w[0].clone(), w[1].clone())).collect::<Result<Vec<_>, _>>()?;
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[Segment<Q>] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// The partitioned segment `𝒰(μ)`.
    pub fn span(&self) -> Segment<Q> {
        Segment { m: self.pieces[0].m.clone(), big_m: self.pieces[self.len() - 1].big_m.clone() }
    }

    pub fn breakpoints(&self) -> Vec<Q> {
        let mut points: Vec<Q> = self.pieces.iter().map(|j| j.m.clone()).collect();
        points.push(self.span().big_m);
        points
    }

    /// `sup_j |j|`.
    pub fn mesh_size(&self) -> Q {
        longest(&self.pieces)
    }

    /// Whether every piece of `self` lies inside a piece of `coarser`.
    pub fn refines(&self, coarser: &Partition<Q>) -> bool {
        self.span() == coarser.span() && self.pieces.iter().all(|j| coarser.pieces.iter().any(|c| c.contains(j)))
    }

    /// Pieces as float pairs, bottom first.
    pub fn to_f64(&self) -> Vec<(f64, f64)> {
        self.pieces.iter().map(Segment::to_f64).collect()
    }
}

impl<Q: Exact> Serialize for Partition<Q> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.pieces.serialize(s)
    }
}

impl<'de, Q: Exact> Deserialize<'de> for Partition<Q> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Partition::new(Vec::<Segment<Q>>::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// `(λ-regular, weakly λ-regular)` for a family of segments, measured on its union.
pub fn regularity<Q: Exact>(pieces: &[Segment<Q>], lambda: &Q) -> (bool, bool) {
    let sup = longest(pieces);
    let strong = sup <= lambda.clone() * shortest(pieces);
    let count = Q::integer(pieces.len() as i64);
    let weak = sup * count <= lambda.clone() * union_length(pieces);
    (strong, weak)
}

/// `d_n(Δ)`: `2^n` equal pieces.
pub fn make_dyadic<Q: Exact>(segment: &Segment<Q>, n: u32) -> Partition<Q> {
    let count = 1i64 << n;
    let step = segment.length() / Q::integer(count);
    let points: Vec<Q> = (0..=count)
        .map(|i| if i == count { segment.big_m.clone() } else { segment.m.clone() + step.clone() * Q::integer(i) })
        .collect();
    Partition::from_breakpoints(&points).expect("dyadic breakpoints increase")
}

/// Pieces `[2^k m, 2^{k+1} m]` with the last piece absorbing the remainder, so that
/// every piece satisfies `m(j) <= |j| <= 3 m(j)`. Needs `|Δ| >= m(Δ) > 0`.
pub fn doubling_decomposition<Q: Exact>(segment: &Segment<Q>) -> Result<Partition<Q>, PartitionError> {
    if segment.m.is_zero() || segment.length() < segment.m {
        return Err(PartitionError::PreconditionViolated("doubling decomposition needs |Δ| >= m(Δ) > 0".into()));
    }
    let two = Q::integer(2);
    let mut points = vec![segment.m.clone()];
    let mut current = segment.m.clone();
    // Stop once the next doubling piece would leave less than a full piece behind.
    while current.clone() * Q::integer(4) <= segment.big_m {
        current = current * two.clone();
        points.push(current.clone());
    }
    points.push(segment.big_m.clone());
    Partition::from_breakpoints(&points)
}
