use super::segment::union_length;
use super::{regularity, Exact, Partition, PartitionError, Segment};

/// Smallest constant of weak regularity, `sup_j |j| · |ν| / |𝒰(ν)|`.
pub fn weak_regularity_ratio<Q: Exact>(pieces: &[Segment<Q>]) -> Q {
    let sup = pieces.iter().map(Segment::length).max().unwrap_or_else(Q::zero);
    sup * Q::integer(pieces.len() as i64) / union_length(pieces)
}

/// A λ-regular common refinement of `tau` and `mu`.
///
/// With `η` the shortest cell of the joint breakpoint set: for `λ >= 2` each joint cell is
/// cut into pieces of length `η` and the remainder is merged into its last piece (so every
/// piece lies in `[η, 2η)`); for `1 < λ < 2` each cell is cut into equal pieces of length
/// at most `η/M`, `M = ⌈1/(λ−1)⌉`, which keeps the length ratio below `(M+1)/M`; for
/// `λ = 1` every cell is cut into pieces of the rational gcd of the cell lengths.
pub fn joint_lambda_refinement<Q: Exact>(
    tau: &Partition<Q>,
    mu: &Partition<Q>,
    lambda: &Q,
) -> Result<Partition<Q>, PartitionError> {
    if tau.span() != mu.span() {
        return Err(PartitionError::DifferentSegments);
    }
    if *lambda < Q::one() {
        return Err(PartitionError::PreconditionViolated("λ must be >= 1".into()));
    }
    let mut joint: Vec<Q> = tau.breakpoints();
    joint.extend(mu.breakpoints());
    joint.sort();
    joint.dedup();
    let cells: Vec<Q> = joint.windows(2).map(|w| w[1].clone() - w[0].clone()).collect();
    let eta = cells.iter().min().cloned().expect("nonempty partition");
    let two = Q::integer(2);
    let mut points = vec![joint[0].clone()];
    for (start, len) in joint.iter().zip(&cells) {
        let count = if *lambda >= two {
            (len.clone() / eta.clone()).floor_int()
        } else if *lambda > Q::one() {
            let m = (Q::one() / (lambda.clone() - Q::one())).ceil_int();
            let piece = eta.clone() / m;
            (len.clone() / piece).ceil_int()
        } else {
            let g = cells.iter().skip(1).fold(cells[0].clone(), |g, c| g.gcd(c));
            len.clone() / g
        };
        if *lambda >= two {
            // Pieces of length η, the last one absorbing the remainder.
            let k = count.to_f64() as i64;
            for i in 1..k {
                points.push(start.clone() + eta.clone() * Q::integer(i));
            }
        } else {
            let k = count.to_f64() as i64;
            let step = len.clone() / count;
            for i in 1..k {
                points.push(start.clone() + step.clone() * Q::integer(i));
            }
        }
        points.push(start.clone() + len.clone());
    }
    let result = Partition::from_breakpoints(&points)?;
    debug_assert!(regularity(result.pieces(), lambda).0);
    Ok(result)
}

trait CeilInt {
    fn ceil_int(&self) -> Self;
}

impl<Q: Exact> CeilInt for Q {
    fn ceil_int(&self) -> Self {
        let f = self.floor_int();
        if f == *self {
            f
        } else {
            f + Q::one()
        }
    }
}

/// Weak-regularity constant `λ|τ₁| / (|τ| − λ|μ|)` of `τ₁ = τ ∖ μ` for a weakly
/// λ-regular `τ`, returned together with the exact check
/// `sup_{j∈τ₁} |j| <= bound · |𝒰(τ₁)| / |τ₁|`.
pub fn subpartition_bound<Q: Exact>(
    tau: &Partition<Q>,
    removed: &[usize],
    lambda: &Q,
) -> Result<(Q, bool), PartitionError> {
    if !regularity(tau.pieces(), lambda).1 {
        return Err(PartitionError::PreconditionViolated("τ is not weakly λ-regular".into()));
    }
    let mut removed = removed.to_vec();
    removed.sort_unstable();
    removed.dedup();
    if removed.iter().any(|&i| i >= tau.len()) {
        return Err(PartitionError::PreconditionViolated("μ is not a subpartition of τ".into()));
    }
    let total = Q::integer(tau.len() as i64);
    let mu_count = Q::integer(removed.len() as i64);
    if lambda.clone() * mu_count.clone() >= total {
        return Err(PartitionError::PreconditionViolated("λ|μ| >= |τ|".into()));
    }
    let rest: Vec<Segment<Q>> = tau
        .pieces()
        .iter()
        .enumerate()
        .filter(|(i, _)| removed.binary_search(i).is_err())
        .map(|(_, j)| j.clone())
        .collect();
    let rest_count = Q::integer(rest.len() as i64);
    let bound = lambda.clone() * rest_count.clone() / (total - lambda.clone() * mu_count);
    let sup = rest.iter().map(Segment::length).max().expect("λ|μ| < |τ| leaves a piece");
    let certified = sup * rest_count <= bound.clone() * union_length(&rest);
    Ok((bound, certified))
}

/// Outcome of the exhaustive subpartition check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaBetaReport {
    pub subpartitions: usize,
    pub union_bound_failures: usize,
    pub regularity_failures: usize,
}

/// Checks every nonempty subpartition `ν ⊆ μ`: `|𝒰(ν)| <= β m(𝒰(ν))` with
/// `β = |Δ|/m(Δ)`, and that ν is λ-regular for `λ = sup|j| / inf|j|` of μ.
pub fn lambda_beta_exhaustive<Q: Exact>(mu: &Partition<Q>) -> Result<LambdaBetaReport, PartitionError> {
    let k = mu.len();
    if k > 20 {
        return Err(PartitionError::PreconditionViolated("exhaustive check limited to 20 pieces".into()));
    }
    let span = mu.span();
    if span.min().is_zero() {
        return Err(PartitionError::PreconditionViolated("m(Δ) must be positive".into()));
    }
    let beta = span.length() / span.min().clone();
    let lengths: Vec<Q> = mu.pieces().iter().map(Segment::length).collect();
    let lambda = lengths.iter().max().unwrap().clone() / lengths.iter().min().unwrap().clone();
    let mut report = LambdaBetaReport { subpartitions: 0, union_bound_failures: 0, regularity_failures: 0 };
    for mask in 1u32..(1 << k) {
        let nu: Vec<Segment<Q>> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| mu.pieces()[i].clone()).collect();
        report.subpartitions += 1;
        let low = nu.iter().map(|j| j.min().clone()).min().unwrap();
        if union_length(&nu) > beta.clone() * low {
            report.union_bound_failures += 1;
        }
        if !regularity(&nu, &lambda).0 {
            report.regularity_failures += 1;
        }
    }
    Ok(report)
}
