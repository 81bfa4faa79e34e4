use super::refine::weak_regularity_ratio;
use super::segment::union_length;
use super::{regularity, Exact, Partition, PartitionError, Segment};

/// A weakly λ-regular τ whose first `A + 1` pieces `τ₁` violate weak A-regularity.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample<Q: Exact> {
    pub tau: Partition<Q>,
    /// Indices of `τ₁ = {Δ₀, …, Δ_A}` in τ.
    pub tau1: Vec<usize>,
    /// The complement `τ₂ = τ ∖ τ₁`.
    pub tau2: Vec<usize>,
    pub omega: Q,
    /// Index of the last piece; τ has `n + 1` pieces.
    pub n: usize,
    pub epsilon: Q,
    /// τ is weakly λ-regular (exact).
    pub tau_weakly_regular: bool,
    /// `sup_{τ₁} |j| >= A |𝒰(τ₁)| / |τ₁|` (exact).
    pub tau1_violates: bool,
    /// The violation holds with equality.
    pub tau1_equality: bool,
}

impl<Q: Exact> Counterexample<Q> {
    pub fn tau1_pieces(&self) -> Vec<Segment<Q>> {
        self.tau1.iter().map(|&i| self.tau.pieces()[i].clone()).collect()
    }
}

fn certify<Q: Exact>(tau: &Partition<Q>, a: usize, lambda: &Q) -> (bool, bool, bool) {
    let tau1 = &tau.pieces()[..=a];
    let sup = tau1.iter().map(Segment::length).max().unwrap();
    let rhs = Q::integer(a as i64) * union_length(tau1) / Q::integer(tau1.len() as i64);
    (regularity(tau.pieces(), lambda).1, sup >= rhs, sup == rhs)
}

/// Builds τ = {Δ₀ of length ω, A pieces of length ω/A², N − A pieces of length
/// (1+ε')ω/λ} with `ε' = (λ−1)/2`, scaled so that τ partitions `segment`.
///
/// N is the first value from `A + 2` that satisfies both the growth condition
/// `(N−A−1)(1+ε') >= λ(N/λ − 1 − 1/A)` and the exact weak-regularity inequality for the
/// actual count `N + 1` of pieces.
pub fn counterexample_partition<Q: Exact>(
    segment: &Segment<Q>,
    a: usize,
    lambda: &Q,
) -> Result<Counterexample<Q>, PartitionError> {
    if a == 0 || *lambda <= Q::one() {
        return Err(PartitionError::PreconditionViolated("need A >= 1 and λ > 1".into()));
    }
    let cap = 1_000_000;
    let one = Q::one();
    let aq = Q::integer(a as i64);
    let epsilon = (lambda.clone() - one.clone()) / Q::integer(2);
    let tail_piece = (one.clone() + epsilon.clone()) / lambda.clone();
    let small = one.clone() / (aq.clone() * aq.clone());
    let mut chosen = None;
    for n in a + 2..cap {
        let nq = Q::integer(n as i64);
        let growth = Q::integer((n - a - 1) as i64) * (one.clone() + epsilon.clone())
            >= lambda.clone() * (nq.clone() / lambda.clone() - one.clone() - one.clone() / aq.clone());
        // Total length in units of ω.
        let total = one.clone() + one.clone() / aq.clone() + Q::integer((n - a) as i64) * tail_piece.clone();
        let weak = lambda.clone() * total.clone() >= nq + one.clone();
        if growth && weak {
            chosen = Some((n, total));
            break;
        }
    }
    let (n, total) = chosen.ok_or(PartitionError::NoFeasibleN { cap })?;
    let omega = segment.length() / total;
    let mut points = vec![segment.min().clone()];
    let mut push = |len: Q| {
        let last = points.last().unwrap().clone();
        points.push(last + len);
    };
    push(omega.clone());
    for _ in 0..a {
        push(omega.clone() * small.clone());
    }
    for _ in a + 1..=n {
        push(omega.clone() * tail_piece.clone());
    }
    // Exact arithmetic: the last breakpoint is M(Δ).
    debug_assert_eq!(points.last().unwrap(), segment.max());
    let tau = Partition::from_breakpoints(&points)?;
    let (tau_weakly_regular, tau1_violates, tau1_equality) = certify(&tau, a, lambda);
    Ok(Counterexample {
        tau,
        tau1: (0..=a).collect(),
        tau2: (a + 1..=n).collect(),
        omega,
        n,
        epsilon,
        tau_weakly_regular,
        tau1_violates,
        tau1_equality,
    })
}

/// Bisects every piece; preserves weak regularity of τ and the violation of τ₁.
pub fn bisect_all<Q: Exact>(example: &Counterexample<Q>, lambda: &Q) -> Counterexample<Q> {
    let mut points = vec![example.tau.span().min().clone()];
    for j in example.tau.pieces() {
        points.push(j.min().clone() + j.length() / Q::integer(2));
        points.push(j.max().clone());
    }
    let tau = Partition::from_breakpoints(&points).expect("bisection keeps order");
    let a1 = 2 * example.tau1.len();
    let tau1: Vec<usize> = (0..a1).collect();
    let rest = &tau.pieces()[..a1];
    let sup = rest.iter().map(Segment::length).max().unwrap();
    let a = Q::integer(example.tau1.len() as i64 - 1);
    let rhs = a * union_length(rest) / Q::integer(a1 as i64);
    Counterexample {
        tau1_violates: sup >= rhs,
        tau1_equality: sup == rhs,
        tau_weakly_regular: regularity(tau.pieces(), lambda).1,
        tau2: (a1..tau.len()).collect(),
        tau1,
        omega: example.omega.clone() / Q::integer(2),
        n: tau.len() - 1,
        epsilon: example.epsilon.clone(),
        tau,
    }
}

/// Weak-regularity constant of τ₁ for reporting.
pub fn tau1_ratio<Q: Exact>(example: &Counterexample<Q>) -> Q {
    weak_regularity_ratio(&example.tau1_pieces())
}
