//! Nested group chains realizing the lag penalties for one row of `B`.
//!
//! Every penalty handled here is a sum, over disjoint chains, of weighted
//! Euclidean norms on nested groups `g_1 ⊂ ⋯ ⊂ g_H`. Chains are stored
//! innermost group first, which is the order the one-pass proximal operator
//! needs.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::series::CoefficientTensor;
use crate::{Error, Result, Scalar};

/// Which penalty an estimator uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    /// Row-wise lag suffix groups `‖B_i^(ℓ:p)‖`.
    Componentwise,
    /// Componentwise groups plus, per lag, a group that omits the own
    /// coefficient `B_ii^(ℓ)`.
    OwnOther,
    /// Per `(i, j)` lag suffix groups `‖B_ij^(ℓ:p)‖`.
    Elementwise,
    /// Plain `ℓ1` penalty.
    Lasso,
    /// `ℓ1` penalty with lag-`ℓ` coordinates weighted by `ℓ^alpha`.
    LagWeightedLasso { alpha: f64 },
}

impl PenaltyKind {
    pub fn is_hierarchical(&self) -> bool {
        matches!(self, Self::Componentwise | Self::OwnOther | Self::Elementwise)
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Componentwise => write!(f, "hvar-c"),
            Self::OwnOther => write!(f, "hvar-o"),
            Self::Elementwise => write!(f, "hvar-e"),
            Self::Lasso => write!(f, "lasso"),
            Self::LagWeightedLasso { alpha } => write!(f, "lwlasso:{alpha}"),
        }
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hvar-c" => Ok(Self::Componentwise),
            "hvar-o" => Ok(Self::OwnOther),
            "hvar-e" => Ok(Self::Elementwise),
            "lasso" => Ok(Self::Lasso),
            _ => {
                let alpha = s
                    .strip_prefix("lwlasso:")
                    .ok_or_else(|| Error::UnknownMethod(s.to_string()))?;
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad lag-weight exponent in `{s}`")))?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
                }
                Ok(Self::LagWeightedLasso { alpha })
            }
        }
    }
}

/// Ordered nested groups `g_1 ⊂ ⋯ ⊂ g_H` with positive weights.
///
/// Because the groups are nested, they are stored as prefixes of a single
/// coordinate ordering: `g_h` is `order[..ends[h]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedGroupChain<F> {
    order: Vec<usize>,
    ends: Vec<usize>,
    weights: Vec<F>,
}

impl<F: Scalar> NestedGroupChain<F> {
    /// Validates strict nesting and builds the chain. Groups must be given
    /// innermost first.
    pub fn from_groups(groups: &[Vec<usize>], weights: &[F]) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidChain("a chain needs at least one group".into()));
        }
        if groups.len() != weights.len() {
            return Err(Error::InvalidChain(format!(
                "{} groups but {} weights",
                groups.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > F::zero()) || !w.is_finite()) {
            return Err(Error::InvalidChain(format!("weight {w} is not positive")));
        }
        let mut order: Vec<usize> = Vec::new();
        let mut ends = Vec::with_capacity(groups.len());
        for (h, g) in groups.iter().enumerate() {
            let mut sorted = g.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidChain(format!("group {h} repeats a coordinate")));
            }
            if g.len() <= order.len() {
                return Err(Error::InvalidChain(format!("group {h} does not strictly grow")));
            }
            if let Some(c) = order.iter().find(|c| sorted.binary_search(c).is_err()) {
                return Err(Error::InvalidChain(format!(
                    "group {h} drops coordinate {c} of the inner group"
                )));
            }
            let inner: std::collections::HashSet<usize> = order.iter().copied().collect();
            order.extend(g.iter().copied().filter(|c| !inner.contains(c)));
            ends.push(order.len());
        }
        Ok(Self { order, ends, weights: weights.to_vec() })
    }

    /// Builds a chain from disjoint layers (`g_h \ g_{h-1}`). An empty layer
    /// repeats the previous group, so its weight is added onto that group; a
    /// leading empty layer describes an empty group and is dropped.
    fn from_layers(layers: Vec<(Vec<usize>, F)>) -> Self {
        let mut order = Vec::new();
        let mut ends: Vec<usize> = Vec::new();
        let mut weights: Vec<F> = Vec::new();
        for (layer, w) in layers {
            if layer.is_empty() {
                if let Some(last) = weights.last_mut() {
                    *last += w;
                }
                continue;
            }
            order.extend(layer);
            ends.push(order.len());
            weights.push(w);
        }
        Self { order, ends, weights }
    }

    /// Number of groups `H`.
    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// Coordinates of group `h` (0-based, innermost first).
    pub fn group(&self, h: usize) -> &[usize] {
        &self.order[..self.ends[h]]
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|h| self.group(h).to_vec()).collect()
    }

    /// The outermost group.
    pub fn top(&self) -> &[usize] {
        &self.order
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// Coordinate ordering whose prefixes are the groups.
    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    pub(crate) fn ends(&self) -> &[usize] {
        &self.ends
    }

    /// `Σ_h w_h ‖x_{g_h}‖₂`.
    pub fn value(&self, x: ArrayView1<F>) -> F {
        let mut ss = F::zero();
        let mut start = 0;
        let mut total = F::zero();
        for (h, &end) in self.ends.iter().enumerate() {
            for &c in &self.order[start..end] {
                ss += x[c] * x[c];
            }
            total += self.weights[h] * ss.sqrt();
            start = end;
        }
        total
    }
}

/// Penalty on one row `B_i` (length `kp`): a union of disjoint chains.
#[derive(Debug, Clone, PartialEq)]
pub struct RowPenalty<F> {
    chains: Vec<NestedGroupChain<F>>,
    kind: PenaltyKind,
    row: usize,
    dim: usize,
}

impl<F: Scalar> RowPenalty<F> {
    /// Checks that chain indices are in range and that the chains are
    /// pairwise disjoint.
    pub fn new(chains: Vec<NestedGroupChain<F>>, kind: PenaltyKind, row: usize, dim: usize) -> Result<Self> {
        let mut seen = vec![false; dim];
        for chain in &chains {
            for &c in chain.top() {
                if c >= dim {
                    return Err(Error::InvalidChain(format!("coordinate {c} outside row of length {dim}")));
                }
                if seen[c] {
                    return Err(Error::OverlappingChains(c));
                }
                seen[c] = true;
            }
        }
        Ok(Self { chains, kind, row, dim })
    }

    /// Builds the penalty of `kind` for (0-based) row `i` of a `k`-variate
    /// model with `p` lags.
    pub fn for_kind(kind: PenaltyKind, i: usize, k: usize, p: usize) -> Result<Self> {
        if i >= k || p == 0 {
            return Err(Error::InvalidArgument(format!("row {i} of k = {k}, p = {p}")));
        }
        match kind {
            PenaltyKind::Componentwise => Ok(chain_componentwise(i, k, p)),
            PenaltyKind::OwnOther => Ok(chain_own_other(i, k, p)),
            PenaltyKind::Elementwise => Ok(chains_elementwise(i, k, p)),
            PenaltyKind::Lasso => Ok(singletons(kind, i, k, p, |_| F::one())),
            PenaltyKind::LagWeightedLasso { alpha } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
                }
                let alpha = F::of(alpha);
                Ok(singletons(kind, i, k, p, |lag| F::of_usize(lag).powf(alpha)))
            }
        }
    }

    pub fn chains(&self) -> &[NestedGroupChain<F>] {
        &self.chains
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Σ_chains Σ_h w_h ‖x_{g_h}‖₂`.
    pub fn value(&self, x: ArrayView1<F>) -> F {
        self.chains.iter().map(|c| c.value(x)).sum()
    }
}

fn lag_block(lag: usize, k: usize) -> Vec<usize> {
    ((lag - 1) * k..lag * k).collect()
}

/// One chain of `p` groups; `g_h` holds the coordinates of lags `p-h+1..=p`.
pub fn chain_componentwise<F: Scalar>(i: usize, k: usize, p: usize) -> RowPenalty<F> {
    let layers = (1..=p).rev().map(|lag| (lag_block(lag, k), F::one())).collect();
    RowPenalty {
        chains: vec![NestedGroupChain::from_layers(layers)],
        kind: PenaltyKind::Componentwise,
        row: i,
        dim: k * p,
    }
}

/// One chain alternating, from lag `p` down to lag 1, the group
/// `{B_{i,-i}^(ℓ)} ∪ B_i^(ℓ+1:p)` and the group `B_i^(ℓ:p)`.
///
/// For `k = 1` the off-diagonal sets are empty and each such term coincides
/// with the next-inner lag group; the coincident groups are merged with their
/// weights summed.
pub fn chain_own_other<F: Scalar>(i: usize, k: usize, p: usize) -> RowPenalty<F> {
    let mut layers = Vec::with_capacity(2 * p);
    for lag in (1..=p).rev() {
        let base = (lag - 1) * k;
        let others: Vec<usize> = (0..k).filter(|&j| j != i).map(|j| base + j).collect();
        layers.push((others, F::one()));
        layers.push((vec![base + i], F::one()));
    }
    RowPenalty {
        chains: vec![NestedGroupChain::from_layers(layers)],
        kind: PenaltyKind::OwnOther,
        row: i,
        dim: k * p,
    }
}

/// `k` disjoint chains, one per column `j`, each with the `p` scalar lag
/// suffixes of `B_ij`.
pub fn chains_elementwise<F: Scalar>(i: usize, k: usize, p: usize) -> RowPenalty<F> {
    let chains = (0..k)
        .map(|j| {
            let layers = (1..=p).rev().map(|lag| (vec![(lag - 1) * k + j], F::one())).collect();
            NestedGroupChain::from_layers(layers)
        })
        .collect();
    RowPenalty { chains, kind: PenaltyKind::Elementwise, row: i, dim: k * p }
}

fn singletons<F: Scalar>(
    kind: PenaltyKind,
    i: usize,
    k: usize,
    p: usize,
    weight: impl Fn(usize) -> F,
) -> RowPenalty<F> {
    let chains = (0..k * p)
        .map(|c| NestedGroupChain::from_layers(vec![(vec![c], weight(c / k + 1))]))
        .collect();
    RowPenalty { chains, kind, row: i, dim: k * p }
}

/// Penalty value of a whole row; same as [`RowPenalty::value`].
pub fn penalty_value<F: Scalar>(row: ArrayView1<F>, penalty: &RowPenalty<F>) -> Result<F> {
    if row.len() != penalty.dim {
        return Err(Error::Dimension(format!("row of length {} for penalty on {}", row.len(), penalty.dim)));
    }
    Ok(penalty.value(row))
}

/// Returns a description of the first broken zero-pattern implication of
/// `kind`, or `None` when the coefficients honor the hierarchy exactly.
///
/// - componentwise: `B_i^(ℓ) = 0 ⇒ B_i^(ℓ') = 0` for all `ℓ' > ℓ`;
/// - own-other: the componentwise rule plus `B_ii^(ℓ) = 0 ⇒ B_{i,-i}^(ℓ+1) = 0`;
/// - elementwise: `B_ij^(ℓ) = 0 ⇒ B_ij^(ℓ') = 0` for all `ℓ' > ℓ`.
///
/// Lasso-type kinds impose no hierarchy.
pub fn hierarchy_violation<F: Scalar>(tensor: &CoefficientTensor<F>, kind: PenaltyKind) -> Option<String> {
    hierarchy_violation_rows(tensor.to_rows().view(), kind)
}

pub fn hierarchy_violation_rows<F: Scalar>(rows: ArrayView2<F>, kind: PenaltyKind) -> Option<String> {
    let k = rows.nrows();
    if k == 0 {
        return None;
    }
    let p = rows.ncols() / k;
    let zero = |i: usize, j: usize, lag: usize| rows[[i, (lag - 1) * k + j]] == F::zero();
    let block_zero = |i: usize, lag: usize| (0..k).all(|j| zero(i, j, lag));
    for i in 0..k {
        match kind {
            PenaltyKind::Componentwise | PenaltyKind::OwnOther => {
                if let Some(first) = (1..=p).find(|&l| block_zero(i, l)) {
                    if let Some(late) = (first + 1..=p).find(|&l| !block_zero(i, l)) {
                        return Some(format!("row {i}: lag {first} is zero but lag {late} is not"));
                    }
                }
                if kind == PenaltyKind::OwnOther {
                    for lag in 1..p {
                        if zero(i, i, lag) {
                            if let Some(j) = (0..k).find(|&j| j != i && !zero(i, j, lag + 1)) {
                                return Some(format!(
                                    "row {i}: own lag {lag} is zero but B_{i},{j} at lag {} is not",
                                    lag + 1
                                ));
                            }
                        }
                    }
                }
            }
            PenaltyKind::Elementwise => {
                for j in 0..k {
                    if let Some(first) = (1..=p).find(|&l| zero(i, j, l)) {
                        if let Some(late) = (first + 1..=p).find(|&l| !zero(i, j, l)) {
                            return Some(format!(
                                "entry ({i},{j}): lag {first} is zero but lag {late} is not"
                            ));
                        }
                    }
                }
            }
            PenaltyKind::Lasso | PenaltyKind::LagWeightedLasso { .. } => return None,
        }
    }
    None
}
