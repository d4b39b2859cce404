//! Proximal operator of sums of nested group norms.
//!
//! For a chain `g_1 ⊂ ⋯ ⊂ g_H` the minimizer of
//! `½‖x − x̃‖² + λ Σ_h w_h ‖x_{g_h}‖₂` is obtained by one pass of group
//! soft-thresholding from the innermost group outwards:
//! `r_{g_h} ← (1 − λ w_h / ‖r_{g_h}‖₂)₊ r_{g_h}`.
//!
//! Since every group is a prefix of one coordinate ordering, the pass is run
//! in `O(|g_H|)`: the squared norm of `g_h` is updated from the (already
//! shrunk) norm of `g_{h-1}` plus the new layer, and the shrink factors are
//! applied once at the end as suffix products.

use ndarray::{Array1, ArrayView1};

use crate::penalty::{NestedGroupChain, RowPenalty};
use crate::{Error, Result, Scalar};

/// One instance of the nested-group proximal problem.
#[derive(Debug, Clone)]
pub struct ProxProblem<'a, F> {
    pub x_tilde: ArrayView1<'a, F>,
    pub lambda: F,
    pub chain: &'a NestedGroupChain<F>,
}

impl<F: Scalar> ProxProblem<'_, F> {
    pub fn solve(&self) -> Result<Array1<F>> {
        prox_chain(self.x_tilde, self.lambda, self.chain)
    }
}

/// `sign(x) · max(|x| − t, 0)`.
pub fn soft_threshold<F: Scalar>(x: F, t: F) -> F {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        F::zero()
    }
}

/// Prox of `λ Σ_h w_h ‖·_{g_h}‖` for a single chain. Coordinates outside the
/// chain are copied unchanged.
pub fn prox_chain<F: Scalar>(x_tilde: ArrayView1<F>, lambda: F, chain: &NestedGroupChain<F>) -> Result<Array1<F>> {
    check_lambda(lambda)?;
    if let Some(&c) = chain.top().iter().find(|&&c| c >= x_tilde.len()) {
        return Err(Error::Dimension(format!("chain coordinate {c} outside vector of length {}", x_tilde.len())));
    }
    let mut out = x_tilde.to_owned();
    let mut factors = Vec::with_capacity(chain.len());
    shrink_chain(out.as_slice_mut().expect("contiguous"), lambda, chain, &mut factors);
    Ok(out)
}

/// Prox of a whole row penalty: chains are disjoint, so each is handled
/// independently.
pub fn prox_row<F: Scalar>(x_tilde: ArrayView1<F>, lambda: F, penalty: &RowPenalty<F>) -> Result<Array1<F>> {
    check_lambda(lambda)?;
    if x_tilde.len() != penalty.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for a penalty on {} coordinates",
            x_tilde.len(),
            penalty.dim()
        )));
    }
    let mut out = x_tilde.to_owned();
    let mut scratch = Vec::new();
    prox_row_in_place(out.as_slice_mut().expect("contiguous"), lambda, penalty, &mut scratch);
    Ok(out)
}

/// In-place [`prox_row`] for the solver's inner loop. `scratch` holds the
/// per-group shrink factors and must not be shared between threads.
pub fn prox_row_in_place<F: Scalar>(x: &mut [F], lambda: F, penalty: &RowPenalty<F>, scratch: &mut Vec<F>) {
    debug_assert_eq!(x.len(), penalty.dim());
    for chain in penalty.chains() {
        shrink_chain(x, lambda, chain, scratch);
    }
}

fn check_lambda<F: Scalar>(lambda: F) -> Result<()> {
    if !(lambda >= F::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("penalty level {lambda} must be finite and >= 0")));
    }
    Ok(())
}

fn shrink_chain<F: Scalar>(x: &mut [F], lambda: F, chain: &NestedGroupChain<F>, factors: &mut Vec<F>) {
    if lambda == F::zero() {
        return;
    }
    let order = chain.order();
    let ends = chain.ends();
    let weights = chain.weights();
    if order.len() == 1 {
        let c = order[0];
        x[c] = soft_threshold(x[c], lambda * weights[0]);
        return;
    }

    // shrunk squared norm of the previous group
    let mut ss = F::zero();
    let mut start = 0;
    factors.clear();
    for (h, &end) in ends.iter().enumerate() {
        for &c in &order[start..end] {
            ss += x[c] * x[c];
        }
        let norm = ss.sqrt();
        let factor = if norm > F::zero() {
            (F::one() - lambda * weights[h] / norm).max(F::zero())
        } else {
            F::zero()
        };
        factors.push(factor);
        ss = ss * factor * factor;
        start = end;
    }

    let mut cumulative = F::one();
    let mut end = order.len();
    for h in (0..ends.len()).rev() {
        cumulative *= factors[h];
        let begin = if h == 0 { 0 } else { ends[h - 1] };
        for &c in &order[begin..end] {
            x[c] *= cumulative;
        }
        end = begin;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::{chain_componentwise, PenaltyKind};
    use ndarray::array;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-3.5, 0.0), -3.5);
        assert_eq!(soft_threshold(-3.5, 1.0), -2.5);
    }

    #[test]
    fn zero_lambda_is_identity() {
        let pen = RowPenalty::<f64>::for_kind(PenaltyKind::OwnOther, 1, 3, 2).unwrap();
        let x = array![0.1, -2.0, 3.5, 0.0, 7.0, -0.25];
        assert_eq!(prox_row(x.view(), 0.0, &pen).unwrap(), x);
    }

    #[test]
    fn single_group_shrinks_radially() {
        let chain = NestedGroupChain::from_groups(&[vec![0, 1]], &[1.0]).unwrap();
        let out = prox_chain(array![3.0, 4.0].view(), 2.5, &chain).unwrap();
        assert_eq!(out, array![1.5, 2.0]);
        let out = prox_chain(array![3.0, 4.0].view(), 5.0, &chain).unwrap();
        assert_eq!(out, array![0.0, 0.0]);
    }

    #[test]
    fn two_nested_groups_by_hand() {
        let chain = NestedGroupChain::from_groups(&[vec![1], vec![0, 1]], &[1.0, 1.0]).unwrap();
        let out = prox_chain(array![3.0, 4.0].view(), 1.0, &chain).unwrap();
        let expected = 3.0 * (1.0 - 1.0 / 18f64.sqrt());
        assert!((out[0] - expected).abs() < 1e-14);
        assert!((out[1] - expected).abs() < 1e-14);
    }

    #[test]
    fn weights_scale_threshold() {
        let chain = NestedGroupChain::from_groups(&[vec![0, 1]], &[2.0]).unwrap();
        let out = prox_chain(array![3.0, 4.0].view(), 1.25, &chain).unwrap();
        assert_eq!(out, array![1.5, 2.0]);
    }

    #[test]
    fn zero_group_needs_no_division() {
        let chain = NestedGroupChain::from_groups(&[vec![1], vec![0, 1]], &[1.0, 1.0]).unwrap();
        let out = prox_chain(array![0.0, 0.0].view(), 1.0, &chain).unwrap();
        assert_eq!(out, array![0.0, 0.0]);
    }

    #[test]
    fn inner_zero_stays_zero() {
        // inner group {1} is killed, outer group only shrinks coordinate 0
        let chain = NestedGroupChain::from_groups(&[vec![1], vec![0, 1]], &[1.0, 1.0]).unwrap();
        let out = prox_chain(array![10.0f64, 0.5].view(), 1.0, &chain).unwrap();
        assert_eq!(out[1], 0.0);
        assert!((out[0] - 9.0).abs() < 1e-14);
    }

    #[test]
    fn lasso_penalty_reduces_to_soft_threshold() {
        let pen = RowPenalty::<f64>::for_kind(PenaltyKind::LagWeightedLasso { alpha: 1.0 }, 0, 2, 2).unwrap();
        let x = array![1.0, -3.0, 2.5, -0.5];
        let out = prox_row(x.view(), 1.0, &pen).unwrap();
        assert_eq!(out, array![0.0, -2.0, 0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let pen = chain_componentwise::<f64>(0, 2, 2);
        assert!(prox_row(array![1.0, 2.0].view(), 1.0, &pen).is_err());
        assert!(prox_row(array![1.0, 2.0, 3.0, 4.0].view(), -1.0, &pen).is_err());
        assert!(prox_row(array![1.0, 2.0, 3.0, 4.0].view(), f64::NAN, &pen).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let chain = NestedGroupChain::<f32>::from_groups(&[vec![0, 1]], &[1.0]).unwrap();
        let out = prox_chain(ndarray::array![3.0f32, 4.0].view(), 2.5, &chain).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-6 && (out[1] - 2.0).abs() < 1e-6);
    }
}
