//! Inference schemes: ordered plans of fixed-budget conditional generation
//! calls that cover a future horizon.
//!
//! Each call (an [`Action`]) places one window of `2K + 1` time indices —
//! a template shifted into the future — and splits it into `K + 1`
//! conditioning positions and `K` generated positions. A plan is valid when
//! it is complete (every future step gets generated), admissible (every
//! conditioning index is observed or previously generated) and efficient (no
//! step is generated twice); [`validate_scheme`] checks these independently
//! of how the plan was produced.

mod diagram;
mod plan;
mod validate;

pub use diagram::{render_svg, render_text};
pub use plan::{
    plan_autoregressive, plan_hierarchy2, plan_multiscale, plan_multiscale_with_lookback,
};
pub use validate::{validate_scheme, PropertyKind, ValidationReport, Violation};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One conditional generation call: a template, its shift into the future,
/// and which window positions carry trusted values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    /// Index into the scheme's template list.
    pub template_id: usize,
    /// Offset added to every template index.
    pub shift: i64,
    /// `true` marks a conditioning position (`K + 1` of them per action).
    pub cond_mask: Vec<bool>,
}

/// An ordered list of actions over a shared template list.
///
/// Serializes to the scheme JSON document
/// `{horizon, k, templates: [[indices]], actions: [{template_id, shift, cond_mask}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceScheme {
    /// Farthest future step covered by the plan.
    pub horizon: i64,
    /// Steps generated per action.
    pub k: usize,
    /// Relative index sets referenced by `Action::template_id`. Multiscale
    /// plans use symmetric templates; the hierarchy-2 anchor window is not
    /// symmetric, so windows are stored as plain index lists.
    pub templates: Vec<Vec<i64>>,
    pub actions: Vec<Action>,
}

impl InferenceScheme {
    /// Absolute window indices of action `i` (template shifted).
    pub fn window(&self, i: usize) -> Vec<i64> {
        let action = &self.actions[i];
        self.templates[action.template_id]
            .iter()
            .map(|&t| t + action.shift)
            .collect()
    }

    /// Relative (unshifted) template indices of action `i`.
    pub fn template_indices(&self, i: usize) -> &[i64] {
        &self.templates[self.actions[i].template_id]
    }

    /// Absolute conditioning set `C` of action `i`.
    pub fn conditioned(&self, i: usize) -> Vec<i64> {
        self.select(i, true)
    }

    /// Absolute generated set `I` of action `i`.
    pub fn generated(&self, i: usize) -> Vec<i64> {
        self.select(i, false)
    }

    fn select(&self, i: usize, cond: bool) -> Vec<i64> {
        let action = &self.actions[i];
        self.templates[action.template_id]
            .iter()
            .zip(&action.cond_mask)
            .filter(|(_, &m)| m == cond)
            .map(|(&t, _)| t + action.shift)
            .collect()
    }

    /// How far into the observed past the first action reaches.
    pub fn initial_lookback(&self) -> i64 {
        if self.actions.is_empty() {
            return 0;
        }
        -self.conditioned(0).first().copied().unwrap_or(0)
    }

    /// Most negative index any window touches; rollouts must have observed
    /// data back to this point.
    pub fn min_window_index(&self) -> i64 {
        (0..self.actions.len())
            .filter_map(|i| self.window(i).first().copied())
            .min()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scheme serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Time indices whose values are known while a scheme is planned or executed:
/// a bounded observed past plus everything generated so far.
#[derive(Debug, Clone)]
pub struct AvailabilityState {
    past_limit: i64,
    generated: BTreeSet<i64>,
}

impl AvailabilityState {
    /// Observed past `[-past_limit, 0]`, nothing generated yet.
    pub fn new(past_limit: i64) -> Self {
        Self {
            past_limit,
            generated: BTreeSet::new(),
        }
    }

    pub fn is_available(&self, t: i64) -> bool {
        (t <= 0 && t >= -self.past_limit) || self.generated.contains(&t)
    }

    /// Returns `false` if `t` was already generated.
    pub fn mark_generated(&mut self, t: i64) -> bool {
        self.generated.insert(t)
    }

    pub fn generated(&self) -> &BTreeSet<i64> {
        &self.generated
    }
}

/// Replicate a scheme's action block, advancing the present by one horizon
/// per repetition, until `total` future steps are covered.
///
/// Later blocks condition on steps generated by earlier ones. When `total` is
/// not a multiple of the horizon the final block still covers a full horizon;
/// callers truncate the rollout.
pub fn extend_scheme(scheme: &InferenceScheme, total: i64) -> Result<InferenceScheme> {
    if total < scheme.horizon {
        return Err(Error::Domain(format!(
            "extension target {total} is shorter than the scheme horizon {}",
            scheme.horizon
        )));
    }
    let blocks = (total + scheme.horizon - 1) / scheme.horizon;
    let mut actions = Vec::with_capacity(scheme.actions.len() * blocks as usize);
    for block in 0..blocks {
        for action in &scheme.actions {
            actions.push(Action {
                template_id: action.template_id,
                shift: action.shift + block * scheme.horizon,
                cond_mask: action.cond_mask.clone(),
            });
        }
    }
    Ok(InferenceScheme {
        horizon: blocks * scheme.horizon,
        k: scheme.k,
        templates: scheme.templates.clone(),
        actions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::standard_family;

    fn horizon9() -> InferenceScheme {
        plan_multiscale(9, 3, &standard_family(9, 3).unwrap()).unwrap()
    }

    #[test]
    fn extend_doubles_block() {
        let s = horizon9();
        let e = extend_scheme(&s, 18).unwrap();
        assert_eq!(e.actions.len(), 6);
        assert_eq!(e.horizon, 18);
        for i in 0..3 {
            assert_eq!(e.actions[i], s.actions[i]);
            assert_eq!(e.actions[i + 3].shift, s.actions[i].shift + 9);
            assert_eq!(e.actions[i + 3].cond_mask, s.actions[i].cond_mask);
        }
        assert!(validate_scheme(&e).passed());
    }

    #[test]
    fn extend_identity_and_partial() {
        let s = horizon9();
        assert_eq!(extend_scheme(&s, 9).unwrap(), s);
        let e = extend_scheme(&s, 27).unwrap();
        assert_eq!(e.actions.len(), 9);
        assert!(validate_scheme(&e).passed());
        // A non-multiple target rounds the block count up.
        let e = extend_scheme(&s, 20).unwrap();
        assert_eq!(e.horizon, 27);
        assert!(extend_scheme(&s, 8).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = horizon9();
        let back = InferenceScheme::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn availability_tracks_window_and_generated() {
        let mut a = AvailabilityState::new(3);
        assert!(a.is_available(0));
        assert!(a.is_available(-3));
        assert!(!a.is_available(-4));
        assert!(!a.is_available(2));
        assert!(a.mark_generated(2));
        assert!(!a.mark_generated(2));
        assert!(a.is_available(2));
    }

    #[test]
    fn lookback_accessors() {
        let s = horizon9();
        assert_eq!(s.initial_lookback(), 9);
        assert_eq!(s.min_window_index(), -9);
        let ar = plan_autoregressive(9, 3).unwrap();
        assert_eq!(ar.initial_lookback(), 3);
    }
}
