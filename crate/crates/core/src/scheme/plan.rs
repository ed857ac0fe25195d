//! Scheme planners.
//!
//! All three planners are deterministic: given the same inputs they emit the
//! same action list, so plans can be pinned in golden tests.

use crate::templates::{shift_indices, Template, TemplateSpec};
use crate::{Error, Result};

use super::{Action, AvailabilityState, InferenceScheme};

/// Plan a multiscale scheme over `{1..horizon}` with observed past back to
/// `-horizon` (one full template span).
///
/// Greedy construction, one action per iteration: scan templates from largest
/// to smallest and shifts from 0 upward, keeping windows that stay within the
/// horizon and overlap the available steps in exactly `k + 1` positions. A
/// candidate whose last index lands exactly on the horizon is taken
/// immediately; otherwise the candidate leaving the fewest already-generated
/// steps outside its window wins (maximal self-conditioning), first match on
/// ties.
pub fn plan_multiscale(horizon: i64, k: usize, templates: &[Template]) -> Result<InferenceScheme> {
    plan_multiscale_with_lookback(horizon, k, templates, horizon)
}

/// [`plan_multiscale`] with the observed past restricted to `[-past_limit, 0]`.
///
/// Restricting the lookback below the largest template's span changes the
/// plan: windows reaching past the limit lack conditioning data and are
/// rejected, so the scheme must bootstrap from short windows.
pub fn plan_multiscale_with_lookback(
    horizon: i64,
    k: usize,
    templates: &[Template],
    past_limit: i64,
) -> Result<InferenceScheme> {
    if k < 1 || horizon < k as i64 {
        return Err(Error::Domain(format!(
            "need horizon >= k >= 1, got horizon {horizon}, k {k}"
        )));
    }
    if past_limit < 1 {
        return Err(Error::Domain("past lookback must be >= 1".into()));
    }
    if templates.is_empty() {
        return Err(Error::Domain("template list is empty".into()));
    }
    for pair in templates.windows(2) {
        if pair[0].horizon() > pair[1].horizon() {
            return Err(Error::Domain(
                "templates must be ordered by increasing horizon".into(),
            ));
        }
    }
    for t in templates {
        if t.len() != 2 * k + 1 {
            return Err(Error::Domain(format!(
                "template size {} does not match window size {}",
                t.len(),
                2 * k + 1
            )));
        }
        if t.horizon() > horizon {
            return Err(Error::Domain(format!(
                "template horizon {} exceeds the scheme horizon {horizon}",
                t.horizon()
            )));
        }
    }

    let mut avail = AvailabilityState::new(past_limit);
    let mut actions = Vec::new();
    while (avail.generated().len() as i64) < horizon {
        let mut best: Option<(usize, i64, Vec<bool>, usize)> = None;
        'search: for tid in (0..templates.len()).rev() {
            let template = &templates[tid];
            let reach = template.horizon();
            for shift in 0..=horizon {
                if reach + shift > horizon {
                    continue;
                }
                let window = shift_indices(template, shift);
                let mask: Vec<bool> = window.iter().map(|&t| avail.is_available(t)).collect();
                if mask.iter().filter(|&&m| m).count() != k + 1 {
                    continue;
                }
                // Only future steps may be generated.
                if window.iter().zip(&mask).any(|(&t, &m)| !m && t <= 0) {
                    continue;
                }
                // Already-generated steps this window fails to cover.
                let uncovered = avail
                    .generated()
                    .iter()
                    .filter(|t| window.binary_search(t).is_err())
                    .count();
                if reach + shift == horizon {
                    best = Some((tid, shift, mask, uncovered));
                    break 'search;
                }
                if best.as_ref().map_or(true, |b| uncovered < b.3) {
                    best = Some((tid, shift, mask, uncovered));
                }
            }
        }
        let Some((template_id, shift, cond_mask, _)) = best else {
            let uncovered = (1..=horizon).filter(|&t| !avail.is_available(t)).collect();
            return Err(Error::PlanningFailed { uncovered });
        };
        let window = shift_indices(&templates[template_id], shift);
        for (&t, &cond) in window.iter().zip(&cond_mask) {
            if !cond {
                avail.mark_generated(t);
            }
        }
        actions.push(Action {
            template_id,
            shift,
            cond_mask,
        });
    }

    Ok(InferenceScheme {
        horizon,
        k,
        templates: templates.iter().map(|t| t.indices().to_vec()).collect(),
        actions,
    })
}

/// Plan the sliding-window baseline: action `n` conditions on the `k + 1`
/// most recent steps and generates the next `k`.
///
/// When `total` is not a multiple of `k` the final window overshoots; the
/// scheme horizon is the rounded-up multiple and callers truncate.
pub fn plan_autoregressive(total: i64, k: usize) -> Result<InferenceScheme> {
    if k < 1 || total < 1 {
        return Err(Error::Domain(format!(
            "need total >= 1 and k >= 1, got total {total}, k {k}"
        )));
    }
    let uniform = crate::templates::build_template(TemplateSpec { alpha: 1.0, k })?;
    let n_actions = (total + k as i64 - 1) / k as i64;
    let mask: Vec<bool> = (0..2 * k + 1).map(|i| i <= k).collect();
    let actions = (0..n_actions)
        .map(|n| Action {
            template_id: 0,
            shift: n * k as i64,
            cond_mask: mask.clone(),
        })
        .collect();
    Ok(InferenceScheme {
        horizon: n_actions * k as i64,
        k,
        templates: vec![uniform.indices().to_vec()],
        actions,
    })
}

/// Plan the two-level baseline: one long-range call generates `k` evenly
/// spaced future anchors from the most recent observed steps, then uniform
/// windows fill the gaps, preferring conditioning sets that bracket what they
/// generate.
pub fn plan_hierarchy2(horizon: i64, k: usize) -> Result<InferenceScheme> {
    if k < 1 || horizon < k as i64 {
        return Err(Error::Domain(format!(
            "need horizon >= k >= 1, got horizon {horizon}, k {k}"
        )));
    }
    let uniform: Vec<i64> = (-(k as i64)..=k as i64).collect();
    let anchors: Vec<i64> = (1..=k as i64).map(|j| j * horizon / k as i64).collect();

    let mut avail = AvailabilityState::new(horizon.max(k as i64));
    let mut actions = Vec::new();

    let coarse: Vec<i64> = (-(k as i64)..=0).chain(anchors.iter().copied()).collect();
    let templates: Vec<Vec<i64>> = if coarse == uniform {
        vec![uniform.clone()]
    } else {
        vec![uniform.clone(), coarse.clone()]
    };
    let coarse_id = templates.len() - 1;
    let mut coarse_mask = vec![true; k + 1];
    coarse_mask.extend(std::iter::repeat(false).take(k));
    for &a in &anchors {
        avail.mark_generated(a);
    }
    actions.push(Action {
        template_id: coarse_id,
        shift: 0,
        cond_mask: coarse_mask,
    });

    while (avail.generated().len() as i64) < horizon {
        // Candidate fill windows: uniform, within the horizon, exact budget.
        let mut fallback: Option<(i64, Vec<bool>)> = None;
        let mut bracketing: Option<(i64, Vec<bool>)> = None;
        for shift in 0..=(horizon - k as i64) {
            let window: Vec<i64> = uniform.iter().map(|&t| t + shift).collect();
            let mask: Vec<bool> = window.iter().map(|&t| avail.is_available(t)).collect();
            if mask.iter().filter(|&&m| m).count() != k + 1 {
                continue;
            }
            if window.iter().zip(&mask).any(|(&t, &m)| !m && t <= 0) {
                continue;
            }
            let cond: Vec<i64> = window
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(&t, _)| t)
                .collect();
            let gen: Vec<i64> = window
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| !m)
                .map(|(&t, _)| t)
                .collect();
            // Conditioning on both sides of the generated steps.
            let brackets = *cond.last().unwrap() > *gen.first().unwrap()
                && *cond.first().unwrap() < *gen.last().unwrap();
            if fallback.is_none() {
                fallback = Some((shift, mask.clone()));
            }
            if brackets && bracketing.is_none() {
                bracketing = Some((shift, mask));
                break;
            }
        }
        let Some((shift, cond_mask)) = bracketing.or(fallback) else {
            let uncovered = (1..=horizon).filter(|&t| !avail.is_available(t)).collect();
            return Err(Error::PlanningFailed { uncovered });
        };
        for &t in &uniform {
            let abs = t + shift;
            if !avail.is_available(abs) {
                avail.mark_generated(abs);
            }
        }
        actions.push(Action {
            template_id: 0,
            shift,
            cond_mask,
        });
    }

    Ok(InferenceScheme {
        horizon,
        k,
        templates,
        actions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::validate_scheme;
    use crate::templates::standard_family;

    #[test]
    fn multiscale_horizon9_matches_worked_construction() {
        let family = standard_family(9, 3).unwrap();
        let s = plan_multiscale(9, 3, &family).unwrap();
        assert_eq!(s.actions.len(), 3);
        assert_eq!(s.conditioned(0), vec![-9, -3, -1, 0]);
        assert_eq!(s.generated(0), vec![1, 3, 9]);
        assert_eq!(s.conditioned(1), vec![-3, 1, 3, 9]);
        assert_eq!(s.generated(1), vec![2, 4, 5]);
        assert_eq!(s.conditioned(2), vec![3, 4, 5, 9]);
        assert_eq!(s.generated(2), vec![6, 7, 8]);
        assert!(validate_scheme(&s).passed());
    }

    #[test]
    fn multiscale_trivial_single_window() {
        let family = standard_family(3, 3).unwrap();
        let s = plan_multiscale(3, 3, &family).unwrap();
        assert_eq!(s.actions.len(), 1);
        assert_eq!(s.conditioned(0), vec![-3, -2, -1, 0]);
        assert_eq!(s.generated(0), vec![1, 2, 3]);
    }

    #[test]
    fn multiscale_horizon18_with_coarse_family() {
        // Five templates, one per target horizon {3, 6, 9, 12, 18}.
        let mut family = Vec::new();
        for h in [3i64, 6, 9, 12, 18] {
            let alpha = crate::templates::solve_alpha_for_horizon(h, 3).unwrap();
            family.push(crate::templates::build_template(TemplateSpec { alpha, k: 3 }).unwrap());
        }
        let s = plan_multiscale(18, 3, &family).unwrap();
        assert_eq!(s.conditioned(0), vec![-18, -4, -1, 0]);
        assert_eq!(s.generated(0), vec![1, 4, 18]);
        assert!(validate_scheme(&s).passed());
        assert_eq!(s.actions.len(), 6);
    }

    #[test]
    fn multiscale_rejects_bad_template_lists() {
        let family = standard_family(9, 3).unwrap();
        let reversed: Vec<_> = family.iter().rev().cloned().collect();
        assert!(plan_multiscale(9, 3, &reversed).is_err());
        assert!(plan_multiscale(6, 3, &family).is_err());
        assert!(plan_multiscale(9, 2, &family).is_err());
    }

    #[test]
    fn multiscale_unreachable_horizon_reports_uncovered() {
        // 4 is not a multiple of k = 3: one call overshoots, none can finish.
        let family = standard_family(4, 3).unwrap();
        match plan_multiscale(4, 3, &family) {
            Err(Error::PlanningFailed { uncovered }) => assert!(!uncovered.is_empty()),
            other => panic!("expected planning failure, got {other:?}"),
        }
    }

    #[test]
    fn restricted_lookback_replans_from_short_windows() {
        let family = standard_family(9, 3).unwrap();
        let s = plan_multiscale_with_lookback(9, 3, &family, 3).unwrap();
        assert!(validate_scheme(&s).passed());
        assert_eq!(s.actions.len(), 3);
        // No conditioning index may precede the restricted past.
        for i in 0..s.actions.len() {
            assert!(s.conditioned(i).iter().all(|&t| t >= -3));
        }
        assert_eq!(s.generated(0), vec![1, 2, 3]);
        assert_eq!(s.initial_lookback(), 3);
    }

    #[test]
    fn autoregressive_shapes() {
        let s = plan_autoregressive(9, 3).unwrap();
        assert_eq!(s.actions.len(), 3);
        assert_eq!(s.conditioned(0), vec![-3, -2, -1, 0]);
        assert_eq!(s.generated(0), vec![1, 2, 3]);
        assert_eq!(s.conditioned(1), vec![0, 1, 2, 3]);
        assert!(validate_scheme(&s).passed());

        assert_eq!(plan_autoregressive(3, 3).unwrap().actions.len(), 1);

        // ceil(10 / 3) = 4 actions; the horizon rounds up and callers truncate.
        let s = plan_autoregressive(10, 3).unwrap();
        assert_eq!(s.actions.len(), 4);
        assert_eq!(s.horizon, 12);
        assert_eq!(s.generated(3), vec![10, 11, 12]);
    }

    #[test]
    fn hierarchy2_anchors_then_fills() {
        let s = plan_hierarchy2(9, 3).unwrap();
        assert_eq!(s.conditioned(0), vec![-3, -2, -1, 0]);
        assert_eq!(s.generated(0), vec![3, 6, 9]);
        assert_eq!(s.actions.len(), 3);
        assert!(validate_scheme(&s).passed());
    }

    #[test]
    fn hierarchy2_degenerates_to_autoregressive_at_minimum_horizon() {
        let s = plan_hierarchy2(3, 3).unwrap();
        let ar = plan_autoregressive(3, 3).unwrap();
        assert_eq!(s.actions.len(), 1);
        assert_eq!(s.conditioned(0), ar.conditioned(0));
        assert_eq!(s.generated(0), ar.generated(0));
    }

    #[test]
    fn call_count_parity_on_shared_budget() {
        for (h, k) in [(9i64, 3usize), (12, 3), (8, 2), (20, 4)] {
            let family = standard_family(h, k).unwrap();
            let ms = plan_multiscale(h, k, &family).unwrap();
            let ar = plan_autoregressive(h, k).unwrap();
            let h2 = plan_hierarchy2(h, k).unwrap();
            let calls = (h / k as i64) as usize;
            assert_eq!(ms.actions.len(), calls);
            assert_eq!(ar.actions.len(), calls);
            assert_eq!(h2.actions.len(), calls);
        }
    }
}
