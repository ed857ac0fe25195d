//! Multiscale time-index templates.
//!
//! A template is a symmetric set of `2K + 1` integer time offsets centered on
//! the present. Successive positive offsets grow by powers of a scale factor
//! `alpha >= 1`: the real-valued recursion is `t_0 = 0`, `t_{k+1} = t_k +
//! alpha^k`, the negative side mirrors the positive one, and the result is
//! mapped to integers by `sign(t) * floor(|t|)`. `alpha = 1` recovers the
//! contiguous window `{-K..K}`; larger `alpha` trades local density for an
//! exponentially longer reach at the same budget.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scale factor and half-budget defining a multiscale template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    /// Spacing growth factor, dimensionless, `>= 1`.
    pub alpha: f64,
    /// Half-budget: the template has `k` offsets on each side of 0.
    pub k: usize,
}

impl TemplateSpec {
    pub fn new(alpha: f64, k: usize) -> Result<Self> {
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!(
                "template scale factor must be a finite real >= 1, got {alpha}"
            )));
        }
        if k < 1 {
            return Err(Error::Domain("template half-budget must be >= 1".into()));
        }
        Ok(Self { alpha, k })
    }
}

/// A sorted, symmetric set of `2K + 1` integer time offsets containing 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    indices: Vec<i64>,
    spec: TemplateSpec,
}

impl Template {
    /// Offsets in strictly increasing order.
    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn spec(&self) -> TemplateSpec {
        self.spec
    }

    /// Largest offset (= farthest reachable future step in one call).
    pub fn horizon(&self) -> i64 {
        *self.indices.last().expect("template is never empty")
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Build the template for `spec`.
///
/// The positive side keeps full real precision through the recursion and is
/// floored once at the end; the negative side is the mirror image. Increments
/// are `>= 1`, so the floored offsets are strictly increasing and distinct.
pub fn build_template(spec: TemplateSpec) -> Result<Template> {
    let spec = TemplateSpec::new(spec.alpha, spec.k)?;
    let mut positive = Vec::with_capacity(spec.k);
    let mut t = 0.0_f64;
    for j in 0..spec.k {
        t += spec.alpha.powi(j as i32);
        positive.push(t.floor() as i64);
    }
    let mut indices = Vec::with_capacity(2 * spec.k + 1);
    indices.extend(positive.iter().rev().map(|&v| -v));
    indices.push(0);
    indices.extend(&positive);
    Ok(Template { indices, spec })
}

/// Largest future offset of a template.
pub fn template_horizon(template: &Template) -> i64 {
    template.horizon()
}

/// Template offsets shifted by `s`, order preserved.
pub fn shift_indices(template: &Template, s: i64) -> Vec<i64> {
    template.indices.iter().map(|&t| t + s).collect()
}

/// Smallest `alpha >= 1` whose template reaches exactly horizon `h`.
///
/// Solved by monotone bisection on the continuous pre-floor horizon
/// `g(alpha) = sum_{j<k} alpha^j` to absolute tolerance 1e-9. `g(1) = k` and
/// `g(h) > h`, so `[1, h]` always brackets the root; the returned value is the
/// upper end of the final bracket, guaranteeing the floored horizon equals `h`.
pub fn solve_alpha_for_horizon(h: i64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("half-budget must be >= 1".into()));
    }
    if h < k as i64 {
        return Err(Error::Domain(format!(
            "target horizon {h} is below the uniform-window horizon {k}"
        )));
    }
    if h == k as i64 {
        return Ok(1.0);
    }
    let pre_floor = |alpha: f64| -> f64 { (0..k).map(|j| alpha.powi(j as i32)).sum() };
    if k == 1 {
        // g is constant 1: only horizon 1 exists.
        return Err(Error::UnreachableHorizon { horizon: h, k });
    }
    let target = h as f64;
    let (mut lo, mut hi) = (1.0_f64, h as f64);
    debug_assert!(pre_floor(hi) >= target);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if pre_floor(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The template family used by the multiscale planner for a given horizon:
/// one template per reachable target in `{k, 2k, ..., horizon}`, ordered by
/// increasing horizon.
///
/// For `k = 1` only the uniform window exists (every template has horizon 1).
pub fn standard_family(horizon: i64, k: usize) -> Result<Vec<Template>> {
    if k < 1 {
        return Err(Error::Domain("half-budget must be >= 1".into()));
    }
    if horizon < k as i64 {
        return Err(Error::Domain(format!(
            "horizon {horizon} is below the minimum horizon {k}"
        )));
    }
    let mut targets: Vec<i64> = (1..)
        .map(|m| m * k as i64)
        .take_while(|&t| t <= horizon)
        .collect();
    if *targets.last().unwrap() != horizon {
        targets.push(horizon);
    }
    let mut family = Vec::new();
    for target in targets {
        match solve_alpha_for_horizon(target, k) {
            Ok(alpha) => family.push(build_template(TemplateSpec { alpha, k })?),
            Err(Error::UnreachableHorizon { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    family.dedup_by(|a, b| a.indices == b.indices);
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tpl(alpha: f64, k: usize) -> Template {
        build_template(TemplateSpec { alpha, k }).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(tpl(2.5, 3).indices(), &[-9, -3, -1, 0, 1, 3, 9]);
        assert_eq!(tpl(1.0, 3).indices(), &[-3, -2, -1, 0, 1, 2, 3]);
        // By hand: 1, 1+2 = 3, 3+4 = 7.
        assert_eq!(tpl(2.0, 3).indices(), &[-7, -3, -1, 0, 1, 3, 7]);
    }

    #[test]
    fn horizons() {
        assert_eq!(tpl(2.5, 3).horizon(), 9);
        assert_eq!(tpl(1.0, 3).horizon(), 3);
        let t18 = tpl(solve_alpha_for_horizon(18, 3).unwrap(), 3);
        assert_eq!(t18.indices(), &[-18, -4, -1, 0, 1, 4, 18]);
        assert_eq!(template_horizon(&t18), 18);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(TemplateSpec::new(0.9, 3).is_err());
        assert!(TemplateSpec::new(f64::NAN, 3).is_err());
        assert!(TemplateSpec::new(2.0, 0).is_err());
    }

    #[test]
    fn alpha_inversion_matches_closed_forms() {
        // 1 + a + a^2 = 9  =>  a = (-1 + sqrt(33)) / 2
        let a9 = solve_alpha_for_horizon(9, 3).unwrap();
        assert!((a9 - (-1.0 + 33.0_f64.sqrt()) / 2.0).abs() < 1e-8, "{a9}");
        assert_eq!(tpl(a9, 3).indices(), &[-9, -3, -1, 0, 1, 3, 9]);

        // 1 + a + a^2 = 18  =>  a = (-1 + sqrt(69)) / 2
        let a18 = solve_alpha_for_horizon(18, 3).unwrap();
        assert!((a18 - (-1.0 + 69.0_f64.sqrt()) / 2.0).abs() < 1e-8, "{a18}");
        assert_eq!(tpl(a18, 3).indices(), &[-18, -4, -1, 0, 1, 4, 18]);

        assert_eq!(solve_alpha_for_horizon(3, 3).unwrap(), 1.0);
    }

    #[test]
    fn alpha_inversion_errors() {
        assert!(solve_alpha_for_horizon(2, 3).is_err());
        assert!(matches!(
            solve_alpha_for_horizon(5, 1),
            Err(Error::UnreachableHorizon { .. })
        ));
    }

    #[test]
    fn shifting() {
        let t = tpl(1.0, 3);
        assert_eq!(shift_indices(&t, 6), vec![3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(shift_indices(&t, 0), t.indices());
        let mid = tpl(solve_alpha_for_horizon(6, 3).unwrap(), 3);
        assert_eq!(mid.indices(), &[-6, -2, -1, 0, 1, 2, 6]);
        assert_eq!(shift_indices(&mid, 3), vec![-3, 1, 2, 3, 4, 5, 9]);
    }

    #[test]
    fn standard_family_for_horizon_9() {
        let family = standard_family(9, 3).unwrap();
        let horizons: Vec<i64> = family.iter().map(|t| t.horizon()).collect();
        assert_eq!(horizons, vec![3, 6, 9]);
        assert_eq!(family[1].indices(), &[-6, -2, -1, 0, 1, 2, 6]);
    }

    #[test]
    fn standard_family_k1_is_uniform_only() {
        let family = standard_family(12, 1).unwrap();
        assert_eq!(family.len(), 1);
        assert_eq!(family[0].indices(), &[-1, 0, 1]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_sorted_sized(alpha in 1.0f64..8.0, k in 1usize..6) {
                let t = tpl(alpha, k);
                let idx = t.indices();
                prop_assert_eq!(idx.len(), 2 * k + 1);
                prop_assert!(idx.contains(&0));
                for w in idx.windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
                for &v in idx {
                    prop_assert!(idx.contains(&-v));
                }
            }

            #[test]
            fn horizon_nondecreasing_in_alpha(a in 1.0f64..6.0, b in 1.0f64..6.0, k in 2usize..6) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(tpl(lo, k).horizon() <= tpl(hi, k).horizon());
            }

            #[test]
            fn horizon_round_trip(h in 2i64..=200, k in 2usize..5) {
                prop_assume!(h >= k as i64);
                let alpha = solve_alpha_for_horizon(h, k).unwrap();
                prop_assert_eq!(tpl(alpha, k).horizon(), h);
            }
        }
    }
}
