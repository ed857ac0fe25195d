//! Independent scheme validation.
//!
//! The validator re-derives the available-index sets from scratch, making no
//! assumption about which planner produced the scheme. Violations are report
//! content, not errors: an invalid scheme is a legitimate value to inspect.

use std::collections::BTreeSet;

use super::InferenceScheme;

/// The property a violation breaks, in the order they are checked per action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyKind {
    /// Window/mask shapes are inconsistent; other checks are meaningless.
    Structure,
    /// An action does not condition on exactly `k + 1` and generate exactly `k`.
    Budget,
    /// A conditioning index was neither observed nor previously generated.
    Admissibility,
    /// A step was generated more than once.
    Efficiency,
    /// The union of generated sets is not exactly `{1..horizon}`.
    Completeness,
}

impl std::fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PropertyKind::Structure => "structure",
            PropertyKind::Budget => "budget",
            PropertyKind::Admissibility => "admissibility",
            PropertyKind::Efficiency => "efficiency",
            PropertyKind::Completeness => "completeness",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub property: PropertyKind,
    /// Offending action, if the violation is local to one.
    pub action: Option<usize>,
    /// Offending time indices.
    pub indices: Vec<i64>,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// The first violated property in walk order.
    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        for v in &self.violations {
            write!(f, "fail[{}", v.property)?;
            if let Some(a) = v.action {
                write!(f, " at action {a}")?;
            }
            writeln!(f, "]: offending indices {:?}", v.indices)?;
        }
        Ok(())
    }
}

/// Check budget, admissibility, efficiency and completeness of a scheme.
pub fn validate_scheme(scheme: &InferenceScheme) -> ValidationReport {
    let mut report = ValidationReport::default();

    if scheme.horizon < 1 || scheme.k < 1 {
        report.violations.push(Violation {
            property: PropertyKind::Structure,
            action: None,
            indices: vec![scheme.horizon],
        });
        return report;
    }
    for (i, action) in scheme.actions.iter().enumerate() {
        let ok = scheme
            .templates
            .get(action.template_id)
            .map(|t| {
                t.len() == action.cond_mask.len() && t.windows(2).all(|w| w[0] < w[1])
            })
            .unwrap_or(false);
        if !ok {
            report.violations.push(Violation {
                property: PropertyKind::Structure,
                action: Some(i),
                indices: vec![],
            });
            return report;
        }
    }

    // Observed past is every index <= 0; generated steps accumulate.
    let mut generated: BTreeSet<i64> = BTreeSet::new();
    for i in 0..scheme.actions.len() {
        let cond = scheme.conditioned(i);
        let gen = scheme.generated(i);

        if cond.len() != scheme.k + 1 || gen.len() != scheme.k {
            report.violations.push(Violation {
                property: PropertyKind::Budget,
                action: Some(i),
                indices: scheme.window(i),
            });
        }
        let inadmissible: Vec<i64> = cond
            .iter()
            .copied()
            .filter(|&t| t > 0 && !generated.contains(&t))
            .collect();
        if !inadmissible.is_empty() {
            report.violations.push(Violation {
                property: PropertyKind::Admissibility,
                action: Some(i),
                indices: inadmissible,
            });
        }
        let duplicated: Vec<i64> = gen
            .iter()
            .copied()
            .filter(|t| generated.contains(t))
            .collect();
        if !duplicated.is_empty() {
            report.violations.push(Violation {
                property: PropertyKind::Efficiency,
                action: Some(i),
                indices: duplicated,
            });
        }
        generated.extend(gen);
    }

    let target: BTreeSet<i64> = (1..=scheme.horizon).collect();
    if generated != target {
        let missing = target.difference(&generated).copied();
        let extra = generated.difference(&target).copied();
        report.violations.push(Violation {
            property: PropertyKind::Completeness,
            action: None,
            indices: missing.chain(extra).collect(),
        });
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::plan_multiscale;
    use crate::templates::standard_family;

    fn uniform_scheme(horizon: i64) -> InferenceScheme {
        crate::scheme::plan_autoregressive(horizon, 3).unwrap()
    }

    #[test]
    fn planned_schemes_pass() {
        let family = standard_family(9, 3).unwrap();
        assert!(validate_scheme(&plan_multiscale(9, 3, &family).unwrap()).passed());
    }

    #[test]
    fn duplicate_generation_is_an_efficiency_violation() {
        let mut s = uniform_scheme(3);
        // Two actions both generating {1,2,3}: union still equals {1..3}.
        s.actions.push(s.actions[0].clone());
        let report = validate_scheme(&s);
        assert!(!report.passed());
        assert_eq!(report.first().unwrap().property, PropertyKind::Efficiency);
        assert_eq!(report.first().unwrap().indices, vec![1, 2, 3]);
    }

    #[test]
    fn conditioning_on_ungenerated_future_is_inadmissible() {
        let mut s = uniform_scheme(6);
        // Make action 1 condition on step 4 before anything generates it.
        s.actions[1].shift = 4;
        let report = validate_scheme(&s);
        assert!(!report.passed());
        let first = report.first().unwrap();
        assert_eq!(first.property, PropertyKind::Admissibility);
        assert_eq!(first.indices, vec![4]);
    }

    #[test]
    fn wrong_budget_reported() {
        let mut s = uniform_scheme(3);
        s.actions[0].cond_mask[5] = true;
        let report = validate_scheme(&s);
        assert_eq!(report.first().unwrap().property, PropertyKind::Budget);
    }

    #[test]
    fn incomplete_coverage_reported_with_missing_indices() {
        let mut s = uniform_scheme(6);
        s.actions.pop();
        let report = validate_scheme(&s);
        let first = report.first().unwrap();
        assert_eq!(first.property, PropertyKind::Completeness);
        assert_eq!(first.indices, vec![4, 5, 6]);
    }

    #[test]
    fn mask_length_mismatch_is_structural() {
        let mut s = uniform_scheme(3);
        s.actions[0].cond_mask.pop();
        let report = validate_scheme(&s);
        assert_eq!(report.first().unwrap().property, PropertyKind::Structure);
    }
}
