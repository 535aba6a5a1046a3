//! Step-1 linkage discipline and cross-layer referential rules.
//!
//! [`check_closure`] evaluates the closed rule set R1-R8 over a model and
//! returns one diagnostic per violation, in rule order, declaration order
//! within a rule. An empty result means the model is closed.

use std::collections::BTreeSet;

use crate::diagnostics::Diagnostic;
use crate::label::LabelKind;
use crate::model::*;
use crate::rules;

/// Evaluate rules R1-R8. Returns an empty list iff all rules hold.
pub fn check_closure(m: &AnalysisModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    // R1: every vulnerability links at least one existing loss.
    for v in &m.vulnerabilities {
        let span = m.span_of("vulnerability", &v.id.to_string());
        if v.losses.is_empty() {
            diags.push(
                Diagnostic::error(rules::R1, format!("{} links no losses", v.id))
                    .maybe_span(span.clone()),
            );
        }
        for loss in &v.losses {
            if m.loss(*loss).is_none() {
                diags.push(
                    Diagnostic::error(
                        rules::R1,
                        format!("{} references unknown loss {}", v.id, loss),
                    )
                    .maybe_span(span.clone()),
                );
            }
        }
    }

    // R2: every vulnerability carries exactly one security attribute.
    for v in &m.vulnerabilities {
        if v.attributes.len() != 1 {
            let span = m.span_of("vulnerability", &v.id.to_string());
            let msg = if v.attributes.is_empty() {
                format!("{} carries no security attribute", v.id)
            } else {
                format!(
                    "{} carries {} security attributes, expected exactly one",
                    v.id,
                    v.attributes.len()
                )
            };
            diags.push(Diagnostic::error(rules::R2, msg).maybe_span(span));
        }
    }

    // R3: every constraint addresses at least one existing vulnerability.
    for c in &m.constraints {
        let span = m.span_of("constraint", &c.id.to_string());
        if c.addresses.is_empty() {
            diags.push(
                Diagnostic::error(rules::R3, format!("{} addresses no vulnerabilities", c.id))
                    .maybe_span(span.clone()),
            );
        }
        for v in &c.addresses {
            if m.vulnerability(*v).is_none() {
                diags.push(
                    Diagnostic::error(
                        rules::R3,
                        format!("{} addresses unknown vulnerability {}", c.id, v),
                    )
                    .maybe_span(span.clone()),
                );
            }
        }
    }

    // R4: every vulnerability is addressed by at least one constraint.
    let addressed: BTreeSet<VulnerabilityId> = m
        .constraints
        .iter()
        .flat_map(|c| c.addresses.iter().copied())
        .collect();
    for v in &m.vulnerabilities {
        if !addressed.contains(&v.id) {
            let span = m.span_of("vulnerability", &v.id.to_string());
            diags.push(
                Diagnostic::error(
                    rules::R4,
                    format!("{} is not addressed by any constraint", v.id),
                )
                .maybe_span(span),
            );
        }
    }

    // R5: every IFB and ICA links at least one existing vulnerability;
    // any declared vulnerability link must resolve.
    for f in &m.findings {
        let span = m.span_of("finding", &f.id.render());
        let requires_links = matches!(f.kind(), Some(FindingKind::Ifb | FindingKind::Ica));
        if requires_links && f.vulnerabilities.is_empty() {
            diags.push(
                Diagnostic::error(
                    rules::R5,
                    format!("{} links no vulnerabilities", f.id.render()),
                )
                .maybe_span(span.clone()),
            );
        }
        for v in &f.vulnerabilities {
            if m.vulnerability(*v).is_none() {
                diags.push(
                    Diagnostic::error(
                        rules::R5,
                        format!("{} references unknown vulnerability {}", f.id.render(), v),
                    )
                    .maybe_span(span.clone()),
                );
            }
        }
    }

    // R6: every finding has an existing parent of the correct kind.
    for f in &m.findings {
        let Some(kind) = f.kind() else { continue };
        let parent = f.parent().expect("finding labels have parents");
        // Segment equality in finding resolution already pins the parent's
        // kind, so existence is the whole check for LS parents.
        let resolved = match kind.parent_kind() {
            LabelKind::Function => m.resolve_function(&parent).is_some(),
            LabelKind::ControlAction => m.resolve_control_action(&parent).is_some(),
            _ => m.resolve_finding(&parent).is_some(),
        };
        if !resolved {
            let span = m.span_of("finding", &f.id.render());
            diags.push(
                Diagnostic::error(
                    rules::R6,
                    format!(
                        "{} has no declared parent `{}`",
                        f.id.render(),
                        parent.render()
                    ),
                )
                .maybe_span(span),
            );
        }
    }

    // R7: guide-word family matches the finding kind, for findings and
    // not-applicable marks alike.
    for f in &m.findings {
        let Some(kind) = f.kind() else { continue };
        if f.guide_word.family() != kind {
            let span = m.span_of("finding", &f.id.render());
            diags.push(
                Diagnostic::error(
                    rules::R7,
                    format!(
                        "{} is an {} but uses {} guide word `{}`",
                        f.id.render(),
                        kind.name(),
                        f.guide_word.family().name(),
                        f.guide_word.keyword()
                    ),
                )
                .maybe_span(span),
            );
        }
    }
    for na in &m.na_marks {
        let expected = match na.target.kind() {
            LabelKind::Function => FindingKind::Ifb,
            LabelKind::Ifb => FindingKind::DfLs,
            LabelKind::ControlAction => FindingKind::Ica,
            LabelKind::Ica => FindingKind::SecLs,
            _ => continue,
        };
        if na.guide_word.family() != expected {
            let key = format!("{}|{}", na.target.render(), na.guide_word.keyword());
            let span = m.span_of("na", &key);
            diags.push(
                Diagnostic::error(
                    rules::R7,
                    format!(
                        "not-applicable mark on `{}` needs an {} guide word, got `{}`",
                        na.target.render(),
                        expected.name(),
                        na.guide_word.keyword()
                    ),
                )
                .maybe_span(span),
            );
        }
    }

    // R8: every mapping endpoint exists with the stated kind.
    for entry in &m.mappings {
        let key = format!("{}->{}", entry.sec_ls.render(), entry.df_ls.render());
        let span = m.span_of("map", &key);
        let sec_ok = entry.sec_ls.kind() == LabelKind::SecLs
            && m.resolve_finding(&entry.sec_ls).is_some();
        if !sec_ok {
            diags.push(
                Diagnostic::error(
                    rules::R8,
                    format!(
                        "mapping references unknown SEC-LS `{}`",
                        entry.sec_ls.render()
                    ),
                )
                .maybe_span(span.clone()),
            );
        }
        let df_ok =
            entry.df_ls.kind() == LabelKind::DfLs && m.resolve_finding(&entry.df_ls).is_some();
        if !df_ok {
            diags.push(
                Diagnostic::error(
                    rules::R8,
                    format!(
                        "mapping references unknown DF-LS `{}`",
                        entry.df_ls.render()
                    ),
                )
                .maybe_span(span),
            );
        }
    }

    diags
}

/// Incidence matrix between two entity families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<bool>>,
}

impl CoverageMatrix {
    pub fn cell(&self, row: &str, column: &str) -> Option<bool> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.cells[r][c])
    }

    pub fn row_sum(&self, row: &str) -> Option<usize> {
        let r = self.rows.iter().position(|x| x == row)?;
        Some(self.cells[r].iter().filter(|&&b| b).count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageRelation {
    /// Vulnerabilities (rows) against the losses they link (columns).
    LossVuln,
    /// Vulnerabilities (rows) against the constraints addressing them.
    VulnConstraint,
    /// Vulnerabilities (rows) against the findings linking them.
    VulnFinding,
}

/// Materialize the declared links of one relation as an incidence matrix
/// in canonical order.
pub fn coverage(m: &AnalysisModel, relation: CoverageRelation) -> CoverageMatrix {
    let mut vulns: Vec<VulnerabilityId> = m.vulnerabilities.iter().map(|v| v.id).collect();
    vulns.sort();
    let rows: Vec<String> = vulns.iter().map(|v| v.to_string()).collect();
    match relation {
        CoverageRelation::LossVuln => {
            let mut losses: Vec<LossId> = m.losses.iter().map(|l| l.id).collect();
            losses.sort();
            let columns: Vec<String> = losses.iter().map(|l| l.to_string()).collect();
            let cells = vulns
                .iter()
                .map(|v| {
                    let vuln = m.vulnerability(*v).expect("row ids come from the model");
                    losses.iter().map(|l| vuln.losses.contains(l)).collect()
                })
                .collect();
            CoverageMatrix { rows, columns, cells }
        }
        CoverageRelation::VulnConstraint => {
            let mut constraints: Vec<ConstraintId> = m.constraints.iter().map(|c| c.id).collect();
            constraints.sort();
            let columns: Vec<String> = constraints.iter().map(|c| c.to_string()).collect();
            let cells = vulns
                .iter()
                .map(|v| {
                    constraints
                        .iter()
                        .map(|c| {
                            m.constraint(*c)
                                .map(|sc| sc.addresses.contains(v))
                                .unwrap_or(false)
                        })
                        .collect()
                })
                .collect();
            CoverageMatrix { rows, columns, cells }
        }
        CoverageRelation::VulnFinding => {
            let mut findings: Vec<&Finding> = m.findings.iter().collect();
            findings.sort_by(|a, b| a.id.cmp(&b.id));
            let columns: Vec<String> = findings.iter().map(|f| f.id.render()).collect();
            let cells = vulns
                .iter()
                .map(|v| {
                    findings
                        .iter()
                        .map(|f| f.vulnerabilities.contains(v))
                        .collect()
                })
                .collect();
            CoverageMatrix { rows, columns, cells }
        }
    }
}

/// Entity and finding counts of a model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelStats {
    pub subjects: usize,
    pub losses: usize,
    pub vulnerabilities: usize,
    pub constraints: usize,
    pub functions: usize,
    pub dataflows: usize,
    pub controllers: usize,
    pub control_actions: usize,
    pub feedbacks: usize,
    pub na_marks: usize,
    pub mappings: usize,
    pub findings_by_kind: Vec<(FindingKind, usize)>,
    pub findings_by_guide_word: Vec<(GuideWord, usize)>,
    /// Finding counts per subject code; merged findings count once per
    /// covered subject.
    pub findings_by_subject: Vec<(String, usize)>,
    /// Finding counts per declared parent (IFBs under a function, LSs
    /// under an IFB/ICA, ICAs under a control action).
    pub findings_by_parent: Vec<(String, usize)>,
}

impl ModelStats {
    pub fn findings_of(&self, kind: FindingKind) -> usize {
        self.findings_by_kind
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }

    pub fn parent_count(&self, parent: &str) -> usize {
        self.findings_by_parent
            .iter()
            .find(|(p, _)| p == parent)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }
}

pub fn stats(m: &AnalysisModel) -> ModelStats {
    let by_kind: Vec<(FindingKind, usize)> = FindingKind::ALL
        .into_iter()
        .map(|k| (k, m.findings_of_kind(k).count()))
        .collect();

    let by_guide_word: Vec<(GuideWord, usize)> = GuideWord::ALL
        .into_iter()
        .map(|g| {
            (
                g,
                m.findings.iter().filter(|f| f.guide_word == g).count(),
            )
        })
        .collect();

    let mut by_subject: Vec<(String, usize)> = Vec::new();
    {
        let mut codes: Vec<&str> = m.subjects.iter().map(|s| s.code.as_str()).collect();
        codes.sort();
        for code in codes {
            let n = m
                .findings
                .iter()
                .filter(|f| f.id.subjects.iter().any(|s| s == code))
                .count();
            by_subject.push((code.to_string(), n));
        }
    }

    let mut by_parent: Vec<(String, usize)> = Vec::new();
    {
        let mut parents: Vec<String> = m
            .findings
            .iter()
            .filter_map(|f| f.parent().map(|p| p.render()))
            .collect();
        parents.sort();
        parents.dedup();
        for parent in parents {
            let n = m
                .findings
                .iter()
                .filter(|f| f.parent().map(|p| p.render()) == Some(parent.clone()))
                .count();
            by_parent.push((parent, n));
        }
    }

    ModelStats {
        subjects: m.subjects.len(),
        losses: m.losses.len(),
        vulnerabilities: m.vulnerabilities.len(),
        constraints: m.constraints.len(),
        functions: m.functions.len(),
        dataflows: m.dataflows.len(),
        controllers: m.controllers.len(),
        control_actions: m.control_actions.len(),
        feedbacks: m.feedbacks.len(),
        na_marks: m.na_marks.len(),
        mappings: m.mappings.len(),
        findings_by_kind: by_kind,
        findings_by_guide_word: by_guide_word,
        findings_by_subject: by_subject,
        findings_by_parent: by_parent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    fn closed_model() -> AnalysisModel {
        let mut m = AnalysisModel::default();
        m.subjects.push(Subject {
            code: "P".into(),
            name: "Phone".into(),
            kind: SubjectKind::Technical,
        });
        m.losses.push(Loss {
            id: LossId(1),
            description: "loss".into(),
            category: LossCategory::Life,
        });
        m.vulnerabilities.push(Vulnerability {
            id: VulnerabilityId(1),
            description: "vuln".into(),
            attributes: vec![SecurityAttribute::Integrity],
            losses: vec![LossId(1)],
        });
        m.constraints.push(SystemConstraint {
            id: ConstraintId(1),
            description: "sc".into(),
            addresses: vec![VulnerabilityId(1)],
        });
        m.functions.push(Function {
            id: Label::parse("P_F1").unwrap(),
            name: "f".into(),
        });
        m.findings.push(Finding {
            id: Label::parse("P_F1_IFB1").unwrap(),
            guide_word: GuideWord::Necv,
            description: "ifb".into(),
            vulnerabilities: vec![VulnerabilityId(1)],
        });
        m
    }

    #[test]
    fn closed_model_has_no_diagnostics() {
        assert_eq!(check_closure(&closed_model()), Vec::new());
    }

    #[test]
    fn r1_fires_on_unknown_loss() {
        let mut m = closed_model();
        m.losses.clear();
        let diags = check_closure(&m);
        assert_eq!(diags.iter().filter(|d| d.rule == rules::R1).count(), 1);
        assert!(diags[0].message.contains("V-1"));
        assert!(diags[0].message.contains("L-1"));
    }

    #[test]
    fn r2_fires_on_missing_attribute() {
        let mut m = closed_model();
        m.vulnerabilities[0].attributes.clear();
        let diags = check_closure(&m);
        assert_eq!(diags.iter().filter(|d| d.rule == rules::R2).count(), 1);
    }

    #[test]
    fn r4_fires_on_unaddressed_vulnerability() {
        let mut m = closed_model();
        m.constraints.clear();
        let diags = check_closure(&m);
        assert!(diags.iter().any(|d| d.rule == rules::R4 && d.message.contains("V-1")));
    }

    #[test]
    fn r6_fires_on_missing_parent() {
        let mut m = closed_model();
        m.findings.push(Finding {
            id: Label::parse("P_F9_IFB1").unwrap(),
            guide_word: GuideWord::Ecv,
            description: "x".into(),
            vulnerabilities: vec![VulnerabilityId(1)],
        });
        let diags = check_closure(&m);
        assert_eq!(diags.iter().filter(|d| d.rule == rules::R6).count(), 1);
    }

    #[test]
    fn r7_fires_on_foreign_family() {
        let mut m = closed_model();
        m.findings[0].guide_word = GuideWord::Providing;
        let diags = check_closure(&m);
        assert_eq!(diags.iter().filter(|d| d.rule == rules::R7).count(), 1);
    }

    #[test]
    fn stats_of_empty_model_are_zero() {
        let s = stats(&AnalysisModel::default());
        assert_eq!(s.losses, 0);
        assert_eq!(s.vulnerabilities, 0);
        assert_eq!(s.constraints, 0);
        assert!(s.findings_by_parent.is_empty());
    }

    #[test]
    fn coverage_of_empty_model_is_empty() {
        let c = coverage(&AnalysisModel::default(), CoverageRelation::LossVuln);
        assert!(c.rows.is_empty());
        assert!(c.columns.is_empty());
    }
}
