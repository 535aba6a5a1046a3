//! The published rule registry.
//!
//! Every diagnostic carries one of these codes. Codes are stable: the
//! registry version changes whenever the semantics of any code change.

use crate::diagnostics::Severity;

/// Bumped whenever any rule code changes meaning.
pub const REGISTRY_VERSION: &str = "1";

// Syntax and resolution (parser).
pub const R_SYNTAX_01: &str = "R-SYNTAX-01";
pub const R_LABEL_01: &str = "R-LABEL-01";
pub const R_LABEL_02: &str = "R-LABEL-02";
pub const R_LABEL_03: &str = "R-LABEL-03";
pub const R_DUP_01: &str = "R-DUP-01";
pub const R_REF_01: &str = "R-REF-01";
pub const R_REF_02: &str = "R-REF-02";
pub const R_DF_01: &str = "R-DF-01";

// Traceability closure.
pub const R1: &str = "R1";
pub const R2: &str = "R2";
pub const R3: &str = "R3";
pub const R4: &str = "R4";
pub const R5: &str = "R5";
pub const R6: &str = "R6";
pub const R7: &str = "R7";
pub const R8: &str = "R8";

// Elicitation and mapping.
pub const R_ELIC_02: &str = "R-ELIC-02";
pub const E_MAP_01: &str = "E-MAP-01";

// Style lints.
pub const R_NUM_01: &str = "R-NUM-01";
pub const R_SUBJ_01: &str = "R-SUBJ-01";
pub const R_DESC_01: &str = "R-DESC-01";

pub struct RuleInfo {
    pub code: &'static str,
    pub severity: Severity,
    pub summary: &'static str,
}

pub const REGISTRY: &[RuleInfo] = &[
    RuleInfo { code: R_SYNTAX_01, severity: Severity::Error, summary: "statement is malformed" },
    RuleInfo { code: R_LABEL_01, severity: Severity::Error, summary: "malformed label token" },
    RuleInfo { code: R_LABEL_02, severity: Severity::Error, summary: "illegal label tag chain" },
    RuleInfo { code: R_LABEL_03, severity: Severity::Error, summary: "label is missing its subject prefix" },
    RuleInfo { code: R_DUP_01, severity: Severity::Error, summary: "duplicate or overlapping declaration" },
    RuleInfo { code: R_REF_01, severity: Severity::Error, summary: "reference to an undeclared subject" },
    RuleInfo { code: R_REF_02, severity: Severity::Error, summary: "reference to an undeclared function or control action" },
    RuleInfo { code: R_DF_01, severity: Severity::Error, summary: "invalid data flow endpoints" },
    RuleInfo { code: R1, severity: Severity::Error, summary: "every vulnerability links at least one existing loss" },
    RuleInfo { code: R2, severity: Severity::Error, summary: "every vulnerability carries exactly one security attribute" },
    RuleInfo { code: R3, severity: Severity::Error, summary: "every constraint addresses at least one existing vulnerability" },
    RuleInfo { code: R4, severity: Severity::Error, summary: "every vulnerability is addressed by at least one constraint" },
    RuleInfo { code: R5, severity: Severity::Error, summary: "every IFB and ICA links at least one existing vulnerability" },
    RuleInfo { code: R6, severity: Severity::Error, summary: "every finding has an existing parent of the correct kind" },
    RuleInfo { code: R7, severity: Severity::Error, summary: "guide word family matches the finding kind" },
    RuleInfo { code: R8, severity: Severity::Error, summary: "every mapping endpoint exists with the stated kind" },
    RuleInfo { code: R_ELIC_02, severity: Severity::Warning, summary: "finding declared in a cell marked not-applicable" },
    RuleInfo { code: E_MAP_01, severity: Severity::Error, summary: "mapping references a control action with no function sequence" },
    RuleInfo { code: R_NUM_01, severity: Severity::Lint, summary: "index numbering has a gap" },
    RuleInfo { code: R_SUBJ_01, severity: Severity::Lint, summary: "subject declared but never used" },
    RuleInfo { code: R_DESC_01, severity: Severity::Lint, summary: "empty description text" },
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn codes_are_unique_and_non_empty() {
        let codes: Vec<&str> = REGISTRY.iter().map(|r| r.code).collect();
        for code in &codes {
            assert!(!code.is_empty());
        }
        let unique: HashSet<&str> = codes.iter().copied().collect();
        assert_eq!(unique.len(), codes.len());
    }
}
