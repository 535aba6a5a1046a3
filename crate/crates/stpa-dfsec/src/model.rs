//! Domain types for a full STPA-DFSec / STPA-Sec analysis.
//!
//! An [`AnalysisModel`] holds the purpose layer (losses, vulnerabilities,
//! constraints), the functional interaction structure (subjects, functions,
//! data flows), the control structure (controllers, control actions,
//! feedback), the elicited findings with their not-applicable marks, and the
//! cross-analysis mappings. All types are immutable after construction and
//! safe to share across threads.

use std::collections::BTreeMap;
use std::fmt;

use crate::diagnostics::SourceSpan;
use crate::label::{Label, LabelKind};

macro_rules! numbered_id {
    ($(#[$doc:meta])* $name:ident, $prefix:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            pub fn parse(text: &str) -> Option<$name> {
                let rest = text.strip_prefix(concat!($prefix, "-"))?;
                if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_digit()) {
                    return None;
                }
                let n: u32 = rest.parse().ok()?;
                if n == 0 {
                    return None;
                }
                Some($name(n))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "-{}"), self.0)
            }
        }
    };
}

numbered_id!(/// `L-n` loss identifier.
    LossId, "L");
numbered_id!(/// `V-n` vulnerability identifier.
    VulnerabilityId, "V");
numbered_id!(/// `SC-n` system constraint identifier.
    ConstraintId, "SC");
numbered_id!(/// `DF-n` data flow identifier.
    DataFlowId, "DF");
numbered_id!(/// `FB-n` feedback identifier.
    FeedbackId, "FB");

/// The four general loss categories, each with its fixed canonical text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LossCategory {
    Life,
    PhysicalProperty,
    NonPhysicalProperty,
    Environment,
}

impl LossCategory {
    pub const ALL: [LossCategory; 4] = [
        LossCategory::Life,
        LossCategory::PhysicalProperty,
        LossCategory::NonPhysicalProperty,
        LossCategory::Environment,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            LossCategory::Life => "life",
            LossCategory::PhysicalProperty => "physical_property",
            LossCategory::NonPhysicalProperty => "non_physical_property",
            LossCategory::Environment => "environment",
        }
    }

    pub fn from_keyword(s: &str) -> Option<LossCategory> {
        LossCategory::ALL.into_iter().find(|c| c.keyword() == s)
    }

    /// Canonical category name from the general loss list.
    pub fn name(self) -> &'static str {
        match self {
            LossCategory::Life => "Loss of life or cause injury to life",
            LossCategory::PhysicalProperty => "Loss of physical property",
            LossCategory::NonPhysicalProperty => "Loss of non-physical property",
            LossCategory::Environment => "Loss of environment",
        }
    }

    /// Canonical category description from the general loss list.
    pub fn description(self) -> &'static str {
        match self {
            LossCategory::Life => "Includes human and animal life",
            LossCategory::PhysicalProperty => {
                "Represents physical objects belonging to stakeholders (e.g. devices)"
            }
            LossCategory::NonPhysicalProperty => {
                "Represents virtual properties belonging to stakeholders (e.g. sensitive information, reputation)"
            }
            LossCategory::Environment => "Includes the natural or artificial world",
        }
    }
}

/// C.I.A. triad attribute tagged on each vulnerability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SecurityAttribute {
    Confidentiality,
    Integrity,
    Availability,
}

impl SecurityAttribute {
    pub const ALL: [SecurityAttribute; 3] = [
        SecurityAttribute::Confidentiality,
        SecurityAttribute::Integrity,
        SecurityAttribute::Availability,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            SecurityAttribute::Confidentiality => "confidentiality",
            SecurityAttribute::Integrity => "integrity",
            SecurityAttribute::Availability => "availability",
        }
    }

    pub fn from_keyword(s: &str) -> Option<SecurityAttribute> {
        SecurityAttribute::ALL.into_iter().find(|a| a.keyword() == s)
    }

    /// Capitalized form used in bracket links, e.g. `[L-1/2, Integrity]`.
    pub fn display_name(self) -> &'static str {
        match self {
            SecurityAttribute::Confidentiality => "Confidentiality",
            SecurityAttribute::Integrity => "Integrity",
            SecurityAttribute::Availability => "Availability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubjectKind {
    Technical,
    Human,
    Organization,
}

impl SubjectKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SubjectKind::Technical => "technical",
            SubjectKind::Human => "human",
            SubjectKind::Organization => "organization",
        }
    }

    pub fn from_keyword(s: &str) -> Option<SubjectKind> {
        [
            SubjectKind::Technical,
            SubjectKind::Human,
            SubjectKind::Organization,
        ]
        .into_iter()
        .find(|k| k.keyword() == s)
    }
}

/// A system component hosting functions: the label prefix letter(s).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subject {
    pub code: String,
    pub name: String,
    pub kind: SubjectKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loss {
    pub id: LossId,
    pub description: String,
    pub category: LossCategory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vulnerability {
    pub id: VulnerabilityId,
    pub description: String,
    /// Attribute clauses as declared. Closure rule R2 demands exactly one;
    /// the parser is lenient so that the rule can report the defect.
    pub attributes: Vec<SecurityAttribute>,
    pub losses: Vec<LossId>,
}

impl Vulnerability {
    pub fn attribute(&self) -> Option<SecurityAttribute> {
        self.attributes.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemConstraint {
    pub id: ConstraintId,
    pub description: String,
    pub addresses: Vec<VulnerabilityId>,
}

/// A node of the functional interaction structure. Merged declarations
/// (`P/S/D_F2`) stand for one function instance per subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub id: Label,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowEndpoint {
    /// A function reference; may name any subject slice of a merged
    /// declaration, e.g. `P_F2` against `P/S/D_F2`.
    Function(Label),
    /// An endpoint outside the modeled structure.
    External(String),
}

impl FlowEndpoint {
    pub fn as_function(&self) -> Option<&Label> {
        match self {
            FlowEndpoint::Function(l) => Some(l),
            FlowEndpoint::External(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataFlow {
    pub id: DataFlowId,
    pub source: FlowEndpoint,
    pub sink: FlowEndpoint,
    pub payload: String,
}

/// Control-structure roster entry; the name comes from the subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Controller {
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlAction {
    pub id: Label,
    pub name: String,
    pub controller: String,
    pub controlled: String,
    /// The sequence of function executions that forms this control action.
    pub functions: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    pub id: FeedbackId,
    pub source: String,
    pub sink: String,
    pub payload: String,
}

/// Kind of an elicited finding; doubles as the worksheet kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingKind {
    Ifb,
    DfLs,
    Ica,
    SecLs,
}

impl FindingKind {
    pub const ALL: [FindingKind; 4] = [
        FindingKind::Ifb,
        FindingKind::DfLs,
        FindingKind::Ica,
        FindingKind::SecLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FindingKind::Ifb => "IFB",
            FindingKind::DfLs => "DF-LS",
            FindingKind::Ica => "ICA",
            FindingKind::SecLs => "SEC-LS",
        }
    }

    pub fn from_label_kind(kind: LabelKind) -> Option<FindingKind> {
        match kind {
            LabelKind::Ifb => Some(FindingKind::Ifb),
            LabelKind::DfLs => Some(FindingKind::DfLs),
            LabelKind::Ica => Some(FindingKind::Ica),
            LabelKind::SecLs => Some(FindingKind::SecLs),
            _ => None,
        }
    }

    /// What the parent label of a finding of this kind must name.
    pub fn parent_kind(self) -> LabelKind {
        match self {
            FindingKind::Ifb => LabelKind::Function,
            FindingKind::DfLs => LabelKind::Ifb,
            FindingKind::Ica => LabelKind::ControlAction,
            FindingKind::SecLs => LabelKind::Ica,
        }
    }

    /// Guide-word family in fixed column order.
    pub fn guide_words(self) -> &'static [GuideWord] {
        match self {
            FindingKind::Ifb => &[GuideWord::Necv, GuideWord::Ecv, GuideWord::Ti],
            FindingKind::DfLs => &[
                GuideWord::FunctionItself,
                GuideWord::EnvInputs,
                GuideWord::EnvCalling,
                GuideWord::EnvComputing,
                GuideWord::EnvLinks,
            ],
            FindingKind::Ica => &[
                GuideWord::NotProviding,
                GuideWord::Providing,
                GuideWord::Timing,
            ],
            FindingKind::SecLs => &[
                GuideWord::Controller,
                GuideWord::ControlPath,
                GuideWord::ControlledProcess,
                GuideWord::FeedbackPath,
            ],
        }
    }
}

/// All guide words across the four families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GuideWord {
    // IFB family.
    Necv,
    Ecv,
    Ti,
    // DF-LS family.
    FunctionItself,
    EnvInputs,
    EnvCalling,
    EnvComputing,
    EnvLinks,
    // ICA family.
    NotProviding,
    Providing,
    Timing,
    // SEC-LS family.
    Controller,
    ControlPath,
    ControlledProcess,
    FeedbackPath,
}

impl GuideWord {
    pub const ALL: [GuideWord; 15] = [
        GuideWord::Necv,
        GuideWord::Ecv,
        GuideWord::Ti,
        GuideWord::FunctionItself,
        GuideWord::EnvInputs,
        GuideWord::EnvCalling,
        GuideWord::EnvComputing,
        GuideWord::EnvLinks,
        GuideWord::NotProviding,
        GuideWord::Providing,
        GuideWord::Timing,
        GuideWord::Controller,
        GuideWord::ControlPath,
        GuideWord::ControlledProcess,
        GuideWord::FeedbackPath,
    ];

    pub fn family(self) -> FindingKind {
        match self {
            GuideWord::Necv | GuideWord::Ecv | GuideWord::Ti => FindingKind::Ifb,
            GuideWord::FunctionItself
            | GuideWord::EnvInputs
            | GuideWord::EnvCalling
            | GuideWord::EnvComputing
            | GuideWord::EnvLinks => FindingKind::DfLs,
            GuideWord::NotProviding | GuideWord::Providing | GuideWord::Timing => FindingKind::Ica,
            GuideWord::Controller
            | GuideWord::ControlPath
            | GuideWord::ControlledProcess
            | GuideWord::FeedbackPath => FindingKind::SecLs,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            GuideWord::Necv => "NECV",
            GuideWord::Ecv => "ECV",
            GuideWord::Ti => "TI",
            GuideWord::FunctionItself => "function_itself",
            GuideWord::EnvInputs => "env_inputs",
            GuideWord::EnvCalling => "env_calling",
            GuideWord::EnvComputing => "env_computing",
            GuideWord::EnvLinks => "env_links",
            GuideWord::NotProviding => "not_providing",
            GuideWord::Providing => "providing",
            GuideWord::Timing => "timing",
            GuideWord::Controller => "controller",
            GuideWord::ControlPath => "control_path",
            GuideWord::ControlledProcess => "controlled_process",
            GuideWord::FeedbackPath => "feedback_path",
        }
    }

    pub fn from_keyword(s: &str) -> Option<GuideWord> {
        GuideWord::ALL.into_iter().find(|g| g.keyword() == s)
    }

    /// Column heading used in emitted worksheets and tables.
    pub fn display_name(self) -> &'static str {
        match self {
            GuideWord::Necv => "NECV",
            GuideWord::Ecv => "ECV",
            GuideWord::Ti => "TI",
            GuideWord::FunctionItself => "Function Itself",
            GuideWord::EnvInputs => "Env-Function Inputs",
            GuideWord::EnvCalling => "Env-Calling Behaviors",
            GuideWord::EnvComputing => "Env-Computing Resources",
            GuideWord::EnvLinks => "Env-Links",
            GuideWord::NotProviding => "Not Providing",
            GuideWord::Providing => "Providing",
            GuideWord::Timing => "Timing Issues",
            GuideWord::Controller => "Controller",
            GuideWord::ControlPath => "Control Path",
            GuideWord::ControlledProcess => "Controlled Process",
            GuideWord::FeedbackPath => "Feedback Path",
        }
    }
}

/// A guide-word-classified insecure item: IFB, ICA or loss scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub id: Label,
    pub guide_word: GuideWord,
    pub description: String,
    pub vulnerabilities: Vec<VulnerabilityId>,
}

impl Finding {
    pub fn kind(&self) -> Option<FindingKind> {
        FindingKind::from_label_kind(self.id.kind())
    }

    pub fn parent(&self) -> Option<Label> {
        self.id.parent()
    }
}

/// Analyst-asserted "considered, not applicable" mark on a worksheet cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaMark {
    /// Function, IFB, control action or ICA label naming the row.
    pub target: Label,
    pub guide_word: GuideWord,
}

/// Declared STPA-Sec to STPA-DFSec loss-scenario mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingEntry {
    pub sec_ls: Label,
    pub df_ls: Label,
}

/// Heuristic compatibility level of a guide-word pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompatLevel {
    Strong,
    Plausible,
    Incompatible,
}

impl CompatLevel {
    pub fn keyword(self) -> &'static str {
        match self {
            CompatLevel::Strong => "strong",
            CompatLevel::Plausible => "plausible",
            CompatLevel::Incompatible => "incompatible",
        }
    }

    pub fn from_keyword(s: &str) -> Option<CompatLevel> {
        [
            CompatLevel::Strong,
            CompatLevel::Plausible,
            CompatLevel::Incompatible,
        ]
        .into_iter()
        .find(|l| l.keyword() == s)
    }
}

/// Per-model override of one compatibility matrix cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatOverride {
    pub sec_gw: GuideWord,
    pub df_gw: GuideWord,
    pub level: CompatLevel,
}

/// Side table of declaration spans, keyed by `kind:id` strings. Not part
/// of model equality: two models parsed from differently formatted sources
/// compare equal when their content matches.
pub type SpanTable = BTreeMap<String, SourceSpan>;

pub fn span_key(kind: &str, id: &str) -> String {
    format!("{kind}:{id}")
}

/// The whole analysis.
#[derive(Debug, Clone, Default)]
pub struct AnalysisModel {
    pub system: Option<String>,
    pub subjects: Vec<Subject>,
    pub losses: Vec<Loss>,
    pub vulnerabilities: Vec<Vulnerability>,
    pub constraints: Vec<SystemConstraint>,
    pub functions: Vec<Function>,
    pub dataflows: Vec<DataFlow>,
    pub controllers: Vec<Controller>,
    pub control_actions: Vec<ControlAction>,
    pub feedbacks: Vec<Feedback>,
    pub findings: Vec<Finding>,
    pub na_marks: Vec<NaMark>,
    pub mappings: Vec<MappingEntry>,
    pub compat_overrides: Vec<CompatOverride>,
    pub decl_spans: SpanTable,
}

impl PartialEq for AnalysisModel {
    fn eq(&self, other: &AnalysisModel) -> bool {
        self.system == other.system
            && self.subjects == other.subjects
            && self.losses == other.losses
            && self.vulnerabilities == other.vulnerabilities
            && self.constraints == other.constraints
            && self.functions == other.functions
            && self.dataflows == other.dataflows
            && self.controllers == other.controllers
            && self.control_actions == other.control_actions
            && self.feedbacks == other.feedbacks
            && self.findings == other.findings
            && self.na_marks == other.na_marks
            && self.mappings == other.mappings
            && self.compat_overrides == other.compat_overrides
    }
}

impl Eq for AnalysisModel {}

impl AnalysisModel {
    pub fn subject(&self, code: &str) -> Option<&Subject> {
        self.subjects.iter().find(|s| s.code == code)
    }

    pub fn loss(&self, id: LossId) -> Option<&Loss> {
        self.losses.iter().find(|l| l.id == id)
    }

    pub fn vulnerability(&self, id: VulnerabilityId) -> Option<&Vulnerability> {
        self.vulnerabilities.iter().find(|v| v.id == id)
    }

    pub fn constraint(&self, id: ConstraintId) -> Option<&SystemConstraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    /// Resolve a function reference, accepting any subject slice of a
    /// merged declaration.
    pub fn resolve_function(&self, label: &Label) -> Option<&Function> {
        self.functions.iter().find(|f| label.is_variant_of(&f.id))
    }

    pub fn resolve_control_action(&self, label: &Label) -> Option<&ControlAction> {
        self.control_actions
            .iter()
            .find(|c| label.is_variant_of(&c.id))
    }

    /// Resolve a finding reference, accepting any subject slice of a
    /// merged declaration.
    pub fn resolve_finding(&self, label: &Label) -> Option<&Finding> {
        self.findings.iter().find(|f| label.is_variant_of(&f.id))
    }

    pub fn findings_of_kind(&self, kind: FindingKind) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(move |f| f.kind() == Some(kind))
    }

    /// Per-subject function instances in canonical order: merged
    /// declarations expand to one instance per subject.
    pub fn function_instances(&self) -> Vec<(Label, &Function)> {
        let mut out: Vec<(Label, &Function)> = self
            .functions
            .iter()
            .flat_map(|f| f.id.expand_merged().into_iter().map(move |l| (l, f)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Data flows entering a function instance (or any slice of it).
    pub fn function_inputs(&self, function: &Label) -> Vec<&DataFlow> {
        self.dataflows
            .iter()
            .filter(|df| matches!(&df.sink, FlowEndpoint::Function(l) if l.is_variant_of(function) || function.is_variant_of(l)))
            .collect()
    }

    /// Data flows leaving a function instance (or any slice of it).
    pub fn function_outputs(&self, function: &Label) -> Vec<&DataFlow> {
        self.dataflows
            .iter()
            .filter(|df| matches!(&df.source, FlowEndpoint::Function(l) if l.is_variant_of(function) || function.is_variant_of(l)))
            .collect()
    }

    pub fn span_of(&self, kind: &str, id: &str) -> Option<SourceSpan> {
        self.decl_spans.get(&span_key(kind, id)).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_id_parse_and_display() {
        assert_eq!(LossId::parse("L-3"), Some(LossId(3)));
        assert_eq!(LossId(3).to_string(), "L-3");
        assert_eq!(ConstraintId::parse("SC-12"), Some(ConstraintId(12)));
        assert_eq!(LossId::parse("L-0"), None);
        assert_eq!(LossId::parse("V-1"), None);
        assert_eq!(LossId::parse("L-"), None);
        assert_eq!(LossId::parse("L-1x"), None);
    }

    #[test]
    fn guide_word_families_are_fixed() {
        assert_eq!(FindingKind::Ifb.guide_words().len(), 3);
        assert_eq!(FindingKind::DfLs.guide_words().len(), 5);
        assert_eq!(FindingKind::Ica.guide_words().len(), 3);
        assert_eq!(FindingKind::SecLs.guide_words().len(), 4);
        for kind in FindingKind::ALL {
            for gw in kind.guide_words() {
                assert_eq!(gw.family(), kind);
            }
        }
        // Every guide word appears in exactly one family.
        let total: usize = FindingKind::ALL
            .iter()
            .map(|k| k.guide_words().len())
            .sum();
        assert_eq!(total, GuideWord::ALL.len());
    }

    #[test]
    fn keyword_round_trip() {
        for gw in GuideWord::ALL {
            assert_eq!(GuideWord::from_keyword(gw.keyword()), Some(gw));
        }
        for cat in LossCategory::ALL {
            assert_eq!(LossCategory::from_keyword(cat.keyword()), Some(cat));
        }
        for attr in SecurityAttribute::ALL {
            assert_eq!(SecurityAttribute::from_keyword(attr.keyword()), Some(attr));
        }
    }

    #[test]
    fn resolve_accepts_merged_slices() {
        let mut m = AnalysisModel::default();
        m.functions.push(Function {
            id: Label::parse("P/S/D_F2").unwrap(),
            name: "Data transmission".into(),
        });
        assert!(m.resolve_function(&Label::parse("S_F2").unwrap()).is_some());
        assert!(m.resolve_function(&Label::parse("U_F2").unwrap()).is_none());
    }
}
