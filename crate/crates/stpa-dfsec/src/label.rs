//! Structured labels for functions, control actions and findings.
//!
//! A label is one or more subject codes joined by `/`, followed by
//! `_`-separated segments: `P_F1`, `U_CA2_ICA1_LS2`, `P/S/D_F2_IFB3`.
//! A label with several subjects is a merged label covering each subject
//! with the same segment chain; [`Label::expand_merged`] yields the
//! per-subject variants.

use std::fmt;

use thiserror::Error;

/// Segment tag. Declaration order fixes the canonical tag rank used for
/// ordering: `F < CA < IFB < ICA < LS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    F,
    Ca,
    Ifb,
    Ica,
    Ls,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::F => "F",
            Tag::Ca => "CA",
            Tag::Ifb => "IFB",
            Tag::Ica => "ICA",
            Tag::Ls => "LS",
        }
    }

    fn from_str(s: &str) -> Option<Tag> {
        match s {
            "F" => Some(Tag::F),
            "CA" => Some(Tag::Ca),
            "IFB" => Some(Tag::Ifb),
            "ICA" => Some(Tag::Ica),
            "LS" => Some(Tag::Ls),
            _ => None,
        }
    }
}

/// One `tag + index` step of a label chain, e.g. `IFB3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    pub tag: Tag,
    pub index: u32,
}

impl Segment {
    pub fn new(tag: Tag, index: u32) -> Segment {
        Segment { tag, index }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.tag.as_str(), self.index)
    }
}

/// What a label names, determined by its segment chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelKind {
    Function,
    ControlAction,
    Ifb,
    Ica,
    DfLs,
    SecLs,
}

/// Error raised by [`Label::parse`], with the byte offset of the offending
/// token in the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("malformed label token at byte {offset}: {detail}")]
    MalformedToken { offset: usize, detail: String },
    #[error("illegal tag chain at byte {offset}: {detail}")]
    IllegalChain { offset: usize, detail: String },
    #[error("label must begin with a subject code (byte {offset})")]
    MissingSubject { offset: usize },
}

impl LabelError {
    pub fn offset(&self) -> usize {
        match self {
            LabelError::MalformedToken { offset, .. }
            | LabelError::IllegalChain { offset, .. }
            | LabelError::MissingSubject { offset } => *offset,
        }
    }
}

/// A parsed label. Ordering is the canonical order: subject lists compare
/// lexicographically, then segments by tag rank and numeric index, with a
/// prefix sorting before its extensions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub subjects: Vec<String>,
    pub segments: Vec<Segment>,
}

/// Subject codes must start with an uppercase letter and must not look
/// like a segment token (`F2`, `CA1`, ...), which is reserved.
pub fn is_valid_subject_code(code: &str) -> bool {
    let mut chars = code.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {}
        _ => return false,
    }
    if !chars.all(|c| c.is_ascii_alphanumeric()) {
        return false;
    }
    !is_segment_shaped(code)
}

fn is_segment_shaped(token: &str) -> bool {
    let alpha: String = token.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let rest = &token[alpha.len()..];
    Tag::from_str(&alpha).is_some() && !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())
}

fn legal_chain(segments: &[Segment]) -> bool {
    let tags: Vec<Tag> = segments.iter().map(|s| s.tag).collect();
    matches!(
        tags.as_slice(),
        [Tag::F]
            | [Tag::F, Tag::Ifb]
            | [Tag::F, Tag::Ifb, Tag::Ls]
            | [Tag::Ca]
            | [Tag::Ca, Tag::Ica]
            | [Tag::Ca, Tag::Ica, Tag::Ls]
    )
}

impl Label {
    pub fn new(subjects: Vec<String>, segments: Vec<Segment>) -> Label {
        Label { subjects, segments }
    }

    /// Parse the `subjects := code ('/' code)*; label := subjects ('_' tag index)+`
    /// grammar and check chain legality.
    pub fn parse(text: &str) -> Result<Label, LabelError> {
        let mut subjects = Vec::new();
        let mut segments = Vec::new();

        let mut parts = Vec::new();
        let mut start = 0;
        for (i, c) in text.char_indices() {
            if c == '_' {
                parts.push((start, &text[start..i]));
                start = i + 1;
            }
        }
        parts.push((start, &text[start..]));

        let (head_off, head) = parts[0];
        if head.is_empty() || is_segment_shaped(head) {
            return Err(LabelError::MissingSubject { offset: head_off });
        }
        let mut code_start = head_off;
        for code in head.split('/') {
            if code.is_empty() {
                return Err(LabelError::MissingSubject { offset: code_start });
            }
            if !is_valid_subject_code(code) {
                return Err(LabelError::MalformedToken {
                    offset: code_start,
                    detail: format!("invalid subject code `{code}`"),
                });
            }
            subjects.push(code.to_string());
            code_start += code.len() + 1;
        }

        for &(off, part) in &parts[1..] {
            let alpha: String = part.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
            let digits = &part[alpha.len()..];
            let tag = Tag::from_str(&alpha).ok_or_else(|| LabelError::MalformedToken {
                offset: off,
                detail: format!("unknown segment tag in `{part}`"),
            })?;
            if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
                return Err(LabelError::MalformedToken {
                    offset: off,
                    detail: format!("segment `{part}` needs a numeric index"),
                });
            }
            let index: u32 = digits.parse().map_err(|_| LabelError::MalformedToken {
                offset: off,
                detail: format!("index out of range in `{part}`"),
            })?;
            if index == 0 {
                return Err(LabelError::MalformedToken {
                    offset: off,
                    detail: format!("segment index must be positive in `{part}`"),
                });
            }
            segments.push(Segment::new(tag, index));
        }

        if segments.is_empty() {
            return Err(LabelError::IllegalChain {
                offset: text.len(),
                detail: "label has no segments".to_string(),
            });
        }
        if !legal_chain(&segments) {
            let chain: Vec<&str> = segments.iter().map(|s| s.tag.as_str()).collect();
            return Err(LabelError::IllegalChain {
                offset: parts[1].0,
                detail: format!("`{}` is not a legal chain", chain.join("·")),
            });
        }
        Ok(Label { subjects, segments })
    }

    /// Canonical printing: subjects in declaration order joined by `/`,
    /// segments appended with `_`, no whitespace, no leading zeros.
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// One label per subject, each with the identical segment chain.
    pub fn expand_merged(&self) -> Vec<Label> {
        self.subjects
            .iter()
            .map(|s| Label::new(vec![s.clone()], self.segments.clone()))
            .collect()
    }

    pub fn kind(&self) -> LabelKind {
        let tags: Vec<Tag> = self.segments.iter().map(|s| s.tag).collect();
        match tags.as_slice() {
            [Tag::F] => LabelKind::Function,
            [Tag::F, Tag::Ifb] => LabelKind::Ifb,
            [Tag::F, Tag::Ifb, Tag::Ls] => LabelKind::DfLs,
            [Tag::Ca] => LabelKind::ControlAction,
            [Tag::Ca, Tag::Ica] => LabelKind::Ica,
            [Tag::Ca, Tag::Ica, Tag::Ls] => LabelKind::SecLs,
            _ => unreachable!("constructed labels always have a legal chain"),
        }
    }

    /// The label with the last segment removed; `None` for depth-one labels.
    pub fn parent(&self) -> Option<Label> {
        if self.segments.len() <= 1 {
            return None;
        }
        let mut segments = self.segments.clone();
        segments.pop();
        Some(Label::new(self.subjects.clone(), segments))
    }

    /// `true` when this label names a slice of `declared`: same segment
    /// chain, subjects a non-empty subset of the declared subjects.
    pub fn is_variant_of(&self, declared: &Label) -> bool {
        self.segments == declared.segments
            && !self.subjects.is_empty()
            && self.subjects.iter().all(|s| declared.subjects.contains(s))
    }

    /// `declared` narrowed to the subjects satisfying `keep`, preserving
    /// declaration order. Returns `None` when no subject survives.
    pub fn narrowed(declared: &Label, keep: impl Fn(&str) -> bool) -> Option<Label> {
        let subjects: Vec<String> = declared
            .subjects
            .iter()
            .filter(|s| keep(s))
            .cloned()
            .collect();
        if subjects.is_empty() {
            None
        } else {
            Some(Label::new(subjects, declared.segments.clone()))
        }
    }

    pub fn last_index(&self) -> u32 {
        self.segments.last().expect("labels have segments").index
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.subjects.join("/"))?;
        for seg in &self.segments {
            write!(f, "_{seg}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Label {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Label, LabelError> {
        Label::parse(s)
    }
}

/// Total canonical order over labels; every emitter sorts with this.
pub fn canonical_order(a: &Label, b: &Label) -> std::cmp::Ordering {
    a.cmp(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(tag: Tag, index: u32) -> Segment {
        Segment::new(tag, index)
    }

    #[test]
    fn parses_merged_finding_label() {
        let l = Label::parse("P/S/D_F2_IFB3_LS1").unwrap();
        assert_eq!(l.subjects, vec!["P", "S", "D"]);
        assert_eq!(
            l.segments,
            vec![seg(Tag::F, 2), seg(Tag::Ifb, 3), seg(Tag::Ls, 1)]
        );
        assert_eq!(l.kind(), LabelKind::DfLs);
    }

    #[test]
    fn parses_control_side_label() {
        let l = Label::parse("U_CA2_ICA1_LS2").unwrap();
        assert_eq!(l.subjects, vec!["U"]);
        assert_eq!(
            l.segments,
            vec![seg(Tag::Ca, 2), seg(Tag::Ica, 1), seg(Tag::Ls, 2)]
        );
        assert_eq!(l.kind(), LabelKind::SecLs);
    }

    #[test]
    fn parses_minimal_label() {
        let l = Label::parse("P_F1").unwrap();
        assert_eq!(l.subjects, vec!["P"]);
        assert_eq!(l.segments, vec![seg(Tag::F, 1)]);
        assert_eq!(l.kind(), LabelKind::Function);
    }

    #[test]
    fn rejects_missing_subject_prefix() {
        let err = Label::parse("F2_IFB1").unwrap_err();
        assert!(matches!(err, LabelError::MissingSubject { offset: 0 }));
    }

    #[test]
    fn rejects_illegal_chains() {
        // LS directly under F.
        let err = Label::parse("P_F2_LS1").unwrap_err();
        assert!(matches!(err, LabelError::IllegalChain { .. }));
        // ICA under F.
        assert!(Label::parse("P_F1_ICA1").is_err());
        // Bare subject.
        assert!(matches!(
            Label::parse("P").unwrap_err(),
            LabelError::IllegalChain { .. }
        ));
    }

    #[test]
    fn rejects_malformed_tokens_with_offsets() {
        let err = Label::parse("P_FB1").unwrap_err();
        assert!(matches!(err, LabelError::MalformedToken { offset: 2, .. }));
        let err = Label::parse("P_F0").unwrap_err();
        assert!(matches!(err, LabelError::MalformedToken { .. }));
        let err = Label::parse("P/_F1").unwrap_err();
        assert!(matches!(err, LabelError::MissingSubject { offset: 2 }));
    }

    #[test]
    fn renders_paper_notation() {
        let l = Label::new(
            vec!["P".into(), "S".into(), "D".into()],
            vec![seg(Tag::F, 2), seg(Tag::Ifb, 3)],
        );
        assert_eq!(l.render(), "P/S/D_F2_IFB3");
        let l = Label::new(
            vec!["D".into()],
            vec![seg(Tag::Ca, 1), seg(Tag::Ica, 3), seg(Tag::Ls, 1)],
        );
        assert_eq!(l.render(), "D_CA1_ICA3_LS1");
    }

    #[test]
    fn leading_zeros_parse_but_render_canonically() {
        let l = Label::parse("P_F007").unwrap();
        assert_eq!(l.render(), "P_F7");
    }

    #[test]
    fn expand_merged_preserves_chain() {
        let l = Label::parse("P/S/D_F2_IFB1").unwrap();
        let expanded: Vec<String> = l.expand_merged().iter().map(Label::render).collect();
        assert_eq!(expanded, vec!["P_F2_IFB1", "S_F2_IFB1", "D_F2_IFB1"]);

        let single = Label::parse("U_F7_IFB2").unwrap();
        assert_eq!(single.expand_merged(), vec![single.clone()]);

        assert_eq!(Label::parse("U/M_F7_IFB1").unwrap().expand_merged().len(), 2);
    }

    #[test]
    fn canonical_order_examples() {
        let parse = |s: &str| Label::parse(s).unwrap();
        assert!(parse("P_F1") < parse("P_F2"));
        assert!(parse("P_F2") < parse("P_F2_IFB1"));
        assert!(parse("D_CA1_ICA1") < parse("D_CA1_ICA2"));
        // Tag rank: F sorts before CA.
        assert!(parse("P_F9") < parse("P_CA1"));
    }

    #[test]
    fn variant_matching() {
        let declared = Label::parse("P/S/D_F2").unwrap();
        assert!(Label::parse("S_F2").unwrap().is_variant_of(&declared));
        assert!(Label::parse("S/D_F2").unwrap().is_variant_of(&declared));
        assert!(!Label::parse("U_F2").unwrap().is_variant_of(&declared));
        assert!(!Label::parse("S_F3").unwrap().is_variant_of(&declared));
    }
}
