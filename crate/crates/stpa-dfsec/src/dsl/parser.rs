//! Parser for the `.stpa` model format.
//!
//! Statements are newline-terminated; indented lines continue the previous
//! statement; `#` starts a comment. The parser recovers per statement and
//! never stops at the first error: every diagnostic found in one pass is
//! reported.

use crate::diagnostics::{has_errors, Diagnostic, SourceSpan};
use crate::label::{Label, LabelError, LabelKind};
use crate::model::*;
use crate::rules;
use crate::{elicitation, traceability};

/// Result of [`parse_model`]: the best-effort model plus every diagnostic
/// found. The model of a source with error diagnostics is a recovery
/// artifact; callers should treat it as unusable for reporting.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub model: AnalysisModel,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseOutcome {
    pub fn is_valid(&self) -> bool {
        !has_errors(&self.diagnostics)
    }
}

/// Parse a `.stpa` source. `file` is used in diagnostic spans only.
pub fn parse_model(source: &str, file: &str) -> ParseOutcome {
    let (statements, mut diagnostics) = tokenize(source, file);
    let mut model = AnalysisModel::default();
    let mut builder = Builder {
        file,
        diags: &mut diagnostics,
    };
    for stmt in &statements {
        builder.statement(&mut model, stmt);
    }
    builder.structural(&mut model);
    diagnostics.extend(traceability::check_closure(&model));
    diagnostics.extend(elicitation::na_conflicts(&model));
    ParseOutcome {
        model,
        diagnostics,
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Word(String),
    Str(String),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    line: usize,
    col: usize,
    len: usize,
}

impl Token {
    fn span(&self, file: &str) -> SourceSpan {
        SourceSpan::new(file, self.line, self.col, self.len)
    }
}

#[derive(Debug)]
struct RawStatement {
    tokens: Vec<Token>,
}

fn tokenize(source: &str, file: &str) -> (Vec<RawStatement>, Vec<Diagnostic>) {
    let mut statements: Vec<RawStatement> = Vec::new();
    let mut diags = Vec::new();

    for (line_idx, line) in source.lines().enumerate() {
        let line_no = line_idx + 1;
        let indented = line.starts_with(|c: char| c.is_whitespace());
        let mut tokens = Vec::new();
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            if c == '"' {
                let start = i;
                i += 1;
                let mut text = String::new();
                let mut closed = false;
                while i < chars.len() {
                    match chars[i] {
                        '\\' if i + 1 < chars.len() => {
                            text.push(chars[i + 1]);
                            i += 2;
                        }
                        '"' => {
                            i += 1;
                            closed = true;
                            break;
                        }
                        other => {
                            text.push(other);
                            i += 1;
                        }
                    }
                }
                if !closed {
                    diags.push(
                        Diagnostic::error(rules::R_SYNTAX_01, "unterminated string literal")
                            .with_span(SourceSpan::new(file, line_no, start + 1, i - start)),
                    );
                }
                tokens.push(Token {
                    kind: TokKind::Str(text),
                    line: line_no,
                    col: start + 1,
                    len: i - start,
                });
            } else {
                let start = i;
                while i < chars.len() {
                    let c = chars[i];
                    if c.is_whitespace() || c == '"' || c == '#' {
                        break;
                    }
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                tokens.push(Token {
                    kind: TokKind::Word(word),
                    line: line_no,
                    col: start + 1,
                    len: i - start,
                });
            }
        }
        if tokens.is_empty() {
            continue;
        }
        if indented {
            match statements.last_mut() {
                Some(stmt) => stmt.tokens.extend(tokens),
                None => diags.push(
                    Diagnostic::error(
                        rules::R_SYNTAX_01,
                        "continuation line without a preceding statement",
                    )
                    .with_span(tokens[0].span(file)),
                ),
            }
        } else {
            statements.push(RawStatement { tokens });
        }
    }
    (statements, diags)
}

// ---------------------------------------------------------------------------
// Statement parsing
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
    file: &'a str,
}

impl<'a> Cursor<'a> {
    fn head_span(&self) -> SourceSpan {
        self.tokens[0].span(self.file)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek_word(&self) -> Option<&str> {
        match self.tokens.get(self.pos).map(|t| &t.kind) {
            Some(TokKind::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn next_word(&mut self, what: &str) -> Result<(String, SourceSpan), Diagnostic> {
        match self.tokens.get(self.pos) {
            Some(t) => match &t.kind {
                TokKind::Word(w) => {
                    self.pos += 1;
                    Ok((w.clone(), t.span(self.file)))
                }
                TokKind::Str(_) => Err(Diagnostic::error(
                    rules::R_SYNTAX_01,
                    format!("expected {what}, found string literal"),
                )
                .with_span(t.span(self.file))),
            },
            None => Err(Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("expected {what}, found end of statement"),
            )
            .with_span(self.head_span())),
        }
    }

    fn next_str(&mut self, what: &str) -> Result<(String, SourceSpan), Diagnostic> {
        match self.tokens.get(self.pos) {
            Some(t) => match &t.kind {
                TokKind::Str(s) => {
                    self.pos += 1;
                    Ok((s.clone(), t.span(self.file)))
                }
                TokKind::Word(w) => Err(Diagnostic::error(
                    rules::R_SYNTAX_01,
                    format!("expected {what} in quotes, found `{w}`"),
                )
                .with_span(t.span(self.file))),
            },
            None => Err(Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("expected {what} in quotes, found end of statement"),
            )
            .with_span(self.head_span())),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), Diagnostic> {
        let (word, span) = self.next_word(&format!("`{kw}`"))?;
        if word == kw {
            Ok(())
        } else {
            Err(
                Diagnostic::error(rules::R_SYNTAX_01, format!("expected `{kw}`, found `{word}`"))
                    .with_span(span),
            )
        }
    }

    fn finish(&self) -> Result<(), Diagnostic> {
        match self.tokens.get(self.pos) {
            None => Ok(()),
            Some(t) => {
                let text = match &t.kind {
                    TokKind::Word(w) => w.clone(),
                    TokKind::Str(s) => format!("\"{s}\""),
                };
                Err(Diagnostic::error(
                    rules::R_SYNTAX_01,
                    format!("unexpected trailing `{text}`"),
                )
                .with_span(t.span(self.file)))
            }
        }
    }
}

fn label_diag(err: &LabelError, span: &SourceSpan) -> Diagnostic {
    let rule = match err {
        LabelError::MalformedToken { .. } => rules::R_LABEL_01,
        LabelError::IllegalChain { .. } => rules::R_LABEL_02,
        LabelError::MissingSubject { .. } => rules::R_LABEL_03,
    };
    let mut at = span.clone();
    at.column += err.offset();
    Diagnostic::error(rule, err.to_string()).with_span(at)
}

fn parse_label_token(
    word: &str,
    span: &SourceSpan,
    expected: &[LabelKind],
    context: &str,
) -> Result<Label, Diagnostic> {
    let label = Label::parse(word).map_err(|e| label_diag(&e, span))?;
    if !expected.contains(&label.kind()) {
        return Err(Diagnostic::error(
            rules::R_LABEL_02,
            format!("`{word}` is not a valid {context} label"),
        )
        .with_span(span.clone()));
    }
    Ok(label)
}

struct Builder<'a> {
    file: &'a str,
    diags: &'a mut Vec<Diagnostic>,
}

impl<'a> Builder<'a> {
    fn statement(&mut self, model: &mut AnalysisModel, stmt: &RawStatement) {
        let mut cur = Cursor {
            tokens: &stmt.tokens,
            pos: 0,
            file: self.file,
        };
        let result = match cur.peek_word() {
            Some("system") => self.system(model, &mut cur),
            Some("subject") => self.subject(model, &mut cur),
            Some("loss") => self.loss(model, &mut cur),
            Some("vulnerability") => self.vulnerability(model, &mut cur),
            Some("constraint") => self.constraint(model, &mut cur),
            Some("function") => self.function(model, &mut cur),
            Some("dataflow") => self.dataflow(model, &mut cur),
            Some("controller") => self.controller(model, &mut cur),
            Some("control_action") => self.control_action(model, &mut cur),
            Some("feedback") => self.feedback(model, &mut cur),
            Some("ifb") => self.finding(model, &mut cur, "ifb", LabelKind::Ifb),
            Some("ls") => self.finding(model, &mut cur, "ls", LabelKind::DfLs),
            Some("ica") => self.finding(model, &mut cur, "ica", LabelKind::Ica),
            Some("sls") => self.finding(model, &mut cur, "sls", LabelKind::SecLs),
            Some("map") => self.map(model, &mut cur),
            Some("na") => self.na(model, &mut cur),
            Some("compat") => self.compat(model, &mut cur),
            Some(other) => Err(Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("unknown statement keyword `{other}`"),
            )
            .with_span(cur.head_span())),
            None => Err(Diagnostic::error(
                rules::R_SYNTAX_01,
                "statement must start with a keyword",
            )
            .with_span(cur.head_span())),
        };
        if let Err(d) = result {
            self.diags.push(d);
        }
    }

    fn system(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("system")?;
        let (name, span) = cur.next_str("system name")?;
        cur.finish()?;
        if model.system.is_some() {
            return Err(
                Diagnostic::error(rules::R_DUP_01, "duplicate `system` statement").with_span(span),
            );
        }
        model.system = Some(name);
        Ok(())
    }

    fn subject(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("subject")?;
        let (code, span) = cur.next_word("subject code")?;
        if !crate::label::is_valid_subject_code(&code) {
            return Err(Diagnostic::error(
                rules::R_LABEL_01,
                format!("invalid subject code `{code}`"),
            )
            .with_span(span));
        }
        let (name, _) = cur.next_str("subject name")?;
        cur.keyword("kind")?;
        let (kind_word, kind_span) = cur.next_word("subject kind")?;
        let kind = SubjectKind::from_keyword(&kind_word).ok_or_else(|| {
            Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("unknown subject kind `{kind_word}`"),
            )
            .with_span(kind_span)
        })?;
        cur.finish()?;
        if model.subject(&code).is_some() {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("subject `{code}` is already declared"),
            )
            .with_span(span));
        }
        model
            .decl_spans
            .insert(span_key("subject", &code), span);
        model.subjects.push(Subject { code, name, kind });
        Ok(())
    }

    fn loss(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("loss")?;
        let (id_word, span) = cur.next_word("loss id like L-1")?;
        let id = LossId::parse(&id_word).ok_or_else(|| {
            Diagnostic::error(rules::R_SYNTAX_01, format!("invalid loss id `{id_word}`"))
                .with_span(span.clone())
        })?;
        let (description, _) = cur.next_str("loss description")?;
        cur.keyword("category")?;
        let (cat_word, cat_span) = cur.next_word("loss category")?;
        let category = LossCategory::from_keyword(&cat_word).ok_or_else(|| {
            Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("unknown loss category `{cat_word}`"),
            )
            .with_span(cat_span)
        })?;
        cur.finish()?;
        if model.loss(id).is_some() {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("loss {id} is already declared"),
            )
            .with_span(span));
        }
        model
            .decl_spans
            .insert(span_key("loss", &id.to_string()), span);
        model.losses.push(Loss {
            id,
            description,
            category,
        });
        Ok(())
    }

    fn vulnerability(
        &mut self,
        model: &mut AnalysisModel,
        cur: &mut Cursor,
    ) -> Result<(), Diagnostic> {
        cur.keyword("vulnerability")?;
        let (id_word, span) = cur.next_word("vulnerability id like V-1")?;
        let id = VulnerabilityId::parse(&id_word).ok_or_else(|| {
            Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("invalid vulnerability id `{id_word}`"),
            )
            .with_span(span.clone())
        })?;
        let (description, _) = cur.next_str("vulnerability description")?;
        let mut attributes = Vec::new();
        let mut losses = Vec::new();
        while !cur.at_end() {
            match cur.peek_word() {
                Some("attribute") => {
                    cur.keyword("attribute")?;
                    let (word, aspan) = cur.next_word("security attribute")?;
                    let attr = SecurityAttribute::from_keyword(&word).ok_or_else(|| {
                        Diagnostic::error(
                            rules::R_SYNTAX_01,
                            format!("unknown security attribute `{word}`"),
                        )
                        .with_span(aspan)
                    })?;
                    attributes.push(attr);
                }
                Some("losses") => {
                    cur.keyword("losses")?;
                    self.id_list(cur, "loss id like L-1", &mut losses, LossId::parse)?;
                }
                _ => cur.finish()?,
            }
        }
        if model.vulnerability(id).is_some() {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("vulnerability {id} is already declared"),
            )
            .with_span(span));
        }
        model
            .decl_spans
            .insert(span_key("vulnerability", &id.to_string()), span);
        model.vulnerabilities.push(Vulnerability {
            id,
            description,
            attributes,
            losses,
        });
        Ok(())
    }

    fn constraint(
        &mut self,
        model: &mut AnalysisModel,
        cur: &mut Cursor,
    ) -> Result<(), Diagnostic> {
        cur.keyword("constraint")?;
        let (id_word, span) = cur.next_word("constraint id like SC-1")?;
        let id = ConstraintId::parse(&id_word).ok_or_else(|| {
            Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("invalid constraint id `{id_word}`"),
            )
            .with_span(span.clone())
        })?;
        let (description, _) = cur.next_str("constraint description")?;
        let mut addresses = Vec::new();
        if cur.peek_word() == Some("addresses") {
            cur.keyword("addresses")?;
            self.id_list(
                cur,
                "vulnerability id like V-1",
                &mut addresses,
                VulnerabilityId::parse,
            )?;
        }
        cur.finish()?;
        if model.constraint(id).is_some() {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("constraint {id} is already declared"),
            )
            .with_span(span));
        }
        model
            .decl_spans
            .insert(span_key("constraint", &id.to_string()), span);
        model.constraints.push(SystemConstraint {
            id,
            description,
            addresses,
        });
        Ok(())
    }

    fn id_list<T>(
        &mut self,
        cur: &mut Cursor,
        what: &str,
        out: &mut Vec<T>,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<(), Diagnostic> {
        while let Some(word) = cur.peek_word() {
            if matches!(
                word,
                "attribute" | "losses" | "addresses" | "functions" | "vulnerabilities"
            ) {
                break;
            }
            let (word, span) = cur.next_word(what)?;
            let id = parse(&word).ok_or_else(|| {
                Diagnostic::error(rules::R_SYNTAX_01, format!("expected {what}, found `{word}`"))
                    .with_span(span)
            })?;
            out.push(id);
        }
        Ok(())
    }

    fn function(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("function")?;
        let (word, span) = cur.next_word("function label")?;
        let id = parse_label_token(&word, &span, &[LabelKind::Function], "function")?;
        let (name, _) = cur.next_str("function name")?;
        cur.finish()?;
        model
            .decl_spans
            .insert(span_key("function", &id.render()), span);
        model.functions.push(Function { id, name });
        Ok(())
    }

    fn dataflow(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("dataflow")?;
        let (id_word, span) = cur.next_word("data flow id like DF-1")?;
        let id = DataFlowId::parse(&id_word).ok_or_else(|| {
            Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("invalid data flow id `{id_word}`"),
            )
            .with_span(span.clone())
        })?;
        cur.keyword("from")?;
        let source = self.endpoint(cur)?;
        cur.keyword("to")?;
        let sink = self.endpoint(cur)?;
        let (payload, _) = cur.next_str("payload")?;
        cur.finish()?;
        if model.dataflows.iter().any(|d| d.id == id) {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("data flow {id} is already declared"),
            )
            .with_span(span));
        }
        model
            .decl_spans
            .insert(span_key("dataflow", &id.to_string()), span);
        model.dataflows.push(DataFlow {
            id,
            source,
            sink,
            payload,
        });
        Ok(())
    }

    fn endpoint(&mut self, cur: &mut Cursor) -> Result<FlowEndpoint, Diagnostic> {
        if cur.peek_word() == Some("ext:") {
            cur.keyword("ext:")?;
            let (name, _) = cur.next_str("external endpoint name")?;
            return Ok(FlowEndpoint::External(name));
        }
        let (word, span) = cur.next_word("function label or ext:\"name\"")?;
        let label = parse_label_token(&word, &span, &[LabelKind::Function], "function")?;
        Ok(FlowEndpoint::Function(label))
    }

    fn controller(
        &mut self,
        model: &mut AnalysisModel,
        cur: &mut Cursor,
    ) -> Result<(), Diagnostic> {
        cur.keyword("controller")?;
        let (code, span) = cur.next_word("subject code")?;
        cur.finish()?;
        if model.controllers.iter().any(|c| c.code == code) {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("controller `{code}` is already declared"),
            )
            .with_span(span));
        }
        model
            .decl_spans
            .insert(span_key("controller", &code), span);
        model.controllers.push(Controller { code });
        Ok(())
    }

    fn control_action(
        &mut self,
        model: &mut AnalysisModel,
        cur: &mut Cursor,
    ) -> Result<(), Diagnostic> {
        cur.keyword("control_action")?;
        let (word, span) = cur.next_word("control action label")?;
        let id = parse_label_token(&word, &span, &[LabelKind::ControlAction], "control action")?;
        let (name, _) = cur.next_str("control action name")?;
        cur.keyword("from")?;
        let (controller, _) = cur.next_word("controller subject code")?;
        cur.keyword("to")?;
        let (controlled, _) = cur.next_word("controlled subject code")?;
        let mut functions = Vec::new();
        if cur.peek_word() == Some("functions") {
            cur.keyword("functions")?;
            while let Some(word) = cur.peek_word() {
                let word = word.to_string();
                let (_, fspan) = cur.next_word("function label")?;
                let label =
                    parse_label_token(&word, &fspan, &[LabelKind::Function], "function")?;
                functions.push(label);
            }
        }
        cur.finish()?;
        model
            .decl_spans
            .insert(span_key("control_action", &id.render()), span);
        model.control_actions.push(ControlAction {
            id,
            name,
            controller,
            controlled,
            functions,
        });
        Ok(())
    }

    fn feedback(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("feedback")?;
        let (id_word, span) = cur.next_word("feedback id like FB-1")?;
        let id = FeedbackId::parse(&id_word).ok_or_else(|| {
            Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("invalid feedback id `{id_word}`"),
            )
            .with_span(span.clone())
        })?;
        cur.keyword("from")?;
        let (source, _) = cur.next_word("subject code")?;
        cur.keyword("to")?;
        let (sink, _) = cur.next_word("subject code")?;
        let (payload, _) = cur.next_str("payload")?;
        cur.finish()?;
        if model.feedbacks.iter().any(|f| f.id == id) {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("feedback {id} is already declared"),
            )
            .with_span(span));
        }
        model
            .decl_spans
            .insert(span_key("feedback", &id.to_string()), span);
        model.feedbacks.push(Feedback {
            id,
            source,
            sink,
            payload,
        });
        Ok(())
    }

    fn finding(
        &mut self,
        model: &mut AnalysisModel,
        cur: &mut Cursor,
        keyword: &str,
        kind: LabelKind,
    ) -> Result<(), Diagnostic> {
        cur.keyword(keyword)?;
        let (word, span) = cur.next_word("finding label")?;
        let id = parse_label_token(&word, &span, &[kind], keyword)?;
        cur.keyword("guideword")?;
        let (gw_word, gw_span) = cur.next_word("guide word")?;
        let guide_word = GuideWord::from_keyword(&gw_word).ok_or_else(|| {
            Diagnostic::error(rules::R_SYNTAX_01, format!("unknown guide word `{gw_word}`"))
                .with_span(gw_span)
        })?;
        let (description, _) = cur.next_str("finding description")?;
        let mut vulnerabilities = Vec::new();
        if cur.peek_word() == Some("vulnerabilities") {
            cur.keyword("vulnerabilities")?;
            self.id_list(
                cur,
                "vulnerability id like V-1",
                &mut vulnerabilities,
                VulnerabilityId::parse,
            )?;
        }
        cur.finish()?;
        model
            .decl_spans
            .insert(span_key("finding", &id.render()), span);
        model.findings.push(Finding {
            id,
            guide_word,
            description,
            vulnerabilities,
        });
        Ok(())
    }

    fn map(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("map")?;
        let (word, span) = cur.next_word("SEC-LS label")?;
        let sec_ls = parse_label_token(&word, &span, &[LabelKind::SecLs], "SEC-LS")?;
        let (arrow, arrow_span) = cur.next_word("`->`")?;
        if arrow != "->" {
            return Err(
                Diagnostic::error(rules::R_SYNTAX_01, format!("expected `->`, found `{arrow}`"))
                    .with_span(arrow_span),
            );
        }
        let (word, dspan) = cur.next_word("DF-LS label")?;
        let df_ls = parse_label_token(&word, &dspan, &[LabelKind::DfLs], "DF-LS")?;
        cur.finish()?;
        let key = format!("{}->{}", sec_ls.render(), df_ls.render());
        if model
            .mappings
            .iter()
            .any(|m| m.sec_ls == sec_ls && m.df_ls == df_ls)
        {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("mapping {key} is already declared"),
            )
            .with_span(span));
        }
        if model.mappings.iter().any(|m| m.sec_ls == sec_ls) {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!(
                    "SEC-LS {} is already mapped; one-to-many mappings are not allowed",
                    sec_ls.render()
                ),
            )
            .with_span(span));
        }
        model.decl_spans.insert(span_key("map", &key), span);
        model.mappings.push(MappingEntry { sec_ls, df_ls });
        Ok(())
    }

    fn na(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("na")?;
        let (word, span) = cur.next_word("function, IFB, control action or ICA label")?;
        let target = parse_label_token(
            &word,
            &span,
            &[
                LabelKind::Function,
                LabelKind::Ifb,
                LabelKind::ControlAction,
                LabelKind::Ica,
            ],
            "worksheet row",
        )?;
        cur.keyword("guideword")?;
        let (gw_word, gw_span) = cur.next_word("guide word")?;
        let guide_word = GuideWord::from_keyword(&gw_word).ok_or_else(|| {
            Diagnostic::error(rules::R_SYNTAX_01, format!("unknown guide word `{gw_word}`"))
                .with_span(gw_span)
        })?;
        cur.finish()?;
        let key = format!("{}|{}", target.render(), guide_word.keyword());
        if model
            .na_marks
            .iter()
            .any(|n| n.target == target && n.guide_word == guide_word)
        {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("not-applicable mark {key} is already declared"),
            )
            .with_span(span));
        }
        model.decl_spans.insert(span_key("na", &key), span);
        model.na_marks.push(NaMark { target, guide_word });
        Ok(())
    }

    fn compat(&mut self, model: &mut AnalysisModel, cur: &mut Cursor) -> Result<(), Diagnostic> {
        cur.keyword("compat")?;
        let (sec_word, sec_span) = cur.next_word("SEC-LS guide word")?;
        let sec_gw = GuideWord::from_keyword(&sec_word)
            .filter(|g| g.family() == FindingKind::SecLs)
            .ok_or_else(|| {
                Diagnostic::error(
                    rules::R_SYNTAX_01,
                    format!("`{sec_word}` is not a SEC-LS guide word"),
                )
                .with_span(sec_span.clone())
            })?;
        let (df_word, df_span) = cur.next_word("DF-LS guide word")?;
        let df_gw = GuideWord::from_keyword(&df_word)
            .filter(|g| g.family() == FindingKind::DfLs)
            .ok_or_else(|| {
                Diagnostic::error(
                    rules::R_SYNTAX_01,
                    format!("`{df_word}` is not a DF-LS guide word"),
                )
                .with_span(df_span)
            })?;
        let (level_word, level_span) = cur.next_word("compatibility level")?;
        let level = CompatLevel::from_keyword(&level_word).ok_or_else(|| {
            Diagnostic::error(
                rules::R_SYNTAX_01,
                format!("unknown compatibility level `{level_word}`"),
            )
            .with_span(level_span)
        })?;
        cur.finish()?;
        let key = format!("{}|{}", sec_gw.keyword(), df_gw.keyword());
        if model
            .compat_overrides
            .iter()
            .any(|c| c.sec_gw == sec_gw && c.df_gw == df_gw)
        {
            return Err(Diagnostic::error(
                rules::R_DUP_01,
                format!("compatibility override {key} is already declared"),
            )
            .with_span(sec_span),
            );
        }
        model.decl_spans.insert(span_key("compat", &key), sec_span);
        model.compat_overrides.push(CompatOverride {
            sec_gw,
            df_gw,
            level,
        });
        Ok(())
    }

    // -----------------------------------------------------------------------
    // Structural resolution checks (duplicates across merged declarations,
    // subject references, endpoint references).
    // -----------------------------------------------------------------------

    fn structural(&mut self, model: &mut AnalysisModel) {
        self.check_label_subjects(model);
        self.check_overlaps(model);
        self.check_references(model);
    }

    fn subject_missing(&self, model: &AnalysisModel, code: &str) -> bool {
        model.subject(code).is_none()
    }

    fn check_label_subjects(&mut self, model: &mut AnalysisModel) {
        let mut missing: Vec<(String, String, String)> = Vec::new();
        {
            let mut check = |kind: &str, id: &str, label: &Label| {
                for code in &label.subjects {
                    if self.subject_missing(model, code) {
                        missing.push((kind.to_string(), id.to_string(), code.clone()));
                    }
                }
            };
            for f in &model.functions {
                check("function", &f.id.render(), &f.id);
            }
            for ca in &model.control_actions {
                check("control_action", &ca.id.render(), &ca.id);
                for f in &ca.functions {
                    check("control_action", &ca.id.render(), f);
                }
            }
            for f in &model.findings {
                check("finding", &f.id.render(), &f.id);
            }
            for n in &model.na_marks {
                check(
                    "na",
                    &format!("{}|{}", n.target.render(), n.guide_word.keyword()),
                    &n.target,
                );
            }
        }
        for (kind, id, code) in missing {
            let span = model.span_of(&kind, &id);
            self.diags.push(
                Diagnostic::error(
                    rules::R_REF_01,
                    format!("`{id}` references undeclared subject `{code}`"),
                )
                .maybe_span(span),
            );
        }
        // Controller, control action and feedback subject codes.
        let mut refs: Vec<(String, String, String)> = Vec::new();
        for c in &model.controllers {
            if self.subject_missing(model, &c.code) {
                refs.push(("controller".into(), c.code.clone(), c.code.clone()));
            }
        }
        for ca in &model.control_actions {
            for code in [&ca.controller, &ca.controlled] {
                if self.subject_missing(model, code) {
                    refs.push(("control_action".into(), ca.id.render(), code.clone()));
                }
            }
        }
        for fb in &model.feedbacks {
            for code in [&fb.source, &fb.sink] {
                if self.subject_missing(model, code) {
                    refs.push(("feedback".into(), fb.id.to_string(), code.clone()));
                }
            }
        }
        for (kind, id, code) in refs {
            let span = model.span_of(&kind, &id);
            self.diags.push(
                Diagnostic::error(
                    rules::R_REF_01,
                    format!("`{id}` references undeclared subject `{code}`"),
                )
                .maybe_span(span),
            );
        }
    }

    /// Merged declarations must not overlap: no two functions, control
    /// actions or findings may share an expanded `(subject, chain)` pair.
    fn check_overlaps(&mut self, model: &mut AnalysisModel) {
        fn sweep(
            kind: &str,
            labels: Vec<Label>,
            model: &AnalysisModel,
            diags: &mut Vec<Diagnostic>,
        ) -> Vec<usize> {
            let mut seen: std::collections::HashMap<String, usize> =
                std::collections::HashMap::new();
            let mut drop = Vec::new();
            for (idx, label) in labels.iter().enumerate() {
                let mut clash = None;
                for variant in label.expand_merged() {
                    let key = variant.render();
                    if let Some(&first) = seen.get(&key) {
                        clash = Some((first, key));
                        break;
                    }
                }
                if let Some((first, key)) = clash {
                    let span = model.span_of(kind, &label.render());
                    diags.push(
                        Diagnostic::error(
                            rules::R_DUP_01,
                            format!(
                                "`{}` overlaps earlier declaration `{}` at `{}`",
                                label.render(),
                                labels[first].render(),
                                key
                            ),
                        )
                        .maybe_span(span),
                    );
                    drop.push(idx);
                } else {
                    for variant in label.expand_merged() {
                        seen.insert(variant.render(), idx);
                    }
                }
            }
            drop
        }

        let drop = sweep(
            "function",
            model.functions.iter().map(|f| f.id.clone()).collect(),
            model,
            self.diags,
        );
        remove_indices(&mut model.functions, &drop);
        let drop = sweep(
            "control_action",
            model.control_actions.iter().map(|c| c.id.clone()).collect(),
            model,
            self.diags,
        );
        remove_indices(&mut model.control_actions, &drop);
        let drop = sweep(
            "finding",
            model.findings.iter().map(|f| f.id.clone()).collect(),
            model,
            self.diags,
        );
        remove_indices(&mut model.findings, &drop);
    }

    fn check_references(&mut self, model: &mut AnalysisModel) {
        // Data flow endpoints.
        for df in &model.dataflows {
            let span = model.span_of("dataflow", &df.id.to_string());
            for ep in [&df.source, &df.sink] {
                if let FlowEndpoint::Function(label) = ep {
                    if model.resolve_function(label).is_none() {
                        self.diags.push(
                            Diagnostic::error(
                                rules::R_REF_02,
                                format!(
                                    "{} references undeclared function `{}`",
                                    df.id,
                                    label.render()
                                ),
                            )
                            .maybe_span(span.clone()),
                        );
                    }
                }
            }
            let same = match (&df.source, &df.sink) {
                (FlowEndpoint::Function(a), FlowEndpoint::Function(b)) => a == b,
                (FlowEndpoint::External(a), FlowEndpoint::External(b)) => a == b,
                _ => false,
            };
            if same {
                self.diags.push(
                    Diagnostic::error(
                        rules::R_DF_01,
                        format!("{} has identical source and sink", df.id),
                    )
                    .maybe_span(span.clone()),
                );
            }
            if df.source.as_function().is_none() && df.sink.as_function().is_none() {
                self.diags.push(
                    Diagnostic::error(
                        rules::R_DF_01,
                        format!("{} connects two external endpoints", df.id),
                    )
                    .maybe_span(span),
                );
            }
        }
        // Control action function sequences.
        for ca in &model.control_actions {
            let span = model.span_of("control_action", &ca.id.render());
            for label in &ca.functions {
                if model.resolve_function(label).is_none() {
                    self.diags.push(
                        Diagnostic::error(
                            rules::R_REF_02,
                            format!(
                                "{} lists undeclared function `{}`",
                                ca.id.render(),
                                label.render()
                            ),
                        )
                        .maybe_span(span.clone()),
                    );
                }
            }
        }
        // Not-applicable mark targets.
        for na in &model.na_marks {
            let key = format!("{}|{}", na.target.render(), na.guide_word.keyword());
            let resolved = match na.target.kind() {
                LabelKind::Function => model.resolve_function(&na.target).is_some(),
                LabelKind::ControlAction => model.resolve_control_action(&na.target).is_some(),
                _ => model.resolve_finding(&na.target).is_some(),
            };
            if !resolved {
                let span = model.span_of("na", &key);
                self.diags.push(
                    Diagnostic::error(
                        rules::R_REF_02,
                        format!(
                            "not-applicable mark targets undeclared `{}`",
                            na.target.render()
                        ),
                    )
                    .maybe_span(span),
                );
            }
        }
    }
}

fn remove_indices<T>(items: &mut Vec<T>, drop: &[usize]) {
    for &idx in drop.iter().rev() {
        items.remove(idx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> ParseOutcome {
        parse_model(src, "test.stpa")
    }

    #[test]
    fn empty_file_is_an_empty_model() {
        let out = parse("");
        assert!(out.is_valid());
        assert_eq!(out.diagnostics, Vec::new());
        assert_eq!(out.model, AnalysisModel::default());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let out = parse("# a comment\n\n   \nsystem \"Demo\" # trailing\n");
        assert!(out.is_valid());
        assert_eq!(out.model.system.as_deref(), Some("Demo"));
    }

    #[test]
    fn continuation_lines_join_statements() {
        let src = "subject P \"Phone\" kind technical\nsubject U \"User\" kind human\nloss L-1 \"x\" category life\nvulnerability V-1 \"v\" attribute integrity\n  losses L-1\nconstraint SC-1 \"c\"\n  addresses V-1\n";
        let out = parse(src);
        assert!(out.is_valid(), "{:?}", out.diagnostics);
        assert_eq!(out.model.vulnerabilities[0].losses, vec![LossId(1)]);
    }

    #[test]
    fn recovers_per_statement() {
        // Three independently malformed statements yield three errors.
        let src = "bogus x\nloss L1 \"bad id\" category life\nsubject P \"Phone\" kind nonsense\n";
        let out = parse(src);
        let errors: Vec<_> = out.diagnostics.iter().filter(|d| d.is_error()).collect();
        assert!(errors.len() >= 3, "{errors:?}");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let src = "subject P \"Phone\" kind technical\nloss L-1 \"a\" category life\nloss L-1 \"b\" category life\n";
        let out = parse(src);
        assert!(out
            .diagnostics
            .iter()
            .any(|d| d.rule == rules::R_DUP_01 && d.message.contains("L-1")));
        assert_eq!(out.model.losses.len(), 1);
    }

    #[test]
    fn overlapping_merged_declarations_are_rejected() {
        let src = "subject P \"Phone\" kind technical\nsubject S \"Server\" kind technical\nfunction P/S_F1 \"a\"\nfunction S_F1 \"b\"\n";
        let out = parse(src);
        assert!(out
            .diagnostics
            .iter()
            .any(|d| d.rule == rules::R_DUP_01 && d.message.contains("S_F1")));
    }

    #[test]
    fn label_errors_carry_spans() {
        let out = parse("function F2 \"no subject\"\n");
        let d = out
            .diagnostics
            .iter()
            .find(|d| d.rule == rules::R_LABEL_03)
            .expect("missing-subject diagnostic");
        let span = d.span.as_ref().unwrap();
        assert_eq!((span.line, span.column), (1, 10));
    }

    #[test]
    fn unresolved_dataflow_endpoint() {
        let src = "subject P \"Phone\" kind technical\nfunction P_F1 \"f\"\ndataflow DF-1 from P_F1 to P_F2 \"x\"\n";
        let out = parse(src);
        assert!(out.diagnostics.iter().any(|d| d.rule == rules::R_REF_02));
    }

    #[test]
    fn external_endpoints_parse() {
        let src = "subject P \"Phone\" kind technical\nfunction P_F1 \"f\"\ndataflow DF-1 from P_F1 to ext:\"Door mechanism\" \"signal\"\n";
        let out = parse(src);
        assert!(out.is_valid(), "{:?}", out.diagnostics);
        assert_eq!(
            out.model.dataflows[0].sink,
            FlowEndpoint::External("Door mechanism".into())
        );
    }

    #[test]
    fn one_to_many_mapping_is_rejected() {
        let src = "\
subject D \"Door\" kind technical
subject S \"Server\" kind technical
loss L-1 \"l\" category life
vulnerability V-1 \"v\" attribute integrity
  losses L-1
constraint SC-1 \"c\"
  addresses V-1
function D_F1 \"f\"
control_action D_CA1 \"act\" from D to S
  functions D_F1
ifb D_F1_IFB1 guideword NECV \"i\"
  vulnerabilities V-1
ls D_F1_IFB1_LS1 guideword function_itself \"s\"
ls D_F1_IFB1_LS2 guideword env_inputs \"s\"
ica D_CA1_ICA1 guideword providing \"i\"
  vulnerabilities V-1
sls D_CA1_ICA1_LS1 guideword controller \"s\"
map D_CA1_ICA1_LS1 -> D_F1_IFB1_LS1
map D_CA1_ICA1_LS1 -> D_F1_IFB1_LS2
";
        let out = parse(src);
        assert!(out
            .diagnostics
            .iter()
            .any(|d| d.rule == rules::R_DUP_01 && d.message.contains("one-to-many")));
        assert_eq!(out.model.mappings.len(), 1);
    }
}
