//! Machine-readable validation findings.

use std::fmt;

/// Position of a token in a source file. Line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    pub fn new(file: impl Into<String>, line: usize, column: usize, length: usize) -> SourceSpan {
        SourceSpan {
            file: file.into(),
            line,
            column,
            length: length.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
    Lint,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Lint => "lint",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validation finding: stable rule code, severity, optional source span
/// and a human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: &'static str,
    pub severity: Severity,
    pub span: Option<SourceSpan>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(rule: &'static str, severity: Severity, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            rule,
            severity,
            span: None,
            message: message.into(),
        }
    }

    pub fn error(rule: &'static str, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new(rule, Severity::Error, message)
    }

    pub fn warning(rule: &'static str, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new(rule, Severity::Warning, message)
    }

    pub fn lint(rule: &'static str, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new(rule, Severity::Lint, message)
    }

    pub fn with_span(mut self, span: SourceSpan) -> Diagnostic {
        self.span = Some(span);
        self
    }

    pub fn maybe_span(mut self, span: Option<SourceSpan>) -> Diagnostic {
        self.span = span;
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// One-line rendering `file:line:col rule severity message` as printed
    /// by the command-line tool. `fallback_file` is used when the
    /// diagnostic carries no span.
    pub fn cli_line(&self, fallback_file: &str) -> String {
        match &self.span {
            Some(s) => format!(
                "{}:{}:{} {} {} {}",
                s.file, s.line, s.column, self.rule, self.severity, self.message
            ),
            None => format!(
                "{}:0:0 {} {} {}",
                fallback_file, self.rule, self.severity, self.message
            ),
        }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_line_format() {
        let d = Diagnostic::error("R1", "V-1 references unknown loss L-9")
            .with_span(SourceSpan::new("m.stpa", 12, 3, 3));
        assert_eq!(
            d.cli_line("other"),
            "m.stpa:12:3 R1 error V-1 references unknown loss L-9"
        );
        let d = Diagnostic::lint("R-NUM-01", "gap");
        assert_eq!(d.cli_line("m.stpa"), "m.stpa:0:0 R-NUM-01 lint gap");
    }
}
