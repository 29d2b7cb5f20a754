//! Lexer and recursive-descent parser for the pattern DSL.
//!
//! ```text
//! file     := ws (instance ws)* ;
//! instance := "pattern" name "as" name "{" (param)* "}" ;
//! param    := key "=" value ;
//! value    := ident | string | number | boolean | "[" (value ("," value)*)? "]" ;
//! ```
//! `#` starts a comment that runs to the end of the line.

use std::collections::{BTreeMap, HashSet};

use super::signature::{ParamType, PatternKind};
use super::{DslError, DslErrorKind, ParamValue, PatternInstance, Pipeline};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Str(_) => "string".into(),
            Tok::Num(_) => "number".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Eq => "'='".into(),
            Tok::Comma => "','".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, msg: impl Into<String>) -> DslError {
        DslError { kind: DslErrorKind::Syntax(msg.into()), line, column }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, DslError> {
        let mut out = Vec::new();
        loop {
            // whitespace and comments
            while let Some(&c) = self.chars.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while let Some(&c) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(&c) = self.chars.peek() else {
                out.push(Spanned { tok: Tok::Eof, line, column });
                return Ok(out);
            };
            let tok = match c {
                '{' | '}' | '[' | ']' | '=' | ',' => {
                    self.bump();
                    match c {
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        '=' => Tok::Eq,
                        _ => Tok::Comma,
                    }
                }
                '"' => self.string(line, column)?,
                '-' | '0'..='9' => self.number(line, column)?,
                c if c == '_' || c.is_ascii_alphabetic() => {
                    let mut s = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c == '_' || c.is_ascii_alphanumeric() {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                other => return Err(self.error(line, column, format!("unexpected character '{other}'"))),
            };
            out.push(Spanned { tok, line, column });
        }
    }

    fn string(&mut self, line: usize, column: usize) -> Result<Tok, DslError> {
        self.bump();
        let mut s = String::new();
        loop {
            let (l, c) = (self.line, self.column);
            match self.bump() {
                None | Some('\n') => return Err(self.error(line, column, "unterminated string")),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    _ => return Err(self.error(l, c, "invalid escape sequence")),
                },
                Some(ch) => s.push(ch),
            }
        }
    }

    fn number(&mut self, line: usize, column: usize) -> Result<Tok, DslError> {
        let mut s = String::new();
        if self.chars.peek() == Some(&'-') {
            s.push('-');
            self.bump();
        }
        let digits = |lx: &mut Self, s: &mut String| -> usize {
            let mut n = 0;
            while let Some(&c) = lx.chars.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    lx.bump();
                    n += 1;
                } else {
                    break;
                }
            }
            n
        };
        if digits(self, &mut s) == 0 {
            return Err(self.error(line, column, "malformed number"));
        }
        if self.chars.peek() == Some(&'.') {
            s.push('.');
            self.bump();
            if digits(self, &mut s) == 0 {
                return Err(self.error(line, column, "malformed number"));
            }
        }
        if matches!(self.chars.peek(), Some('e' | 'E')) {
            s.push('e');
            self.bump();
            if let Some(&sign @ ('+' | '-')) = self.chars.peek() {
                s.push(sign);
                self.bump();
            }
            if digits(self, &mut s) == 0 {
                return Err(self.error(line, column, "malformed number"));
            }
        }
        if let Some(&c) = self.chars.peek() {
            if c == '_' || c.is_ascii_alphabetic() {
                return Err(self.error(line, column, "malformed number"));
            }
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Tok::Num(v)),
            _ => Err(self.error(line, column, "number out of range")),
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, at: &Spanned, kind: DslErrorKind) -> Result<T, DslError> {
        Err(DslError { kind, line: at.line, column: at.column })
    }

    fn unexpected<T>(&self, at: &Spanned, wanted: &str) -> Result<T, DslError> {
        self.fail(at, DslErrorKind::Syntax(format!("expected {wanted}, found {}", at.tok.describe())))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), DslError> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            self.unexpected(&t, wanted)
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<(String, Spanned), DslError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s != "true" && s != "false" => Ok((s.clone(), t)),
            _ => self.unexpected(&t, wanted),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), DslError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == word => Ok(()),
            _ => self.unexpected(&t, &format!("'{word}'")),
        }
    }

    fn value(&mut self) -> Result<ParamValue, DslError> {
        let t = self.next();
        Ok(match t.tok {
            Tok::Ident(ref s) if s == "true" => ParamValue::Bool(true),
            Tok::Ident(ref s) if s == "false" => ParamValue::Bool(false),
            Tok::Ident(s) => ParamValue::Ident(s),
            Tok::Str(s) => ParamValue::Str(s),
            Tok::Num(v) => ParamValue::Num(v),
            Tok::LBracket => {
                let mut items = Vec::new();
                if self.peek().tok == Tok::RBracket {
                    self.next();
                    return Ok(ParamValue::List(items));
                }
                loop {
                    items.push(self.value()?);
                    let sep = self.next();
                    match sep.tok {
                        Tok::Comma => continue,
                        Tok::RBracket => break,
                        _ => return self.unexpected(&sep, "',' or ']'"),
                    }
                }
                ParamValue::List(items)
            }
            _ => return self.unexpected(&t, "a value"),
        })
    }

    fn instance(&mut self, names: &mut HashSet<String>) -> Result<PatternInstance, DslError> {
        self.keyword("pattern")?;
        let (pattern_name, pattern_at) = self.ident("a pattern name")?;
        let Some(pattern) = PatternKind::parse(&pattern_name) else {
            return self.fail(&pattern_at, DslErrorKind::UnknownPattern(pattern_name));
        };
        self.keyword("as")?;
        let (name, name_at) = self.ident("an instance name")?;
        if !names.insert(name.clone()) {
            return self.fail(&name_at, DslErrorKind::DuplicateInstance(name));
        }
        self.expect(Tok::LBrace, "'{'")?;
        let mut params = BTreeMap::new();
        let mut stage = None;
        loop {
            if self.peek().tok == Tok::RBrace {
                self.next();
                break;
            }
            let (key, key_at) = self.ident("a parameter name or '}'")?;
            let Some(spec) = pattern.param(&key) else {
                return self.fail(&key_at, DslErrorKind::UnknownParam { pattern, key });
            };
            if params.contains_key(&key) || (key == "stage" && stage.is_some()) {
                return self.fail(&key_at, DslErrorKind::DuplicateParam(key));
            }
            self.expect(Tok::Eq, "'='")?;
            let value_at = self.peek().clone();
            let value = self.value()?;
            if key == "stage" {
                match value {
                    ParamValue::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                        stage = Some(v as u32);
                    }
                    _ => {
                        return self.fail(
                            &value_at,
                            DslErrorKind::BadValue { key, expected: "a non-negative integer" },
                        )
                    }
                }
                continue;
            }
            if !type_accepts(spec.ty, &value) {
                return self.fail(&value_at, DslErrorKind::BadValue { key, expected: spec.ty.describe() });
            }
            params.insert(key, value);
        }
        Ok(PatternInstance { pattern, name, params, stage: stage.unwrap_or(0) })
    }
}

pub(crate) fn type_accepts(ty: ParamType, value: &ParamValue) -> bool {
    let word = matches!(value, ParamValue::Ident(_) | ParamValue::Str(_));
    match ty {
        ParamType::EventClass | ParamType::EntityClass | ParamType::AggregateClass | ParamType::Text => word,
        ParamType::EntityClassList => match value {
            ParamValue::List(items) => items
                .iter()
                .all(|v| matches!(v, ParamValue::Ident(_) | ParamValue::Str(_))),
            _ => false,
        },
        ParamType::Bool => matches!(value, ParamValue::Bool(_)),
        ParamType::Number => matches!(value, ParamValue::Num(_)),
        ParamType::Scalar => !matches!(value, ParamValue::List(_)),
    }
}

/// Parses DSL text (not the JSON form) into a pipeline.
pub fn parse_dsl(text: &str) -> Result<Pipeline, DslError> {
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser { toks, pos: 0 };
    let mut names = HashSet::new();
    let mut instances = Vec::new();
    while parser.peek().tok != Tok::Eof {
        instances.push(parser.instance(&mut names)?);
    }
    Ok(Pipeline::from_instances(instances))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> DslError {
        parse_dsl(text).unwrap_err()
    }

    #[test]
    fn parses_interval_count_instance() {
        let p = parse_dsl("pattern interval_count as alarms { start = TrackIn  end = TrackOut  counted = Alarm }").unwrap();
        let inst = &p.stages[0].instances[0];
        assert_eq!(inst.pattern, PatternKind::IntervalCount);
        assert_eq!(inst.name, "alarms");
        assert_eq!(inst.params["start"], ParamValue::Ident("TrackIn".into()));
        assert_eq!(inst.params["end"], ParamValue::Ident("TrackOut".into()));
        assert_eq!(inst.params["counted"], ParamValue::Ident("Alarm".into()));
        assert_eq!(inst.stage, 0);
    }

    #[test]
    fn empty_and_comment_only_files() {
        assert!(parse_dsl("").unwrap().is_empty());
        assert!(parse_dsl("  # nothing here\n\n").unwrap().is_empty());
    }

    #[test]
    fn unknown_pattern_is_named() {
        let e = err("pattern bogus as x {}");
        assert_eq!(e.kind, DslErrorKind::UnknownPattern("bogus".into()));
        assert_eq!((e.line, e.column), (1, 9));
        assert!(e.to_string().contains("unknown pattern 'bogus'"));
    }

    #[test]
    fn values_of_every_shape() {
        let p = parse_dsl(
            r#"pattern elapsed_succeeding_same_type as dt {
                eventType = SwitchState
                filterAttribute = "state"
                filterValue = Failed
                matchOn = [Resource, "ProductionEntity"]
                useDerived = false
                stage = 2
            }
            pattern interval_aggregate as hot { eventType = Observation attribute = value agg = count_above threshold = -1.5e2 start = TrackIn end = TrackOut }"#,
        )
        .unwrap();
        assert_eq!(p.stages.len(), 2);
        assert_eq!(p.stages[0].index, 0);
        assert_eq!(p.stages[1].index, 2);
        let dt = &p.stages[1].instances[0];
        assert_eq!(
            dt.params["matchOn"],
            ParamValue::List(vec![ParamValue::Ident("Resource".into()), ParamValue::Str("ProductionEntity".into())])
        );
        assert_eq!(dt.params["useDerived"], ParamValue::Bool(false));
        assert_eq!(p.stages[0].instances[0].params["threshold"], ParamValue::Num(-150.0));
    }

    #[test]
    fn positions_point_at_offending_token() {
        let e = err("pattern interval_count as a {\n  start = TrackIn\n  colour = red\n}");
        assert!(matches!(e.kind, DslErrorKind::UnknownParam { .. }));
        assert_eq!((e.line, e.column), (3, 3));

        let e = err("pattern interval_count as a { start = TrackIn }\npattern interval_count as a {}");
        assert_eq!(e.kind, DslErrorKind::DuplicateInstance("a".into()));
        assert_eq!((e.line, e.column), (2, 27));

        let e = err("pattern interval_count as a {\n  start TrackIn\n}");
        assert_eq!((e.line, e.column), (2, 9));

        let e = err("pattern interval_count as a { start = @ }");
        assert_eq!((e.line, e.column), (1, 39));

        let e = err("pattern interval_count as a { start = \"open\n}");
        assert_eq!((e.line, e.column), (1, 39));

        let e = err("pattern interval_count as a { start = [TrackIn, ] }");
        assert_eq!((e.line, e.column), (1, 49));

        let e = err("pattern interval_count as a {");
        assert_eq!((e.line, e.column), (1, 30));
    }

    #[test]
    fn type_mismatches_are_reported_at_the_value() {
        let e = err("pattern relate_preceding_aggregation as r { recursive = \"yes\" }");
        assert!(matches!(e.kind, DslErrorKind::BadValue { .. }));
        assert_eq!((e.line, e.column), (1, 57));
        let e = err("pattern interval_count as a { stage = 1.5 }");
        assert!(matches!(e.kind, DslErrorKind::BadValue { .. }));
        let e = err("pattern interval_count as a { stage = 1 stage = 2 }");
        assert_eq!(e.kind, DslErrorKind::DuplicateParam("stage".into()));
        let e = err("pattern interval_count as a { start = A start = B }");
        assert_eq!(e.kind, DslErrorKind::DuplicateParam("start".into()));
    }

    #[test]
    fn malformed_numbers() {
        for bad in ["-", "1.", "1e", "12abc", "--1"] {
            let text = format!("pattern interval_aggregate as a {{ threshold = {bad} }}");
            let e = err(&text);
            assert_eq!((e.line, e.column), (1, 47), "{bad}");
        }
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        proptest! {
            #[test]
            fn errors_point_inside_the_text(text in "(pattern|as|[a-z_]{1,8}|[{}=\\[\\],]|\"[a-z ]*\"?|-?[0-9.]{1,4}|#[a-z ]*\n|[ \n\t@]){0,24}") {
                if let Err(e) = parse_dsl(&text) {
                    let lines: Vec<&str> = text.split('\n').collect();
                    prop_assert!(e.line >= 1 && e.line <= lines.len(), "{e:?}");
                    prop_assert!(e.column >= 1 && e.column <= lines[e.line - 1].chars().count() + 1, "{e:?}");
                }
            }

            #[test]
            fn arbitrary_text_never_panics(text in "\\PC{0,80}") {
                let _ = parse_dsl(&text);
            }
        }
    }
}
