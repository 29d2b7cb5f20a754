use std::fmt::Write;

use super::{ParamValue, Pipeline};

pub(super) fn is_bare_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c == '_' || c.is_ascii_alphabetic())
        && chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
        && s != "true"
        && s != "false"
}

fn write_value(out: &mut String, value: &ParamValue) {
    match value {
        ParamValue::Ident(s) if is_bare_ident(s) => out.push_str(s),
        ParamValue::Ident(s) | ParamValue::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        // `{:?}` is the shortest representation that reads back exactly
        ParamValue::Num(v) => {
            let _ = write!(out, "{v:?}");
        }
        ParamValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ParamValue::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item);
            }
            out.push(']');
        }
    }
}

/// Canonical DSL text: instances in stage order, parameters sorted by key,
/// `stage` written only when non-zero.
pub fn print_pipeline(pipeline: &Pipeline) -> String {
    let mut out = String::new();
    for (i, inst) in pipeline.instances().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "pattern {} as {} {{", inst.pattern, inst.name);
        for (key, value) in &inst.params {
            let _ = write!(out, "  {key} = ");
            write_value(&mut out, value);
            out.push('\n');
        }
        if inst.stage != 0 {
            let _ = writeln!(out, "  stage = {}", inst.stage);
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patternspec::parse_dsl;

    #[test]
    fn canonical_layout() {
        let p = parse_dsl(
            "pattern interval_aggregate as hot { stage = 1 threshold = 11 agg = count_above eventType = Observation attribute = \"va\\\"l\" start = TrackIn end = TrackOut }",
        )
        .unwrap();
        let text = print_pipeline(&p);
        assert_eq!(
            text,
            "pattern interval_aggregate as hot {\n  agg = count_above\n  attribute = \"va\\\"l\"\n  end = TrackOut\n  eventType = Observation\n  start = TrackIn\n  threshold = 11.0\n  stage = 1\n}\n"
        );
        assert_eq!(parse_dsl(&text).unwrap(), p);
    }

    #[test]
    fn awkward_numbers_read_back() {
        for v in [0.1, -2.5e-300, 1e300, 123456789.125, -0.0] {
            let p = parse_dsl(&format!("pattern interval_aggregate as a {{ threshold = {v:?} }}")).unwrap();
            assert_eq!(parse_dsl(&print_pipeline(&p)).unwrap(), p);
        }
    }
}
