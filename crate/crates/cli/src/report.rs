use serde_json::Value;

use crate::request::Format;

/// Deterministic rendering; JSON keeps field order, text is one `key: value` per line.
pub fn format_report(report: &Value, format: Format) -> String {
    match format {
        Format::Json => format!("{report}\n"),
        Format::Text => {
            let mut out = String::new();
            match report {
                Value::Object(map) => {
                    for (k, v) in map {
                        render(&mut out, k, v, 0);
                    }
                }
                other => out.push_str(&format!("{}\n", scalar(other))),
            }
            out
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render(out: &mut String, key: &str, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str(&format!("{pad}{key}:\n"));
            for (k, x) in map {
                render(out, k, x, depth + 1);
            }
        }
        Value::Array(items) if items.iter().any(|x| x.is_object()) => {
            out.push_str(&format!("{pad}{key}:\n"));
            for (i, x) in items.iter().enumerate() {
                render(out, &format!("[{i}]"), x, depth + 1);
            }
        }
        other => out.push_str(&format!("{pad}{key}: {}\n", scalar(other))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn json_keeps_insertion_order() {
        let v = json!({"torsion_invariants": [], "free_rank": 0, "a": {"5": 1}});
        assert_eq!(format_report(&v, Format::Json), "{\"torsion_invariants\":[],\"free_rank\":0,\"a\":{\"5\":1}}\n");
    }

    #[test]
    fn text_layout() {
        let v = json!({"status": "torsion_class", "minimal_v": 2, "target": {"3": 1, "19": 1}, "rows": [{"n": 4}]});
        assert_eq!(
            format_report(&v, Format::Text),
            "status: torsion_class\nminimal_v: 2\ntarget:\n  3: 1\n  19: 1\nrows:\n  [0]:\n    n: 4\n"
        );
    }
}
