use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Human,
}

/// Dotted-path scalar leaves of a JSON document, in document order.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn render_json<T: Serialize>(payload: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(payload)?;
    s.push('\n');
    Ok(s)
}

pub fn render_human<T: Serialize>(payload: &T) -> serde_json::Result<String> {
    let mut leaves = Vec::new();
    flatten("", &serde_json::to_value(payload)?, &mut leaves);
    let width = leaves.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    Ok(leaves
        .iter()
        .map(|(k, v)| format!("{k:width$}  {v}\n"))
        .collect())
}

/// Single-row CSV of every scalar leaf.
pub fn render_flat_csv<T: Serialize>(payload: &T) -> Result<String, Box<dyn std::error::Error>> {
    let mut leaves = Vec::new();
    flatten("", &serde_json::to_value(payload)?, &mut leaves);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(leaves.iter().map(|(k, _)| k))?;
    w.write_record(leaves.iter().map(|(_, v)| v))?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// CSV with one row per record.
pub fn render_table_csv<T: Serialize>(rows: &[T]) -> Result<String, Box<dyn std::error::Error>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
