//! Deterministic report emission.
//!
//! Reports must be byte-identical across runs of the same configuration, so
//! this module writes JSON itself: object keys keep insertion order and
//! every float is printed with 17 significant digits (exact f64 round-trip).
//! CSV rows share the same float formatting and a fixed column header.

use crate::error::{Error, Result};

/// Ordered JSON value with deterministic serialization.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> Json {
        Json::Obj(Vec::new())
    }

    /// Append a key; panics on non-objects (reports are built statically).
    pub fn push(&mut self, key: &str, value: Json) -> &mut Self {
        match self {
            Json::Obj(entries) => entries.push((key.to_string(), value)),
            _ => unreachable!("push on non-object"),
        }
        self
    }

    pub fn num(v: f64) -> Json {
        Json::Num(v)
    }

    pub fn to_pretty_string(&self) -> Result<String> {
        let mut out = String::new();
        self.write(&mut out, 0)?;
        out.push('\n');
        Ok(out)
    }

    fn write(&self, out: &mut String, indent: usize) -> Result<()> {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => out.push_str(&i.to_string()),
            Json::Num(v) => out.push_str(&format_float(*v)?),
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return Ok(());
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Obj(entries) => {
                if entries.is_empty() {
                    out.push_str("{}");
                    return Ok(());
                }
                out.push('{');
                for (i, (key, value)) in entries.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write(out, indent + 1)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
        Ok(())
    }
}

fn push_indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// 17 significant digits: enough to reconstruct the exact f64.
pub fn format_float(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::invalid("report", format!("non-finite value {v}")));
    }
    Ok(format!("{v:.16e}"))
}

/// Stable column header shared by normal and Poisson rows; cells that do
/// not apply to a mode stay empty.
pub const CSV_HEADER: &str =
    "model,n_or_N,lambda,c,kappa_exact,kappa_simple,rho_exact,rho_b1,rho_b2,bound,actual,ratio";

/// One CSV row; `None` cells are emitted empty, numeric cells must be finite.
#[allow(clippy::too_many_arguments)]
pub fn csv_row(
    model: &str,
    n_or_n: usize,
    lambda: f64,
    c: Option<f64>,
    kappa_exact: Option<f64>,
    kappa_simple: Option<f64>,
    rho_exact: Option<f64>,
    rho_b1: Option<f64>,
    rho_b2: Option<f64>,
    bound: f64,
    actual: f64,
) -> Result<String> {
    let opt = |v: Option<f64>| -> Result<String> { v.map_or(Ok(String::new()), format_float) };
    Ok(format!(
        "{model},{n_or_n},{},{},{},{},{},{},{},{},{},{}",
        format_float(lambda)?,
        opt(c)?,
        opt(kappa_exact)?,
        opt(kappa_simple)?,
        opt(rho_exact)?,
        opt(rho_b1)?,
        opt(rho_b2)?,
        format_float(bound)?,
        format_float(actual)?,
        format_float(bound / actual.max(f64::MIN_POSITIVE))?,
    ))
}
