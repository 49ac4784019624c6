//! Schema sidecar files.
//!
//! Flat `key = value` lines, `#` comments, blank lines ignored. Keys:
//!
//! ```text
//! label   = class
//! coord_x = x
//! coord_y = y
//! column  = temp: numeric
//! column  = soil: categorical(cambisol | luvisol | leptosol)
//! ```
//!
//! `column` lines repeat; their order is the feature-column order.

use std::path::Path;

use super::{ColumnKind, DatasetError, FeatureSchema};

pub fn parse_schema(path: impl AsRef<Path>) -> Result<FeatureSchema, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_schema_str(&text, &path.display().to_string())
}

pub fn parse_schema_str(text: &str, path: &str) -> Result<FeatureSchema, DatasetError> {
    let syntax = |line: usize, message: String| DatasetError::SchemaSyntax {
        path: path.to_string(),
        line,
        message,
    };
    let mut label = None;
    let mut coord_x = None;
    let mut coord_y = None;
    let mut columns: Vec<(String, ColumnKind)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(lineno, "expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "label" => label = Some(value.to_string()),
            "coord_x" => coord_x = Some(value.to_string()),
            "coord_y" => coord_y = Some(value.to_string()),
            "column" => {
                let (name, kind) = value.split_once(':').ok_or_else(|| {
                    syntax(lineno, format!("column `{value}` lacks `: <kind>`"))
                })?;
                let (name, kind) = (name.trim().to_string(), kind.trim());
                let kind = if kind == "numeric" {
                    ColumnKind::Numeric
                } else if let Some(rest) = kind.strip_prefix("categorical(") {
                    let inner = rest.strip_suffix(')').ok_or_else(|| {
                        syntax(lineno, "categorical levels must end with `)`".into())
                    })?;
                    let levels: Vec<String> = inner
                        .split('|')
                        .map(|l| l.trim().to_string())
                        .filter(|l| !l.is_empty())
                        .collect();
                    ColumnKind::Categorical { levels }
                } else {
                    return Err(syntax(
                        lineno,
                        format!("unknown column kind `{kind}` (use `numeric` or `categorical(...)`)"),
                    ));
                };
                columns.push((name, kind));
            }
            other => return Err(syntax(lineno, format!("unknown key `{other}`"))),
        }
    }

    let missing = |what: &str| DatasetError::SchemaSyntax {
        path: path.to_string(),
        line: 0,
        message: format!("missing `{what}` declaration"),
    };
    FeatureSchema::new(
        columns,
        coord_x.ok_or_else(|| missing("coord_x"))?,
        coord_y.ok_or_else(|| missing("coord_y"))?,
        label.ok_or_else(|| missing("label"))?,
    )
}

pub fn write_schema(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&format!("label = {}\n", schema.label));
    out.push_str(&format!("coord_x = {}\n", schema.coord_x));
    out.push_str(&format!("coord_y = {}\n", schema.coord_y));
    for (name, kind) in &schema.columns {
        match kind {
            ColumnKind::Numeric => out.push_str(&format!("column = {name}: numeric\n")),
            ColumnKind::Categorical { levels } => out.push_str(&format!(
                "column = {name}: categorical({})\n",
                levels.join(" | ")
            )),
        }
    }
    std::fs::write(path, out).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}
