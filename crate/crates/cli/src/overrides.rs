//! `--set key=value` edits applied to a parsed TOML document.

use toml::{Table, Value};

/// Parse `value` as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Apply one `dotted.key=value` assignment, creating intermediate tables.
pub fn apply(doc: &mut Table, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override {assignment:?} is not of the form key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(format!("override key {key:?} is malformed"));
    }
    let mut table = doc;
    for part in &path[..path.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| format!("override key {key:?}: {part} is not a table"))?;
    }
    table.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_nested_and_typed_values() {
        let mut doc: Table = "a = 1\n[train]\nsteps = 5\n".parse().unwrap();
        apply(&mut doc, "train.steps=10").unwrap();
        apply(&mut doc, "m_grid=[1, 2, 3]").unwrap();
        apply(&mut doc, "head=ridge").unwrap();
        apply(&mut doc, "seeds.data=4").unwrap();
        assert_eq!(doc["train"]["steps"].as_integer(), Some(10));
        assert_eq!(doc["m_grid"].as_array().unwrap().len(), 3);
        assert_eq!(doc["head"].as_str(), Some("ridge"));
        assert_eq!(doc["seeds"]["data"].as_integer(), Some(4));
        assert!(apply(&mut doc, "a.b=1").is_err());
        assert!(apply(&mut doc, "novalue").is_err());
    }
}
