//! Rendering and output plumbing shared by the subcommands.
//!
//! CSV cells are written with the shortest round-trip float formatting, so a
//! rerun with the same configuration is byte-identical. JSON goes through
//! `serde_json` with struct-order keys for the same reason.

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// One rectangular table: header plus stringified rows.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// The same table as a JSON array of objects keyed by the header.
    pub fn to_json(&self) -> String {
        let items: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for (key, cell) in self.header.iter().zip(row) {
                    // Numeric cells stay numbers in JSON; anything else
                    // stays a string.
                    let v = if let Ok(n) = cell.parse::<i64>() {
                        serde_json::json!(n)
                    } else {
                        match cell.parse::<f64>() {
                            Ok(x) if cell != "nan" => serde_json::json!(x),
                            _ => serde_json::json!(cell),
                        }
                    };
                    obj.insert((*key).to_string(), v);
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&items).expect("table serialization");
        s.push('\n');
        s
    }

    pub fn render(&self, format: crate::Format) -> String {
        match format {
            crate::Format::Csv => self.to_csv(),
            crate::Format::Json => self.to_json(),
        }
    }
}

/// Shortest round-trip decimal for a float cell; never NaN by contract.
pub fn num(v: f64) -> String {
    debug_assert!(v.is_finite());
    format!("{v}")
}

pub fn write_out(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, content)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(())
        }
    }
}
