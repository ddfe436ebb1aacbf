//! Line-oriented `key = value` manifests with `[section]` headers.
//!
//! Unknown keys are preserved on rewrite (order kept); comments start with
//! `#`. Values referencing files are relative to the manifest's directory.

use crate::error::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
enum Line {
    Section(String),
    Entry { section: String, key: String, value: String },
    Comment(String),
    Blank,
}

/// Ordered manifest document.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    lines: Vec<Line>,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                lines.push(Line::Blank);
            } else if let Some(c) = trimmed.strip_prefix('#') {
                lines.push(Line::Comment(c.trim().to_string()));
            } else if trimmed.starts_with('[') && trimmed.ends_with(']') {
                section = trimmed[1..trimmed.len() - 1].trim().to_string();
                lines.push(Line::Section(section.clone()));
            } else if let Some((k, v)) = trimmed.split_once('=') {
                lines.push(Line::Entry {
                    section: section.clone(),
                    key: k.trim().to_string(),
                    value: v.trim().to_string(),
                });
            } else {
                return Err(Error::format(
                    "manifest",
                    format!("line {}: expected `key = value`, got {trimmed:?}", ln + 1),
                ));
            }
        }
        Ok(Manifest { lines })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            match line {
                Line::Section(s) => out.push_str(&format!("[{s}]\n")),
                Line::Entry { key, value, .. } => out.push_str(&format!("{key} = {value}\n")),
                Line::Comment(c) => out.push_str(&format!("# {c}\n")),
                Line::Blank => out.push('\n'),
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.lines.iter().find_map(|l| match l {
            Line::Entry { section: s, key: k, value } if s == section && k == key => {
                Some(value.as_str())
            }
            _ => None,
        })
    }

    /// Sets a value, updating in place or appending to the section
    /// (creating it at the end when absent).
    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        let value = value.to_string();
        for l in &mut self.lines {
            if let Line::Entry { section: s, key: k, value: v } = l {
                if s == section && k == key {
                    *v = value;
                    return;
                }
            }
        }
        // find the end of the section
        let mut insert_at = None;
        let mut in_section = section.is_empty();
        for (i, l) in self.lines.iter().enumerate() {
            match l {
                Line::Section(s) => {
                    if in_section {
                        insert_at = Some(i);
                        break;
                    }
                    in_section = s == section;
                }
                _ => {}
            }
        }
        if in_section {
            let at = insert_at.unwrap_or(self.lines.len());
            self.lines.insert(
                at,
                Line::Entry { section: section.to_string(), key: key.to_string(), value },
            );
        } else {
            if !self.lines.is_empty() {
                self.lines.push(Line::Blank);
            }
            self.lines.push(Line::Section(section.to_string()));
            self.lines.push(Line::Entry {
                section: section.to_string(),
                key: key.to_string(),
                value,
            });
        }
    }

    pub fn keys(&self, section: &str) -> Vec<(&str, &str)> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                Line::Entry { section: s, key, value } if s == section => {
                    Some((key.as_str(), value.as_str()))
                }
                _ => None,
            })
            .collect()
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<f64> {
        self.require(section, key)?
            .parse()
            .map_err(|_| Error::format("manifest", format!("[{section}] {key} is not a number")))
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<u64> {
        self.require(section, key)?
            .parse()
            .map_err(|_| Error::format("manifest", format!("[{section}] {key} is not an unsigned integer")))
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<usize> {
        Ok(self.get_u64(section, key)? as usize)
    }

    pub fn get_vec3(&self, section: &str, key: &str) -> Result<crate::math::Vec3> {
        let raw = self.require(section, key)?;
        let parts: Vec<f64> = raw
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format("manifest", format!("[{section}] {key} is not a 3-vector")))?;
        if parts.len() != 3 {
            return Err(Error::format("manifest", format!("[{section}] {key} needs 3 components")));
        }
        Ok(crate::math::Vec3::new(parts[0], parts[1], parts[2]))
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| Error::format("manifest", format!("missing [{section}] {key}")))
    }

    /// Checks that every `file_*`/`*_file` value resolves to an existing
    /// file relative to `base`.
    pub fn verify_file_references(&self, base: &Path) -> Result<()> {
        for line in &self.lines {
            if let Line::Entry { section, key, value } = line {
                if key.starts_with("file_") || key.ends_with("_file") {
                    let p = base.join(value);
                    if !p.exists() {
                        return Err(Error::format(
                            "manifest",
                            format!("[{section}] {key} references missing file {value}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, base: &Path, value: &str) -> PathBuf {
        base.join(value)
    }
}
