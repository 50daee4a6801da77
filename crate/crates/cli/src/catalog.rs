//! The system catalog as text or JSON.

use serde::Serialize;

use nhp_core::certificates::{certificate_catalog, Form};
use nhp_core::systems::{default_system, CATALOG, DEFAULT_SIGN_SMOOTHING};

#[derive(Debug, Clone, Serialize)]
pub struct Parameter {
    pub name: &'static str,
    pub default: String,
    pub constraint: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateInfo {
    pub form: &'static str,
    pub available: bool,
    pub description: String,
    pub origin: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: String,
    pub parameters: Vec<Parameter>,
    pub certificates: Vec<CertificateInfo>,
}

fn param(name: &'static str, default: impl ToString, constraint: &'static str) -> Parameter {
    Parameter {
        name,
        default: default.to_string(),
        constraint,
    }
}

fn parameters(name: &str) -> Vec<Parameter> {
    match name {
        "linear_hp" | "sinh_hp" | "cubic_hp" => vec![param("lambda", 1.0, "> 0")],
        "sector_hp" => vec![
            param("lambda", 1.0, "> 0"),
            param("nonlinearity", "tanh_blend", "saturated_linear | rational_blend | tanh_blend"),
            param("inner_slope", "shape default", "> 0"),
            param("outer_slope", "shape default", "> 0"),
            param("knee", 1.0, "> 0, saturated_linear only"),
            param("lower", "natural sector", "> 0"),
            param("upper", "natural sector", ">= lower"),
        ],
        "pi" => vec![
            param("kp", 1.0, "> 0"),
            param("k3", 0.5, ">= 0"),
            param("ki", 1.0, "> 0"),
        ],
        _ => vec![
            param("kp", 1.0, "> 0"),
            param("ki", 1.0, "> 0"),
            param("ks", 1.0, "> 0"),
            param("smoothing", DEFAULT_SIGN_SMOOTHING, ">= 0, 0 keeps the exact sign"),
        ],
    }
}

/// Every catalog system with its parameters and certificate availability.
pub fn list_catalog() -> Vec<CatalogEntry> {
    CATALOG
        .iter()
        .map(|&name| {
            let sys = default_system(name).expect("catalog names resolve");
            let certificates = [Form::Nhp, Form::Anhp]
                .into_iter()
                .map(|form| match certificate_catalog(&sys, form) {
                    Ok(c) => CertificateInfo {
                        form: form.as_str(),
                        available: true,
                        description: c.label,
                        origin: Some(format!("{:?}", c.origin).to_lowercase()),
                    },
                    Err(e) => CertificateInfo {
                        form: form.as_str(),
                        available: false,
                        description: e.to_string(),
                        origin: None,
                    },
                })
                .collect();
            CatalogEntry {
                name,
                description: sys.label(),
                parameters: parameters(name),
                certificates,
            }
        })
        .collect()
}

pub fn catalog_text(entries: &[CatalogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{}\n  default: {}\n", e.name, e.description));
        for p in &e.parameters {
            out.push_str(&format!("  {} = {} ({})\n", p.name, p.default, p.constraint));
        }
        for c in &e.certificates {
            let state = if c.available { "available" } else { "unavailable" };
            out.push_str(&format!("  {}: {state}", c.form));
            if let Some(o) = &c.origin {
                out.push_str(&format!(", {o}"));
            }
            out.push('\n');
        }
    }
    out
}

pub fn catalog_json(entries: &[CatalogEntry]) -> String {
    let mut s = serde_json::to_string_pretty(entries).expect("catalog serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_systems_with_both_forms() {
        let entries = list_catalog();
        assert_eq!(entries.len(), 6);
        for e in &entries {
            assert_eq!(e.certificates.len(), 2);
            assert!(e.certificates.iter().all(|c| c.available), "{}", e.name);
        }
        let text = catalog_text(&entries);
        assert!(text.contains("nhp: available") && text.contains("anhp: available"));
        let json: serde_json::Value = serde_json::from_str(&catalog_json(&entries)).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 6);
    }
}
