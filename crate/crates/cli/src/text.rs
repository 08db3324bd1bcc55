//! Plain-text rendering of report documents for terminal use. The JSON
//! document stays the authoritative format; this is a lossy summary.

use serde_json::Value;

fn field<'a>(doc: &'a Value, key: &str) -> &'a Value {
    doc.get(key).unwrap_or(&Value::Null)
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn names(v: &Value) -> String {
    match v.as_array() {
        Some(items) => items
            .iter()
            .map(plain)
            .collect::<Vec<_>>()
            .join(" "),
        None => plain(v),
    }
}

pub fn render(doc: &Value) -> String {
    let mut out = String::new();
    match field(doc, "command").as_str().unwrap_or("") {
        "check" => {
            let class = field(doc, "classification");
            out.push_str(&format!("label: {}\n", plain(field(class, "label"))));
            out.push_str(&format!(
                "reflexive: {} transitive: {} symmetric: {}\n",
                plain(field(class, "reflexive")),
                plain(field(class, "transitive")),
                plain(field(class, "symmetric")),
            ));
            let cluster = field(doc, "cluster");
            out.push_str(&format!(
                "cluster ({} worlds): {}\n",
                plain(field(cluster, "size")),
                names(field(cluster, "worlds")),
            ));
            out.push_str(&format!(
                "point-homogeneous: {}\n",
                plain(field(doc, "point_homogeneous")),
            ));
        }
        "orbits" => {
            let stab = field(doc, "stabilizer");
            out.push_str(&format!("stabilizer order: {}\n", plain(field(stab, "order"))));
            if let Some(orbits) = field(doc, "orbits").as_array() {
                for orbit in orbits {
                    let ext = field(orbit, "ext");
                    out.push_str(&format!(
                        "orbit {}: {{{}}} size {} ext {} (restricted order {})\n",
                        plain(field(orbit, "index")),
                        names(field(orbit, "worlds")),
                        plain(field(orbit, "size")),
                        if field(ext, "holds").as_bool() == Some(true) {
                            "holds"
                        } else {
                            "fails"
                        },
                        plain(field(ext, "restricted_order")),
                    ));
                }
            }
            out.push_str(&format!(
                "designated orbit: {{{}}} (ext trivially holds)\n",
                plain(field(field(doc, "designated_orbit"), "world")),
            ));
            out.push_str(&format!(
                "point-homogeneous: {}\n",
                plain(field(doc, "point_homogeneous")),
            ));
        }
        "decompose" => {
            let inv = field(doc, "invariance");
            out.push_str(&format!(
                "invariant: {} (max deviation {})\n",
                plain(field(inv, "invariant")),
                plain(field(inv, "max_deviation")),
            ));
            if let Some(components) = field(doc, "components").as_array() {
                out.push_str(&format!("components: {}\n", components.len()));
                for (i, c) in components.iter().enumerate() {
                    out.push_str(&format!(
                        "  component {i}: weight {} support size {}\n",
                        plain(field(c, "weight")),
                        plain(field(c, "support_size")),
                    ));
                }
                out.push_str(&format!(
                    "reconstruction error: {}\n",
                    plain(field(doc, "reconstruction_error")),
                ));
            }
        }
        "sample" => {
            out.push_str(&format!(
                "wrote {} replicates (seed {}) to {}\n",
                plain(field(doc, "replicates")),
                plain(field(doc, "seed")),
                plain(field(field(doc, "dataset"), "path")),
            ));
            out.push_str(&format!(
                "dataset fingerprint: {}\n",
                plain(field(field(doc, "dataset"), "fingerprint")),
            ));
        }
        "verify" => {
            if let Some(tests) = field(doc, "tests").as_array() {
                for t in tests {
                    let verdict = if field(t, "pass").as_bool() == Some(true) {
                        "PASS"
                    } else {
                        "FAIL"
                    };
                    let measure = match field(t, "p_value") {
                        Value::Null => format!("deviation={}", plain(field(t, "deviation"))),
                        p => format!("p={}", plain(p)),
                    };
                    out.push_str(&format!(
                        "{verdict} {} {measure} threshold={}\n",
                        plain(field(t, "test")),
                        plain(field(t, "threshold")),
                    ));
                    if let Some(notes) = field(t, "notes").as_array() {
                        for note in notes {
                            out.push_str(&format!("  note: {}\n", plain(note)));
                        }
                    }
                }
            }
            let coupling = field(doc, "coupling");
            if let Some(r) = field(coupling, "correlation").as_f64() {
                out.push_str(&format!("coupling correlation: {r}\n"));
            }
            out.push_str(&format!("overall: {}\n", plain(field(doc, "pass"))));
        }
        "posterior" => {
            if let Some(blocks) = field(doc, "posterior").as_array() {
                for block in blocks {
                    out.push_str(&format!(
                        "orbit {} {{{}}}:\n",
                        plain(field(block, "orbit")),
                        names(field(block, "worlds")),
                    ));
                    if let Some(shapes) = field(block, "shapes").as_array() {
                        for s in shapes {
                            out.push_str(&format!(
                                "  atom {}: Beta({}, {}) mean {}\n",
                                plain(field(s, "atom")),
                                plain(field(s, "a")),
                                plain(field(s, "b")),
                                plain(field(s, "mean")),
                            ));
                        }
                    }
                }
            }
        }
        _ => {
            out.push_str(&serde_json::to_string_pretty(doc).expect("report serializes"));
            out.push('\n');
        }
    }
    out
}
