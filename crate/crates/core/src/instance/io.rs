use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Centroid, DemandPair, Edge, InstanceParams, Node, TransitInstance, WalkLink};

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema violation at {json_path} (schema {schema_path}): {message}")]
    Schema {
        json_path: String,
        schema_path: String,
        message: String,
    },
    #[error("invariant {invariant} violated: {message}")]
    Invariant { invariant: &'static str, message: String },
    #[error("{what} references unknown id {id}")]
    DanglingId { what: String, id: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default)]
    name: String,
    #[serde(default)]
    params: InstanceParams,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    centroids: Vec<Centroid>,
    demands: Vec<DemandPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    walk_links: Option<Vec<WalkLink>>,
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<TransitInstance, InstanceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut inst = parse_instance(&text)?;
    if inst.name.is_empty() {
        inst.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(inst)
}

pub fn parse_instance(text: &str) -> Result<TransitInstance, InstanceError> {
    let value: Value = serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
    check_schema(&value)?;
    let file: InstanceFile = serde_json::from_value(value).map_err(|e| InstanceError::Json(e.to_string()))?;
    TransitInstance::from_parts(
        file.name,
        file.params,
        file.nodes,
        file.edges,
        file.centroids,
        file.demands,
        file.walk_links,
    )
}

/// Canonical JSON text of an instance. Derived walk links are omitted (they
/// are re-derived on load); explicit ones are kept.
pub fn to_json(inst: &TransitInstance) -> String {
    let file = InstanceFile {
        name: inst.name.clone(),
        params: inst.params.clone(),
        nodes: inst.nodes.clone(),
        edges: inst.edges.clone(),
        centroids: inst.centroids.clone(),
        demands: inst.demands.clone(),
        walk_links: inst.explicit_walk_links.then(|| inst.walk_links.clone()),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
    s.push('\n');
    s
}

pub fn save_instance(inst: &TransitInstance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    std::fs::write(path, to_json(inst)).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })
}

// Hand-written check mirroring schema/instance.schema.json, so errors can cite
// both the offending JSON location and the schema rule.

enum Kind {
    Bool,
    Number,
    NonNegInt,
    Position,
    Pair,
    Mode,
}

struct Field {
    name: &'static str,
    kind: Kind,
    required: bool,
}

const fn req(name: &'static str, kind: Kind) -> Field {
    Field { name, kind, required: true }
}

const fn opt(name: &'static str, kind: Kind) -> Field {
    Field { name, kind, required: false }
}

const NODE_FIELDS: &[Field] = &[
    req("id", Kind::NonNegInt),
    req("position", Kind::Position),
    opt("in_rapid", Kind::Bool),
    opt("in_slow", Kind::Bool),
    opt("rapid_origin", Kind::Bool),
    opt("rapid_dest", Kind::Bool),
    opt("slow_origin", Kind::Bool),
    opt("slow_dest", Kind::Bool),
];

const EDGE_FIELDS: &[Field] = &[
    req("id", Kind::NonNegInt),
    req("endpoints", Kind::Pair),
    opt("in_rapid", Kind::Bool),
    opt("in_slow", Kind::Bool),
    req("length", Kind::Number),
    opt("on_old_slow_line", Kind::Bool),
];

const CENTROID_FIELDS: &[Field] = &[req("id", Kind::NonNegInt), req("position", Kind::Position)];

const DEMAND_FIELDS: &[Field] = &[
    req("id", Kind::NonNegInt),
    req("origin", Kind::NonNegInt),
    req("dest", Kind::NonNegInt),
    req("demand", Kind::Number),
    opt("private_utility", Kind::Number),
];

const LINK_FIELDS: &[Field] = &[
    req("centroid", Kind::NonNegInt),
    req("station", Kind::NonNegInt),
    req("mode", Kind::Mode),
    req("walk_time", Kind::Number),
];

const PARAM_FIELDS: &[Field] = &[
    opt("max_rapid_edges", Kind::NonNegInt),
    opt("max_slow_edges", Kind::NonNegInt),
    opt("min_unchanged_slow_edges", Kind::NonNegInt),
    opt("min_station_spacing", Kind::Number),
    opt("max_walk_rapid", Kind::Number),
    opt("max_walk_slow", Kind::Number),
    opt("walk_speed", Kind::Number),
    opt("rapid_speed", Kind::Number),
    opt("slow_speed", Kind::Number),
    opt("private_speed", Kind::Number),
    opt("transfer_time_rs", Kind::Number),
    opt("transfer_time_sr", Kind::Number),
    opt("stop_time_rapid", Kind::Number),
    opt("stop_time_slow", Kind::Number),
    opt("wait_time", Kind::Number),
    opt("private_utility_factor", Kind::Number),
    opt("enable_shape_constraints", Kind::Bool),
];

fn schema_err(json_path: String, schema_path: String, message: impl Into<String>) -> InstanceError {
    InstanceError::Schema {
        json_path,
        schema_path,
        message: message.into(),
    }
}

fn check_schema(root: &Value) -> Result<(), InstanceError> {
    let obj = root
        .as_object()
        .ok_or_else(|| schema_err("/".into(), "#/type".into(), "top level must be an object"))?;
    const TOP: &[&str] = &["name", "params", "nodes", "edges", "centroids", "demands", "walk_links"];
    for key in obj.keys() {
        if !TOP.contains(&key.as_str()) {
            return Err(schema_err(
                format!("/{key}"),
                "#/additionalProperties".into(),
                format!("unknown top-level section `{key}`"),
            ));
        }
    }
    if let Some(name) = obj.get("name") {
        if !name.is_string() {
            return Err(schema_err("/name".into(), "#/properties/name/type".into(), "expected a string"));
        }
    }
    if let Some(params) = obj.get("params") {
        let p = params.as_object().ok_or_else(|| {
            schema_err("/params".into(), "#/properties/params/type".into(), "expected an object")
        })?;
        check_object(p, PARAM_FIELDS, "/params", "#/properties/params")?;
    }
    for (section, fields, required) in [
        ("nodes", NODE_FIELDS, true),
        ("edges", EDGE_FIELDS, true),
        ("centroids", CENTROID_FIELDS, true),
        ("demands", DEMAND_FIELDS, true),
        ("walk_links", LINK_FIELDS, false),
    ] {
        let schema = format!("#/properties/{section}");
        let Some(v) = obj.get(section) else {
            if required {
                return Err(schema_err(
                    "/".into(),
                    "#/required".into(),
                    format!("missing required section `{section}`"),
                ));
            }
            continue;
        };
        let arr = v
            .as_array()
            .ok_or_else(|| schema_err(format!("/{section}"), format!("{schema}/type"), "expected an array"))?;
        for (i, item) in arr.iter().enumerate() {
            let path = format!("/{section}/{i}");
            let o = item
                .as_object()
                .ok_or_else(|| schema_err(path.clone(), format!("{schema}/items/type"), "expected an object"))?;
            check_object(o, fields, &path, &format!("{schema}/items"))?;
        }
    }
    Ok(())
}

fn check_object(o: &Map<String, Value>, fields: &[Field], path: &str, schema: &str) -> Result<(), InstanceError> {
    for key in o.keys() {
        if !fields.iter().any(|f| f.name == key) {
            return Err(schema_err(
                format!("{path}/{key}"),
                format!("{schema}/additionalProperties"),
                format!("unknown field `{key}`"),
            ));
        }
    }
    for f in fields {
        let fpath = format!("{path}/{}", f.name);
        let fschema = format!("{schema}/properties/{}", f.name);
        let Some(v) = o.get(f.name) else {
            if f.required {
                return Err(schema_err(
                    path.to_string(),
                    format!("{schema}/required"),
                    format!("missing required field `{}`", f.name),
                ));
            }
            continue;
        };
        let is_num = |v: &Value| v.as_f64().is_some_and(f64::is_finite);
        let ok = match f.kind {
            Kind::Bool => v.is_boolean(),
            Kind::Number => is_num(v),
            Kind::NonNegInt => v.as_u64().is_some(),
            Kind::Position => v.as_array().is_some_and(|a| a.len() == 2 && a.iter().all(is_num)),
            Kind::Pair => v
                .as_array()
                .is_some_and(|a| a.len() == 2 && a.iter().all(|x| x.as_u64().is_some())),
            Kind::Mode => matches!(v.as_str(), Some("rapid") | Some("slow")),
        };
        if !ok {
            let expected = match f.kind {
                Kind::Bool => "a boolean",
                Kind::Number => "a finite number",
                Kind::NonNegInt => "a non-negative integer",
                Kind::Position => "an [x, y] pair of numbers",
                Kind::Pair => "a pair of node ids",
                Kind::Mode => "\"rapid\" or \"slow\"",
            };
            return Err(schema_err(fpath, fschema, format!("expected {expected}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "params": {"min_unchanged_slow_edges": 1},
      "nodes": [
        {"id": 0, "position": [0, 0], "in_rapid": true, "rapid_origin": true},
        {"id": 1, "position": [1000, 0], "in_rapid": true, "rapid_dest": true},
        {"id": 2, "position": [0, 500], "in_slow": true, "slow_origin": true},
        {"id": 3, "position": [1000, 500], "in_slow": true, "slow_dest": true}
      ],
      "edges": [
        {"id": 0, "endpoints": [0, 1], "in_rapid": true, "length": 1000},
        {"id": 1, "endpoints": [2, 3], "in_slow": true, "length": 1000, "on_old_slow_line": true}
      ],
      "centroids": [{"id": 0, "position": [0, 250]}, {"id": 1, "position": [1000, 250]}],
      "demands": [{"id": 0, "origin": 0, "dest": 1, "demand": 5}]
    }"#;

    #[test]
    fn minimal_file_loads() {
        let inst = parse_instance(MINIMAL).unwrap();
        assert_eq!(inst.arcs.len(), 4);
        assert_eq!(inst.num_pairs(), 1);
    }

    #[test]
    fn schema_error_cites_paths() {
        let bad = MINIMAL.replace(r#""length": 1000}"#, r#""length": "long"}"#);
        match parse_instance(&bad).unwrap_err() {
            InstanceError::Schema { json_path, schema_path, .. } => {
                assert_eq!(json_path, "/edges/0/length");
                assert_eq!(schema_path, "#/properties/edges/items/properties/length");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = MINIMAL.replace(r#""id": 0, "origin""#, r#""id": 0, "weight": 1, "origin""#);
        assert!(matches!(parse_instance(&bad), Err(InstanceError::Schema { .. })));
    }

    #[test]
    fn round_trip_is_canonical() {
        let inst = parse_instance(MINIMAL).unwrap();
        let text = to_json(&inst);
        let again = parse_instance(&text).unwrap();
        assert_eq!(text, to_json(&again));
    }
}
