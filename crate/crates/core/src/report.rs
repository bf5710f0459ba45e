//! Versioned JSON reports printed by the command-line tool.

use serde_json::{json, Value};

use crate::bnb::{SolveResult, SolverConfig};

pub const SCHEMA: u32 = 1;

pub fn compute_report(result: &SolveResult, cfg: &SolverConfig) -> Value {
    let mut v = serde_json::to_value(result).expect("plain data serializes");
    let obj = v.as_object_mut().expect("struct serializes to an object");
    obj.insert("schema".into(), json!(SCHEMA));
    obj.insert(
        "config".into(),
        serde_json::to_value(cfg).expect("plain data serializes"),
    );
    v
}

/// One estimator's outcome: a value, or `null` with the reason it does not
/// apply.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Value { value: f64, wall_time_s: f64 },
    Unavailable { reason: String },
}

impl Estimate {
    fn value(&self) -> Value {
        match self {
            Estimate::Value { value, .. } => json!(value),
            Estimate::Unavailable { .. } => Value::Null,
        }
    }

    fn detail(&self) -> Value {
        match self {
            Estimate::Value { wall_time_s, .. } => json!({"wall_time_s": wall_time_s}),
            Estimate::Unavailable { reason } => json!({"reason": reason}),
        }
    }
}

pub fn bounds_report(layerwise: &Estimate, symprop: &Estimate, sampled: &Estimate) -> Value {
    json!({
        "schema": SCHEMA,
        "layerwise": layerwise.value(),
        "symprop": symprop.value(),
        "sampled_lower": sampled.value(),
        "details": {
            "layerwise": layerwise.detail(),
            "symprop": symprop.detail(),
            "sampled_lower": sampled.detail(),
        },
    })
}

pub fn oracle_report(exact: f64, combinations: u128) -> Value {
    json!({
        "schema": SCHEMA,
        "exact": exact,
        "combinations": u64::try_from(combinations).unwrap_or(u64::MAX),
    })
}

/// Copy of `report` with every `wall_time_s` field removed, for comparing
/// runs.
pub fn strip_timing(report: &Value) -> Value {
    match report {
        Value::Object(map) => Value::Object(
            map.iter()
                .filter(|(k, _)| k.as_str() != "wall_time_s")
                .map(|(k, v)| (k.clone(), strip_timing(v)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.iter().map(strip_timing).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnb::SolveStatus;

    #[test]
    fn compute_report_fields() {
        let res = SolveResult {
            glb: 1.0,
            gub: 1.0,
            status: SolveStatus::Exact,
            iterations: 1,
            subproblems_created: 3,
            fathomed_bounds: 0,
            fathomed_optimality: 2,
            peak_heap_size: 1,
            wall_time_s: 0.25,
        };
        let v = compute_report(&res, &SolverConfig::default());
        assert_eq!(v["schema"], 1);
        assert_eq!(v["status"], "exact");
        assert_eq!(v["config"]["norm"], "2");
        assert_eq!(v["config"]["time_limit"], Value::Null);
        let stripped = strip_timing(&v);
        assert!(stripped.get("wall_time_s").is_none());
        assert_eq!(stripped["glb"], 1.0);
    }

    #[test]
    fn unavailable_estimate_is_null() {
        let v = bounds_report(
            &Estimate::Unavailable {
                reason: "p != q".into(),
            },
            &Estimate::Value {
                value: 1.0,
                wall_time_s: 0.0,
            },
            &Estimate::Value {
                value: 0.5,
                wall_time_s: 0.0,
            },
        );
        assert_eq!(v["layerwise"], Value::Null);
        assert_eq!(v["details"]["layerwise"]["reason"], "p != q");
        assert_eq!(v["sampled_lower"], 0.5);
    }
}
