//! Reports checked against `schema/report.schema.json`. The validator covers
//! the keywords that file uses.

use regex::Regex;
use riskchoice::choice::load_choices;
use riskchoice::design::builtin_design;
use riskchoice::report::{analyze_dataset, run_simulation, Population, RunConfig, SimulationSpec};
use serde_json::Value;

const SCHEMA: &str = include_str!("../../../schema/report.schema.json");

struct Validator<'a> {
    root: &'a Value,
    errors: Vec<String>,
}

impl Validator<'_> {
    fn check(&mut self, schema: &Value, value: &Value, path: &str) {
        if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
            let name = r.strip_prefix("#/$defs/").expect("local reference");
            let target = &self.root["$defs"][name];
            assert!(!target.is_null(), "unknown reference {r}");
            self.check(target, value, path);
            return;
        }
        if let Some(types) = schema.get("type") {
            let allowed: Vec<&str> = match types {
                Value::String(t) => vec![t.as_str()],
                Value::Array(ts) => ts.iter().filter_map(Value::as_str).collect(),
                _ => panic!("bad type keyword at {path}"),
            };
            if !allowed.iter().any(|t| type_matches(t, value)) {
                self.errors.push(format!("{path}: expected {allowed:?}, got {value}"));
                return;
            }
        }
        if let Some(options) = schema.get("enum").and_then(Value::as_array) {
            if !options.contains(value) {
                self.errors.push(format!("{path}: {value} not in {options:?}"));
            }
        }
        if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
            let matching = options
                .iter()
                .filter(|o| {
                    let mut sub = Validator { root: self.root, errors: Vec::new() };
                    sub.check(o, value, path);
                    sub.errors.is_empty()
                })
                .count();
            if matching != 1 {
                self.errors.push(format!("{path}: {matching} oneOf branches match"));
            }
        }
        if let (Some(pattern), Some(s)) = (schema.get("pattern").and_then(Value::as_str), value.as_str()) {
            if !Regex::new(pattern).expect("valid pattern").is_match(s) {
                self.errors.push(format!("{path}: `{s}` does not match {pattern}"));
            }
        }
        if let Some(n) = value.as_f64() {
            if schema.get("minimum").and_then(Value::as_f64).is_some_and(|m| n < m) {
                self.errors.push(format!("{path}: {n} below minimum"));
            }
            if schema.get("maximum").and_then(Value::as_f64).is_some_and(|m| n > m) {
                self.errors.push(format!("{path}: {n} above maximum"));
            }
        }
        if let Some(items) = value.as_array() {
            let len = items.len() as u64;
            if schema.get("minItems").and_then(Value::as_u64).is_some_and(|m| len < m)
                || schema.get("maxItems").and_then(Value::as_u64).is_some_and(|m| len > m)
            {
                self.errors.push(format!("{path}: {len} items out of bounds"));
            }
            if let Some(item) = schema.get("items") {
                for (k, v) in items.iter().enumerate() {
                    self.check(item, v, &format!("{path}[{k}]"));
                }
            }
        }
        if let Some(fields) = value.as_object() {
            let props = schema.get("properties").and_then(Value::as_object);
            for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
                let key = key.as_str().expect("string key");
                if !fields.contains_key(key) {
                    self.errors.push(format!("{path}: missing `{key}`"));
                }
            }
            for (key, v) in fields {
                let sub = format!("{path}.{key}");
                match (props.and_then(|p| p.get(key)), schema.get("additionalProperties")) {
                    (Some(s), _) => self.check(s, v, &sub),
                    (None, Some(Value::Bool(false))) => self.errors.push(format!("{path}: unexpected `{key}`")),
                    (None, Some(extra @ Value::Object(_))) => self.check(extra, v, &sub),
                    (None, _) => {}
                }
            }
        }
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        other => panic!("unsupported type {other}"),
    }
}

fn validate(report: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("schema is JSON");
    let mut v = Validator { root: &schema, errors: Vec::new() };
    v.check(&schema, report, "$");
    v.errors
}

fn simulated_report(agents: usize, population: Population) -> Value {
    let design = builtin_design();
    let mut spec = SimulationSpec::new(&design, agents, 7);
    spec.population = population;
    let sim = run_simulation(&design, &spec).unwrap();
    let dataset = load_choices(&design, std::str::from_utf8(&sim.choices_csv).unwrap(), "sim.csv").unwrap();
    let report = analyze_dataset(&design, &dataset, &RunConfig::new("sim.csv")).unwrap();
    serde_json::to_value(&report).unwrap()
}

#[test]
fn mixed_population_report_conforms() {
    let errors = validate(&simulated_report(30, Population::Mixed { noise_scale: 0.05 }));
    assert!(errors.is_empty(), "{:#?}", &errors[..errors.len().min(10)]);
}

#[test]
fn deferring_population_report_conforms() {
    let errors = validate(&simulated_report(12, Population::Uniform { include_deferral: true }));
    assert!(errors.is_empty(), "{:#?}", &errors[..errors.len().min(10)]);
}

#[test]
fn validator_rejects_broken_reports() {
    let mut report = simulated_report(3, Population::Mixed { noise_scale: 0.0 });
    report["subjects"][0]["merged"]["eum"]["is_um"] = Value::from("yes");
    report["aggregates"]["merged"]["approx_um"]["percent"] = Value::from("33.3");
    report["config"].as_object_mut().unwrap().remove("policy");
    let errors = validate(&report);
    assert_eq!(errors.len(), 3, "{errors:#?}");
}
