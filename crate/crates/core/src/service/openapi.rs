use serde_json::{json, Map, Value};

struct Operation {
    method: &'static str,
    path: &'static str,
    summary: &'static str,
    request: Option<(&'static str, Value)>,
    responses: &'static [(u16, &'static str)],
}

fn operations() -> Vec<Operation> {
    vec![
        Operation {
            method: "post",
            path: "/api/v1/sessions",
            summary: "Create a session in AwaitCausality, or replay a canned case",
            request: Some((
                "application/json",
                json!({"type": "object", "properties": {
                    "case": {"type": "string"},
                    "seed": {"type": "integer", "minimum": 0}
                }}),
            )),
            responses: &[(201, "session created"), (400, "malformed JSON body"), (422, "unknown case")],
        },
        Operation {
            method: "get",
            path: "/api/v1/sessions/{id}",
            summary: "Full session view: state, evidence, datasets, jobs and audit log",
            request: None,
            responses: &[(200, "session view"), (404, "unknown session")],
        },
        Operation {
            method: "post",
            path: "/api/v1/sessions/{id}/answer",
            summary: "Answer the current question: causality, done_testing or assertions",
            request: Some((
                "application/json",
                json!({"type": "object", "required": ["question"], "properties": {
                    "question": {"type": "string", "enum": ["causality", "done_testing", "assertions"]},
                    "value": {}
                }}),
            )),
            responses: &[
                (200, "updated state summary"),
                (404, "unknown session"),
                (409, "illegal transition; body lists the allowed inputs"),
                (422, "unknown question or invalid value"),
            ],
        },
        Operation {
            method: "post",
            path: "/api/v1/sessions/{id}/datasets",
            summary: "Upload the source or target CSV",
            request: Some((
                "multipart/form-data",
                json!({"type": "object", "required": ["role", "file"], "properties": {
                    "role": {"type": "string", "enum": ["source", "target"]},
                    "file": {"type": "string", "format": "binary"}
                }}),
            )),
            responses: &[
                (200, "dataset stored; pair validated once both are present"),
                (400, "malformed CSV, with row and column of the first failure"),
                (404, "unknown session"),
                (409, "dataset for this role already stored"),
                (413, "dataset exceeds the upload limit"),
                (422, "pair fails validation"),
            ],
        },
        Operation {
            method: "post",
            path: "/api/v1/sessions/{id}/tests",
            summary: "Run a test; mmd and fit_source_model run asynchronously",
            request: Some((
                "application/json",
                json!({"type": "object", "required": ["test"], "properties": {
                    "test": {"type": "string", "enum": ["feature_shift", "label_shift", "mmd", "class_conditional", "fit_source_model"]},
                    "permutations": {"type": "integer", "minimum": 100},
                    "learner": {"type": "string", "enum": ["logistic", "linear_svm", "rbf_svm"]},
                    "holdout_fraction": {"type": "number"}
                }}),
            )),
            responses: &[
                (200, "test finished; job carries the result"),
                (202, "test running; poll the session for the job status"),
                (404, "unknown session"),
                (409, "datasets missing or session not in Testing"),
                (422, "unknown test, or target labels required"),
            ],
        },
        Operation {
            method: "get",
            path: "/api/v1/openapi.json",
            summary: "This document",
            request: None,
            responses: &[(200, "OpenAPI document")],
        },
    ]
}

/// OpenAPI 3.1 document built from the operation table above.
pub fn document() -> Value {
    let mut paths = Map::new();
    for op in operations() {
        let mut responses = Map::new();
        for (code, desc) in op.responses {
            responses.insert(code.to_string(), json!({"description": desc}));
        }
        responses.insert("401".into(), json!({"description": "missing or wrong bearer token"}));
        let mut body = json!({"summary": op.summary, "responses": responses});
        if op.path.contains("{id}") {
            body["parameters"] = json!([{"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}]);
        }
        if let Some((media, schema)) = op.request {
            body["requestBody"] = json!({"content": {media: {"schema": schema}}});
        }
        let entry = paths.entry(op.path).or_insert_with(|| json!({}));
        entry[op.method] = body;
    }
    json!({
        "openapi": "3.1.0",
        "info": {"title": "shiftscope diagnosis service", "version": env!("CARGO_PKG_VERSION")},
        "components": {"securitySchemes": {"bearer": {"type": "http", "scheme": "bearer"}}},
        "security": [{"bearer": []}],
        "paths": paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_route_is_documented() {
        let doc = document();
        for (path, method) in [
            ("/api/v1/sessions", "post"),
            ("/api/v1/sessions/{id}", "get"),
            ("/api/v1/sessions/{id}/answer", "post"),
            ("/api/v1/sessions/{id}/datasets", "post"),
            ("/api/v1/sessions/{id}/tests", "post"),
        ] {
            assert!(doc["paths"][path][method].is_object(), "{method} {path}");
        }
    }
}
