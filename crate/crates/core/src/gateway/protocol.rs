//! Request and response bodies exchanged with a backend. The field names
//! are fixed by `docs/protocol.md`.

use serde::{Deserialize, Serialize};

use super::BackendKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendRequest {
    pub model: String,
    pub kind: BackendKind,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub params: RequestParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_new_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stop: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_token: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub status: ResponseStatus,
    /// One generated continuation per input (generation).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
    /// One row per input, one entry per candidate; `null` marks a candidate
    /// the backend could not score (fill_mask).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<Vec<Option<f64>>>>,
    /// One vector per input (embedding).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<f32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BackendResponse {
    pub fn outputs(outputs: Vec<String>) -> Self {
        BackendResponse {
            status: ResponseStatus::Ok,
            outputs,
            scores: None,
            vectors: None,
            error: None,
        }
    }

    pub fn scores(scores: Vec<Vec<Option<f64>>>) -> Self {
        BackendResponse {
            scores: Some(scores),
            ..Self::outputs(Vec::new())
        }
    }

    pub fn vectors(vectors: Vec<Vec<f32>>) -> Self {
        BackendResponse {
            vectors: Some(vectors),
            ..Self::outputs(Vec::new())
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        BackendResponse {
            status: ResponseStatus::Error,
            error: Some(message.into()),
            ..Self::outputs(Vec::new())
        }
    }
}

/// Parses a response body.
pub fn decode_response(body: &[u8]) -> Result<BackendResponse, serde_json::Error> {
    serde_json::from_slice(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape() {
        let req = BackendRequest {
            model: "bloomz-3b".into(),
            kind: BackendKind::FillMask,
            inputs: vec!["x [MASK].".into()],
            params: RequestParams {
                mask_token: Some("[MASK]".into()),
                candidates: vec!["a".into(), "b".into()],
                ..Default::default()
            },
        };
        let json = serde_json::to_string(&req).unwrap();
        assert_eq!(
            json,
            r#"{"model":"bloomz-3b","kind":"fill_mask","inputs":["x [MASK]."],"params":{"mask_token":"[MASK]","candidates":["a","b"]}}"#
        );
        assert_eq!(serde_json::from_str::<BackendRequest>(&json).unwrap(), req);
    }

    #[test]
    fn response_with_null_scores() {
        let r = decode_response(br#"{"status":"ok","scores":[[-0.5,null]]}"#).unwrap();
        assert_eq!(r.scores, Some(vec![vec![Some(-0.5), None]]));
        assert!(decode_response(br#"{"status":"maybe"}"#).is_err());
        let e = decode_response(br#"{"status":"error","error":"overloaded"}"#).unwrap();
        assert_eq!(e, BackendResponse::error("overloaded"));
    }
}
