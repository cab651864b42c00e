#![allow(dead_code)]

use std::sync::OnceLock;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::Value;
use tower::ServiceExt;

use styleprobe::classifier::{train, Architecture, ClassifierModel, Normalization, TrainConfig};
use styleprobe::codec;
use styleprobe::config::WorkbenchConfig;
use styleprobe::generator::{Generator, GeneratorGeometry, ImageBuffer};
use styleprobe::numeric::Rng;
use styleprobe::scenario::{make_dataset, toy_faces, DatasetConfig};
use styleprobe_server::AppState;

/// A small but genuinely trained toy-faces classifier, shared per test binary.
pub fn faces_model() -> ClassifierModel {
    static MODEL: OnceLock<ClassifierModel> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let g = Generator::new(GeneratorGeometry::default()).unwrap();
            let cfg = DatasetConfig {
                n_train: 1024,
                n_val: 256,
                seed: 3,
                ..Default::default()
            };
            let data = make_dataset(&g, &toy_faces(), &cfg).unwrap();
            let (model, _) = train(
                &data,
                &TrainConfig {
                    epochs: 4,
                    seed: 3,
                    ..Default::default()
                },
            )
            .unwrap();
            model
        })
        .clone()
}

/// Scores every image 0.
pub fn constant_model() -> ClassifierModel {
    let mut m = ClassifierModel::initialize(
        "toy-faces",
        Architecture::default(),
        Normalization::default(),
        &mut Rng::new(1),
    )
    .unwrap();
    let last = m.layers.last_mut().unwrap();
    last.weights.fill(0.0);
    last.bias.fill(0.0);
    m
}

pub struct TestApp {
    pub state: AppState,
    pub router: Router,
    pub dir: tempfile::TempDir,
}

pub fn app() -> TestApp {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = WorkbenchConfig::default();
    cfg.service.data_dir = dir.path().to_path_buf();
    let state = AppState::new(cfg).unwrap();
    state.insert_model("faces", faces_model());
    state.insert_model("flat", constant_model());
    TestApp {
        router: styleprobe_server::router(state.clone()),
        state,
        dir,
    }
}

impl TestApp {
    pub async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(&b).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        self.raw(req).await
    }

    pub async fn raw(&self, req: Request<Body>) -> (StatusCode, Value) {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
            .await
            .unwrap();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes)
                .unwrap_or_else(|_| panic!("non-JSON body: {}", String::from_utf8_lossy(&bytes)))
        };
        (status, value)
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call("POST", uri, Some(body)).await
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call("GET", uri, None).await
    }

    pub async fn session(&self, model: &str) -> Value {
        let (status, body) = self
            .post(
                "/sessions",
                serde_json::json!({"scenario": "toy-faces", "model_id": model}),
            )
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body
    }
}

pub fn decode(v: &Value) -> ImageBuffer {
    codec::decode_png_base64(v.as_str().expect("base64 string")).unwrap()
}

pub fn assert_error(status: StatusCode, body: &Value, expected: StatusCode) {
    assert_eq!(status, expected, "{body}");
    assert!(
        body["code"].is_string() && body["message"].is_string(),
        "{body}"
    );
}
