mod common;

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use serde_json::{json, Value};

use common::{app, assert_error, decode, faces_model};
use styleprobe::codec;
use styleprobe::generator::{Generator, GeneratorGeometry, LayerAssignment, StyleVector};
use styleprobe::numeric::Rng;
use styleprobe::scenario::toy_faces;

fn generator() -> Generator {
    Generator::new(GeneratorGeometry::default()).unwrap()
}

fn single(slot: &str) -> Value {
    json!({"type": "single", "slot": slot})
}

#[tokio::test]
async fn config_echo() {
    let t = app();
    let (status, cfg) = t.get("/config").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cfg["layers"], 6);
    assert_eq!(cfg["grouping"], json!([[1, 2], [3, 4], [5, 6]]));
    assert_eq!(cfg["image_size"], 64);
    assert_eq!(cfg["output_count"], 7);
    assert_eq!(
        cfg["default_lambdas"],
        json!([-0.09, -0.06, -0.03, 0.03, 0.06, 0.09])
    );
    let models: Vec<&str> = cfg["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["id"].as_str().unwrap())
        .collect();
    assert_eq!(models, vec!["faces", "flat"]);
    assert_eq!(cfg["scenarios"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn create_session_contract() {
    let t = app();
    let a = t.session("faces").await;
    let b = t.session("faces").await;
    assert_ne!(a["id"], b["id"]);
    assert_eq!(a["slots"], json!(["base"]));
    assert_eq!(a["history_len"], 0);
    let model = faces_model();
    assert_eq!(
        model.score(&decode(&a["image"])).unwrap(),
        a["score"].as_f64().unwrap()
    );

    let (status, body) = t
        .post(
            "/sessions",
            json!({"scenario": "toy-faces", "model_id": "nope"}),
        )
        .await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
    let (status, body) = t
        .post(
            "/sessions",
            json!({"scenario": "toy-trees", "model_id": "faces"}),
        )
        .await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
    // A faces model cannot drive a flower session.
    let (status, body) = t
        .post(
            "/sessions",
            json!({"scenario": "toy-flowers-a", "model_id": "faces"}),
        )
        .await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
    let (status, body) = t
        .post(
            "/sessions",
            json!({"scenario": "toy-faces", "model_id": "faces", "grouping": [1, 2, 3]}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["grouping"], json!([[1], [2, 3], [4, 5, 6]]));
    let (status, body) = t
        .post(
            "/sessions",
            json!({"scenario": "toy-faces", "model_id": "faces", "grouping": [2, 2]}),
        )
        .await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn malformed_requests_use_the_envelope() {
    let t = app();
    let req = Request::builder()
        .method("POST")
        .uri("/sessions")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let (status, body) = t.raw(req).await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
    let (status, body) = t.get("/no/such/route").await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
    let (status, body) = t.post("/sessions/s-404/generate", json!({})).await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
    let (status, body) = t.get("/jobs/job-404").await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn generate_sorted_and_rescorable() {
    let t = app();
    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap();
    let (status, out) = t.post(&format!("/sessions/{id}/generate"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    let items = out["items"].as_array().unwrap();
    assert_eq!(items.len(), 7);
    let model = faces_model();
    let scores: Vec<f64> = items.iter().map(|i| i["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    for item in items {
        let rescored = model.score(&decode(&item["image"])).unwrap();
        assert!((rescored - item["score"].as_f64().unwrap()).abs() <= 1e-6);
    }
    let (_, view) = t.get(&format!("/sessions/{id}")).await;
    assert_eq!(view["slots"].as_array().unwrap().len(), 8);

    let (status, body) = t
        .post(&format!("/sessions/{id}/generate"), json!({"count": 0}))
        .await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn generate_replays_with_fixed_seed() {
    let t = app();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let s = t.session("faces").await;
        let id = s["id"].as_str().unwrap();
        let (_, out) = t
            .post(
                &format!("/sessions/{id}/generate"),
                json!({"count": 5, "seed": 42}),
            )
            .await;
        runs.push(out);
    }
    assert_eq!(runs[0], runs[1]);
}

#[tokio::test]
async fn generate_ties_keep_creation_order() {
    let t = app();
    let s = t.session("flat").await;
    let id = s["id"].as_str().unwrap();
    let (_, out) = t
        .post(&format!("/sessions/{id}/generate"), json!({"count": 6}))
        .await;
    let slots: Vec<&str> = out["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["slot"].as_str().unwrap())
        .collect();
    assert_eq!(slots, vec!["g1", "g2", "g3", "g4", "g5", "g6"]);
    assert!(out["items"]
        .as_array()
        .unwrap()
        .iter()
        .all(|i| i["score"] == 0.0));
}

#[tokio::test]
async fn mix_contract() {
    let t = app();
    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap();
    let (_, gen) = t
        .post(
            &format!("/sessions/{id}/generate"),
            json!({"count": 2, "seed": 1}),
        )
        .await;
    let other = gen["items"][0]["slot"].as_str().unwrap().to_string();
    let mix = format!("/sessions/{id}/mix");

    let (status, all_base) = t
        .post(
            &mix,
            json!({"assignment": [single("base"), single("base"), single("base")]}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{all_base}");
    assert_eq!(all_base["image"], s["image"]);
    assert_eq!(all_base["history_len"], 1);

    let blend = |alpha: f64| json!({"type": "blend", "a": "base", "b": other, "alpha": alpha});
    let (_, at0) = t
        .post(
            &mix,
            json!({"assignment": [blend(0.0), blend(0.0), blend(0.0)]}),
        )
        .await;
    assert_eq!(at0["image"], s["image"]);
    assert_eq!(at0["history_len"], 2);
    let (_, at1) = t
        .post(
            &mix,
            json!({"assignment": [blend(1.0), blend(1.0), blend(1.0)]}),
        )
        .await;
    let other_image = &gen["items"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["slot"] == other.as_str())
        .unwrap()["image"];
    assert_eq!(&at1["image"], other_image);

    // Mixed image matches a direct synthesis of the same per-layer styles.
    let (_, mixed) = t
        .post(
            &mix,
            json!({"assignment": [single("base"), single(&other), blend(0.3)]}),
        )
        .await;
    let (_, snap) = t.get(&format!("/sessions/{id}/snapshot")).await;
    let style = |name: &str| -> StyleVector {
        let slot = snap["slots"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["name"] == name)
            .unwrap();
        serde_json::from_value(slot["style"].clone()).unwrap()
    };
    let g = generator();
    let (b, o) = (style("base"), style(&other));
    let mut assignment = LayerAssignment::uniform(&b, 6);
    for layer in 2..4 {
        assignment.set(layer, styleprobe::generator::LayerStyle::single(o.clone()));
    }
    for layer in 4..6 {
        assignment.set(
            layer,
            styleprobe::generator::LayerStyle::blend(b.clone(), o.clone(), 0.3),
        );
    }
    let direct = codec::quantized(&g.synthesize(&assignment, &toy_faces()).unwrap());
    assert_eq!(decode(&mixed["image"]), direct);

    let (status, body) = t
        .post(
            &mix,
            json!({"assignment": [single("base"), single("nope"), single("base")]}),
        )
        .await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
    let (status, body) = t
        .post(
            &mix,
            json!({"assignment": [blend(1.5), blend(0.0), blend(0.0)]}),
        )
        .await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
    let (status, body) = t.post(&mix, json!({"assignment": [single("base")]})).await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
    let (_, view) = t.get(&format!("/sessions/{id}")).await;
    assert_eq!(view["history_len"], 4);
}

#[tokio::test]
async fn views_contract() {
    let t = app();
    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap();
    t.post(
        &format!("/sessions/{id}/generate"),
        json!({"count": 3, "seed": 9}),
    )
    .await;
    let (_, current) = t
        .post(
            &format!("/sessions/{id}/mix"),
            json!({"assignment": [single("g1"), single("base"), single("g2")]}),
        )
        .await;

    let (status, style) = t
        .post(&format!("/sessions/{id}/views"), json!({"mode": "style"}))
        .await;
    assert_eq!(status, StatusCode::OK, "{style}");
    let thumbs = style["thumbnails"].as_array().unwrap();
    assert_eq!(thumbs.len(), 3 * 4);
    for th in thumbs {
        let slot = th["slot"].as_str().unwrap();
        let (_, direct) = t
            .post(
                &format!("/sessions/{id}/mix"),
                json!({"assignment": [single(slot), single(slot), single(slot)]}),
            )
            .await;
        assert_eq!(th["image"], direct["image"]);
    }
    // Restore the selection the result view is relative to.
    t.post(
        &format!("/sessions/{id}/mix"),
        json!({"assignment": [single("g1"), single("base"), single("g2")]}),
    )
    .await;
    let (_, result) = t
        .post(&format!("/sessions/{id}/views"), json!({"mode": "result"}))
        .await;
    let thumbs = result["thumbnails"].as_array().unwrap();
    assert_eq!(thumbs.len(), 12);
    let selected = ["g1", "base", "g2"];
    for th in thumbs {
        let g = th["group"].as_u64().unwrap() as usize;
        if th["slot"] == selected[g] {
            assert_eq!(th["image"], current["image"]);
        }
    }
    let (status, body) = t
        .post(
            &format!("/sessions/{id}/views"),
            json!({"mode": "sideways"}),
        )
        .await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
}

async fn wait_job(t: &common::TestApp, job: &str) -> Value {
    let mut last_progress = 0.0;
    for _ in 0..2400 {
        let (status, rec) = t.get(&format!("/jobs/{job}")).await;
        assert_eq!(status, StatusCode::OK);
        let p = rec["progress"].as_f64().unwrap();
        assert!(p >= last_progress, "progress went backwards");
        last_progress = p;
        if rec["state"] != "running" {
            return rec;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    panic!("job {job} did not finish");
}

fn target_png() -> String {
    let g = generator();
    let w = g.sample_style(&mut Rng::new(77));
    codec::encode_png_base64(&g.synthesize_style(&w, &toy_faces()).unwrap()).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn inversion_job_adds_slot() {
    let t = app();
    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap();
    let (status, rec) = t
        .post(
            &format!("/sessions/{id}/invert"),
            json!({"image": target_png(), "restarts": 2, "steps": 60}),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{rec}");
    assert_eq!(rec["state"], "running");
    assert!(rec.get("result").is_none());
    let done = wait_job(&t, rec["id"].as_str().unwrap()).await;
    assert_eq!(done["state"], "done", "{done}");
    assert_eq!(done["progress"], 1.0);
    let result = &done["result"];
    let slot = result["slot"].as_str().unwrap();
    let (_, view) = t.get(&format!("/sessions/{id}")).await;
    assert!(view["slots"].as_array().unwrap().iter().any(|s| s == slot));
    let (_, resynth) = t
        .post(
            &format!("/sessions/{id}/mix"),
            json!({"assignment": [single(slot), single(slot), single(slot)]}),
        )
        .await;
    assert_eq!(resynth["image"], result["image"]);
    assert_eq!(resynth["score"], result["score"]);
    assert!(result["final_loss"].as_f64().unwrap() < 0.05);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn second_inversion_conflicts_and_cancel_leaves_no_slot() {
    let t = app();
    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap();
    let uri = format!("/sessions/{id}/invert");
    let (status, first) = t
        .post(
            &uri,
            json!({"image": target_png(), "restarts": 8, "steps": 100000}),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, body) = t
        .post(&uri, json!({"image": target_png(), "steps": 5}))
        .await;
    assert_error(status, &body, StatusCode::CONFLICT);
    assert_eq!(body["code"], "conflict");

    let job = first["id"].as_str().unwrap();
    let (status, _) = t.post(&format!("/jobs/{job}/cancel"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    let end = wait_job(&t, job).await;
    assert_eq!(end["state"], "cancelled");
    assert!(end.get("result").is_none());
    let (_, view) = t.get(&format!("/sessions/{id}")).await;
    assert_eq!(view["slots"], json!(["base"]));

    // The session is free again.
    let (status, rec) = t
        .post(
            &uri,
            json!({"image": target_png(), "restarts": 1, "steps": 3}),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{rec}");
    assert_eq!(
        wait_job(&t, rec["id"].as_str().unwrap()).await["state"],
        "done"
    );
}

#[tokio::test]
async fn inversion_rejects_bad_images() {
    let t = app();
    let s = t.session("faces").await;
    let uri = format!("/sessions/{}/invert", s["id"].as_str().unwrap());
    let (status, body) = t.post(&uri, json!({"image": "bm90IGEgcG5n"})).await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "undecodable_image");
    let small = styleprobe::generator::ImageBuffer::filled(8, 8, 0.5);
    let (status, body) = t
        .post(
            &uri,
            json!({"image": codec::encode_png_base64(&small).unwrap()}),
        )
        .await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn directions_and_sweeps() {
    let t = app();
    let (status, fit) = t
        .post(
            "/directions/fit",
            json!({"model_id": "faces", "n_train": 2000, "n_val": 500, "seed": 4}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{fit}");
    let dir_id = fit["direction_id"].as_str().unwrap().to_string();
    let u: Vec<f64> = serde_json::from_value(fit["direction"]["u"].clone()).unwrap();
    assert!((u.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
    assert!(t
        .dir
        .path()
        .join("directions")
        .join(format!("{dir_id}.json"))
        .exists());
    let (status, stored) = t.get(&format!("/directions/{dir_id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stored, fit["direction"]);

    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap();
    let uri = format!("/sessions/{id}/sweep");
    let (status, default) = t
        .post(&uri, json!({"slot": "base", "direction_id": dir_id}))
        .await;
    assert_eq!(status, StatusCode::OK, "{default}");
    let lambdas: Vec<f64> = default["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["lambda"].as_f64().unwrap())
        .collect();
    assert_eq!(lambdas, vec![-0.09, -0.06, -0.03, 0.03, 0.06, 0.09]);

    let mut with_zero = lambdas.clone();
    with_zero.push(0.0);
    let (_, swept) = t
        .post(
            &uri,
            json!({"slot": "base", "direction_id": dir_id, "lambdas": with_zero}),
        )
        .await;
    let entries = swept["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 7);
    assert_eq!(entries[3]["lambda"], 0.0);
    assert_eq!(entries[3]["image"], s["image"]);
    let model = faces_model();
    for e in entries {
        assert_eq!(
            model.score(&decode(&e["image"])).unwrap(),
            e["score"].as_f64().unwrap()
        );
    }
    let (_, again) = t
        .post(
            &uri,
            json!({"slot": "base", "direction_id": dir_id, "lambdas": with_zero}),
        )
        .await;
    assert_eq!(again, swept);

    let (status, body) = t
        .post(&uri, json!({"slot": "base", "direction_id": "dir-none"}))
        .await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
    let (status, body) = t
        .post(&uri, json!({"slot": "ghost", "direction_id": dir_id}))
        .await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
    let (status, body) = t
        .post("/directions/fit", json!({"model_id": "ghost"}))
        .await;
    assert_error(status, &body, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn single_class_fit_is_unprocessable() {
    let t = app();
    let (status, body) = t
        .post(
            "/directions/fit",
            json!({"model_id": "flat", "n_train": 200, "n_val": 50}),
        )
        .await;
    assert_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn attribution_contract() {
    let t = app();
    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap();
    let request = |method: &str, params: Value| json!({"model_id": "faces", "session_id": id, "slot": "base", "method": method, "params": params});
    let (status, sal) = t.post("/attribution", request("saliency", json!({}))).await;
    assert_eq!(status, StatusCode::OK, "{sal}");
    assert_eq!(sal["values"].as_array().unwrap().len(), 64);
    assert_eq!(sal["values"][0].as_array().unwrap().len(), 64);
    assert_eq!(decode(&sal["heatmap"]).dims(), (64, 64));
    assert_eq!(sal["score"], s["score"]);

    let (_, sg) = t
        .post(
            "/attribution",
            request("smoothgrad", json!({"sigma": 0.0, "samples": 5})),
        )
        .await;
    assert_eq!(sg["values"], sal["values"]);

    let (_, ig) = t
        .post("/attribution", request("integrated_gradients", json!({})))
        .await;
    assert_eq!(ig["params"]["steps"], 128);
    let diff = ig["score"].as_f64().unwrap() - ig["baseline_score"].as_f64().unwrap();
    let total = ig["total"].as_f64().unwrap();
    let summed: f64 = ig["values"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|row| row.as_array().unwrap().iter())
        .flat_map(|px| px.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()))
        .sum();
    assert!((summed - total).abs() < 1e-9);
    assert!(
        (summed - diff).abs() <= 0.01 * diff.abs() + 1e-4,
        "{summed} vs {diff}"
    );

    // An uploaded PNG of the same image gives the same map.
    let (_, by_image) = t
        .post(
            "/attribution",
            json!({"model_id": "faces", "image": s["image"], "method": "saliency"}),
        )
        .await;
    assert_eq!(by_image["values"], sal["values"]);

    let (status, body) = t.post("/attribution", request("gradcam", json!({}))).await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "unknown_method");
    let (status, body) = t
        .post(
            "/attribution",
            json!({"model_id": "faces", "method": "saliency"}),
        )
        .await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn snapshot_restore_replays_identically() {
    let t = app();
    let s = t.session("faces").await;
    let id = s["id"].as_str().unwrap().to_string();
    t.post(&format!("/sessions/{id}/generate"), json!({"count": 3}))
        .await;
    t.post(
        &format!("/sessions/{id}/mix"),
        json!({"assignment": [single("g2"), single("base"), single("g1")]}),
    )
    .await;

    let (status, snap) = t.post(&format!("/sessions/{id}/snapshot"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert!(t
        .dir
        .path()
        .join("sessions")
        .join(format!("{id}.json"))
        .exists());
    let (status, restored) = t.post("/sessions/restore", snap.clone()).await;
    assert_eq!(status, StatusCode::OK, "{restored}");
    let rid = restored["id"].as_str().unwrap().to_string();
    assert_ne!(rid, id);
    let (_, original_view) = t.get(&format!("/sessions/{id}")).await;
    assert_eq!(restored["image"], original_view["image"]);
    assert_eq!(restored["history_len"], original_view["history_len"]);

    let script = [
        ("generate", json!({"count": 4})),
        (
            "mix",
            json!({"assignment": [single("g5"), single("g1"), json!({"type": "blend", "a": "g6", "b": "base", "alpha": 0.4})]}),
        ),
        ("views", json!({"mode": "result"})),
    ];
    for (op, req) in script {
        let (_, a) = t.post(&format!("/sessions/{id}/{op}"), req.clone()).await;
        let (_, b) = t.post(&format!("/sessions/{rid}/{op}"), req).await;
        assert_eq!(a, b, "{op}");
    }
    let (_, a) = t.get(&format!("/sessions/{id}/snapshot")).await;
    let (_, b) = t.get(&format!("/sessions/{rid}/snapshot")).await;
    assert_eq!(a, b);

    let mut broken = snap;
    broken["slots"][0]["style"] = json!([0.0, 0.0]);
    let (status, body) = t.post("/sessions/restore", broken).await;
    assert_error(status, &body, StatusCode::BAD_REQUEST);
}
