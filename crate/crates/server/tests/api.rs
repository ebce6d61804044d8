use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use precplan_server::{app, ServerConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(router: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn hardware(max: &str) -> Value {
    let levels: Vec<&str> = ["INT4", "INT8", "FP16", "FP32"]
        .into_iter()
        .take_while(|l| *l != max)
        .chain([max])
        .collect();
    json!({"processor_class": "arm-a76", "ram_mb": 4096, "power_state": "mains", "available_levels": levels})
}

const REPLIES: [&str; 5] = [
    "On the nightstand in my bedroom.",
    "Mostly at night before sleep.",
    "A few times a day.",
    "Smart home control 50%, general questions 30%, entertainment 15%, personal requests 5%.",
    "Accuracy matters most, then speed, battery last.",
];

async fn onboard(router: &Router) -> String {
    let (status, body) = call(router, Method::POST, "/clients", Some(hardware("FP16"))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let client = body["client_id"].as_str().unwrap().to_string();
    let (status, body) = call(
        router,
        Method::POST,
        &format!("/clients/{client}/interview"),
        Some(json!({"scenario": "initialization"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert!(!body["agent_message"].as_str().unwrap().is_empty());
    let session = body["session_id"].as_str().unwrap().to_string();
    for (i, reply) in REPLIES.iter().enumerate() {
        let (status, body) = call(
            router,
            Method::POST,
            &format!("/interview/{session}/message"),
            Some(json!({"text": reply})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_eq!(body["done"], json!(i + 1 == REPLIES.len()));
    }
    client
}

#[tokio::test]
async fn full_client_lifecycle() {
    let router = app(ServerConfig::default()).unwrap();
    let client = onboard(&router).await;

    let (status, profile) = call(&router, Method::GET, &format!("/clients/{client}/profile"), None).await;
    assert_eq!(status, StatusCode::OK, "{profile}");
    assert_eq!(profile["context"]["device_location"], "bedroom");
    assert_eq!(profile["context"]["interaction_time"], "nighttime");
    assert_eq!(profile["inferred"]["noise_level"], "low");
    let w = &profile["estimated_weights"]["weights"];
    assert!(w["accuracy"].as_f64().unwrap() > w["energy"].as_f64().unwrap());

    let (status, plan) = call(&router, Method::POST, "/rounds/plan", Some(json!({"round": 0}))).await;
    assert_eq!(status, StatusCode::OK, "{plan}");
    let level = plan["assignments"][&client].as_str().unwrap().to_string();
    assert!(["INT4", "INT8", "FP16"].contains(&level.as_str()));

    let record = json!({
        "client_id": client, "round": 0, "level": level,
        "ratings": {"accuracy": 0.9, "energy": 0.6, "latency": 0.7},
        "free_text": "fine"
    });
    let (status, body) = call(&router, Method::POST, &format!("/clients/{client}/feedback"), Some(record)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["case_id"], 0);

    let (status, g) = call(&router, Method::POST, "/rounds/0/aggregate", None).await;
    assert_eq!(status, StatusCode::OK, "{g}");
    assert_eq!(g["round"], 1);

    let (status, m) = call(&router, Method::GET, "/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(m["case_count"], 1);
    assert_eq!(m["client_count"], 1);
    assert_eq!(m["round"], 1);
    assert_eq!(m["satisfaction"]["count"], 1);
    assert!(m["accuracy"]["smart_home"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn pre_aggregation_interview_records_feedback() {
    let router = app(ServerConfig::default()).unwrap();
    let client = onboard(&router).await;
    let start = Some(json!({"scenario": "pre_aggregation"}));
    let (status, _) = call(&router, Method::POST, &format!("/clients/{client}/interview"), start.clone()).await;
    assert_eq!(status, StatusCode::CONFLICT);
    call(&router, Method::POST, "/rounds/plan", Some(json!({"round": 0}))).await;
    let (status, body) = call(&router, Method::POST, &format!("/clients/{client}/interview"), start).await;
    assert_eq!(status, StatusCode::CREATED);
    let session = body["session_id"].as_str().unwrap().to_string();
    let mut done = false;
    for reply in ["Very accurate.", "Quick enough.", "The battery drains fast.", "Nothing changed."] {
        let (status, body) =
            call(&router, Method::POST, &format!("/interview/{session}/message"), Some(json!({"text": reply}))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        done = body["done"].as_bool().unwrap();
    }
    assert!(done);
    let (_, m) = call(&router, Method::GET, "/metrics", None).await;
    assert_eq!(m["case_count"], 1);
    let (status, s) = call(&router, Method::GET, &format!("/interview/{session}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["state"], "done");
    assert_eq!(s["transcript"].as_array().unwrap().len(), 9);
}

#[tokio::test]
async fn not_found_responses() {
    let router = app(ServerConfig::default()).unwrap();
    for (method, uri, body) in [
        (Method::GET, "/clients/nobody/profile", None),
        (Method::POST, "/clients/nobody/interview", Some(json!({"scenario": "initialization"}))),
        (Method::POST, "/interview/nothing/message", Some(json!({"text": "hi"}))),
        (Method::GET, "/interview/nothing", None),
        (Method::POST, "/rounds/3/aggregate", None),
    ] {
        let (status, body) = call(&router, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}: {body}");
        assert!(body["error"].is_string());
    }
    // registered but not interviewed
    let (_, body) = call(&router, Method::POST, "/clients", Some(hardware("INT8"))).await;
    let client = body["client_id"].as_str().unwrap();
    let (status, _) = call(&router, Method::GET, &format!("/clients/{client}/profile"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn conflict_responses() {
    let router = app(ServerConfig::default()).unwrap();
    let (status, _) = call(&router, Method::POST, "/rounds/plan", Some(json!({"round": 0}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "no profiled clients");

    let client = onboard(&router).await;
    let (_, sessions) = call(&router, Method::POST, &format!("/clients/{client}/interview"), Some(json!({"scenario": "initialization"}))).await;
    let session = sessions["session_id"].as_str().unwrap().to_string();
    for reply in REPLIES {
        call(&router, Method::POST, &format!("/interview/{session}/message"), Some(json!({"text": reply}))).await;
    }
    let (status, _) =
        call(&router, Method::POST, &format!("/interview/{session}/message"), Some(json!({"text": "more"}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "finished session");

    call(&router, Method::POST, "/rounds/plan", Some(json!({"round": 0}))).await;
    let (status, _) = call(&router, Method::POST, "/rounds/0/aggregate", None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&router, Method::POST, "/rounds/0/aggregate", None).await;
    assert_eq!(status, StatusCode::CONFLICT, "second aggregation");
}

#[tokio::test]
async fn validation_errors_name_the_field() {
    let router = app(ServerConfig::default()).unwrap();

    let mut gap = hardware("FP16");
    gap["available_levels"] = json!(["INT4", "FP16"]);
    let (status, body) = call(&router, Method::POST, "/clients", Some(gap)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "available_levels");

    let mut bad = hardware("INT8");
    bad["power_state"] = json!("solar");
    let (status, body) = call(&router, Method::POST, "/clients", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "power_state");

    let client = onboard(&router).await;
    let (status, body) = call(&router, Method::POST, &format!("/clients/{client}/interview"), Some(json!({"scenario": "chitchat"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "scenario");

    let (_, s) = call(&router, Method::POST, &format!("/clients/{client}/interview"), Some(json!({"scenario": "initialization"}))).await;
    let session = s["session_id"].as_str().unwrap();
    let (status, body) = call(&router, Method::POST, &format!("/interview/{session}/message"), Some(json!({"text": "  "}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "text");

    let record = |client_id: &str, level: &str, accuracy: f64| {
        json!({"client_id": client_id, "round": 0, "level": level,
               "ratings": {"accuracy": accuracy, "energy": 0.5, "latency": 0.5}})
    };
    let uri = format!("/clients/{client}/feedback");
    for (body, field) in [
        (record(&client, "INT8", 1.5), "ratings.accuracy"),
        (record("someone-else", "INT8", 0.5), "client_id"),
        (record(&client, "FP32", 0.5), "level"),
        (record(&client, "INT2", 0.5), "level"),
    ] {
        let (status, reply) = call(&router, Method::POST, &uri, Some(body)).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{reply}");
        assert_eq!(reply["field"], field, "{reply}");
    }
    let (_, m) = call(&router, Method::GET, "/metrics", None).await;
    assert_eq!(m["case_count"], 0);
}

#[tokio::test]
async fn cases_survive_restart_with_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServerConfig {
        data_dir: Some(dir.path().to_path_buf()),
        ..ServerConfig::default()
    };
    let router = app(config.clone()).unwrap();
    let client = onboard(&router).await;
    let record = json!({"client_id": client, "round": 0, "level": "INT8",
                        "ratings": {"accuracy": 0.4, "energy": 0.9, "latency": 0.8}});
    let (status, _) = call(&router, Method::POST, &format!("/clients/{client}/feedback"), Some(record)).await;
    assert_eq!(status, StatusCode::CREATED);
    drop(router);

    let router = app(config).unwrap();
    let (_, m) = call(&router, Method::GET, "/metrics", None).await;
    assert_eq!(m["case_count"], 1);
    assert_eq!(m["client_count"], 0);
}
