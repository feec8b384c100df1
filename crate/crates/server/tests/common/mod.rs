#![allow(dead_code)]

use std::path::PathBuf;

use reqwest::blocking::{Client, Response};
use serde_json::Value;

use ugi_core::ingest::load_map_file;
use ugi_core::kernel::{Engine, EngineConfig};
use ugi_core::kg::{build_kg, KgConfig};
use ugi_core::model::MapBundle;
use ugi_server::{spawn, ServeConfig, ServerHandle, Shared};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn start(bundle: MapBundle, config: EngineConfig, serve: ServeConfig) -> ServerHandle {
    let kg = build_kg(&bundle, None, &KgConfig::default());
    let engine = Engine::from_bundle(bundle, config).unwrap();
    spawn(Shared::new(engine, kg, serve), "127.0.0.1:0".parse().unwrap()).unwrap()
}

pub fn sample_server() -> ServerHandle {
    start(load_map_file(fixture("sample_city.json")).unwrap(), EngineConfig::default(), ServeConfig::default())
}

pub struct Api {
    pub base: String,
    pub http: Client,
}

impl Api {
    pub fn new(server: &ServerHandle) -> Self {
        Self {
            base: server.url(),
            http: Client::new(),
        }
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        decode(self.http.get(format!("{}{path}", self.base)).send().unwrap())
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        decode(self.http.post(format!("{}{path}", self.base)).json(&body).send().unwrap())
    }

    pub fn post_raw(&self, path: &str, body: &str) -> (u16, Value) {
        decode(self.http.post(format!("{}{path}", self.base)).body(body.to_string()).send().unwrap())
    }

    pub fn delete(&self, path: &str) -> (u16, Value) {
        decode(self.http.delete(format!("{}{path}", self.base)).send().unwrap())
    }

    pub fn nl(&self, text: &str) -> String {
        let (code, body) = self.post("/nl", serde_json::json!({ "text": text }));
        assert_eq!(code, 200, "{body}");
        body["text"].as_str().unwrap().to_string()
    }

    pub fn register(&self, name: &str, timeout_s: Option<f64>) -> u64 {
        let (code, body) = self.post("/clients", serde_json::json!({ "name": name, "timeout_s": timeout_s }));
        assert_eq!(code, 200, "{body}");
        body["client_id"].as_u64().unwrap()
    }

    pub fn ack(&self, client: u64, step: u64) -> (u16, Value) {
        self.post(&format!("/clients/{client}/ack"), serde_json::json!({ "step": step }))
    }

    pub fn step(&self) -> u64 {
        self.get("/clock").1["step"].as_u64().unwrap()
    }
}

fn decode(r: Response) -> (u16, Value) {
    let code = r.status().as_u16();
    let text = r.text().unwrap();
    let body = serde_json::from_str(&text).unwrap_or_else(|_| panic!("non-JSON body {code}: {text}"));
    (code, body)
}

/// The two-leg trip sentence and its wire form.
pub const SET_SENTENCE: &str =
    "Set agent with ID 1000 to drive to AOI 500000001 at 09:20, and then walk to AOI 500000010 at 11:00.";
pub const AOI_SENTENCE: &str = "Get AOI with ID 500000000.";
pub const AOI_RESPONSE: &str = "The AOI with ID 500000000 has an area of 26059 square meters, a population of 1219, the land use type is commercial land, contains 51 POIs, and is connected to roads 10, 11 and 23.";
