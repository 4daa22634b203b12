//! Browser bindings for the relfuse demo page.
//!
//! Each exported function has a plain Rust counterpart in [`demo`] so the
//! logic is testable without a JavaScript host.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Weight map of `family` (e.g. `"gaussian"`) as a row-major `height * width` array.
#[wasm_bindgen(js_name = weightMap)]
pub fn weight_map(
    family: &str,
    beta: f64,
    height: usize,
    width: usize,
    anchor_x: f64,
    anchor_y: f64,
) -> Result<Vec<f64>, JsError> {
    demo::weight_map(family, beta, height, width, [anchor_x, anchor_y]).map_err(|e| JsError::new(&e))
}

/// Decodes a synthetic noisy relation map with every weight family; returns JSON.
#[wasm_bindgen(js_name = decodeNoisyMap)]
pub fn decode_noisy_map(
    beta: f64,
    size: usize,
    anchor_x: f64,
    anchor_y: f64,
    noise_growth: f64,
    seed: u64,
) -> Result<String, JsError> {
    to_js(demo::decode_noisy_map(&demo::DecodeParams { beta, size, anchor: [anchor_x, anchor_y], noise_growth, seed }))
}

/// Synthesizes a sequence, tracks it with every preset and returns JSON curves.
#[wasm_bindgen(js_name = trackDemo)]
pub fn track_demo(
    joints: &str,
    frames: usize,
    sigma_single: f64,
    sigma_relation: f64,
    alpha: f64,
    gamma: f64,
    seed: u64,
) -> Result<String, JsError> {
    to_js(demo::track_demo(&demo::TrackParams {
        joints: joints.into(),
        frames,
        sigma_single,
        sigma_relation,
        alpha,
        gamma,
        seed,
    }))
}
