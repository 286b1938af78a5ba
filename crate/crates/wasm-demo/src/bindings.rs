use wasm_bindgen::prelude::*;

use crate::{tag_names, tokenize_view, Demo, DemoConfig};

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

/// `[{"text": .., "shape": ..}, ..]`
#[wasm_bindgen(js_name = tokenize)]
pub fn tokenize_json(text: &str) -> String {
    json(&tokenize_view(text))
}

/// Tag names in distribution column order.
#[wasm_bindgen(js_name = tagNames)]
pub fn tag_names_json() -> String {
    json(&tag_names())
}

#[wasm_bindgen(js_name = Demo)]
pub struct DemoHandle(Demo);

#[wasm_bindgen(js_class = Demo)]
impl DemoHandle {
    /// Trains in the calling thread; blocks the page for a few seconds.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, sentences_per_source: u32) -> Result<DemoHandle, String> {
        let config = DemoConfig {
            seed: seed.into(),
            sentences_per_source: sentences_per_source as usize,
            ..DemoConfig::default()
        };
        Demo::train(&config)
            .map(DemoHandle)
            .map_err(|e| e.to_string())
    }

    #[wasm_bindgen(getter, js_name = trainingSentences)]
    pub fn training_sentences(&self) -> u32 {
        self.0.training_sentences as u32
    }

    /// `[{"text", "hybrid", "crf": [7], "blstm": [7], "greedy"}, ..]`
    pub fn tag(&self, text: &str) -> String {
        json(&self.0.tag(text))
    }
}
