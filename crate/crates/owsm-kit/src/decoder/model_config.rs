//! Validated architecture presets, for configuration checking and docs.

/// Encoder/decoder geometry of a supported model configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub hidden_size: u32,
    pub layers: u32,
    pub attention_heads: u32,
    pub time_resolution_ms: u32,
    pub parameters_m: u32,
}

impl ModelConfig {
    /// Named presets: v1 (272M, 20 ms resolution), v2 (712M, 40 ms) and
    /// v3 (889M, 40 ms).
    pub fn preset(name: &str) -> Option<ModelConfig> {
        match name {
            "v1" => Some(ModelConfig {
                hidden_size: 768,
                layers: 12,
                attention_heads: 12,
                time_resolution_ms: 20,
                parameters_m: 272,
            }),
            "v2" => Some(ModelConfig {
                hidden_size: 1024,
                layers: 18,
                attention_heads: 16,
                time_resolution_ms: 40,
                parameters_m: 712,
            }),
            "v3" => Some(ModelConfig {
                hidden_size: 1024,
                layers: 24,
                attention_heads: 16,
                time_resolution_ms: 40,
                parameters_m: 889,
            }),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["v1", "v2", "v3"]
    }

    /// Frame-stacking factor that realizes this preset's time resolution
    /// on top of the 10 ms feature hop.
    pub fn time_reduction_factor(&self) -> usize {
        (self.time_resolution_ms / 10) as usize
    }
}
