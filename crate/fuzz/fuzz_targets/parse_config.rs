#![no_main]

use ergodesc::config::{parse_config, preset_of, ExperimentConfig, Preset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(pairs) = parse_config(text) else { return };
    let preset = preset_of(&pairs).ok().flatten().unwrap_or(Preset::Desk);
    if let Ok(c) = ExperimentConfig::from_pairs(preset, &pairs) {
        let _ = c.validate();
    }
});
