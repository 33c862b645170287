#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use tdco_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_json(text) else { return };
    // table paths resolve against a directory that does not exist
    let base = Path::new("/nonexistent");
    if cfg.validate(base).is_ok() {
        let _ = cfg.build_system(base, None);
    }
});
