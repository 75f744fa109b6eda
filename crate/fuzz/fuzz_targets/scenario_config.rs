#![no_main]

use libfuzzer_sys::fuzz_target;
use preq_cli::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ScenarioConfig::from_json(text) {
        // Resolution builds superoperators of size n² × n²; keep inputs small.
        if cfg.dim <= 8 {
            let _ = cfg.resolve();
        }
    }
});
