#![no_main]

use libfuzzer_sys::fuzz_target;
use shrimp_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json(text) {
            let _ = cfg.csv_options();
            let _ = cfg.plan().validate(cfg.simulation.d);
            let _ = cfg.simulation.validate();
        }
    }
});
