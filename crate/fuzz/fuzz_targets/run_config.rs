#![no_main]

use libfuzzer_sys::fuzz_target;
use seqexplain::cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json(text) {
            let _ = cfg.explain_config().validate();
            let _ = cfg.train_config().validate();
            let _ = cfg.gen_config().validate();
        }
    }
});
