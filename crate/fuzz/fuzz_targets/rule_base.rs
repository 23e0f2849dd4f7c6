#![no_main]

use libfuzzer_sys::fuzz_target;
use seqexplain::explain::RuleBase;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rules) = RuleBase::from_json(text) {
            RuleBase::from_json(&rules.to_json()).expect("serialized rule base loads");
        }
    }
});
