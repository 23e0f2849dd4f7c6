#![no_main]

use libfuzzer_sys::fuzz_target;
use seqexplain::dataset::{parse_csv, SchemaSpec};

fuzz_target!(|data: &[u8]| {
    let mut spec = SchemaSpec::long("id", "label");
    spec.time_column = Some("t".into());
    let _ = parse_csv(data, &spec);
    let _ = parse_csv(data, &SchemaSpec::long("id", "label"));
});
