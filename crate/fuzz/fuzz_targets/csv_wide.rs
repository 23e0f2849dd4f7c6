#![no_main]

use libfuzzer_sys::fuzz_target;
use seqexplain::dataset::{parse_csv, write_csv, SchemaSpec};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = parse_csv(data, &SchemaSpec::default()) {
        // Anything accepted must survive a write and re-parse.
        let mut out = Vec::new();
        write_csv(&ds, &mut out).expect("parsed dataset writes");
        let again = parse_csv(out.as_slice(), &SchemaSpec::default()).expect("written dataset parses");
        assert_eq!(again.len(), ds.len());
    }
});
