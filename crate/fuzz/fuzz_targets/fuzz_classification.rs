#![no_main]

use libfuzzer_sys::fuzz_target;
use lingua_atlas::familytree::parse_classification;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(path) = parse_classification(text) {
            // Parsing is idempotent under the canonical join.
            let again = parse_classification(&path.join(", ")).unwrap();
            assert_eq!(again, path);
        }
    }
});
