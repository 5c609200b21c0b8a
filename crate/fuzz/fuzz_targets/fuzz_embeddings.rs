#![no_main]

use libfuzzer_sys::fuzz_target;
use lingua_atlas::embed::{embeddings_to_string, parse_embeddings};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = parse_embeddings(text) {
            let canonical = embeddings_to_string(&table);
            let reparsed = parse_embeddings(&canonical).unwrap();
            assert_eq!(embeddings_to_string(&reparsed), canonical);
        }
    }
});
