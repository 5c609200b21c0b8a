#![no_main]

use libfuzzer_sys::fuzz_target;
use lingua_atlas::corpus::CorpusManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(manifest) = CorpusManifest::parse(text) {
            // Accepted manifests must survive a write/parse cycle.
            let canonical = manifest.to_manifest_string();
            let reparsed = CorpusManifest::parse(&canonical).unwrap();
            assert_eq!(reparsed.to_manifest_string(), canonical);
        }
    }
});
