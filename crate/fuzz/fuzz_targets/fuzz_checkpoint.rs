#![no_main]

use libfuzzer_sys::fuzz_target;
use lingua_atlas::model::{checkpoint_to_bytes, parse_checkpoint_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = parse_checkpoint_bytes(data) {
        // Accepted checkpoints re-serialize and re-parse.
        let bytes = checkpoint_to_bytes(&ckpt);
        parse_checkpoint_bytes(&bytes).unwrap();
    }
});
