#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = lingua_atlas::corpus::wav::read_wav_bytes(data);
});
