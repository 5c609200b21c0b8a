//! Minimal stderr logging, gated by the ATLAS_LOG environment variable
//! (error | info | debug; default info).

use std::sync::atomic::{AtomicU8, Ordering};

const ERROR: u8 = 0;
const INFO: u8 = 1;
const DEBUG: u8 = 2;

static LEVEL: AtomicU8 = AtomicU8::new(INFO);

pub fn init_from_env() {
    let level = match std::env::var("ATLAS_LOG").as_deref() {
        Ok("error") => ERROR,
        Ok("debug") => DEBUG,
        _ => INFO,
    };
    LEVEL.store(level, Ordering::Relaxed);
}

pub fn info(msg: impl AsRef<str>) {
    if LEVEL.load(Ordering::Relaxed) >= INFO {
        eprintln!("[atlas] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if LEVEL.load(Ordering::Relaxed) >= DEBUG {
        eprintln!("[atlas:debug] {}", msg.as_ref());
    }
}
