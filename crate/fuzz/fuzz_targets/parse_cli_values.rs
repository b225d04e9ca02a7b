//! The small text formats taken on the command line: number lists,
//! `i,j` entries and JSON state vectors.

#![no_main]

use libfuzzer_sys::fuzz_target;
use stabsens::io::{parse_entry, parse_state, parse_vector};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_vector(text) {
        assert!(!v.is_empty() && v.iter().all(|x| x.is_finite()));
    }
    let _ = parse_entry(text);
    if let Ok(x) = parse_state(text) {
        assert!(x.iter().all(|v| v.is_finite()));
    }
});
