#![no_main]

use libfuzzer_sys::fuzz_target;
use stabsens::io::{parse_system, system_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(sys) = parse_system(text) else { return };
    // Reduction may legitimately fail on a singular D, but must not panic.
    if let Ok(j) = sys.jacobian() {
        if j.iter().all(|v| v.is_finite()) {
            let again = parse_system(&system_to_json(&j)).unwrap();
            assert_eq!(again.jacobian().unwrap(), j);
        }
    }
});
