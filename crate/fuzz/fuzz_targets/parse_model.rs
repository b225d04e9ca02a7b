#![no_main]

use libfuzzer_sys::fuzz_target;
use stabsens::io::{model_to_json, parse_model};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pj) = parse_model(text) {
        assert_eq!(parse_model(&model_to_json(&pj)).unwrap(), pj);
        let _ = pj.jacobian_at(pj.current());
        let _ = pj.scenario_gen(2, 0);
    }
});
