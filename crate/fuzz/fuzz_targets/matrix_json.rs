#![no_main]

use libfuzzer_sys::fuzz_target;
use mtlab_core::io::{matrix_from_json_str, matrix_to_json_string};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = matrix_from_json_str(s) {
        let back = matrix_from_json_str(&matrix_to_json_string(&m)).expect("round trip");
        assert_eq!(back, m);
    }
});
