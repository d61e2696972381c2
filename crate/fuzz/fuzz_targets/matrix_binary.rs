#![no_main]

use libfuzzer_sys::fuzz_target;
use mtlab_core::io::{decode_matrix, encode_matrix};

fuzz_target!(|data: &[u8]| {
    // Anything that decodes must re-encode to the same bytes.
    if let Ok(m) = decode_matrix(data) {
        assert_eq!(encode_matrix(&m), data);
    }
});
