#![no_main]

use libfuzzer_sys::fuzz_target;
use mtlab_core::io::hamiltonian_from_json;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    // Small cap keeps assembly cheap.
    let _ = hamiltonian_from_json(s, 64);
});
