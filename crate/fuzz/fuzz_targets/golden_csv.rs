#![no_main]

use libfuzzer_sys::fuzz_target;
use mtlab::golden::{diff_csv, parse_csv, Tolerances};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if parse_csv(s).is_ok() {
        let _ = diff_csv(s, s, &Tolerances::default());
    }
});
