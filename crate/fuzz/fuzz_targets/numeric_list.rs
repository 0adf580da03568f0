#![no_main]

use gpsvc_cli::io::parse_numeric_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 4096 {
        return;
    }
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(values) = parse_numeric_list(text) {
            // accepted lists never contain NaN
            assert!(values.iter().all(|v| !v.is_nan()));
        }
    }
});
