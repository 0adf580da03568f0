#![no_main]

use gpsvc::KernelKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(kind) = text.parse::<KernelKind>() {
            // accepted names round-trip
            assert_eq!(kind.name(), text);
        }
    }
});
