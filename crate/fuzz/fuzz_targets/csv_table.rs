#![no_main]

use gpsvc_cli::io::read_table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // keep the per-input work bounded
    if data.len() > 1 << 16 {
        return;
    }
    // the CSV reader must reject or accept, never panic
    let _ = read_table(data);
});
