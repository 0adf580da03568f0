#![no_main]

use gpsvc_cli::io::FitDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 16 {
        return;
    }
    if let Ok(doc) = FitDocument::from_json(data) {
        // a parsed document must survive re-serialization and yield either
        // a coherent training set or a clean error
        let _ = doc.training_data();
        let _ = doc.estimates.to_params();
    }
});
