#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::dataset::LearningSetMeta;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(meta) = LearningSetMeta::from_json(s) {
            assert!(meta.dt > 0.0 && meta.pairs > 0 && meta.dim > 0);
        }
    }
});
