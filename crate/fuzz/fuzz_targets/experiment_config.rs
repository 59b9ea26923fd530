#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for cfg in [ExperimentConfig::from_json(s), ExperimentConfig::from_toml(s)].into_iter().flatten() {
        let text = cfg.to_json().expect("serialize parsed config");
        assert_eq!(ExperimentConfig::from_json(&text).expect("reparse"), cfg);
    }
});
