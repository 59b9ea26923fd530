#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::experiment::ExperimentKind;
use resflow::{StepScheme, TargetKind};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(v) = s.parse::<StepScheme>() {
        assert_eq!(v.to_string().parse::<StepScheme>().unwrap(), v);
    }
    if let Ok(v) = s.parse::<TargetKind>() {
        assert_eq!(v.to_string().parse::<TargetKind>().unwrap(), v);
    }
    if let Ok(v) = s.parse::<ExperimentKind>() {
        assert_eq!(v.as_str().parse::<ExperimentKind>().unwrap(), v);
    }
    let _ = resflow::system::by_id(s);
});
