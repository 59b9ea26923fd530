#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::rollout::{Trajectory, TrajectorySource};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = Trajectory::read_csv(data, TrajectorySource::Reference) {
        let mut out = Vec::new();
        t.write_csv(&mut out, 1).expect("write parsed trajectory");
        assert_eq!(Trajectory::read_csv(out.as_slice(), TrajectorySource::Reference).expect("reparse"), t);
    }
});
