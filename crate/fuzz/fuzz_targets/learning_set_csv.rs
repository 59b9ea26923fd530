#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::dataset::{LearningSet, LearningSetMeta};
use resflow::{StepScheme, TargetKind};

// First byte picks the state dimension; the rest is the CSV body.
fuzz_target!(|data: &[u8]| {
    let Some((&d, body)) = data.split_first() else { return };
    let meta = LearningSetMeta {
        system_id: "fuzz".into(),
        scheme: TargetKind::Scheme(StepScheme::Rk4),
        dt: 0.1,
        seed: 0,
        pairs: 1,
        dim: 1 + (d % 4) as usize,
    };
    if let Ok(set) = LearningSet::read_csv(body, &meta) {
        let mut out = Vec::new();
        set.write_csv(&mut out).expect("write parsed set");
        let again = LearningSet::read_csv(out.as_slice(), &meta).expect("reparse");
        assert_eq!(again.pairs.len(), set.pairs.len());
    }
});
