#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::NetParams;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = NetParams::from_json(s) {
        let text = p.to_json().expect("serialize parsed params");
        assert_eq!(NetParams::from_json(&text).expect("reparse"), p);
    }
});
