#![no_main]

use libfuzzer_sys::fuzz_target;
use nonlin_lab::annulus::SeedSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<SeedSpec>() {
        let rendered = spec.to_string();
        let again: SeedSpec = rendered.parse().expect("rendered seed reparses");
        assert_eq!(again.to_string(), rendered);
    }
});
