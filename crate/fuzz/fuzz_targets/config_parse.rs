#![no_main]

use libfuzzer_sys::fuzz_target;
use nonlin_lab::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::parse(text) {
        // Anything accepted must survive a round trip unchanged.
        let again = Config::parse(&cfg.to_text()).expect("rendered config reparses");
        assert_eq!(again, cfg);
    }
});
