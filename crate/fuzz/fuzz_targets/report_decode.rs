#![no_main]

use libfuzzer_sys::fuzz_target;
use nonlin_lab::report::ExperimentReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = ExperimentReport::from_json(text) {
        let again = ExperimentReport::from_json(&report.to_json().expect("encodes")).expect("re-decodes");
        assert_eq!(again, report);
    }
});
