#![no_main]

use libfuzzer_sys::fuzz_target;
use tdco_core::timefn::parse;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(f) = parse(text) else { return };
    // evaluation may fail (domain errors) but must not panic
    for t in [-1.0, 0.0, 0.5, 2.0] {
        let _ = f.eval(t);
        let _ = f.deriv2(t);
    }
    let _ = f.validate(0.0, 1.0);
});
