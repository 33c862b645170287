#![no_main]

use libfuzzer_sys::fuzz_target;
use tdco_core::timefn::Table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = Table::from_csv(text) else { return };
    let (lo, hi) = table.domain();
    assert!(lo < hi);
    for k in 0..=8 {
        let t = lo + (hi - lo) * k as f64 / 8.0;
        let _ = table.jet(t);
    }
});
