//! Fuzzes the trial-log CSV parser: arbitrary bytes must either fail with a
//! line-numbered error or yield records that round-trip through the writer.

#![no_main]

use libfuzzer_sys::fuzz_target;
use tsirelson::shellgame::{parse_trial_log, write_trial_log};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if text.len() > 1 << 16 {
        return;
    }
    let Ok(records) = parse_trial_log(text) else {
        return;
    };
    let mut buf = Vec::new();
    write_trial_log(&records, &mut buf).expect("writing parsed records");
    let again = parse_trial_log(std::str::from_utf8(&buf).expect("writer emits utf-8"))
        .expect("written log reparses");
    assert_eq!(records, again, "round trip changed the log");
});
