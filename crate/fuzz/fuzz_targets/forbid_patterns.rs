//! Fuzzes the comma-separated forbidden-pattern parser: whatever parses
//! must contain only patterns that fit the target scenario.

#![no_main]

use libfuzzer_sys::fuzz_target;
use tsirelson::scenario::parse_pattern_list;
use tsirelson::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if text.len() > 4096 {
        return;
    }
    for (outcomes, settings) in [(2u32, 3u32), (2, 5), (3, 2), (10, 4)] {
        let scenario = Scenario::new(outcomes, settings).unwrap();
        if let Ok(set) = parse_pattern_list(text, &scenario) {
            for pattern in set.iter() {
                assert_eq!(pattern.letters().len(), settings as usize);
                assert!(pattern
                    .letters()
                    .iter()
                    .all(|&l| l >= 1 && u32::from(l) <= outcomes));
            }
        }
    }
});
