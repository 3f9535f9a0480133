//! Fuzzes the scenario JSON decoder: arbitrary bytes must either be
//! rejected with an error or produce a scenario that survives a serialize /
//! reparse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;
use tsirelson::scenario::{enumerate_constrained_vertices, ConstrainedScenario};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if text.len() > 4096 {
        return;
    }
    let Ok(parsed) = ConstrainedScenario::from_json_str(text) else {
        return;
    };
    let again = ConstrainedScenario::from_json_str(&parsed.to_json_string())
        .expect("serialized scenario reparses");
    assert_eq!(parsed, again, "round trip changed the scenario");

    // Anything that parsed must also enumerate cleanly when small enough.
    let scenario = parsed.scenario();
    if scenario.reduced_dimension() <= 4 && parsed.constraints().len() <= 16 {
        let _ = enumerate_constrained_vertices(scenario, parsed.constraints());
    }
});
