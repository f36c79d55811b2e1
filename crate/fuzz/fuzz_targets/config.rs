#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = RunConfig::from_kv_text(text) {
        let again = RunConfig::from_kv_text(&c.to_kv_text()).unwrap();
        assert_eq!(again.hash(), c.hash());
    }
});
