#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::forest::ForestModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = ForestModel::read_json(data) {
        let mut out = Vec::new();
        f.write_json(&mut out).unwrap();
        assert_eq!(ForestModel::read_json(out.as_slice()).unwrap(), f);
    }
});
