#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::assembly::{import_sam, UnitigRecord};
use repgraph::io::parse_sam;

fuzz_target!(|data: &[u8]| {
    let _ = parse_sam(data);
    let unitigs: Vec<UnitigRecord> = (0..3)
        .map(|id| UnitigRecord {
            id,
            name: format!("u{id}"),
            sequence: b"ACGTACGTAC".to_vec(),
            mean_coverage: 0.0,
        })
        .collect();
    if let Ok(t) = import_sam(&unitigs, data) {
        assert_eq!(t.depth_bases.len(), 3);
    }
});
