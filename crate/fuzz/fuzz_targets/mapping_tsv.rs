#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::assembly::MappingTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = MappingTable::read_tsv(data) {
        let mut out = Vec::new();
        t.write_tsv(&mut out).unwrap();
        assert_eq!(MappingTable::read_tsv(out.as_slice()).unwrap(), t);
    }
});
