#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::pseudolabel::LabelPartition;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = LabelPartition::read_tsv(data, 25.0) {
        let mut out = Vec::new();
        p.write_tsv(&mut out).unwrap();
        assert_eq!(LabelPartition::read_tsv(out.as_slice(), 25.0).unwrap(), p);
    }
});
