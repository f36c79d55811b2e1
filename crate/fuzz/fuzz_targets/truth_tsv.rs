#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::evaluate::TruthLabels;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = TruthLabels::read_tsv(data) {
        let mut out = Vec::new();
        t.write_tsv(&mut out).unwrap();
        assert_eq!(TruthLabels::read_tsv(out.as_slice()).unwrap(), t);
    }
});
