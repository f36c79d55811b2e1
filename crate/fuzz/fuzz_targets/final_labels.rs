#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::finetune::FinalLabels;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = FinalLabels::read_tsv(data) {
        let mut out = Vec::new();
        f.write_tsv(&mut out).unwrap();
        assert_eq!(FinalLabels::read_tsv(out.as_slice()).unwrap(), f);
    }
});
