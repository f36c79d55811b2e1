#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::graphfeat::{read_features_tsv, write_features_tsv};

fuzz_target!(|data: &[u8]| {
    if let Ok((x, seq)) = read_features_tsv(data) {
        let mut out = Vec::new();
        write_features_tsv(&x, &seq, &mut out).unwrap();
        let (x2, seq2) = read_features_tsv(out.as_slice()).unwrap();
        assert_eq!(x2.raw, x.raw);
        assert_eq!(seq2, seq);
    }
});
