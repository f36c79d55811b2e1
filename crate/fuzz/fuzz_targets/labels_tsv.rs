#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::io::tsv::{read_labels_tsv, write_labels_tsv};

fuzz_target!(|data: &[u8]| {
    if let Ok(l) = read_labels_tsv(data) {
        let mut out = Vec::new();
        write_labels_tsv("label", &l, &mut out).unwrap();
        assert_eq!(read_labels_tsv(out.as_slice()).unwrap(), l);
    }
});
