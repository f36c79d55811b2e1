#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::io::{parse_fasta, write_fasta};

fuzz_target!(|data: &[u8]| {
    if let Ok(recs) = parse_fasta(data) {
        let mut out = Vec::new();
        write_fasta(&mut out, recs.iter().map(|r| (r.id.clone(), r.seq.clone()))).unwrap();
        assert_eq!(parse_fasta(out.as_slice()).unwrap(), recs);
    }
});
