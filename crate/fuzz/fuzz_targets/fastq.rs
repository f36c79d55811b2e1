#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::io::{parse_fastq, write_fastq_record};

fuzz_target!(|data: &[u8]| {
    if let Ok(recs) = parse_fastq(data) {
        let mut out = Vec::new();
        for r in &recs {
            write_fastq_record(&mut out, &r.id, &r.seq).unwrap();
        }
        assert_eq!(parse_fastq(out.as_slice()).unwrap(), recs);
    }
});
