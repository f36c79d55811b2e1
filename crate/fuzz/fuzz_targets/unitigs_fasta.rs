#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::assembly::unitigs_from_fasta;

fuzz_target!(|data: &[u8]| {
    if let Ok(us) = unitigs_from_fasta(data) {
        for (i, u) in us.iter().enumerate() {
            assert_eq!(u.id, i);
        }
    }
});
