#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = repgraph::io::tsv::read_matrix_tsv(data);
});
