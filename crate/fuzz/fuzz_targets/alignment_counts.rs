#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::evaluate::TruthLabels;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    if let Ok(t) = TruthLabels::read_alignment_counts(rest, n as usize) {
        assert_eq!(t.len(), n as usize);
    }
});
