#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::unigraph::UnitigGraph;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    if let Ok(g) = UnitigGraph::read_edge_tsv(n as usize, rest) {
        let mut out = Vec::new();
        g.write_edge_tsv(&mut out).unwrap();
        assert_eq!(UnitigGraph::read_edge_tsv(n as usize, out.as_slice()).unwrap(), g);
    }
});
