#![no_main]

use libfuzzer_sys::fuzz_target;
use repgraph::sagenet::SageParams;

fuzz_target!(|data: &[u8]| {
    if let Ok((p, seed)) = SageParams::read_json(data) {
        let mut out = Vec::new();
        p.write_json(seed, &mut out).unwrap();
        assert_eq!(SageParams::read_json(out.as_slice()).unwrap().0.n_params(), p.n_params());
    }
});
