#![no_main]

use admission_core::exact::{decode_table, encode_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = decode_table(data) {
        let bytes = encode_table(&d.values, d.policy.as_ref()).unwrap();
        assert_eq!(bytes, data);
    }
});
