#![no_main]

use admission_core::adp::{decode_checkpoint, encode_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = decode_checkpoint(data) {
        assert_eq!(encode_checkpoint(&ck), data);
    }
});
