#![no_main]

use admission_core::model::{Model, ProblemConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ProblemConfig::from_toml_str(text) else {
        return;
    };
    let again = ProblemConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(cfg, again);
    let _ = Model::new(cfg);
});
