#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok((uv, valid, w, h)) = advtex::io::plane::parse_uv(data, Path::new("fuzz.f32")) {
        assert_eq!(uv.len(), 2 * w * h);
        assert_eq!(valid.len(), w * h);
    }
});
