#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok((depth, w, h)) = advtex::io::plane::parse_depth(data, Path::new("fuzz.f32")) {
        assert_eq!(depth.len(), w * h);
    }
});
