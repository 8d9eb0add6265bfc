#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(tensors) = advtex::io::tensorfile::parse_tensors(data, Path::new("fuzz.attn")) {
        for (shape, values) in &tensors {
            assert_eq!(shape.iter().product::<usize>(), values.len());
        }
    }
});
