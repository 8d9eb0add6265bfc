#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    // must never panic; errors are fine
    if let Ok(mesh) = advtex::io::obj::parse_obj(&text, Path::new("fuzz.obj")) {
        // accepted meshes satisfy their own invariants
        mesh.validate().expect("parser accepted an invalid mesh");
    }
});
