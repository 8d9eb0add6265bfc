#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = serde_json::from_slice::<advtex::io::camera_json::CameraFile>(data) {
        if let Ok(cam) = file.into_camera(Path::new("fuzz.json")) {
            cam.validate().expect("loader accepted an invalid camera");
        }
    }
});
