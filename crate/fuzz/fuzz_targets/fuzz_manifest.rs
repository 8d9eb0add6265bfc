#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // manifest deserialization must never panic; round-trip what parses
    if let Ok(manifest) = serde_json::from_slice::<advtex::io::Manifest>(data) {
        let text = serde_json::to_string(&manifest).expect("reserialize");
        let again: advtex::io::Manifest =
            serde_json::from_str(&text).expect("reparse of serialized manifest");
        assert_eq!(manifest.view_count, again.view_count);
    }
});
