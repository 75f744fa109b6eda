#![no_main]

use libfuzzer_sys::fuzz_target;
use preq_core::matrix_json::{to_rows, JsonMatrix};

fuzz_target!(|data: &[u8]| {
    if let Ok(JsonMatrix(m)) = serde_json::from_slice::<JsonMatrix>(data) {
        assert!(m.is_square() && m.nrows() > 0);
        assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        let text = serde_json::to_string(&to_rows(&m)).unwrap();
        let JsonMatrix(back) = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
});
