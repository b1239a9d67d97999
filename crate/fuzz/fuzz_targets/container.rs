#![no_main]

use libfuzzer_sys::fuzz_target;
use subsar::io;

fuzz_target!(|data: &[u8]| {
    let Ok(container) = io::parse_container(data) else {
        return;
    };
    match container.kind.as_str() {
        io::KIND_IMAGE => {
            let _ = io::read_image(data);
        }
        io::KIND_REAL_IMAGE => {
            let _ = io::read_real_image(data);
        }
        io::KIND_POSTERIOR => {
            let _ = io::read_posterior(data);
        }
        io::KIND_PHASE_HISTORY => {
            let _ = io::read_phase_history(data);
        }
        _ => {}
    }
});
