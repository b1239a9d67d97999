#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(ph) = subsar::io::read_phase_history(data) else {
        return;
    };
    let mut buf = Vec::new();
    subsar::io::write_phase_history(&mut buf, &ph).expect("accepted input must serialize");
    let again = subsar::io::read_phase_history(&buf).expect("written file must parse");
    assert_eq!(again.pulses(), ph.pulses());
    assert_eq!(again.samples_per_pulse(), ph.samples_per_pulse());
});
