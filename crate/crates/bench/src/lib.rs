//! Shared fixtures for the benchmarks.

use himm::eval::Scenario;
use himm::simgen::{emit_physical, generate_hidden, ObservationSequence};
use himm::HimmParams;

/// Demo parameters at 0 dB and a physical observation sequence of `len` slots.
pub fn demo_fixture(len: usize) -> (HimmParams, ObservationSequence) {
    let scenario = Scenario::demo();
    let params = scenario.params().expect("demo scenario is valid");
    let traj = generate_hidden(&params, len, 1).expect("positive length");
    let obs = emit_physical(&scenario.phys, &scenario.d, &traj, 2).expect("demo dimensions agree");
    (params, obs)
}
