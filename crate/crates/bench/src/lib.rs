//! Shared fixtures for the benchmarks.

use qpo_core::{DriveSpec, PhysicalParams, Profile, Simulation, TimeGrid};

/// Driven oscillator with the Drude bath and radiation on, on [0, 10] with `n_steps` steps.
pub fn driven(n_steps: usize, snapshots: usize) -> Simulation {
    let p = PhysicalParams { bb_enabled: true, ..Default::default() };
    let d = DriveSpec {
        omega_p2: Profile::Harmonic { amplitude: 0.3, frequency: 2.0, phase: 0.0 },
        e_laser: Profile::Harmonic { amplitude: 0.2, frequency: 0.9, phase: 0.0 },
    };
    Simulation::new(p, d, TimeGrid::with_snapshot_count(10.0, n_steps, snapshots).expect("valid grid"))
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_runs() {
        let tr = super::driven(1000, 2).run().unwrap();
        assert_eq!(tr.states.len(), 2);
    }
}
