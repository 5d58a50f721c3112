macro_rules! example_test {
    ($module:ident, $test:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example_test!(channel_files, channel_files_runs, "channel_files.rs");
example_test!(capacity_profile, capacity_profile_runs, "capacity_profile.rs");
example_test!(structural_checks, structural_checks_runs, "structural_checks.rs");
example_test!(feedback_capacity, feedback_capacity_runs, "feedback_capacity.rs");
example_test!(simulation_plan, simulation_plan_runs, "simulation_plan.rs");
example_test!(realizability_sweep, realizability_sweep_runs, "realizability_sweep.rs");
