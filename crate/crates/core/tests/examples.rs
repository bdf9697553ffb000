//! Runs every example end to end.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[path = $path]
        mod $name;

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(train_dpf, "../examples/train_dpf.rs");
example!(compare_strategies, "../examples/compare_strategies.rs");
example!(convex_theorems, "../examples/convex_theorems.rs");
example!(mask_dynamics, "../examples/mask_dynamics.rs");
example!(compressors, "../examples/compressors.rs");
example!(lottery_ticket, "../examples/lottery_ticket.rs");
example!(structured_pruning, "../examples/structured_pruning.rs");
example!(idx_dataset, "../examples/idx_dataset.rs");
