//! Doc-test bridge for the narrative guide: every chapter of `book/` is
//! included as module documentation here, so `cargo test --doc` compiles
//! and runs the book's code blocks and the guide can never drift from the
//! library.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub mod $name {}
    };
}

chapter!(overview, "../../../book/src/overview.md");
chapter!(units_and_profiles, "../../../book/src/units.md");
chapter!(protocol_and_estimation, "../../../book/src/protocol.md");
chapter!(detector_saturation, "../../../book/src/detector.md");
chapter!(saturation_attack, "../../../book/src/attack.md");
chapter!(key_rates, "../../../book/src/keyrate.md");
chapter!(post_selection, "../../../book/src/countermeasure.md");
chapter!(running_scenarios, "../../../book/src/scenarios.md");
