#![no_main]

use libfuzzer_sys::fuzz_target;
use parc_core::runner::{parse_dataset, Task};

fuzz_target!(|data: &[u8]| {
    for task in [Task::Classification, Task::Summarization] {
        if let Ok(examples) = parse_dataset(data, task) {
            for e in &examples {
                assert!(!e.query.text.is_empty());
                match task {
                    Task::Classification => assert!(e.query.gold_label.is_some()),
                    Task::Summarization => assert!(e.query.reference_summary.is_some()),
                }
            }
        }
    }
});
