use std::collections::BTreeSet;

use evidential::oracles::TRACE;

fn test_names() -> BTreeSet<String> {
    let root = env!("CARGO_MANIFEST_DIR");
    let mut names = BTreeSet::new();
    let files = ["tests", "src"].iter().flat_map(|d| std::fs::read_dir(format!("{root}/{d}")).unwrap());
    for entry in files {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        for line in text.lines() {
            let line = line.trim_start();
            if let Some(rest) = line.strip_prefix("fn ") {
                names.insert(rest.split(['(', '<']).next().unwrap().to_string());
            }
        }
    }
    names
}

#[test]
fn every_traced_test_exists() {
    let names = test_names();
    for entry in TRACE {
        assert!(!entry.operations.is_empty() && !entry.tests.is_empty(), "{}", entry.concept);
        for t in entry.tests {
            assert!(names.contains(*t), "trace map names missing test '{t}' for '{}'", entry.concept);
        }
    }
}

#[test]
fn trace_covers_every_ingredient() {
    let concepts: Vec<&str> = TRACE.iter().map(|e| e.concept).collect();
    for needle in [
        "first-order risk",
        "inner loss",
        "outer loss",
        "regularizer",
        "reference",
        "non-injectivity",
        "Dirac collapse",
        "uncertainty budget",
        "entropies",
        "predictive distributions",
        "convexity",
        "expected log-likelihoods",
        "classification protocol",
        "regression protocol",
    ] {
        assert!(concepts.iter().any(|c| c.contains(needle)), "no trace entry for {needle}");
    }
}
