use cvrisk::verify::{run, Suite};

#[test]
fn every_invariant_holds() {
    let results = run(Suite::All, 2024);
    for r in &results {
        println!("{} {} / {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.module, r.name, r.detail);
    }
    assert!(results.iter().all(|r| r.passed));
}
