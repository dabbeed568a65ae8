use blockreduce_core::scenario::{coincident_reorg_scenario, fig3_scenario, Scenario, BUILTIN};

fn assert_passes(s: &Scenario) {
    let report = s.run().unwrap();
    for o in report.failures() {
        eprintln!("{} after {} on {}: {}", o.check, o.after, o.replica, o.detail);
    }
    assert!(report.passed(), "{} failed", report.name);
}

#[test]
fn fig3_tips_match() {
    assert_passes(&fig3_scenario());
}

#[test]
fn coincident_reorg_couples_child_to_parent() {
    assert_passes(&coincident_reorg_scenario());
}

#[test]
fn scenarios_are_repeatable() {
    for name in BUILTIN {
        let s = Scenario::builtin(name).unwrap();
        let a = s.run().unwrap();
        let b = s.run().unwrap();
        assert_eq!(a.outcomes, b.outcomes);
    }
}
