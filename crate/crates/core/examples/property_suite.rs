//! The Monte-Carlo property suite on the toy instance: every check with its
//! statistic, bound and margin.

use ssp_lab::harness::{property_suite, PropertyOptions};
use ssp_lab::toy;

fn main() {
    let mdp = toy::three_state();
    let ledger = property_suite(&mdp, &PropertyOptions { samples: 20_000, ..Default::default() });
    for w in &ledger.warnings {
        println!("warning: {w}");
    }
    for c in &ledger.checks {
        println!(
            "{} {:<55} statistic {:>10.4e}  bound {:>10.4e}  margin {:>10.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.statistic,
            c.bound,
            c.margin
        );
    }
}
