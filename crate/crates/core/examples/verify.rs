//! Running the invariant suites programmatically.

use ust_core::harness::graphs::random_connected;
use ust_core::harness::verify::{verify, Suite, VerifyConfig};

fn main() -> ust_core::error::Result<()> {
    let g = random_connected(7, 12, 2.0, 4)?;
    let cfg = VerifyConfig { seed: 4, trials: 20_000, ..Default::default() };
    let report = verify(&g, &[Suite::Foster, Suite::Marginals, Suite::Schur, Suite::Voronoi], &cfg)?;
    for s in &report.suites {
        println!("{:<12} {}", s.suite.to_string(), if s.pass { "pass" } else { "FAIL" });
        for c in &s.checks {
            println!("    {:<40} {:>12.4e} vs {:>10.4e}", c.name, c.statistic, c.threshold);
        }
    }
    println!("overall: {}", report.pass);
    Ok(())
}
