//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! Numeric arguments select criteria (`cargo test --test acceptance -- 2 9`);
//! other arguments are ignored. Exits non-zero if anything fails.

use std::process::ExitCode;
use std::time::Instant;

use csph_validation::CRITERIA;

fn main() -> ExitCode {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| picked.is_empty() || picked.contains(&c.number)) {
        let start = Instant::now();
        let mut v = (c.run)();
        let elapsed = start.elapsed();
        if let Some(limit) = c.limit {
            if elapsed > limit {
                v.pass = false;
                v.detail = format!("took {elapsed:.1?}, limit {limit:?}; {}", v.detail);
            }
        }
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}: {} [{elapsed:.2?}] {}", c.number, c.name, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
