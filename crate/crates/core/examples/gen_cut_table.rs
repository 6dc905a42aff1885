//! Regenerate `data/cut_rules.json`.
//!
//! cargo run --release --example gen_cut_table -- [output-path]

use std::path::PathBuf;
use std::time::Instant;

use polykf::sigma::{solve_cut_rule, CutTable, SolverOptions};

const COVERAGE: [(usize, usize); 3] = [(4, 12), (6, 12), (8, 8)];

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let only: Option<usize> = args
        .iter()
        .position(|a| a == "--order")
        .and_then(|i| args.get(i + 1))
        .and_then(|v| v.parse().ok());
    let out = args
        .first()
        .filter(|a| !a.starts_with("--"))
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data/cut_rules.json")));
    let mut table = CutTable::load(&out).unwrap_or_default();
    let opts = SolverOptions::default();
    for (order, max_dim) in COVERAGE {
        if only.is_some_and(|o| o != order) {
            continue;
        }
        for n in 1..=max_dim {
            let start = Instant::now();
            match solve_cut_rule(n, order, &opts) {
                Ok(rule) => {
                    let min_w = rule.families.iter().map(|f| f.weight).fold(f64::INFINITY, f64::min);
                    println!(
                        "CUT{order} n={n:2}: {:5} points, residual {:.2e}, min weight {:+.3e}, {:?} ({:.1?})",
                        rule.point_count(),
                        rule.residual,
                        min_w,
                        rule.families.iter().map(|f| f.pattern).collect::<Vec<_>>(),
                        start.elapsed()
                    );
                    table.insert(rule);
                }
                Err(e) => println!("CUT{order} n={n:2}: no rule ({e})"),
            }
        }
    }
    table.save(&out).expect("write table");
    println!("wrote {}", out.display());
}
