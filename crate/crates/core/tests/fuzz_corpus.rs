//! Replays the checked-in fuzz seeds through the same entry points as the
//! fuzz targets, so a crashing input added to a corpus fails here too.

use std::fs;
use std::path::{Path, PathBuf};

use tdco_core::config::RunConfig;
use tdco_core::timefn::{parse, Table};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter_map(|p| String::from_utf8(fs::read(&p).unwrap()).ok().map(|s| (p, s)))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn expression_seeds() {
    let mut parsed = 0;
    for (_, text) in seeds("parse_expression") {
        if let Ok(f) = parse(&text) {
            parsed += 1;
            for t in [-1.0, 0.0, 0.5, 2.0] {
                let _ = f.eval(t);
                let _ = f.deriv2(t);
            }
        }
    }
    assert!(parsed > 0);
}

#[test]
fn table_seeds() {
    let mut parsed = 0;
    for (_, text) in seeds("parse_table_csv") {
        if let Ok(table) = Table::from_csv(&text) {
            parsed += 1;
            let (lo, hi) = table.domain();
            assert!(lo < hi);
            for k in 0..=8 {
                let _ = table.jet(lo + (hi - lo) * k as f64 / 8.0);
            }
        }
    }
    assert!(parsed > 0);
}

#[test]
fn run_config_seeds() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (path, text) in seeds("parse_run_config") {
        let cfg = RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        // the seeds are copies of configs/, so their tables resolve there
        cfg.validate(&configs).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
