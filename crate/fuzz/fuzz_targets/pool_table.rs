#![no_main]

use libfuzzer_sys::fuzz_target;
use shrimp_cli::pool_table::{pool_groups, read_pool_table, write_pooled};

fuzz_target!(|data: &[u8]| {
    if let Ok(groups) = read_pool_table(data) {
        if let Ok(pooled) = pool_groups(&groups) {
            for (_, p) in &pooled {
                assert!(p.u_bar > 0.0 && p.t_total >= p.u_bar);
                assert!((0.0..=1.0).contains(&p.fmi));
            }
            write_pooled(&pooled, std::io::sink()).unwrap();
        }
    }
});
