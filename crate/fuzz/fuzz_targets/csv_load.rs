#![no_main]

use libfuzzer_sys::fuzz_target;
use shrimp_core::dataset::{read_csv, write_csv, CsvOptions, SpecSource};

fuzz_target!(|data: &[u8]| {
    for specs in [SpecSource::AllContinuous, SpecSource::InferBinary] {
        let options = CsvOptions {
            specs,
            ..CsvOptions::default()
        };
        if let Ok(ds) = read_csv(data, &options) {
            // anything accepted must survive a write/read round trip
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf, &options.missing_token).unwrap();
            let again = read_csv(buf.as_slice(), &options).unwrap();
            assert_eq!(again.n_rows(), ds.n_rows());
            assert_eq!(again.missing_counts(), ds.missing_counts());
        }
    }
});
