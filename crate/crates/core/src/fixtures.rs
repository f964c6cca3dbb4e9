//! Published code matrices for `n_t = 4`, messages 0 to 15, used as golden fixtures.

use crate::codebook::{CodeMatrix, CodebookSpec, Method};

/// gamma = 1/4, ones per row = 1.
pub const N4_QUARTER: [[&str; 4]; 16] = [
    ["0001", "0010", "0100", "1000"],
    ["0001", "0010", "1000", "0100"],
    ["0001", "0100", "0010", "1000"],
    ["0001", "0100", "1000", "0010"],
    ["0001", "1000", "0010", "0100"],
    ["0001", "1000", "0100", "0010"],
    ["0010", "0001", "0100", "1000"],
    ["0010", "0001", "1000", "0100"],
    ["0010", "0100", "0001", "1000"],
    ["0010", "0100", "1000", "0001"],
    ["0010", "1000", "0001", "0100"],
    ["0010", "1000", "0100", "0001"],
    ["0100", "0001", "0010", "1000"],
    ["0100", "0001", "1000", "0010"],
    ["0100", "0010", "0001", "1000"],
    ["0100", "0010", "1000", "0001"],
];

/// gamma = 1/2, ones per row = 2.
pub const N4_HALF: [[&str; 4]; 16] = [
    ["1001", "0011", "0110", "1100"],
    ["1001", "0011", "1100", "0110"],
    ["1001", "0110", "0011", "1100"],
    ["1001", "0110", "1100", "0011"],
    ["1001", "1100", "0011", "0110"],
    ["1001", "1100", "0110", "0011"],
    ["0011", "1001", "0110", "1100"],
    ["0011", "1001", "1100", "0110"],
    ["0011", "0110", "1001", "1100"],
    ["0011", "0110", "1100", "1001"],
    ["0011", "1100", "1001", "0110"],
    ["0011", "1100", "0110", "1001"],
    ["0110", "1001", "0011", "1100"],
    ["0110", "1001", "1100", "0011"],
    ["0110", "0011", "1001", "1100"],
    ["0110", "0011", "1100", "1001"],
];

/// gamma = 3/4, ones per row = 3.
pub const N4_THREE_QUARTERS: [[&str; 4]; 16] = [
    ["1101", "1011", "0111", "1110"],
    ["1101", "1011", "1110", "0111"],
    ["1101", "0111", "1011", "1110"],
    ["1101", "0111", "1110", "1011"],
    ["1101", "1110", "1011", "0111"],
    ["1101", "1110", "0111", "1011"],
    ["1011", "1101", "0111", "1110"],
    ["1011", "1101", "1110", "0111"],
    ["1011", "0111", "1101", "1110"],
    ["1011", "0111", "1110", "1101"],
    ["1011", "1110", "1101", "0111"],
    ["1011", "1110", "0111", "1101"],
    ["0111", "1101", "1011", "1110"],
    ["0111", "1101", "1110", "1011"],
    ["0111", "1011", "1101", "1110"],
    ["0111", "1011", "1110", "1101"],
];

/// The three tables with their ones-per-row count.
pub fn n4_tables() -> [(usize, &'static [[&'static str; 4]; 16]); 3] {
    [(1, &N4_QUARTER), (2, &N4_HALF), (3, &N4_THREE_QUARTERS)]
}

/// `(ones, message)` of every fixture the encoder does not reproduce bit for bit.
pub fn mismatches() -> Vec<(usize, u128)> {
    let mut bad = Vec::new();
    for (ones, table) in n4_tables() {
        let spec = CodebookSpec::new(4, ones, Method::Fill).expect("valid n_t = 4 codebook");
        let produced = spec.codewords().expect("16 codewords");
        for (m, rows) in table.iter().enumerate() {
            if CodeMatrix::from_rows(rows).ok().as_ref() != Some(&produced[m]) {
                bad.push((ones, m as u128));
            }
        }
    }
    bad
}
