//! Bundled Indian social mobility tables (co-resident father/son pairs,
//! 2011-12 employment survey).
//!
//! Occupations: U unskilled, F farming, S skilled/semi-skilled, W white collar.
//! Education: N none, P primary, S secondary, H higher secondary, G graduate+.

use crate::table::ContingencyTable;

const OCCUPATIONS: [&str; 4] = ["U", "F", "S", "W"];
const EDUCATION: [&str; 5] = ["N", "P", "S", "H", "G"];

pub const TABLE5: [[u32; 5]; 4] = [
    [526, 1222, 1707, 307, 102],
    [731, 1911, 5046, 1916, 1224],
    [512, 1664, 3742, 1370, 1017],
    [135, 501, 1686, 1076, 1376],
];

pub const TABLE6: [[u32; 4]; 5] = [
    [655, 579, 572, 98],
    [1544, 1461, 1933, 360],
    [2134, 3996, 4739, 1312],
    [363, 1466, 1749, 1091],
    [100, 778, 1057, 1784],
];

pub const TABLE7: [[u32; 4]; 4] =
    [[2644, 192, 898, 130], [988, 6861, 1917, 1062], [845, 730, 5952, 778], [319, 497, 1283, 2675]];

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 3] = ["table5", "table6", "table7"];

fn build<const C: usize>(rows: &[[u32; C]], row_labels: &[&str], col_labels: &[&str]) -> ContingencyTable {
    ContingencyTable::new_strict(
        row_labels.iter().map(|s| s.to_string()).collect(),
        col_labels.iter().map(|s| s.to_string()).collect(),
        rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect(),
    )
    .expect("bundled fixture is valid")
}

/// Father occupation (rows) by son education (columns).
pub fn table5() -> ContingencyTable {
    build(&TABLE5, &OCCUPATIONS, &EDUCATION)
}

/// Son education (rows) by son occupation (columns).
pub fn table6() -> ContingencyTable {
    build(&TABLE6, &EDUCATION, &OCCUPATIONS)
}

/// Father occupation (rows) by son occupation (columns).
pub fn table7() -> ContingencyTable {
    build(&TABLE7, &OCCUPATIONS, &OCCUPATIONS)
}

pub fn by_name(name: &str) -> Option<ContingencyTable> {
    match name {
        "table5" => Some(table5()),
        "table6" => Some(table6()),
        "table7" => Some(table7()),
        _ => None,
    }
}
