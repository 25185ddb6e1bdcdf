/// `count / total` with four decimals, rounding half to even. Exact: works
/// on the integers rather than a float.
pub fn ratio_4dp(count: u64, total: u64) -> String {
    assert!(total > 0, "ratio with zero total");
    let scaled = u128::from(count) * 10_000;
    let total = u128::from(total);
    let mut q = scaled / total;
    let twice_rem = 2 * (scaled % total);
    if twice_rem > total || (twice_rem == total && q % 2 == 1) {
        q += 1;
    }
    format!("{}.{:04}", q / 10_000, q % 10_000)
}
