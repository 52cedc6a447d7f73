//! American put with S0 = 36, K = 40, sigma = 20%, r = 6%, one year: the
//! binomial reference against LSM with each continuation regressor on one
//! shared 25,000-path grid.

fn main() -> bcc_lsm::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok());
    let rows = bcc_lsm::commands::cmd_benchmark(seed, None, &mut std::io::stdout())?;
    let reference = rows[0].price;
    for row in &rows[1..] {
        println!("{:<14} differs from the tree by {:+.4}", row.method, row.price - reference);
    }
    Ok(())
}
