//! Cox-Ross-Rubinstein American put: the classic benchmark and how the price
//! settles as the tree is refined.

use bcc_lsm::binomial::binomial_european_put;
use bcc_lsm::{binomial_put, BsSetup};

fn main() -> bcc_lsm::Result<()> {
    let base = BsSetup::benchmark();
    println!("{:>6} {:>10} {:>10} {:>10}", "steps", "american", "european", "premium");
    for steps in [25, 50, 125, 250, 500, 1000] {
        let setup = BsSetup { steps, ..base };
        let am = binomial_put(&setup)?;
        let eu = binomial_european_put(&setup)?;
        println!("{steps:>6} {am:>10.5} {eu:>10.5} {:>10.5}", am - eu);
    }
    Ok(())
}
