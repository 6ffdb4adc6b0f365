//! Generates the CSV tables behind the standard figures: the bequest
//! proportion surface over (age, MCBR, discount rate), the life-cycle
//! present-value profiles over (age, b, gamma), and the analytic bequest
//! density at age 95.
//!
//! Files land in the current directory; the same tables are available from
//! the command-line tool via `tontine figure --figure N --out FILE`.
//!
//! Run with: cargo run --example figure_data

use std::fs::File;

use tontine::figures::{figure1, write_figure_csv, FigureSpec};
use tontine::strategy::AgeGrid;

fn main() -> tontine::Result<()> {
    for id in [1, 2, 6] {
        let spec = FigureSpec::defaults(id)?;
        let name = format!("figure{id}.csv");
        write_figure_csv(&spec, File::create(&name)?)?;
        println!("wrote {name}");
    }

    // A small in-memory slice of the surface table.
    let mut spec = FigureSpec::defaults(1)?;
    spec.ages = AgeGrid::new(65.0, 95.0, 10.0)?;
    spec.mcbr_grid = vec![0.05, 1.0];
    spec.discount_grid = vec![0.02];
    println!();
    println!("bequest proportion, discount rate 0.02");
    println!("{:>5} {:>6} {:>14}", "age", "MCBR", "proportion");
    for row in figure1(&spec)? {
        match row.bequest_proportion {
            Some(value) => println!("{:>5} {:>6} {value:>14.6}", row.age, row.mcbr),
            None => println!("{:>5} {:>6} {:>14} ({})", row.age, row.mcbr, "-", row.note),
        }
    }
    Ok(())
}
