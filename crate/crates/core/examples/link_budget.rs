//! Link capacity against distance for one and two MIMO layers.
//!
//! `cargo run --example link_budget`

use iab_planner::channel::{capacity_at_snr, link_snr_db};
use iab_planner::prelude::*;

fn main() -> Result<()> {
    let table = McsTable::nr_256qam();
    let single = RadioParams::default();
    let dual = RadioParams::default().with_mimo_layers(2);

    let top = table.rows().last().expect("table is never empty");
    println!(
        "top MCS {} (Q={}, rate {:.4}): {:.1} Mb/s per layer\n",
        top.mcs_index,
        top.modulation_order,
        top.code_rate,
        link_capacity_mbps(top, &single)
    );

    println!("{:>6} {:>4} {:>9} {:>8} {:>5} {:>10} {:>10}", "d (m)", "LoS", "PL (dB)", "SNR", "MCS", "1 layer", "2 layers");
    for d in [25.0, 50.0, 100.0, 150.0, 200.0, 300.0, 400.0] {
        for los in [true, false] {
            let pl = pathloss_db(d, los, &single)?;
            let snr = link_snr_db(pl, &single);
            let mcs = select_mcs(snr, &table, single.max_bler).map_or("-".to_string(), |m| m.mcs_index.to_string());
            println!(
                "{d:>6.0} {:>4} {pl:>9.2} {snr:>8.2} {mcs:>5} {:>10.1} {:>10.1}",
                if los { "yes" } else { "no" },
                capacity_at_snr(snr, &table, &single),
                capacity_at_snr(snr, &table, &dual),
            );
        }
    }
    Ok(())
}
