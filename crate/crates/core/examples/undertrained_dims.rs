// Usage: cargo run --release --example undertrained_dims
//
// Which RoPE dimensions never complete a cycle within the training length,
// for a few common head sizes and context lengths.

use anyhow::Result;

use fope::posemb::{build_schedule, floor_frequency};
use fope::spectrum::undertrained_dims;

pub fn main() -> Result<()> {
    for (head_dim, theta, len) in [(128, 10000.0, 4096), (128, 500000.0, 8192), (64, 10000.0, 2048), (16, 10000.0, 64)] {
        let dims = undertrained_dims(head_dim, theta, len)?;
        println!(
            "head_dim {head_dim:3}, theta {theta:>8}, L {len:5}: floor {:.2e}, {} of {} frequencies undertrained, dims {dims}",
            floor_frequency(len),
            dims.per_half.len(),
            head_dim / 2
        );
    }

    let s = build_schedule(128, 10000.0, 4096, true)?;
    let cycles = s.cycle_counts();
    println!("cycle counts around the boundary (head_dim 128, L 4096):");
    for m in 40..50 {
        println!("  m = {m}: omega {:.3e}, {:.3} cycles, clipped {}", s.frequencies[m], cycles[m], s.zeroed_mask[m]);
    }
    Ok(())
}
