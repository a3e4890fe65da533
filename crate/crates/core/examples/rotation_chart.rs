//! Prints the clusters of one draw and audits inclusion counts and overlaps
//! of the full default design.

use composite::design::{cps_month_mapping, RotationDesign};

fn main() -> composite::Result<()> {
    let design = RotationDesign::default();
    println!("{} draws, {} groups per month", design.draws(), design.groups());
    let a = design.assignment(1)?;
    for m in 1..=3 {
        let labels: Vec<usize> = (1..=design.groups()).map(|g| a.cluster_label(m, g)).collect();
        println!("draw 1 month {m}: cluster labels {labels:?}");
    }
    println!("cluster 14 of draw 506 starts {:?}", &design.cluster(14, 506)?[..3]);
    println!("month 5 (month-in-sample, group): {:?}", cps_month_mapping(5));

    let audit = design.audit(&[1, 12])?;
    println!(
        "inclusions per individual-month: {}..{} (expected {})",
        audit.inclusion_min, audit.inclusion_max, audit.expected_inclusions
    );
    for o in &audit.overlaps {
        println!("lag {:2}: overlap {}..{} (expected {})", o.lag, o.min, o.max, o.expected);
    }
    println!("audit passes: {}", audit.passes());
    Ok(())
}
