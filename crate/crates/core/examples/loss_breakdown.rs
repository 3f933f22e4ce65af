//! How the mixing ratio combines branch losses into the logged totals.
//!
//! cargo run --example loss_breakdown

use svs_joint::losses::{compose, Components, LossWeights, LOG_HEADER};
use svs_joint::schedule::MixWeight;

fn main() -> svs_joint::Result<()> {
    let c = Components {
        l_d: 0.12,
        l_ma: 0.9,
        adv_pred: 0.8,
        adv_gt: 0.6,
        f_pred: 0.4,
        f_gt: 0.3,
        m_pred: 1.1,
        m_gt: 0.7,
        d_pred: 0.5,
        d_gt: 0.45,
    };
    let w = LossWeights::default();
    println!("{LOG_HEADER}");
    for (epoch, p) in [0.0, 0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
        let b = compose(MixWeight::new(p, epoch as u32)?, &c, &w)?;
        println!("{}", b.log_line(epoch as u32, 0));
    }
    let half = compose(MixWeight::new(0.5, 0)?, &c, &w)?;
    println!(
        "p = 0.5: L_m_mix {} = ({} + {}) / 2, L_tot {} = L_AM {} + L_v {}",
        half.l_m_mix, c.m_pred, c.m_gt, half.l_tot, half.l_am, half.l_v
    );
    Ok(())
}
