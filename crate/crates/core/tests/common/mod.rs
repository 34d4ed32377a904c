#![allow(dead_code)]

use csph::CsphModel;
use csph_oracles::construction::Construction;

pub fn construction(m: &CsphModel) -> Construction {
    Construction::new(
        m.alpha().clone(),
        m.t().clone(),
        m.u().clone(),
        m.q1().clone(),
        m.q2().clone(),
        m.a1(),
        m.a2(),
    )
}
