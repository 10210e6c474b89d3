mod common;

use common::{gn, rel};
use optiagent::qot;

#[test]
fn closed_forms_match_the_si_oracle_on_1000_draws() {
    let (leff, ase, nli) = common::gn_draw_errors(1000, 0x6e);
    assert!(leff <= 1e-9, "L_eff {leff:e}");
    assert!(ase <= 1e-9, "ASE {ase:e}");
    assert!(nli <= 1e-9, "NLI {nli:e}");
}

#[test]
fn other_seeds_agree_too() {
    for seed in [1, 2, 3] {
        let (a, b, c) = common::gn_draw_errors(300, seed);
        assert!(a.max(b).max(c) <= 1e-9, "seed {seed}");
    }
}

#[test]
fn reference_points() {
    for (i, e) in common::gn_reference_errors().into_iter().enumerate() {
        assert!(e <= 1e-6, "point {i}: {e:e}");
    }
    // The rounded figures as usually quoted.
    let le = qot::effective_length(0.2, 80.0).unwrap().l_eff_km;
    assert!((le - 21.169).abs() < 5e-4);
    let ase = qot::ase_power(&common::amp(20.0, 5.0), 193.4e12, 12.5e9).unwrap();
    assert!(rel(ase, 5.015e-7) < 1e-4);
    let nli = gn::nli_w(0.2, 80.0, -21.27, 1.3, 1e-3, 32e9, 32e9);
    assert!(rel(nli, 2.39e-7) < 5e-3);
}

#[test]
fn oracle_itself_hits_the_frozen_values() {
    let (le, la) = gn::effective_length_km(0.2, 80.0);
    assert!(rel(le, common::REF_L_EFF_KM) < 1e-13);
    assert!(rel(la, 21.714724095162590) < 1e-13);
    assert!(rel(gn::ase_w(20.0, 5.0, 193.4e12, 12.5e9), common::REF_ASE_G20_W) < 1e-13);
    assert!(rel(gn::nli_w(0.2, 80.0, -21.27, 1.3, 1e-3, 32e9, 32e9), common::REF_NLI_1MW_W) < 1e-13);
}
