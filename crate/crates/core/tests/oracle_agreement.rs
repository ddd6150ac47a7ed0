use csit_dmt::dmt;
use csit_dmt::model::{ChannelConfig, ExtReal};
use csit_dmt::oracle::{causal_dmt_oracle, predictive_dmt_oracle, rdt_oracle, RdtCsit, DEFAULT_CAP};
use csit_dmt::rdt;

fn ch(nt: usize, nr: usize, blocks: usize) -> ChannelConfig {
    ChannelConfig::new(nt, nr, blocks).unwrap()
}

#[test]
fn causal_dmt_matches_grid_on_two_by_one() {
    let c = ch(2, 1, 2);
    for r in [0.1, 0.45, 0.9] {
        let lp = dmt::dmt_causal(r, ExtReal::Finite(0.75), 1, &c).unwrap();
        let grid = causal_dmt_oracle(r, 0.75, 1, &c, 0.05, DEFAULT_CAP).unwrap().value().unwrap();
        assert!((lp - grid).abs() <= 0.1, "r={r}: {lp} vs {grid}");
    }
}

#[test]
fn predictive_dmt_matches_grid() {
    let c = ch(1, 3, 2);
    for t in 0..2 {
        for r in [0.3, 0.6] {
            let lp = dmt::dmt_predictive(r, ExtReal::Finite(0.4), t, &c).unwrap().to_f64();
            let grid = predictive_dmt_oracle(r, 0.4, t, &c, 0.05, DEFAULT_CAP).unwrap().value().unwrap();
            assert!((lp - grid).abs() <= 0.1, "t={t} r={r}: {lp} vs {grid}");
        }
    }
}

#[test]
fn causal_rdt_matches_grid_with_two_transmit_antennas() {
    let c = ch(2, 1, 2);
    for rate in [0.5, 1.5, 2.5, 3.5] {
        for delta in [0.5, 1.0] {
            let closed = rdt::rdt_causal(rate, 2, ExtReal::Finite(delta), 1, &c).unwrap();
            let grid = rdt_oracle(rate, 2, delta, RdtCsit::Causal { delay: 1 }, &c, 0.05, DEFAULT_CAP)
                .unwrap()
                .value()
                .unwrap();
            assert!((closed - grid).abs() <= 0.2, "R={rate} delta={delta}: {closed} vs {grid}");
        }
    }
}

#[test]
fn predictive_rdt_closed_form_is_attained_or_exceeds_grid() {
    let c = ch(2, 1, 2);
    for rate in [0.5, 1.5, 2.5, 3.5] {
        for t in 0..2 {
            let closed = rdt::rdt_predictive(rate, 2, ExtReal::Finite(0.5), t, &c).unwrap().to_f64();
            let grid = rdt_oracle(rate, 2, 0.5, RdtCsit::Predictive { horizon: t }, &c, 0.05, DEFAULT_CAP)
                .unwrap()
                .value()
                .unwrap();
            assert!(closed >= grid - 0.2, "R={rate} t={t}: {closed} vs {grid}");
        }
    }
}

#[test]
fn siso_predictive_rdt_exact_without_lookahead() {
    let c = ch(1, 1, 3);
    for rate in [0.4, 1.0, 1.6] {
        for t in 0..3 {
            let closed = rdt::rdt_predictive(rate, 2, ExtReal::Finite(0.5), t, &c).unwrap().to_f64();
            let grid = rdt_oracle(rate, 2, 0.5, RdtCsit::Predictive { horizon: t }, &c, 0.05, DEFAULT_CAP)
                .unwrap()
                .value()
                .unwrap();
            if t == 0 {
                assert!((closed - grid).abs() <= 0.15, "R={rate}: {closed} vs {grid}");
            } else {
                assert!(closed >= grid - 0.15, "R={rate} t={t}: {closed} vs {grid}");
            }
        }
    }
}

#[test]
fn fading_the_last_block_can_beat_the_closed_form() {
    // Two of three blocks must fade; fading blocks 1 and 3 costs 1.5 + 2, while
    // the closed form's choice of blocks 1 and 2 costs 2 + 2.
    let c = ch(1, 1, 3);
    let closed = rdt::rdt_predictive(1.0, 2, ExtReal::Finite(0.5), 1, &c).unwrap();
    let grid = rdt_oracle(1.0, 2, 0.5, RdtCsit::Predictive { horizon: 1 }, &c, 0.5, DEFAULT_CAP).unwrap();
    assert_eq!(closed, ExtReal::Finite(4.0));
    assert_eq!(grid.value(), Some(3.5));
}
