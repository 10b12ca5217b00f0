use proptest::prelude::*;
use simbench_core::hbridge::{bridge_resolve, BridgeInputs, DriveMode};
use simbench_core::sensing::{bend_to_adc, threshold_press, FlexParams, SenseState};

fn bridge_inputs() -> impl Strategy<Value = BridgeInputs> {
    (any::<bool>(), any::<bool>(), 0.0f64..=1.0, 1.0f64..48.0).prop_map(|(in1, in2, d, vs)| {
        BridgeInputs {
            in1,
            in2,
            ena_duty: d,
            v_supply: vs,
        }
    })
}

proptest! {
    #[test]
    fn bridge_antisymmetry_and_rail(inp in bridge_inputs()) {
        let d = bridge_resolve(&inp);
        let swapped = bridge_resolve(&BridgeInputs { in1: inp.in2, in2: inp.in1, ..inp });
        prop_assert_eq!(d.mode, swapped.mode);
        prop_assert_eq!(d.v_eff, -swapped.v_eff);
        prop_assert!(d.v_eff.abs() <= inp.v_supply);
    }

    #[test]
    fn bridge_monotone_in_duty(inp in bridge_inputs(), other in 0.0f64..=1.0) {
        prop_assume!(inp.in1 != inp.in2);
        let (lo, hi) = if other < inp.ena_duty { (other, inp.ena_duty) } else { (inp.ena_duty, other) };
        let a = bridge_resolve(&BridgeInputs { ena_duty: lo, ..inp });
        let b = bridge_resolve(&BridgeInputs { ena_duty: hi, ..inp });
        prop_assert!(a.v_eff.abs() <= b.v_eff.abs());
    }

    #[test]
    fn adc_monotone_in_bend(b1 in 0.0f64..180.0, b2 in 0.0f64..180.0) {
        let p = FlexParams::default();
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(bend_to_adc(lo, &p).unwrap() <= bend_to_adc(hi, &p).unwrap());
    }

    #[test]
    fn hysteresis_flips_once_per_band_crossing(codes in prop::collection::vec(0u32..1024, 1..300)) {
        let p = FlexParams::default();
        let mut s = SenseState::default();
        // Side of the band last visited: Some(true) above press_on, Some(false) below press_off.
        let mut side: Option<bool> = None;
        let mut crossings = 0;
        let mut flips = 0;
        for adc in codes {
            let next = threshold_press(s, adc, &p);
            if next.pressed != s.pressed {
                flips += 1;
            }
            let now = if adc >= p.press_on { Some(true) } else if adc <= p.press_off { Some(false) } else { None };
            if let Some(now) = now {
                let crossed = match side {
                    Some(prev) => prev != now,
                    None => now, // starting unpressed, first visit above counts
                };
                if crossed {
                    crossings += 1;
                }
                side = Some(now);
            }
            s = next;
        }
        prop_assert_eq!(flips, crossings);
    }
}

#[test]
fn truth_table() {
    let cases = [
        (true, false, 1.0, DriveMode::Drive, 12.0),
        (true, false, 0.5, DriveMode::Drive, 6.0),
        (true, false, 0.0, DriveMode::Coast, 0.0),
        (false, true, 1.0, DriveMode::Drive, -12.0),
        (false, true, 0.5, DriveMode::Drive, -6.0),
        (false, true, 0.0, DriveMode::Coast, 0.0),
        (true, true, 1.0, DriveMode::Brake, 0.0),
        (false, false, 0.5, DriveMode::Brake, 0.0),
    ];
    for (in1, in2, duty, mode, v) in cases {
        let d = bridge_resolve(&BridgeInputs {
            in1,
            in2,
            ena_duty: duty,
            v_supply: 12.0,
        });
        assert_eq!((d.mode, d.v_eff), (mode, v), "{in1} {in2} {duty}");
    }
}
