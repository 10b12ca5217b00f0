use proptest::prelude::*;
use simbench_core::encoder::DecoderState;
use simbench_core::firmware::{firmware_tick, FirmwareConfig, FirmwareState, Mode};
use simbench_core::{Command, SimConfig, Simulation};

proptest! {
    #[test]
    fn duty_bounded_and_idle_safe(
        ticks in prop::collection::vec((0u32..1024, -200i64..200), 1..500),
        setpoint in -80.0f64..80.0,
        integ in -1.0f64..1.0,
    ) {
        let cfg = FirmwareConfig::default();
        let mut fw = FirmwareState::new(&cfg, setpoint);
        fw.integ = integ;
        let mut dec = DecoderState::default();
        for (adc, counts) in ticks {
            dec.total_counts += counts;
            let (next, pins) = firmware_tick(fw, adc, &dec, &cfg, cfg.tick_dt());
            prop_assert!((0.0..=1.0).contains(&pins.ena_duty));
            prop_assert!(next.integ.abs() <= cfg.gains.u_max - cfg.gains.u_min);
            if next.mode == Mode::Idle {
                prop_assert_eq!(pins.ena_duty, 0.0);
            }
            fw = next;
        }
    }

    #[test]
    fn direction_pins_follow_setpoint_sign(setpoint in prop_oneof![-80.0f64..-0.1, 0.1f64..80.0]) {
        let cfg = FirmwareConfig::default();
        let (_, pins) = firmware_tick(FirmwareState::new(&cfg, setpoint), 700, &DecoderState::default(), &cfg, 1e-3);
        prop_assert_eq!(pins.in1, setpoint > 0.0);
        prop_assert_eq!(pins.in2, setpoint < 0.0);
    }
}

fn run_until(sim: &mut Simulation, t: f64, mut each: impl FnMut(&Simulation)) {
    let end = (t / sim.dt()).round() as u64;
    while sim.step_index() < end {
        sim.sync();
        each(sim);
        sim.integrate().unwrap();
    }
    sim.sync();
}

#[test]
fn press_release_cycle() {
    let mut sim = Simulation::new(SimConfig::default()).unwrap();
    run_until(&mut sim, 0.5, |s| assert_eq!(s.firmware().rpm_est, 0.0));
    sim.apply(&Command::Press { bend: 45.0 });
    run_until(&mut sim, 0.6, |_| {});
    run_until(&mut sim, 2.5, |s| assert!(s.firmware().rpm_est > 0.0));
    sim.apply(&Command::Release);
    // Spin-down: once the tachometer window has cleared the drive interval,
    // the estimate only falls.
    run_until(&mut sim, 2.6, |_| {});
    let mut last = sim.firmware().rpm_est;
    run_until(&mut sim, 6.0, |s| {
        assert_eq!(s.firmware().pins.ena_duty, 0.0);
        let now = s.firmware().rpm_est;
        assert!(now <= last + 0.08, "{now} > {last}");
        last = last.min(now);
    });
    assert!(sim.firmware().rpm_est < 5.0, "{}", sim.firmware().rpm_est);
}

#[test]
fn regulates_reverse_setpoint() {
    // Extend first: at the lower stop a reverse drive cannot move the shaft.
    let mut sim = Simulation::new(SimConfig::default()).unwrap();
    sim.apply(&Command::Press { bend: 60.0 });
    run_until(&mut sim, 2.0, |_| {});
    sim.apply(&Command::SetRpm { rpm: -40.0 });
    run_until(&mut sim, 3.5, |_| {});
    assert!(sim.plant().pos > 0.0);
    let rpm = sim.firmware().rpm_est;
    assert!((rpm + 40.0).abs() <= 0.8, "{rpm}");
    assert!(sim.snapshot().direction() == "CCW");
}
