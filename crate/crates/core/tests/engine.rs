use proptest::prelude::*;

use swr_core::data::{generate_synthetic, Drift, LoadSeries, SynthConfig};
use swr_core::engine::{run_baseline, run_swr, EngineConfig, HorizonRule, Protocol, TrainWindow};
use swr_core::metrics::mape;
use swr_core::regressors::ModelSpec;

fn noisy_daily(n: usize, noise: f64, seed: u64) -> LoadSeries {
    generate_synthetic(&SynthConfig::daily(n, 500.0, 50.0, noise, seed)).unwrap()
}

fn quick_cfg(model: ModelSpec) -> EngineConfig {
    EngineConfig {
        model,
        train_window: TrainWindow::Fixed(150),
        warmup: Some(300),
        ..EngineConfig::default()
    }
}

#[test]
fn every_index_once_and_batch_mape_recomputes() {
    let s = noisy_daily(1200, 8.0, 3);
    let trace = run_swr(&s, &EngineConfig::default()).unwrap();
    let warmup = EngineConfig::default().resolved_warmup();
    let idx: Vec<usize> = trace.steps.iter().map(|st| st.index).collect();
    assert_eq!(idx, (warmup..1200).collect::<Vec<_>>());
    for b in &trace.batches {
        let members: Vec<_> = trace.steps.iter().filter(|st| st.batch == b.batch).collect();
        assert_eq!(members.len(), b.len);
        assert_eq!(members[0].index, b.start);
        let a: Vec<f64> = members.iter().map(|st| st.actual).collect();
        let p: Vec<f64> = members.iter().map(|st| st.predicted).collect();
        assert!((mape(&a, &p).unwrap() - b.mape_pct).abs() <= 1e-9);
    }
    for st in &trace.steps {
        assert_eq!(st.actual, s.values()[st.index]);
        assert_eq!(st.timestamp, s.timestamp(st.index));
    }
}

#[test]
fn runs_are_bit_identical() {
    let s = noisy_daily(900, 8.0, 5);
    for model in [ModelSpec::svr(12), ModelSpec::forest(12)] {
        let cfg = quick_cfg(model);
        let a = run_swr(&s, &cfg).unwrap();
        let b = run_swr(&s, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps_csv(), b.steps_csv());
    }
}

#[test]
fn sizing_is_recorded() {
    let s = noisy_daily(1000, 0.0, 1);
    let trace = run_swr(&s, &EngineConfig::default()).unwrap();
    let sizing = trace.sizing.as_ref().unwrap();
    assert!(sizing.significant);
    assert_eq!(sizing.window_samples, 288);
    assert!(trace.batches.iter().all(|b| b.window_samples == 288));
    assert!(trace.all_converged());
}

#[test]
fn trace_csv_layout() {
    let s = noisy_daily(400, 0.0, 1);
    let trace = run_swr(&s, &quick_cfg(ModelSpec::Linear)).unwrap();
    let steps = trace.steps_csv();
    let mut lines = steps.lines();
    assert_eq!(lines.next(), Some("index,timestamp,actual_mw,predicted_mw,batch"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "300");
    assert_eq!(first[1], "2017-10-17T01:00:00Z");
    assert_eq!(first[2].parse::<f64>().unwrap(), s.values()[300]);
    assert_eq!(first[4], "0");
    let batches = trace.batches_csv();
    assert!(batches.starts_with("batch,h,window_samples,mape_pct,converged\n0,6,150,"));
    assert_eq!(batches.lines().count(), trace.batches.len() + 1);
}

#[test]
fn train_once_degrades_after_drift_more_than_sliding() {
    let onset = 1200;
    let mut cfg = SynthConfig::daily(2400, 500.0, 100.0, 5.0, 12);
    cfg.drift = Some(Drift { onset_index: onset, level_shift_mw: 150.0, amplitude_scale: 1.0 });
    let s = generate_synthetic(&cfg).unwrap();
    let engine = EngineConfig::default();
    for model in [ModelSpec::svr(12), ModelSpec::tree()] {
        let once = run_baseline(&s, &engine, &model, Protocol::TrainOnce, None).unwrap();
        let sliding = run_baseline(&s, &engine, &model, Protocol::SlidingFixed, None).unwrap();
        let (o, sl) = (once.mape_from(onset).unwrap(), sliding.mape_from(onset).unwrap());
        assert!(sl < o, "{}: sliding {sl} vs train-once {o}", model.name());
    }
}

#[test]
fn baselines_share_the_adaptive_schedule() {
    let s = noisy_daily(800, 10.0, 8);
    let cfg = quick_cfg(ModelSpec::svr(12));
    let swr = run_swr(&s, &cfg).unwrap();
    let sched = swr.schedule();
    let once = run_baseline(&s, &cfg, &ModelSpec::forest(12), Protocol::TrainOnce, Some(&sched)).unwrap();
    assert_eq!(once.schedule(), sched);
    let starts = |t: &swr_core::engine::ForecastTrace| t.batches.iter().map(|b| b.start).collect::<Vec<_>>();
    assert_eq!(starts(&once), starts(&swr));
    assert!(once.batches.iter().all(|b| b.window_samples == 300));
    assert_eq!(once.protocol, "train-once");
    assert_eq!(swr.protocol, "adaptive");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn horizon_trajectory_invariants(seed in 0u64..1000, noise in 0.0f64..60.0, h_min in 1usize..4, span in 0usize..10, lower in 1.0f64..6.0) {
        let s = noisy_daily(700, noise, seed);
        let h_max = h_min + span;
        let cfg = EngineConfig {
            h0: h_min + span / 2,
            horizon: HorizonRule { h_min, h_max, mape_upper: lower + 3.0, mape_lower: lower },
            ..quick_cfg(ModelSpec::Linear)
        };
        let trace = run_swr(&s, &cfg).unwrap();
        let hs: Vec<usize> = trace.batches.iter().map(|b| b.h).collect();
        prop_assert_eq!(hs[0], cfg.h0);
        for w in hs.windows(2) {
            prop_assert!(w[0].abs_diff(w[1]) <= 1);
        }
        prop_assert!(hs.iter().all(|h| (h_min..=h_max).contains(h)));
        for (b, next) in trace.batches.iter().zip(trace.batches.iter().skip(1)) {
            let want = if b.mape_pct > cfg.horizon.mape_upper {
                b.h.saturating_sub(1).max(h_min)
            } else if b.mape_pct < cfg.horizon.mape_lower {
                (b.h + 1).min(h_max)
            } else {
                b.h
            };
            prop_assert_eq!(next.h, want);
            prop_assert!(b.len == b.h);
        }
    }
}
