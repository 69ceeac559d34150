//! Sequential against parallel execution for the two fan-out workloads:
//! a full policy grid for one jurisdiction, and the cohort table.

use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hivst::calibration::{calibrate_with, CalibratedJurisdiction};
use hivst::io::{load_jurisdictions, RunConfig};
use hivst::par::Execution;
use hivst::scenario::{benefit_risk_table, unit_grid, ScenarioRunner};

fn reference() -> (RunConfig, Vec<CalibratedJurisdiction>) {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let cfg = RunConfig::load(&data.join("reference.toml")).expect("reference config");
    let file = load_jurisdictions(&data.join("reference_jurisdictions.csv")).expect("reference data");
    let settings = cfg.calibration_settings();
    let cohort = file
        .records
        .iter()
        .map(|r| calibrate_with(r, &settings))
        .collect::<Result<Vec<_>, _>>()
        .expect("calibration");
    (cfg, cohort)
}

fn modes() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    if Execution::parallel_available() {
        v.push(("parallel", Execution::Parallel));
    }
    v
}

fn bench_grid(c: &mut Criterion) {
    let (cfg, cohort) = reference();
    let grid = unit_grid(cfg.grid_step).unwrap();
    let runner = ScenarioRunner::new(&cohort[0], cfg.tests, cfg.horizon_months, cfg.step_months).unwrap();
    let mut group = c.benchmark_group("policy_grid");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| runner.sweep(&grid, &grid, &cfg.sweep, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_cohort(c: &mut Criterion) {
    let (cfg, cohort) = reference();
    let options = cfg.cohort_options();
    let mut group = c.benchmark_group("cohort_table");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| benefit_risk_table(&cohort, &cfg.tests, &options, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_grid, bench_cohort);
criterion_main!(benches);
