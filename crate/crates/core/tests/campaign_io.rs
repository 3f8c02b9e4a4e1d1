use std::fs;

use usp_core::coverage::{evaluate_cell, CampaignResult};
use usp_core::experiments::{preset, Experiment, Scale};
use usp_core::io::{export_results, load_dataset, load_results, ResultsRecord, RunConfig, FIGURE_FILE, RESULTS_CSV, RESULTS_JSON};
use usp_core::sampler::SamplerConfig;

fn tiny(experiment: Experiment, n_sim: usize, grid_points: usize) -> RunConfig {
    let mut c = preset(experiment, Scale::Desk, 3);
    c.n_sim = n_sim;
    c.sampler = SamplerConfig {
        total_iterations: 300,
        burn_in: 100,
        thin: 2,
        ..c.sampler
    };
    if let Some(usp_core::io::GridSpec::B0 { values, .. } | usp_core::io::GridSpec::Divisor { values, .. }) = &mut c.grid {
        values.truncate(grid_points);
    }
    c
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn export_round_trips_exactly() {
    let run = tiny(Experiment::EightSchools, 3, 2).resolve().unwrap();
    let record = ResultsRecord::from_run(&run).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_results(&record, dir.path()).unwrap();
    let loaded = load_results(&dir.path().join(RESULTS_JSON)).unwrap();
    assert_eq!(loaded, record);

    let again = tempfile::tempdir().unwrap();
    export_results(&loaded, again.path()).unwrap();
    for f in [RESULTS_JSON, RESULTS_CSV, FIGURE_FILE] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap(), "{f}");
    }

    let csv = fs::read_to_string(dir.path().join(RESULTS_CSV)).unwrap();
    assert!(csv.starts_with("# config: {"));
    assert!(csv.contains("# master_seed: 3\n"));
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 1 + 12);
    assert!(rows[0].starts_with("prior,delta,shrinkage,generative,rb_1,"));
    // The config line parses back to the original config.
    let cfg_line = csv.lines().next().unwrap().strip_prefix("# config: ").unwrap();
    assert_eq!(RunConfig::from_json(cfg_line).unwrap(), run.config);
}

#[test]
fn empty_results_give_header_only_files() {
    let run = tiny(Experiment::EightSchools, 2, 1).resolve().unwrap();
    let record = ResultsRecord {
        config: run.config.clone(),
        master_seed: 3,
        priors: run.priors.clone(),
        grid: Vec::new(),
        campaign: CampaignResult {
            master_seed: 3,
            cells: Vec::new(),
            failures: Vec::new(),
        },
    };
    let dir = tempfile::tempdir().unwrap();
    export_results(&record, dir.path()).unwrap();
    for f in [RESULTS_CSV, FIGURE_FILE] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(data_lines(&text).len(), 1, "{f}: {text}");
    }
    assert_eq!(load_results(&dir.path().join(RESULTS_JSON)).unwrap(), record);
}

#[test]
fn full_grid_campaigns_fill_every_cell() {
    for experiment in [Experiment::EightSchools, Experiment::Hospital] {
        let run = tiny(experiment, 2, 10).resolve().unwrap();
        let record = ResultsRecord::from_run(&run).unwrap();
        assert!(record.campaign.failures.is_empty());
        let dir = tempfile::tempdir().unwrap();
        export_results(&record, dir.path()).unwrap();

        let csv = fs::read_to_string(dir.path().join(RESULTS_CSV)).unwrap();
        assert_eq!(data_lines(&csv).len(), 1 + 60);
        let fig = fs::read_to_string(dir.path().join(FIGURE_FILE)).unwrap();
        let rows = data_lines(&fig);
        assert_eq!(rows.len(), 1 + 10);
        let shrink: Vec<f64> = rows[1..]
            .iter()
            .map(|r| {
                let cols: Vec<&str> = r.split(',').collect();
                assert_eq!(cols.len(), 7);
                assert!(cols[1..].iter().all(|c| !c.is_empty()));
                cols[0].parse().unwrap()
            })
            .collect();
        assert!(shrink.windows(2).all(|w| w[0] < w[1]), "{shrink:?}");
    }
}

#[test]
fn recorded_seeds_reproduce_cells() {
    let run = tiny(Experiment::Hospital, 3, 3).resolve().unwrap();
    let record = ResultsRecord::from_run(&run).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_results(&record, dir.path()).unwrap();
    let loaded = load_results(&dir.path().join(RESULTS_JSON)).unwrap();
    let dataset = load_dataset(&loaded.config.dataset).unwrap().dataset;
    for cell in &loaded.campaign.cells {
        let meta = &cell.result.metadata;
        let rerun = evaluate_cell(
            &dataset,
            &loaded.priors[cell.prior_index],
            &loaded.grid[cell.grid_index],
            &meta.chain,
            cell.result.level,
            meta.seeds,
        )
        .unwrap();
        assert_eq!(rerun, cell.result);
    }

    let second = ResultsRecord::from_run(&loaded.config.resolve().unwrap()).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    export_results(&second, dir2.path()).unwrap();
    assert_eq!(fs::read(dir.path().join(RESULTS_JSON)).unwrap(), fs::read(dir2.path().join(RESULTS_JSON)).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let mut serial = tiny(Experiment::Hospital, 6, 2);
    serial.parallelism = 1;
    let mut parallel = serial.clone();
    parallel.parallelism = 4;
    let a = ResultsRecord::from_run(&serial.resolve().unwrap()).unwrap();
    let b = ResultsRecord::from_run(&parallel.resolve().unwrap()).unwrap();
    assert_eq!(a.campaign, b.campaign);
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    let mut c = tiny(Experiment::EightSchools, 2, 2);
    // A non-finite β_gen breaks every simulation.
    c.beta_gen = Some(vec![f64::NAN]);
    let run = c.resolve().unwrap();
    let record = ResultsRecord::from_run(&run).unwrap();
    assert!(record.campaign.cells.is_empty());
    assert_eq!(record.campaign.failures.len(), 12);
    assert!(record.campaign.failures[0].message.contains("simulation 0"), "{}", record.campaign.failures[0].message);
}
