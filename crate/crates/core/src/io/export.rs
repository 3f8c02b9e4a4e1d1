use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coverage::{evaluate_cell, in_pool, run_campaign, CampaignCell, CampaignResult, CellSeeds, CoverageResult, GenerativeConfig};
use crate::error::{Error, Result};
use crate::io::config::{ResolvedRun, RunConfig};
use crate::priors::PriorSpec;

pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const FIGURE_FILE: &str = "figure_coverage.csv";
pub const COMPONENT_FIGURE_FILE: &str = "figure_component_coverage.csv";

/// Everything needed to interpret or rerun a campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsRecord {
    pub config: RunConfig,
    pub master_seed: u64,
    pub priors: Vec<PriorSpec>,
    pub grid: Vec<GenerativeConfig>,
    pub campaign: CampaignResult,
}

impl ResultsRecord {
    /// Runs every cell of a resolved config.
    pub fn from_run(run: &ResolvedRun) -> Result<Self> {
        let c = &run.config;
        let campaign = run_campaign(&run.dataset, &run.priors, &run.grid, &c.sampler, c.level, c.master_seed, c.parallelism)?;
        Ok(ResultsRecord {
            config: c.clone(),
            master_seed: c.master_seed,
            priors: run.priors.clone(),
            grid: run.grid.clone(),
            campaign,
        })
    }

    /// Like [`from_run`](Self::from_run) for a single cell, but a failing
    /// cell is returned as the error instead of being recorded.
    pub fn from_single_cell(run: &ResolvedRun) -> Result<Self> {
        let c = &run.config;
        let (prior, gen) = match (run.priors.as_slice(), run.grid.as_slice()) {
            ([prior], [gen]) => (prior, gen),
            _ => return Err(Error::Config("expected exactly one prior and one grid point".into())),
        };
        let seeds = CellSeeds::derive(c.master_seed, 0, 0);
        let result = in_pool(c.parallelism, || evaluate_cell(&run.dataset, prior, gen, &c.sampler, c.level, seeds))??;
        Ok(ResultsRecord {
            config: c.clone(),
            master_seed: c.master_seed,
            priors: run.priors.clone(),
            grid: run.grid.clone(),
            campaign: CampaignResult {
                master_seed: c.master_seed,
                cells: vec![CampaignCell {
                    prior_index: 0,
                    grid_index: 0,
                    result,
                }],
                failures: Vec::new(),
            },
        })
    }
}

fn header_lines(record: &ResultsRecord) -> String {
    format!(
        "# config: {}\n# master_seed: {}\n",
        record.config.to_json(),
        record.master_seed
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, preamble: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
    let mut buf = preamble.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Writes `results.json`, `results.csv` and the figure CSV into `out_dir`.
/// CSV files start with `#` comment lines holding the config and seed.
pub fn export_results(record: &ResultsRecord, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let preamble = header_lines(record);
    let cells = &record.campaign.cells;

    let json_path = out_dir.join(RESULTS_JSON);
    fs::write(&json_path, serde_json::to_string_pretty(record)?)?;

    let k = cells.first().map(|c| c.result.per_group_rb.len()).unwrap_or(0);
    let mut header: Vec<String> = ["prior", "delta", "shrinkage", "generative"].map(String::from).to_vec();
    header.extend((1..=k).map(|j| format!("rb_{j}")));
    header.extend(["overall_rb", "overall_se", "overall_component_rb", "overall_component_se"].map(String::from));
    let rows = cells
        .iter()
        .map(|c| {
            let delta = record.config.priors.get(c.prior_index).and_then(|r| r.delta());
            let mut row = vec![
                c.result.metadata.prior.clone(),
                opt(delta),
                opt(c.result.metadata.shrinkage),
                c.result.metadata.generative.clone(),
            ];
            row.extend(c.result.per_group_rb.iter().map(f64::to_string));
            row.push(c.result.overall_rb.to_string());
            row.push(c.result.overall_rb_se().to_string());
            row.push(c.result.overall_component_rb.to_string());
            row.push(c.result.overall_component_rb_se().to_string());
            row
        })
        .collect();
    let csv_path = out_dir.join(RESULTS_CSV);
    write_csv(&csv_path, &preamble, header, rows)?;

    let mut written = vec![json_path, csv_path];
    for (name, pick) in [
        (FIGURE_FILE, (|r: &CoverageResult| r.overall_rb) as fn(&CoverageResult) -> f64),
        (COMPONENT_FIGURE_FILE, |r: &CoverageResult| r.overall_component_rb),
    ] {
        let path = out_dir.join(name);
        write_figure(record, &path, &preamble, pick)?;
        written.push(path);
    }
    Ok(written)
}

/// One row per grid point ordered by shrinkage, one column per prior.
fn write_figure(record: &ResultsRecord, path: &Path, preamble: &str, pick: fn(&CoverageResult) -> f64) -> Result<()> {
    let mut order: Vec<usize> = (0..record.grid.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |i: usize| record.grid[i].shrinkage.unwrap_or(i as f64);
        key(a).total_cmp(&key(b))
    });
    let mut header = vec!["shrinkage".to_string()];
    header.extend(record.priors.iter().map(|p| p.description.clone()));
    let rows = order
        .iter()
        .map(|&gi| {
            let mut row = vec![opt(record.grid[gi].shrinkage)];
            row.extend((0..record.priors.len()).map(|pi| opt(record.campaign.cell(pi, gi).map(pick))));
            row
        })
        .collect();
    write_csv(path, preamble, header, rows)
}

pub fn load_results(path: &Path) -> Result<ResultsRecord> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
