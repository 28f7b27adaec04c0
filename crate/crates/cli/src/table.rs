//! The comparison grid: every dataset x loss x activation x pairs row, with
//! a baseline cell (Adamax for uniform loss, Adam for L1) and a DCA cell.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use dcrelu::baseline::Optimizer;
use dcrelu::model::write_weights;
use dcrelu::{Activation, Dataset, Norm, Synthetic};
use rayon::prelude::*;

use crate::{train_once, Budget, DataSource, Engine, TableArgs};

/// One row of the table.
#[derive(Debug, Clone)]
pub struct Row {
    pub dataset: String,
    pub norm: Norm,
    pub act: Activation,
    pub pairs: usize,
    pub seed: u64,
}

impl Row {
    pub fn baseline_engine(&self) -> Engine {
        match Optimizer::for_norm(self.norm) {
            Optimizer::Adam => Engine::Adam,
            Optimizer::Adamax => Engine::Adamax,
        }
    }

    fn tag(&self) -> String {
        format!(
            "{}_{}_{}_n{}",
            self.dataset,
            self.norm.label(),
            self.act.label().replace(':', "-"),
            self.pairs
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    /// Time budget exhausted.
    F,
    Err(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Value(v) => format!("{v:?}"),
            Cell::F => "F".into(),
            Cell::Err(_) => "ERR".into(),
        }
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-row seed from the row index and the run seed.
pub fn row_seed(seed: u64, row: usize) -> u64 {
    splitmix64(seed ^ splitmix64(row as u64))
}

/// The 8 rows per dataset, in table order.
pub fn rows_for(datasets: &[String], seed: u64) -> Vec<Row> {
    let mut rows = Vec::new();
    for name in datasets {
        for norm in [Norm::Uniform, Norm::Manhattan] {
            for act in [Activation::Relu, Activation::LeakyRelu { alpha: 0.01 }] {
                for pairs in [1, 2] {
                    let idx = rows.len();
                    rows.push(Row {
                        dataset: name.clone(),
                        norm,
                        act,
                        pairs,
                        seed: row_seed(seed, idx),
                    });
                }
            }
        }
    }
    rows
}

fn run_cell(
    row: &Row,
    engine: Engine,
    data: &Dataset,
    budget: &Budget,
    weights_dir: &Path,
) -> Cell {
    let run = match train_once(data, engine, row.norm, row.act, row.pairs, budget, row.seed) {
        Ok(r) => r,
        Err(e) => {
            log::error!("{} {}: {e:#}", row.tag(), engine.label());
            return Cell::Err(e.to_string());
        }
    };
    if run.timed_out() {
        return Cell::F;
    }
    if run.failed() {
        return Cell::Err("lp failure".into());
    }
    let path = weights_dir.join(format!("{}_{}.txt", row.tag(), engine.label()));
    if let Err(e) = write_weights(&path, &run.weights, row.act) {
        return Cell::Err(e.to_string());
    }
    Cell::Value(run.objective)
}

pub const TABLE_HEADER: &str = "dataset,loss,activation,pairs,nn_engine,nn,dca";

pub struct Table {
    pub rows: Vec<Row>,
    /// `(baseline, dca)` per row.
    pub cells: Vec<(Cell, Cell)>,
    pub text: String,
}

/// Runs every cell and renders the table; cells run on a pool of `jobs`
/// threads but the output order is fixed.
pub fn build_table(
    sources: &[(String, Dataset)],
    budget: &Budget,
    jobs: Option<usize>,
    weights_dir: &Path,
) -> anyhow::Result<Table> {
    let names: Vec<String> = sources.iter().map(|(n, _)| n.clone()).collect();
    let rows = rows_for(&names, budget.seed);
    let tasks: Vec<(usize, Engine)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| [(i, r.baseline_engine()), (i, Engine::Dca)])
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    let cells: Vec<Cell> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, engine)| {
                let row = &rows[i];
                let data = &sources.iter().find(|(n, _)| *n == row.dataset).unwrap().1;
                run_cell(row, engine, data, budget, weights_dir)
            })
            .collect()
    });
    let pairs: Vec<(Cell, Cell)> = cells
        .chunks(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    let mut text = format!("{TABLE_HEADER}\n");
    for (row, (nn, dca)) in rows.iter().zip(&pairs) {
        writeln!(
            text,
            "{},{},{},{},{},{},{}",
            row.dataset,
            row.norm.label(),
            row.act.label(),
            row.pairs,
            row.baseline_engine().label(),
            nn.render(),
            dca.render()
        )
        .unwrap();
    }
    Ok(Table {
        rows,
        cells: pairs,
        text,
    })
}

pub fn cmd_table1(args: &TableArgs) -> anyhow::Result<u8> {
    let mut sources = vec![
        DataSource::Synthetic(Synthetic::Phi1),
        DataSource::Synthetic(Synthetic::Phi2),
    ];
    sources.extend(args.data.iter().cloned());
    let mut loaded = Vec::new();
    for s in &sources {
        let name = s.name();
        if loaded.iter().any(|(n, _): &(String, Dataset)| *n == name) {
            anyhow::bail!("dataset name {name} appears twice");
        }
        loaded.push((name, s.load(args.augment_bias)?));
    }
    let weights_dir = args.out.join("weights");
    fs::create_dir_all(&weights_dir)
        .with_context(|| format!("creating {}", weights_dir.display()))?;
    let text = build_table(&loaded, &args.budget, args.jobs, &weights_dir)?.text;
    let path = args.out.join("table1.csv");
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    print!("{text}");
    Ok(0)
}
