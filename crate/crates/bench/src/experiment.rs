//! Strategy comparisons and parameter sweeps over a prompt set.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use dyndepth_core::{
    decode_speculative, decode_vanilla, make_toy_pair, modeled_speedup, DecodeMetrics,
    LanguageModel, TokenId,
};

use crate::config::{parse_list, ExperimentConfig, StrategyKind};
use crate::prompts::load_prompts;
use crate::table::Table;

/// Aggregate over all prompts for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyRow {
    pub strategy: StrategyKind,
    pub prompts: usize,
    pub metrics: DecodeMetrics,
    pub modeled_speedup: f64,
    pub lossless_passes: usize,
}

impl StrategyRow {
    pub fn all_lossless(&self) -> bool {
        self.lossless_passes == self.prompts
    }

    fn depth_distribution(&self) -> String {
        self.metrics
            .depth_histogram
            .iter()
            .map(|(d, c)| format!("{d}:{c}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn cells(&self, timing: bool) -> Vec<String> {
        let m = &self.metrics;
        let mut cells = vec![
            self.strategy.to_string(),
            self.prompts.to_string(),
            m.tokens_generated.to_string(),
            m.target_calls.to_string(),
            m.draft_calls.to_string(),
            m.heuristic_checks.to_string(),
            m.sync_breaks.to_string(),
            format!("{:.4}", m.tokens_per_target_call()),
            format!("{:.4}", m.mean_depth()),
            format!("{:.4}", m.mean_accepted()),
            format!("{:.4}", self.modeled_speedup),
            format!("{}/{}", self.lossless_passes, self.prompts),
            self.depth_distribution(),
        ];
        if timing {
            let ms = if m.target_calls == 0 {
                0.0
            } else {
                1e3 * m.wall_time / m.target_calls as f64
            };
            cells.push(format!("{ms:.4}"));
        }
        cells
    }
}

/// Columns shared by the `run` report and the `sweep` table, in order.
pub const METRIC_COLUMNS: [&str; 13] = [
    "strategy",
    "prompts",
    "tokens_generated",
    "target_calls",
    "draft_calls",
    "heuristic_checks",
    "sync_breaks",
    "tokens_per_call",
    "mean_depth",
    "mean_accepted",
    "modeled_speedup",
    "lossless",
    "depth_histogram",
];

pub const TIMING_COLUMN: &str = "ms_per_target_call";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LosslessCheck {
    pub strategy: StrategyKind,
    pub prompt: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<StrategyRow>,
    pub checks: Vec<LosslessCheck>,
}

impl ExperimentReport {
    pub fn all_lossless(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LosslessCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn table(&self, timing: bool) -> Table {
        let mut t = Table::new(METRIC_COLUMNS);
        if timing {
            t.headers.push(TIMING_COLUMN.into());
        }
        for row in &self.rows {
            t.push(row.cells(timing));
        }
        t
    }
}

/// Decodes every prompt with one strategy and compares with vanilla output.
fn run_strategy<M: LanguageModel>(
    config: &ExperimentConfig,
    kind: StrategyKind,
    target: &M,
    draft: &M,
    prompts: &[Vec<TokenId>],
    vanilla: &[Vec<TokenId>],
) -> Result<(StrategyRow, Vec<LosslessCheck>)> {
    let strategy = config.strategy(kind);
    let runs: Vec<(bool, DecodeMetrics)> = prompts
        .par_iter()
        .zip(vanilla)
        .map(|(prompt, expected)| {
            let (out, metrics) =
                decode_speculative(target, draft, &strategy, prompt, config.num_tokens)?;
            Ok((&out == expected, metrics))
        })
        .collect::<Result<_>>()
        .with_context(|| format!("strategy {kind} failed"))?;

    let mut total = DecodeMetrics::default();
    let mut checks = Vec::with_capacity(runs.len());
    for (i, (pass, metrics)) in runs.iter().enumerate() {
        total.merge(metrics);
        checks.push(LosslessCheck {
            strategy: kind,
            prompt: i,
            pass: *pass,
        });
    }
    let speedup = modeled_speedup(&total, &config.cost_model(), total.tokens_generated)?;
    let row = StrategyRow {
        strategy: kind,
        prompts: prompts.len(),
        metrics: total,
        modeled_speedup: speedup,
        lossless_passes: checks.iter().filter(|c| c.pass).count(),
    };
    Ok((row, checks))
}

fn vanilla_outputs<M: LanguageModel>(
    target: &M,
    prompts: &[Vec<TokenId>],
    num_tokens: usize,
) -> Result<Vec<Vec<TokenId>>> {
    prompts
        .par_iter()
        .map(|p| Ok(decode_vanilla(target, p, num_tokens)?.0))
        .collect()
}

fn run_with_prompts(
    config: &ExperimentConfig,
    prompts: &[Vec<TokenId>],
    vanilla: Option<&[Vec<TokenId>]>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let (target, draft) = make_toy_pair(&config.model_spec())?;
    let owned;
    let vanilla = match vanilla {
        Some(v) => v,
        None => {
            owned = vanilla_outputs(&target, prompts, config.num_tokens)?;
            &owned
        }
    };
    let mut report = ExperimentReport {
        rows: Vec::new(),
        checks: Vec::new(),
    };
    for &kind in &config.strategies {
        let (row, checks) = run_strategy(config, kind, &target, &draft, prompts, vanilla)?;
        report.rows.push(row);
        report.checks.extend(checks);
    }
    Ok(report)
}

/// Runs every configured strategy over every prompt. Rows follow the
/// configured strategy order regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let prompts = load_prompts(config)?;
    run_with_prompts(config, &prompts, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// DDD continuation threshold x
    Threshold,
    /// Beam width w
    Width,
    /// DDD max steps n, or EAGLE-2/static depth when sweeping those
    Depth,
    /// DDD check-step schedule S
    Schedule,
    /// Draft noise of the model pair
    Noise,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Threshold => "threshold",
            SweepParam::Width => "width",
            SweepParam::Depth => "depth",
            SweepParam::Schedule => "schedule",
            SweepParam::Noise => "noise",
        }
    }

    /// Strategy swept when none is named.
    pub fn default_strategy(self) -> StrategyKind {
        match self {
            SweepParam::Width => StrategyKind::Eagle2,
            _ => StrategyKind::Ddd,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridValue {
    Real(f64),
    Count(usize),
    Steps(BTreeSet<usize>),
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Real(v) => write!(f, "{v}"),
            GridValue::Count(v) => write!(f, "{v}"),
            GridValue::Steps(s) if s.is_empty() => f.write_str("none"),
            GridValue::Steps(s) => {
                let items: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                f.write_str(&items.join(","))
            }
        }
    }
}

/// Parses a sweep grid. Scalar grids are comma-separated; schedule grids are
/// `;`-separated step lists, where `none` is the empty schedule and `all`
/// checks every step.
pub fn parse_grid(param: SweepParam, text: &str, max_steps: usize) -> Result<Vec<GridValue>> {
    let grid: Vec<GridValue> = match param {
        SweepParam::Threshold | SweepParam::Noise => parse_list::<f64>(text)?
            .into_iter()
            .map(GridValue::Real)
            .collect(),
        SweepParam::Width | SweepParam::Depth => parse_list::<usize>(text)?
            .into_iter()
            .map(GridValue::Count)
            .collect(),
        SweepParam::Schedule => text
            .split(';')
            .map(|item| match item.trim() {
                "all" => Ok(GridValue::Steps((1..max_steps).collect())),
                other => Ok(GridValue::Steps(
                    parse_list::<usize>(other)?.into_iter().collect(),
                )),
            })
            .collect::<Result<_>>()?,
    };
    if grid.is_empty() {
        bail!("sweep grid is empty");
    }
    Ok(grid)
}

fn apply_grid_value(
    config: &mut ExperimentConfig,
    param: SweepParam,
    strategy: StrategyKind,
    value: &GridValue,
) -> Result<()> {
    match (param, value) {
        (SweepParam::Threshold, GridValue::Real(x)) => config.ddd_threshold = *x,
        (SweepParam::Noise, GridValue::Real(x)) => config.draft_noise = *x,
        (SweepParam::Width, GridValue::Count(w)) => config.beam_width = *w,
        (SweepParam::Depth, GridValue::Count(d)) => match strategy {
            StrategyKind::Eagle2 | StrategyKind::Eagle2Strict => config.eagle2_depth = *d,
            StrategyKind::Static => {
                let template = &mut config.static_template;
                let last = template.last().copied().unwrap_or(1);
                template.resize(*d, last);
            }
            StrategyKind::Ddd | StrategyKind::DddStrict => {
                config.max_steps = *d;
                // checkpoints beyond the new depth cannot be reached
                config.check_steps.retain(|&s| s < *d);
            }
        },
        (SweepParam::Schedule, GridValue::Steps(s)) => config.check_steps = s.clone(),
        _ => bail!("grid value {value} does not fit parameter {param}"),
    }
    config
        .validate()
        .with_context(|| format!("invalid {param} grid value {value}"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub row: StrategyRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub strategy: StrategyKind,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn all_lossless(&self) -> bool {
        self.rows.iter().all(|r| r.row.all_lossless())
    }

    pub fn table(&self, timing: bool) -> Table {
        let mut headers = vec!["parameter".to_string(), "value".to_string()];
        headers.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
        if timing {
            headers.push(TIMING_COLUMN.into());
        }
        let mut t = Table::new(headers);
        for r in &self.rows {
            let mut cells = vec![self.param.to_string(), r.value.clone()];
            cells.extend(r.row.cells(timing));
            t.push(cells);
        }
        t
    }
}

/// Runs one strategy at every grid point, everything else held fixed.
pub fn sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    grid: &[GridValue],
    strategy: Option<StrategyKind>,
) -> Result<SweepTable> {
    if grid.is_empty() {
        bail!("sweep grid is empty");
    }
    config.validate()?;
    let strategy = strategy.unwrap_or_else(|| param.default_strategy());
    let prompts = load_prompts(config)?;
    // the target never depends on the swept parameter
    let (target, _) = make_toy_pair(&config.model_spec())?;
    let vanilla = vanilla_outputs(&target, &prompts, config.num_tokens)?;

    let mut rows = Vec::with_capacity(grid.len());
    for value in grid {
        let mut point = config.clone();
        point.strategies = vec![strategy];
        apply_grid_value(&mut point, param, strategy, value)?;
        let report = run_with_prompts(&point, &prompts, Some(&vanilla))?;
        let row = report
            .rows
            .into_iter()
            .next()
            .expect("one strategy per sweep point");
        rows.push(SweepRow {
            value: value.to_string(),
            row,
        });
    }
    Ok(SweepTable {
        param,
        strategy,
        rows,
    })
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        <SweepParam as clap::ValueEnum>::from_str(s, true).map_err(|e| anyhow::anyhow!(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            vocab_size: 32,
            synthetic: 4,
            num_tokens: 40,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid(SweepParam::Width, "5,10", 11).unwrap(),
            vec![GridValue::Count(5), GridValue::Count(10)]
        );
        let x = parse_grid(SweepParam::Threshold, "-inf,-0.3,1", 11).unwrap();
        assert_eq!(x[0], GridValue::Real(f64::NEG_INFINITY));
        let s = parse_grid(SweepParam::Schedule, "5,7,9;none;all", 4).unwrap();
        assert_eq!(s[0], GridValue::Steps([5, 7, 9].into()));
        assert_eq!(s[1], GridValue::Steps(BTreeSet::new()));
        assert_eq!(s[2], GridValue::Steps([1, 2, 3].into()));
        assert_eq!(s[1].to_string(), "none");
        assert!(parse_grid(SweepParam::Width, "", 11).is_err());
        assert!(parse_grid(SweepParam::Depth, "3,x", 11).is_err());
    }

    #[test]
    fn invalid_grid_values_are_config_errors() {
        let c = small();
        assert!(sweep(&c, SweepParam::Width, &[GridValue::Count(0)], None).is_err());
        assert!(sweep(&c, SweepParam::Noise, &[GridValue::Real(-1.0)], None).is_err());
        assert!(sweep(
            &c,
            SweepParam::Schedule,
            &[GridValue::Steps([12].into())],
            None
        )
        .is_err());
        assert!(sweep(&c, SweepParam::Width, &[GridValue::Real(1.0)], None).is_err());
        assert!(sweep(&c, SweepParam::Width, &[], None).is_err());
    }

    #[test]
    fn report_shape() {
        let c = ExperimentConfig {
            strategies: vec![
                StrategyKind::Static,
                StrategyKind::Eagle2,
                StrategyKind::Ddd,
            ],
            synthetic: 10,
            ..small()
        };
        let report = run_experiment(&c).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.checks.len(), 30);
        assert!(report.all_lossless());
        let table = report.table(false);
        assert_eq!(table.headers, METRIC_COLUMNS.to_vec());
        assert_eq!(
            table.column("strategy").unwrap(),
            vec!["static", "eagle2", "ddd"]
        );
        assert_eq!(report.table(true).headers.last().unwrap(), TIMING_COLUMN);
    }

    #[test]
    fn depth_sweep_on_ddd_drops_unreachable_checkpoints() {
        let c = small();
        let t = sweep(
            &c,
            SweepParam::Depth,
            &[GridValue::Count(4), GridValue::Count(8)],
            None,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0]
            .row
            .metrics
            .depth_histogram
            .keys()
            .all(|&d| d == 4));
        assert!(t.rows[1]
            .row
            .metrics
            .depth_histogram
            .keys()
            .all(|&d| [5, 7, 8].contains(&d)));
    }

    #[test]
    fn static_depth_sweep_extends_template() {
        let c = small();
        let t = sweep(
            &c,
            SweepParam::Depth,
            &[GridValue::Count(2), GridValue::Count(8)],
            Some(StrategyKind::Static),
        )
        .unwrap();
        assert_eq!(
            t.rows[0]
                .row
                .metrics
                .depth_histogram
                .keys()
                .copied()
                .collect::<Vec<_>>(),
            vec![2]
        );
        assert_eq!(
            t.rows[1]
                .row
                .metrics
                .depth_histogram
                .keys()
                .copied()
                .collect::<Vec<_>>(),
            vec![8]
        );
    }

    #[test]
    fn sweep_param_parses() {
        assert_eq!("width".parse::<SweepParam>().unwrap(), SweepParam::Width);
        assert!("height".parse::<SweepParam>().is_err());
    }
}
