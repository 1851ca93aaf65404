//! Per-kind experiment plans: validated inputs, execution and log tallies.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use quasilocal::amplitude::Composition;
use quasilocal::beamline::{
    monte_carlo_sequence, run_sequence, BeamEvent, BeamState, BeamStats, Block, Role, SequenceResult, SgDevice,
};
use quasilocal::epr::{
    chsh, chsh_pairs, conditional_update, correlation, simulate, ChshResult, Estimator, LhvDistribution, Mode,
    SingletEnsemble, TrialRecord, TrialStats,
};
use quasilocal::pathint::{
    dark_region_finder, four_hole_table, group_runs, screen_pattern, x_hole_distribution, Geometry2Slit,
    GeometryFourHole,
};
use quasilocal::phasespace::{apply_px, apply_x, lift, project_p, project_r, Grid, WaveFunction};
use quasilocal::quasiprob::{born_table, negativity_report, solve_weights};
use quasilocal::quatspin::{DirectionSet, Sign};

use crate::config::{parse_axis, with_defaults, Config, DirectionSpec, Kind};
use crate::error::{CliError, CliResult};

pub const LOG_FILE: &str = "trials.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// First line of every trial log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub config_hash: String,
    pub kind: Kind,
    pub seed: u64,
    /// Number of records that follow.
    pub records: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeName {
    #[default]
    BornAnalytic,
    BornSampling,
    Lhv,
    QuasiprobAnalytic,
}

fn build_mode(name: ModeName, lhv: Option<Vec<f64>>, n: usize) -> CliResult<Mode> {
    match (name, lhv) {
        (ModeName::Lhv, Some(p)) => Ok(Mode::ClassicalLhv(LhvDistribution::new(n, p)?)),
        (ModeName::Lhv, None) => Err(CliError::Validation("mode \"lhv\" needs an `lhv` weight list".into())),
        (_, Some(_)) => Err(CliError::Validation("`lhv` weights only apply to mode \"lhv\"".into())),
        (ModeName::BornAnalytic, None) => Ok(Mode::BornAnalytic),
        (ModeName::BornSampling, None) => Ok(Mode::BornPairwiseSampling),
        (ModeName::QuasiprobAnalytic, None) => Ok(Mode::QuasiProbAnalytic),
    }
}

fn is_sampled(mode: &Mode) -> bool {
    matches!(mode, Mode::BornPairwiseSampling | Mode::ClassicalLhv(_))
}

fn angle(t: f64) -> DirectionSpec {
    DirectionSpec::Angle(t)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChshSection {
    #[serde(default)]
    mode: ModeName,
    #[serde(default = "default_a1")]
    a1: DirectionSpec,
    #[serde(default = "default_a2")]
    a2: DirectionSpec,
    #[serde(default = "default_b1")]
    b1: DirectionSpec,
    #[serde(default = "default_b2")]
    b2: DirectionSpec,
    lhv: Option<Vec<f64>>,
}

fn default_a1() -> DirectionSpec {
    angle(0.0)
}
fn default_a2() -> DirectionSpec {
    angle(PI / 2.0)
}
fn default_b1() -> DirectionSpec {
    angle(PI / 4.0)
}
fn default_b2() -> DirectionSpec {
    angle(3.0 * PI / 4.0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EprSection {
    #[serde(default)]
    mode: ModeName,
    #[serde(default = "default_epr_directions")]
    directions: Vec<DirectionSpec>,
    #[serde(default)]
    a: usize,
    #[serde(default = "one")]
    b: usize,
    lhv: Option<Vec<f64>>,
}

fn default_epr_directions() -> Vec<DirectionSpec> {
    vec![angle(0.0), angle(PI / 4.0)]
}
fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuasiprobSection {
    #[serde(default = "default_qp_directions")]
    directions: Vec<DirectionSpec>,
}

fn default_qp_directions() -> Vec<DirectionSpec> {
    vec![angle(0.0), angle(PI / 3.0), angle(2.0 * PI / 3.0)]
}

/// A device as `"role:axis[:block]"`, e.g. `"split:+y:block-"`, or as a table.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum DeviceSpec {
    Text(String),
    Table {
        role: Role,
        axis: DirectionSpec,
        #[serde(default)]
        block: Block,
    },
}

impl DeviceSpec {
    fn resolve(&self, index: usize) -> CliResult<SgDevice> {
        let bad = |m: &str| CliError::Validation(format!("[sterngerlach] device {index}: {m}"));
        let (role, axis, block) = match self {
            DeviceSpec::Table { role, axis, block } => (*role, axis.resolve()?, *block),
            DeviceSpec::Text(s) => {
                let parts: Vec<&str> = s.split(':').collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(bad(&format!("expected role:axis[:block], got `{s}`")));
                }
                let role = match parts[0] {
                    "split" => Role::Split,
                    "recombine" => Role::Recombine,
                    "analyze" => Role::Analyze,
                    r => return Err(bad(&format!("unknown role `{r}`"))),
                };
                let block = match parts.get(2).copied() {
                    None => Block::None,
                    Some("block+") => Block::Plus,
                    Some("block-") => Block::Minus,
                    Some("block-both") => Block::Both,
                    Some(b) => return Err(bad(&format!("unknown block `{b}`; use block+, block- or block-both"))),
                };
                (role, parse_axis(parts[1])?, block)
            }
        };
        Ok(SgDevice { axis, role, block })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SternGerlachSection {
    #[serde(default = "default_devices")]
    devices: Vec<DeviceSpec>,
    #[serde(default = "default_input")]
    input: DirectionSpec,
}

fn default_devices() -> Vec<DeviceSpec> {
    ["split:+x:block-", "split:+y", "recombine:-y", "analyze:+x"]
        .into_iter()
        .map(|s| DeviceSpec::Text(s.into()))
        .collect()
}
fn default_input() -> DirectionSpec {
    DirectionSpec::Axis("+z".into())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StateName {
    #[default]
    Gaussian,
    PlaneWave,
    Csv,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhasespaceSection {
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default = "unit")]
    dr: f64,
    #[serde(default = "unit")]
    hbar: f64,
    #[serde(default)]
    state: StateName,
    #[serde(default = "default_sigma")]
    sigma: f64,
    #[serde(default)]
    r0: f64,
    #[serde(default)]
    p0: f64,
    k0: Option<usize>,
    input: Option<PathBuf>,
}

fn default_points() -> usize {
    256
}
fn unit() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    8.0
}

/// A validated experiment, ready to run.
pub enum Plan {
    Chsh { ensemble: SingletEnsemble, mc: Option<(u64, u64)> },
    Epr { ensemble: SingletEnsemble, a: usize, b: usize, mc: Option<(u64, u64)> },
    Quasiprob { directions: DirectionSet },
    Twoslit { geometry: Geometry2Slit, dark_eps: f64 },
    Fourhole { geometry: GeometryFourHole },
    Sterngerlach { devices: Vec<SgDevice>, input: BeamState, analytic: SequenceResult, mc: (u64, u64) },
    Phasespace { psi: WaveFunction },
}

fn resolve_all(specs: &[DirectionSpec]) -> CliResult<DirectionSet> {
    let dirs = specs.iter().map(DirectionSpec::resolve).collect::<CliResult<Vec<_>>>()?;
    Ok(DirectionSet::new(dirs)?)
}

impl Plan {
    pub fn prepare(cfg: &Config) -> CliResult<Self> {
        match cfg.kind {
            Kind::Chsh => {
                let s: ChshSection = cfg.kind_section()?;
                let directions = resolve_all(&[s.a1, s.a2, s.b1, s.b2])?;
                let mode = build_mode(s.mode, s.lhv, 4)?;
                let mc = if is_sampled(&mode) { Some(cfg.monte_carlo()?) } else { None };
                Ok(Plan::Chsh { ensemble: SingletEnsemble::new(directions, mode)?, mc })
            }
            Kind::Epr => {
                let s: EprSection = cfg.kind_section()?;
                let directions = resolve_all(&s.directions)?;
                for idx in [s.a, s.b] {
                    directions.get(idx)?;
                }
                let mode = build_mode(s.mode, s.lhv, directions.len())?;
                let mc = if is_sampled(&mode) { Some(cfg.monte_carlo()?) } else { None };
                Ok(Plan::Epr { ensemble: SingletEnsemble::new(directions, mode)?, a: s.a, b: s.b, mc })
            }
            Kind::Quasiprob => {
                let s: QuasiprobSection = cfg.kind_section()?;
                Ok(Plan::Quasiprob { directions: resolve_all(&s.directions)? })
            }
            Kind::Twoslit => {
                let mut t = cfg.kind_table();
                let dark_eps = match t.remove("dark_eps") {
                    None => 0.01,
                    Some(v) => v
                        .as_float()
                        .or_else(|| v.as_integer().map(|i| i as f64))
                        .filter(|e| *e > 0.0 && *e < 1.0)
                        .ok_or_else(|| CliError::Validation("[twoslit] dark_eps must be a number in (0, 1)".into()))?,
                };
                let geometry: Geometry2Slit = with_defaults("twoslit", &Geometry2Slit::default(), &t)?;
                geometry.validate()?;
                Ok(Plan::Twoslit { geometry, dark_eps })
            }
            Kind::Fourhole => {
                let geometry: GeometryFourHole =
                    with_defaults("fourhole", &GeometryFourHole::default(), &cfg.kind_table())?;
                geometry.validate()?;
                Ok(Plan::Fourhole { geometry })
            }
            Kind::Sterngerlach => {
                let s: SternGerlachSection = cfg.kind_section()?;
                let devices =
                    s.devices.iter().enumerate().map(|(i, d)| d.resolve(i)).collect::<CliResult<Vec<_>>>()?;
                let input = BeamState::along(&s.input.resolve()?, Sign::Plus);
                let analytic = run_sequence(&devices, &input)?;
                Ok(Plan::Sterngerlach { devices, input, analytic, mc: cfg.monte_carlo()? })
            }
            Kind::Phasespace => {
                let s: PhasespaceSection = cfg.kind_section()?;
                let grid = Grid::new(s.points, s.dr, s.hbar)?;
                let psi = match s.state {
                    StateName::Gaussian => {
                        if !(s.sigma > 0.0 && s.sigma.is_finite()) {
                            return Err(CliError::Validation(format!("[phasespace] sigma must be positive, got {}", s.sigma)));
                        }
                        WaveFunction::from_fn(grid, |r| {
                            let x = r - s.r0;
                            Complex64::from_polar((-x * x / (4.0 * s.sigma * s.sigma)).exp(), s.p0 * r / s.hbar)
                        })?
                        .normalized()
                    }
                    StateName::PlaneWave => {
                        let k0 = s.k0.unwrap_or(s.points / 2 + 4);
                        if k0 >= s.points {
                            return Err(CliError::Validation(format!("[phasespace] k0 = {k0} is off the grid")));
                        }
                        let p = grid.p(k0);
                        WaveFunction::from_fn(grid, |r| Complex64::from_polar(1.0, p * r / s.hbar))?.normalized()
                    }
                    StateName::Csv => {
                        let path = s
                            .input
                            .ok_or_else(|| CliError::Validation("[phasespace] state \"csv\" needs `input`".into()))?;
                        let path = cfg.base_dir.join(path);
                        let f = File::open(&path)
                            .map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
                        WaveFunction::read_csv(f, grid)?
                    }
                };
                // Rejects unnormalized CSV input before running.
                lift(&psi)?;
                Ok(Plan::Phasespace { psi })
            }
        }
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(
            self,
            Plan::Chsh { mc: Some(_), .. } | Plan::Epr { mc: Some(_), .. } | Plan::Sterngerlach { .. }
        )
    }

    /// Quantities that follow from the config alone.
    pub fn derived(&self) -> CliResult<Value> {
        Ok(match self {
            Plan::Chsh { ensemble, mc } => {
                let s = chsh(ensemble, [0, 1, 2, 3], Estimator::Analytic)?.s;
                json!({ "analytic_s": s, "tsirelson_bound": 2.0 * 2f64.sqrt(), "trials_per_correlator": mc.map(|m| m.1) })
            }
            Plan::Epr { ensemble, a, b, mc } => {
                let e = correlation(ensemble, *a, *b, Estimator::Analytic, 0)?.value;
                json!({ "analytic_correlator": e, "trials": mc.map(|m| m.1) })
            }
            Plan::Quasiprob { directions } => {
                json!({ "directions": directions.len(), "patterns": 1u64 << directions.len() })
            }
            Plan::Twoslit { geometry, .. } => json!({
                "wavelength": geometry.wavelength(),
                "fringe_spacing": geometry.fringe_spacing(),
                "bin_width": geometry.bin_width(),
            }),
            Plan::Fourhole { geometry } => json!({
                "wavelength": 2.0 * PI * geometry.hbar / (geometry.mass * geometry.speed),
            }),
            Plan::Sterngerlach { devices, analytic, mc, .. } => json!({
                "devices": devices.len(),
                "analytic": analytic,
                "trials": mc.1,
            }),
            Plan::Phasespace { psi } => {
                let g = psi.grid;
                json!({
                    "points": g.points,
                    "dp": g.dp(),
                    "r_range": [g.r(0), g.r(g.points - 1)],
                    "p_range": [g.p(0), g.p(g.points - 1)],
                })
            }
        })
    }

    /// Runs the experiment, writing outputs into `out_dir`. Returns the
    /// result table and the names of files written.
    pub fn execute(&self, cfg: &Config, out_dir: &Path) -> CliResult<(Value, Vec<String>)> {
        let mut files = Vec::new();
        let results = match self {
            Plan::Chsh { ensemble, mc } => {
                let analytic = chsh(ensemble, [0, 1, 2, 3], Estimator::Analytic)?;
                let mut results = json!({ "analytic": analytic });
                let mut estimate = None;
                if let Some((seed, trials)) = *mc {
                    let mut log = open_log(out_dir, cfg, seed, trials * 4)?;
                    let mut tallies = [TrialStats::default(); 4];
                    for (k, (a, b)) in chsh_pairs([0, 1, 2, 3]).into_iter().enumerate() {
                        tallies[k] = simulate(ensemble, a, b, seed, k as u64 * trials, trials, cfg.workers, |c| {
                            c.iter().try_for_each(|r| r.write_json_line(&mut log))
                        })?;
                    }
                    log.flush()?;
                    files.push(LOG_FILE.to_string());
                    let (t, e) = chsh_statistics(&tallies);
                    estimate = Some(ChshResult::from_correlators(tallies.map(|t| t.correlator())));
                    results["tallies"] = t;
                    results["estimates"] = e;
                }
                let mut w = csv_file(out_dir, "correlators.csv", &mut files)?;
                w.write_record(["a", "b", "analytic", "estimate", "stderr"])?;
                for (k, (a, b)) in chsh_pairs([0, 1, 2, 3]).into_iter().enumerate() {
                    let est = estimate.as_ref().map(|e| e.correlators[k]);
                    w.write_record([
                        a.to_string(),
                        b.to_string(),
                        analytic.correlators[k].value.to_string(),
                        est.map(|c| c.value.to_string()).unwrap_or_default(),
                        est.and_then(|c| c.stderr).map(|s| s.to_string()).unwrap_or_default(),
                    ])?;
                }
                w.flush()?;
                results
            }
            Plan::Epr { ensemble, a, b, mc } => {
                let joint = ensemble.joint_distribution(*a, *b)?;
                let mut results = json!({
                    "analytic": {
                        "joint": joint,
                        "bob_marginal": ensemble.bob_marginal(*a, *b)?,
                        "correlator": correlation(ensemble, *a, *b, Estimator::Analytic, 0)?.value,
                    }
                });
                if matches!(ensemble.mode(), Mode::BornAnalytic | Mode::BornPairwiseSampling) {
                    results["analytic"]["bob_given_alice"] = json!({
                        "plus": conditional_update(ensemble, *a, Sign::Plus, *b)?,
                        "minus": conditional_update(ensemble, *a, Sign::Minus, *b)?,
                    });
                }
                if let Some((seed, trials)) = *mc {
                    let mut log = open_log(out_dir, cfg, seed, trials)?;
                    let stats = simulate(ensemble, *a, *b, seed, 0, trials, cfg.workers, |c| {
                        c.iter().try_for_each(|r| r.write_json_line(&mut log))
                    })?;
                    log.flush()?;
                    files.push(LOG_FILE.to_string());
                    let (t, e) = epr_statistics(&stats);
                    results["tallies"] = t;
                    results["estimates"] = e;
                }
                let mut w = csv_file(out_dir, "joint.csv", &mut files)?;
                w.write_record(["alpha", "beta", "probability"])?;
                for (i, alpha) in Sign::BOTH.into_iter().enumerate() {
                    for (j, beta) in Sign::BOTH.into_iter().enumerate() {
                        w.write_record([alpha.as_i8().to_string(), beta.as_i8().to_string(), joint[i][j].to_string()])?;
                    }
                }
                w.flush()?;
                results
            }
            Plan::Quasiprob { directions } => {
                let table = solve_weights(directions)?;
                let neg = negativity_report(&table);
                table.write_csv(create(out_dir, "weights.csv", &mut files)?)?;
                born_table(directions)?.write_csv(create(out_dir, "born.csv", &mut files)?)?;
                json!({
                    "total_weight": table.total(),
                    "max_pair_violation": table.max_pair_violation(),
                    "min_weight": neg.min_weight,
                    "negative_patterns": neg.negative.iter().map(ToString::to_string).collect::<Vec<_>>(),
                })
            }
            Plan::Twoslit { geometry, dark_eps } => {
                let coherent = screen_pattern(geometry, Composition::Coherent)?;
                let which_path = screen_pattern(geometry, Composition::Incoherent)?;
                let dark = dark_region_finder(&coherent, &which_path, *dark_eps)?;
                let runs = group_runs(&dark);
                coherent.write_csv(create(out_dir, "coherent.csv", &mut files)?)?;
                which_path.write_csv(create(out_dir, "which_path.csv", &mut files)?)?;
                let mut w = csv_file(out_dir, "dark_regions.csv", &mut files)?;
                w.write_record(["run", "bin", "bin_center"])?;
                for (r, run) in runs.iter().enumerate() {
                    for &bin in run {
                        w.write_record([r.to_string(), bin.to_string(), coherent.centers[bin].to_string()])?;
                    }
                }
                w.flush()?;
                let centers: Vec<f64> = runs
                    .iter()
                    .map(|run| run.iter().map(|&b| coherent.centers[b]).sum::<f64>() / run.len() as f64)
                    .collect();
                json!({
                    "fringe_spacing": geometry.fringe_spacing(),
                    "dark_regions": runs.len(),
                    "dark_region_centers": centers,
                })
            }
            Plan::Fourhole { geometry } => {
                let mut w = csv_file(out_dir, "four_hole.csv", &mut files)?;
                w.write_record(["mode", "s_x", "s_a", "probability"])?;
                let mut tables = serde_json::Map::new();
                for (name, mode) in [("coherent", Composition::Coherent), ("which-path", Composition::Incoherent)] {
                    let t = four_hole_table(geometry, mode)?;
                    for (ix, sx) in ["+1", "-1"].iter().enumerate() {
                        for (ia, sa) in ["+1", "-1"].iter().enumerate() {
                            w.write_record([name, sx, sa, &t.cells[ix][ia].to_string()])?;
                        }
                    }
                    tables.insert(
                        name.into(),
                        json!({
                            "cells": t.cells,
                            "x_marginal": t.x_marginal(),
                            "x_only": x_hole_distribution(geometry, mode)?,
                        }),
                    );
                }
                w.flush()?;
                let gap = {
                    let c: [[f64; 2]; 2] = serde_json::from_value(tables["coherent"]["cells"].clone())?;
                    let i: [[f64; 2]; 2] = serde_json::from_value(tables["which-path"]["cells"].clone())?;
                    c.iter().flatten().zip(i.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                };
                tables.insert("max_cell_gap".into(), gap.into());
                Value::Object(tables)
            }
            Plan::Sterngerlach { devices, input, analytic, mc: (seed, trials) } => {
                let mut log = open_log(out_dir, cfg, *seed, *trials)?;
                let stats = monte_carlo_sequence(devices, input, *trials, *seed, cfg.workers, |c| {
                    c.iter().try_for_each(|e| e.write_json_line(&mut log))
                })?;
                log.flush()?;
                files.push(LOG_FILE.to_string());
                let (t, e) = beam_statistics(&stats);
                json!({ "analytic": analytic, "tallies": t, "estimates": e })
            }
            Plan::Phasespace { psi } => {
                let g = psi.grid;
                let xi = psi.fourier();
                let lifted = lift(psi)?;
                let back = project_r(&lifted);
                let ray = project_p(&lifted);
                let x_psi = project_r(&apply_x(&lifted));
                let px_psi = project_r(&apply_px(&lifted));
                let expect = |op: &WaveFunction| {
                    psi.values.iter().zip(&op.values).map(|(a, b)| a.conj() * b).sum::<Complex64>() * g.dr
                };
                psi.write_csv(create(out_dir, "psi.csv", &mut files)?)?;
                xi.write_csv(create(out_dir, "xi.csv", &mut files)?)?;
                ray.write_csv(create(out_dir, "momentum_ray.csv", &mut files)?)?;
                x_psi.write_csv(create(out_dir, "x_psi.csv", &mut files)?)?;
                px_psi.write_csv(create(out_dir, "px_psi.csv", &mut files)?)?;
                json!({
                    "parseval_error": (xi.norm_sqr() - psi.norm_sqr()).abs(),
                    "round_trip_error": back.max_abs_diff(psi),
                    "momentum_ray_distance": ray.ray_distance(&xi),
                    "mean_x": expect(&x_psi).re,
                    "mean_p": expect(&px_psi).re,
                    "band_tail_weight": psi.band_tail_weight(),
                })
            }
        };
        Ok((results, files))
    }

    /// Recomputes `(tallies, estimates)` from the records of a trial log.
    pub fn statistics_from_log<R: BufRead>(&self, header: &LogHeader, lines: R) -> CliResult<(Value, Value)> {
        let records = lines.lines().enumerate().map(|(i, l)| {
            let l = l?;
            Ok::<_, CliError>((i, l))
        });
        let parse_err = |i: usize, e: serde_json::Error| CliError::Parse(format!("trial log line {}: {e}", i + 2));
        let mut seen = 0u64;
        let mut check_trial = |trial: u64| {
            let expected = seen;
            seen += 1;
            if trial != expected {
                return Err(CliError::Mismatch {
                    statistic: "trial sequence".into(),
                    expected: expected.to_string(),
                    actual: trial.to_string(),
                });
            }
            Ok(())
        };
        let out = match self {
            Plan::Chsh { mc: Some((_, trials)), .. } => {
                let pairs = chsh_pairs([0, 1, 2, 3]);
                let mut tallies = [TrialStats::default(); 4];
                for rec in records {
                    let (i, l) = rec?;
                    let r: TrialRecord = serde_json::from_str(&l).map_err(|e| parse_err(i, e))?;
                    check_trial(r.trial)?;
                    let k = ((r.trial / trials) as usize).min(3);
                    if (r.a_setting, r.b_setting) != pairs[k] {
                        return Err(CliError::Mismatch {
                            statistic: format!("settings of trial {}", r.trial),
                            expected: format!("{:?}", pairs[k]),
                            actual: format!("{:?}", (r.a_setting, r.b_setting)),
                        });
                    }
                    tallies[k].record(&r);
                }
                chsh_statistics(&tallies)
            }
            Plan::Epr { mc: Some(_), .. } => {
                let mut stats = TrialStats::default();
                for rec in records {
                    let (i, l) = rec?;
                    let r: TrialRecord = serde_json::from_str(&l).map_err(|e| parse_err(i, e))?;
                    check_trial(r.trial)?;
                    stats.record(&r);
                }
                epr_statistics(&stats)
            }
            Plan::Sterngerlach { .. } => {
                let mut stats = BeamStats::default();
                for rec in records {
                    let (i, l) = rec?;
                    let e: BeamEvent = serde_json::from_str(&l).map_err(|e| parse_err(i, e))?;
                    check_trial(e.trial)?;
                    stats.record(&e);
                }
                beam_statistics(&stats)
            }
            _ => return Err(CliError::Validation(format!("a {} run without sampling writes no trial log", header.kind))),
        };
        if seen != header.records {
            return Err(CliError::Mismatch {
                statistic: "record count".into(),
                expected: header.records.to_string(),
                actual: seen.to_string(),
            });
        }
        Ok(out)
    }
}

fn chsh_statistics(tallies: &[TrialStats; 4]) -> (Value, Value) {
    let result = ChshResult::from_correlators(tallies.map(|t| t.correlator()));
    (json!({ "correlators": tallies }), json!({ "s": result.s, "s_stderr": result.s_stderr, "correlators": result.correlators }))
}

fn epr_statistics(stats: &TrialStats) -> (Value, Value) {
    (
        json!(stats),
        json!({
            "correlator": stats.correlator(),
            "same_sign": stats.same_sign(),
            "bob_plus_fraction": stats.bob_plus_fraction(),
        }),
    )
}

fn beam_statistics(stats: &BeamStats) -> (Value, Value) {
    (
        json!(stats),
        json!({
            "survival": stats.survival(),
            "p_plus": stats.p_plus(),
            "paradox_events": stats.paradox,
        }),
    )
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> CliResult<BufWriter<File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn csv_file(dir: &Path, name: &str, files: &mut Vec<String>) -> CliResult<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name, files)?))
}

fn open_log(dir: &Path, cfg: &Config, seed: u64, records: u64) -> CliResult<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(dir.join(LOG_FILE))?);
    let header = LogHeader { config_hash: cfg.hash.clone(), kind: cfg.kind, seed, records };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    Ok(w)
}
