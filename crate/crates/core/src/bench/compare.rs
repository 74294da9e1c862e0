use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::svg::trajectory_svg;
use super::trial::{run_trial, Pipeline, TrialMetrics, TrialOutcome};
use super::BenchError;
use crate::perception::Mode;
use crate::simworld::Scenario;

/// Reference per-mode values a scenario is calibrated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub loop_period: f64,
    pub detected: f64,
    pub replay: f64,
    pub task1: f64,
    pub task2: f64,
}

/// Calibration targets for the shipped scenarios, as (AP, EP).
pub fn targets(scenario: &str) -> Option<(Targets, Targets)> {
    let t = |loop_period, detected, replay, task1, task2| Targets {
        loop_period,
        detected,
        replay,
        task1,
        task2,
    };
    match scenario {
        "controlled_indoor" => Some((t(0.700, 9.0, 19.6, 186.6, 90.5), t(4.141, 24.0, 0.0, 351.2, 149.5))),
        "exploratory_outdoor" => Some((t(0.655, 8.0, 13.5, 214.4, 22.0), t(4.099, 11.0, 0.0, 593.5, 20.4))),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Per-mode means over the seeds of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeMeans {
    pub loop_period: f64,
    pub inference_per_world: f64,
    pub detected: f64,
    pub replay: f64,
    /// Over trials that completed the task; NaN when none did.
    pub task1: f64,
    pub task2: f64,
    pub success_rate: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl ModeMeans {
    fn of(ms: &[&TrialMetrics]) -> Self {
        Self {
            loop_period: mean(ms.iter().map(|m| m.avg_perception_loop_period_s)),
            inference_per_world: mean(ms.iter().map(|m| m.avg_behavior_inf_time_per_world_s)),
            detected: mean(ms.iter().map(|m| m.total_detected_objects as f64)),
            replay: mean(ms.iter().map(|m| m.replay_time_s)),
            task1: mean(ms.iter().filter_map(|m| m.task1_time_s)),
            task2: mean(ms.iter().filter_map(|m| m.task2_time_s)),
            success_rate: mean(ms.iter().map(|m| f64::from(u8::from(m.success)))),
        }
    }
}

/// Paired AP/EP trials over one seed set.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub trials: Vec<TrialOutcome>,
    pub adaptive: ModeMeans,
    pub exhaustive: ModeMeans,
    pub verdicts: Vec<Verdict>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn trials_for(&self, mode: Mode) -> impl Iterator<Item = &TrialOutcome> {
        self.trials.iter().filter(move |t| t.metrics.mode == mode)
    }

    pub fn from_trials(scenario: &str, seeds: &[u64], trials: Vec<TrialOutcome>) -> Self {
        let pick = |mode| -> Vec<&TrialMetrics> {
            trials
                .iter()
                .filter(|t| t.metrics.mode == mode)
                .map(|t| &t.metrics)
                .collect()
        };
        let ap = ModeMeans::of(&pick(Mode::Adaptive));
        let ep = ModeMeans::of(&pick(Mode::Exhaustive));
        let verdicts = trend_verdicts(scenario, &ap, &ep);
        Self {
            scenario: scenario.to_string(),
            seeds: seeds.to_vec(),
            trials,
            adaptive: ap,
            exhaustive: ep,
            verdicts,
        }
    }
}

/// Relative calibration band around a reference value.
pub const CALIBRATION_BAND: f64 = 0.20;

/// Orderings expected between the two modes, plus calibration bands where
/// the scenario has reference targets.
pub fn trend_verdicts(scenario: &str, ap: &ModeMeans, ep: &ModeMeans) -> Vec<Verdict> {
    let mut out = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        out.push(Verdict {
            name: name.to_string(),
            pass,
            detail,
        })
    };
    push(
        "loop_period_ratio",
        ap.loop_period <= 0.25 * ep.loop_period,
        format!("AP {:.3} s vs 0.25 x EP {:.3} s", ap.loop_period, 0.25 * ep.loop_period),
    );
    push(
        "detected_objects",
        ap.detected < ep.detected,
        format!("AP {:.1} < EP {:.1}", ap.detected, ep.detected),
    );
    push(
        "first_task_time",
        ap.task1 < ep.task1,
        format!("AP {:.1} s < EP {:.1} s", ap.task1, ep.task1),
    );
    push(
        "replay_time",
        ep.replay == 0.0 && ap.replay > 0.0,
        format!("EP {:.2} s == 0, AP {:.2} s > 0", ep.replay, ap.replay),
    );
    if let Some((ta, te)) = targets(scenario) {
        let band = |x: f64, t: f64| (x - t).abs() <= CALIBRATION_BAND * t;
        push(
            "ap_loop_period_calibrated",
            band(ap.loop_period, ta.loop_period),
            format!("AP {:.3} s vs {:.3} s +/- 20%", ap.loop_period, ta.loop_period),
        );
        push(
            "ep_loop_period_calibrated",
            band(ep.loop_period, te.loop_period),
            format!("EP {:.3} s vs {:.3} s +/- 20%", ep.loop_period, te.loop_period),
        );
    }
    if scenario == "controlled_indoor" {
        push(
            "detected_object_bounds",
            ap.detected <= 12.0 && ep.detected >= 18.0,
            format!("AP {:.1} <= 12, EP {:.1} >= 18", ap.detected, ep.detected),
        );
    }
    out
}

/// Runs both modes on every seed, trials in parallel.
pub fn compare(
    pipeline: &Pipeline,
    scenario: &Scenario,
    overrides: &serde_json::Value,
    seeds: &[u64],
) -> Result<ComparisonReport, BenchError> {
    if seeds.len() < 3 {
        return Err(BenchError::Usage(format!("compare needs at least 3 seeds, got {}", seeds.len())));
    }
    let jobs: Vec<(Mode, u64)> = [Mode::Adaptive, Mode::Exhaustive]
        .into_iter()
        .flat_map(|m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(mode, seed)| run_trial(pipeline, scenario, overrides, mode, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonReport::from_trials(&scenario.name, seeds, trials))
}

pub fn write_metrics_csv(path: &Path, metrics: &[&TrialMetrics]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    for m in metrics {
        w.serialize(m).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| BenchError::Io(e.to_string()))
}

type ReportRow = (&'static str, fn(&ModeMeans) -> f64);

pub fn report_text(r: &ComparisonReport) -> String {
    let mut s = String::new();
    let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
    writeln!(s, "scenario {}  seeds {}", r.scenario, seeds.join(",")).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:<34}{:>12}{:>12}", "", "AP", "EP").unwrap();
    let rows: [ReportRow; 7] = [
        ("avg. behavior inf. time / world (s)", |m| m.inference_per_world),
        ("avg. perception loop period (s)", |m| m.loop_period),
        ("time analyzing past obs. (s)", |m| m.replay),
        ("first task time (s)", |m| m.task1),
        ("second task time (s)", |m| m.task2),
        ("total detected objects", |m| m.detected),
        ("success rate", |m| m.success_rate),
    ];
    for (name, f) in rows {
        writeln!(s, "{:<34}{:>12.3}{:>12.3}", name, f(&r.adaptive), f(&r.exhaustive)).unwrap();
    }
    if let Some((ta, te)) = targets(&r.scenario) {
        writeln!(s).unwrap();
        writeln!(s, "calibration (measured - reference)").unwrap();
        let d = |m: f64, t: f64| format!("{:+.3}", m - t);
        for (name, a, e) in [
            ("loop period", d(r.adaptive.loop_period, ta.loop_period), d(r.exhaustive.loop_period, te.loop_period)),
            ("detected objects", d(r.adaptive.detected, ta.detected), d(r.exhaustive.detected, te.detected)),
            ("replay time", d(r.adaptive.replay, ta.replay), d(r.exhaustive.replay, te.replay)),
            ("first task time", d(r.adaptive.task1, ta.task1), d(r.exhaustive.task1, te.task1)),
            ("second task time", d(r.adaptive.task2, ta.task2), d(r.exhaustive.task2, te.task2)),
        ] {
            writeln!(s, "{name:<34}{a:>12}{e:>12}").unwrap();
        }
    }
    writeln!(s).unwrap();
    for v in &r.verdicts {
        writeln!(s, "{} {:<28} {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail).unwrap();
    }
    for t in &r.trials {
        if let Some(e) = &t.error {
            writeln!(s, "trial {}: {e}", t.metrics.label()).unwrap();
        }
    }
    s
}

/// Writes `metrics.csv`, `report.txt` and one trajectory plot per trial.
pub fn emit(r: &ComparisonReport, dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    let rows: Vec<&TrialMetrics> = r.trials.iter().map(|t| &t.metrics).collect();
    write_metrics_csv(&dir.join("metrics.csv"), &rows)?;
    let io = |e: std::io::Error| BenchError::Io(e.to_string());
    std::fs::write(dir.join("report.txt"), report_text(r)).map_err(io)?;
    for t in &r.trials {
        let name = format!("trajectory_{}.svg", t.metrics.label());
        std::fs::write(dir.join(name), trajectory_svg(t)).map_err(io)?;
    }
    Ok(())
}
