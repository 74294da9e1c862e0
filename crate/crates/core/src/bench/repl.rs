use std::io::{BufRead, Write};
use std::time::Instant;

use super::trial::TrialMetrics;
use super::BenchError;
use crate::policy::Executive;
use crate::semantic_map::marginal_map;

const HELP: &str = "commands: say <instruction> | step [n] | map | metrics | quit";

fn print_map(exec: &Executive, out: &mut impl Write) -> std::io::Result<()> {
    let m = marginal_map(&exec.set);
    writeln!(out, "particle {} weight {:.3}", m.particle, m.weight)?;
    for n in m.graph.landmarks() {
        let t = m.graph.map_type(n.id).unwrap_or("?");
        let p = m.existence.get(&n.id).copied().unwrap_or(0.0);
        let tag = if n.hypothesized { " (hypothesized)" } else { "" };
        writeln!(
            out,
            "  {} {t} at ({:.2}, {:.2}) p={p:.2}{tag}",
            n.id, n.pose.x, n.pose.y
        )?;
    }
    Ok(())
}

/// Line-oriented session over one executive. Command errors are echoed and
/// the session continues; only I/O failures end it early.
pub fn repl(exec: &mut Executive, input: impl BufRead, mut out: impl Write) -> Result<(), BenchError> {
    let t0 = Instant::now();
    let io = |e: std::io::Error| BenchError::Io(e.to_string());
    writeln!(out, "{HELP}").map_err(io)?;
    for line in input.lines() {
        let line = line.map_err(io)?;
        let line = line.trim();
        let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match cmd {
            "" => {}
            "quit" | "exit" => break,
            "say" => match exec.issue(rest) {
                Ok(()) => writeln!(out, "task {} issued", exec.tasks.len()).map_err(io)?,
                Err(e) => writeln!(out, "error: {e}").map_err(io)?,
            },
            "step" => {
                let n = if rest.is_empty() { Ok(1) } else { rest.parse::<u64>() };
                match n {
                    Ok(n) => {
                        for _ in 0..n {
                            if let Err(e) = exec.step() {
                                writeln!(out, "error: {e}").map_err(io)?;
                                break;
                            }
                        }
                        let p = exec.pose;
                        writeln!(
                            out,
                            "cycle {} t={:.2}s pose ({:.2}, {:.2}, {:.2}) tasks done {}/{}",
                            exec.cycle,
                            exec.acct.sim_time,
                            p.x,
                            p.y,
                            p.theta,
                            exec.completed_tasks(),
                            exec.tasks.len()
                        )
                        .map_err(io)?;
                    }
                    Err(_) => writeln!(out, "error: step takes a cycle count").map_err(io)?,
                }
            }
            "map" => print_map(exec, &mut out).map_err(io)?,
            "metrics" => {
                let m = TrialMetrics::from_executive(exec, exec.is_finished(), t0.elapsed().as_secs_f64());
                let json = serde_json::to_string_pretty(&m).map_err(|e| BenchError::Io(e.to_string()))?;
                writeln!(out, "{json}").map_err(io)?;
            }
            _ => writeln!(out, "error: unknown command {cmd:?}; {HELP}").map_err(io)?,
        }
        out.flush().map_err(io)?;
    }
    Ok(())
}
