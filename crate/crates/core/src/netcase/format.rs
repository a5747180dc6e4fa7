//! Text case format.
//!
//! ```text
//! # comments start with '#'
//! [buses]
//! # id  inertia  damping  injection
//! 1  1.0  1.0  0.5
//! 2  0.0  1.0  -0.5
//!
//! [lines]
//! # id  from  to  susceptance   (from/to are bus ids; from is the positive end)
//! 1  1  2  1.0
//!
//! [control]
//! controlled = 1
//! frequency = 1
//! # input bus c d e xi u_min u_max gain_up gain_lo thr_lo thr_up   ('-' = unbounded)
//! input 1  2.0 0.0 500.0 1  -  -  1.0 1.0 -0.1 0.1
//! # bound bus lower upper margin
//! bound 1  -0.2 0.2 0.02
//!
//! [horizon]
//! steps = 150
//! period = 0.001
//! ```
//!
//! Row order inside `[buses]` and `[lines]` defines the internal numbering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Bus, CaseError, ControlConfig, ControlParams, FrequencyBounds, Horizon, Line, NetworkCase};

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Buses,
    Lines,
    Control,
    Horizon,
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T, CaseError> {
    Err(CaseError::Parse { line, msg: msg.into() })
}

fn num(tok: &str, line: usize) -> Result<f64, CaseError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CaseError::Parse { line, msg: format!("expected a number, found '{tok}'") })
}

fn opt_num(tok: &str, line: usize) -> Result<Option<f64>, CaseError> {
    if tok == "-" {
        Ok(None)
    } else {
        num(tok, line).map(Some)
    }
}

fn int(tok: &str, line: usize) -> Result<usize, CaseError> {
    tok.parse::<usize>()
        .map_err(|_| CaseError::Parse { line, msg: format!("expected a non-negative integer, found '{tok}'") })
}

fn flag(tok: &str, line: usize) -> Result<bool, CaseError> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => perr(line, format!("expected 0 or 1, found '{tok}'")),
    }
}

pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let mut section = Section::None;
    let mut buses: Vec<Bus> = Vec::new();
    let mut raw_lines: Vec<(usize, usize, usize, f64, usize)> = Vec::new();
    let mut controlled_ids: Option<Vec<usize>> = None;
    let mut freq_ids: Option<Vec<usize>> = None;
    let mut inputs: BTreeMap<usize, (ControlParams, usize)> = BTreeMap::new();
    let mut bound_rows: BTreeMap<usize, (FrequencyBounds, usize)> = BTreeMap::new();
    let mut steps: Option<usize> = None;
    let mut period: Option<f64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            section = match body {
                "[buses]" => Section::Buses,
                "[lines]" => Section::Lines,
                "[control]" => Section::Control,
                "[horizon]" => Section::Horizon,
                _ => return perr(ln, format!("unknown section {body}")),
            };
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        match section {
            Section::None => return perr(ln, "content before the first section header"),
            Section::Buses => {
                if toks.len() != 4 {
                    return perr(ln, "bus rows need: id inertia damping injection");
                }
                buses.push(Bus {
                    id: int(toks[0], ln)?,
                    inertia: num(toks[1], ln)?,
                    damping: num(toks[2], ln)?,
                    base_injection: num(toks[3], ln)?,
                });
            }
            Section::Lines => {
                if toks.len() != 4 {
                    return perr(ln, "line rows need: id from to susceptance");
                }
                raw_lines.push((int(toks[0], ln)?, int(toks[1], ln)?, int(toks[2], ln)?, num(toks[3], ln)?, ln));
            }
            Section::Control => {
                if let Some((key, rest)) = body.split_once('=') {
                    let ids = rest.split_whitespace().map(|t| int(t, ln)).collect::<Result<Vec<_>, _>>()?;
                    match key.trim() {
                        "controlled" => controlled_ids = Some(ids),
                        "frequency" => freq_ids = Some(ids),
                        k => return perr(ln, format!("unknown control key '{k}'")),
                    }
                    continue;
                }
                match toks[0] {
                    "input" => {
                        if toks.len() != 12 {
                            return perr(ln, "input rows need 11 fields after the keyword");
                        }
                        let p = ControlParams {
                            input_weight: num(toks[2], ln)?,
                            slack_weight: num(toks[3], ln)?,
                            freq_slack_weight: num(toks[4], ln)?,
                            soft_input: flag(toks[5], ln)?,
                            input_min: opt_num(toks[6], ln)?,
                            input_max: opt_num(toks[7], ln)?,
                            gain_upper: num(toks[8], ln)?,
                            gain_lower: num(toks[9], ln)?,
                            threshold_lower: num(toks[10], ln)?,
                            threshold_upper: num(toks[11], ln)?,
                        };
                        if inputs.insert(int(toks[1], ln)?, (p, ln)).is_some() {
                            return perr(ln, "duplicate input row");
                        }
                    }
                    "bound" => {
                        if toks.len() != 5 {
                            return perr(ln, "bound rows need: bus lower upper margin");
                        }
                        let b = FrequencyBounds {
                            lower: num(toks[2], ln)?,
                            upper: num(toks[3], ln)?,
                            margin: num(toks[4], ln)?,
                        };
                        if bound_rows.insert(int(toks[1], ln)?, (b, ln)).is_some() {
                            return perr(ln, "duplicate bound row");
                        }
                    }
                    other => return perr(ln, format!("unknown control row '{other}'")),
                }
            }
            Section::Horizon => {
                let Some((key, val)) = body.split_once('=') else {
                    return perr(ln, "horizon rows are 'key = value'");
                };
                match key.trim() {
                    "steps" => steps = Some(int(val.trim(), ln)?),
                    "period" => period = Some(num(val.trim(), ln)?),
                    k => return perr(ln, format!("unknown horizon key '{k}'")),
                }
            }
        }
    }

    let pos_of: BTreeMap<usize, usize> = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let resolve = |id: usize, ln: usize| -> Result<usize, CaseError> {
        pos_of
            .get(&id)
            .copied()
            .ok_or_else(|| CaseError::Parse { line: ln, msg: format!("unknown bus id {id}") })
    };
    let mut lines = Vec::with_capacity(raw_lines.len());
    for (id, from, to, b, ln) in raw_lines {
        lines.push(Line { id, from: resolve(from, ln)?, to: resolve(to, ln)?, susceptance: b });
    }

    let to_positions = |ids: Option<Vec<usize>>| -> Result<Vec<usize>, CaseError> {
        let mut v = Vec::new();
        for id in ids.unwrap_or_default() {
            v.push(pos_of.get(&id).copied().ok_or_else(|| CaseError::Invalid(format!("unknown bus id {id} in control set")))?);
        }
        v.sort_unstable();
        Ok(v)
    };
    let controlled = to_positions(controlled_ids)?;
    let freq_constrained = to_positions(freq_ids)?;

    let mut params = Vec::with_capacity(controlled.len());
    for &i in &controlled {
        let id = buses[i].id;
        match inputs.remove(&id) {
            Some((p, _)) => params.push(p),
            None => return Err(CaseError::Invalid(format!("controlled bus {id} has no input row"))),
        }
    }
    if let Some((id, (_, ln))) = inputs.into_iter().next() {
        return perr(ln, format!("input row for bus {id} which is not controlled"));
    }
    let mut bounds = Vec::with_capacity(freq_constrained.len());
    for &i in &freq_constrained {
        let id = buses[i].id;
        match bound_rows.remove(&id) {
            Some((b, _)) => bounds.push(b),
            None => return Err(CaseError::Invalid(format!("frequency-constrained bus {id} has no bound row"))),
        }
    }
    if let Some((id, (_, ln))) = bound_rows.into_iter().next() {
        return perr(ln, format!("bound row for bus {id} which is not frequency-constrained"));
    }

    let horizon = Horizon {
        steps: steps.ok_or_else(|| CaseError::Invalid("missing horizon steps".into()))?,
        period: period.ok_or_else(|| CaseError::Invalid("missing horizon period".into()))?,
    };
    NetworkCase::new(buses, lines, ControlConfig { controlled, params, freq_constrained, bounds, horizon })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

/// Serialize a case; `parse_case(&write_case(c))` reproduces `c` exactly.
pub fn write_case(case: &NetworkCase) -> String {
    let mut s = String::new();
    let id = |i: usize| case.buses()[i].id;
    s.push_str("[buses]\n# id inertia damping injection\n");
    for b in case.buses() {
        let _ = writeln!(s, "{} {} {} {}", b.id, b.inertia, b.damping, b.base_injection);
    }
    s.push_str("\n[lines]\n# id from to susceptance\n");
    for l in case.lines() {
        let _ = writeln!(s, "{} {} {} {}", l.id, id(l.from), id(l.to), l.susceptance);
    }
    let cfg = case.config();
    s.push_str("\n[control]\ncontrolled =");
    for &i in &cfg.controlled {
        let _ = write!(s, " {}", id(i));
    }
    s.push_str("\nfrequency =");
    for &i in &cfg.freq_constrained {
        let _ = write!(s, " {}", id(i));
    }
    s.push_str("\n# input bus c d e xi u_min u_max gain_up gain_lo thr_lo thr_up\n");
    for (&i, p) in cfg.controlled.iter().zip(&cfg.params) {
        let _ = writeln!(
            s,
            "input {} {} {} {} {} {} {} {} {} {} {}",
            id(i),
            p.input_weight,
            p.slack_weight,
            p.freq_slack_weight,
            u8::from(p.soft_input),
            opt(p.input_min),
            opt(p.input_max),
            p.gain_upper,
            p.gain_lower,
            p.threshold_lower,
            p.threshold_upper
        );
    }
    s.push_str("# bound bus lower upper margin\n");
    for (&i, b) in cfg.freq_constrained.iter().zip(&cfg.bounds) {
        let _ = writeln!(s, "bound {} {} {} {}", id(i), b.lower, b.upper, b.margin);
    }
    let _ = write!(s, "\n[horizon]\nsteps = {}\nperiod = {}\n", cfg.horizon.steps, cfg.horizon.period);
    s
}
