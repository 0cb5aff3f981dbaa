//! trajectory.csv and metrics.json.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::ResolvedConfig;
use crate::error::CliError;
use crate::experiments::{terminal_json, RunOutput};
use crate::svg::emit_svg;

pub const CSV_HEADER: &str = "t,x,y,u";

/// One row per recorded state, 17 significant digits, LF line endings.
pub fn write_csv(w: &mut impl Write, times: &[f64], states: &[[f64; 2]], controls: &[f64]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for ((t, s), u) in times.iter().zip(states).zip(controls) {
        writeln!(w, "{t:.16e},{:.16e},{:.16e},{u:.16e}", s[0], s[1])?;
    }
    Ok(())
}

/// Columns `(t, [x, y], u)` of a trajectory.csv.
pub type Columns = (Vec<f64>, Vec<[f64; 2]>, Vec<f64>);

pub fn parse_csv(text: &str) -> Result<Columns, CliError> {
    let mut lines = text.split('\n');
    if lines.next() != Some(CSV_HEADER) {
        return Err(CliError::Validation(format!("trajectory header must be '{CSV_HEADER}'")));
    }
    let (mut t, mut s, mut u) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Validation(format!("row {}: {e}", i + 1)))?;
        let [a, b, c, d] = vals[..] else {
            return Err(CliError::Validation(format!("row {} has {} fields, expected 4", i + 1, vals.len())));
        };
        t.push(a);
        s.push([b, c]);
        u.push(d);
    }
    Ok((t, s, u))
}

pub fn metrics(cfg: &ResolvedConfig, out: &RunOutput) -> Value {
    let mut m = Map::new();
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m.insert("samples".into(), json!(out.times.len()));
    m.insert("terminal".into(), terminal_json(out));
    for (k, v) in &out.summary {
        m.insert(k.clone(), v.clone());
    }
    Value::Object(m)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Writes trajectory.csv, metrics.json and phase.svg into `dir`.
pub fn write_run(dir: &Path, cfg: &ResolvedConfig, out: &RunOutput) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("trajectory.csv"), |w| write_csv(w, &out.times, &out.states, &out.controls))?;
    let m = metrics(cfg, out);
    write_file(&dir.join("metrics.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &m)?;
        writeln!(w)
    })?;
    let pts: Vec<(f64, f64)> = out.states.iter().map(|s| (s[0], s[1])).collect();
    let svg = emit_svg(&pts, &out.overlays, out.axes, &cfg.name);
    write_file(&dir.join("phase.svg"), |w| w.write_all(svg.as_bytes()))
}

/// Best-effort metrics.json for a failed run.
pub fn write_failure(dir: &Path, cfg: &ResolvedConfig, err: &CliError) {
    let mut m = json!({"config": cfg, "error": err.to_string(), "exit_code": err.exit_code()});
    if let CliError::Pattern { achieved, requested } = err {
        m["achieved"] = json!(achieved);
        m["requested"] = json!(requested);
    }
    if fs::create_dir_all(dir).is_ok() {
        let _ = write_file(&dir.join("metrics.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &m)?;
            writeln!(w)
        });
    }
}
