use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::analysis::{write_cells, write_event_log, write_trace};

use super::{NrtSample, RunOutput};

/// Files written by [`write_outputs`].
pub const OUTPUT_FILES: [&str; 6] =
    ["metrics.json", "events.csv", "trace.csv", "uav_trace.csv", "cells.csv", "nrt_stats.csv"];

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn io_err(e: impl std::fmt::Display) -> io::Error {
    io::Error::other(e.to_string())
}

pub fn write_nrt_stats(samples: &[NrtSample], out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "time_s",
        "owner_ecgi",
        "ground_size",
        "aerial_size",
        "ground_block_listed",
        "aerial_block_listed",
    ])
    .map_err(io_err)?;
    let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    for s in samples {
        w.write_record([
            s.time_s.to_string(),
            s.owner.to_string(),
            s.ground_size.to_string(),
            opt(s.aerial_size),
            s.ground_block_listed.to_string(),
            opt(s.aerial_block_listed),
        ])
        .map_err(io_err)?;
    }
    w.flush()
}

/// Writes every run artefact into `dir` (created if missing).
pub fn write_outputs(out: &RunOutput, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut m = create(dir, "metrics.json")?;
    m.write_all(out.metrics_json().as_bytes())?;
    m.write_all(b"\n")?;
    m.flush()?;
    write_event_log(&out.events, create(dir, "events.csv")?).map_err(io_err)?;
    std::fs::write(dir.join("trace.csv"), &out.trace_csv)?;
    write_trace(&out.uav_trace.rows, create(dir, "uav_trace.csv")?).map_err(io_err)?;
    write_cells(&out.uav_trace.cells, create(dir, "cells.csv")?).map_err(io_err)?;
    write_nrt_stats(&out.nrt_samples, create(dir, "nrt_stats.csv")?)
}
