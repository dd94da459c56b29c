use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::DpSolution;
use crate::error::{Error, Result};

/// Writes `policy.csv` (`stage,v_mps,w_j,mode,value_s`) into `dir`.
///
/// `value_s` is left empty for stages whose cost-to-go table was not kept.
pub fn write_tables(sol: &DpSolution, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("policy.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(&path, e);
    writeln!(out, "stage,v_mps,w_j,mode,value_s").map_err(io)?;
    let cfg = sol.config();
    for stage in 0..sol.stages() {
        for iv in 0..cfg.n_v {
            let v = sol.v_axis().node(iv);
            for iw in 0..cfg.n_w {
                let mode = sol
                    .policy(stage, iv, iw)
                    .map(|a| a.label())
                    .unwrap_or_else(|| "NONE".into());
                write!(out, "{stage},{v},{},{mode},", sol.w_axis().node(iw)).map_err(io)?;
                match sol.value(stage, iv, iw) {
                    Some(x) if x.is_finite() => writeln!(out, "{x}"),
                    Some(_) => writeln!(out, "inf"),
                    None => writeln!(out),
                }
                .map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}
