//! CSV and JSON artifacts.
//!
//! Floats are written with the shortest representation that round-trips, so
//! repeated runs produce byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::autocorr::Trace;
use crate::fock::FockDensity;
use crate::qspec::{PnHistogram, ShotRecord};
use crate::wigner::WignerField;
use crate::{Error, Result};

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Create `path` and hand a buffered writer to `f`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(io_err)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w).map_err(io_err)
    })
}

pub fn write_trace_csv(w: &mut dyn Write, tr: &Trace) -> Result<()> {
    writeln!(w, "tau_fs,value,sigma").map_err(io_err)?;
    for i in 0..tr.len() {
        writeln!(w, "{},{},{}", tr.delays[i], tr.values[i], tr.sigma[i]).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Trace> {
    let mut lines = BufReader::new(r).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "tau_fs,value,sigma" => {}
        _ => return Err(Error::Parse("missing trace header".into())),
    }
    let (mut d, mut v, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))?;
        if f.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 fields", n + 2)));
        }
        d.push(f[0]);
        v.push(f[1]);
        s.push(f[2]);
    }
    Trace::new(d, v, s)
}

/// Matrix layout: first row `x\p,p_0,p_1,…`, then one row per x.
pub fn write_wigner_csv(w: &mut dyn Write, field: &WignerField) -> Result<()> {
    let ps = field.grid.ps();
    write!(w, "x\\p").map_err(io_err)?;
    for p in &ps {
        write!(w, ",{p}").map_err(io_err)?;
    }
    writeln!(w).map_err(io_err)?;
    for (ix, x) in field.grid.xs().iter().enumerate() {
        write!(w, "{x}").map_err(io_err)?;
        for ip in 0..ps.len() {
            write!(w, ",{}", field.at(ix, ip)).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_shots_csv(w: &mut dyn Write, shots: &[ShotRecord], with_truth: bool) -> Result<()> {
    if with_truth {
        writeln!(w, "s_ir,s_hh,is_hhg_event,order").map_err(io_err)?;
        for s in shots {
            writeln!(w, "{},{},{},{}", s.s_ir, s.s_hh, s.is_hhg_event as u8, s.order).map_err(io_err)?;
        }
    } else {
        writeln!(w, "s_ir,s_hh").map_err(io_err)?;
        for s in shots {
            writeln!(w, "{},{}", s.s_ir, s.s_hh).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn write_histogram_csv(w: &mut dyn Write, h: &PnHistogram) -> Result<()> {
    writeln!(w, "bin_lo,bin_hi,probability").map_err(io_err)?;
    for (k, p) in h.probabilities.iter().enumerate() {
        writeln!(w, "{},{},{}", h.edges[k], h.edges[k + 1], p).map_err(io_err)?;
    }
    Ok(())
}

/// Long format `row,col,re,im`, zeros skipped.
pub fn write_density_csv(w: &mut dyn Write, rho: &FockDensity) -> Result<()> {
    writeln!(w, "row,col,re,im").map_err(io_err)?;
    let d = rho.dim();
    for r in 0..d {
        for c in 0..d {
            let z = rho.get(r, c);
            if z.re != 0.0 || z.im != 0.0 {
                writeln!(w, "{r},{c},{},{}", z.re, z.im).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// Several traces in one file, `label,tau_fs,value,sigma`.
pub fn write_labeled_traces_csv(w: &mut dyn Write, label: &str, traces: &[(&str, &Trace)]) -> Result<()> {
    writeln!(w, "{label},tau_fs,value,sigma").map_err(io_err)?;
    for (name, tr) in traces {
        for i in 0..tr.len() {
            writeln!(w, "{name},{},{},{}", tr.delays[i], tr.values[i], tr.sigma[i]).map_err(io_err)?;
        }
    }
    Ok(())
}

/// Several Wigner fields in one file, `label,x,p,w`.
pub fn write_labeled_wigner_csv(w: &mut dyn Write, label: &str, fields: &[(&str, &WignerField)]) -> Result<()> {
    writeln!(w, "{label},x,p,w").map_err(io_err)?;
    for (name, f) in fields {
        let ps = f.grid.ps();
        for (ix, x) in f.grid.xs().iter().enumerate() {
            for (ip, p) in ps.iter().enumerate() {
                writeln!(w, "{name},{x},{p},{}", f.at(ix, ip)).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// Several density matrices in one file, `label,row,col,re,im`, zeros skipped.
pub fn write_labeled_density_csv(w: &mut dyn Write, label: &str, rhos: &[(&str, &FockDensity)]) -> Result<()> {
    writeln!(w, "{label},row,col,re,im").map_err(io_err)?;
    for (name, rho) in rhos {
        let d = rho.dim();
        for r in 0..d {
            for c in 0..d {
                let z = rho.get(r, c);
                if z.re != 0.0 || z.im != 0.0 {
                    writeln!(w, "{name},{r},{c},{},{}", z.re, z.im).map_err(io_err)?;
                }
            }
        }
    }
    Ok(())
}
