//! CSV readers and writers. Lab-unit conversion happens here: detunings are
//! written in MHz, waveform times in ns and tags in ps.

use std::path::Path;

use crate::coincidence::{Channel, Histogram, TimeTagStream};
use crate::error::{Error, Result};
use crate::pulse::PulseWaveform;
use crate::susceptibility::{OdScanRow, SpectrumTable};
use crate::tomography::BasisCounts;
use crate::units;

pub const SPECTRUM_HEADER: [&str; 4] = ["detuning_MHz", "T", "Re_chi", "Im_chi"];
pub const ODSCAN_HEADER: [&str; 7] = ["od", "T_fw", "T_bw", "eta", "T_fw_pulse", "T_bw_pulse", "eta_pulse"];
pub const WAVEFORM_HEADER: [&str; 3] = ["t_ns", "re", "im"];
pub const TAGS_HEADER: [&str; 2] = ["channel", "timestamp_ps"];
pub const TOMO_HEADER: [&str; 3] = ["name", "re", "im"];
pub const HISTOGRAM_HEADER: [&str; 2] = ["delay_ns", "counts"];

/// Writes a header and rows of pre-formatted fields.
pub fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>())?;
    }
    w.flush()?;
    Ok(())
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if got != header {
        return Err(Error::Config(format!("{}: expected header {:?}, found {:?}", path.display(), header, got)));
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config(format!("{}:{line}: bad value in column {}", path.display(), i + 1)))
}

pub fn write_spectrum(path: &Path, table: &SpectrumTable, linewidth_mhz: f64) -> Result<()> {
    write_rows(
        path,
        &SPECTRUM_HEADER,
        table.rows.iter().map(|r| {
            [
                units::gamma_to_mhz(r.detuning, linewidth_mhz).to_string(),
                r.transmission.to_string(),
                r.chi.re().to_string(),
                r.chi.im().to_string(),
            ]
        }),
    )
}

/// Pulse-integrated columns are left empty when they were not computed.
pub fn write_odscan(path: &Path, rows: &[OdScanRow]) -> Result<()> {
    write_rows(
        path,
        &ODSCAN_HEADER,
        rows.iter().map(|r| {
            let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
            [
                r.od.to_string(),
                r.t_fw.to_string(),
                r.t_bw.to_string(),
                r.eta.to_string(),
                opt(r.pulse.map(|p| p.t_fw)),
                opt(r.pulse.map(|p| p.t_bw)),
                opt(r.pulse.map(|p| p.eta)),
            ]
        }),
    )
}

pub fn write_waveform(path: &Path, pulse: &PulseWaveform, linewidth_mhz: f64) -> Result<()> {
    write_rows(
        path,
        &WAVEFORM_HEADER,
        pulse.grid.times().zip(&pulse.amp).map(|(t, a)| {
            [units::gamma_time_to_ns(t, linewidth_mhz).to_string(), a.re.to_string(), a.im.to_string()]
        }),
    )
}

pub fn write_tags(path: &Path, stream: &TimeTagStream) -> Result<()> {
    write_rows(path, &TAGS_HEADER, stream.events().iter().map(|(c, t)| [c.to_string(), t.to_string()]))
}

pub fn read_tags(path: &Path) -> Result<TimeTagStream> {
    let mut r = reader(path, &TAGS_HEADER)?;
    let mut events = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let ch: Channel = field(&rec, 0, path)?;
        let t: i64 = field(&rec, 1, path)?;
        events.push((ch, t));
    }
    TimeTagStream::new(events)
}

/// Complex-valued named entries such as density-matrix elements.
pub fn write_tomo(path: &Path, entries: &[(String, num_complex::Complex64)]) -> Result<()> {
    write_rows(path, &TOMO_HEADER, entries.iter().map(|(n, z)| [n.clone(), z.re.to_string(), z.im.to_string()]))
}

pub fn read_tomo(path: &Path) -> Result<Vec<(String, num_complex::Complex64)>> {
    let mut r = reader(path, &TOMO_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let name: String = field(&rec, 0, path)?;
        out.push((name, num_complex::Complex64::new(field(&rec, 1, path)?, field(&rec, 2, path)?)));
    }
    Ok(out)
}

pub fn write_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    write_rows(
        path,
        &HISTOGRAM_HEADER,
        hist.counts.iter().enumerate().map(|(k, c)| [hist.bin_start_ns(k).to_string(), c.to_string()]),
    )
}

/// Reads `basis,count` rows for the H, V, D and R projections.
pub fn read_counts(path: &Path) -> Result<BasisCounts> {
    let mut r = reader(path, &["basis", "count"])?;
    let mut vals = [None; 4];
    for rec in r.records() {
        let rec = rec?;
        let name: String = field(&rec, 0, path)?;
        let k = match name.to_ascii_uppercase().as_str() {
            "H" => 0,
            "V" => 1,
            "D" => 2,
            "R" => 3,
            other => return Err(Error::Config(format!("{}: unknown basis {other:?}", path.display()))),
        };
        if vals[k].replace(field::<f64>(&rec, 1, path)?).is_some() {
            return Err(Error::Config(format!("{}: basis {name} listed twice", path.display())));
        }
    }
    match vals {
        [Some(h), Some(v), Some(d), Some(r)] => BasisCounts::new(h, v, d, r),
        _ => Err(Error::Config(format!("{}: need counts for H, V, D and R", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn tags_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tags.csv");
        let s = TimeTagStream::from_channels(&[0, 10, 2_000_000], &[5, 8_000]).unwrap();
        write_tags(&p, &s).unwrap();
        assert_eq!(read_tags(&p).unwrap().channel(Channel::S2), s.channel(Channel::S2));
        assert_eq!(read_tags(&p).unwrap().len(), 5);
    }

    #[test]
    fn tomo_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let e = vec![("rho01".to_string(), Complex64::new(0.1 + 0.2, -1.0 / 3.0))];
        write_tomo(&p, &e).unwrap();
        assert_eq!(read_tomo(&p).unwrap(), e);
    }

    #[test]
    fn counts_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "basis,count\nH,900\nV,100\nD,500\nR,500\n").unwrap();
        let c = read_counts(&p).unwrap();
        assert_eq!((c.h, c.v, c.d, c.r), (900.0, 100.0, 500.0, 500.0));
        std::fs::write(&p, "basis,count\nH,900\nV,100\nD,500\n").unwrap();
        assert!(read_counts(&p).is_err());
        std::fs::write(&p, "basis,count\nH,900\nH,100\nD,500\nR,1\n").unwrap();
        assert!(read_counts(&p).is_err());
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tags.csv");
        std::fs::write(&p, "ch,t\nS1,0\n").unwrap();
        assert!(matches!(read_tags(&p), Err(Error::Config(_))));
        std::fs::write(&p, "channel,timestamp_ps\nS1,zero\n").unwrap();
        let e = read_tags(&p).unwrap_err().to_string();
        assert!(e.contains(":2:"), "{e}");
    }
}
