use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::OpticalConfig;

use super::realize::GeometryMap;

pub const LAYOUT_HEADER: [&str; 6] = ["ix", "iy", "x_nm", "y_nm", "dx_nm", "dy_nm"];

/// Writes one row per cell, `ix,iy,x_nm,y_nm,dx_nm,dy_nm`, in row-major
/// order (`iy` outer). `x_nm`/`y_nm` are the cell origins.
pub fn export_layout(geom: &GeometryMap, config: &OpticalConfig, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(LAYOUT_HEADER).map_err(to_io)?;
    let pitch_nm = config.pitch * 1e9;
    let n = geom.n();
    for iy in 0..n {
        for ix in 0..n {
            let u = geom.unit(iy, ix);
            w.write_record(&[
                ix.to_string(),
                iy.to_string(),
                (ix as f64 * pitch_nm).to_string(),
                (iy as f64 * pitch_nm).to_string(),
                u.dx_nm.to_string(),
                u.dy_nm.to_string(),
            ])
            .map_err(to_io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metasurface::library::synth_library;
    use crate::metasurface::realize::realize;

    #[test]
    fn two_by_two_layout() {
        let lib = synth_library(4).unwrap();
        let (geom, _) = realize(2, 400e-9, &[0.0, 1.6, 3.2, 4.8], &[0.0; 4], &lib).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layout.csv");
        let cfg = OpticalConfig::visible(2);
        export_layout(&geom, &cfg, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ix,iy,x_nm,y_nm,dx_nm,dy_nm");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,0,0,"));
        assert!(lines[2].starts_with("1,0,400,0,"));
        assert!(lines[3].starts_with("0,1,0,400,"));

        let again = dir.path().join("again.csv");
        export_layout(&geom, &cfg, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let lib = synth_library(2).unwrap();
        let (geom, _) = realize(1, 400e-9, &[0.0], &[0.0], &lib).unwrap();
        let err = export_layout(
            &geom,
            &OpticalConfig::visible(1),
            Path::new("/nonexistent-dir/layout.csv"),
        );
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
