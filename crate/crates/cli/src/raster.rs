//! Node-by-time rasters of phase and amplitude, written as CSV and PNG.
//!
//! CSV layout: one row per sample, `time_s` followed by one column per
//! node. PNG layout: one pixel column per sample, one pixel row per node
//! (node 0 at the top).

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use cvnn::network::wrap_phase;
use cvnn::Trajectory;
use image::{ImageBuffer, Luma, Rgb};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRaster {
    pub times: Vec<f64>,
    /// `phases[k][j]`: node `j` at sample `k`, in `(-pi, pi]`.
    pub phases: Vec<Vec<f64>>,
    pub amplitudes: Option<Vec<Vec<f64>>>,
}

impl PhaseRaster {
    pub fn from_trajectory(tr: &Trajectory) -> Self {
        Self {
            times: tr.times.clone(),
            phases: tr
                .states
                .iter()
                .map(|s| s.iter().map(|z| wrap_phase(z.arg())).collect())
                .collect(),
            amplitudes: Some(
                tr.states
                    .iter()
                    .map(|s| s.iter().map(|z| z.norm()).collect())
                    .collect(),
            ),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.phases.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.n_nodes();
        let bad = self.phases.len() != self.times.len()
            || self.phases.iter().any(|r| r.len() != n)
            || self.amplitudes.as_ref().is_some_and(|a| {
                a.len() != self.times.len() || a.iter().any(|r| r.len() != n)
            });
        if bad || n == 0 {
            return Err(CliError::Core(cvnn::CvnnError::invalid(
                "raster dimensions are inconsistent or empty",
            )));
        }
        Ok(())
    }
}

fn write_matrix_csv(path: &Path, times: &[f64], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = rows.first().map_or(0, Vec::len);
    write!(w, "time_s")?;
    for j in 0..n {
        write!(w, ",node_{j}")?;
    }
    writeln!(w)?;
    for (t, row) in times.iter().zip(rows) {
        write!(w, "{t}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Fully saturated hue wheel; `h` in `[0, 1)`.
fn hue_to_rgb(h: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h6 % 2.0 - 1.0).abs();
    let (r, g, b) = match h6 as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |c: f64| (c * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

pub fn phase_color(phase: f64) -> [u8; 3] {
    hue_to_rgb((phase + PI) / (2.0 * PI))
}

pub fn render_phase_png(r: &PhaseRaster, path: &Path) -> Result<(), CliError> {
    let (w, h) = (r.times.len() as u32, r.n_nodes() as u32);
    let img = ImageBuffer::from_fn(w, h, |x, y| Rgb(phase_color(r.phases[x as usize][y as usize])));
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Grayscale, black at zero and white at the raster's largest amplitude.
pub fn render_amplitude_png(amps: &[Vec<f64>], path: &Path) -> Result<(), CliError> {
    let w = amps.len() as u32;
    let h = amps.first().map_or(0, Vec::len) as u32;
    let max = amps
        .iter()
        .flatten()
        .cloned()
        .filter(|a| a.is_finite())
        .fold(0.0, f64::max);
    let img = ImageBuffer::from_fn(w, h, |x, y| {
        let a = amps[x as usize][y as usize];
        let v = if max > 0.0 { (a / max).clamp(0.0, 1.0) } else { 0.0 };
        Luma([(v * 255.0).round() as u8])
    });
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Writes `<stem>_phase.csv`, `<stem>_phase.png` and, when amplitudes are
/// present, `<stem>_amplitude.csv` and `<stem>_amplitude.png`.
pub fn render_raster(r: &PhaseRaster, dir: &Path, stem: &str) -> Result<(), CliError> {
    r.validate()?;
    write_matrix_csv(&dir.join(format!("{stem}_phase.csv")), &r.times, &r.phases)?;
    render_phase_png(r, &dir.join(format!("{stem}_phase.png")))?;
    if let Some(a) = &r.amplitudes {
        write_matrix_csv(&dir.join(format!("{stem}_amplitude.csv")), &r.times, a)?;
        render_amplitude_png(a, &dir.join(format!("{stem}_amplitude.png")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn raster(phase: f64, samples: usize, nodes: usize) -> PhaseRaster {
        let mut tr = Trajectory::default();
        for k in 0..samples {
            tr.push(k as f64 * 0.01, vec![Complex64::from_polar(1.0, phase); nodes]);
        }
        PhaseRaster::from_trajectory(&tr)
    }

    #[test]
    fn constant_phase_is_uniform_image() {
        let dir = tempfile::tempdir().unwrap();
        let r = raster(0.7, 5, 4);
        render_raster(&r, dir.path(), "c").unwrap();
        let img = image::open(dir.path().join("c_phase.png")).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (5, 4));
        let first = *img.get_pixel(0, 0);
        assert!(img.pixels().all(|p| *p == first));
        assert_eq!(first.0, phase_color(0.7));
    }

    #[test]
    fn csv_and_png_dimensions_agree() {
        let dir = tempfile::tempdir().unwrap();
        let r = raster(-1.0, 7, 3);
        render_raster(&r, dir.path(), "d").unwrap();
        let csv = std::fs::read_to_string(dir.path().join("d_phase.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 7);
        assert_eq!(lines[0].split(',').count(), 1 + 3);
        let img = image::open(dir.path().join("d_amplitude.png")).unwrap();
        assert_eq!((img.width(), img.height()), (7, 3));
    }

    #[test]
    fn bytes_are_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let r = raster(2.0, 6, 6);
        render_raster(&r, a.path(), "x").unwrap();
        render_raster(&r, b.path(), "x").unwrap();
        for f in ["x_phase.png", "x_phase.csv", "x_amplitude.png"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn hue_wheel_is_cyclic() {
        assert_eq!(phase_color(-PI), phase_color(PI));
        assert_ne!(phase_color(0.0), phase_color(PI));
    }
}
