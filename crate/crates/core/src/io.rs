//! File formats: P5 graymaps, CSV tables, checksummed label files, fit
//! results and binary photon dumps.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{AccuracyModelFit, AccuracyPoint};
use crate::imaging::{FrequencyDomainImage, GrayImage, ModulationSpectrum};
use crate::label::LabelState;
use crate::photon::{Arrival, PhotonSink, PhotonStream};
use crate::recognizer::{RepeatedReadRow, SweepRow};

pub const LABEL_FORMAT: &str = "smqc-label/1";
pub const PHOTON_DUMP_MAGIC: &[u8; 8] = b"SMQCPH01";

/// Encodes an 8-bit image as binary PGM with the header `P5\n<w> <h>\n255\n`.
pub fn encode_pgm(width: u32, height: u32, values: &[u8]) -> Result<Vec<u8>> {
    if values.len() != width as usize * height as usize {
        return Err(Error::Format {
            what: "P5 image",
            detail: format!("{} values for {width}x{height}", values.len()),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(values);
    Ok(out)
}

pub fn write_pgm(path: &Path, width: u32, height: u32, values: &[u8]) -> Result<()> {
    fs::write(path, encode_pgm(width, height, values)?)?;
    Ok(())
}

pub fn write_image_pgm<I: GrayImage + ?Sized>(path: &Path, image: &I) -> Result<()> {
    write_pgm(path, image.width(), image.height(), image.normalized())
}

/// Decodes any 8-bit PGM. Returns (width, height, values).
pub fn decode_pgm(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>)> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::Format {
            what: "P5 image",
            detail: "missing P5 magic".into(),
        });
    }
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Pnm).map_err(|e| Error::Format {
        what: "P5 image",
        detail: e.to_string(),
    })?;
    let gray = img.into_luma8();
    Ok((gray.width(), gray.height(), gray.into_raw()))
}

pub fn read_pgm(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    decode_pgm(&fs::read(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct PixelValue {
    x: u32,
    y: u32,
    value: f64,
}

/// Raw modulation magnitudes, one `x,y,value` row per pixel in raster order.
pub fn write_magnitudes_csv(path: &Path, image: &FrequencyDomainImage) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, &value) in image.magnitudes.iter().enumerate() {
        let i = i as u32;
        w.serialize(PixelValue {
            x: i % image.width,
            y: i / image.width,
            value,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `x,y,value` rows back into a raster of the given size.
pub fn read_magnitudes_csv(path: &Path, width: u32, height: u32) -> Result<Vec<f64>> {
    let mut out = vec![0.0; width as usize * height as usize];
    for row in csv::Reader::from_path(path)?.deserialize() {
        let r: PixelValue = row?;
        if r.x >= width || r.y >= height {
            return Err(Error::Format {
                what: "magnitude CSV",
                detail: format!("pixel ({}, {}) outside {width}x{height}", r.x, r.y),
            });
        }
        out[(r.y * width + r.x) as usize] = r.value;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub frequency_hz: f64,
    pub magnitude: f64,
    pub normalized: f64,
}

pub fn write_spectrum_csv(path: &Path, spectrum: &ModulationSpectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for ((&frequency_hz, &magnitude), normalized) in
        spectrum.frequencies.iter().zip(&spectrum.magnitudes).zip(spectrum.normalized())
    {
        w.serialize(SpectrumRow {
            frequency_hz,
            magnitude,
            normalized,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectrum_csv(path: &Path) -> Result<Vec<SpectrumRow>> {
    read_rows(path)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    read_rows(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatedReadRecord {
    pub read_index: u32,
    pub survivors: f64,
    pub accuracy: f64,
}

pub fn write_repeated_read_csv(path: &Path, rows: &[RepeatedReadRow]) -> Result<()> {
    let records: Vec<RepeatedReadRecord> = rows
        .iter()
        .map(|r| RepeatedReadRecord {
            read_index: r.read_index,
            survivors: r.survivors,
            accuracy: r.accuracy,
        })
        .collect();
    write_rows(path, &records)
}

pub fn read_repeated_read_csv(path: &Path) -> Result<Vec<RepeatedReadRecord>> {
    read_rows(path)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    csv::Reader::from_path(path)?
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Accuracy observations for fitting. Accepts either an `n0,t,accuracy`
/// table or a sweep table, whose rows are single reads of fresh labels
/// (`n0 = mean_n`, `t = 0`).
pub fn read_accuracy_points(path: &Path) -> Result<Vec<AccuracyPoint>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let has = |name: &str| headers.iter().any(|h| h == name);
    if has("n0") && has("t") && has("accuracy") {
        reader.deserialize().map(|r| r.map_err(Error::from)).collect()
    } else if has("mean_n") && has("accuracy") {
        reader
            .deserialize::<SweepRow>()
            .map(|r| {
                let r = r?;
                Ok(AccuracyPoint {
                    n0: r.mean_n,
                    t: 0.0,
                    accuracy: r.accuracy,
                })
            })
            .collect()
    } else {
        Err(Error::Format {
            what: "accuracy table",
            detail: "expected columns n0,t,accuracy or a sweep table".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub filename: String,
    pub glyph_label: String,
    pub mean_n: f64,
    pub seed: u64,
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    read_rows(path)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelFile {
    format: String,
    checksum: String,
    state: LabelState,
}

/// SHA-256 (hex) of the compact JSON encoding of `state`.
pub fn label_checksum(state: &LabelState) -> Result<String> {
    let bytes = serde_json::to_vec(state)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn encode_label(state: &LabelState) -> Result<Vec<u8>> {
    let file = LabelFile {
        format: LABEL_FORMAT.to_string(),
        checksum: label_checksum(state)?,
        state: state.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&file)?;
    out.push(b'\n');
    Ok(out)
}

/// Parses a label file and verifies its checksum.
pub fn decode_label(bytes: &[u8]) -> Result<LabelState> {
    let file: LabelFile = serde_json::from_slice(bytes)?;
    if file.format != LABEL_FORMAT {
        return Err(Error::Format {
            what: "label file",
            detail: format!("unknown format {:?}", file.format),
        });
    }
    let computed = label_checksum(&file.state)?;
    if computed != file.checksum {
        return Err(Error::Checksum {
            recorded: file.checksum,
            computed,
        });
    }
    Ok(file.state)
}

pub fn write_label(path: &Path, state: &LabelState) -> Result<()> {
    let bytes = encode_label(state)?;
    // Write-then-rename so a failed write never leaves a truncated label.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_label(path: &Path) -> Result<LabelState> {
    decode_label(&fs::read(path)?)
}

pub fn write_fit_json(path: &Path, fit: &AccuracyModelFit) -> Result<()> {
    let mut out = serde_json::to_vec_pretty(fit)?;
    out.push(b'\n');
    fs::write(path, out)?;
    Ok(())
}

pub fn read_fit_json(path: &Path) -> Result<AccuracyModelFit> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Streams photons to a binary file as they are generated.
///
/// Layout (little endian): the 8-byte magic, `u32` width, `u32` height,
/// `f64` exposure duration (s), `f64` modulation frequency (Hz), then one
/// 12-byte record per photon, `u32` pixel index and `f64` arrival time (s),
/// in generation order.
pub struct PhotonDumpWriter<W: Write> {
    out: W,
    mod_frequency: f64,
    count: u64,
    error: Option<std::io::Error>,
}

impl PhotonDumpWriter<BufWriter<File>> {
    pub fn create(path: &Path, width: u32, height: u32, duration: f64, mod_frequency: f64) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), width, height, duration, mod_frequency)
    }
}

impl<W: Write> PhotonDumpWriter<W> {
    pub fn new(mut out: W, width: u32, height: u32, duration: f64, mod_frequency: f64) -> Result<Self> {
        out.write_all(PHOTON_DUMP_MAGIC)?;
        out.write_all(&width.to_le_bytes())?;
        out.write_all(&height.to_le_bytes())?;
        out.write_all(&duration.to_le_bytes())?;
        out.write_all(&mod_frequency.to_le_bytes())?;
        Ok(Self {
            out,
            mod_frequency,
            count: 0,
            error: None,
        })
    }

    /// Flushes and returns the number of photons written, or the first write error.
    pub fn finish(mut self) -> Result<u64> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(self.count)
    }
}

impl<W: Write> PhotonSink for PhotonDumpWriter<W> {
    fn record(&mut self, pixel: u32, arrival: &Arrival) {
        if self.error.is_some() {
            return;
        }
        let mut rec = [0u8; 12];
        rec[..4].copy_from_slice(&pixel.to_le_bytes());
        rec[4..].copy_from_slice(&arrival.time(self.mod_frequency).to_le_bytes());
        match self.out.write_all(&rec) {
            Ok(()) => self.count += 1,
            Err(e) => self.error = Some(e),
        }
    }
}

/// Loads a photon dump into a sorted [`PhotonStream`].
pub fn read_photon_dump(path: &Path) -> Result<PhotonStream> {
    let bad = |detail: &str| Error::Format {
        what: "photon dump",
        detail: detail.to_string(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 32];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    if &header[..8] != PHOTON_DUMP_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let f64_at = |i: usize| f64::from_le_bytes(header[i..i + 8].try_into().unwrap());
    let (width, height) = (u32_at(8), u32_at(12));
    let mut stream = PhotonStream::new(width, height, f64_at(16), f64_at(24));
    let pixels = width as u64 * height as u64;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() % 12 != 0 {
        return Err(bad("truncated record"));
    }
    for rec in body.chunks_exact(12) {
        let pixel = u32::from_le_bytes(rec[..4].try_into().unwrap());
        let time = f64::from_le_bytes(rec[4..].try_into().unwrap());
        if pixel as u64 >= pixels {
            return Err(bad("pixel index outside the canvas"));
        }
        stream.push(pixel, time);
    }
    stream.finish();
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{build_label, Canvas, LabelConfig};
    use tempfile::tempdir;

    fn small_label() -> LabelState {
        let cfg = LabelConfig {
            canvas: Canvas::new(64, 64),
            glyph_scale: 6,
            molecule_count: 5,
            qd_count: 5,
            ..LabelConfig::default()
        };
        build_label("H", &cfg, 9).unwrap()
    }

    #[test]
    fn pgm_header_is_exact() {
        let bytes = encode_pgm(3, 2, &[0, 1, 2, 253, 254, 255]).unwrap();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 1, 2, 253, 254, 255]);
        assert_eq!(decode_pgm(&bytes).unwrap(), (3, 2, vec![0, 1, 2, 253, 254, 255]));
        assert!(encode_pgm(3, 3, &[0; 4]).is_err());
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
    }

    #[test]
    fn label_round_trip_and_tamper_detection() {
        let state = small_label();
        let bytes = encode_label(&state).unwrap();
        assert_eq!(decode_label(&bytes).unwrap(), state);
        assert_eq!(bytes, encode_label(&state).unwrap());

        let text = String::from_utf8(bytes).unwrap();
        let tampered = text.replacen("\"read_count\": 0", "\"read_count\": 7", 1);
        assert_ne!(tampered, text);
        assert!(matches!(decode_label(tampered.as_bytes()), Err(Error::Checksum { .. })));
        assert!(matches!(decode_label(b"{"), Err(Error::Json(_))));
    }

    #[test]
    fn label_file_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("l.json");
        let state = small_label();
        write_label(&path, &state).unwrap();
        assert_eq!(read_label(&path).unwrap(), state);
        assert!(!path.with_extension("tmp").exists());
    }

    #[test]
    fn photon_dump_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.bin");
        let mut w = PhotonDumpWriter::create(&path, 4, 4, 0.1, 1000.0).unwrap();
        let arrival = |cycle, turn: f64| Arrival {
            cycle,
            cos: (turn * std::f64::consts::TAU).cos(),
            sin: (turn * std::f64::consts::TAU).sin(),
            limit: 0.1,
        };
        w.record(3, &arrival(5, 0.25));
        w.record(3, &arrival(1, 0.5));
        w.record(15, &arrival(0, 0.0));
        assert_eq!(w.finish().unwrap(), 3);
        let s = read_photon_dump(&path).unwrap();
        assert_eq!(s.total_count(), 3);
        let p3 = s.pixel(3);
        assert!((p3[0] - 0.0015).abs() < 1e-12 && (p3[1] - 0.00525).abs() < 1e-12);
        assert_eq!(s.pixel(15), &[0.0]);
        assert_eq!((s.width, s.height, s.duration, s.mod_frequency), (4, 4, 0.1, 1000.0));

        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(read_photon_dump(&path).is_err());
    }

    #[test]
    fn tables_round_trip() {
        let dir = tempdir().unwrap();
        let sweep = vec![SweepRow {
            mean_n: 30.0,
            trials: 10,
            correct: 9,
            accuracy: 0.9,
            ci_low: 0.6,
            ci_high: 0.98,
        }];
        let p = dir.path().join("s.csv");
        write_sweep_csv(&p, &sweep).unwrap();
        let header = fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("mean_n,trials,correct,accuracy,ci_low,ci_high\n"));
        assert_eq!(read_sweep_csv(&p).unwrap(), sweep);
        let pts = read_accuracy_points(&p).unwrap();
        assert_eq!(pts[0], AccuracyPoint { n0: 30.0, t: 0.0, accuracy: 0.9 });

        let g = dir.path().join("g.csv");
        fs::write(&g, "n0,t,accuracy\n150,0.9,0.5\n").unwrap();
        assert_eq!(read_accuracy_points(&g).unwrap()[0].t, 0.9);
        fs::write(&g, "a,b\n1,2\n").unwrap();
        assert!(read_accuracy_points(&g).is_err());

        let rr = vec![RepeatedReadRow {
            read_index: 1,
            survivors: 150.0,
            accuracy: 1.0,
            ci_low: 0.9,
            ci_high: 1.0,
        }];
        let r = dir.path().join("r.csv");
        write_repeated_read_csv(&r, &rr).unwrap();
        assert!(fs::read_to_string(&r).unwrap().starts_with("read_index,survivors,accuracy\n"));
        assert_eq!(read_repeated_read_csv(&r).unwrap()[0].survivors, 150.0);

        let m = dir.path().join("m.csv");
        let rows = vec![ManifestRow {
            filename: "freq/00000.pgm".into(),
            glyph_label: "H".into(),
            mean_n: 100.0,
            seed: 42,
        }];
        write_manifest(&m, &rows).unwrap();
        assert!(fs::read_to_string(&m).unwrap().starts_with("filename,glyph_label,mean_n,seed\n"));
        assert_eq!(read_manifest(&m).unwrap(), rows);
    }

    #[test]
    fn magnitude_and_spectrum_csv() {
        let dir = tempdir().unwrap();
        let img = FrequencyDomainImage::from_magnitudes(2, 2, vec![0.0, 1.5, 3.0, 0.25]);
        let p = dir.path().join("f.csv");
        write_magnitudes_csv(&p, &img).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with("x,y,value\n"));
        assert_eq!(read_magnitudes_csv(&p, 2, 2).unwrap(), img.magnitudes);
        assert!(read_magnitudes_csv(&p, 1, 1).is_err());

        let trace = ModulationSpectrum {
            frequencies: vec![900.0, 1000.0],
            magnitudes: vec![2.0, 8.0],
        };
        let s = dir.path().join("spectrum.csv");
        write_spectrum_csv(&s, &trace).unwrap();
        let rows = read_spectrum_csv(&s).unwrap();
        assert!(fs::read_to_string(&s).unwrap().starts_with("frequency_hz,magnitude,normalized\n"));
        assert_eq!(rows[0].normalized, 0.25);
        assert_eq!(rows[1].normalized, 1.0);
    }

    #[test]
    fn fit_json_round_trip() {
        let dir = tempdir().unwrap();
        let fit = AccuracyModelFit {
            beta: -0.9,
            k_dis: 0.1,
            c: 1.0,
            alpha_p: 2.2,
            alpha_p_fixed: true,
            residual_r2: 0.97,
            iterations: 12,
            points: 6,
        };
        let p = dir.path().join("fit.json");
        write_fit_json(&p, &fit).unwrap();
        assert_eq!(read_fit_json(&p).unwrap(), fit);
    }
}
